"""Task generators and exact oracles for the six algorithmic tasks.

Symbol encoding is shared across tasks: PAD=0, bit 0 -> 1, bit 1 -> 2, and
the operator ('+' for badd, '.' for bmul) -> 3.  Numbers are lower-endian
(least-significant bit first).  For d-bit operands the sequence length is
n = 2d+1 (badd/bmul), 2d (duplicate), or d (copy/reverse/sort); input and
target always share the same length, with PAD filling the tail.
"""

from dataclasses import dataclass

import numpy as np

PAD = 0
BIT0 = 1
BIT1 = 2
OP = 3

TASKS = ("badd", "bmul", "copy", "reverse", "duplicate", "sort")
_TASK_CODE = {t: i for i, t in enumerate(TASKS)}
_SPLIT_CODE = {"train": 0, "eval": 1}

OP_CHAR = {"badd": "+", "bmul": "."}


def vocab_size(task):
    """4 for the arithmetic tasks (PAD, 0, 1, op), 3 otherwise."""
    _check_task(task)
    return 4 if task in ("badd", "bmul") else 3


def seq_length(task, d):
    """Sequence length n for operand bit-length d."""
    _check_task(task)
    if task in ("badd", "bmul"):
        return 2 * d + 1
    if task == "duplicate":
        return 2 * d
    return d


def _check_task(task):
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; choices: {TASKS}")


@dataclass
class Example:
    task: str
    d: int
    input: np.ndarray   # symbol sequence, length n
    target: np.ndarray  # symbol sequence, length n


def _bits_to_int(bits):
    val = 0
    for b in reversed(bits):
        val = (val << 1) | int(b)
    return val


def _int_to_bits(value):
    """Lower-endian bits without high-order zeros; 0 encodes as a single 0."""
    length = max(value.bit_length(), 1)
    return [(value >> i) & 1 for i in range(length)]


def _bits_to_symbols(bits):
    return np.asarray(bits, dtype=np.int64) + 1


def make_arith_example(task, d, x, y):
    """badd/bmul example for operands 0 <= x, y < 2^d."""
    n = seq_length(task, d)
    xb = [(x >> i) & 1 for i in range(d)]
    yb = [(y >> i) & 1 for i in range(d)]
    inp = np.concatenate([_bits_to_symbols(xb), [OP], _bits_to_symbols(yb)])
    result = x + y if task == "badd" else x * y
    rb = _int_to_bits(result)
    target = np.full(n, PAD, dtype=np.int64)
    target[: len(rb)] = _bits_to_symbols(rb)
    return Example(task, d, inp, target)


def make_bits_example(task, d, bits):
    """copy/reverse/duplicate/sort example from a d-long bit array."""
    bits = np.asarray(bits, dtype=np.int64)
    sym = _bits_to_symbols(bits)
    if task == "copy":
        return Example(task, d, sym, sym.copy())
    if task == "reverse":
        return Example(task, d, sym, sym[::-1].copy())
    if task == "sort":
        return Example(task, d, sym, np.sort(bits) + 1)
    if task == "duplicate":
        inp = np.concatenate([sym, np.full(d, PAD, dtype=np.int64)])
        return Example(task, d, inp, np.concatenate([sym, sym]))
    _check_task(task)
    raise ValueError(f"{task} examples are built from operands, not bits")


def gen_example(task, d, rng):
    """One random example; operand bits are i.i.d. uniform."""
    _check_task(task)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if task in ("badd", "bmul"):
        x = _bits_to_int(rng.integers(0, 2, d))
        y = _bits_to_int(rng.integers(0, 2, d))
        return make_arith_example(task, d, x, y)
    return make_bits_example(task, d, rng.integers(0, 2, d))


def gen_badd(d, rng):
    return gen_example("badd", d, rng)


def gen_bmul(d, rng):
    return gen_example("bmul", d, rng)


def gen_copy(d, rng):
    return gen_example("copy", d, rng)


def gen_reverse(d, rng):
    return gen_example("reverse", d, rng)


def gen_duplicate(d, rng):
    return gen_example("duplicate", d, rng)


def gen_sort(d, rng):
    return gen_example("sort", d, rng)


def _parse_bits(symbols, what):
    symbols = np.asarray(symbols)
    if symbols.size and not np.all((symbols == BIT0) | (symbols == BIT1)):
        raise ValueError(f"malformed example: non-bit symbol in {what}")
    return symbols - 1


def oracle_check(example):
    """Recompute the target independently of the generators.

    Arithmetic targets are rebuilt through arbitrary-precision integers,
    sequence targets by direct recomputation from the parsed input.  Returns
    False on any target mismatch; malformed inputs are rejected with a
    ValueError.
    """
    task, d = example.task, example.d
    _check_task(task)
    inp, tgt = np.asarray(example.input), np.asarray(example.target)
    n = seq_length(task, d)
    if inp.shape != (n,) or tgt.shape != (n,):
        raise ValueError(f"malformed example: lengths must be {n}")

    if task in ("badd", "bmul"):
        if inp[d] != OP:
            raise ValueError(f"malformed example: operator must sit at index {d}")
        x = _bits_to_int(_parse_bits(inp[:d], "first operand"))
        y = _bits_to_int(_parse_bits(inp[d + 1 :], "second operand"))
        result = x + y if task == "badd" else x * y
        rb = _int_to_bits(result)
        expect = np.full(n, PAD, dtype=np.int64)
        expect[: len(rb)] = _bits_to_symbols(rb)
        return bool(np.array_equal(tgt, expect))

    if task == "duplicate":
        if not np.all(inp[d:] == PAD):
            raise ValueError("malformed example: duplicate input tail must be PAD")
        bits = _parse_bits(inp[:d], "input")
        expect = np.concatenate([bits, bits]) + 1
        return bool(np.array_equal(tgt, expect))

    bits = _parse_bits(inp, "input")
    if task == "copy":
        expect = bits + 1
    elif task == "reverse":
        expect = bits[::-1] + 1
    else:  # sort: as many 0s as the input holds, then 1s
        zeros = int(np.sum(bits == 0))
        expect = np.concatenate([np.zeros(zeros, np.int64),
                                 np.ones(d - zeros, np.int64)]) + 1
    return bool(np.array_equal(tgt, expect))


def make_dataset(task, d_values, examples_per_length, seed, split="train"):
    """Deterministic example list over the given operand lengths.

    Train and eval splits draw from independent seeded streams, so they are
    disjoint with overwhelming probability at the lengths where sampling is
    used.
    """
    if examples_per_length < 1:
        raise ValueError("examples_per_length must be >= 1")
    if split not in _SPLIT_CODE:
        raise ValueError(f"split must be one of {sorted(_SPLIT_CODE)}")
    _check_task(task)
    examples = []
    for d in d_values:
        rng = np.random.default_rng(
            [seed, _TASK_CODE[task], _SPLIT_CODE[split], d])
        examples.extend(gen_example(task, d, rng)
                        for _ in range(examples_per_length))
    return examples


def space_size(task, d):
    """Number of distinct inputs at operand length d."""
    _check_task(task)
    return 4 ** d if task in ("badd", "bmul") else 2 ** d


def enumerate_all(task, d):
    """Every distinct example at operand length d, in lexicographic order."""
    _check_task(task)
    if task in ("badd", "bmul"):
        return [make_arith_example(task, d, x, y)
                for x in range(2 ** d) for y in range(2 ** d)]
    return [make_bits_example(task, d, [(i >> j) & 1 for j in range(d)])
            for i in range(2 ** d)]


def write_dataset(examples, path):
    """One example per line: task d input_symbols target_symbols."""
    with open(path, "w") as fh:
        for ex in examples:
            fields = [ex.task, str(ex.d)]
            fields += [str(s) for s in ex.input]
            fields += [str(s) for s in ex.target]
            fh.write(" ".join(fields) + "\n")


def read_dataset(path):
    examples = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            task, d = parts[0], int(parts[1])
            n = seq_length(task, d)
            if len(parts) != 2 + 2 * n:
                raise ValueError(
                    f"{path}:{line_no}: expected {2 + 2 * n} fields, got {len(parts)}")
            syms = np.asarray([int(p) for p in parts[2:]], dtype=np.int64)
            examples.append(Example(task, d, syms[:n], syms[n:]))
    return examples
