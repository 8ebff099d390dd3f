import numpy as np
import pytest

from neural_gpu import tasks
from neural_gpu.tasks import BIT0, BIT1, OP, PAD


def sym(*vals):
    return np.asarray(vals, dtype=np.int64)


class TestEncodings:
    def test_badd_5_plus_14(self):
        # input 1,0,1,0,+,0,1,1,1 adds 5 and 14; output 19 = 1,1,0,0,1
        ex = tasks.make_arith_example("badd", 4, 5, 14)
        assert ex.input.tolist() == [2, 1, 2, 1, 3, 1, 2, 2, 2]
        assert ex.target.tolist() == [2, 2, 1, 1, 2, 0, 0, 0, 0]
        assert tasks.oracle_check(ex)

    def test_badd_9_plus_5(self):
        # input 1,0,0,1,+,1,0,1,0 adds 9 and 5; output 14 = 0,1,1,1
        ex = tasks.make_arith_example("badd", 4, 9, 5)
        assert ex.input.tolist() == [2, 1, 1, 2, 3, 2, 1, 2, 1]
        assert ex.target.tolist() == [1, 2, 2, 2, 0, 0, 0, 0, 0]

    def test_bmul_6_times_10(self):
        # input 0,1,1,0,.,0,1,0,1 multiplies 6 and 10; 60 = 0,0,1,1,1,1
        ex = tasks.make_arith_example("bmul", 4, 6, 10)
        assert ex.input.tolist() == [1, 2, 2, 1, 3, 1, 2, 1, 2]
        assert ex.target.tolist() == [1, 1, 2, 2, 2, 2, 0, 0, 0]

    def test_duplicate_0011(self):
        ex = tasks.make_bits_example("duplicate", 4, [0, 0, 1, 1])
        assert ex.input.tolist() == [1, 1, 2, 2, 0, 0, 0, 0]
        assert ex.target.tolist() == [1, 1, 2, 2, 1, 1, 2, 2]

    def test_sort_counts_zeros(self):
        ex = tasks.make_bits_example("sort", 8, [1, 0, 1, 1, 0, 0, 1, 0])
        assert ex.input.tolist() == [2, 1, 2, 2, 1, 1, 2, 1]
        assert ex.target.tolist() == [1, 1, 1, 1, 2, 2, 2, 2]

    def test_zero_plus_zero(self):
        ex = tasks.make_arith_example("badd", 3, 0, 0)
        assert ex.target.tolist() == [1, 0, 0, 0, 0, 0, 0]  # single 0 digit

    def test_multiply_by_zero(self):
        ex = tasks.make_arith_example("bmul", 3, 5, 0)
        assert ex.target.tolist() == [1, 0, 0, 0, 0, 0, 0]

    def test_multiply_by_one_copies(self):
        ex = tasks.make_arith_example("bmul", 3, 5, 1)
        assert ex.target.tolist() == [2, 1, 2, 0, 0, 0, 0]

    def test_copy_and_reverse(self):
        ex = tasks.make_bits_example("copy", 3, [1, 0, 1])
        assert np.array_equal(ex.target, ex.input)
        ex = tasks.make_bits_example("reverse", 4, [1, 0, 0, 1])
        assert np.array_equal(ex.target, ex.input)  # palindrome
        ex = tasks.make_bits_example("reverse", 3, [1, 1, 0])
        assert ex.target.tolist() == [1, 2, 2]


class TestLengthLaw:
    @pytest.mark.parametrize("task,factor,extra", [
        ("badd", 2, 1), ("bmul", 2, 1), ("duplicate", 2, 0),
        ("copy", 1, 0), ("reverse", 1, 0), ("sort", 1, 0),
    ])
    def test_length_formula(self, task, factor, extra, rng):
        for d in [1, 2, 7, 41, 2000]:
            assert tasks.seq_length(task, d) == factor * d + extra
        for d in [1, 3, 17]:
            ex = tasks.gen_example(task, d, rng)
            n = tasks.seq_length(task, d)
            assert len(ex.input) == len(ex.target) == n

    def test_vocab(self):
        assert tasks.vocab_size("badd") == 4
        assert tasks.vocab_size("bmul") == 4
        for t in ("copy", "reverse", "duplicate", "sort"):
            assert tasks.vocab_size(t) == 3

    def test_symbols_within_vocab(self, rng):
        for task in tasks.TASKS:
            for d in (1, 5, 12):
                ex = tasks.gen_example(task, d, rng)
                assert ex.input.max() < tasks.vocab_size(task)
                assert ex.target.max() < tasks.vocab_size(task)
                assert ex.input.min() >= 0 and ex.target.min() >= 0


class TestOracle:
    def test_generated_examples_pass(self, rng):
        for task in tasks.TASKS:
            for _ in range(200):
                d = int(rng.integers(1, 65))
                assert tasks.oracle_check(tasks.gen_example(task, d, rng))

    def test_flipped_target_bit_fails(self, rng):
        ex = tasks.gen_badd(8, rng)
        ex.target[0] = BIT0 if ex.target[0] == BIT1 else BIT1
        assert not tasks.oracle_check(ex)

    def test_flipped_bits_fail_everywhere(self, rng):
        for task in tasks.TASKS:
            ex = tasks.gen_example(task, 6, rng)
            pos = int(rng.integers(0, len(ex.target)))
            ex.target[pos] = (ex.target[pos] + 1) % 3
            assert not tasks.oracle_check(ex)

    def test_malformed_examples_rejected(self, rng):
        ex = tasks.gen_badd(4, rng)
        bad = tasks.Example("badd", 4, ex.input[:-1], ex.target[:-1])
        with pytest.raises(ValueError):
            tasks.oracle_check(bad)
        swapped = ex.input.copy()
        swapped[4] = BIT0  # operator position overwritten
        with pytest.raises(ValueError):
            tasks.oracle_check(tasks.Example("badd", 4, swapped, ex.target))
        with pytest.raises(ValueError):
            tasks.oracle_check(tasks.Example("nope", 4, ex.input, ex.target))

    def test_big_operand_multiplication(self, rng):
        for _ in range(20):
            assert tasks.oracle_check(tasks.gen_bmul(64, rng))


class TestDatasets:
    def test_same_seed_same_dataset(self):
        a = tasks.make_dataset("badd", range(1, 5), 10, seed=7)
        b = tasks.make_dataset("badd", range(1, 5), 10, seed=7)
        assert len(a) == len(b) == 40
        for x, y in zip(a, b):
            assert np.array_equal(x.input, y.input)
            assert np.array_equal(x.target, y.target)

    def test_splits_differ(self):
        a = tasks.make_dataset("badd", [10], 20, seed=7, split="train")
        b = tasks.make_dataset("badd", [10], 20, seed=7, split="eval")
        assert any(not np.array_equal(x.input, y.input) for x, y in zip(a, b))

    def test_seeds_differ(self):
        a = tasks.make_dataset("copy", [10], 20, seed=7)
        b = tasks.make_dataset("copy", [10], 20, seed=8)
        assert any(not np.array_equal(x.input, y.input) for x, y in zip(a, b))

    def test_file_roundtrip(self, tmp_path, rng):
        examples = tasks.make_dataset("bmul", [1, 3, 5], 7, seed=3)
        path = tmp_path / "data.txt"
        tasks.write_dataset(examples, path)
        back = tasks.read_dataset(path)
        assert len(back) == len(examples)
        for x, y in zip(examples, back):
            assert x.task == y.task and x.d == y.d
            assert np.array_equal(x.input, y.input)
            assert np.array_equal(x.target, y.target)
        # writing again produces identical bytes
        path2 = tmp_path / "data2.txt"
        tasks.write_dataset(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_enumerate_all_is_exhaustive_and_valid(self):
        all_badd = tasks.enumerate_all("badd", 2)
        assert len(all_badd) == 16 == tasks.space_size("badd", 2)
        inputs = {tuple(e.input) for e in all_badd}
        assert len(inputs) == 16
        assert all(tasks.oracle_check(e) for e in all_badd)
        all_copy = tasks.enumerate_all("copy", 3)
        assert len(all_copy) == 8 == tasks.space_size("copy", 3)

    def test_operand_bits_marginally_uniform(self):
        # chi-square per bit position over 1e5 examples at d=4
        examples = tasks.make_dataset("badd", [4], 100_000, seed=11)
        bits = np.stack([np.concatenate([e.input[:4], e.input[5:]]) - 1
                         for e in examples])
        n = bits.shape[0]
        for pos in range(8):
            ones = int(bits[:, pos].sum())
            chi2 = (ones - n / 2) ** 2 / (n / 2) + ((n - ones) - n / 2) ** 2 / (n / 2)
            assert chi2 < 10.83, f"bit {pos} biased (p < 0.001)"
