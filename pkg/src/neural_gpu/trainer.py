"""Training regime: curriculum over operand lengths, Adam with global-norm
clipping, annealed gradient noise, recurrent-state dropout, and the
relaxation-pull schedule, plus a grid-search driver.

One training step samples a length (80% the curriculum length, 20% uniform),
draws a minibatch, runs forward/backward with dropout and the relaxation
penalty, clips the global gradient norm to 1, adds annealed Gaussian noise,
and applies Adam.  Crossing the accuracy threshold at the current length
advances the curriculum and multiplies the relaxation pull; when the
curriculum reaches the maximal length the relaxed parameter sets are
averaged and training continues with a single shared set.
"""

import itertools
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from neural_gpu import evaluate, model, tasks

# grid-search value lists; the dropout grid follows the 6/9/13.5% recipe
GRID_DEFAULTS = {
    "learning_rate": [0.01, 0.003, 0.001],
    "init_scale": [0.2, 0.1, 0.05],
    "relaxation_pull_factor": [1.2, 1.5, 2.0],
    "curriculum_threshold": [0.8, 0.9, 0.98],
    "noise_scale": [0.0, 0.5, 1.0],
    "dropout_rate": [0.06, 0.09, 0.135],
}


@dataclass
class TrainConfig:
    learning_rate: float = 0.003
    init_scale: float = 0.1
    relaxation_pull_factor: float = 1.5
    curriculum_threshold: float = 0.9
    noise_scale: float = 0.5
    dropout_rate: float = 0.09
    minibatch_size: int = 32
    max_train_length: int = 20     # bits; sequences reach 2*20+1 = 41 symbols
    initial_pull: float = 1e-4
    max_steps: int = 20000
    seed: int = 0
    examples_per_length: int = 10000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-4
    accuracy_window: int = 100     # trailing minibatches at the current length
    min_window: int = 20           # batches required before the window counts
    stop_threshold: float = 0.995  # windowed accuracy that ends a unified run
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 0.5:
            raise ValueError("dropout_rate must lie in [0, 0.5)")
        if not 0.0 < self.curriculum_threshold <= 1.0:
            raise ValueError("curriculum_threshold must lie in (0, 1]")
        for name in ("learning_rate", "init_scale", "relaxation_pull_factor",
                     "noise_scale", "initial_pull"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.max_train_length < 1 or self.minibatch_size < 1:
            raise ValueError("max_train_length and minibatch_size must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class OptState:
    """Adam first/second moments mirroring ModelParams, plus step counter."""

    m: list
    v: list
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()])


@dataclass
class CurriculumState:
    max_d: int
    d: int = 1
    pull: float = 0.0
    phase: str = "relaxed"  # -> "unified" once the maximal length is reached
    window: deque = field(default_factory=lambda: deque(maxlen=100))


def clip_global_norm(grads, cap=1.0):
    """Scale the list of gradient arrays so the global L2 norm is <= cap.

    Mutates in place and returns (grads, pre-clip norm).  NaNs abort.
    """
    total = 0.0
    for g in grads:
        total += float(np.sum(np.asarray(g, dtype=np.float64) ** 2))
    if not np.isfinite(total):
        bad = [i for i, g in enumerate(grads) if not np.isfinite(g).all()]
        raise ValueError(f"non-finite gradients in arrays {bad}")
    norm = float(np.sqrt(total))
    if norm > cap:
        scale = cap / norm
        for g in grads:
            g *= g.dtype.type(scale)
    return grads, norm


def noise_std(step, noise_scale, frac_incorrect):
    """Annealed gradient-noise std: scale * step^(-1/4) * frac_incorrect."""
    if step < 1:
        raise ValueError("step counter starts at 1")
    return noise_scale * step ** -0.25 * frac_incorrect


def add_gradient_noise(grads, std, rng):
    for g in grads:
        g += rng.standard_normal(g.shape).astype(g.dtype) * g.dtype.type(std)


def adam_step(params, grads, opt, lr, beta1=0.9, beta2=0.999, eps=1e-4):
    """One Adam update with bias correction; returns fresh params.

    Moments update in place; the clipped/noised gradients must already be in
    final form.
    """
    opt.t += 1
    t = opt.t
    new_arrays = []
    for theta, g, m, v in zip(params.arrays(), grads.arrays(), opt.m, opt.v):
        dt = theta.dtype.type
        m *= dt(beta1)
        m += dt(1.0 - beta1) * g
        v *= dt(beta2)
        v += dt(1.0 - beta2) * g * g
        mhat = m / dt(1.0 - beta1 ** t)
        vhat = v / dt(1.0 - beta2 ** t)
        new_arrays.append(theta - dt(lr) * mhat / (np.sqrt(vhat) + dt(eps)))
    return model.from_arrays(new_arrays, len(params.sets), len(params.sets[0])), opt


def curriculum_sample_length(state, rng):
    """80%: the current curriculum length; 20%: uniform over 1..max_d."""
    if rng.random() < 0.2:
        return int(rng.integers(1, state.max_d + 1))
    return state.d


def curriculum_advance(state, params, pull_factor, threshold, min_window=1):
    """Advance the curriculum when the windowed accuracy clears the threshold.

    On an advance the length grows (clamped at max_d) and the pull is
    multiplied by pull_factor; when the maximal length is reached the relaxed
    sets are averaged and the phase flips to unified.  Returns
    (params, unified_now).
    """
    if len(state.window) < min_window:
        return params, False
    if float(np.mean(state.window)) <= threshold:
        return params, False
    if state.d < state.max_d:
        state.d += 1
        state.pull *= pull_factor
        state.window.clear()
    unified_now = state.d == state.max_d and state.phase == "relaxed"
    if unified_now:
        params = model.average_relaxed_sets(params)
        state.phase = "unified"
    return params, unified_now


def _share_set_gradients(grads):
    """Sum per-set gradients and broadcast the total to every set, so that
    training after unification acts on one shared parameter set."""
    r = len(grads.sets)
    for j in range(len(grads.sets[0])):
        for k in range(6):
            total = grads.sets[0][j].arrays()[k].copy()
            for i in range(1, r):
                total += grads.sets[i][j].arrays()[k]
            for i in range(r):
                grads.sets[i][j].arrays()[k][...] = total


def batch_accuracy(logits, targets):
    """Fraction of sequences decoded fully correctly, PAD included."""
    return float((model.decode(logits) == targets).all(axis=1).mean())


@dataclass
class TrainResult:
    status: str            # converged | max-steps | diverged
    params: model.ModelParams
    model_config: model.ModelConfig
    config: TrainConfig
    curriculum: CurriculumState
    log: list              # dicts: step, d, loss, seq_acc, pull, noise_std
    steps_run: int


def default_model_config(task, **overrides):
    """Paper-shaped model for a task: 2 layers, width 4, 24 channels, r=6."""
    overrides.setdefault("vocab_size", tasks.vocab_size(task))
    return model.ModelConfig(**overrides)


class _Pools:
    """Lazy per-length training pools, deterministic given the seed."""

    def __init__(self, task, config):
        self.task, self.config = task, config
        self.cache = {}

    def get(self, d):
        if d not in self.cache:
            examples = tasks.make_dataset(
                self.task, [d], self.config.examples_per_length,
                seed=self.config.seed, split="train")
            self.cache[d] = (np.stack([e.input for e in examples]),
                             np.stack([e.target for e in examples]))
        return self.cache[d]


def train(task, config, model_config=None):
    """Run the full training regime; deterministic given config.seed."""
    mc = model_config if model_config is not None else default_model_config(task)
    if mc.vocab_size < tasks.vocab_size(task):
        raise ValueError(
            f"vocab_size {mc.vocab_size} too small for task {task} "
            f"(needs {tasks.vocab_size(task)})")
    dtype = config.np_dtype
    rng = np.random.default_rng(config.seed)
    params = model.init_params(mc, config.init_scale, rng, dtype)
    opt = OptState.for_params(params)
    cur = CurriculumState(max_d=config.max_train_length,
                          pull=config.initial_pull,
                          window=deque(maxlen=config.accuracy_window))
    pools = _Pools(task, config)
    log = []
    status = "max-steps"
    step = 0

    for step in range(1, config.max_steps + 1):
        d_batch = curriculum_sample_length(cur, rng)
        inputs, targets = pools.get(d_batch)
        idx = rng.integers(0, inputs.shape[0], config.minibatch_size)
        batch_in, batch_tgt = inputs[idx], targets[idx]

        logits, trace = model.forward_batch(
            batch_in, params, mc, mode="train",
            dropout=config.dropout_rate, rng=rng)
        pull = cur.pull if (cur.phase == "relaxed" and mc.relax_sets > 1) else 0.0
        loss_val = model.loss_batch(logits, batch_tgt)
        loss_val += model.relaxation_penalty(params, pull)
        acc = batch_accuracy(logits, batch_tgt)
        std = noise_std(step, config.noise_scale, 1.0 - acc)
        log.append({"step": step, "d": int(d_batch), "loss": float(loss_val),
                    "seq_acc": acc, "pull": float(pull), "noise_std": float(std)})

        if not np.isfinite(loss_val):
            status = "diverged"
            break
        grads = model.backward(trace, batch_tgt, pull=pull)
        if cur.phase == "unified" and mc.relax_sets > 1:
            _share_set_gradients(grads)
        try:
            clip_global_norm(grads.arrays(), 1.0)
        except ValueError:
            status = "diverged"
            break
        if std > 0.0:
            add_gradient_noise(grads.arrays(), std, rng)
        params, opt = adam_step(params, grads, opt, config.learning_rate,
                                config.adam_beta1, config.adam_beta2,
                                config.adam_epsilon)

        if d_batch == cur.d:
            cur.window.append(acc)
            was_unified = cur.phase == "unified"
            params, unified_now = curriculum_advance(
                cur, params, config.relaxation_pull_factor,
                config.curriculum_threshold, config.min_window)
            if unified_now and mc.relax_sets > 1:
                # averaging moved the parameters; restart the moments
                opt = OptState.for_params(params)
            if (was_unified and len(cur.window) >= config.min_window
                    and float(np.mean(cur.window)) >= config.stop_threshold):
                status = "converged"
                break

    return TrainResult(status, params, mc, config, cur, log, step)


def _grid_combos(grid):
    names = sorted(grid)
    for values in itertools.product(*(grid[name] for name in names)):
        yield dict(zip(names, values))


def _run_grid_point(args):
    task, base, mc, overrides, seed, eval_lengths, eval_samples = args
    record = {"overrides": overrides, "seed": seed, "status": "failed",
              "steps": 0, "accuracies": {}, "error": None, "params": None}
    try:
        config = replace(base, seed=seed, **overrides)
        result = train(task, config, mc)
        record["status"] = result.status
        record["steps"] = result.steps_run
        record["params"] = result.params
        for length in eval_lengths:
            examples = evaluate.eval_examples(task, length, eval_samples,
                                              seed=config.seed)
            acc = evaluate.sequence_accuracy(result.params, result.model_config,
                                             examples)
            record["accuracies"][int(length)] = acc
    except Exception as exc:  # a failed run must not sink the search
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def grid_search(task, grid, seeds, base_config=None, model_config=None,
                eval_lengths=None, eval_samples=200, workers=1):
    """Train every grid combination x seed and rank by held-out accuracy.

    Ranking is by sequence accuracy at the longest eval length, ties broken
    by the shorter lengths; failed runs rank last and carry the error text.
    Results are independent of the worker count.
    """
    base = base_config if base_config is not None else TrainConfig()
    mc = model_config if model_config is not None else default_model_config(task)
    if eval_lengths is None:
        eval_lengths = [base.max_train_length, base.max_train_length + 5]
    jobs = [(task, base, mc, overrides, seed, tuple(eval_lengths), eval_samples)
            for overrides in _grid_combos(grid) for seed in seeds]
    if workers > 1:
        import multiprocessing
        with multiprocessing.Pool(workers) as pool:
            records = pool.map(_run_grid_point, jobs)
    else:
        records = [_run_grid_point(job) for job in jobs]

    def rank_key(rec):
        accs = [rec["accuracies"].get(int(l), -1.0)
                for l in sorted(eval_lengths, reverse=True)]
        return tuple(accs)

    records.sort(key=rank_key, reverse=True)
    return records
