"""The full network: embedding, n-step unfolded CGRU stack, output head.

An input of n symbols is embedded into the first width row of a mental image
of shape [w, n, m].  The image then evolves for exactly n time-steps, each
applying l CGRU layers; with parameter-sharing relaxation, time-step t uses
parameter set t mod r.  Logits are read off the first width row through the
output matrix.  Loss is mean per-position softmax NLL, PAD positions
included.
"""

from dataclasses import dataclass, field

import numpy as np

from neural_gpu import cgru
from neural_gpu.cgru import CgruParams


@dataclass
class ModelConfig:
    layers: int = 2        # l: CGRU layers per time-step
    width: int = 4         # w: mental image width
    channels: int = 24     # m
    kernel_w: int = 3
    kernel_h: int = 3
    vocab_size: int = 4    # I
    relax_sets: int = 6    # r: relaxed parameter sets

    def __post_init__(self):
        if min(self.layers, self.width, self.channels, self.relax_sets) < 1:
            raise ValueError(f"invalid model config {self}")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        if self.kernel_w % 2 == 0 or self.kernel_h % 2 == 0:
            raise ValueError("kernel dims must be odd")


@dataclass
class ModelParams:
    """Embedding, output matrix, and r relaxed sets of l CgruParams.

    Parameter count is independent of sequence length; the embedding and
    output matrices are shared across time and excluded from relaxation.
    """

    embedding: np.ndarray           # [I, m]
    output: np.ndarray              # [m, I]
    sets: list                      # r lists of l CgruParams

    def arrays(self):
        """All parameter arrays in serialization order: E, O, then set-major,
        layer-minor CGRU arrays."""
        out = [self.embedding, self.output]
        for layer_set in self.sets:
            for lp in layer_set:
                out.extend(lp.arrays())
        return out

    @property
    def dtype(self):
        return self.embedding.dtype

    def astype(self, dtype):
        arrays = [a.astype(dtype) for a in self.arrays()]
        return from_arrays(arrays, len(self.sets), len(self.sets[0]))

    def copy(self):
        return self.astype(self.dtype)


def from_arrays(arrays, relax_sets, layers):
    """Rebuild ModelParams from a flat array list in arrays() order."""
    embedding, output = arrays[0], arrays[1]
    rest = arrays[2:]
    sets = []
    for i in range(relax_sets):
        layer_set = []
        for j in range(layers):
            a = rest[(i * layers + j) * 6 : (i * layers + j) * 6 + 6]
            layer_set.append(CgruParams(*a))
        sets.append(layer_set)
    return ModelParams(embedding, output, sets)


def zeros_like_params(params):
    return from_arrays([np.zeros_like(a) for a in params.arrays()],
                       len(params.sets), len(params.sets[0]))


def init_params(config, init_scale, rng, dtype=np.float32):
    """Uniform [-init_scale, init_scale] init.

    The r relaxed sets start as identical copies of one draw, so relaxation
    begins at zero penalty and r > 1 reduces to shared parameters until
    training moves the sets apart.
    """
    embedding = rng.uniform(-init_scale, init_scale,
                            (config.vocab_size, config.channels)).astype(dtype)
    output = rng.uniform(-init_scale, init_scale,
                         (config.channels, config.vocab_size)).astype(dtype)
    base = [cgru.init_cgru_params(config.channels, config.kernel_w,
                                  config.kernel_h, init_scale, rng, dtype)
            for _ in range(config.layers)]
    sets = [[CgruParams(*[a.copy() for a in lp.arrays()]) for lp in base]
            for _ in range(config.relax_sets)]
    return ModelParams(embedding, output, sets)


def embed_batch(inputs, embedding, config):
    """Starting images [B, w, n, m] with E rows in the first width row."""
    inputs = np.asarray(inputs)
    if inputs.size == 0:
        raise ValueError("empty input")
    if inputs.min() < 0 or inputs.max() >= embedding.shape[0]:
        raise ValueError(
            f"symbol out of vocabulary (I={embedding.shape[0]}): "
            f"{inputs.min()}..{inputs.max()}"
        )
    nb, n = inputs.shape
    s0 = np.zeros((nb, config.width, n, config.channels), dtype=embedding.dtype)
    s0[:, 0, :, :] = embedding[inputs]
    return s0


def embed(input_symbols, embedding, config):
    """Starting image [w, n, m] for one symbol sequence."""
    return embed_batch(np.asarray(input_symbols)[None], embedding, config)[0]


@dataclass
class StepTrace:
    """Per-step caches of one forward pass, plus optional retained states."""

    params: ModelParams
    config: ModelConfig
    inputs: np.ndarray
    mode: str
    steps: list           # per step: (dropout mask or None, [CgruCache] * l)
    s_fin: np.ndarray
    logits: np.ndarray
    states: list = field(default=None)  # s_0..s_n when retained


def forward_batch(inputs, params, config, mode="eval", dropout=0.0, rng=None,
                  keep_states=False):
    """Run n = sequence length time-steps on a batch [B, n] of inputs.

    mode "train" applies fresh inverted dropout to the whole mental image
    once per time-step (before the layer stack) and records caches for
    backward; mode "eval" is deterministic and cache-free.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    inputs = np.asarray(inputs)
    train = mode == "train"
    if train and dropout > 0.0 and rng is None:
        raise ValueError("training with dropout needs an rng")
    s = embed_batch(inputs, params.embedding, config)
    n = inputs.shape[1]
    r = config.relax_sets
    states = [s.copy()] if keep_states else None
    steps = []
    for t in range(n):
        mask = None
        if train and dropout > 0.0:
            s, mask = cgru.apply_dropout(s, dropout, rng)
        caches = []
        for lp in params.sets[t % r]:
            s, cache = cgru.cgru_forward_batch(s, lp)
            if train:
                caches.append(cache)
        steps.append((mask, caches))
        if keep_states:
            states.append(s.copy())
    logits = s[:, 0, :, :] @ params.output
    return logits, StepTrace(params, config, inputs, mode, steps, s, logits, states)


def forward(input_symbols, params, config, mode="eval", dropout=0.0, rng=None,
            keep_states=False):
    """Single-sequence forward; returns (logits [n, I], StepTrace)."""
    logits, trace = forward_batch(np.asarray(input_symbols)[None], params,
                                  config, mode, dropout, rng, keep_states)
    if trace.states is not None:
        trace.states = [s[0] for s in trace.states]
    return logits[0], trace


def decode(logits):
    """Per-position argmax; ties break toward the lowest symbol index."""
    return np.argmax(logits, axis=-1)


def _log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def loss(logits, target):
    """Mean over positions of -log softmax(logits)[target], PAD included."""
    target = np.asarray(target)
    if logits.shape[0] != target.shape[0]:
        raise ValueError(f"length mismatch: {logits.shape[0]} vs {target.shape[0]}")
    logp = _log_softmax(np.asarray(logits, dtype=np.float64))
    return float(-logp[np.arange(len(target)), target].mean())


def loss_batch(logits, targets):
    """Mean per-example loss over a batch of equal-length sequences."""
    targets = np.asarray(targets)
    if logits.shape[:2] != targets.shape:
        raise ValueError(f"shape mismatch: {logits.shape} vs {targets.shape}")
    logp = _log_softmax(np.asarray(logits, dtype=np.float64))
    nb, n = targets.shape
    picked = logp[np.arange(nb)[:, None], np.arange(n)[None, :], targets]
    return float(-picked.mean())


def _set_stats(params):
    """Per-position mean over the r sets for every CGRU parameter array."""
    r, l = len(params.sets), len(params.sets[0])
    means = []
    for j in range(l):
        stacks = [np.stack([params.sets[i][j].arrays()[k] for i in range(r)])
                  for k in range(6)]
        means.append([st.mean(axis=0) for st in stacks])
    return means


def relaxation_penalty(params, pull):
    """pull * sum over parameter positions of squared distance to the
    cross-set mean; embedding and output matrices are excluded."""
    if pull < 0:
        raise ValueError("pull must be nonnegative")
    r = len(params.sets)
    if r == 1 or pull == 0.0:
        return 0.0
    total = 0.0
    for j in range(len(params.sets[0])):
        for k in range(6):
            stack = np.stack([params.sets[i][j].arrays()[k] for i in range(r)])
            if (stack == stack[0]).all():
                continue  # exactly zero; also keeps unified sets penalty-free
            d = stack - stack.mean(axis=0)
            total += float(np.sum(d.astype(np.float64) ** 2))
    return pull * total


def average_relaxed_sets(params):
    """Replace every relaxed set by the elementwise cross-set mean."""
    r, l = len(params.sets), len(params.sets[0])
    means = _set_stats(params)
    sets = [[CgruParams(*[m.copy() for m in means[j]]) for j in range(l)]
            for _ in range(r)]
    return ModelParams(params.embedding.copy(), params.output.copy(), sets)


def backward(trace, targets, pull=0.0, params=None):
    """Gradient of loss_batch + relaxation_penalty for every parameter.

    Requires a train-mode trace produced by the exact params object (passing
    different params rejects the trace as stale); dropout masks recorded in
    the forward are reused.
    """
    if params is not None and params is not trace.params:
        raise ValueError("stale trace: it was produced by different params")
    params, config = trace.params, trace.config
    targets = np.asarray(targets)
    if trace.mode != "train":
        raise ValueError("backward needs a train-mode trace")
    if targets.ndim == 1:
        targets = targets[None]
    if targets.shape != trace.inputs.shape:
        raise ValueError(
            f"targets shape {targets.shape} does not match inputs {trace.inputs.shape}"
        )
    nb, n = targets.shape
    dtype = params.dtype
    r = config.relax_sets

    # softmax NLL gradient, averaged over batch and positions
    z = trace.logits - trace.logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=-1, keepdims=True)
    g_logits = probs.astype(dtype)
    g_logits[np.arange(nb)[:, None], np.arange(n)[None, :], targets] -= 1.0
    g_logits /= dtype.type(nb * n)

    grads = zeros_like_params(params)
    first_row = trace.s_fin[:, 0, :, :]                        # [B, n, m]
    grads.output[...] = np.einsum("bkc,bki->ci", first_row, g_logits)
    g_s = np.zeros_like(trace.s_fin)
    g_s[:, 0, :, :] = g_logits @ params.output.T

    for t in reversed(range(n)):
        mask, caches = trace.steps[t]
        if not caches:
            raise ValueError("stale or eval-mode trace: no caches recorded")
        g_set = grads.sets[t % r]
        for j in reversed(range(config.layers)):
            if caches[j].params is not params.sets[t % r][j]:
                raise ValueError("stale trace: params changed since forward")
            g_s, g_layer = cgru.cgru_backward_batch(caches[j], g_s)
            for acc, g in zip(g_set[j].arrays(), g_layer.arrays()):
                acc += g
        if mask is not None:
            g_s *= mask

    np.add.at(grads.embedding, trace.inputs.ravel(),
              g_s[:, 0, :, :].reshape(-1, config.channels))

    if pull > 0.0 and r > 1:
        for j in range(config.layers):
            for k in range(6):
                stack = np.stack([params.sets[i][j].arrays()[k] for i in range(r)])
                if (stack == stack[0]).all():
                    continue
                mean = stack.mean(axis=0)
                for i in range(r):
                    grads.sets[i][j].arrays()[k][...] += (2.0 * pull) * (stack[i] - mean)
    return grads
