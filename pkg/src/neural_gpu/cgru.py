"""Convolutional gated recurrent unit with hard-clipped gates.

One unit maps a mental image s of shape [w, h, m] to

    cgru(s) = u * s + (1 - u) * tanh(conv(r * s, U) + B)
    u = hsig(conv(s, U') + B'),  r = hsig(conv(s, U'') + B'')

where hsig is the clipped sigmoid max(0, min(1, 1.2*sigmoid(x) - 0.1)) and
biases broadcast over the spatial axes.  Forward returns a cache holding the
intermediates the exact backward pass needs.  Batched variants take a
leading batch axis.
"""

from dataclasses import dataclass

import numpy as np

from neural_gpu import tensor

# hsig clamps where 1.2*sigmoid(x) - 0.1 leaves (0, 1); its derivative is
# zero there (including the boundary) and 1.2*sig*(1-sig) inside
HSIG_SCALE = 1.2
HSIG_SHIFT = 0.1


@dataclass
class CgruParams:
    """Three kernel banks [k_w, k_h, m, m] and three bias vectors [m]."""

    kernel: np.ndarray        # U: candidate
    update_kernel: np.ndarray # U': update gate
    reset_kernel: np.ndarray  # U'': reset gate
    bias: np.ndarray          # B
    update_bias: np.ndarray   # B'
    reset_bias: np.ndarray    # B''

    def __post_init__(self):
        if not (self.kernel.shape == self.update_kernel.shape == self.reset_kernel.shape):
            raise ValueError("the three kernel banks must share one shape")
        m = self.kernel.shape[2]
        for b in (self.bias, self.update_bias, self.reset_bias):
            if b.shape != (m,):
                raise ValueError(f"bias shape {b.shape} does not match m={m}")

    @property
    def channels(self):
        return self.kernel.shape[2]

    def arrays(self):
        """All parameter arrays, in serialization order U, U', U'', B, B', B''."""
        return [self.kernel, self.update_kernel, self.reset_kernel,
                self.bias, self.update_bias, self.reset_bias]


def init_cgru_params(m, kernel_w, kernel_h, init_scale, rng, dtype=np.float32):
    """Uniform [-init_scale, init_scale] init for all kernels and biases."""
    def uni(shape):
        return rng.uniform(-init_scale, init_scale, shape).astype(dtype)

    return CgruParams(
        kernel=uni((kernel_w, kernel_h, m, m)),
        update_kernel=uni((kernel_w, kernel_h, m, m)),
        reset_kernel=uni((kernel_w, kernel_h, m, m)),
        bias=uni((m,)),
        update_bias=uni((m,)),
        reset_bias=uni((m,)),
    )


def hard_sigmoid(x):
    """max(0, min(1, 1.2*sigmoid(x) - 0.1)); accepts scalars or arrays."""
    return np.clip(HSIG_SCALE * tensor.sigmoid(np.asarray(x)) - HSIG_SHIFT, 0.0, 1.0)[()]


@dataclass
class CgruCache:
    """Intermediates of one forward evaluation, consumed by the backward."""

    params: CgruParams
    s_in: np.ndarray
    sig_u: np.ndarray  # raw sigmoid of the update pre-activation
    sig_r: np.ndarray
    u: np.ndarray
    r: np.ndarray
    rs: np.ndarray     # r * s_in, input of the candidate convolution
    cand: np.ndarray


def _gate(s, kern, bias):
    sig = tensor.sigmoid(tensor.conv2d_same_batch(s, kern) + bias)
    return sig, np.clip(HSIG_SCALE * sig - HSIG_SHIFT, 0.0, 1.0)


def cgru_forward_batch(s, p):
    """One CGRU step on a batch [B, w, h, m]; returns (new state, cache)."""
    if s.shape[3] != p.channels:
        raise ValueError(f"state channels {s.shape[3]} != params m={p.channels}")
    sig_u, u = _gate(s, p.update_kernel, p.update_bias)
    sig_r, r = _gate(s, p.reset_kernel, p.reset_bias)
    rs = r * s
    cand = np.tanh(tensor.conv2d_same_batch(rs, p.kernel) + p.bias)
    s_new = u * s + (1.0 - u) * cand
    return s_new, CgruCache(p, s, sig_u, sig_r, u, r, rs, cand)


def _hsig_grad_mask(sig):
    """d hsig/dx at the pre-activation, expressed through sig = sigmoid(x)."""
    raw = HSIG_SCALE * sig - HSIG_SHIFT
    inside = (raw > 0.0) & (raw < 1.0)
    return np.where(inside, HSIG_SCALE * sig * (1.0 - sig), 0.0).astype(sig.dtype)


def cgru_backward_batch(cache, g_out):
    """Exact gradients of cgru_forward_batch.

    Returns (g_s, CgruParams-shaped gradients).  Bias gradients sum over
    batch and spatial positions.
    """
    if g_out.shape != cache.s_in.shape:
        raise ValueError(
            f"g_out shape {g_out.shape} does not match cached state {cache.s_in.shape}"
        )
    p, s = cache.params, cache.s_in
    g_u = g_out * (s - cache.cand)
    g_cand = g_out * (1.0 - cache.u)
    g_s = g_out * cache.u

    g_zc = g_cand * (1.0 - cache.cand * cache.cand)
    g_rs, g_kern = tensor.conv2d_backward_batch(cache.rs, p.kernel, g_zc)
    g_bias = g_zc.sum(axis=(0, 1, 2))
    g_r = g_rs * s
    g_s += g_rs * cache.r

    g_zu = g_u * _hsig_grad_mask(cache.sig_u)
    g_su, g_update = tensor.conv2d_backward_batch(s, p.update_kernel, g_zu)
    g_s += g_su

    g_zr = g_r * _hsig_grad_mask(cache.sig_r)
    g_sr, g_reset = tensor.conv2d_backward_batch(s, p.reset_kernel, g_zr)
    g_s += g_sr

    grads = CgruParams(
        kernel=g_kern, update_kernel=g_update, reset_kernel=g_reset,
        bias=g_bias, update_bias=g_zu.sum(axis=(0, 1, 2)),
        reset_bias=g_zr.sum(axis=(0, 1, 2)),
    )
    return g_s, grads


def cgru_forward(s, p):
    """Single-image [w, h, m] CGRU step."""
    tensor.check_image(s)
    s_new, cache = cgru_forward_batch(s[None], p)
    return s_new[0], cache


def cgru_backward(cache, g_out):
    """Single-image backward matching cgru_forward."""
    g_s, grads = cgru_backward_batch(cache, g_out[None])
    return g_s[0], grads


def apply_dropout(s, rate, rng):
    """Inverted dropout over the whole mental image (training only).

    Returns (masked state, mask); mask entries are exactly 0 or 1/(1-rate)
    and a fresh mask is drawn per call.
    """
    if not 0.0 <= rate < 0.5:
        raise ValueError(f"dropout rate must be in [0, 0.5), got {rate}")
    dtype = s.dtype
    if rate == 0.0:
        mask = np.ones_like(s)
    else:
        keep = (rng.random(s.shape) >= rate).astype(dtype)
        mask = keep / dtype.type(1.0 - rate)
    return s * mask, mask
