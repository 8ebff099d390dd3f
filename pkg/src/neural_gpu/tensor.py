"""Dense-tensor primitives: elementwise math and 2-D same-padding convolution.

A mental image is a numpy array of shape [w, h, m] (width, height, channels),
a kernel bank an array of shape [k_w, k_h, m, m'] with odd k_w, k_h.  Batched
variants take a leading batch axis.  Two precisions are supported: float64
for gradient checking, float32 for training.
"""

import numpy as np

from neural_gpu import backend


def check_image(s, name="s"):
    if s.ndim != 3:
        raise ValueError(f"{name} must have shape [w, h, m], got {s.shape}")


def check_kernel(kern, name="kernel"):
    if kern.ndim != 4:
        raise ValueError(f"{name} must have shape [k_w, k_h, m, m'], got {kern.shape}")
    kw, kh = kern.shape[:2]
    if kw % 2 == 0 or kh % 2 == 0:
        raise ValueError(f"kernel dims k_w, k_h must be odd, got {kern.shape}")


def conv2d_same_batch(s, kern):
    """Same-padding stride-1 convolution of a batch of images [B, w, h, m].

    Returns [B, w, h, m'].  Accumulation order per output element is fixed
    (kernel width, then height, then input channel), identical across
    backends and dtypes.
    """
    if s.shape[3] != kern.shape[2]:
        raise ValueError(
            f"channel mismatch: image {s.shape[1:]} vs kernel {kern.shape}"
        )
    out = np.zeros(s.shape[:3] + (kern.shape[3],), dtype=s.dtype)
    backend.get().conv2d_fwd(s, kern, out)
    return out


def conv2d_backward_batch(s, kern, g_out):
    """Adjoint of conv2d_same_batch: gradients w.r.t. s and kern.

    g_kern is summed over the batch in example order.
    """
    expected = s.shape[:3] + (kern.shape[3],)
    if g_out.shape != expected:
        raise ValueError(f"g_out shape {g_out.shape} does not match {expected}")
    g_s = np.zeros_like(s)
    g_kern = np.zeros_like(kern)
    kern_t = np.ascontiguousarray(kern.transpose(0, 1, 3, 2))
    backend.get().conv2d_bwd(s, kern, kern_t, g_out, g_s, g_kern)
    return g_s, g_kern


def conv2d_same(s, kern):
    """Convolve one image [w, h, m] with a kernel bank [k_w, k_h, m, m']."""
    check_image(s)
    check_kernel(kern)
    return conv2d_same_batch(s[None], kern)[0]


def conv2d_backward(s, kern, g_out):
    """Gradients of sum(g_out * conv2d_same(s, kern)) w.r.t. s and kern."""
    check_image(s)
    check_kernel(kern)
    check_image(g_out, "g_out")
    g_s, g_kern = conv2d_backward_batch(s[None], kern, g_out[None])
    return g_s[0], g_kern


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def add(a, b):
    _check_same_shape(a, b)
    return a + b


def sub(a, b):
    _check_same_shape(a, b)
    return a - b


def mul(a, b):
    _check_same_shape(a, b)
    return a * b


def scale(a, c):
    return a * a.dtype.type(c)


def clamp(a, lo, hi):
    return np.clip(a, lo, hi)


def tanh(x):
    return np.tanh(x)


def dtanh_from_value(t):
    """tanh'(x) expressed through t = tanh(x): 1 - t^2."""
    return 1.0 - t * t


def sigmoid(x):
    # exp(-x) may overflow for very negative x; the result still saturates
    # correctly (1/inf -> 0), so just silence the warning.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def dsigmoid_from_value(sig):
    """sigma'(x) expressed through sig = sigma(x): sig * (1 - sig)."""
    return sig * (1.0 - sig)
