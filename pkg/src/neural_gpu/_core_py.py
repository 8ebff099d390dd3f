"""Pure-numpy fallback for the compiled convolution kernels.

Same contracts as ``neural_gpu._core``.  The forward pass keeps the same
fixed accumulation order (kernel width, then height, then input channel), so
forward results are bit-identical across backends; backward gradients agree
to floating-point rounding.  Slower: the offset/channel loops run in Python,
only batch and spatial axes are vectorized.
"""

import numpy as np


def _padded(s, kw, kh):
    nb, w, h, m = s.shape
    sp = np.zeros((nb, w + kw - 1, h + kh - 1, m), dtype=s.dtype)
    sp[:, kw // 2 : kw // 2 + w, kh // 2 : kh // 2 + h, :] = s
    return sp


def conv2d_fwd(s, kern, out):
    nb, w, h, m = s.shape
    kw, kh, _, mo = kern.shape
    sp = _padded(s, kw, kh)
    for u in range(kw):
        for v in range(kh):
            win = sp[:, u : u + w, v : v + h, :]
            for c in range(m):
                out += win[:, :, :, c, None] * kern[u, v, c, :]


def conv2d_bwd(s, kern, kern_t, g_out, g_s, g_kern):
    nb, w, h, m = s.shape
    kw, kh, _, mo = kern.shape
    sp = _padded(s, kw, kh)
    gp = np.zeros_like(sp)
    for u in range(kw):
        for v in range(kh):
            win = sp[:, u : u + w, v : v + h, :]
            gwin = gp[:, u : u + w, v : v + h, :]
            for i in range(mo):
                gwin += g_out[:, :, :, i, None] * kern_t[u, v, i, :]
            for c in range(m):
                g_kern[u, v, c, :] += np.einsum("bxy,bxyi->i", win[:, :, :, c], g_out)
    g_s += gp[:, kw // 2 : kw // 2 + w, kh // 2 : kh // 2 + h, :]
