"""Independent reference implementations used as test oracles.

Everything here is deliberately written in plain Python (lists, math.*)
without reusing the package's vectorized code paths: naive triple-loop
convolution, a scalar transcription of the CGRU/model equations, scalar
softmax NLL, the scalar Adam recurrence, and central finite differences.
"""

import math

import numpy as np


def naive_conv2d(s, kern):
    """Direct evaluation of the convolution sum, one output element at a
    time, in the fixed (u, v, c) order; out-of-range reads are skipped."""
    w, h, m = s.shape
    kw, kh, _, mo = kern.shape
    out = np.zeros((w, h, mo), dtype=s.dtype)
    for x in range(w):
        for y in range(h):
            for i in range(mo):
                acc = s.dtype.type(0.0)
                for u in range(kw):
                    xx = x + u - kw // 2
                    if not 0 <= xx < w:
                        continue
                    for v in range(kh):
                        yy = y + v - kh // 2
                        if not 0 <= yy < h:
                            continue
                        for c in range(m):
                            acc += s[xx, yy, c] * kern[u, v, c, i]
                out[x, y, i] = acc
    return out


def central_diff(f, x, eps=1e-5):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + eps
        fp = f(x)
        flat[idx] = orig - eps
        fm = f(x)
        flat[idx] = orig
        gflat[idx] = (fp - fm) / (2.0 * eps)
    return grad


def rel_err(a, b, floor=1e-6):
    """Max elementwise |a-b| / max(|a|, |b|, floor)."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


# scalar model transcription -------------------------------------------------

def scalar_sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def scalar_hard_sigmoid(x):
    return max(0.0, min(1.0, 1.2 * scalar_sigmoid(x) - 0.1))


def scalar_conv(s, kern):
    """Convolution over nested lists s[w][h][m], kern[kw][kh][m][mo]."""
    w, h, m = len(s), len(s[0]), len(s[0][0])
    kw, kh, mo = len(kern), len(kern[0]), len(kern[0][0][0])
    out = [[[0.0] * mo for _ in range(h)] for _ in range(w)]
    for x in range(w):
        for y in range(h):
            for i in range(mo):
                acc = 0.0
                for u in range(kw):
                    xx = x + u - kw // 2
                    if not 0 <= xx < w:
                        continue
                    for v in range(kh):
                        yy = y + v - kh // 2
                        if not 0 <= yy < h:
                            continue
                        for c in range(m):
                            acc += s[xx][yy][c] * kern[u][v][c][i]
                out[x][y][i] = acc
    return out


def scalar_cgru(s, kernel, update_kernel, reset_kernel, bias, update_bias,
                reset_bias):
    """One CGRU step on nested lists, hard-clipped gates on both u and r."""
    w, h, m = len(s), len(s[0]), len(s[0][0])
    zu = scalar_conv(s, update_kernel)
    zr = scalar_conv(s, reset_kernel)
    u = [[[scalar_hard_sigmoid(zu[x][y][i] + update_bias[i]) for i in range(m)]
          for y in range(h)] for x in range(w)]
    r = [[[scalar_hard_sigmoid(zr[x][y][i] + reset_bias[i]) for i in range(m)]
          for y in range(h)] for x in range(w)]
    rs = [[[r[x][y][i] * s[x][y][i] for i in range(m)]
           for y in range(h)] for x in range(w)]
    zc = scalar_conv(rs, kernel)
    return [[[u[x][y][i] * s[x][y][i]
              + (1.0 - u[x][y][i]) * math.tanh(zc[x][y][i] + bias[i])
              for i in range(m)] for y in range(h)] for x in range(w)]


def scalar_forward(inputs, params, config):
    """Scalar transcription of the full forward pass: embed, n steps of the
    l-layer stack cycling relaxed sets, output projection.  Returns logits
    as nested lists [n][I]."""
    emb = params.embedding.tolist()
    out_mat = params.output.tolist()
    w, m, vocab = config.width, config.channels, config.vocab_size
    n = len(inputs)
    s = [[[0.0] * m for _ in range(n)] for _ in range(w)]
    for k, sym in enumerate(inputs):
        s[0][k] = list(emb[int(sym)])
    for t in range(n):
        for lp in params.sets[t % config.relax_sets]:
            s = scalar_cgru(
                s, lp.kernel.tolist(), lp.update_kernel.tolist(),
                lp.reset_kernel.tolist(), lp.bias.tolist(),
                lp.update_bias.tolist(), lp.reset_bias.tolist())
    return [[sum(s[0][k][c] * out_mat[c][i] for c in range(m))
             for i in range(vocab)] for k in range(n)]


def scalar_nll(logits, targets):
    """Mean softmax negative log likelihood over positions, scalar math."""
    total = 0.0
    for row, tgt in zip(logits, targets):
        mx = max(row)
        lse = mx + math.log(sum(math.exp(v - mx) for v in row))
        total += lse - row[int(tgt)]
    return total / len(targets)


def scalar_adam(grads, lr, beta1, beta2, eps):
    """Scalar Adam recurrence over a fixed 1-D gradient sequence; returns
    the parameter trajectory starting from 0."""
    theta, m, v = 0.0, 0.0, 0.0
    history = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        theta -= lr * mhat / (math.sqrt(vhat) + eps)
        history.append(theta)
    return history
