/* Hot convolution loops.  Each output row is accumulated in a stack buffer
 * in one pass so it stays cache-resident; the innermost channel loops run
 * over contiguous memory and auto-vectorize. */

#include "_convkernels.h"

#include <math.h>

#define MAX_CHANNELS 512

/* Forward: out[b,x,y,i] = sum_{u,v,c} s[b,x+u,y+v,c] * kern[u,v,c,i] with
 * centered offsets, zero padding, and fixed (u, v, c) summation order.
 * Plain mul+add (no FMA contraction: build with -ffp-contract=off) keeps it
 * bit-identical to the naive reference. */
#define DEFINE_FWD(NAME, REAL)                                               \
void NAME(const REAL *restrict s, const REAL *restrict kern,                 \
          REAL *restrict out, ptrdiff_t nb, ptrdiff_t w, ptrdiff_t h,        \
          ptrdiff_t m, ptrdiff_t kw, ptrdiff_t kh, ptrdiff_t mo) {           \
    REAL acc[MAX_CHANNELS];                                                  \
    for (ptrdiff_t b = 0; b < nb; b++)                                       \
    for (ptrdiff_t x = 0; x < w; x++)                                        \
    for (ptrdiff_t y = 0; y < h; y++) {                                      \
        for (ptrdiff_t i = 0; i < mo; i++) acc[i] = 0;                       \
        for (ptrdiff_t u = 0; u < kw; u++) {                                 \
            ptrdiff_t xx = x + u - kw / 2;                                   \
            if (xx < 0 || xx >= w) continue;                                 \
            for (ptrdiff_t v = 0; v < kh; v++) {                             \
                ptrdiff_t yy = y + v - kh / 2;                               \
                if (yy < 0 || yy >= h) continue;                             \
                const REAL *sp = s + ((b * w + xx) * h + yy) * m;            \
                const REAL *kp = kern + (u * kh + v) * m * mo;               \
                for (ptrdiff_t c = 0; c < m; c++) {                          \
                    REAL sv = sp[c];                                         \
                    for (ptrdiff_t i = 0; i < mo; i++)                       \
                        acc[i] += sv * kp[c * mo + i];                       \
                }                                                            \
            }                                                                \
        }                                                                    \
        REAL *op = out + ((b * w + x) * h + y) * mo;                         \
        for (ptrdiff_t i = 0; i < mo; i++) op[i] = acc[i];                   \
    }                                                                        \
}

DEFINE_FWD(ngpu_conv2d_fwd_f32, float)
DEFINE_FWD(ngpu_conv2d_fwd_f64, double)

/* Adjoint.  Gradients carry no bit-exactness contract, so explicit FMA is
 * used for speed.  g_kern accumulates over the batch in example order and
 * must be zero-initialized by the caller. */
#define DEFINE_BWD(NAME, REAL, FMA)                                          \
void NAME(const REAL *restrict s, const REAL *restrict kern,                 \
          const REAL *restrict kern_t, const REAL *restrict g_out,           \
          REAL *restrict g_s, REAL *restrict g_kern, ptrdiff_t nb,           \
          ptrdiff_t w, ptrdiff_t h, ptrdiff_t m, ptrdiff_t kw,               \
          ptrdiff_t kh, ptrdiff_t mo) {                                      \
    REAL acc[MAX_CHANNELS];                                                  \
    for (ptrdiff_t b = 0; b < nb; b++)                                       \
    for (ptrdiff_t x = 0; x < w; x++)                                        \
    for (ptrdiff_t y = 0; y < h; y++) {                                      \
        /* input-gradient row: gather from downstream output rows */        \
        for (ptrdiff_t c = 0; c < m; c++) acc[c] = 0;                        \
        for (ptrdiff_t u = 0; u < kw; u++) {                                 \
            ptrdiff_t xx = x - (u - kw / 2);                                 \
            if (xx < 0 || xx >= w) continue;                                 \
            for (ptrdiff_t v = 0; v < kh; v++) {                             \
                ptrdiff_t yy = y - (v - kh / 2);                             \
                if (yy < 0 || yy >= h) continue;                             \
                const REAL *gp = g_out + ((b * w + xx) * h + yy) * mo;       \
                const REAL *ktp = kern_t + (u * kh + v) * mo * m;            \
                for (ptrdiff_t i = 0; i < mo; i++) {                         \
                    REAL gv = gp[i];                                         \
                    for (ptrdiff_t c = 0; c < m; c++)                        \
                        acc[c] = FMA(gv, ktp[i * m + c], acc[c]);            \
                }                                                            \
            }                                                                \
        }                                                                    \
        REAL *gsp = g_s + ((b * w + x) * h + y) * m;                         \
        for (ptrdiff_t c = 0; c < m; c++) gsp[c] = acc[c];                   \
        /* kernel-gradient contributions of the output row at (x, y) */     \
        const REAL *gp = g_out + ((b * w + x) * h + y) * mo;                 \
        for (ptrdiff_t u = 0; u < kw; u++) {                                 \
            ptrdiff_t xx = x + u - kw / 2;                                   \
            if (xx < 0 || xx >= w) continue;                                 \
            for (ptrdiff_t v = 0; v < kh; v++) {                             \
                ptrdiff_t yy = y + v - kh / 2;                               \
                if (yy < 0 || yy >= h) continue;                             \
                const REAL *sp = s + ((b * w + xx) * h + yy) * m;            \
                REAL *gkp = g_kern + (u * kh + v) * m * mo;                  \
                for (ptrdiff_t c = 0; c < m; c++) {                          \
                    REAL sv = sp[c];                                         \
                    for (ptrdiff_t i = 0; i < mo; i++)                       \
                        gkp[c * mo + i] = FMA(sv, gp[i], gkp[c * mo + i]);   \
                }                                                            \
            }                                                                \
        }                                                                    \
    }                                                                        \
}

DEFINE_BWD(ngpu_conv2d_bwd_f32, float, fmaf)
DEFINE_BWD(ngpu_conv2d_bwd_f64, double, fma)
