#ifndef NEURAL_GPU_CONVKERNELS_H
#define NEURAL_GPU_CONVKERNELS_H

#include <stddef.h>

/* Batched 2-D same-padding convolution over [nb, w, h, m] images with a
 * [kw, kh, m, mo] kernel bank, and its adjoint.  kw, kh odd; mo <= 512.
 * The forward accumulates each output element in fixed (u, v, c) order with
 * separate multiply and add, so results are bit-reproducible; the backward
 * uses fused multiply-add. */

void ngpu_conv2d_fwd_f32(const float *s, const float *kern, float *out,
                         ptrdiff_t nb, ptrdiff_t w, ptrdiff_t h, ptrdiff_t m,
                         ptrdiff_t kw, ptrdiff_t kh, ptrdiff_t mo);
void ngpu_conv2d_fwd_f64(const double *s, const double *kern, double *out,
                         ptrdiff_t nb, ptrdiff_t w, ptrdiff_t h, ptrdiff_t m,
                         ptrdiff_t kw, ptrdiff_t kh, ptrdiff_t mo);

void ngpu_conv2d_bwd_f32(const float *s, const float *kern,
                         const float *kern_t, const float *g_out, float *g_s,
                         float *g_kern, ptrdiff_t nb, ptrdiff_t w,
                         ptrdiff_t h, ptrdiff_t m, ptrdiff_t kw,
                         ptrdiff_t kh, ptrdiff_t mo);
void ngpu_conv2d_bwd_f64(const double *s, const double *kern,
                         const double *kern_t, const double *g_out,
                         double *g_s, double *g_kern, ptrdiff_t nb,
                         ptrdiff_t w, ptrdiff_t h, ptrdiff_t m, ptrdiff_t kw,
                         ptrdiff_t kh, ptrdiff_t mo);

#endif
