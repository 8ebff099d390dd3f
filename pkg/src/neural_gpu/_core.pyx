# cython: boundscheck=False, wraparound=False, initializedcheck=False, language_level=3
"""Compiled convolution backend: thin wrappers over the C hot loops.

Batched 2-D same-padding convolution (stride 1, odd kernel) and its adjoint,
operating on mental images of shape [batch, w, h, m].  The forward
accumulation order per output element is fixed (kernel width, then height,
then input channel) so results are bit-reproducible and match the pure-numpy
fallback exactly; the backward agrees to floating-point rounding.
"""

cdef extern from "_convkernels.h":
    void ngpu_conv2d_fwd_f32(const float *s, const float *kern, float *out,
                             Py_ssize_t nb, Py_ssize_t w, Py_ssize_t h,
                             Py_ssize_t m, Py_ssize_t kw, Py_ssize_t kh,
                             Py_ssize_t mo) nogil
    void ngpu_conv2d_fwd_f64(const double *s, const double *kern,
                             double *out, Py_ssize_t nb, Py_ssize_t w,
                             Py_ssize_t h, Py_ssize_t m, Py_ssize_t kw,
                             Py_ssize_t kh, Py_ssize_t mo) nogil
    void ngpu_conv2d_bwd_f32(const float *s, const float *kern,
                             const float *kern_t, const float *g_out,
                             float *g_s, float *g_kern, Py_ssize_t nb,
                             Py_ssize_t w, Py_ssize_t h, Py_ssize_t m,
                             Py_ssize_t kw, Py_ssize_t kh,
                             Py_ssize_t mo) nogil
    void ngpu_conv2d_bwd_f64(const double *s, const double *kern,
                             const double *kern_t, const double *g_out,
                             double *g_s, double *g_kern, Py_ssize_t nb,
                             Py_ssize_t w, Py_ssize_t h, Py_ssize_t m,
                             Py_ssize_t kw, Py_ssize_t kh,
                             Py_ssize_t mo) nogil

# one row of output channels must fit the C stack accumulator
cdef Py_ssize_t MAX_CHANNELS = 512

ctypedef fused real:
    float
    double


def conv2d_fwd(real[:, :, :, ::1] s, real[:, :, :, ::1] kern,
               real[:, :, :, ::1] out):
    """out[b,x,y,i] = sum_{u,v,c} s[b,x+u,y+v,c] * kern[u,v,c,i], centered
    offsets, zero padding."""
    cdef Py_ssize_t nb = s.shape[0], w = s.shape[1], h = s.shape[2]
    cdef Py_ssize_t m = s.shape[3]
    cdef Py_ssize_t kw = kern.shape[0], kh = kern.shape[1], mo = kern.shape[3]
    if mo > MAX_CHANNELS or m > MAX_CHANNELS:
        raise ValueError(f"channel count exceeds limit {MAX_CHANNELS}")
    with nogil:
        if real is float:
            ngpu_conv2d_fwd_f32(&s[0, 0, 0, 0], &kern[0, 0, 0, 0],
                                &out[0, 0, 0, 0], nb, w, h, m, kw, kh, mo)
        else:
            ngpu_conv2d_fwd_f64(&s[0, 0, 0, 0], &kern[0, 0, 0, 0],
                                &out[0, 0, 0, 0], nb, w, h, m, kw, kh, mo)


def conv2d_bwd(real[:, :, :, ::1] s, real[:, :, :, ::1] kern,
               real[:, :, :, ::1] kern_t, real[:, :, :, ::1] g_out,
               real[:, :, :, ::1] g_s, real[:, :, :, ::1] g_kern):
    """Adjoint of conv2d_fwd; kern_t is kern transposed to [u,v,i,c].
    g_kern must be zero-initialized and accumulates over the batch in
    example order."""
    cdef Py_ssize_t nb = s.shape[0], w = s.shape[1], h = s.shape[2]
    cdef Py_ssize_t m = s.shape[3]
    cdef Py_ssize_t kw = kern.shape[0], kh = kern.shape[1], mo = kern.shape[3]
    if mo > MAX_CHANNELS or m > MAX_CHANNELS:
        raise ValueError(f"channel count exceeds limit {MAX_CHANNELS}")
    with nogil:
        if real is float:
            ngpu_conv2d_bwd_f32(&s[0, 0, 0, 0], &kern[0, 0, 0, 0],
                                &kern_t[0, 0, 0, 0], &g_out[0, 0, 0, 0],
                                &g_s[0, 0, 0, 0], &g_kern[0, 0, 0, 0],
                                nb, w, h, m, kw, kh, mo)
        else:
            ngpu_conv2d_bwd_f64(&s[0, 0, 0, 0], &kern[0, 0, 0, 0],
                                &kern_t[0, 0, 0, 0], &g_out[0, 0, 0, 0],
                                &g_s[0, 0, 0, 0], &g_kern[0, 0, 0, 0],
                                nb, w, h, m, kw, kh, mo)
