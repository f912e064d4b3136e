# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil and CG kernels.

All fields are passed as C-contiguous float64 arrays of shape (n0, n1, n2);
1D and 2D grids use singleton trailing axes, which carry no faces.  ``c0..c2``
are the inverse squared spacings.  Loops run over the flat buffer: along an
axis with stride s, the faces of one slab are the pairs (q, q + s) for
consecutive q, so every loop is long and contiguous whatever the dimension.
Reductions run in fixed index order, so results are reproducible bit-for-bit.
"""
from libc.math cimport sqrt
from libc.string cimport memset

import numpy as np


cdef inline void _axis_flux(const double* f, double* out, Py_ssize_t outer, Py_ssize_t n,
                            Py_ssize_t s, double c) noexcept nogil:
    # faces along an axis of length n and stride s, for each of `outer` slabs
    cdef Py_ssize_t a, q, base, span = s * (n - 1)
    cdef double flux
    if n < 2 or c == 0.0:
        return
    for a in range(outer):
        base = a * n * s
        for q in range(base, base + span):
            flux = (f[q + s] - f[q]) * c
            out[q] += flux
            out[q + s] -= flux


cdef void _laplacian(const double* f, double* out, Py_ssize_t n0, Py_ssize_t n1,
                     Py_ssize_t n2, double c0, double c1, double c2) noexcept nogil:
    memset(out, 0, n0 * n1 * n2 * sizeof(double))
    _axis_flux(f, out, 1, n0, n1 * n2, c0)
    _axis_flux(f, out, n0, n1, n2, c1)
    _axis_flux(f, out, n0 * n1, n2, 1, c2)


cdef inline double _axis_energy(const double* f, Py_ssize_t outer, Py_ssize_t n,
                                Py_ssize_t s) noexcept nogil:
    cdef Py_ssize_t a, q, base, span = s * (n - 1)
    cdef double d, acc = 0.0
    if n < 2:
        return 0.0
    for a in range(outer):
        base = a * n * s
        for q in range(base, base + span):
            d = f[q + s] - f[q]
            acc += d * d
    return acc


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef void _v_operator(const double* x, const double* r, double dt, Py_ssize_t n0,
                      Py_ssize_t n1, Py_ssize_t n2, double c0, double c1, double c2,
                      double* out) noexcept nogil:
    cdef Py_ssize_t i, n = n0 * n1 * n2
    _laplacian(x, out, n0, n1, n2, c0, c1, c2)
    for i in range(n):
        out[i] = x[i] * (1.0 + dt * r[i]) - dt * out[i]


def laplacian(const double[:, :, ::1] f, double[:, :, ::1] out,
              double c0, double c1, double c2):
    with nogil:
        _laplacian(&f[0, 0, 0], &out[0, 0, 0], f.shape[0], f.shape[1], f.shape[2],
                   c0, c1, c2)


def flux_update(const double[:, :, ::1] u, const double[:, :, ::1] w, double dt,
                double c0, double c1, double c2, double[:, :, ::1] out):
    """out = u + dt * L_h w, each face flux added and subtracted once."""
    cdef Py_ssize_t i, n = u.shape[0] * u.shape[1] * u.shape[2]
    cdef const double* pu = &u[0, 0, 0]
    cdef double* po = &out[0, 0, 0]
    with nogil:
        _laplacian(&w[0, 0, 0], po, w.shape[0], w.shape[1], w.shape[2],
                   c0 * dt, c1 * dt, c2 * dt)
        for i in range(n):
            po[i] = pu[i] + po[i]


def gradient_energy(const double[:, :, ::1] f, double c0, double c1, double c2,
                    double vol):
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1], n2 = f.shape[2]
    cdef const double* pf = &f[0, 0, 0]
    cdef double s0, s1, s2
    with nogil:
        s0 = _axis_energy(pf, 1, n0, n1 * n2)
        s1 = _axis_energy(pf, n0, n1, n2)
        s2 = _axis_energy(pf, n0 * n1, n2, 1)
    return (s0 * c0 + s1 * c1 + s2 * c2) * vol


def v_operator(const double[:, :, ::1] x, const double[:, :, ::1] r, double dt,
               double c0, double c1, double c2, double[:, :, ::1] out):
    """out = (I + dt R - dt L_h) x."""
    with nogil:
        _v_operator(&x[0, 0, 0], &r[0, 0, 0], dt, x.shape[0], x.shape[1], x.shape[2],
                    c0, c1, c2, &out[0, 0, 0])


def cg_v(const double[:, :, ::1] b, const double[:, :, ::1] r_coef, double dt,
         double c0, double c1, double c2, double[:, :, ::1] x,
         double tol, Py_ssize_t maxiter):
    """Solve (I + dt R - dt L_h) x = b in place by conjugate gradients.

    ``x`` holds the initial guess on entry.  Returns (iterations, relative
    residual).  Convergence: ||r||_2 <= tol * ||b||_2.
    """
    cdef Py_ssize_t n0 = b.shape[0], n1 = b.shape[1], n2 = b.shape[2]
    cdef Py_ssize_t i, n = n0 * n1 * n2, it = 0
    cdef double bnorm, rr, rr_new, alpha, beta, pap
    cdef double[::1] res_buf = np.empty(n)
    cdef double[::1] p_buf = np.empty(n)
    cdef double[::1] ap_buf = np.empty(n)
    cdef double* res = &res_buf[0]
    cdef double* p = &p_buf[0]
    cdef double* ap = &ap_buf[0]
    cdef const double* pb = &b[0, 0, 0]
    cdef const double* pr = &r_coef[0, 0, 0]
    cdef double* px = &x[0, 0, 0]

    bnorm = sqrt(_dot(pb, pb, n))
    if bnorm == 0.0:
        x[:, :, :] = 0.0
        return 0, 0.0
    with nogil:
        _v_operator(px, pr, dt, n0, n1, n2, c0, c1, c2, ap)
        for i in range(n):
            res[i] = pb[i] - ap[i]
            p[i] = res[i]
        rr = _dot(res, res, n)
        while sqrt(rr) > tol * bnorm and it < maxiter:
            _v_operator(p, pr, dt, n0, n1, n2, c0, c1, c2, ap)
            pap = _dot(p, ap, n)
            if pap <= 0.0:
                break
            alpha = rr / pap
            for i in range(n):
                px[i] += alpha * p[i]
                res[i] -= alpha * ap[i]
            rr_new = _dot(res, res, n)
            beta = rr_new / rr
            rr = rr_new
            for i in range(n):
                p[i] = res[i] + beta * p[i]
            it += 1
    return it, sqrt(rr) / bnorm
