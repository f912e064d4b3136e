"""Pure numpy implementations of the stencil and CG kernels.

Same signatures as the compiled ``_ckernels`` module; used when the extension
is not built or when ``FVTAXIS_BACKEND=python`` is set.
"""
import numpy as np


def laplacian(f, out, c0, c1, c2):
    out[...] = 0.0
    for axis, c in enumerate((c0, c1, c2)):
        if f.shape[axis] < 2:
            continue
        q = np.diff(f, axis=axis) * c
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        out[tuple(lo)] += q
        out[tuple(hi)] -= q


def flux_update(u, w, dt, c0, c1, c2, out):
    laplacian(w, out, c0 * dt, c1 * dt, c2 * dt)
    np.add(u, out, out=out)


def gradient_energy(f, c0, c1, c2, vol):
    s = 0.0
    for axis, c in enumerate((c0, c1, c2)):
        if f.shape[axis] < 2:
            continue
        d = np.diff(f, axis=axis).ravel()
        s += float(np.dot(d, d)) * c
    return s * vol


def v_operator(x, r, dt, c0, c1, c2, out):
    laplacian(x, out, c0, c1, c2)
    out *= -dt
    out += x * (1.0 + dt * r)


def cg_v(b, r_coef, dt, c0, c1, c2, x, tol, maxiter):
    bf = b.ravel()
    bnorm = np.sqrt(np.dot(bf, bf))
    if bnorm == 0.0:
        x[...] = 0.0
        return 0, 0.0
    ap = np.empty_like(b)
    v_operator(x, r_coef, dt, c0, c1, c2, ap)
    res = b - ap
    p = res.copy()
    rr = float(np.dot(res.ravel(), res.ravel()))
    it = 0
    while np.sqrt(rr) > tol * bnorm and it < maxiter:
        v_operator(p, r_coef, dt, c0, c1, c2, ap)
        pap = float(np.dot(p.ravel(), ap.ravel()))
        if pap <= 0.0:
            break
        alpha = rr / pap
        x += alpha * p
        res -= alpha * ap
        rr_new = float(np.dot(res.ravel(), res.ravel()))
        p *= rr_new / rr
        p += res
        rr = rr_new
        it += 1
    return it, float(np.sqrt(rr) / bnorm)
