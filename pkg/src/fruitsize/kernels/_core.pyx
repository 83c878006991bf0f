# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same contracts as fruitsize.kernels._pure; see that module for the
reference semantics.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport fabs, sqrt

BACKEND = "compiled"

RAY_EPS = 1e-12


def sphere_inlier_stats(const double[:, ::1] xyz, double cx, double cy, double cz,
                        double radius, double threshold):
    cdef Py_ssize_t i, n = xyz.shape[0]
    cdef double dx, dy, dz, resid
    cdef double rss = 0.0
    cdef long count = 0
    for i in range(n):
        dx = xyz[i, 0] - cx
        dy = xyz[i, 1] - cy
        dz = xyz[i, 2] - cz
        resid = sqrt(dx * dx + dy * dy + dz * dz) - radius
        if fabs(resid) <= threshold:
            count += 1
            rss += resid * resid
    return count, rss


cdef int _inv4(double[:, ::1] a, double[:, ::1] out) except -1:
    """Invert a 4x4 matrix by Gauss-Jordan with partial pivoting."""
    cdef double work[4][8]
    cdef Py_ssize_t i, j, k, piv
    cdef double best, factor, tmp
    for i in range(4):
        for j in range(4):
            work[i][j] = a[i, j]
            work[i][j + 4] = 1.0 if i == j else 0.0
    for k in range(4):
        piv = k
        best = fabs(work[k][k])
        for i in range(k + 1, 4):
            if fabs(work[i][k]) > best:
                best = fabs(work[i][k])
                piv = i
        if best == 0.0:
            raise np.linalg.LinAlgError("singular moment matrix")
        if piv != k:
            for j in range(8):
                tmp = work[k][j]
                work[k][j] = work[piv][j]
                work[piv][j] = tmp
        factor = work[k][k]
        for j in range(8):
            work[k][j] /= factor
        for i in range(4):
            if i == k:
                continue
            factor = work[i][k]
            if factor != 0.0:
                for j in range(8):
                    work[i][j] -= factor * work[k][j]
    for i in range(4):
        for j in range(4):
            out[i, j] = work[i][j + 4]
    return 0


cdef void _refresh(double[:, ::1] q, double[::1] u, double[:, ::1] x,
                   double[:, ::1] xinv, double[::1] m):
    cdef Py_ssize_t i, a, b, n = q.shape[0]
    cdef double s
    for a in range(4):
        for b in range(4):
            x[a, b] = 0.0
    for i in range(n):
        if u[i] == 0.0:
            continue
        for a in range(4):
            for b in range(4):
                x[a, b] += u[i] * q[i, a] * q[i, b]
    _inv4(x, xinv)
    for i in range(n):
        s = 0.0
        for a in range(4):
            for b in range(4):
                s += q[i, a] * xinv[a, b] * q[i, b]
        m[i] = s


def mvee_weights(const double[:, ::1] xyz, double tol, long max_iter):
    cdef Py_ssize_t i, a, b, n = xyz.shape[0]
    q_arr = np.hstack([np.asarray(xyz), np.ones((n, 1))])
    u_arr = np.full(n, 1.0 / n)
    x_arr = np.zeros((4, 4))
    xinv_arr = np.zeros((4, 4))
    m_arr = np.zeros(n)
    cdef double[:, ::1] q = q_arr
    cdef double[::1] u = u_arr
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] xinv = xinv_arr
    cdef double[::1] m = m_arr

    _refresh(q, u, x, xinv, m)

    cdef double hi = 4.0 * (1.0 + tol)
    cdef double lo = 4.0 * (1.0 - tol)
    cdef long it = 0
    cdef bint converged = 0
    cdef bint fresh = 1  # m/xinv exactly reflect u (no rank-1 drift)
    cdef Py_ssize_t j, jmax, jmin
    cdef double mmax, mmin, mj, alpha, beta, cap, lam, den, coeff, gi
    cdef double xq[4]
    cdef bint drop

    while it < max_iter:
        jmax = 0
        mmax = -1.0
        jmin = -1
        mmin = 0.0
        for i in range(n):
            if m[i] > mmax:
                mmax = m[i]
                jmax = i
            if u[i] > 0.0 and (jmin < 0 or m[i] < mmin):
                mmin = m[i]
                jmin = i
        if mmax <= hi and mmin >= lo:
            if fresh:
                converged = 1
                break
            # drift could fake convergence: recompute and re-check
            _refresh(q, u, x, xinv, m)
            fresh = 1
            continue

        if (mmax - 4.0) >= (4.0 - mmin):
            j = jmax
            mj = mmax
            alpha = (mj - 4.0) / (4.0 * (mj - 1.0))
            lam = alpha / (1.0 - alpha)
            den = 1.0 + lam * mj
            coeff = lam / den
            for a in range(4):
                xq[a] = 0.0
                for b in range(4):
                    xq[a] += xinv[a, b] * q[j, b]
            for i in range(n):
                gi = q[i, 0] * xq[0] + q[i, 1] * xq[1] \
                    + q[i, 2] * xq[2] + q[i, 3] * xq[3]
                m[i] = (m[i] - coeff * gi * gi) / (1.0 - alpha)
            for a in range(4):
                for b in range(4):
                    xinv[a, b] = (xinv[a, b] - coeff * xq[a] * xq[b]) / (1.0 - alpha)
            for i in range(n):
                u[i] *= 1.0 - alpha
            u[j] += alpha
        else:
            j = jmin
            mj = mmin
            den = 4.0 * (mj - 1.0)
            if den < 1e-300:
                den = 1e-300
            beta = (4.0 - mj) / den
            cap = u[j] / (1.0 - u[j]) if u[j] < 1.0 else 1e308
            drop = beta >= cap
            if drop:
                beta = cap
            lam = beta / (1.0 + beta)
            den = 1.0 - lam * mj
            if den < 1e-12:
                beta = 0.5 * beta
                drop = 0
                lam = beta / (1.0 + beta)
                den = 1.0 - lam * mj
            coeff = lam / den
            for a in range(4):
                xq[a] = 0.0
                for b in range(4):
                    xq[a] += xinv[a, b] * q[j, b]
            for i in range(n):
                gi = q[i, 0] * xq[0] + q[i, 1] * xq[1] \
                    + q[i, 2] * xq[2] + q[i, 3] * xq[3]
                m[i] = (m[i] + coeff * gi * gi) / (1.0 + beta)
            for a in range(4):
                for b in range(4):
                    xinv[a, b] = (xinv[a, b] + coeff * xq[a] * xq[b]) / (1.0 + beta)
            for i in range(n):
                u[i] *= 1.0 + beta
            u[j] -= beta
            if drop or u[j] < 0.0:
                u[j] = 0.0

        it += 1
        fresh = 0
        if it % 100 == 0:
            _refresh(q, u, x, xinv, m)
            fresh = 1

    return u_arr, it, bool(converged)


def raycast_depth(int width, int height, double fx, double fy,
                  double cx, double cy, const double[:, ::1] origins,
                  const double[:, :, ::1] rot_t, const double[:, ::1] inv_sq,
                  const double[::1] c_coeff):
    cdef Py_ssize_t u, v, k, nf = origins.shape[0]
    depth_arr = np.zeros((height, width))
    winner_arr = np.full((height, width), -1, dtype=np.int32)
    cdef double[:, ::1] depth = depth_arr
    cdef int[:, ::1] winner = winner_arr
    cdef double dx, dy, dpx, dpy, dpz, a, b, disc, t, best_t
    cdef int best_k
    cdef double eps = RAY_EPS

    for v in range(height):
        dy = (v - cy) / fy
        for u in range(width):
            dx = (u - cx) / fx
            best_t = 1e308
            best_k = -1
            for k in range(nf):
                dpx = rot_t[k, 0, 0] * dx + rot_t[k, 0, 1] * dy + rot_t[k, 0, 2]
                dpy = rot_t[k, 1, 0] * dx + rot_t[k, 1, 1] * dy + rot_t[k, 1, 2]
                dpz = rot_t[k, 2, 0] * dx + rot_t[k, 2, 1] * dy + rot_t[k, 2, 2]
                a = inv_sq[k, 0] * dpx * dpx + inv_sq[k, 1] * dpy * dpy \
                    + inv_sq[k, 2] * dpz * dpz
                b = 2.0 * (inv_sq[k, 0] * origins[k, 0] * dpx
                           + inv_sq[k, 1] * origins[k, 1] * dpy
                           + inv_sq[k, 2] * origins[k, 2] * dpz)
                disc = b * b - 4.0 * a * c_coeff[k]
                if disc < eps:
                    continue
                t = (-b - sqrt(disc)) / (2.0 * a)
                if t > 0.0 and t < best_t:
                    best_t = t
                    best_k = <int>k
            if best_k >= 0:
                depth[v, u] = best_t
                winner[v, u] = best_k

    return depth_arr, winner_arr
