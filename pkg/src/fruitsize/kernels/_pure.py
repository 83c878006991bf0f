"""Pure-numpy implementations of the hot kernels.

Mirrors fruitsize.kernels._core (the Cython build) function for function;
either backend can serve the rest of the package.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

# discriminants below this are grazing rays and count as misses
RAY_EPS = 1e-12


def sphere_inlier_stats(xyz: np.ndarray, cx: float, cy: float, cz: float,
                        radius: float, threshold: float):
    """Count points with |dist(p, c) - r| <= threshold and return the sum
    of squared residuals over those inliers."""
    d = np.sqrt((xyz[:, 0] - cx) ** 2 + (xyz[:, 1] - cy) ** 2
                + (xyz[:, 2] - cz) ** 2)
    resid = d - radius
    mask = np.abs(resid) <= threshold
    count = int(np.count_nonzero(mask))
    rss = float(np.sum(resid[mask] ** 2)) if count else 0.0
    return count, rss


def mvee_weights(xyz: np.ndarray, tol: float, max_iter: int):
    """Minimum-volume enclosing ellipsoid weights by Frank-Wolfe ascent
    with away/drop steps on the lifted points q_i = (p_i; 1).

    Maintains the 4x4 inverse moment matrix by rank-1 updates and refreshes
    it periodically against drift. Converged when every lifted leverage
    M_i = q_i^T X^-1 q_i is <= 4(1+tol) and every point still carrying
    weight has M_i >= 4(1-tol).

    Returns (weights, iterations, converged).
    """
    n = xyz.shape[0]
    q = np.hstack([xyz, np.ones((n, 1))])
    u = np.full(n, 1.0 / n)
    x = q.T @ (q * u[:, None])
    xinv = np.linalg.inv(x)
    m = np.einsum("ij,jk,ik->i", q, xinv, q)

    hi = 4.0 * (1.0 + tol)
    lo = 4.0 * (1.0 - tol)
    it = 0
    converged = False
    fresh = True  # m/xinv exactly reflect u (no rank-1 drift)
    while it < max_iter:
        jmax = int(np.argmax(m))
        mmax = m[jmax]
        masked = np.where(u > 0.0, m, np.inf)
        jmin = int(np.argmin(masked))
        mmin = masked[jmin]
        if mmax <= hi and mmin >= lo:
            if fresh:
                converged = True
                break
            # drift could fake convergence: recompute and re-check
            x = q.T @ (q * u[:, None])
            xinv = np.linalg.inv(x)
            m = np.einsum("ij,jk,ik->i", q, xinv, q)
            fresh = True
            continue

        if (mmax - 4.0) >= (4.0 - mmin):
            j, mj = jmax, mmax
            alpha = (mj - 4.0) / (4.0 * (mj - 1.0))
            lam = alpha / (1.0 - alpha)
            xq = xinv @ q[j]
            g = q @ xq
            denom = 1.0 + lam * mj
            xinv = (xinv - (lam / denom) * np.outer(xq, xq)) / (1.0 - alpha)
            m = (m - (lam / denom) * g * g) / (1.0 - alpha)
            u *= 1.0 - alpha
            u[j] += alpha
        else:
            j, mj = jmin, mmin
            denom_b = max(4.0 * (mj - 1.0), 1e-300)
            beta = (4.0 - mj) / denom_b
            cap = u[j] / (1.0 - u[j]) if u[j] < 1.0 else np.inf
            drop = beta >= cap
            if drop:
                beta = cap
            lam = beta / (1.0 + beta)
            den = 1.0 - lam * mj
            if den < 1e-12:
                beta = 0.5 * beta
                drop = False
                lam = beta / (1.0 + beta)
                den = 1.0 - lam * mj
            xq = xinv @ q[j]
            g = q @ xq
            xinv = (xinv + (lam / den) * np.outer(xq, xq)) / (1.0 + beta)
            m = (m + (lam / den) * g * g) / (1.0 + beta)
            u *= 1.0 + beta
            u[j] -= beta
            if drop or u[j] < 0.0:
                u[j] = 0.0

        it += 1
        fresh = False
        if it % 100 == 0:
            x = q.T @ (q * u[:, None])
            xinv = np.linalg.inv(x)
            m = np.einsum("ij,jk,ik->i", q, xinv, q)
            fresh = True

    return u, it, converged


def raycast_depth(width: int, height: int, fx: float, fy: float,
                  cx: float, cy: float, origins: np.ndarray,
                  rot_t: np.ndarray, inv_sq: np.ndarray,
                  c_coeff: np.ndarray):
    """Z-buffer ray casting of ellipsoids through a pinhole camera.

    Rays leave the origin through integer pixel coordinates with direction
    ((u-cx)/fx, (v-cy)/fy, 1), so the returned hit parameter t is the hit
    depth in mm. Per fruit, `origins` is the camera position expressed in
    the fruit's canonical frame (R^T (0 - center)), `rot_t` the transposed
    orientation, `inv_sq` the inverse squared semi-axes and `c_coeff` the
    precomputed constant term of the ray-quadric equation.

    Returns (depth (h, w) float64 with 0 for misses, winner (h, w) int32
    with -1 for misses).
    """
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    dx = (u[None, :] - cx) / fx
    dy = (v[:, None] - cy) / fy

    best_t = np.full((height, width), np.inf)
    winner = np.full((height, width), -1, dtype=np.int32)
    for k in range(origins.shape[0]):
        rt = rot_t[k]
        # direction in the fruit frame: d' = R^T (dx, dy, 1)
        dpx = rt[0, 0] * dx + rt[0, 1] * dy + rt[0, 2]
        dpy = rt[1, 0] * dx + rt[1, 1] * dy + rt[1, 2]
        dpz = rt[2, 0] * dx + rt[2, 1] * dy + rt[2, 2]
        w0, w1, w2 = inv_sq[k]
        o0, o1, o2 = origins[k]
        a = w0 * dpx * dpx + w1 * dpy * dpy + w2 * dpz * dpz
        b = 2.0 * (w0 * o0 * dpx + w1 * o1 * dpy + w2 * o2 * dpz)
        disc = b * b - 4.0 * a * c_coeff[k]
        hit = disc >= RAY_EPS
        t = np.where(hit, (-b - np.sqrt(np.where(hit, disc, 0.0))) / (2.0 * a), np.inf)
        t = np.where(t > 0.0, t, np.inf)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        winner = np.where(closer, np.int32(k), winner)

    depth = np.where(np.isfinite(best_t), best_t, 0.0)
    return depth, winner
