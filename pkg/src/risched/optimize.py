"""Continuous optimizers for beams and RIS phases.

``wmmse_beamformers`` runs the classical alternating update

    xi_k = (sum_j |h_k^H w_j|^2 + sigma^2)^{-1} h_k^H w_k
    nu_k = (1 - xi_k^* h_k^H w_k)^{-1}
    w_k  = alpha_k xi_k nu_k (lambda I + sum_j alpha_j |xi_j|^2 nu_j h_j h_j^H)^{-1} h_k

with the dual variable lambda >= 0 solved on the monotone power profile so
that the total power meets the budget with complementary slackness.  The
weighted sum rate is non-decreasing over iterations.

``rcg_ris_phases`` maximizes the weighted sum rate over the unit-modulus
manifold: analytic Euclidean gradient, tangent projection
g - Re{g * conj(theta)} * theta, Polak-Ribiere conjugate directions with
restart, Armijo backtracking, and retraction by element-wise normalization.
"""

from __future__ import annotations

import numpy as np

from .channel import BeamMatrix, RisConfig, weighted_sum_rate

LOG2 = np.log(2.0)


def _mrt_init(h_c: np.ndarray, p_d: float) -> np.ndarray:
    S = h_c.shape[0]
    norms = np.linalg.norm(h_c, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero channel vector")
    return (h_c.conj() / norms[:, None]).T * np.sqrt(p_d / S)


def _solve_power_dual(eigs: np.ndarray, rho: np.ndarray, p_d: float) -> float:
    """Smallest lambda >= 0 with sum_i rho_i / (lambda + eig_i)^2 <= p_d.

    The profile is convex and strictly decreasing, so a Newton iteration
    from the infeasible side converges monotonically; a growing bracket
    plus final nudge guarantee the returned multiplier is feasible.
    Components on (numerically) zero eigenvalues carry zero true power and
    are masked out.
    """
    cutoff = 1e-14 * max(float(eigs.max()), 1e-300)
    pairs = [(float(e), float(r)) for e, r in zip(eigs, rho) if e > cutoff and r > 0.0]
    if not pairs:
        return 0.0

    def power(lam):
        return sum(r / (lam + e) ** 2 for e, r in pairs)

    if power(0.0) <= p_d * (1.0 + 1e-12):
        return 0.0
    lam = 0.0
    for _ in range(100):
        f = -p_d
        slope = 0.0
        for e, r in pairs:
            d = lam + e
            f += r / (d * d)
            slope -= 2.0 * r / (d * d * d)
        if f <= 0.0:
            break
        step = -f / slope
        if not np.isfinite(step) or step <= 0.0:
            break
        lam += step
        if step <= 1e-14 * lam:
            break
    while power(lam) > p_d:
        lam *= 1.0 + 1e-12
        lam += 1e-300
    return lam


def wmmse_beamformers(h_c: np.ndarray, alpha: np.ndarray, p_d: float,
                      sigma_d2: float, W0: np.ndarray | None = None,
                      max_iter: int = 200, tol: float = 1e-8,
                      callback=None) -> BeamMatrix:
    """Weighted sum-rate beamforming for the stacked channels h_c (S, M).

    Returns beams with sum_k ||w_k||^2 <= p_d; an active constraint is
    solved to well below 1e-10 relative power error.  ``callback`` receives
    the weighted sum rate after initialization and after every iteration.
    """
    h_c = np.asarray(h_c, dtype=np.complex128)
    alpha = np.asarray(alpha, dtype=float)
    if h_c.ndim != 2 or h_c.shape[0] == 0:
        raise ValueError("need at least one scheduled user")
    if not np.isfinite(h_c).all():
        raise ValueError("channels must be finite")
    if np.any(alpha <= 0):
        raise ValueError("weights must be positive")
    S, M = h_c.shape

    W = _mrt_init(h_c, p_d) if W0 is None else np.array(W0, dtype=np.complex128)
    obj = weighted_sum_rate(h_c, W, alpha, sigma_d2)
    if callback is not None:
        callback(obj)

    for _ in range(max_iter):
        U = h_c.conj() @ W                       # U[k, j] = h_k^H w_j
        totals = np.sum(np.abs(U) ** 2, axis=1) + sigma_d2
        xi = np.diag(U) / totals
        mse = 1.0 - np.real(np.conj(xi) * np.diag(U))
        nu = 1.0 / np.maximum(mse, 1e-300)

        row_w = alpha * np.abs(xi) ** 2 * nu
        R = (h_c.T * row_w) @ h_c.conj()
        R = 0.5 * (R + R.conj().T)
        eigs, V = np.linalg.eigh(R)
        eigs = np.maximum(eigs, 0.0)
        Ht = V.conj().T @ h_c.T                  # column k = V^H h_k
        num = np.abs(Ht) ** 2
        cvec = alpha * xi * nu
        weights = np.abs(cvec) ** 2

        # lambda = 0 when the unconstrained optimum is feasible, else the
        # power constraint is met with equality (complementary slackness).
        lam = _solve_power_dual(eigs, num @ weights, p_d)
        # pinv semantics on R's numerical null space, matching the solve:
        # channels with nonzero c_k have no null-space component, so zeroing
        # those directions only discards rounding noise.
        null = eigs <= 1e-14 * max(float(eigs.max()), 1e-300)
        inv = np.where(null, 0.0, 1.0 / np.maximum(lam + eigs, 1e-300))
        W = V @ (Ht * inv[:, None]) * cvec[None, :]

        new_obj = weighted_sum_rate(h_c, W, alpha, sigma_d2)
        if callback is not None:
            callback(new_obj)
        if abs(new_obj - obj) < tol:
            obj = new_obj
            break
        obj = new_obj

    return BeamMatrix(W=W)


def weighted_rate_theta_gradient(h_d: np.ndarray, A: np.ndarray, W: np.ndarray,
                                 alpha: np.ndarray, theta: np.ndarray,
                                 sigma_d2: float) -> np.ndarray:
    """Wirtinger gradient d(weighted sum rate)/d(theta^*), length N.

    The differential of the objective along a perturbation dtheta is
    2 Re{g^H dtheta}.  Derived by the chain rule through
    u_ki = (h_d_k + A_k theta)^H w_i, whose theta^*-derivative is A_k^H w_i.
    """
    S = h_d.shape[0]
    h_c = h_d + np.einsum("kmn,n->km", A, theta)
    U = h_c.conj() @ W
    P = np.abs(U) ** 2
    totals = P.sum(axis=1) + sigma_d2
    interf = totals - np.diag(P)
    grad = np.zeros(theta.shape[0], dtype=np.complex128)
    for k in range(S):
        ck = alpha[k] / LOG2
        b = np.full(S, ck / totals[k])
        b -= ck / interf[k]
        b[k] += ck / interf[k]
        grad += (A[k].conj().T @ W) @ (U[k].conj() * b)
    return grad


def _project_tangent(g: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return g - np.real(g * theta.conj()) * theta


def _retract(theta: np.ndarray) -> np.ndarray:
    return theta / np.abs(theta)


def rcg_ris_phases(h_d: np.ndarray, A: np.ndarray, W: np.ndarray,
                   alpha: np.ndarray, theta0: np.ndarray, sigma_d2: float,
                   max_iter: int = 500, tol: float = 1e-6,
                   armijo_c: float = 1e-4, shrink: float = 0.5,
                   callback=None) -> RisConfig:
    """Maximize sum_k alpha_k R_k over unit-modulus theta, beams fixed.

    Inputs are the scheduled users' direct channels h_d (S, M), cascades
    A (S, M, N) and beam columns W (M, S).  Accepted steps never decrease
    the objective; stops when the Riemannian gradient norm drops below
    ``tol`` or after ``max_iter`` accepted steps.
    """
    theta = np.asarray(theta0, dtype=np.complex128).copy()
    if np.max(np.abs(np.abs(theta) - 1.0)) > 1e-12:
        raise ValueError("theta0 must have unit modulus")

    def objective(th):
        h_c = h_d + np.einsum("kmn,n->km", A, th)
        return weighted_sum_rate(h_c, W, alpha, sigma_d2)

    f = objective(theta)
    if callback is not None:
        callback(f)
    g = weighted_rate_theta_gradient(h_d, A, W, alpha, theta, sigma_d2)
    r = _project_tangent(g, theta)
    d = r.copy()
    rr = float(np.real(np.vdot(r, r)))
    step0 = None

    for _ in range(max_iter):
        if np.sqrt(rr) < tol:
            break
        slope = 2.0 * float(np.real(np.vdot(r, d)))
        if slope <= 0.0:
            d = r.copy()                           # restart to steepest ascent
            slope = 2.0 * rr
            if slope <= 0.0:
                break

        def line_search(direction, slp):
            t = step0 if step0 is not None else 0.5 * np.sqrt(theta.size) / max(
                np.linalg.norm(direction), 1e-300)
            for _ in range(60):
                cand = _retract(theta + t * direction)
                f_new = objective(cand)
                if f_new >= f + armijo_c * t * slp:
                    return cand, f_new, t
                t *= shrink
            return None, None, None

        cand, f_new, t = line_search(d, slope)
        if cand is None and d is not r:
            d = r.copy()                           # conjugate direction stalled
            cand, f_new, t = line_search(d, 2.0 * rr)
        if cand is None:
            break

        theta = cand
        f = f_new
        if callback is not None:
            callback(f)
        step0 = min(t / shrink, 1e6)

        g = weighted_rate_theta_gradient(h_d, A, W, alpha, theta, sigma_d2)
        r_new = _project_tangent(g, theta)
        rr_new = float(np.real(np.vdot(r_new, r_new)))
        r_prev = _project_tangent(r, theta)        # transport to the new tangent space
        beta = max(0.0, float(np.real(np.vdot(r_new, r_new - r_prev))) / max(rr, 1e-300))
        d = r_new + beta * _project_tangent(d, theta)
        r, rr = r_new, rr_new

    return RisConfig(theta=theta)


def quantize_phases(theta: np.ndarray, b: int) -> RisConfig:
    """Snap each phase to the mid-value of its cell in a 2^b partition of [0, 2pi)."""
    if b < 1:
        raise ValueError("need at least one phase bit")
    width = 2.0 * np.pi / (1 << b)
    ang = np.mod(np.angle(theta), 2.0 * np.pi)
    idx = np.minimum(np.floor(ang / width), (1 << b) - 1)
    return RisConfig(theta=np.exp(1j * (idx + 0.5) * width))
