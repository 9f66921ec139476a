"""Discrete scheduling decisions and the proportional-fairness state.

The greedy baseline follows the classical recipe: seed the schedule with
the best weighted single-user rate under a random RIS draw, greedily add
users while the weighted sum rate improves (re-running the beamformer for
every candidate set), then alternate RIS phases / beams / greedy additions
until no further improvement.  The exhaustive oracle optimizes every
non-empty subset of size <= M the same way and returns the best.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import BeamMatrix, RisConfig, random_phases, weighted_sum_rate
from .config import OptimParams, SystemConfig
from .optimize import rcg_ris_phases, wmmse_beamformers


@dataclass
class Schedule:
    """Ordered scheduled user ids plus the 0/1 indicator over all K users."""

    users: tuple
    beta: np.ndarray

    def __post_init__(self):
        self.users = tuple(int(u) for u in self.users)
        self.beta = np.asarray(self.beta, dtype=np.int8)
        if sorted(set(self.users)) != sorted(np.flatnonzero(self.beta).tolist()):
            raise ValueError("beta indicator inconsistent with the user set")

    @classmethod
    def from_users(cls, users, K: int) -> "Schedule":
        beta = np.zeros(K, dtype=np.int8)
        beta[list(users)] = 1
        return cls(users=tuple(users), beta=beta)

    def __len__(self) -> int:
        return len(self.users)


@dataclass
class PfState:
    """Per-user moving-average rates and the derived weights."""

    Rbar: np.ndarray
    alpha: np.ndarray
    t: int
    gamma: float

    @classmethod
    def initial(cls, K: int, gamma: float) -> "PfState":
        # Unit starting averages keep the weights finite and uniform.
        rbar = np.ones(K)
        return cls(Rbar=rbar, alpha=1.0 / rbar, t=0, gamma=gamma)


def pf_update(state: PfState, rates: np.ndarray) -> PfState:
    """One slot of the exponentially weighted moving average; returns a new state."""
    if not 0.0 <= state.gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    rbar = (1.0 - state.gamma) * state.Rbar + state.gamma * rates
    with np.errstate(divide="ignore"):
        alpha = 1.0 / rbar
    return PfState(Rbar=rbar, alpha=alpha, t=state.t + 1, gamma=state.gamma)


def implicit_schedule(W: np.ndarray, M: int) -> Schedule:
    """Top-min(M, K) users by beam power ||w_k||^2, ties to the lower index."""
    K = W.shape[1]
    powers = np.sum(np.abs(W) ** 2, axis=0)
    order = np.lexsort((np.arange(K), -powers))
    chosen = order[: min(M, K)]
    return Schedule.from_users([int(u) for u in chosen], K)


def subset_objective(h_d: np.ndarray, A: np.ndarray, alpha: np.ndarray,
                     users, theta: np.ndarray, p_d: float, sigma_d2: float,
                     params: OptimParams, W0: np.ndarray | None = None,
                     ) -> tuple[float, BeamMatrix]:
    """Beams for a fixed (subset, theta) via WMMSE plus the achieved objective."""
    users = list(users)
    h_c = h_d[users] + np.einsum("kmn,n->km", A[users], theta)
    beams = wmmse_beamformers(h_c, alpha[users], p_d, sigma_d2, W0=W0,
                              max_iter=params.wmmse_max_iter, tol=params.wmmse_tol)
    return weighted_sum_rate(h_c, beams.W, alpha[users], sigma_d2), beams


def _bcd(h_d, A, alpha, users, theta, W, obj, p_d, sigma_d2, params,
         allow_add: bool = True):
    """Alternate RIS phases, beams and (optionally) greedy additions."""
    K, M = h_d.shape
    users = list(users)
    for _ in range(params.bcd_max_outer):
        prev = obj
        ris = rcg_ris_phases(h_d[users], A[users], W, alpha[users], theta, sigma_d2,
                             max_iter=params.rcg_max_iter, tol=params.rcg_tol,
                             armijo_c=params.armijo_c, shrink=params.armijo_shrink)
        theta = ris.theta
        # Warm-start from the incumbent beams so the alternation is monotone.
        obj, beams = subset_objective(h_d, A, alpha, users, theta, p_d, sigma_d2,
                                      params, W0=W)
        W = beams.W
        if allow_add and len(users) < min(M, K):
            best = None
            for u in range(K):
                if u in users:
                    continue
                cand_obj, cand_beams = subset_objective(
                    h_d, A, alpha, users + [u], theta, p_d, sigma_d2, params)
                if best is None or cand_obj > best[0]:
                    best = (cand_obj, u, cand_beams)
            if best is not None and best[0] > obj * (1.0 + params.bcd_tol):
                obj, u, beams = best
                users = users + [u]
                W = beams.W
        if obj <= prev * (1.0 + params.bcd_tol):
            break
    return users, theta, W, obj


def greedy_schedule_bcd(h_d: np.ndarray, A: np.ndarray, alpha: np.ndarray,
                        config: SystemConfig, rng: np.random.Generator,
                        params: OptimParams | None = None,
                        ) -> tuple[Schedule, RisConfig, BeamMatrix]:
    """Greedy scheduling with block-coordinate refinement.

    ``h_d`` (K, M) and ``A`` (K, M, N) may be true channels or estimates;
    decisions are made on whatever is passed in.
    """
    params = params or OptimParams()
    K, M = h_d.shape
    p_d, sigma_d2 = config.P_d, config.sigma_d2
    theta = random_phases(A.shape[2], rng)

    # Full-power matched-filter candidates rank users by weighted single-user rate.
    h_c = h_d + np.einsum("kmn,n->km", A, theta)
    gains = np.sum(np.abs(h_c) ** 2, axis=1)
    single = alpha * np.log2(1.0 + p_d * gains / sigma_d2)
    users = [int(np.argmax(single))]
    obj, beams = subset_objective(h_d, A, alpha, users, theta, p_d, sigma_d2, params)

    while len(users) < min(M, K):
        best = None
        for u in range(K):
            if u in users:
                continue
            cand_obj, cand_beams = subset_objective(
                h_d, A, alpha, users + [u], theta, p_d, sigma_d2, params)
            if best is None or cand_obj > best[0]:
                best = (cand_obj, u, cand_beams)
        if best is None or best[0] <= obj * (1.0 + params.bcd_tol):
            break
        obj, u, beams = best
        users.append(u)

    users, theta, W, obj = _bcd(h_d, A, alpha, users, theta, beams.W, obj,
                                p_d, sigma_d2, params)
    return Schedule.from_users(users, K), RisConfig(theta=theta), BeamMatrix(W=W)


def enumerate_subsets(K: int, M: int):
    """All non-empty user subsets of size <= min(M, K), in lexicographic order."""
    for m in range(1, min(M, K) + 1):
        yield from itertools.combinations(range(K), m)


def subset_count(K: int, M: int) -> int:
    return sum(math.comb(K, m) for m in range(1, min(M, K) + 1))


def exhaustive_schedule(h_d: np.ndarray, A: np.ndarray, alpha: np.ndarray,
                        config: SystemConfig, rng: np.random.Generator,
                        params: OptimParams | None = None, max_subsets: int = 100_000,
                        ) -> tuple[Schedule, RisConfig, BeamMatrix]:
    """Upper-bound oracle: optimize every subset of size <= M, keep the best.

    Every subset gets the same treatment as the greedy baseline's refinement
    (beams, then alternating RIS/beam updates), starting from a shared
    random RIS draw.
    """
    params = params or OptimParams()
    K, M = h_d.shape
    count = subset_count(K, M)
    if count > max_subsets:
        raise ValueError(f"{count} subsets exceed the tractability guard {max_subsets}")
    theta0 = random_phases(A.shape[2], rng)

    best = None
    for users in enumerate_subsets(K, M):
        obj, beams = subset_objective(h_d, A, alpha, users, theta0,
                                      config.P_d, config.sigma_d2, params)
        users_f, theta_f, W_f, obj_f = _bcd(h_d, A, alpha, list(users), theta0,
                                            beams.W, obj, config.P_d, config.sigma_d2,
                                            params, allow_add=False)
        if best is None or obj_f > best[0]:
            best = (obj_f, users_f, theta_f, W_f)
    obj, users, theta, W = best
    return Schedule.from_users(users, K), RisConfig(theta=theta), BeamMatrix(W=W)


def random_schedule(K: int, M: int, rng: np.random.Generator) -> Schedule:
    users = rng.choice(K, size=min(M, K), replace=False)
    return Schedule.from_users([int(u) for u in users], K)


def round_robin_schedule(K: int, M: int, slot_index: int) -> Schedule:
    """Cyclic pointer schedule: slot t serves users t*m, ..., t*m + m - 1 (mod K)."""
    m = min(M, K)
    start = (slot_index * m) % K
    users = [(start + i) % K for i in range(m)]
    return Schedule.from_users(users, K)
