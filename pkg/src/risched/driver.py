"""Episode orchestration: coherence periods, scheduling slots, metrics.

An episode runs ``periods`` coherence periods with ``config.Upsilon``
scheduling slots each.  Channels are redrawn per period from a derived
seed; the proportional-fairness state persists across periods.  Decisions
are made on pilots/estimates, rates are always realized on the true
channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import estimation, gnn
from .channel import (RisConfig, achievable_rates, derive_rng, effective_channels,
                      generate_channels, random_phases)
from .config import OptimParams, SystemConfig
from .optimize import quantize_phases, wmmse_beamformers
from .pilots import (decorrelate_collect, make_pilots, pilot_overhead,
                     receive_pilot_block, transmit_pilot_phase)
from .scheduling import (PfState, exhaustive_schedule, greedy_schedule_bcd,
                         implicit_schedule, pf_update, random_schedule,
                         round_robin_schedule)

# Independent derived streams: channels / pilot noise / per-slot decisions.
# Keeping them separate means e.g. a perfect-CSI run and an estimated-CSI run
# of the same seed see identical channel and scheduler randomness.
_CHAN_TAG = 0xC0DE
_PILOT_TAG = 0xB10C
_SLOT_TAG = 0x5107


def _slot_rng(config, period: int, slot: int):
    return derive_rng(config.seed, _SLOT_TAG, period, slot)


SCHEDULERS = ("gnn3stage", "greedy_bcd", "exhaustive", "random", "round_robin")
CSI_MODES = ("perfect", "estimated")
PILOT_MODES = ("extra_pilots", "reuse_pilots")


def _log_utility(avg_rates: np.ndarray) -> float:
    """sum_k ln(avg rate); -inf when a user is starved."""
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(avg_rates)))


@dataclass
class EpisodeResult:
    per_user_avg_rates: np.ndarray      # mean instantaneous rate per user (bits/s/Hz)
    log_utility: float                  # sum_k ln(Rbar_k) of the final PF state
    sum_rate: float
    scheduling_fractions: np.ndarray
    pilot_overhead: int                 # pilot symbols per coherence period
    rates_trace: np.ndarray | None = None      # (slots, K)
    schedule_trace: np.ndarray | None = None   # (slots, K) 0/1


def _finalize(config: SystemConfig, state: PfState, rates_rows, sched_rows,
              overhead: int, keep_trace: bool) -> EpisodeResult:
    rates = np.array(rates_rows)
    scheds = np.array(sched_rows, dtype=np.int8)
    return EpisodeResult(
        per_user_avg_rates=rates.mean(axis=0),
        log_utility=_log_utility(state.Rbar),
        sum_rate=float(rates.mean(axis=0).sum()),
        scheduling_fractions=scheds.mean(axis=0),
        pilot_overhead=overhead,
        rates_trace=rates if keep_trace else None,
        schedule_trace=scheds if keep_trace else None,
    )


def _get_stats(config: SystemConfig, params: OptimParams, stats, target: str):
    if stats and target in stats:
        return stats[target]
    return estimation.calibrate_stats(config, target,
                                      min_factor=params.stats_ensemble_factor)


def run_three_stage_episode(config: SystemConfig, sched_model: gnn.GnnModel,
                            ris_model: gnn.GnnModel, mode: str, periods: int = 1,
                            params: OptimParams | None = None, stats: dict | None = None,
                            keep_trace: bool = True) -> EpisodeResult:
    """Pilot-driven pipeline: schedule from short pilots, RIS phases from the
    full pilot block, beams from estimated effective channels.

    ``mode`` chooses the beamforming CSI: "extra_pilots" sends D_W fresh
    sub-frames per slot under the optimized RIS configuration;
    "reuse_pilots" re-estimates the high-dimensional channel from the
    existing block at no extra overhead.
    """
    params = params or OptimParams()
    if mode not in PILOT_MODES:
        raise ValueError(f"unknown mode '{mode}'")
    for model, depth, label in ((sched_model, config.D_beta, "scheduling"),
                                (ris_model, config.D_theta, "RIS")):
        a = model.arch
        if (a.M, a.N, a.D) != (config.M, config.N, depth):
            raise ValueError(f"{label} model arch (M={a.M}, N={a.N}, D={a.D}) does not "
                             f"match the scenario (M={config.M}, N={config.N}, D={depth})")
    if mode == "extra_pilots" and config.D_W < 1:
        raise ValueError("extra_pilots mode needs D_W >= 1")

    d_w = config.D_W if mode == "extra_pilots" else 0
    overhead = pilot_overhead(config.K, config.D_theta, config.M, d_w, config.Upsilon)

    if mode == "extra_pilots":
        comb_stats = _get_stats(config, params, stats, "combined")
    else:
        high_stats = _get_stats(config, params, stats, "high_dim")

    state = PfState.initial(config.K, config.gamma)
    rates_rows, sched_rows = [], []

    for period in range(periods):
        real = generate_channels(config, derive_rng(config.seed, _CHAN_TAG, period))
        block = transmit_pilot_phase(real, config, config.D_theta,
                                     derive_rng(config.seed, _PILOT_TAG, period))
        simulated = config.K * config.D_theta

        for slot in range(config.Upsilon):
            rng = _slot_rng(config, period, slot)
            alpha = state.alpha

            feats = gnn.build_features(alpha, block.prefix(config.D_beta), sched_model)
            v0, vk = gnn.gnn_forward(sched_model, feats)
            _, beams_all = gnn.decode_outputs(v0, vk, config.P_d)
            schedule = implicit_schedule(beams_all.W, config.M)
            users = list(schedule.users)

            feats_s = gnn.build_features(alpha[users], block.select(users), ris_model)
            r0, rk = gnn.gnn_forward(ris_model, feats_s)
            ris, _ = gnn.decode_outputs(r0, rk, config.P_d)
            theta = ris.theta
            if config.phase_bits is not None:
                theta = quantize_phases(theta, config.phase_bits).theta

            if mode == "extra_pilots":
                X = make_pilots(config.M, config.P_u)[:, :len(users)]
                h_eff = effective_channels(real, theta, users)
                raw = [receive_pilot_block(h_eff, X, config.sigma_u2, rng)
                       for _ in range(config.D_W)]
                wblock = decorrelate_collect(raw, X, np.tile(theta, (config.D_W, 1)))
                h_c_hat = estimation.lmmse_estimate_combined(wblock, comb_stats,
                                                             config.sigma_u2)
                simulated += config.M * config.D_W
            else:
                H_hat = estimation.lmmse_estimate_high_dim(block, high_stats,
                                                           config.sigma_u2, users=users)
                h_c_hat = estimation.combined_from_high_dim(H_hat, theta)

            beams = wmmse_beamformers(h_c_hat, alpha[users], config.P_d, config.sigma_d2,
                                      max_iter=params.wmmse_max_iter,
                                      tol=params.wmmse_tol)
            rates = achievable_rates(real, theta, beams.W, schedule, config.sigma_d2)
            state = pf_update(state, rates)
            rates_rows.append(rates)
            sched_rows.append(schedule.beta)

        if simulated != overhead:
            raise AssertionError(f"simulated {simulated} pilot symbols, booked {overhead}")

    return _finalize(config, state, rates_rows, sched_rows, overhead, keep_trace)


def run_baseline_episode(config: SystemConfig, scheduler: str, csi: str = "perfect",
                         periods: int = 1, params: OptimParams | None = None,
                         stats: dict | None = None, keep_trace: bool = True,
                         ) -> EpisodeResult:
    """Conventional two-step pipeline: estimate channels, then schedule.

    ``scheduler`` is one of greedy_bcd / exhaustive / random / round_robin;
    ``csi`` selects the inputs the scheduler sees (rates are always realized
    on the true channels).
    """
    params = params or OptimParams()
    if scheduler not in SCHEDULERS or scheduler == "gnn3stage":
        raise ValueError(f"unknown baseline scheduler '{scheduler}'")
    if csi not in CSI_MODES:
        raise ValueError(f"unknown csi mode '{csi}'")

    d_h = params.D_H if params.D_H is not None else config.D_theta
    overhead = config.K * d_h if csi == "estimated" else 0
    if csi == "estimated":
        high_stats = _get_stats(config, params, stats, "high_dim")

    state = PfState.initial(config.K, config.gamma)
    rates_rows, sched_rows = [], []
    slot_index = 0

    for period in range(periods):
        real = generate_channels(config, derive_rng(config.seed, _CHAN_TAG, period))

        if csi == "estimated":
            block = transmit_pilot_phase(real, config, d_h,
                                         derive_rng(config.seed, _PILOT_TAG, period))
            H_hat = estimation.lmmse_estimate_high_dim(block, high_stats, config.sigma_u2)
            h_d_in, A_in = H_hat[:, :, 0], H_hat[:, :, 1:]
        else:
            h_d_in, A_in = real.h_d, real.A

        for slot in range(config.Upsilon):
            rng = _slot_rng(config, period, slot)
            alpha = state.alpha
            if scheduler == "greedy_bcd":
                schedule, ris, beams = greedy_schedule_bcd(h_d_in, A_in, alpha, config,
                                                           rng, params)
            elif scheduler == "exhaustive":
                schedule, ris, beams = exhaustive_schedule(h_d_in, A_in, alpha, config,
                                                           rng, params)
            else:
                if scheduler == "random":
                    schedule = random_schedule(config.K, config.M, rng)
                else:
                    schedule = round_robin_schedule(config.K, config.M, slot_index)
                ris = RisConfig(theta=random_phases(config.N, rng))
                users = list(schedule.users)
                h_c = h_d_in[users] + np.einsum("kmn,n->km", A_in[users], ris.theta)
                beams = wmmse_beamformers(h_c, alpha[users], config.P_d, config.sigma_d2,
                                          max_iter=params.wmmse_max_iter,
                                          tol=params.wmmse_tol)

            theta = ris.theta
            if config.phase_bits is not None:
                theta = quantize_phases(theta, config.phase_bits).theta
                users = list(schedule.users)
                h_c = h_d_in[users] + np.einsum("kmn,n->km", A_in[users], theta)
                beams = wmmse_beamformers(h_c, alpha[users], config.P_d, config.sigma_d2,
                                          max_iter=params.wmmse_max_iter,
                                          tol=params.wmmse_tol)

            rates = achievable_rates(real, theta, beams.W, schedule, config.sigma_d2)
            state = pf_update(state, rates)
            rates_rows.append(rates)
            sched_rows.append(schedule.beta)
            slot_index += 1

    return _finalize(config, state, rates_rows, sched_rows, overhead, keep_trace)


def compute_metrics(results) -> tuple[EpisodeResult, np.ndarray]:
    """Aggregate episodes into summary metrics plus CDF points.

    Every (user, episode) pair contributes one CDF point: that user's
    average instantaneous rate within the episode.  Returns the aggregate
    (utility recomputed from the plain averages, natural log) and an array
    of (rate, cumulative_fraction) rows.
    """
    results = list(results)
    if not results or any(r.rates_trace is None or r.rates_trace.size == 0
                          for r in results):
        raise ValueError("need non-empty rate traces")
    all_rates = np.concatenate([r.rates_trace for r in results], axis=0)
    all_scheds = np.concatenate([r.schedule_trace for r in results], axis=0)
    per_user = all_rates.mean(axis=0)
    points = np.sort(np.concatenate([r.rates_trace.mean(axis=0) for r in results]))
    cdf = np.column_stack([points, (np.arange(points.size) + 1) / points.size])
    overheads = {r.pilot_overhead for r in results}
    agg = EpisodeResult(
        per_user_avg_rates=per_user,
        log_utility=_log_utility(per_user),
        sum_rate=float(per_user.sum()),
        scheduling_fractions=all_scheds.mean(axis=0),
        pilot_overhead=max(overheads),
        rates_trace=all_rates,
        schedule_trace=all_scheds,
    )
    return agg, cdf
