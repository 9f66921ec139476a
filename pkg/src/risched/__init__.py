"""RIS-assisted multiuser downlink simulator.

Library layout: ``config`` (scenario files), ``channel`` (fading and
rates), ``pilots`` (uplink training protocol), ``estimation`` (LMMSE),
``optimize`` (WMMSE / manifold CG / quantization), ``scheduling``
(PF state and discrete schedulers), ``gnn`` (graph-network inference and
the portable weight format), ``driver`` (episodes, metrics), ``cli``.
"""

from .channel import (BeamMatrix, ChannelRealization, RisConfig, achievable_rates,
                      effective_channel, generate_channels, pathloss_gain)
from .config import OptimParams, Scenario, SystemConfig, load_scenario, save_scenario
from .driver import (EpisodeResult, compute_metrics, run_baseline_episode,
                     run_three_stage_episode)
from .estimation import (LmmseStats, fit_lmmse_stats, lmmse_estimate_combined,
                         lmmse_estimate_high_dim)
from .gnn import GnnArch, GnnModel, build_features, decode_outputs, gnn_forward
from .optimize import quantize_phases, rcg_ris_phases, wmmse_beamformers
from .pilots import PilotBlock, decorrelate_collect, make_pilots, pilot_overhead
from .scheduling import (PfState, Schedule, exhaustive_schedule, greedy_schedule_bcd,
                         implicit_schedule, pf_update)

__version__ = "0.1.0"
