"""Link-level Monte Carlo simulator of a cluster-head-driven buffer-aided
multi-way relay network with recursive max-min-distance relay selection."""

from .buffers import BufferBank, BufferContractError, BufferSummary, PacketGroup
from .channel import (ChannelParams, ChannelSet, CsiErrorParams, Topology,
                      apply_path_loss, corrupt_csi, draw_iid, evolve,
                      slot_channels)
from .engine import (ConfigError, Engine, RunStats, SimConfig, SlotOutcome,
                     run_cell, run_experiment, theoretical_pep,
                     worst_case_distance)
from .selection import (BcMetricTable, DriftState, GThresholdEstimator,
                        MaMetricTable, SelectionDecision, bc_candidates,
                        bc_metrics, combine_downlink, drift_check, estimate_G,
                        ma_metrics, mode_select)
from .signal import (BPSK, NoiseParams, bpsk_demodulate, bpsk_modulate,
                     candidate_vectors, difference_vectors,
                     ml_detect_downlink, ml_detect_uplink,
                     synthesize_downlink, synthesize_uplink, xor_combine,
                     xor_recover)

__version__ = "0.1.0"
