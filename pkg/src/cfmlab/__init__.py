"""cfmlab: a desk-scale lab for velocity-consistency flow matching.

Train velocity fields with consistency, multi-segment, and distillation
objectives; sample with few-step Euler integration; and numerically
verify the underlying consistency results on analytic low-dimensional
problems.
"""
from . import backend
from .field import TimeEmbedding, VelocityField
from .losses import (LossReport, SegmentSchedule, cfm_loss, distill_loss,
                     multisegment_loss, segment_of, velocity_consistency_loss)
from .metrics import (consistency_residual, energy_distance, straightness,
                      wasserstein2_exact)
from .paths import (Coupling, PathSpec, TrainTuple, conditional_velocity,
                    path_point, sample_pair, sample_train_tuple)
from .sampler import Trajectory, record_trajectory, sample_euler, sample_segment_jumps

__version__ = "0.1.0"
