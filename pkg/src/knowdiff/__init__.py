"""Meta-action guided diffusion motion planning on synthetic driving logs."""

from .actions import ALL_ACTIONS, Direction, MetaAction, SpeedProfile
from .trajectory import (EgoState, FeatureVector, PoseTrajectory, Trajectory,
                         Waypoint, extend_heading, extract_features,
                         from_ego_frame, heading_variation, mean_accel,
                         mean_speed, to_ego_frame)
from .library import (PriorLibrary, PriorLibraryBuilder, build_library, classify,
                      load_library, save_library, segment_log)
from .bridge import LookupResult, align_prior, lookup
from .decision import (DecisionRecord, HeuristicProvider, Observation, Prompt,
                       RemoteConfig, RemoteProvider, detect_collapse,
                       encode_prompt, heuristic_decide, remote_decide)
from .diffusion import (Architecture, DenoiserModel, NoiseSchedule, TrainConfig,
                        denoise, forward_noise, full_sample, load_checkpoint,
                        save_checkpoint, train, training_loss, truncated_infer)
from .diffusion.estimator import DiffusionTrajectoryGenerator
from .metrics import OpenLoopReport, ade, evaluate_open_loop, fde_at, miss_rate
from .pipeline import (ExpertReplayPlanner, OraclePlanner, Planner,
                       PriorOnlyPlanner, StraightLinePlanner, build_context,
                       training_samples_from_logs)
from .scenarios import (DriveLog, generate_scenarios, load_drive_log,
                        observation_at, save_drive_log, stopped_lead_scene,
                        suffix_segment)
from .simulate import ClosedLoopReport, SimConfig, rollout_closed_loop

__version__ = "0.1.0"
