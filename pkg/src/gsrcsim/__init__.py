"""Goal-oriented waypoint control simulator for a BS-to-UAV downlink."""

from gsrcsim.channel import ChannelDraw, ChannelParams, IdealChannel, RadioChannel
from gsrcsim.config import ExperimentConfig, load_config
from gsrcsim.engine import Scheme, make_trajectory, run_batch, run_episode
from gsrcsim.kinematics import MotionLog, SimClock, TargetTrajectory, VelocitySets, mse

__all__ = [
    "ChannelDraw",
    "ChannelParams",
    "ExperimentConfig",
    "IdealChannel",
    "MotionLog",
    "RadioChannel",
    "Scheme",
    "SimClock",
    "TargetTrajectory",
    "VelocitySets",
    "load_config",
    "make_trajectory",
    "mse",
    "run_batch",
    "run_episode",
]

__version__ = "0.1.0"
