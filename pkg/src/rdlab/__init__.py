"""Rate-distortion solving, block source codes, and diagnostics of the laws they induce."""

from .distributions import *  # noqa: F401,F403
from .rd_solver import *  # noqa: F401,F403
from .codes import *  # noqa: F401,F403
from .induced import *  # noqa: F401,F403
from .channel_conv import *  # noqa: F401,F403
from .exceptions import ConfigError, InvariantViolation, NotConverged, RdlabError, ResourceError
from .experiments import ExperimentConfig, load_config

from . import distributions, rd_solver, codes, induced, channel_conv, experiments, cli  # noqa: E402

__version__ = "0.1.0"
