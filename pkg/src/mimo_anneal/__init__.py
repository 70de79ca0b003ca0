"""Maximum-likelihood MIMO detection as Ising minimisation on an annealer model."""

from .errors import *  # noqa: F401,F403
from .mimo import *  # noqa: F401,F403
from .transforms import *  # noqa: F401,F403
from .reduction import *  # noqa: F401,F403
from .embedding import *  # noqa: F401,F403
from .solver import *  # noqa: F401,F403
from .metrics import *  # noqa: F401,F403
from .baselines import *  # noqa: F401,F403
from .harness import ExperimentConfig, GridPoint, replay, run_instance, sweep  # noqa: F401

__version__ = "0.1.0"
