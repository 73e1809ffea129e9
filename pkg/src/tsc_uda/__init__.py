"""Teacher-student competition for unsupervised domain adaptation, on a numpy autodiff core."""

from .competition import CompetitionDecision, Reason, Schedule, Winner, compete, threshold
from .data import DatasetSpec, Domain, generate
from .harness.config import ExperimentConfig, parse_config
from .losses import LossWeights
from .trainer import RunResult, run

__version__ = "0.1.0"
