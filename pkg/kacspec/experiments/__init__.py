from kacspec.experiments.registry import EXPERIMENTS, ExperimentRegistry
from kacspec.experiments.service import register_builtin

register_builtin(EXPERIMENTS)

__all__ = ["EXPERIMENTS", "ExperimentRegistry"]
