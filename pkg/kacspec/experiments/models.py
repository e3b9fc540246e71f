from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

from kacspec.experiments.schemas import ExperimentReport, RunConfig


@dataclass
class ExperimentRecord:
    name: str
    runner: Callable[[RunConfig], ExperimentReport]
    description: str
    # profile name -> parameters used when the config leaves them unset
    defaults: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    error: Optional[str] = None

    def resolve(self, config: RunConfig) -> RunConfig:
        preset = self.defaults.get(config.profile, {})
        update = {key: value for key, value in preset.items() if key not in config.model_fields_set}
        return config.model_copy(update=update)
