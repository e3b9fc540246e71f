import logging
import threading
from typing import Dict, List, Optional

from kacspec.errors import DomainError
from kacspec.experiments.models import ExperimentRecord
from kacspec.experiments.schemas import ExperimentReport, RunConfig

logger = logging.getLogger(__name__)


class ExperimentRegistry:
    def __init__(self) -> None:
        self._records: Dict[str, ExperimentRecord] = {}
        self._lock = threading.RLock()

    def register(self, record: ExperimentRecord, replace: bool = False) -> None:
        with self._lock:
            if record.name in self._records and not replace:
                raise DomainError(f"experiment '{record.name}' is already registered")
            self._records[record.name] = record

    def get(self, name: str) -> Optional[ExperimentRecord]:
        with self._lock:
            return self._records.get(name)

    def list(self) -> List[ExperimentRecord]:
        with self._lock:
            return sorted(self._records.values(), key=lambda record: record.name)

    def names(self) -> List[str]:
        return [record.name for record in self.list()]

    def run(self, name: str, config: RunConfig) -> ExperimentReport:
        """
        Run one experiment with the profile defaults filled in.

        The config echoed into the report is the resolved one, so an artifact
        alone is enough to reproduce it.
        """
        record = self.get(name)
        if record is None:
            raise DomainError(f"unknown experiment '{name}'")
        resolved = record.resolve(config)
        logger.info("Running experiment '%s' (profile %s)", name, resolved.profile)
        try:
            report = record.runner(resolved)
        except Exception as exc:
            logger.warning("Failed to run experiment '%s': %s", name, exc)
            with self._lock:
                record.error = str(exc)
            raise
        with self._lock:
            record.error = None
        return report


# Singleton registry instance
EXPERIMENTS = ExperimentRegistry()
