from fastapi import APIRouter, HTTPException

from kacspec.errors import (
    AccuracyError,
    CapabilityError,
    ConfigValidationError,
    ConsistencyError,
    DomainError,
    KacspecError,
)
from kacspec.experiments import EXPERIMENTS
from kacspec.experiments.models import ExperimentRecord
from kacspec.experiments.schemas import (
    ExperimentInfo,
    ExperimentListResponse,
    ExperimentReport,
    RunConfig,
)

router: APIRouter = APIRouter(prefix="/experiments", tags=["Experiments"])


def http_error(exc: KacspecError) -> HTTPException:
    if isinstance(exc, (DomainError, ConfigValidationError, CapabilityError)):
        return HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, (AccuracyError, ConsistencyError)):
        return HTTPException(status_code=409, detail={"message": str(exc), "diagnostic": exc.diagnostic})
    return HTTPException(status_code=500, detail=str(exc))


def _record_to_info(record: ExperimentRecord) -> ExperimentInfo:
    return ExperimentInfo(
        name=record.name,
        description=record.description,
        profiles=record.defaults,
        error=record.error,
    )


def _get_record_or_404(name: str) -> ExperimentRecord:
    record = EXPERIMENTS.get(name)
    if record is None:
        raise HTTPException(status_code=404, detail="Experiment not found")
    return record


@router.get("", response_model=ExperimentListResponse)
def list_experiments() -> ExperimentListResponse:
    return ExperimentListResponse(experiments=[_record_to_info(r) for r in EXPERIMENTS.list()])


@router.get("/{name}", response_model=ExperimentInfo)
def get_experiment(name: str) -> ExperimentInfo:
    return _record_to_info(_get_record_or_404(name))


@router.post("/{name}", response_model=ExperimentReport)
def run_experiment(name: str, config: RunConfig) -> ExperimentReport:
    _get_record_or_404(name)
    if config.output is not None or config.matrix_output is not None:
        raise HTTPException(status_code=422, detail="the HTTP surface does not write files")
    try:
        return EXPERIMENTS.run(name, config)
    except KacspecError as exc:
        raise http_error(exc) from exc
