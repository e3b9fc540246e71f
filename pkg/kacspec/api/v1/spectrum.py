from typing import List

from fastapi import APIRouter, Query
from pydantic import BaseModel

from kacspec.errors import KacspecError
from kacspec.experiments.api.routes import http_error
from kacspec.spectrum import KacSpectrum

spectrum_router = APIRouter(prefix="/spectrum", tags=["Spectrum"])

MAX_HTTP_K = 5000


class SpectrumResponse(BaseModel):
    s: float
    K: int
    c0: float
    d0: float
    eigenvalues: List[float]
    lambda_prime: List[float]
    # lambda''_l for l = 1..K/2
    lambda_doubleprime: List[float]


@spectrum_router.get("", response_model=SpectrumResponse)
def get_spectrum(
    s: float = Query(..., gt=0.0, lt=1.0),
    K: int = Query(20, ge=2, le=MAX_HTTP_K),
) -> SpectrumResponse:
    try:
        spectrum = KacSpectrum.build(s, K)
    except KacspecError as exc:
        raise http_error(exc) from exc
    return SpectrumResponse(
        s=spectrum.s,
        K=spectrum.K,
        c0=spectrum.constants.c0,
        d0=spectrum.constants.d0,
        eigenvalues=spectrum.eigenvalues.tolist(),
        lambda_prime=spectrum.lambda_prime.tolist(),
        lambda_doubleprime=spectrum.lambda_doubleprime[1:].tolist(),
    )
