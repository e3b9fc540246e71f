from typing import List, Literal, Optional

from fastapi import APIRouter, HTTPException, Query
from pydantic import BaseModel

from kacspec.errors import KacspecError
from kacspec.experiments.api.routes import http_error
from kacspec.symbols import PhasePoint, full_symbol, l1_symbol_d, l2_symbol_d, mehler_symbol

symbols_router = APIRouter(prefix="/symbols", tags=["Symbols"])


class SymbolValue(BaseModel):
    name: str
    v: List[float]
    xi: List[float]
    q: float
    value: float


@symbols_router.get("/{name}", response_model=SymbolValue)
def get_symbol(
    name: Literal["l1", "l2", "full", "mehler"],
    v: Optional[List[float]] = Query(None),
    xi: Optional[List[float]] = Query(None),
    s: float = Query(0.5, gt=0.0, lt=1.0),
    d: Optional[int] = Query(None, ge=1, le=3),
    t: float = Query(1.0, ge=0.0),
) -> SymbolValue:
    dim = d or len(v or xi or [0.0])
    v = v or [0.0] * dim
    xi = xi or [0.0] * dim
    if len(v) != dim or len(xi) != dim:
        raise HTTPException(status_code=422, detail=f"v and xi must both have {dim} components")

    point = PhasePoint(v=v, xi=xi)
    try:
        if name == "mehler":
            value = mehler_symbol(t, point)
        elif name == "l1":
            value = l1_symbol_d(point, s)
        elif name == "l2":
            value = l2_symbol_d(point, s)
        else:
            value = full_symbol(point, s)
    except KacspecError as exc:
        raise http_error(exc) from exc
    return SymbolValue(name=name, v=list(point.v), xi=list(point.xi), q=point.q, value=value)
