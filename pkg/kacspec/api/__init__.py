from fastapi import APIRouter

# Aggregator router
API = APIRouter(prefix="/api")

# Import modules to register their routes
from . import v1  # noqa: E402,F401
