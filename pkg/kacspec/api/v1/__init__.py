from kacspec.api import API
from kacspec.experiments.api.routes import router as experiments_router
from .heal import core_router
from .spectrum import spectrum_router
from .symbols import symbols_router

API.include_router(core_router)
API.include_router(spectrum_router)
API.include_router(symbols_router)
API.include_router(experiments_router)
