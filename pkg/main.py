from fastapi import FastAPI
from kacspec.api import API
from kacspec.settings import KACSPEC, KACSPEC_LOG_LEVEL, LOG_FORMAT

import logging


logging.basicConfig(
    level=KACSPEC_LOG_LEVEL,
    format=LOG_FORMAT,
)

# Initialize main application
APP = FastAPI(
    title="kacspec API",
    description=KACSPEC["description"] + ". Read-only mirror of the command-line experiments.",
    version=KACSPEC["version"],
)

# Include main API router
APP.include_router(API)
