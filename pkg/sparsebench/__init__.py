from loguru import logger

from sparsebench import (
    config,
    decorators,
    ensembles,
    errors,
    fs,
    geometry,
    harness,
    log,
    lp,
    numerics,
    recovery,
    ric,
)

__version__ = "0.1.0"

logger.disable("sparsebench")
