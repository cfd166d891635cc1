import pytest
from loguru import logger


@pytest.fixture(autouse=True)
def silent_logger():
    # cli.main installs stderr sinks bound to the captured stream of the running test
    yield
    logger.remove()
    logger.disable("sparsebench")


@pytest.fixture
def log_messages():
    """Records of everything sparsebench logs at DEBUG or above while the test runs."""
    records = []
    logger.enable("sparsebench")
    logger.add(lambda message: records.append(message.record), level="DEBUG")
    return records
