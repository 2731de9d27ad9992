import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from apbsim.params import RssParams

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    deadline=None,  # jitted helpers compile on first call
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def default_params():
    return RssParams()
