import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(autouse=True, scope="session")
def strict_float_errors():
    """Fail loudly on division by zero, overflow, or NaN production.

    Underflow stays silent: exp(-large) flushing to zero is expected all
    over the closed forms.
    """
    old = np.seterr(divide="raise", over="raise", invalid="raise", under="ignore")
    yield
    np.seterr(**old)
