import os
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

from flmor.systems import GeneralizedSystem, Index1System, ReducedModel

# linear algebra per example is slow compared with hypothesis defaults
settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def scalar_system(a=-1.0, b=1.0, c=1.0, e=1.0):
    return GeneralizedSystem(sp.csc_matrix([[e]]), sp.csc_matrix([[a]]), np.array([[b]]), np.array([[c]]))


def scalar_reduced(a=-2.0, b=1.0, c=1.0):
    return ReducedModel(np.array([[a]]), np.array([[b]]), np.array([[c]]))


def scalar_index1():
    """J1=-1, E1=1, J2=J3=1, J4=-2, B1=1, B2=0, C1=1, C2=0: eliminated A = -0.5."""
    return Index1System(
        sp.csc_matrix([[1.0]]), sp.csc_matrix([[-1.0]]), sp.csc_matrix([[1.0]]), sp.csc_matrix([[1.0]]),
        sp.csc_matrix([[-2.0]]), np.array([[1.0]]), np.array([[0.0]]), np.array([[1.0]]), np.array([[0.0]]),
    )


def rel(x, y):
    return float(np.linalg.norm(np.asarray(x) - np.asarray(y)) / max(np.linalg.norm(np.asarray(y)), 1e-300))


@pytest.fixture
def scalar_pair():
    return scalar_system(), scalar_reduced()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results, key=str):
            terminalreporter.write_line(results[key])
