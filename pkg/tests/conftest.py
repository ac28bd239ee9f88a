import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def chart1():
    from crflab.geometry import TorusChart

    return TorusChart(1, 128, active_axes=(0,))


@pytest.fixture
def chart2():
    from crflab.geometry import TorusChart

    return TorusChart(2, 64, active_axes=(0, 2))


@pytest.fixture
def nonkahler_metric(chart2):
    """g_{1 1bar} depends on x_2, so the torsion does not vanish."""
    import numpy as np

    from crflab.geometry import HermitianMatrixField

    x2 = chart2.axis_coordinates(2)
    base = np.array([[1.4, 0.2 + 0.1j], [0.2 - 0.1j, 1.1]])
    vals = np.broadcast_to(base, chart2.shape + (2, 2)).astype(complex).copy()
    vals[..., 0, 0] = vals[..., 0, 0] + 0.2 * np.cos(x2) * np.ones(chart2.shape)
    return HermitianMatrixField(chart2, vals)


def bandlimited_scalar(chart, seed, modes=3, amplitude=0.1):
    """Random real trigonometric polynomial with |k| <= modes per axis."""
    rng = np.random.default_rng(seed)
    vals = np.zeros(chart.shape)
    for _ in range(4):
        theta = np.zeros(chart.shape)
        for a in chart.active_axes:
            k = int(rng.integers(-modes, modes + 1))
            theta = theta + 2 * np.pi * k * chart.axis_coordinates(a) / chart.periods[a]
        vals = vals + amplitude * rng.random() * np.cos(theta + 2 * np.pi * rng.random())
    from crflab.geometry import ScalarField

    return ScalarField(chart, vals)
