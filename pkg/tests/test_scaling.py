import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgeburst.dynamics import EvolveConfig
from edgeburst.errors import FitError, GeometryError
from edgeburst.models import ModelI, ModelIII
from edgeburst.scaling import (
    bulk_exponent,
    bulk_window,
    classify_regime,
    default_edge_sweep,
    edge_exponent,
    fit_exponential,
    fit_power,
    relative_height_sweep,
)


@given(st.floats(0.1, 4), st.floats(0.01, 100))
def test_power_fit_recovers_exponent(alpha, c):
    x = np.arange(3, 80, dtype=float)
    f = fit_power(x, c * x**-alpha)
    assert f.exponent_or_base == pytest.approx(alpha, abs=1e-9)
    assert f.r_squared == pytest.approx(1)
    assert f.kind == "power"


@given(st.floats(0.05, 0.99))
def test_exponential_fit_recovers_base(lam):
    x = np.arange(1, 30, dtype=float)
    f = fit_exponential(x, 2.0 * lam**x)
    assert f.exponent_or_base == pytest.approx(lam, rel=1e-9)


def test_fit_window_and_errors():
    x = np.arange(1, 100, dtype=float)
    y = np.where(x < 50, x**-1.0, x**-3.0)
    assert fit_power(x, y, window=(60, 90)).exponent_or_base == pytest.approx(3)
    assert fit_power(x, y, window=(60, 90)).points_used == 31
    with pytest.raises(FitError):
        fit_power(x, y, window=(10, 12))
    with pytest.raises(FitError):
        fit_power(x, -y)
    with pytest.raises(FitError):
        fit_power(x[:5], y[:4])


def test_windows():
    assert bulk_window(150) == (10, 90)
    assert bulk_window(300) == (10, 100)
    sweep = default_edge_sweep(200)
    assert len(sweep) == 10 and sweep[0] == 10 and sweep[-1] == 100


def test_bulk_needs_room():
    with pytest.raises(GeometryError):
        bulk_exponent(ModelI(0.3, 0.5, 0.5), L=60, x0=40, window=(10, 30))


def test_edge_sweep_validation():
    m = ModelI(0.3, 0.5, 0.5)
    with pytest.raises(FitError):
        edge_exponent(m, 60, [10, 20, 30])
    with pytest.raises(GeometryError):
        edge_exponent(m, 60, list(range(10, 60, 5)))


@pytest.mark.parametrize("model,closed,nhse", [
    (ModelI(0.0, 0.5, 0.5), True, False),
    (ModelI(0.3, 0.5, 0.5), True, True),
    (ModelI(0.6, 0.5, 0.5), False, True),
    (ModelIII(0.8, 0.0, 0.3), True, False),
    (ModelIII(0.8, 0.5, 0.0), True, True),
])
def test_regime(model, closed, nhse):
    r = classify_regime(model, 1.5, 0.5)
    assert r.imaginary_gap_closed == closed
    assert r.nhse_present == nhse
    assert r.burst_expected == (closed and nhse)
    assert r.relation_residual == pytest.approx(1.0 - (1.0 if nhse else 0.0))


def test_gapped_bulk_is_exponential():
    f = bulk_exponent(ModelI(0.8, 0.5, 0.5), L=60, x0=50, window=(5, 25))
    assert f.kind == "exponential" and 0 < f.exponent_or_base < 1


def test_height_sweep_grows_with_burst():
    hs = relative_height_sweep(ModelI(0.4, 0.5, 0.8), 60, [15, 20, 25, 30, 35, 40, 45, 50])
    assert hs.spearman == pytest.approx(1)
    assert hs.growth > 0.5
