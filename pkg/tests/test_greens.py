import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgeburst.dynamics import loss_profile
from edgeburst.errors import CoalescentRootsError, DomainError
from edgeburst.greens import (
    bulk_loss_infinite,
    char_roots,
    classify_closing_points,
    gbz,
    gbz_radius_analytic,
    greens_element,
    inside_gbz,
    local_expansion,
    residue_factors,
    saddle_decay_rate,
    winding_number,
    write_gbz_csv,
    write_root_scan_csv,
)
from edgeburst.models import LatticeGeometry, ModelI, ModelII, ModelIII, realspace_hamiltonian
from edgeburst.spectral import gap_closing_points

MODELS = [ModelI(0.3, 0.5, 0.5), ModelI(-0.3, 0.5, 2.0), ModelII(0.8, 2.0, 2.0, math.pi / 5, 2.0),
          ModelIII(0.8, 0.5, 0.3)]


def chain_greens(model, z, L=161):
    """Oracle: resolvent of a long open chain, read off far from both ends."""
    b = model.bands
    H = realspace_hamiltonian(model, LatticeGeometry.for_model(model, L, "OBC")).toarray()
    return np.linalg.inv(z * np.eye(b * L) - H), L // 2


@pytest.mark.parametrize("model", MODELS)
@given(omega=st.floats(-2.5, 2.5), eta=st.floats(0.3, 1.0))
def test_residues_match_resolvent(model, omega, eta):
    G, x0 = chain_greens(model, complex(omega, eta))
    b = model.bands
    for n in (-6, -1, 0, 1, 5):
        ref = G[b * (x0 + n) + b - 1, b * x0]
        assert greens_element(model, omega, n, eta) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("model", MODELS)
def test_root_split_counts(model):
    br = char_roots(model, 0.17, 0.3)
    assert np.all(np.abs(br.outside) > 1) and np.all(np.abs(br.inside) < 1)
    assert len(br.inside) == br.n_inside


def test_roots_at_closing_point():
    br = residue_factors(ModelI(0.3, 0.5, 0.5), 0.4)
    assert br.beta_L == pytest.approx(complex(-0.6, 0.8), abs=1e-10)
    assert abs(br.beta_R) == pytest.approx(0.05 / 0.55, abs=1e-10)
    assert abs(br.f_L) < 1e-8


def test_coalescent_factor_extrapolates_to_inverse_loss():
    m = ModelI(0.0, 0.5, 0.5)
    br = residue_factors(m, 0.5)
    assert br.extrapolated
    assert abs(br.f_L) == pytest.approx(1 / 0.5, abs=1e-4)
    with pytest.raises(CoalescentRootsError):
        residue_factors(m, 0.5, extrapolate=False)


def test_negative_eta_rejected():
    with pytest.raises(DomainError):
        char_roots(ModelI(0.3, 0.5, 0.5), 0.1, -1e-3)


@pytest.mark.parametrize("model,x0,ds", [
    (ModelI(0.3, 0.5, 2.0), 60, [-30, -10, -3, 2, 15]),
    (ModelIII(0.8, 0.5, 0.3), 45, [-20, -4, 1, 5]),
])
def test_infinite_chain_loss_matches_long_chain(model, x0, ds):
    L = 2 * x0
    prof = loss_profile(model, LatticeGeometry.for_model(model, L, "OBC"), x0)
    for d in ds:
        assert bulk_loss_infinite(model, d) == pytest.approx(prof.values[x0 + d - 1], rel=1e-6)


def test_zero_displacement_rejected():
    with pytest.raises(DomainError):
        bulk_loss_infinite(ModelI(0.3, 0.5, 0.5), 0)


@pytest.mark.parametrize("t1,n,m,alpha", [(0.0, Fraction(1, 2), 0, 2), (0.3, 2, 2, Fraction(3, 2)),
                                          (0.5, 4, 4, Fraction(5, 4))])
def test_expansion_orders(t1, n, m, alpha):
    model = ModelI(t1, 0.5, 0.5)
    p = max(gap_closing_points(model), key=lambda q: q.omega0)
    e = local_expansion(model, p)
    assert (e.n, e.m) == (n, m)
    assert e.r2_n > 0.999 and e.r2_m > 0.999
    assert e.alpha_b_analytic == alpha


@pytest.mark.parametrize("t1", [0.0, 0.3, 0.6])
def test_gbz_circle_radius(t1):
    m = ModelI(t1, 0.5, 0.5)
    data = gbz(m, 60)
    r = gbz_radius_analytic(m)
    assert r == pytest.approx(math.sqrt(abs((t1 - 0.25) / (t1 + 0.25))))
    assert np.max(np.abs(np.abs(data.beta_points) - r)) < 1e-3


def test_saddle_matches_dense_spectrum():
    m = ModelI(0.3, 0.5, 2.0)
    s = saddle_decay_rate(m)
    H = realspace_hamiltonian(m, LatticeGeometry.for_model(m, 80, "OBC")).toarray()
    assert not s.fallback
    assert s.E_s.imag == pytest.approx(np.max(np.linalg.eigvals(H).imag), abs=1e-3)


def test_degenerate_gbz_falls_back():
    # t1 = gamma/2 gives a GBZ of radius zero
    m = ModelI(0.4, 0.5, 0.8)
    data = gbz(m, 40)
    assert gbz_radius_analytic(m) == 0
    assert data.saddle is not None


def test_bipolar_points_inside_and_outside():
    m = ModelII(0.8, 2.0, 2.0, math.pi / 5, 2.0)
    data = gbz(m, 60, with_saddle=False)
    right, left = classify_closing_points(m)
    assert len(right) == 1 and len(left) == 1
    assert inside_gbz(data, right[0][1])
    assert not inside_gbz(data, left[0][1])


def test_winding_number_of_circle():
    c = np.exp(1j * np.linspace(0, 2 * np.pi, 50, endpoint=False))
    assert winding_number(c, 0) == 1
    assert winding_number(c[::-1], 0.2) == -1
    assert winding_number(c, 3) == 0


def test_csv_writers(tmp_path):
    m = ModelI(0.3, 0.5, 0.5)
    write_gbz_csv(tmp_path / "g.csv", gbz(m, 40, with_saddle=False))
    write_root_scan_csv(tmp_path / "r.csv", m, np.linspace(-1, 1, 5))
    assert (tmp_path / "g.csv").read_text().startswith("index,re,im,modulus\n")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "omega,root,re,im,modulus" and len(lines) == 11
