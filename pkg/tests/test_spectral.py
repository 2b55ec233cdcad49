import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgeburst.models import ModelI, ModelII, ModelIII, bloch_hamiltonian
from edgeburst.spectral import (
    antihermitian_part,
    biorthogonal_im_check,
    gap_closing_points,
    imaginary_gap,
    pbc_spectrum,
    spectral_area,
    write_spectrum_csv,
)


def test_spectrum_ordering_and_biorthogonality():
    for s in pbc_spectrum(ModelI(0.3, 0.5, 0.5), 32):
        assert s.energies[0].imag >= s.energies[1].imag
        assert not s.defective
        np.testing.assert_allclose(s.left_eigenvectors.conj().T @ s.right_eigenvectors, np.eye(2), atol=1e-10)
        H = bloch_hamiltonian(ModelI(0.3, 0.5, 0.5), s.k)
        np.testing.assert_allclose(H @ s.right_eigenvectors, s.right_eigenvectors * s.energies, atol=1e-12)


def test_exceptional_point_flagged():
    # t1 = 0: the two bands touch at k = 0 with a single eigenvector
    m = ModelI(0.0, 0.5, 1.0)
    s = pbc_spectrum(m, 16)[0]
    H = bloch_hamiltonian(m, 0.0)
    assert s.defective == (np.linalg.cond(np.linalg.eig(H)[1]) > 1e8)


def test_small_grid_rejected():
    with pytest.raises(ValueError):
        pbc_spectrum(ModelI(0.3, 0.5, 0.5), 8)


@given(st.floats(-1.0, 1.0).filter(lambda t: abs(abs(t) - 0.5) > 0.02))
def test_gap_closed_iff_inside_band(t1):
    gap = imaginary_gap(ModelI(t1, 0.5, 0.5))
    if abs(t1) <= 0.5:
        assert abs(gap) < 1e-8
    else:
        assert gap < -1e-4


@pytest.mark.parametrize("t1", [0.0, 0.1, 0.3, 0.45])
def test_closing_frequencies(t1):
    pts = gap_closing_points(ModelI(t1, 0.5, 0.5))
    w = sorted(p.omega0 for p in pts)
    expect = math.sqrt(0.25 - t1**2)
    np.testing.assert_allclose(w, [-expect, expect], atol=1e-8)
    for p in pts:
        assert abs(p.im_energy) < 1e-8


def test_gapped_model_has_no_closing_points():
    res = gap_closing_points(ModelI(0.6, 0.5, 0.5))
    assert res.gapped and len(res) == 0


def test_model_two_closing_points():
    m = ModelII(0.8, 2.0, 2.0, math.pi / 5, 2.0)
    w = sorted(p.omega0 for p in gap_closing_points(m))
    assert len(w) == 2
    for p in gap_closing_points(m):
        E = np.linalg.eigvals(bloch_hamiltonian(m, p.k0))
        assert np.min(np.abs(E - p.omega0)) < 1e-8


@given(st.floats(-1, 1), st.floats(0.1, 2), st.floats(-math.pi, math.pi))
def test_loss_matrix_eigenvalues(t1, gamma, k):
    a = antihermitian_part(ModelI(t1, 0.5, gamma), k)
    np.testing.assert_allclose(a.eigenvalues, [0, -gamma], atol=1e-12)


@given(st.floats(-1, 1), st.floats(0.1, 2), st.floats(-math.pi, math.pi))
def test_im_energy_is_weighted_loss(t1, gamma, k):
    chk = biorthogonal_im_check(ModelI(t1, 0.5, gamma), k)
    if not chk.defective:
        assert chk.residual.max() < 1e-10
        np.testing.assert_allclose(chk.weights.sum(axis=1), 1, atol=1e-12)


def test_area_dichotomy():
    assert spectral_area(ModelI(0.0, 0.5, 0.5)).total < 1e-8
    assert spectral_area(ModelI(0.3, 0.5, 0.5)).total > 1e-3
    assert spectral_area(ModelIII(0.8, 0.0, 0.3)).total < 1e-8
    assert spectral_area(ModelIII(0.8, 0.5, 0.0)).total > 1e-3


def test_area_single_band_is_ellipse():
    # E(k) = 2t cos k + i gamma sin k - i gamma traces an ellipse of semi-axes 2t, gamma
    m = ModelIII(0.8, 0.5, 0.0)
    assert spectral_area(m).total == pytest.approx(math.pi * 1.6 * 0.5, rel=1e-5)


def test_spectrum_csv(tmp_path):
    p = tmp_path / "s.csv"
    write_spectrum_csv(p, pbc_spectrum(ModelI(0.3, 0.5, 0.5), 16))
    lines = p.read_text().splitlines()
    assert lines[0] == "k,band,reE,imE"
    assert len(lines) == 1 + 32
