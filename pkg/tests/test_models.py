import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgeburst.errors import DomainError, GeometryError
from edgeburst.models import (
    Boundary,
    LatticeGeometry,
    ModelI,
    ModelII,
    ModelIII,
    beta_hamiltonian,
    bloch_hamiltonian,
    hopping_blocks,
    model_from_dict,
    model_to_dict,
    realspace_hamiltonian,
    site_index,
)

coef = st.floats(-2, 2, allow_nan=False)
rate = st.floats(0, 2, allow_nan=False)


def models():
    return st.one_of(
        st.builds(ModelI, coef, coef, rate),
        st.builds(ModelII, coef, coef, coef, st.floats(0, 2 * math.pi), rate),
        st.builds(ModelIII, coef, rate, rate),
    )


def test_model_one_bloch_matrix_known_point():
    H = bloch_hamiltonian(ModelI(0.4, 0.5, 0.8), math.pi / 2)
    np.testing.assert_allclose(H, [[0.5, 0.4], [0.4, -0.5 - 0.8j]], atol=1e-15)


@given(models(), st.floats(-math.pi, math.pi))
def test_beta_on_unit_circle_is_bloch(model, k):
    np.testing.assert_allclose(beta_hamiltonian(model, complex(math.cos(k), math.sin(k))),
                               bloch_hamiltonian(model, k), atol=1e-13)


@given(st.builds(ModelI, coef, coef, st.just(0.0)), st.floats(-math.pi, math.pi))
def test_lossless_model_is_hermitian(model, k):
    H = bloch_hamiltonian(model, k)
    np.testing.assert_allclose(H, H.conj().T, atol=1e-14)


@given(models(), st.floats(-math.pi, math.pi))
def test_antihermitian_part_is_minus_loss(model, k):
    # the Hermitian hoppings cancel, leaving -i times the loss matrix
    H = bloch_hamiltonian(model, k)
    D = (H - H.conj().T) / 2j
    assert np.all(np.linalg.eigvalsh((D + D.conj().T) / 2) <= 1e-12)


@pytest.mark.parametrize("model", [ModelI(0.3, 0.5, 0.5), ModelII(0.8, 2, 2, math.pi / 5, 2), ModelIII(0.8, 0.5, 0.3)])
def test_pbc_spectrum_is_sampled_bloch_spectrum(model):
    L = 7
    H = realspace_hamiltonian(model, LatticeGeometry.for_model(model, L, "PBC")).toarray()
    E = np.linalg.eigvals(H)
    Ek = np.concatenate([np.linalg.eigvals(bloch_hamiltonian(model, 2 * math.pi * j / L)) for j in range(L)])
    for e in Ek:
        assert np.min(np.abs(E - e)) < 1e-10


def test_obc_drops_wrap_blocks():
    m = ModelI(0.3, 0.5, 0.5)
    obc = realspace_hamiltonian(m, LatticeGeometry.for_model(m, 5, "OBC")).toarray()
    pbc = realspace_hamiltonian(m, LatticeGeometry.for_model(m, 5, "PBC")).toarray()
    h = hopping_blocks(m)
    np.testing.assert_allclose(pbc[8:10, 0:2], h[1])
    np.testing.assert_allclose(obc[8:10, 0:2], 0)
    np.testing.assert_allclose(obc[0:2, 2:4], h[1])
    np.testing.assert_allclose(obc[2:4, 0:2], h[-1])


def test_model_three_single_band_blocks():
    h = hopping_blocks(ModelIII(0.8, 0.5, 0.3))
    assert h[1][0, 0] == pytest.approx(0.8 + 0.25 + 0.15j)
    assert h[-1][0, 0] == pytest.approx(0.8 - 0.25 + 0.15j)
    assert h[0][0, 0] == pytest.approx(-0.8j)


def test_site_index_cell_major():
    g = LatticeGeometry(4, Boundary.OBC, 2)
    assert site_index(g, 1, "A") == 0
    assert site_index(g, 3, "B") == 5
    with pytest.raises(GeometryError):
        site_index(g, 5, "A")


def test_negative_loss_rejected():
    with pytest.raises(DomainError):
        ModelI(0.3, 0.5, -0.1)
    with pytest.raises(DomainError):
        ModelIII(0.8, 0.0, -1e-3)


def test_beta_zero_rejected():
    with pytest.raises(DomainError):
        beta_hamiltonian(ModelI(0.3, 0.5, 0.5), 0)


@given(models())
def test_dict_round_trip(model):
    assert model_from_dict(model_to_dict(model)) == model


def test_dict_rejects_unknown_keys():
    with pytest.raises(DomainError):
        model_from_dict({"model": "I", "t1": 0.3, "t2": 0.5, "gamma": 0.5, "x": 1})
    with pytest.raises(DomainError):
        model_from_dict({"model": "IV"})
