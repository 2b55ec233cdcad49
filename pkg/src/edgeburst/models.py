"""Lattice models and their Bloch, non-Bloch and real-space Hamiltonians.

Every model is a nearest-neighbour chain, so it is fully described by three
hopping blocks ``h[-1], h[0], h[+1]`` with the convention

    (H psi)_x = sum_j h[j] psi_{x+j},        H(k) = sum_j h[j] e^{ijk}.

``H(beta)`` is the same Laurent polynomial with ``e^{ik}`` replaced by
``beta``. Real-space sites are ordered cell-major, sublattice-minor:
``(1,A), (1,B), (2,A), ...``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Union

import mpmath
import numpy as np
import scipy.sparse as sp

from .errors import DomainError, GeometryError

__all__ = [
    "ModelI",
    "ModelII",
    "ModelIII",
    "ModelSpec",
    "Boundary",
    "LatticeGeometry",
    "hopping_blocks",
    "hopping_blocks_mp",
    "bloch_hamiltonian",
    "beta_hamiltonian",
    "realspace_hamiltonian",
    "site_index",
    "model_from_dict",
    "model_to_dict",
]

SUBLATTICES = ("A", "B")


def _check_nonnegative(name, value):
    if not math.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class ModelI:
    """Two-band lossy quantum walk; loss rate ``gamma`` on B sites."""

    t1: float
    t2: float
    gamma: float

    bands = 2

    def __post_init__(self):
        _check_nonnegative("gamma", self.gamma)

    @property
    def is_lossy(self) -> bool:
        return self.gamma > 0


@dataclass(frozen=True)
class ModelII:
    """Two-band model with a phase-shifted sublattice potential (bipolar skin effect)."""

    t1: float
    t2: float
    t3: float
    alpha: float
    gamma: float

    bands = 2

    def __post_init__(self):
        _check_nonnegative("gamma", self.gamma)

    @property
    def is_lossy(self) -> bool:
        return self.gamma > 0


@dataclass(frozen=True)
class ModelIII:
    """Single-band chain whose anti-Hermitian part depends on momentum."""

    t: float
    gamma: float
    gamma_prime: float

    bands = 1

    def __post_init__(self):
        _check_nonnegative("gamma", self.gamma)
        _check_nonnegative("gamma_prime", self.gamma_prime)

    @property
    def is_lossy(self) -> bool:
        return self.gamma + self.gamma_prime > 0


ModelSpec = Union[ModelI, ModelII, ModelIII]


class Boundary(str, enum.Enum):
    PBC = "PBC"
    OBC = "OBC"


@dataclass(frozen=True)
class LatticeGeometry:
    """Chain of ``L`` unit cells with ``bands`` sites per cell."""

    L: int
    boundary: Boundary = Boundary.OBC
    bands: int = 2

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise GeometryError(f"L must be a positive integer, got {self.L!r}")
        if self.bands not in (1, 2):
            raise GeometryError(f"bands must be 1 or 2, got {self.bands!r}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @classmethod
    def for_model(cls, model: ModelSpec, L: int, boundary="OBC") -> "LatticeGeometry":
        return cls(L=int(L), boundary=Boundary(boundary), bands=model.bands)

    @property
    def dim(self) -> int:
        return self.L * self.bands


def site_index(geom: LatticeGeometry, x: int, sublattice: str = "A") -> int:
    """Zero-based state index of cell ``x`` (1-based) and the given sublattice."""
    if not 1 <= x <= geom.L:
        raise GeometryError(f"cell {x} outside [1, {geom.L}]")
    s = SUBLATTICES.index(sublattice) if geom.bands == 2 else 0
    if geom.bands == 1 and sublattice not in ("A", None):
        raise GeometryError("single-band chain has only sublattice A")
    return (x - 1) * geom.bands + s


def hopping_blocks(model: ModelSpec) -> dict[int, np.ndarray]:
    """Return ``{-1: h_minus, 0: h_0, +1: h_plus}`` as complex ``bands x bands`` arrays."""
    if isinstance(model, ModelI):
        t1, t2, g = model.t1, model.t2, model.gamma
        # hopping pattern: A-A hops i t2/2 from x-1 and -i t2/2 from x+1, A-B hops t2/2.
        hm = np.array([[0.5j * t2, 0.5 * t2], [0.5 * t2, -0.5j * t2]])
        hp = np.array([[-0.5j * t2, 0.5 * t2], [0.5 * t2, 0.5j * t2]])
        h0 = np.array([[0.0, t1], [t1, -1j * g]])
    elif isinstance(model, ModelII):
        t1, t2, t3, a, g = model.t1, model.t2, model.t3, model.alpha, model.gamma
        ph = 0.5 * t3 * np.exp(-1j * a)
        hp = np.array([[ph, 0.5 * t2], [0.5 * t2, -ph]])
        hm = np.array([[np.conj(ph), 0.5 * t2], [0.5 * t2, -np.conj(ph)]])
        h0 = np.array([[0.0, t1], [t1, -1j * g]])
    elif isinstance(model, ModelIII):
        t, g, gp = model.t, model.gamma, model.gamma_prime
        hp = np.array([[t + 0.5 * g + 0.5j * gp]])
        hm = np.array([[t - 0.5 * g + 0.5j * gp]])
        h0 = np.array([[-1j * (g + gp)]])
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return {-1: hm.astype(complex), 0: h0.astype(complex), 1: hp.astype(complex)}


def hopping_blocks_mp(model: ModelSpec) -> dict[int, list[list]]:
    """Hopping blocks as nested lists of ``mpmath.mpc`` at the current precision."""
    j = mpmath.mpc(0, 1)
    if isinstance(model, ModelI):
        t1, t2, g = (mpmath.mpf(v) for v in (model.t1, model.t2, model.gamma))
        hm = [[j * t2 / 2, t2 / 2], [t2 / 2, -j * t2 / 2]]
        hp = [[-j * t2 / 2, t2 / 2], [t2 / 2, j * t2 / 2]]
        h0 = [[0, t1], [t1, -j * g]]
    elif isinstance(model, ModelII):
        t1, t2, t3, a, g = (mpmath.mpf(v) for v in (model.t1, model.t2, model.t3, model.alpha, model.gamma))
        ph = t3 * mpmath.exp(-j * a) / 2
        hp = [[ph, t2 / 2], [t2 / 2, -ph]]
        hm = [[mpmath.conj(ph), t2 / 2], [t2 / 2, -mpmath.conj(ph)]]
        h0 = [[0, t1], [t1, -j * g]]
    elif isinstance(model, ModelIII):
        t, g, gp = (mpmath.mpf(v) for v in (model.t, model.gamma, model.gamma_prime))
        hp = [[t + g / 2 + j * gp / 2]]
        hm = [[t - g / 2 + j * gp / 2]]
        h0 = [[-j * (g + gp)]]
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    conv = lambda m: [[mpmath.mpc(v) for v in row] for row in m]
    return {-1: conv(hm), 0: conv(h0), 1: conv(hp)}


def bloch_hamiltonian(model: ModelSpec, k: float) -> np.ndarray:
    """Bloch Hamiltonian ``H(k)`` as a dense ``bands x bands`` array."""
    if not math.isfinite(k):
        raise DomainError("k must be finite")
    h = hopping_blocks(model)
    return h[0] + h[1] * np.exp(1j * k) + h[-1] * np.exp(-1j * k)


def beta_hamiltonian(model: ModelSpec, beta: complex) -> np.ndarray:
    """Analytic continuation ``H(beta)``, i.e. ``H(k)`` with ``e^{ik} -> beta``."""
    beta = complex(beta)
    if beta == 0:
        raise DomainError("H(beta) is singular at beta = 0")
    h = hopping_blocks(model)
    return h[0] + h[1] * beta + h[-1] / beta


def realspace_hamiltonian(model: ModelSpec, geom: LatticeGeometry) -> sp.csr_matrix:
    """Sparse real-space Hamiltonian on ``geom``; call ``.toarray()`` for dense use."""
    if geom.bands != model.bands:
        raise GeometryError(
            f"geometry has {geom.bands} sublattices but model needs {model.bands}"
        )
    b, L = geom.bands, geom.L
    h = hopping_blocks(model)
    blocks = sp.kron(sp.eye(L, format="csr"), sp.csr_matrix(h[0]))
    for j in (-1, 1):
        # shift[x, x+j] = 1
        shift = sp.eye(L, k=j, format="csr")
        if geom.boundary is Boundary.PBC and L > 1:
            wrap = sp.eye(L, k=-j * (L - 1), format="csr")
            shift = shift + wrap
        blocks = blocks + sp.kron(shift, sp.csr_matrix(h[j]))
    H = sp.csr_matrix(blocks, dtype=complex)
    H.sum_duplicates()
    H.eliminate_zeros()
    assert H.shape == (b * L, b * L)
    return H


_MODEL_KEYS = {
    "I": (ModelI, ("t1", "t2", "gamma")),
    "II": (ModelII, ("t1", "t2", "t3", "alpha", "gamma")),
    "III": (ModelIII, ("t", "gamma", "gamma_prime")),
}


def model_from_dict(data: dict) -> ModelSpec:
    """Build a model from a config block such as ``{"model": "I", "t1": 0.4, ...}``."""
    data = dict(data)
    try:
        tag = str(data.pop("model"))
    except KeyError:
        raise DomainError("model block needs a 'model' key") from None
    if tag not in _MODEL_KEYS:
        raise DomainError(f"model must be one of I, II, III; got {tag!r}")
    cls, keys = _MODEL_KEYS[tag]
    missing = [k for k in keys if k not in data]
    extra = sorted(set(data) - set(keys))
    if missing or extra:
        raise DomainError(f"model {tag}: missing {missing}, unexpected {extra}")
    return cls(**{k: float(data[k]) for k in keys})


def model_to_dict(model: ModelSpec) -> dict:
    tag = {ModelI: "I", ModelII: "II", ModelIII: "III"}[type(model)]
    return {"model": tag, **asdict(model)}
