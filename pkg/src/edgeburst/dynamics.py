"""Time evolution and spatially resolved loss probabilities.

The walker obeys ``i dpsi/dt = H psi``. Loss probabilities are integrals of
quadratic forms in ``psi``: ``2 gamma |psi_x^B|^2`` on sites for the two-band
models, and a two-site (link) form for the single-band model. They are
integrated alongside ``psi`` in one augmented ODE, so the quadrature shares
the adaptive Runge-Kutta steps and error control of the wavefunction.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853
from scipy.stats import linregress

from .errors import DomainError, FitError, GeometryError, SlowDecayError
from .models import (
    Boundary,
    LatticeGeometry,
    ModelI,
    ModelII,
    ModelIII,
    ModelSpec,
    realspace_hamiltonian,
    site_index,
)

__all__ = [
    "EvolveConfig",
    "LatticeState",
    "LossProfile",
    "LossDensity",
    "DecayFit",
    "loss_density",
    "evolve",
    "loss_profile",
    "loss_profiles",
    "loss_profile_mixture",
    "relative_height",
    "edge_side",
    "edge_wavefunction_decay",
    "CsvTrajectoryWriter",
]


@dataclass(frozen=True)
class EvolveConfig:
    """Integrator settings.

    Parameters
    ----------
    dt : float
        Initial step size hint; the integrator adapts from there.
    norm_floor : float
        Stop once the squared norm (of every trajectory) falls below this.
    t_max : float
        Hard cap on the integration time.
    integrator_tolerance : float
        Relative local error tolerance per step. The absolute tolerance is
        ``1e-3`` times this value.
    """

    dt: float = 0.1
    norm_floor: float = 1e-8
    t_max: float = 1e5
    integrator_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if not 0 < self.norm_floor < 1:
            raise DomainError(f"norm_floor must lie in (0, 1), got {self.norm_floor}")
        if not self.t_max > 0:
            raise DomainError(f"t_max must be > 0, got {self.t_max}")
        if not 0 < self.integrator_tolerance < 1:
            raise DomainError("integrator_tolerance must lie in (0, 1)")

    @property
    def atol(self) -> float:
        return 1e-3 * self.integrator_tolerance


@dataclass
class LatticeState:
    """Wavefunction amplitudes (cell-major ordering) at one time."""

    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.ndim != 1:
            raise DomainError("amplitudes must be a 1-d vector")

    @classmethod
    def localized(cls, geom: LatticeGeometry, x: int, sublattice: str = "A") -> "LatticeState":
        psi = np.zeros(geom.dim, dtype=complex)
        psi[site_index(geom, x, sublattice)] = 1.0
        return cls(psi, 0.0)

    @property
    def norm2(self) -> float:
        a = self.amplitudes
        return float(np.dot(a.real, a.real) + np.dot(a.imag, a.imag))


@dataclass(frozen=True)
class LossProfile:
    """Accumulated loss probabilities.

    Attributes
    ----------
    values : ndarray
        ``P_x``. Indexed by cell for the two-band models, by link
        ``(x, x+1)`` for the single-band model.
    x0 : int or str
        Starting cell, or ``"mixture"`` for a distribution of starts.
    total : float
        ``sum(values)``.
    truncation_error : float
        Squared norm left when integration stopped; the sum rule reads
        ``total + truncation_error = 1``.
    t_end : float
        Time at which integration stopped.
    link_resolved : bool
        True when ``values[i]`` lives on the link between cells ``i+1`` and ``i+2``.
    """

    values: np.ndarray
    x0: Union[int, str]
    total: float
    truncation_error: float
    t_end: float = float("nan")
    link_resolved: bool = False

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class LossDensity:
    """Loss rate per site or link as a two-site Hermitian quadratic form.

    ``rate_l = wi_l |psi_i|^2 + wj_l |psi_j|^2 + 2 Re(c_l conj(psi_i) psi_j)``
    with ``i = idx_i[l]``, ``j = idx_j[l]``. The rates sum to
    ``-d(norm^2)/dt``.
    """

    idx_i: np.ndarray
    idx_j: np.ndarray
    wi: np.ndarray
    wj: np.ndarray
    c: np.ndarray
    link_resolved: bool

    @property
    def size(self) -> int:
        return len(self.idx_i)

    def rates(self, psi: np.ndarray) -> np.ndarray:
        """Loss rates for ``psi`` of shape ``(dim,)`` or ``(dim, M)``."""
        a = psi[self.idx_i]
        b = psi[self.idx_j]
        shape = (-1,) + (1,) * (psi.ndim - 1)
        out = self.wi.reshape(shape) * (a.real**2 + a.imag**2)
        if self.link_resolved:
            out = out + self.wj.reshape(shape) * (b.real**2 + b.imag**2)
            out = out + 2.0 * (self.c.reshape(shape) * (a.conj() * b)).real
        return out


def loss_density(model: ModelSpec, geom: LatticeGeometry) -> LossDensity:
    """Build the loss-rate quadratic forms for ``model`` on ``geom``."""
    L = geom.L
    if isinstance(model, (ModelI, ModelII)):
        b = np.arange(L) * 2 + 1
        w = np.full(L, 2.0 * model.gamma)
        z = np.zeros(L)
        return LossDensity(b, b, w, z, z.astype(complex), link_resolved=False)
    if isinstance(model, ModelIII):
        g, gp = model.gamma, model.gamma_prime
        if geom.boundary is Boundary.OBC:
            i = np.arange(L - 1)
            j = i + 1
            wi = np.full(L - 1, g + gp)
            wj = np.full(L - 1, g + gp)
            # end sites belong to a single link, so that link takes their full weight
            wi[0] *= 2
            wj[-1] *= 2
        else:
            i = np.arange(L)
            j = (i + 1) % L
            wi = np.full(L, g + gp)
            wj = np.full(L, g + gp)
        c = np.full(len(i), -gp + 1j * g)
        return LossDensity(i, j, wi, wj, c, link_resolved=True)
    raise TypeError(f"unknown model type {type(model).__name__}")


Observer = Callable[[float, np.ndarray], None]


def _check_lossy(model: ModelSpec):
    if not model.is_lossy:
        raise DomainError("loss profiles need a positive loss rate")


def _run(H, psi0: np.ndarray, cfg: EvolveConfig, density: Optional[LossDensity],
         observer: Optional[Observer], t_stop: Optional[float] = None):
    """Integrate a batch of trajectories.

    Returns ``(t, psi, P, norm2, reached_floor)`` where ``psi`` has shape
    ``(dim, M)`` and ``P`` shape ``(nloss, M)`` (or None).
    """
    H = sp.csr_matrix(H)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim == 1:
        psi0 = psi0[:, None]
    dim, M = psi0.shape
    if H.shape != (dim, dim):
        raise GeometryError(f"state dimension {dim} does not match H {H.shape}")
    nl = density.size if density is not None else 0
    npsi = dim * M

    def rhs(t, y):
        psi = y[:npsi].reshape(dim, M)
        out = np.empty_like(y)
        out[:npsi] = (-1j * (H @ psi)).ravel()
        if nl:
            out[npsi:] = density.rates(psi).ravel()
        return out

    y0 = np.zeros(npsi + nl * M, dtype=complex)
    y0[:npsi] = psi0.ravel()
    t_bound = cfg.t_max if t_stop is None else t_stop
    solver = DOP853(rhs, 0.0, y0, t_bound, rtol=cfg.integrator_tolerance, atol=cfg.atol,
                    first_step=min(cfg.dt, t_bound))

    def norms(y):
        psi = y[:npsi].reshape(dim, M)
        return (psi.real**2 + psi.imag**2).sum(axis=0)

    n2 = norms(y0)
    floor_hit = t_stop is None and bool(np.all(n2 < cfg.norm_floor))
    while solver.status == "running" and not floor_hit:
        msg = solver.step()
        if solver.status == "failed":
            raise SlowDecayError(float(n2.max()), solver.t) from RuntimeError(msg)
        psi = solver.y[:npsi].reshape(dim, M)
        if observer is not None:
            observer(solver.t, psi)
        n2 = norms(solver.y)
        if t_stop is None and np.all(n2 < cfg.norm_floor):
            floor_hit = True
    y = solver.y
    psi = y[:npsi].reshape(dim, M).copy()
    P = y[npsi:].reshape(nl, M).real.copy() if nl else None
    return solver.t, psi, P, n2, floor_hit


def evolve(H, psi0: LatticeState, cfg: EvolveConfig = EvolveConfig(),
           observer: Optional[Callable[[float, np.ndarray], None]] = None) -> LatticeState:
    """Integrate ``i dpsi/dt = H psi`` until the norm floor or ``t_max``.

    Parameters
    ----------
    H : sparse or dense matrix
        Real-space Hamiltonian.
    psi0 : LatticeState
        Initial state; its norm is not altered.
    cfg : EvolveConfig
    observer : callable, optional
        ``observer(t, psi)`` after every accepted step, with increasing ``t``.

    Returns
    -------
    LatticeState

    Raises
    ------
    SlowDecayError
        If ``t_max`` is reached with the squared norm still above the floor.
    """
    obs = None
    if observer is not None:
        def obs(t, psi):
            observer(t, psi[:, 0])
    t, psi, _, n2, hit = _run(H, psi0.amplitudes, cfg, None, obs)
    state = LatticeState(psi[:, 0], psi0.time + t)
    if not hit:
        raise SlowDecayError(float(n2[0]), t, state=state)
    return state


def _start_vector(model: ModelSpec, geom: LatticeGeometry, start) -> tuple[int, np.ndarray]:
    if isinstance(start, tuple):
        x0, s = start
    else:
        x0, s = int(start), "A"
    psi = np.zeros(geom.dim, dtype=complex)
    psi[site_index(geom, int(x0), s)] = 1.0
    return int(x0), psi


def loss_profiles(model: ModelSpec, geom: LatticeGeometry, starts: Sequence,
                  cfg: EvolveConfig = EvolveConfig(), allow_truncation: bool = False,
                  observer: Optional[Observer] = None) -> list[LossProfile]:
    """Loss profiles for several starting cells, integrated as one batch.

    All trajectories share the step sequence, so this is cheaper than
    separate runs when the profiles are needed together.
    """
    _check_lossy(model)
    if geom.L < 3:
        raise GeometryError("dynamics needs L >= 3")
    if len(starts) == 0:
        raise DomainError("no starting cells given")
    x0s, cols = zip(*(_start_vector(model, geom, s) for s in starts))
    H = realspace_hamiltonian(model, geom)
    dens = loss_density(model, geom)
    t, psi, P, n2, hit = _run(H, np.stack(cols, axis=1), cfg, dens, observer)
    profiles = []
    for j, x0 in enumerate(x0s):
        v = P[:, j]
        profiles.append(LossProfile(v, x0, float(v.sum()), float(n2[j]), t, dens.link_resolved))
    if not hit and not allow_truncation:
        raise SlowDecayError(float(n2.max()), t, profile=profiles if len(profiles) > 1 else profiles[0])
    return profiles


def loss_profile(model: ModelSpec, geom: LatticeGeometry, start, cfg: EvolveConfig = EvolveConfig(),
                 allow_truncation: bool = False) -> LossProfile:
    """Loss probabilities for a walker starting at ``start``.

    Parameters
    ----------
    model, geom
        Model and lattice.
    start : int or (int, str)
        Starting cell (sublattice A by default).
    cfg : EvolveConfig
    allow_truncation : bool
        Return the partial profile instead of raising when ``t_max`` is hit.
        ``truncation_error`` then records the unresolved norm.

    Examples
    --------
    >>> m = ModelI(t1=0.4, t2=0.5, gamma=0.8)
    >>> prof = loss_profile(m, LatticeGeometry.for_model(m, 20), 10)
    >>> abs(prof.total + prof.truncation_error - 1) < 1e-9
    True
    """
    return loss_profiles(model, geom, [start], cfg, allow_truncation)[0]


def loss_profile_mixture(model: ModelSpec, geom: LatticeGeometry, p_s,
                         cfg: EvolveConfig = EvolveConfig(), allow_truncation: bool = False) -> LossProfile:
    """Loss profile for a random starting cell drawn from ``p_s``.

    ``p_s[s-1]`` is the probability of starting on cell ``s`` (sublattice A).
    """
    p = np.asarray(p_s, dtype=float)
    if p.shape != (geom.L,):
        raise DomainError(f"p_s must have length L={geom.L}")
    if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
        raise DomainError("p_s must be non-negative and sum to 1")
    cells = [int(s) + 1 for s in np.flatnonzero(p)]
    try:
        profs = loss_profiles(model, geom, cells, cfg, allow_truncation)
    except SlowDecayError as err:
        err.profile = _mix(err.profile if isinstance(err.profile, list) else [err.profile], p, cells)
        raise
    return _mix(profs, p, cells)


def _mix(profs, p, cells):
    w = np.array([p[c - 1] for c in cells])
    values = sum(wi * pr.values for wi, pr in zip(w, profs))
    trunc = float(sum(wi * pr.truncation_error for wi, pr in zip(w, profs)))
    return LossProfile(values, "mixture", float(values.sum()), trunc, profs[0].t_end,
                       profs[0].link_resolved)


def edge_side(model: ModelSpec) -> str:
    """Edge where skin modes pile up: ``"left"``, ``"right"`` or ``"both"``.

    Ties (no skin effect) default to ``"left"``.
    """
    if isinstance(model, ModelII):
        return "both"
    if isinstance(model, ModelI):
        return "right" if model.t1 < 0 else "left"
    if isinstance(model, ModelIII):
        # leftward amplitude (psi_{x+1} -> x) versus rightward
        left = abs(complex(model.t + model.gamma / 2, model.gamma_prime / 2))
        right = abs(complex(model.t - model.gamma / 2, model.gamma_prime / 2))
        return "right" if right > left else "left"
    raise TypeError(f"unknown model type {type(model).__name__}")


def relative_height(profile, x0: int, edge: str = "left") -> float:
    """``P_edge / min(P)`` over the window from the edge to ``x0`` inclusive.

    Parameters
    ----------
    profile : LossProfile or array_like
    x0 : int
        Starting cell (1-based).
    edge : {"left", "right"}

    Examples
    --------
    >>> relative_height([10, 1, 1, 1, 2], 5)
    10.0
    """
    v = np.asarray(profile.values if isinstance(profile, LossProfile) else profile, dtype=float)
    n = len(v)
    if not 1 <= x0 <= n + 1:
        raise DomainError(f"x0={x0} outside the profile (length {n})")
    if edge == "left":
        window = v[: min(x0, n)]
        top = v[0]
    elif edge == "right":
        window = v[x0 - 1:]
        top = v[-1]
    else:
        raise DomainError(f"edge must be 'left' or 'right', got {edge!r}")
    if window.size == 0:
        raise DomainError("empty window")
    low = window.min()
    if low <= 0:
        return math.inf
    return float(top / low)


@dataclass(frozen=True)
class DecayFit:
    """Late-time log-slope of the edge amplitude.

    ``times`` and ``log_amplitude`` hold the full sampled series (log of
    ``|psi_edge(t)|`` with the renormalizations undone).
    """

    slope: float
    stderr: float
    times: np.ndarray = field(repr=False)
    log_amplitude: np.ndarray = field(repr=False)
    window: tuple[float, float] = (0.0, 0.0)


def edge_wavefunction_decay(model: ModelSpec, geom: LatticeGeometry, x0: int,
                            cfg: EvolveConfig = EvolveConfig(), t_end: float = 2000.0,
                            edge: Optional[str] = None, segment: float = 50.0,
                            samples: int = 4000) -> DecayFit:
    """Fit ``log|psi_edge(t)|`` over the last decade ``[t_end/10, t_end]``.

    The state is renormalized between segments of length ``segment`` so
    arbitrarily long runs stay representable; ``cfg.norm_floor`` is ignored.
    The edge site is the B site of cell 1 (or L) for the two-band models.

    Raises
    ------
    GeometryError
        For a periodic chain.
    FitError
        If the edge amplitude vanishes identically over the fit window.
    """
    if geom.boundary is not Boundary.OBC:
        raise GeometryError("edge decay needs an open chain")
    side = edge or edge_side(model)
    if side == "both":
        side = "left"
    cell = 1 if side == "left" else geom.L
    sub = "B" if geom.bands == 2 else "A"
    e_idx = site_index(geom, cell, sub)
    H = realspace_hamiltonian(model, geom)
    _, psi = _start_vector(model, geom, x0)

    grid = np.linspace(0.0, t_end, samples + 1)
    logs = np.full(grid.size, -np.inf)
    logs[0] = math.log(abs(psi[e_idx])) if psi[e_idx] != 0 else -np.inf
    log_scale = 0.0
    t0 = 0.0
    while t0 < t_end - 1e-12:
        t1 = min(t0 + segment, t_end)
        mask = (grid > t0) & (grid <= t1)
        psi_end, vals = _segment(H, psi, t1 - t0, cfg, grid[mask] - t0, e_idx)
        with np.errstate(divide="ignore"):
            logs[mask] = np.log(np.abs(vals)) + log_scale
        n = math.sqrt(np.vdot(psi_end, psi_end).real)
        if n == 0:
            break
        psi = psi_end / n
        log_scale += math.log(n)
        t0 = t1

    sel = (grid >= t_end / 10) & np.isfinite(logs)
    if sel.sum() < 5:
        raise FitError("edge amplitude vanishes over the fit window")
    fit = linregress(grid[sel], logs[sel])
    return DecayFit(float(fit.slope), float(fit.stderr), grid, logs, (t_end / 10, t_end))


def _segment(H, psi, duration, cfg, targets, e_idx):
    """Evolve ``psi`` for ``duration``; return the final state and ``psi[e_idx]`` at ``targets``."""
    H = sp.csr_matrix(H)
    solver = DOP853(lambda t, y: -1j * (H @ y), 0.0, psi.astype(complex), duration,
                    rtol=cfg.integrator_tolerance, atol=cfg.atol,
                    first_step=min(cfg.dt, duration))
    vals = np.empty(len(targets), dtype=complex)
    k = 0
    while solver.status == "running":
        t_prev = solver.t
        solver.step()
        if solver.status == "failed":
            raise SlowDecayError(float(np.vdot(solver.y, solver.y).real), t_prev)
        dense = None
        while k < len(targets) and targets[k] <= solver.t + 1e-12:
            if dense is None:
                dense = solver.dense_output()
            vals[k] = (dense(targets[k]) if targets[k] < solver.t else solver.y)[e_idx]
            k += 1
    return solver.y.copy(), vals


class CsvTrajectoryWriter:
    """Observer that streams snapshots to CSV with columns ``t, x, s, re, im``.

    Only every ``every``-th accepted step is written. Use as a context
    manager, or call :meth:`close`.
    """

    def __init__(self, path: Union[str, os.PathLike], geom: LatticeGeometry, every: int = 1):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(["t", "x", "s", "re", "im"])
        self._every = max(1, int(every))
        self._count = 0
        cells = np.repeat(np.arange(1, geom.L + 1), geom.bands)
        subs = np.tile(np.array(["A", "B"][: geom.bands]), geom.L)
        self._labels = list(zip(cells.tolist(), subs.tolist()))

    def __call__(self, t: float, psi: np.ndarray):
        self._count += 1
        if (self._count - 1) % self._every:
            return
        for (x, s), a in zip(self._labels, np.asarray(psi).ravel()):
            self._w.writerow([f"{t:.17g}", x, s, f"{a.real:.17g}", f"{a.imag:.17g}"])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
