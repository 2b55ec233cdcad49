"""Exponent extraction and regime classification.

Power laws ``P ~ d^{-alpha}`` are fitted by least squares on log-log data,
exponential laws ``P ~ lambda^d`` on semi-log data. Fits silently drop
points buried in the integration truncation error.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import linregress, spearmanr

from .dynamics import EvolveConfig, LossProfile, edge_side, loss_profiles, relative_height
from .errors import FitError, GeometryError
from .models import LatticeGeometry, ModelSpec
from .spectral import imaginary_gap, spectral_area

__all__ = [
    "FitResult",
    "RegimeReport",
    "ScalingResult",
    "fit_power",
    "fit_exponential",
    "bulk_window",
    "bulk_exponent",
    "edge_exponent",
    "scaling_run",
    "relative_height_sweep",
    "HeightSweep",
    "classify_regime",
    "default_edge_sweep",
]

GAP_TOL = 1e-6
AREA_TOL = 1e-6


@dataclass(frozen=True)
class FitResult:
    """Outcome of a power or exponential fit.

    ``exponent_or_base`` is ``alpha`` for ``kind="power"`` (``y ~ x^-alpha``)
    and ``lambda`` for ``kind="exponential"`` (``y ~ lambda^x``); ``stderr``
    refers to that quantity. ``window`` is the inclusive ``x`` range.
    """

    kind: str
    exponent_or_base: float
    stderr: float
    r_squared: float
    window: tuple
    points_used: int
    intercept: float = 0.0
    flags: tuple = ()

    def to_dict(self) -> dict:
        return asdict(self)


def _select(xs, ys, window, min_points=5):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise FitError("xs and ys differ in shape")
    if window is None:
        window = (xs.min(), xs.max())
    lo, hi = window
    sel = (xs >= lo) & (xs <= hi)
    x, y = xs[sel], ys[sel]
    if x.size < min_points:
        raise FitError(f"only {x.size} points in window {window}; need >= {min_points}")
    if np.any(y <= 0):
        raise FitError("non-positive data in the fit window")
    return x, y, (float(lo), float(hi))


def fit_power(xs, ys, window=None, flags: tuple = ()) -> FitResult:
    """Fit ``y = c x^{-alpha}`` by OLS of ``log y`` on ``log x``.

    Examples
    --------
    >>> x = np.arange(2, 51)
    >>> round(fit_power(x, x ** -2.0).exponent_or_base, 6)
    2.0
    """
    x, y, win = _select(xs, ys, window)
    if np.any(x <= 0):
        raise FitError("non-positive abscissae in a power fit")
    r = linregress(np.log(x), np.log(y))
    return FitResult("power", float(-r.slope), float(r.stderr), float(r.rvalue**2), win, int(x.size),
                     float(r.intercept), tuple(flags))


def fit_exponential(xs, ys, window=None, flags: tuple = ()) -> FitResult:
    """Fit ``y = c lambda^x`` by OLS of ``log y`` on ``x``; ``stderr`` is that of ``lambda``.

    Examples
    --------
    >>> x = np.arange(1, 20)
    >>> round(fit_exponential(x, 0.5 ** x).exponent_or_base, 6)
    0.5
    """
    x, y, win = _select(xs, ys, window)
    r = linregress(x, np.log(y))
    base = math.exp(r.slope)
    return FitResult("exponential", base, float(base * r.stderr), float(r.rvalue**2), win, int(x.size),
                     float(r.intercept), tuple(flags))


@dataclass(frozen=True)
class RegimeReport:
    """Dynamical regime from the Bloch spectrum.

    ``relation_residual`` is ``alpha_b - alpha_e - 1`` with a skin effect and
    ``alpha_b - alpha_e`` without; None until exponents are supplied.
    """

    imaginary_gap_closed: bool
    nhse_present: bool
    burst_expected: bool
    imaginary_gap: float
    spectral_area: float
    relation_residual: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def classify_regime(model: ModelSpec, alpha_b: Optional[float] = None, alpha_e: Optional[float] = None,
                    gap_tol: float = GAP_TOL, area_tol: float = AREA_TOL) -> RegimeReport:
    """Classify gap closing, skin effect and the expected burst."""
    gap = imaginary_gap(model)
    area = spectral_area(model).total
    closed = abs(gap) < gap_tol
    nhse = area > area_tol
    resid = None
    if alpha_b is not None and alpha_e is not None:
        resid = float(alpha_b - alpha_e - (1.0 if nhse else 0.0))
    return RegimeReport(closed, nhse, closed and nhse, float(gap), float(area), resid)


def bulk_window(x0: int) -> tuple[int, int]:
    """Default bulk fit window in ``|x - x0|``: ``[10, min(100, 0.6 x0)]``."""
    return 10, int(min(100, math.floor(0.6 * x0)))


def _bulk_side(model, side):
    if side is not None:
        return side
    s = edge_side(model)
    return "left" if s in ("left", "both") else "right"


def _bulk_data(profile: LossProfile, x0: int, side: str):
    v = profile.values
    if side == "left":
        d = np.arange(1, x0)  # distance x0 - x for x = x0-1 ... 1
        p = v[x0 - 1 - d]
    else:
        d = np.arange(1, len(v) - x0 + 1)
        p = v[x0 - 1 + d]
    return d, p


def _fit_bulk(profile: LossProfile, x0: int, gap_closed: bool, side: str, window=None,
              geom_L: Optional[int] = None):
    window = bulk_window(x0) if window is None else tuple(window)
    room = (x0 - 1) if side == "left" else ((geom_L or len(profile.values)) - x0)
    if room < 1.5 * window[1]:
        raise GeometryError(
            f"bulk window up to {window[1]} needs {1.5 * window[1]:g} cells on the {side} of x0; have {room}"
        )
    d, p = _bulk_data(profile, x0, side)
    L = len(profile.values)
    keep = p >= 10 * profile.truncation_error / L
    flags = () if keep.all() else ("truncation_excluded",)
    d, p = d[keep], p[keep]
    if gap_closed:
        return fit_power(d, p, window, flags)
    return fit_exponential(d, p, window, flags + ("gapped_exponential",))


def bulk_exponent(model: ModelSpec, L: int = 200, x0: int = 150, cfg: EvolveConfig = EvolveConfig(),
                  window=None, side: Optional[str] = None, profile: Optional[LossProfile] = None) -> FitResult:
    """Bulk decay exponent ``alpha_b`` (or base ``lambda_b`` when gapped).

    Fits ``P_x`` against ``|x - x0|`` on the side facing the skin edge. The
    chain must leave ``1.5 x`` the window maximum between ``x0`` and that
    edge. Runs that hit ``t_max`` are kept, with points below ten times the
    per-site truncation error excluded.
    """
    side = _bulk_side(model, side)
    closed = abs(imaginary_gap(model)) < GAP_TOL
    if profile is None:
        geom = LatticeGeometry.for_model(model, L, "OBC")
        profile = loss_profiles(model, geom, [x0], cfg, allow_truncation=True)[0]
    return _fit_bulk(profile, x0, closed, side, window, L)


def default_edge_sweep(L: int) -> list[int]:
    """Ten starting cells evenly spaced over ``[10, L/2]``."""
    return sorted({int(round(v)) for v in np.linspace(10, L / 2, 10)})


def _edge_values(profiles, x0s, L, side):
    if side == "left":
        dist = np.array(x0s, dtype=float)
        pe = np.array([p.values[0] for p in profiles])
    else:
        dist = np.array([L + 1 - x for x in x0s], dtype=float)
        pe = np.array([p.values[-1] for p in profiles])
    return dist, pe


def edge_exponent(model: ModelSpec, L: int = 200, x0_sweep: Optional[Sequence[int]] = None,
                  cfg: EvolveConfig = EvolveConfig(), side: Optional[str] = None,
                  profiles: Optional[Sequence[LossProfile]] = None) -> FitResult:
    """Edge exponent ``alpha_e`` from ``P_edge`` versus starting distance ``x0``.

    A power law in the gap-closed regime, otherwise an exponential whose base
    is ``lambda_e``.
    """
    side = _bulk_side(model, side)
    x0s = list(default_edge_sweep(L) if x0_sweep is None else x0_sweep)
    if len(x0s) < 8:
        raise FitError("edge sweep needs at least 8 starting cells")
    if max(x0s) > L - 10 or min(x0s) < 1:
        raise GeometryError("edge sweep must stay within [1, L - 10]")
    if profiles is None:
        geom = LatticeGeometry.for_model(model, L, "OBC")
        profiles = loss_profiles(model, geom, x0s, cfg, allow_truncation=True)
    dist, pe = _edge_values(profiles, x0s, L, side)
    closed = abs(imaginary_gap(model)) < GAP_TOL
    if closed:
        return fit_power(dist, pe)
    return fit_exponential(dist, pe, flags=("gapped_exponential",))


@dataclass(frozen=True)
class ScalingResult:
    """Bulk and edge fits from one batched run, with the regime report."""

    bulk: FitResult
    edge: FitResult
    regime: RegimeReport
    difference: float
    relative_height: float
    truncation_error: float
    t_end: float
    edge_x0: list = field(default_factory=list)
    edge_values: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def scaling_run(model: ModelSpec, L: int = 200, x0: int = 150, x0_sweep: Optional[Sequence[int]] = None,
                cfg: EvolveConfig = EvolveConfig(), window=None) -> ScalingResult:
    """Fit bulk and edge laws from a single batch of trajectories.

    ``difference`` is ``alpha_b - alpha_e`` for power laws and
    ``lambda_b - lambda_e`` for exponential ones.
    """
    side = _bulk_side(model, None)
    sweep = list(default_edge_sweep(L) if x0_sweep is None else x0_sweep)
    starts = sorted(set(sweep) | {x0})
    geom = LatticeGeometry.for_model(model, L, "OBC")
    profs = dict(zip(starts, loss_profiles(model, geom, starts, cfg, allow_truncation=True)))
    closed = abs(imaginary_gap(model)) < GAP_TOL
    bulk = _fit_bulk(profs[x0], x0, closed, side, window, L)
    edge = edge_exponent(model, L, sweep, cfg, side, [profs[s] for s in sweep])
    alpha_b = bulk.exponent_or_base if bulk.kind == "power" else None
    alpha_e = edge.exponent_or_base if edge.kind == "power" else None
    regime = classify_regime(model, alpha_b, alpha_e)
    diff = bulk.exponent_or_base - edge.exponent_or_base
    _, pe = _edge_values([profs[s] for s in sweep], sweep, L, side)
    trunc = max(p.truncation_error for p in profs.values())
    return ScalingResult(bulk, edge, regime, float(diff), relative_height(profs[x0], x0, side), trunc,
                         profs[x0].t_end, sweep, pe.tolist())


@dataclass(frozen=True)
class HeightSweep:
    """Relative heights over starting cells with a power-law growth fit.

    ``growth`` is ``g`` in ``height ~ x0^g``; ``fit`` is the underlying
    log-log fit (its exponent is ``-g``).
    """

    x0: np.ndarray
    heights: np.ndarray
    growth: float
    fit: FitResult
    spearman: float


def relative_height_sweep(model: ModelSpec, L: int, x0_sweep: Sequence[int], cfg: EvolveConfig = EvolveConfig(),
                          edge: Optional[str] = None) -> HeightSweep:
    """Relative heights ``P_edge / P_min`` for each starting cell in ``x0_sweep``."""
    side = _bulk_side(model, edge)
    geom = LatticeGeometry.for_model(model, L, "OBC")
    x0s = np.array(list(x0_sweep))
    profs = loss_profiles(model, geom, x0s.tolist(), cfg, allow_truncation=True)
    h = np.array([relative_height(p, int(x), side) for p, x in zip(profs, x0s)])
    fit = fit_power(x0s.astype(float), h)
    rho = float(spearmanr(x0s, h).statistic) if len(x0s) > 2 else float("nan")
    return HeightSweep(x0s, h, -fit.exponent_or_base, fit, rho)
