"""Frequency-domain Green's function, characteristic roots and the GBZ.

Notation. For ``z = omega + i eta`` the characteristic polynomial is

    Q(beta; z) = beta^p det[z - H(beta)],     p = number of bands,

a polynomial of degree <= 2p in ``beta``. For ``Im z > 0`` exactly ``p - s``
of its nonzero roots lie inside the unit circle, where ``s`` is the number
of structural zero roots. Sorted by descending modulus, ``beta_L`` is the
innermost root outside and ``beta_R`` the outermost root inside.

The infinite-chain Green's function between cells ``x0`` (column sublattice)
and ``x = x0 + n`` (row sublattice) is the contour integral

    G(n) = (1/2 pi i) \\oint dbeta beta^(n-1) [z - H(beta)]^{-1}_{row,col}
         = (1/2 pi i) \\oint dbeta beta^(n + u - s) A~(beta) / Q~(beta),

evaluated here exactly by residues. ``A~`` and ``Q~`` are the numerator and
``Q`` with their zero roots (``u`` and ``s`` of them) stripped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import quad
from scipy.stats import linregress

from .errors import CoalescentRootsError, DomainError, FitError
from .io import write_csv
from .models import (
    LatticeGeometry,
    ModelI,
    bloch_hamiltonian,
    ModelIII,
    ModelSpec,
    hopping_blocks,
    hopping_blocks_mp,
    realspace_hamiltonian,
)
from .spectral import GapClosingPoint, gap_closing_points

__all__ = [
    "BetaRoots",
    "ExpansionExponents",
    "Saddle",
    "GbzData",
    "char_poly",
    "char_roots",
    "residue_factors",
    "greens_element",
    "bulk_loss_infinite",
    "local_expansion",
    "gbz",
    "gbz_radius_analytic",
    "saddle_decay_rate",
    "winding_number",
    "inside_gbz",
    "classify_closing_points",
    "write_gbz_csv",
    "write_root_scan_csv",
]

COALESCENCE = 1e-6
ETA_LADDER = (1e-4, 1e-5, 1e-6)
EXPONENT_CANDIDATES = (Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3), Fraction(4))
M_CANDIDATES = (Fraction(0),) + EXPONENT_CANDIDATES


# ---------------------------------------------------------------- polynomials


def _entry(blocks, a, b, zero, one):
    """``(z - H(beta))_{ab}`` as a 3x2 array: [beta power + 1, z power]."""
    e = np.array([[zero, zero], [zero, zero], [zero, zero]], dtype=object)
    for j in (-1, 0, 1):
        e[j + 1, 0] = -blocks[j][a][b]
    if a == b:
        e[1, 1] = one
    return e


def _conv2(x, y, zero):
    out = np.full((x.shape[0] + y.shape[0] - 1, x.shape[1] + y.shape[1] - 1), zero, dtype=object)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            out[i:i + y.shape[0], j:j + y.shape[1]] += x[i, j] * y
    return out


def _poly2d(blocks, row, col, zero, one):
    """Return ``(Q, A)``: coefficient arrays ``[beta power, z power]``.

    ``Q = beta^p det(z - H)``; ``A = beta^(p-1) adj(z - H)_{row,col}`` so that
    ``[z - H]^{-1}_{row,col} = beta A / Q``.
    """
    p = len(blocks[0])
    if p == 1:
        Q = _entry(blocks, 0, 0, zero, one)
        A = np.array([[one]], dtype=object)
        return Q, A
    m = {(a, b): _entry(blocks, a, b, zero, one) for a in range(2) for b in range(2)}
    Q = _conv2(m[0, 0], m[1, 1], zero) - _conv2(m[0, 1], m[1, 0], zero)
    if row == col:
        A = m[1 - row, 1 - row].copy()
    else:
        A = -m[row, col]
    return Q, A


def _default_element(model: ModelSpec):
    # loss is read off the B site for the two-band models, walker starts on A
    return (1, 0) if model.bands == 2 else (0, 0)


@dataclass(frozen=True)
class CharPoly:
    """Two-variable characteristic data of a model (double precision).

    ``Q[i, j]`` multiplies ``beta^i z^j``; ``A`` likewise.
    """

    Q: np.ndarray
    A: np.ndarray
    bands: int

    def q_at(self, z: complex) -> np.ndarray:
        return self.Q @ (complex(z) ** np.arange(self.Q.shape[1]))

    def a_at(self, z: complex) -> np.ndarray:
        return self.A @ (complex(z) ** np.arange(self.A.shape[1]))


def char_poly(model: ModelSpec, element: Optional[tuple[int, int]] = None) -> CharPoly:
    """Coefficient arrays of ``Q(beta, z)`` and the Green's-function numerator."""
    row, col = element or _default_element(model)
    h = hopping_blocks(model)
    blocks = {j: h[j].tolist() for j in h}
    Q, A = _poly2d(blocks, row, col, 0j, 1 + 0j)
    return CharPoly(Q.astype(complex), A.astype(complex), model.bands)


def _trim(c, rel=1e-13):
    """Strip numerically zero low and high coefficients; return (coeffs, low, high)."""
    c = np.asarray(c)
    scale = np.max(np.abs(c)) if c.size else 0.0
    nz = np.flatnonzero(np.abs(c) > rel * scale)
    if nz.size == 0:
        raise DomainError("characteristic polynomial vanishes identically")
    lo, hi = int(nz[0]), int(nz[-1])
    return c[lo:hi + 1], lo, hi


def _sort_roots(r):
    r = np.asarray(r, dtype=complex)
    key = np.lexsort((np.angle(r), -np.round(np.abs(r), 12)))
    return r[key]


# ---------------------------------------------------------------- roots


@dataclass(frozen=True)
class BetaRoots:
    """Roots of ``Q(beta; omega + i eta)`` with the Green's-function data.

    Attributes
    ----------
    roots : ndarray
        Nonzero finite roots, descending modulus (ties by argument).
    n_inside : int
        How many of ``roots`` belong to the inside class (``p - s``).
    zero_roots, infinite_roots : int
        Structural roots at 0 and at infinity (degree reduction).
    reduced_degree : bool
        True when the leading coefficient vanished, i.e. ``infinite_roots > 0``
        beyond the structural count of the model family.
    f_L, f_R : complex or None
        Residue factors, filled by :func:`residue_factors`.
    extrapolated : bool
        True when ``f_L, f_R`` come from the ``eta -> 0+`` extrapolation.
    """

    omega: float
    eta: float
    roots: np.ndarray
    n_inside: int
    zero_roots: int
    infinite_roots: int
    reduced_degree: bool
    beta_L: Optional[complex]
    beta_R: Optional[complex]
    f_L: Optional[complex] = None
    f_R: Optional[complex] = None
    extrapolated: bool = False
    q: np.ndarray = field(default=None, repr=False)
    a: np.ndarray = field(default=None, repr=False)
    u: int = 0

    @property
    def n_outside(self) -> int:
        return len(self.roots) - self.n_inside

    @property
    def outside(self) -> np.ndarray:
        return self.roots[: self.n_outside]

    @property
    def inside(self) -> np.ndarray:
        return self.roots[self.n_outside:]

    @property
    def coalescent(self) -> bool:
        return (self.beta_L is not None and self.beta_R is not None
                and abs(self.beta_L - self.beta_R) < COALESCENCE)


def _structural_top(model):
    # Model I and III have no beta^{2p} term by construction
    return 3 if isinstance(model, ModelI) else 2 * model.bands


def char_roots(model: ModelSpec, omega: float, eta: float = 0.0,
               element: Optional[tuple[int, int]] = None, cp: Optional[CharPoly] = None) -> BetaRoots:
    """Roots of ``det[omega + i eta - H(beta)] = 0``.

    Companion-matrix eigenvalues (``numpy.roots``) of the trimmed polynomial.

    Examples
    --------
    >>> r = char_roots(ModelI(0.3, 0.5, 0.5), 0.4)
    >>> complex(np.round(r.beta_L, 12))
    (-0.6+0.8j)
    """
    if eta < 0:
        raise DomainError("eta must be >= 0")
    cp = cp or char_poly(model, element)
    z = complex(omega, eta)
    q, s, top = _trim(cp.q_at(z))
    a, u, _ = _trim(cp.a_at(z))
    roots = _sort_roots(np.roots(q[::-1])) if len(q) > 1 else np.zeros(0, complex)
    n_in = model.bands - s
    n_out = len(roots) - n_in
    if n_in < 0 or n_out < 0:
        raise DomainError("root count inconsistent with the band structure")
    beta_L = complex(roots[n_out - 1]) if n_out > 0 else None
    beta_R = complex(roots[n_out]) if n_in > 0 else None
    return BetaRoots(
        float(omega), float(eta), roots, n_in, s, 2 * model.bands - top,
        top < _structural_top(model), beta_L, beta_R, q=q, a=a, u=u,
    )


def _factor(br: BetaRoots, r: complex) -> complex:
    """``r^(u-s) A~(r) / Q~'(r)`` for a simple root ``r``."""
    dq = npoly.polyval(r, npoly.polyder(br.q))
    return r ** (br.u - br.zero_roots) * npoly.polyval(r, br.a) / dq


def residue_factors(model: ModelSpec, omega: float, eta: float = 0.0,
                    element: Optional[tuple[int, int]] = None, extrapolate: bool = True,
                    cp: Optional[CharPoly] = None) -> BetaRoots:
    """Roots plus residue factors ``f_L, f_R`` with ``G(n) ~ f_{L/R} beta_{L/R}^n``.

    When ``beta_L`` and ``beta_R`` coalesce at ``eta = 0`` the factors are
    singular individually; with ``extrapolate`` they are evaluated at
    ``eta = 1e-4, 1e-5, 1e-6`` and extrapolated linearly in ``sqrt(eta)``.

    Raises
    ------
    CoalescentRootsError
        Coalescent roots at ``eta = 0`` with ``extrapolate=False``.
    """
    cp = cp or char_poly(model, element)
    br = char_roots(model, omega, eta, cp=cp)
    if br.coalescent and eta == 0:
        if not extrapolate:
            raise CoalescentRootsError(
                f"beta_L and beta_R coalesce at omega={omega}; use the eta -> 0+ extrapolation"
            )
        fl, fr = [], []
        for e in ETA_LADDER:
            b = residue_factors(model, omega, e, extrapolate=False, cp=cp)
            fl.append(b.f_L)
            fr.append(b.f_R)
        x = np.sqrt(ETA_LADDER)
        f_L = complex(np.polyfit(x, np.array(fl), 1)[1])
        f_R = complex(np.polyfit(x, np.array(fr), 1)[1])
        return _replace(br, f_L=f_L, f_R=f_R, extrapolated=True)
    f_L = -_factor(br, br.beta_L) if br.beta_L is not None else None
    f_R = _factor(br, br.beta_R) if br.beta_R is not None else None
    return _replace(br, f_L=f_L, f_R=f_R)


def _replace(br, **kw):
    return replace(br, **kw)


def _taylor_coeff(num, den, k):
    """Coefficient of ``beta^k`` in the Taylor series of ``num/den`` at 0."""
    out = np.zeros(k + 1, dtype=complex)
    for i in range(k + 1):
        acc = num[i] if i < len(num) else 0
        for j in range(1, min(i, len(den) - 1) + 1):
            acc -= den[j] * out[i - j]
        out[i] = acc / den[0]
    return out[k]


def greens_element(model: ModelSpec, omega: float, n: int, eta: float = 0.0,
                   element: Optional[tuple[int, int]] = None, cp: Optional[CharPoly] = None,
                   roots: Optional[BetaRoots] = None) -> complex:
    """Infinite-chain ``G(n)`` at ``z = omega + i eta``, by residues.

    For ``n`` far to the left only the outside roots contribute, for ``n``
    far to the right only the inside ones; in between the pole at the origin
    is added from the Taylor series.
    """
    br = roots if roots is not None else char_roots(model, omega, eta, element, cp)
    e = int(n) + br.u - br.zero_roots
    deg_gap = (len(br.a) - 1) - (len(br.q) - 1)
    if e < 0 and e + deg_gap <= -2:
        return complex(-sum(r ** int(n) * _factor(br, r) for r in br.outside))
    total = sum(r ** int(n) * _factor(br, r) for r in br.inside)
    if e < 0:
        total += _taylor_coeff(br.a, br.q, -e - 1)
    return complex(total)


def _loss_form(model: ModelSpec):
    """``(offsets, weights, coupling)`` for the infinite-chain loss rate.

    Two-band: rate = 2 gamma |G_B(n)|^2. Single band: link between cells
    ``n`` and ``n+1``.
    """
    if isinstance(model, ModelIII):
        w = model.gamma + model.gamma_prime
        return True, w, complex(-model.gamma_prime, model.gamma)
    return False, 2.0 * model.gamma, 0j


def _spectrum_window(model: ModelSpec):
    ks = np.linspace(0, 2 * math.pi, 257)
    re = np.concatenate([np.linalg.eigvals(bloch_hamiltonian(model, k)).real for k in ks])
    return float(re.min()), float(re.max())


def bulk_loss_infinite(model: ModelSpec, displacement: int, breakpoints: Optional[Sequence[float]] = None,
                       epsabs: float = 1e-14, epsrel: float = 1e-10, limit: int = 2000) -> float:
    """``P^infinity`` at ``x - x0 = displacement`` on an infinite chain.

    ``(1/2 pi) \\int d omega`` of the local loss rate built from ``G(omega)``.
    The quadrature is split at every gap-closing frequency and at the
    edges of the real part of the spectrum.
    """
    n = int(displacement)
    if n == 0:
        raise DomainError("displacement must be nonzero")
    if not model.is_lossy:
        raise DomainError("loss profiles need a positive loss rate")
    cp = char_poly(model)
    link, w, c = _loss_form(model)
    if breakpoints is None:
        breakpoints = [p.omega0 for p in gap_closing_points(model)]
    lo, hi = _spectrum_window(model)
    lo, hi = lo - 1.0, hi + 1.0
    pts = sorted({float(b) for b in breakpoints if lo < b < hi})

    def integrand(omega):
        eta = 0.0
        br = char_roots(model, omega, eta, cp=cp)
        if br.coalescent:
            # one eta ladder step is enough: the integrand is continuous here
            br = char_roots(model, omega, ETA_LADDER[-1], cp=cp)
        g0 = greens_element(model, omega, n, roots=br)
        if not link:
            return w * abs(g0) ** 2
        g1 = greens_element(model, omega, n + 1, roots=br)
        return w * (abs(g0) ** 2 + abs(g1) ** 2) + 2 * (c * g0.conjugate() * g1).real

    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
    edges = [lo] + pts + [hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(integrand, a, b, **kw)[0]
    total += quad(integrand, -np.inf, lo, **kw)[0]
    total += quad(integrand, hi, np.inf, **kw)[0]
    return total / (2 * math.pi)


# ---------------------------------------------------------------- expansions


@dataclass(frozen=True)
class ExpansionExponents:
    """Local behaviour ``ln|beta_L| ~ K dw^n`` and ``|f_L|^2 ~ dw^m`` near ``omega0``.

    ``r2_n`` and ``r2_m`` are the coefficients of determination of the two
    log-log fits. When ``m = 0`` the fit is flat and ``r2_m`` carries no
    information beyond the convention that an exact constant fit scores 1;
    ``rms_m`` (rms deviation of ``log|f_L|^2`` from the fitted
    line) is the relevant residual then.
    """

    n: Fraction
    m: Fraction
    K: float
    alpha_b_analytic: Fraction
    slope_n: float
    slope_m: float
    r2_n: float
    r2_m: float
    rms_m: float
    ambiguous: tuple = ()


def _mp_char(model, z, element):
    row, col = element or _default_element(model)
    blocks = hopping_blocks_mp(model)
    Q, A = _poly2d(blocks, row, col, mpmath.mpc(0), mpmath.mpc(1))
    qz = [sum(Q[i, j] * z**j for j in range(Q.shape[1])) for i in range(Q.shape[0])]
    az = [sum(A[i, j] * z**j for j in range(A.shape[1])) for i in range(A.shape[0])]
    return qz, az


def _mp_trim(c, rel):
    scale = max(abs(v) for v in c)
    nz = [i for i, v in enumerate(c) if abs(v) > rel * scale]
    return c[nz[0]:nz[-1] + 1], nz[0]


def _mp_beta_L(model, omega, element=None):
    """``(beta_L, f_L)`` at real ``omega`` in the current mpmath precision."""
    q, a = _mp_char(model, mpmath.mpf(omega), element)
    rel = mpmath.mpf(10) ** (-(mpmath.mp.dps - 5))
    q, s = _mp_trim(q, rel)
    a, u = _mp_trim(a, rel)
    roots = mpmath.polyroots(q[::-1], maxsteps=500, extraprec=4 * mpmath.mp.prec)
    roots = sorted(roots, key=lambda r: (-abs(r), float(mpmath.arg(r))))
    n_out = len(roots) - (model.bands - s)
    bl = roots[n_out - 1]
    dq = sum(i * q[i] * bl ** (i - 1) for i in range(1, len(q)))
    av = sum(a[i] * bl**i for i in range(len(a)))
    return bl, -(bl ** (u - s)) * av / dq


def _r_squared(y, resid):
    # constant data fitted exactly counts as a perfect fit
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(y**2))):
        return 1.0 if ss_res <= 1e-24 * max(1.0, float(np.sum(y**2))) else 0.0
    return 1.0 - ss_res / ss_tot


def _snap(slope, candidates):
    ranked = sorted(candidates, key=lambda c: abs(slope - float(c)))
    best = ranked[0]
    close = tuple(c for c in ranked[1:] if abs(slope - float(c)) < 2 * abs(slope - float(best)) + 0.05)
    return best, close


def local_expansion(model: ModelSpec, point: GapClosingPoint, delta_grid: Optional[Sequence[float]] = None,
                    side: int = 1, dps: int = 60) -> ExpansionExponents:
    """Exponents ``(n, m)`` of the roots and residues near a gap-closing frequency.

    Evaluates ``beta_L`` and ``f_L`` at ``omega0 + side * dw`` in
    ``dps``-digit arithmetic, fits ``log ln|beta_L|`` and ``log |f_L|^2``
    against ``log dw`` and rounds the slopes to the nearest of
    ``{1/2, 1, 2, 3, 4}`` (``m`` may also be 0).
    """
    dw = np.logspace(-5, -3, 9) if delta_grid is None else np.asarray(delta_grid, float)
    if dw.min() <= 0 or math.log10(dw.max() / dw.min()) < 2 - 1e-9:
        raise FitError("delta grid must be positive and span at least two decades")
    lnb, f2 = [], []
    with mpmath.workdps(dps):
        w0 = mpmath.mpf(point.omega0)
        for d in dw:
            bl, fl = _mp_beta_L(model, w0 + side * mpmath.mpf(d))
            lnb.append(float(abs(mpmath.log(abs(bl)))))
            f2.append(float(abs(fl) ** 2))
    x = np.log(dw)
    lnb, f2 = np.array(lnb), np.array(f2)
    if np.any(lnb <= 0) or np.any(f2 <= 0):
        raise FitError("roots or residues vanish on the delta grid")
    fit_n = linregress(x, np.log(lnb))
    fit_m = linregress(x, np.log(f2))
    n, amb_n = _snap(fit_n.slope, EXPONENT_CANDIDATES)
    m, amb_m = _snap(fit_m.slope, M_CANDIDATES)
    resid = np.log(f2) - (fit_m.intercept + fit_m.slope * x)
    r2_m = _r_squared(np.log(f2), resid)
    K = float(np.mean(lnb / dw ** float(n)))
    amb = tuple(("n", c) for c in amb_n) + tuple(("m", c) for c in amb_m)
    return ExpansionExponents(n, m, K, (m + 1) / n, float(fit_n.slope), float(fit_m.slope),
                              _r_squared(np.log(lnb), np.log(lnb) - fit_n.intercept - fit_n.slope * x), r2_m,
                              float(np.sqrt(np.mean(resid**2))), amb)


# ---------------------------------------------------------------- GBZ


@dataclass(frozen=True)
class Saddle:
    beta_s: complex
    E_s: complex
    residual: float
    fallback: bool = False


@dataclass(frozen=True)
class GbzData:
    """Numeric GBZ from an open chain.

    ``beta_points[i]`` pairs with ``obc_energies[i // 2]`` (two middle
    roots per accepted eigenvalue, after refinement when requested). ``isolated_energies`` are eigenvalues
    whose middle roots do not match in modulus (edge modes).
    """

    beta_points: np.ndarray
    obc_energies: np.ndarray
    isolated_energies: np.ndarray
    radius_analytic: Optional[float]
    saddle: Optional[Saddle]
    L: int


def gbz_radius_analytic(model: ModelSpec) -> Optional[float]:
    """Closed-form GBZ radius for the models whose GBZ is a circle."""
    if isinstance(model, ModelI):
        t1, g = model.t1, model.gamma
        if t1 + g / 2 == 0:
            return None
        return math.sqrt(abs((t1 - g / 2) / (t1 + g / 2)))
    if isinstance(model, ModelIII):
        h = hopping_blocks(model)
        return math.sqrt(abs(h[-1][0, 0] / h[1][0, 0]))
    return None


def _full_roots(cp: CharPoly, E: complex):
    """All ``2p`` roots including zeros and infinities, descending modulus."""
    q, s, top = _trim(cp.q_at(E))
    finite = _sort_roots(np.roots(q[::-1])) if len(q) > 1 else np.zeros(0, complex)
    n_inf = 2 * cp.bands - top
    return np.concatenate([np.full(n_inf, np.inf + 0j), finite, np.zeros(s, complex)])


def _middle_pair(cp, E, L, rel_tol=None):
    r = _full_roots(cp, E)
    p = cp.bands
    b1, b2 = r[p - 1], r[p]
    if not (np.isfinite(b1) and np.isfinite(b2)) or b2 == 0:
        return None
    tol = 10.0 / L if rel_tol is None else rel_tol
    if abs(abs(b1) - abs(b2)) / abs(b2) < tol:
        return b1, b2
    return None


def _refine_pair(cp: CharPoly, E: complex, max_iter: int = 30, tol: float = 1e-13):
    """Move ``E`` to the nearest energy whose middle roots have equal modulus.

    Newton iteration on ``g(E) = ln|beta_p| - ln|beta_{p+1}|`` along its
    gradient; ``d beta / dE = -Q_E / Q_beta``. Returns ``(E, b1, b2)`` or None.
    """
    Qb = npoly.polyder(cp.Q, axis=0)
    Qe = npoly.polyder(cp.Q, axis=1)
    p = cp.bands
    for _ in range(max_iter):
        r = _full_roots(cp, E)
        b1, b2 = r[p - 1], r[p]
        if not (np.isfinite(b1) and np.isfinite(b2)) or b2 == 0:
            return None
        g = math.log(abs(b1)) - math.log(abs(b2))
        if abs(g) < tol:
            return E, b1, b2
        d1 = -npoly.polyval2d(b1, E, Qe) / npoly.polyval2d(b1, E, Qb)
        d2 = -npoly.polyval2d(b2, E, Qe) / npoly.polyval2d(b2, E, Qb)
        dF = d1 / b1 - d2 / b2
        if not np.isfinite(dF) or dF == 0:
            return None
        E = E - g * np.conj(dF) / abs(dF) ** 2
    return None


def gbz(model: ModelSpec, L: int = 60, with_saddle: bool = True, refine: bool = True) -> GbzData:
    """GBZ from the middle-modulus root pair of every OBC eigenvalue.

    Each eigenvalue whose middle roots agree in modulus to ``10/L`` is
    accepted. With ``refine`` the eigenvalue is then shifted to the nearest
    energy where the two moduli agree exactly, removing the ``O(1/L)``
    finite-size splitting of the pair; the energies reported are the
    refined ones.

    Examples
    --------
    >>> g = gbz(ModelI(0.3, 0.5, 2.0), 60, with_saddle=False)
    >>> bool(np.all(np.abs(np.abs(g.beta_points) - g.radius_analytic) < 1e-3))
    True
    """
    if L < 40:
        raise DomainError("numeric GBZ needs an open chain of at least 40 cells")
    cp = char_poly(model)
    H = realspace_hamiltonian(model, LatticeGeometry.for_model(model, L, "OBC")).toarray()
    E = np.linalg.eigvals(H)
    E = E[np.lexsort((E.real, -E.imag))]
    pts, good, bad = [], [], []
    for e in E:
        pair = _middle_pair(cp, e, L)
        if pair is None:
            bad.append(e)
            continue
        if refine:
            polished = _refine_pair(cp, complex(e))
            if polished is not None:
                e, pair = polished[0], polished[1:]
        pts.extend(pair)
        good.append(e)
    saddle = saddle_decay_rate(model, L=L, _cache=(np.array(pts), np.array(good), E)) if with_saddle else None
    return GbzData(np.array(pts), np.array(good), np.array(bad), gbz_radius_analytic(model), saddle, L)


def saddle_decay_rate(model: ModelSpec, L: int = 60, max_iter: int = 60, tol: float = 1e-12,
                      _cache=None) -> Saddle:
    """Saddle point ``(beta_s, E_s)`` of ``E(beta)`` with the largest ``Im E`` on the GBZ.

    Solves ``Q = 0`` and ``dQ/dbeta = 0`` by damped Newton iteration from
    the GBZ points of largest ``Im E``. A candidate is kept only if the
    double root ``beta_s`` is the middle root pair of ``Q(.; E_s)``, which
    is what places it on the GBZ. Without a converged candidate the largest
    ``Im E`` of the dense OBC spectrum is returned with ``fallback=True``.
    """
    cp = char_poly(model)
    if _cache is None:
        H = realspace_hamiltonian(model, LatticeGeometry.for_model(model, L, "OBC")).toarray()
        E_all = np.linalg.eigvals(H)
        pts, good = [], []
        for e in E_all[np.argsort(-E_all.imag)][: 4 * model.bands + 4]:
            pair = _middle_pair(cp, e, L)
            if pair is not None:
                pts.extend(pair)
                good.append(e)
        pts, good = np.array(pts), np.array(good)
    else:
        pts, good, E_all = _cache
    Q = cp.Q
    Qb = npoly.polyder(Q, axis=0)
    Qbb = npoly.polyder(Qb, axis=0)
    Qe = npoly.polyder(Q, axis=1)
    Qbe = npoly.polyder(Qb, axis=1)

    def F(b, e):
        return np.array([npoly.polyval2d(b, e, Q), npoly.polyval2d(b, e, Qb)])

    def J(b, e):
        return np.array([[npoly.polyval2d(b, e, Qb), npoly.polyval2d(b, e, Qe)],
                         [npoly.polyval2d(b, e, Qbb), npoly.polyval2d(b, e, Qbe)]])

    scale = float(np.max(np.abs(Q)))
    order = np.argsort(-good.imag)[: 2 * model.bands + 2]
    found = []
    for i in order:
        for b in (pts[2 * i], pts[2 * i + 1]):
            x = np.array([complex(b), complex(good[i])])
            r = np.linalg.norm(F(*x))
            for _ in range(max_iter):
                try:
                    step = np.linalg.solve(J(*x), -F(*x))
                except np.linalg.LinAlgError:
                    break
                lam = 1.0
                while lam > 1e-4:
                    trial = x + lam * step
                    rt = np.linalg.norm(F(*trial))
                    if rt < r:
                        break
                    lam /= 2
                x, r = trial, rt
                if r < tol * scale:
                    break
            if r < 1e-8 * scale and x[0] != 0:
                roots = _full_roots(cp, x[1])
                p = model.bands
                mid = roots[p - 1: p + 1]
                if np.all(np.isfinite(mid)) and np.min(np.abs(mid - x[0])) < 1e-4 * max(1, abs(x[0])):
                    found.append(Saddle(complex(x[0]), complex(x[1]), float(r / scale)))
    if found:
        best = max(found, key=lambda s: (round(s.E_s.imag, 10), s.E_s.real))
        return best
    e = E_all[np.argmax(E_all.imag)]
    return Saddle(complex("nan"), complex(e), float("nan"), fallback=True)


def winding_number(curve: np.ndarray, point: complex) -> int:
    """Winding number of the closed polygon ``curve`` around ``point``."""
    d = np.asarray(curve) - point
    ang = np.angle(np.roll(d, -1) / d)
    return int(round(ang.sum() / (2 * math.pi)))


def inside_gbz(data: GbzData, beta: complex) -> bool:
    """Whether ``beta`` is enclosed by the GBZ (points ordered by argument)."""
    pts = data.beta_points
    loop = pts[np.argsort(np.angle(pts))]
    return winding_number(loop, beta) != 0


def classify_closing_points(model: ModelSpec, points=None, eta: float = 1e-9):
    """Split gap-closing points by the role of their unit-circle root.

    Returns ``(right_controlled, left_controlled)``: lists of
    ``(GapClosingPoint, beta)`` where ``beta = e^{i k0}`` is an inside-class
    root (it governs rightward propagation) or an outside-class root
    (leftward).
    """
    points = gap_closing_points(model).points if points is None else points
    right, left = [], []
    for p in points:
        b = complex(math.cos(p.k0), math.sin(p.k0))
        br = char_roots(model, p.omega0, eta)
        j = int(np.argmin(np.abs(br.roots - b)))
        (left if j < br.n_outside else right).append((p, b))
    return right, left


# ---------------------------------------------------------------- export


def write_gbz_csv(path, data: GbzData) -> None:
    """GBZ points as CSV with columns ``index, re, im, modulus``."""
    b = data.beta_points
    write_csv(path, {"index": range(len(b)), "re": b.real, "im": b.imag, "modulus": np.abs(b)})


def write_root_scan_csv(path, model: ModelSpec, omegas: Sequence[float], eta: float = 0.0) -> None:
    """``beta_L`` and ``beta_R`` over a frequency scan: ``omega, root, re, im, modulus``."""
    cols = {"omega": [], "root": [], "re": [], "im": [], "modulus": []}
    cp = char_poly(model)
    for w in omegas:
        br = char_roots(model, w, eta, cp=cp)
        for name, b in (("L", br.beta_L), ("R", br.beta_R)):
            if b is None:
                continue
            cols["omega"].append(float(w))
            cols["root"].append(name)
            cols["re"].append(b.real)
            cols["im"].append(b.imag)
            cols["modulus"].append(abs(b))
    write_csv(path, cols)
