"""Bloch spectra, the imaginary (dissipative) gap and point-gap diagnostics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
import scipy.linalg as la
from scipy.optimize import golden

from .models import ModelSpec, bloch_hamiltonian, hopping_blocks_mp
from .io import write_csv

__all__ = [
    "SpectrumSample",
    "GapClosingPoint",
    "GapClosingResult",
    "AntiHermitianPart",
    "BiorthogonalCheck",
    "AreaResult",
    "pbc_spectrum",
    "imaginary_gap",
    "gap_closing_points",
    "antihermitian_part",
    "biorthogonal_im_check",
    "spectral_area",
    "write_spectrum_csv",
]

DEFECTIVE_CONDITION = 1e8


@dataclass(frozen=True)
class SpectrumSample:
    """Eigen-decomposition of ``H(k)`` with biorthonormal eigenvectors.

    Columns of ``right_eigenvectors`` and ``left_eigenvectors`` pair up so
    that ``left.conj().T @ right`` is the identity.
    """

    k: float
    energies: np.ndarray
    right_eigenvectors: np.ndarray = field(repr=False)
    left_eigenvectors: np.ndarray = field(repr=False)
    condition: float = 1.0
    defective: bool = False


@dataclass(frozen=True)
class GapClosingPoint:
    k0: float
    omega0: float
    band: int
    im_energy: float = 0.0


@dataclass(frozen=True)
class GapClosingResult:
    points: list
    gapped: bool

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _eig_sample(model: ModelSpec, k: float) -> SpectrumSample:
    H = bloch_hamiltonian(model, k)
    E, vl, vr = la.eig(H, left=True, right=True)
    order = np.lexsort((E.real, -E.imag))
    E, vl, vr = E[order], vl[:, order], vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    overlap = np.einsum("in,in->n", vl.conj(), vr)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.norm(vl, axis=0) / np.abs(overlap)
    cond_max = float(np.max(np.where(np.isfinite(cond), cond, np.inf)))
    defective = not cond_max < DEFECTIVE_CONDITION
    if not defective:
        vl = vl / overlap.conj()
    return SpectrumSample(float(k), E, vr, vl, cond_max, defective)


def pbc_spectrum(model: ModelSpec, Nk: int = 256) -> list[SpectrumSample]:
    """Diagonalize ``H(k)`` at ``k = 2 pi j / Nk``.

    Eigenvalues at each ``k`` are ordered by descending ``Im E``. Samples
    whose eigenvalue condition number exceeds ``1e8`` are flagged as
    defective (exceptional points) and left without biorthogonal scaling.

    Examples
    --------
    >>> from edgeburst.models import ModelI
    >>> s = pbc_spectrum(ModelI(0.5, 0.5, 0.5), 16)[8]
    >>> [complex(e) for e in np.round(s.energies, 12) + 0.0]
    [0j, -0.5j]
    """
    if Nk < 16:
        raise ValueError("Nk must be >= 16")
    return [_eig_sample(model, 2 * math.pi * j / Nk) for j in range(Nk)]


def _top_im(model, k):
    return float(np.max(np.linalg.eigvals(bloch_hamiltonian(model, k)).imag))


def imaginary_gap(model: ModelSpec, Nk: int = 512, refine_tol: float = 1e-10) -> float:
    """``max_k max_n Im E_n(k)``: zero when the gap is closed, negative when open.

    A grid scan locates the maximum, which is then polished by golden-section
    search on the bracketing grid cells.
    """
    ks = 2 * math.pi * np.arange(Nk) / Nk
    vals = np.array([_top_im(model, k) for k in ks])
    j = int(np.argmax(vals))
    best = vals[j]
    h = 2 * math.pi / Nk
    a, c = ks[j] - h, ks[j] + h
    if vals[(j - 1) % Nk] < best and vals[(j + 1) % Nk] < best:
        kmax = golden(lambda k: -_top_im(model, k), brack=(a, ks[j], c),
                      tol=max(refine_tol, 1e-15))
        best = max(best, _top_im(model, kmax))
    return min(float(best), 1e-10) if best > 0 else float(best)


def _mp_top(model, k):
    """Eigenvalue of ``H(k)`` with the largest imaginary part, in mpmath."""
    h = hopping_blocks_mp(model)
    z = mpmath.expj(k)
    n = len(h[0])
    M = [[h[0][a][b] + h[1][a][b] * z + h[-1][a][b] / z for b in range(n)] for a in range(n)]
    if n == 1:
        return M[0][0]
    tr2 = (M[0][0] + M[1][1]) / 2
    disc = mpmath.sqrt(tr2**2 - (M[0][0] * M[1][1] - M[0][1] * M[1][0]))
    e1, e2 = tr2 + disc, tr2 - disc
    return e1 if e1.imag >= e2.imag else e2


def _mp_golden_max(f, a, b, tol):
    """Golden-section maximization of a unimodal real function on ``[a, b]``."""
    invphi = (mpmath.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def gap_closing_points(model: ModelSpec, Nk: int = 512, tol: float = 1e-8,
                       dps: int = 50) -> GapClosingResult:
    """Momenta ``k0`` where the top band touches the real axis, with ``omega0 = Re E(k0)``.

    Every local maximum of ``max_n Im E_n(k)`` on the grid is refined by
    golden-section search in ``dps``-digit arithmetic, which resolves the
    flat quartic maxima that double precision cannot. A maximum counts as a
    closing point when its ``|Im E|`` is within ``tol``.
    """
    ks = 2 * math.pi * np.arange(Nk) / Nk
    vals = np.array([_top_im(model, k) for k in ks])
    h = 2 * math.pi / Nk
    cands = [j for j in range(Nk) if vals[j] >= vals[(j - 1) % Nk] and vals[j] >= vals[(j + 1) % Nk]]
    points = []
    with mpmath.workdps(dps):
        ktol = mpmath.mpf(10) ** (-(dps // 3))
        for j in cands:
            f = lambda k: _mp_top(model, k).imag
            k = _mp_golden_max(f, mpmath.mpf(ks[j]) - h, mpmath.mpf(ks[j]) + h, ktol)
            E = _mp_top(model, k)
            if abs(E.imag) <= tol:
                k0 = float(mpmath.atan2(mpmath.sin(k), mpmath.cos(k)))
                points.append(GapClosingPoint(k0, float(E.real), 0, float(E.imag)))
    uniq = []
    for p in sorted(points, key=lambda p: p.k0):
        if not any(abs(math.remainder(p.k0 - q.k0, 2 * math.pi)) < 1e-6 for q in uniq):
            uniq.append(p)
    return GapClosingResult(uniq, gapped=not uniq)


@dataclass(frozen=True)
class AntiHermitianPart:
    """``D(k) = (H - H^dagger)/2i`` and its eigenpairs, eigenvalues descending."""

    D: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def antihermitian_part(model: ModelSpec, k: float) -> AntiHermitianPart:
    H = bloch_hamiltonian(model, k)
    D = (H - H.conj().T) / 2j
    D = (D + D.conj().T) / 2
    w, v = np.linalg.eigh(D)
    return AntiHermitianPart(D, w[::-1], v[:, ::-1])


@dataclass(frozen=True)
class BiorthogonalCheck:
    """Per-band comparison of ``Im E_n`` with the weighted sum over ``D`` eigenvalues.

    ``weights[n, i] = |<d_i|u_nR>|^2 / <u_nR|u_nR>``.
    """

    energies: np.ndarray
    weights: np.ndarray
    residual: np.ndarray
    defective: bool


def biorthogonal_im_check(model: ModelSpec, k: float) -> BiorthogonalCheck:
    sample = _eig_sample(model, k)
    D = antihermitian_part(model, k)
    ur = sample.right_eigenvectors
    proj = D.eigenvectors.conj().T @ ur
    weights = (np.abs(proj) ** 2 / np.sum(np.abs(ur) ** 2, axis=0)).T
    rhs = weights @ D.eigenvalues
    return BiorthogonalCheck(sample.energies, weights, np.abs(sample.energies.imag - rhs),
                             sample.defective)


@dataclass(frozen=True)
class AreaResult:
    """Point-gap area of the PBC spectrum.

    ``per_loop`` holds the signed shoelace area of each closed loop (bands
    that permute under ``k -> k + 2 pi`` are joined into one loop);
    ``total`` is the sum of their magnitudes.
    """

    total: float
    per_loop: list
    Nk: int
    ambiguous: bool


def _tracked_bands(model, Nk):
    ks = 2 * math.pi * np.arange(Nk + 1) / Nk
    E = np.array([np.linalg.eigvals(bloch_hamiltonian(model, k)) for k in ks])
    nb = E.shape[1]
    perms = list(itertools.permutations(range(nb)))
    ambiguous = False
    for i in range(1, len(ks)):
        costs = [np.sum(np.abs(E[i, list(p)] - E[i - 1])) for p in perms]
        order = np.argsort(costs)
        if len(perms) > 1 and costs[order[1]] < 2 * costs[order[0]] + 1e-14:
            ambiguous = True
        E[i] = E[i, list(perms[order[0]])]
    return E, ambiguous


def _loops(E):
    """Join tracked bands into closed loops and return their vertex lists."""
    nb = E.shape[1]
    end = E[-1]
    # band b at k = 2 pi continues as band nxt[b] at k = 0
    nxt = [int(np.argmin(np.abs(E[0] - end[b]))) for b in range(nb)]
    seen, loops = set(), []
    for b0 in range(nb):
        if b0 in seen:
            continue
        pts, b = [], b0
        while b not in seen:
            seen.add(b)
            pts.append(E[:-1, b])
            b = nxt[b]
        loops.append(np.concatenate(pts))
    return loops


def _shoelace(z):
    x, y = z.real, z.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def spectral_area(model: ModelSpec, Nk: int = 256, tol: float = 1e-6, max_Nk: int = 1 << 15) -> AreaResult:
    """Area enclosed by the PBC spectral loops, with ``Nk`` doubled until it changes by < ``tol``."""
    prev = None
    while True:
        E, amb = _tracked_bands(model, Nk)
        areas = [_shoelace(z) for z in _loops(E)]
        total = float(sum(abs(a) for a in areas))
        if prev is not None and (abs(total - prev) < tol or 2 * Nk > max_Nk):
            return AreaResult(total, areas, Nk, amb)
        prev = total
        Nk *= 2


def write_spectrum_csv(path, samples) -> None:
    """Export samples as CSV with columns ``k, band, reE, imE``."""
    k, band, re, im = [], [], [], []
    for s in samples:
        for n, e in enumerate(s.energies):
            k.append(s.k)
            band.append(n)
            re.append(e.real)
            im.append(e.imag)
    write_csv(path, {"k": k, "band": band, "reE": re, "imE": im})
