"""One-particle Laplacian spectra on compact metric graphs.

Eigenvalues ``k**2 != 0`` are located as zeros of the secular determinant

    f(k) = det(1 - S(k) T(k)),

where ``S(k) = -(P + L + ik*Pperp)^{-1} (P + L - ik*Pperp)`` is the vertex
scattering matrix (the inverse acts as -P on ran P and as the usual Cayley
transform of L on ker P, where L is invertible shifted by ik) and ``T(k)``
is the block anti-diagonal matrix of edge phases ``exp(i k l_e)``.  The order
of a zero equals the eigenvalue multiplicity; we read the order off an
argument-principle winding number on a small circle around each refined root.

Negative eigenvalues ``-kappa**2`` come from the same determinant evaluated
at ``k = i*kappa``, where it is real-valued; eigenvalue zero is handled by a
separate direct solve with the affine ansatz ``psi_e = a_e + b_e x``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import SolverError, ValidationError

DEFAULT_TOL = 1e-10


def scattering_matrix(bc, k):
    """Vertex scattering matrix S(k); ``k`` may be complex."""
    return scattering_matrices(bc, np.asarray(k))


def scattering_matrices(bc, ks):
    """S(k) for an array of (complex) k; returns shape ks.shape + (2E, 2E)."""
    ks = np.asarray(ks, dtype=complex)
    A = bc.P + bc.L
    Pp = bc.Pperp
    M_plus = A + 1j * ks[..., None, None] * Pp
    M_minus = A - 1j * ks[..., None, None] * Pp
    try:
        return -np.linalg.solve(M_plus, M_minus)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"P + L + ik*Pperp singular at k = {ks!r}") from exc


def metric_phase_matrix(graph, ks):
    """T(k): anti-diagonal 2x2 block matrix of edge phases exp(i k l_e)."""
    ks = np.asarray(ks, dtype=complex)
    E = graph.num_edges
    lengths = np.asarray(graph.lengths)
    ph = np.exp(1j * ks[..., None] * lengths)
    T = np.zeros(ks.shape + (2 * E, 2 * E), dtype=complex)
    idx = np.arange(E)
    T[..., idx, E + idx] = ph
    T[..., E + idx, idx] = ph
    return T


def secular_value(graph, bc, k):
    """det(1 - S(k) T(k)) at a single (complex) k."""
    return complex(secular_values(graph, bc, np.asarray(k)))


def secular_values(graph, bc, ks):
    """Vectorized secular determinant over an array of k."""
    ks = np.asarray(ks, dtype=complex)
    S = scattering_matrices(bc, ks)
    T = metric_phase_matrix(graph, ks)
    U = S @ T
    eye = np.eye(U.shape[-1])
    return np.linalg.det(eye - U)


def unitarity_defect(bc, k):
    """max-norm of S(k) S(k)* - 1; ~0 for real k and valid (P, L)."""
    S = scattering_matrices(bc, np.asarray(float(k)))
    return float(np.max(np.abs(S @ S.conj().T - np.eye(S.shape[-1]))))


# ---------------------------------------------------------------------------
# root finding on the real axis


@dataclass(frozen=True)
class Eigenroot:
    k: float
    lam: float
    multiplicity: int
    residual: float


@dataclass
class SpectrumResult:
    """Positive spectrum from a secular scan over (0, k_max]."""

    roots: list
    k_max: float
    grid: float
    tol: float
    diagnostics: dict = field(default_factory=dict)

    def eigenvalues(self, with_multiplicity=True):
        if with_multiplicity:
            return np.array([r.lam for r in self.roots for _ in range(r.multiplicity)])
        return np.array([r.lam for r in self.roots])

    def wavenumbers(self, with_multiplicity=True):
        if with_multiplicity:
            return np.array([r.k for r in self.roots for _ in range(r.multiplicity)])
        return np.array([r.k for r in self.roots])


def _refine_abs_min(f, a, b):
    """Minimize |f|^2 on [a, b]; then guarded complex-Newton polish."""
    res = minimize_scalar(
        lambda x: abs(f(x)) ** 2, bounds=(a, b), method="bounded",
        options={"xatol": 1e-14, "maxiter": 200},
    )
    k = float(res.x)
    fv = abs(f(k))
    width = b - a
    for _ in range(8):
        if fv == 0.0:
            break
        h = 1e-7 * max(1.0, abs(k))
        d = (f(k + h) - f(k - h)) / (2 * h)
        if d == 0 or not np.isfinite(d):
            break
        step = (f(k) / d).real
        if not np.isfinite(step) or abs(step) > width:
            break
        k2 = min(max(k - step, a), b)
        f2 = abs(f(k2))
        if f2 < fv:
            k, fv = k2, f2
        else:
            break
    return k, fv


def winding_number(f, center, radius, n=128):
    """Argument-principle winding of f around a circle (f analytic inside)."""
    for _ in range(4):
        th = 2 * np.pi * np.arange(n + 1) / n
        z = center + radius * np.exp(1j * th)
        vals = f(z)
        if np.any(vals == 0) or not np.all(np.isfinite(vals)):
            return np.nan
        steps = np.angle(vals[1:] / vals[:-1])
        if np.max(np.abs(steps)) < 0.5 * np.pi:
            return float(steps.sum() / (2 * np.pi))
        n *= 2
    return float(steps.sum() / (2 * np.pi))


def _multiplicity(f, k, radius):
    """Zero order at k via winding; shrink the circle once before giving up."""
    for r in (radius, radius / 4):
        w = winding_number(f, k, r)
        if np.isfinite(w) and abs(w - round(w)) <= 0.05 and round(w) >= 1:
            return int(round(w))
    raise SolverError(
        f"winding number {w!r} at k = {k:.12g} (radius {radius:.2e}) is not a "
        "positive integer; root order undetermined"
    )


def _local_minima(values):
    idx = []
    n = len(values)
    for i in range(n):
        left = values[i - 1] if i > 0 else np.inf
        right = values[i + 1] if i < n - 1 else np.inf
        if values[i] <= left and values[i] <= right:
            idx.append(i)
    return idx


def scan_spectrum(graph, bc, k_max, grid=None, tol=DEFAULT_TOL):
    """Locate all zeros of the secular determinant on (0, k_max].

    Grid scan of |f| for local minima, bounded minimization of |f|^2 on each
    bracket, then a winding-number multiplicity read.  Windows where the
    refinement stalls above ``tol`` but well below the grid scale (unresolved
    near-degenerate pairs) are rescanned at 10x finer resolution, up to three
    times.  Eigenvalues are lambda = k**2; k = 0 is excluded (see
    ``zero_mode_multiplicity``).
    """
    if k_max <= 0:
        raise ValidationError("k_max must be positive")
    heuristic = np.pi / graph.total_length
    if grid is None:
        grid = heuristic / 8
    if grid > heuristic:
        warnings.warn(
            f"grid step {grid:.3g} is coarser than the mean level spacing "
            f"pi/total_length = {heuristic:.3g}; roots may be missed",
            stacklevel=2,
        )

    def f(k):
        return secular_values(graph, bc, np.asarray(k, dtype=complex))

    npts = max(int(np.ceil(k_max / grid)) + 1, 8)
    ks = np.linspace(grid * 1e-3, k_max, npts)
    fs = np.abs(f(ks))
    scale = max(np.median(fs), 1e-300)
    near_tol = max(1e-3 * scale, 10 * tol)

    found = []          # (k, residual)
    windows = []        # intervals to rescan finer
    for i in _local_minima(fs):
        a = ks[max(i - 1, 0)]
        b = ks[min(i + 1, npts - 1)]
        if b <= a:
            continue
        k0, fv = _refine_abs_min(f, a, b)
        if fv <= tol:
            found.append((k0, fv))
        elif fv <= near_tol:
            windows.append((a, b))

    depth = 0
    step = grid
    while windows and depth < 3:
        depth += 1
        step /= 10
        next_windows = []
        for a, b in windows:
            m = max(int(np.ceil((b - a) / step)) + 1, 8)
            kk = np.linspace(a, b, m)
            ff = np.abs(f(kk))
            for i in _local_minima(ff):
                lo, hi = kk[max(i - 1, 0)], kk[min(i + 1, m - 1)]
                if hi <= lo:
                    continue
                k0, fv = _refine_abs_min(f, lo, hi)
                if fv <= tol:
                    found.append((k0, fv))
                elif fv <= near_tol:
                    next_windows.append((lo, hi))
        windows = next_windows

    # merge duplicates found from adjacent brackets
    found.sort()
    merged = []
    for k0, fv in found:
        if merged and abs(k0 - merged[-1][0]) < 1e-8 * max(1.0, k0):
            if fv < merged[-1][1]:
                merged[-1] = (k0, fv)
            continue
        merged.append((k0, fv))
    merged = [(k0, fv) for k0, fv in merged if k0 > 1e-9]

    roots = []
    for j, (k0, fv) in enumerate(merged):
        gap = np.inf
        if j > 0:
            gap = min(gap, k0 - merged[j - 1][0])
        if j < len(merged) - 1:
            gap = min(gap, merged[j + 1][0] - k0)
        radius = min(grid / 4, 1e-3, 0.45 * gap)
        mult = _multiplicity(f, k0, radius)
        if mult > 1:
            # modified Newton (step m*f/f') restores full accuracy at
            # higher-order zeros, where the |f|^2 minimizer is shallow
            for _ in range(6):
                h = 1e-7 * max(1.0, abs(k0))
                d = (f(k0 + h) - f(k0 - h)) / (2 * h)
                if d == 0 or not np.isfinite(d):
                    break
                step = mult * (f(k0) / d).real
                if not np.isfinite(step) or abs(step) > radius:
                    break
                k1 = k0 - step
                if abs(f(k1)) <= fv:
                    k0, fv = k1, abs(f(k1))
                else:
                    break
        roots.append(Eigenroot(k=k0, lam=k0 * k0, multiplicity=mult, residual=fv))

    diag = {
        "grid_points": npts,
        "median_abs_f": float(scale),
        "rescan_depth": depth,
        "unresolved_windows": len(windows),
    }
    return SpectrumResult(roots=roots, k_max=float(k_max), grid=float(grid),
                          tol=float(tol), diagnostics=diag)


def count_roots_rect(graph, bc, k_lo, k_hi, half_height=None):
    """Total zero count (with multiplicity) in [k_lo, k_hi] via a rectangular
    argument-principle contour straddling the real axis.

    The contour must avoid the imaginary axis, where S(k) has its poles.
    """
    if k_lo <= 0:
        raise ValidationError("k_lo must be positive (poles sit on the imaginary axis)")
    if half_height is None:
        half_height = min(0.5 * k_lo, 0.1)

    def f(z):
        return secular_values(graph, bc, np.asarray(z, dtype=complex))

    corners = [k_lo - 1j * half_height, k_hi - 1j * half_height,
               k_hi + 1j * half_height, k_lo + 1j * half_height,
               k_lo - 1j * half_height]
    total = 0.0
    for a, b in zip(corners[:-1], corners[1:]):
        n = 4096
        for _ in range(4):
            z = a + (b - a) * np.arange(n + 1) / n
            vals = f(z)
            steps = np.angle(vals[1:] / vals[:-1])
            if np.max(np.abs(steps)) < 0.5 * np.pi:
                break
            n *= 2
        total += steps.sum()
    w = total / (2 * np.pi)
    if abs(w - round(w)) > 0.05:
        raise SolverError(f"contour winding {w} is not close to an integer")
    return int(round(w))


# ---------------------------------------------------------------------------
# k = 0 and negative spectrum


def zero_mode_multiplicity(graph, bc):
    """Dimension of the eigenvalue-zero eigenspace.

    Uses the affine ansatz psi_e = a_e + b_e x and counts solutions of
    (P + L) psi_bv + Pperp psi'_bv = 0.
    """
    E = graph.num_edges
    C1 = np.zeros((2 * E, 2 * E), dtype=complex)   # psi_bv from (a, b)
    C2 = np.zeros((2 * E, 2 * E), dtype=complex)   # psi'_bv from (a, b)
    for e, l in enumerate(graph.lengths):
        C1[e, e] = 1.0
        C1[E + e, e] = 1.0
        C1[E + e, E + e] = l
        C2[e, E + e] = 1.0
        C2[E + e, E + e] = -1.0
    M = (bc.P + bc.L) @ C1 + bc.Pperp @ C2
    s = np.linalg.svd(M, compute_uv=False)
    top = max(s.max(), 1.0)
    return int(np.sum(s < 1e-10 * top))


@dataclass(frozen=True)
class NegativeRoot:
    kappa: float
    lam: float
    multiplicity: int
    residual: float


def negative_spectrum(graph, bc, kappa_max, grid=None, tol=DEFAULT_TOL):
    """Negative eigenvalues -kappa**2 from the secular determinant at k = i*kappa.

    g(kappa) = det(1 - S(i*kappa) T(i*kappa)) is real there; we bracket sign
    changes (odd-order zeros) and chase |g| minima that touch zero without a
    sign change (even order, reported with multiplicity 2).  The positive
    L-eigenvalues are poles of g and are inserted as scan breakpoints so a
    root exponentially close to a pole still gets a clean bracket.
    """
    if kappa_max <= 0:
        raise ValidationError("kappa_max must be positive")
    if grid is None:
        grid = min(kappa_max / 400, 0.01)

    def g(kappa):
        vals = secular_values(graph, bc, 1j * np.asarray(kappa, dtype=float))
        return vals.real

    poles = [float(x) for x in bc.L_eigenvalues() if 1e-12 < x < kappa_max]
    edges = sorted({0.0, kappa_max, *poles})
    segments = []
    pad = 1e-9
    for a, b in zip(edges[:-1], edges[1:]):
        lo = a + (pad if a in poles else grid * 1e-3 if a == 0.0 else 0.0)
        hi = b - (pad if b in poles else 0.0)
        if hi > lo:
            segments.append((lo, hi))

    found = []
    for lo, hi in segments:
        m = max(int(np.ceil((hi - lo) / grid)) + 1, 8)
        kk = np.linspace(lo, hi, m)
        gg = g(kk)
        # odd-order roots: sign changes
        for i in range(m - 1):
            if gg[i] == 0.0:
                found.append((kk[i], 0.0, 1))
            elif gg[i] * gg[i + 1] < 0:
                r = brentq(lambda x: float(g(np.atleast_1d(x))[0]),
                           kk[i], kk[i + 1], xtol=1e-14, rtol=1e-15)
                res = abs(float(g(np.atleast_1d(r))[0]))
                if res <= max(tol, 1e-10 * max(abs(gg[i]), abs(gg[i + 1]))):
                    found.append((float(r), res, 1))
        # even-order roots: |g| minima that refine to ~0 with no sign change
        absg = np.abs(gg)
        scale = max(np.median(absg), 1e-300)
        for i in _local_minima(absg):
            a2, b2 = kk[max(i - 1, 0)], kk[min(i + 1, m - 1)]
            if b2 <= a2 or absg[i] > 1e-3 * scale:
                continue
            k0, fv = _refine_abs_min(lambda x: g(np.atleast_1d(x))[0] + 0j, a2, b2)
            if fv <= tol and g(np.atleast_1d(a2))[0] * g(np.atleast_1d(b2))[0] > 0:
                found.append((k0, fv, 2))

    found.sort()
    merged = []
    for kap, res, mult in found:
        if merged and abs(kap - merged[-1][0]) < 1e-9 * max(1.0, kap):
            continue
        merged.append((kap, res, mult))

    out = [NegativeRoot(kappa=kap, lam=-kap * kap, multiplicity=mult, residual=res)
           for kap, res, mult in merged]
    out.sort(key=lambda r: r.lam)
    return out


# ---------------------------------------------------------------------------
# Weyl counting diagnostics


def weyl_fit(result, graph):
    """Least-squares slope of the counting function N(k) against k.

    Returns (slope, relative deviation from total_length/pi).  Needs at
    least 30 eigenvalues in the scan result.
    """
    ks = [r.k for r in result.roots]
    mults = [r.multiplicity for r in result.roots]
    if sum(mults) < 30:
        raise ValidationError("need at least 30 eigenvalues for a Weyl fit")
    cum = np.cumsum(mults)
    # staircase midpoints remove half a level of systematic offset
    y = cum - np.asarray(mults) / 2.0
    slope = float(np.polyfit(ks, y, 1)[0])
    target = graph.total_length / np.pi
    return slope, slope / target - 1.0
