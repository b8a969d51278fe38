"""Two-particle Bethe-ansatz solvers.

Covers two bosons with a delta contact interaction of strength ``alpha`` on

* an interval of length ``l`` with Dirichlet walls (secular system
  ``exp(-2i k_n l) = s(k_n + k_m) s(k_n - k_m)`` for (n, m) = (1, 2), (2, 1)),
* a ring of circumference ``L`` (``exp(-i k_n L) = s(k_n - k_m)``),

with the unimodular scattering factor ``s(q) = (q - i*alpha)/(q + i*alpha)``.
In this normalization the two-body Hamiltonian is ``-Delta + 2*alpha*
delta(x1 - x2)``; the finite-difference oracle's diagonal strength is
therefore ``2*alpha``.  Solutions with ``alpha = 0`` are the free lattices;
``s`` is taken to be identically 1 there (removable limit).

Roots are found from the phase form of the equations.  With
``theta(q) = arg(q + i*alpha) in (0, pi)`` the interval system reads

    k1*l = theta(k1+k2) + theta(k1-k2) + (n-1)*pi
    k2*l = theta(k1+k2) + theta(k2-k1) + m*pi,

one root per free-lattice pair (n, m), n <= m; the ring system reads

    k1*L = 2*theta(k1-k2) + 2*pi*(n-1)
    k2*L = 2*theta(k2-k1) + 2*pi*m,

one root per lattice pair (n, m) in Z^2, n <= m.  Both Jacobians are
symmetric positive definite for alpha > 0, so damped Newton converges from
the lattice start; a diagonal pair (n, n) splits like sqrt(alpha).

Ring roots may carry a negative smaller wavenumber (e.g. the interacting
ground state splits (0, 0) into (-kappa, +kappa)); they are reported with
k1 <= k2 but without a sign restriction, which is what a periodic
two-particle eigensolver sees.  Attractive alpha < 0 (bound-state branches
with complex wavenumbers) is refused.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionError, SolverError, ValidationError
from .graphs import Kirchhoff, MetricGraph, assemble_conditions
from .spectra import scattering_matrix


def scatter_factor(q, alpha):
    """s(q) = (q - i*alpha)/(q + i*alpha); identically 1 at alpha = 0."""
    q = np.asarray(q, dtype=complex)
    if alpha == 0.0:
        return np.ones_like(q)
    return (q - 1j * alpha) / (q + 1j * alpha)


def _theta(q, alpha):
    """arg(q + i*alpha), the half phase of 1/s(q); smooth in q for alpha > 0."""
    return np.arctan2(alpha, q)


@dataclass(frozen=True)
class BetheRoot:
    k1: float
    k2: float
    lam: float
    residual: float
    model: str


def gaudin_residual(k1, k2, l, alpha):
    """Residuals of both interval secular equations at real (k1, k2).

    r_n = exp(-2i*k_n*l) - s(k_n + k_m)*s(k_n - k_m).  The only pole of s on
    the real axis is q = 0 at alpha = 0, where the analytic limit s = 1 is
    used; for alpha != 0 the denominators q + i*alpha never vanish for real q.
    """
    if l <= 0:
        raise ValidationError("interval length must be positive")
    r1 = np.exp(-2j * k1 * l) - scatter_factor(k1 + k2, alpha) * scatter_factor(k1 - k2, alpha)
    r2 = np.exp(-2j * k2 * l) - scatter_factor(k2 + k1, alpha) * scatter_factor(k2 - k1, alpha)
    return complex(r1), complex(r2)


def ring_residual(k1, k2, L, alpha):
    """Residuals of the periodic (ring) secular equations at real (k1, k2)."""
    if L <= 0:
        raise ValidationError("ring circumference must be positive")
    r1 = np.exp(-1j * k1 * L) - scatter_factor(k1 - k2, alpha)
    r2 = np.exp(-1j * k2 * L) - scatter_factor(k2 - k1, alpha)
    return complex(r1), complex(r2)


def _newton2(F, J, x0, tol=1e-13, maxiter=80):
    """Damped Newton for a 2d real system with SPD-ish Jacobian."""
    x = np.array(x0, dtype=float)
    fx = F(x)
    nf = np.max(np.abs(fx))
    for _ in range(maxiter):
        if nf <= tol:
            return x, nf
        step = np.linalg.solve(J(x), fx)
        t = 1.0
        while t > 1e-6:
            x2 = x - t * step
            f2 = F(x2)
            n2 = np.max(np.abs(f2))
            if n2 < nf:
                x, fx, nf = x2, f2, n2
                break
            t /= 2
        else:
            break
    if nf <= tol:
        return x, nf
    raise SolverError(f"Newton stalled at |F| = {nf:.3e} from start {x0}")


def _solve_interval_pair(l, alpha, n, m):
    """Root continued from the free-lattice pair (n, m), 1 <= n <= m."""

    def F(x):
        k1, k2 = x
        return np.array([
            k1 * l - _theta(k1 + k2, alpha) - _theta(k1 - k2, alpha) - (n - 1) * np.pi,
            k2 * l - _theta(k1 + k2, alpha) - _theta(k2 - k1, alpha) - m * np.pi,
        ])

    def J(x):
        k1, k2 = x
        a = alpha / ((k1 + k2) ** 2 + alpha**2)
        b = alpha / ((k1 - k2) ** 2 + alpha**2)
        return np.array([[l + a + b, a - b], [a - b, l + a + b]])

    if n == m:
        kap = min(np.sqrt(alpha / (2 * l)), 0.4 * np.pi / l)
        x0 = (n * np.pi / l - kap, n * np.pi / l + kap)
    else:
        x0 = (n * np.pi / l, m * np.pi / l)
    return _newton2(F, J, x0)


def solve_gaudin(l, alpha, lam_max):
    """All interval Bethe roots with lambda = k1**2 + k2**2 <= lam_max.

    Every eigenvalue moves up with alpha (repulsive branch), so the
    enumeration over free-lattice pairs with lattice lambda <= lam_max is
    exhaustive.  alpha < 0 is refused: attractive couplings move root pairs
    off the real axis and those branches are out of scope.
    """
    if l <= 0 or lam_max <= 0:
        raise ValidationError("need l > 0 and lam_max > 0")
    if alpha < 0:
        raise ValidationError(
            "attractive alpha < 0 produces complex (bound-state) branches; refused"
        )
    roots = []
    nmax = int(np.floor(np.sqrt(lam_max) * l / np.pi)) + 1
    for n in range(1, nmax + 1):
        for m in range(n, nmax + 1):
            lam0 = (n * n + m * m) * (np.pi / l) ** 2
            if lam0 > lam_max * (1 + 1e-12):
                continue
            if alpha == 0.0:
                k1, k2 = n * np.pi / l, m * np.pi / l
                res = 0.0
            else:
                (k1, k2), _ = _solve_interval_pair(l, alpha, n, m)
                r1, r2 = gaudin_residual(k1, k2, l, alpha)
                res = max(abs(r1), abs(r2))
                if res > 1e-10:
                    raise SolverError(
                        f"interval root from lattice ({n},{m}) has residual {res:.2e}"
                    )
            lam = k1 * k1 + k2 * k2
            if lam <= lam_max * (1 + 1e-12):
                roots.append(BetheRoot(k1=min(k1, k2), k2=max(k1, k2),
                                       lam=lam, residual=res, model="gaudin"))
    roots.sort(key=lambda r: (r.lam, r.k1))
    return roots


def _solve_ring_pair(L, alpha, n, m):
    def F(x):
        k1, k2 = x
        return np.array([
            k1 * L - 2 * _theta(k1 - k2, alpha) - 2 * np.pi * (n - 1),
            k2 * L - 2 * _theta(k2 - k1, alpha) - 2 * np.pi * m,
        ])

    def J(x):
        k1, k2 = x
        b = alpha / ((k1 - k2) ** 2 + alpha**2)
        return np.array([[L + 2 * b, -2 * b], [-2 * b, L + 2 * b]])

    two_pi = 2 * np.pi / L
    if n == m:
        kap = min(np.sqrt(alpha / L), 0.9 * np.pi / L)
        x0 = (n * two_pi - kap, n * two_pi + kap)
    else:
        x0 = (n * two_pi, m * two_pi)
    return _newton2(F, J, x0)


def solve_lieb_liniger_ring(L, alpha, lam_max):
    """All ring Bethe roots with lambda <= lam_max (k1 <= k2, signs free)."""
    if L <= 0 or lam_max <= 0:
        raise ValidationError("need L > 0 and lam_max > 0")
    if alpha < 0:
        raise ValidationError(
            "attractive alpha < 0 produces complex (bound-state) branches; refused"
        )
    roots = []
    nmax = int(np.floor(np.sqrt(lam_max) * L / (2 * np.pi))) + 1
    for n in range(-nmax, nmax + 1):
        for m in range(n, nmax + 1):
            lam0 = (n * n + m * m) * (2 * np.pi / L) ** 2
            if lam0 > lam_max * (1 + 1e-12):
                continue
            if alpha == 0.0:
                k1, k2 = n * 2 * np.pi / L, m * 2 * np.pi / L
                res = 0.0
            else:
                (k1, k2), _ = _solve_ring_pair(L, alpha, n, m)
                r1, r2 = ring_residual(k1, k2, L, alpha)
                res = max(abs(r1), abs(r2))
                if res > 1e-10:
                    raise SolverError(
                        f"ring root from lattice ({n},{m}) has residual {res:.2e}"
                    )
            lam = k1 * k1 + k2 * k2
            if lam <= lam_max * (1 + 1e-12):
                roots.append(BetheRoot(k1=min(k1, k2), k2=max(k1, k2),
                                       lam=lam, residual=res, model="ring"))
    roots.sort(key=lambda r: (r.lam, r.k1))
    return roots


# ---------------------------------------------------------------------------
# two-particle secular determinant Z on a graph


@dataclass(frozen=True)
class GraphZSpec:
    """A metric graph plus pair-contact data for the two-particle determinant.

    ``alpha`` is the uniform contact strength (per-edge-pair tables are
    accepted but only uniform values reach a solvable topology).  Supported
    topologies, recognized from (graph, bc):

    * "interval": one edge, Dirichlet at both ends,
    * "ring": a single cycle with Neumann-Kirchhoff vertices (transparent,
      so the cycle is a Lieb-Liniger ring of circumference total_length),
    * anything else is "general" and is refused by the factor-dimension
      validator (see ``z_dimension_report``).
    """

    graph: MetricGraph
    bc: object
    alpha: Union[float, dict]

    @property
    def topology(self):
        g, bc = self.graph, self.bc
        E = g.num_edges
        if E == 1 and g.edges[0][0] != g.edges[0][1]:
            if np.allclose(bc.P, np.eye(2), atol=1e-12) and np.allclose(bc.L, 0, atol=1e-12):
                return "interval"
        if all(g.degree(v) == 2 for v in range(g.num_vertices)) and E == g.num_vertices:
            ref = assemble_conditions(g, {v: Kirchhoff() for v in range(g.num_vertices)})
            if np.allclose(bc.P, ref.P, atol=1e-12) and np.allclose(bc.L, 0, atol=1e-12):
                return "ring"
        return "general"

    def uniform_alpha(self):
        if np.isscalar(self.alpha):
            return float(self.alpha)
        vals = set(float(v) for v in dict(self.alpha).values())
        if len(vals) == 1:
            return vals.pop()
        raise ValidationError("non-uniform pair strengths need the general path")


def z_dimension_report(spec):
    """Size report for the factors of the general two-particle determinant.

    U(k1, k2) = E(k2) Y(k2-k1) (1_2 x S(k2) x 1_{2E}) Y(k1+k2) with
    Y built from a 2x2 block tensored against the E^2-dimensional pair-strength
    diagonal, and E(k) = 1_{4E} x swap x exp(i k l).  The printed factor sizes
    are mutually inconsistent for every E (2E^2 vs 8E^2), and the role of the
    pair-strength diagonal (strength values vs interacting-pair indicators)
    is ambiguous, so assembly on a general graph is refused rather than
    silently reinterpreted.
    """
    E = spec.graph.num_edges
    return (
        f"edges E = {E}\n"
        f"  Y(k)            : 2*E^2 = {2 * E * E}\n"
        f"  1_2 x S x 1_2E  : 2*(2E)*(2E) = {8 * E * E}\n"
        f"  E(k)            : (4E)*2*E = {8 * E * E}\n"
        f"  det(1 - U) needs all factors square of equal size; "
        f"{2 * E * E} != {8 * E * E}"
    )


def assemble_Z(spec, k1, k2):
    """Two-particle secular value Z(k1, k2) = det(1 - U(k1, k2)).

    Eigenvalues k1**2 + k2**2 correspond to simultaneous zeros of
    Z(k1, k2) and Z(k2, k1).  For the interval and ring topologies the
    determinant reduces to an explicit scalar (the one-particle scattering
    matrix is validated to be the constant -1 or the transparent swap, and
    the contact factors carry the rest); the general-graph assembly is gated
    by the factor-dimension validator and refuses with a size report.
    """
    topo = spec.topology
    alpha = spec.uniform_alpha()
    if topo == "interval":
        S = scattering_matrix(spec.bc, 1.0 if k2 == 0 else k2)
        if not np.allclose(S, -np.eye(2), atol=1e-10):
            raise ValidationError("interval Z path requires Dirichlet ends (S = -1)")
        l = spec.graph.lengths[0]
        return complex(
            1.0
            - np.exp(2j * k1 * l)
            * scatter_factor(k1 + k2, alpha)
            * scatter_factor(k1 - k2, alpha)
        )
    if topo == "ring":
        L = spec.graph.total_length
        return complex(1.0 - np.exp(1j * k1 * L) * scatter_factor(k1 - k2, alpha))
    raise DimensionError(
        "general-graph two-particle determinant has inconsistent factor sizes; "
        "only interval and ring topologies are solvable here",
        report=z_dimension_report(spec),
    )


def _z_system(spec):
    alpha = spec.uniform_alpha()
    topo = spec.topology
    if topo == "interval":
        l = spec.graph.lengths[0]

        def Z(ka, kb):
            return (1.0 - np.exp(2j * ka * l)
                    * scatter_factor(ka + kb, alpha) * scatter_factor(ka - kb, alpha))

    elif topo == "ring":
        L = spec.graph.total_length

        def Z(ka, kb):
            return 1.0 - np.exp(1j * ka * L) * scatter_factor(ka - kb, alpha)

    else:
        raise DimensionError(
            "general-graph two-particle determinant has inconsistent factor sizes",
            report=z_dimension_report(spec),
        )
    return Z


def _newton_z(Z, k1, k2, tol=1e-12, maxiter=60):
    """Complex Newton on G = (Z(k1,k2), Z(k2,k1)); returns real root."""
    x = np.array([k1, k2], dtype=complex)
    h = 1e-7

    def G(x):
        return np.array([Z(x[0], x[1]), Z(x[1], x[0])], dtype=complex)

    g = G(x)
    for _ in range(maxiter):
        if np.max(np.abs(g)) <= tol:
            break
        Jm = np.empty((2, 2), dtype=complex)
        for j in range(2):
            e = np.zeros(2, dtype=complex)
            e[j] = h
            Jm[:, j] = (G(x + e) - G(x - e)) / (2 * h)
        try:
            step = np.linalg.solve(Jm, g)
        except np.linalg.LinAlgError:
            return None
        x = x - step
        g = G(x)
    if np.max(np.abs(g)) > tol or np.max(np.abs(x.imag)) > 1e-8:
        return None
    return float(x[0].real), float(x[1].real), float(np.max(np.abs(g)))


def solve_graph_pair(spec, lam_max, seeds_per_wavelength=4):
    """Zero search for the two-particle determinant pair on the chamber.

    Coarse grid on |Z(k1,k2)|^2 + |Z(k2,k1)|^2 over k1 <= k2 (interval: both
    nonnegative; ring: k1 may be negative), Newton refinement on the 2x2
    complex system, dedup within 1e-8, multiplicity = cluster size.
    """
    Z = _z_system(spec)
    topo = spec.topology
    kmax = np.sqrt(lam_max)
    size = spec.graph.total_length if topo == "ring" else spec.graph.lengths[0]
    step = np.pi / size / seeds_per_wavelength
    lo = -kmax if topo == "ring" else 0.0
    k1g = np.arange(lo, kmax + step, step)
    k2g = np.arange(lo, kmax + step, step)
    K1, K2 = np.meshgrid(k1g, k2g, indexing="ij")
    mask = (K1 <= K2 + 1e-12) & (K1**2 + K2**2 <= lam_max * 1.1)
    objective = np.full(K1.shape, np.inf)
    vals = (np.abs(Z(K1[mask], K2[mask])) ** 2
            + np.abs(Z(K2[mask], K1[mask])) ** 2)
    objective[mask] = vals

    # 8-neighbor local minima on the masked grid
    seeds = []
    n1, n2 = objective.shape
    for i in range(n1):
        for j in range(n2):
            v = objective[i, j]
            if not np.isfinite(v):
                continue
            nb = objective[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            if v <= np.min(nb):
                seeds.append((K1[i, j], K2[i, j]))

    hits = []
    for s1, s2 in seeds:
        out = _newton_z(Z, s1, s2)
        if out is None:
            continue
        k1, k2, res = out
        if topo == "interval":
            k1, k2 = sorted((abs(k1), abs(k2)))
        else:
            k1, k2 = sorted((k1, k2))
        if k1 * k1 + k2 * k2 <= lam_max * (1 + 1e-9):
            hits.append((k1, k2, res))

    hits.sort()
    roots = []
    for k1, k2, res in hits:
        if roots and abs(k1 - roots[-1][0]) < 1e-8 and abs(k2 - roots[-1][1]) < 1e-8:
            roots[-1][2] = min(roots[-1][2], res)
            continue
        roots.append([k1, k2, res])
    out = [BetheRoot(k1=r[0], k2=r[1], lam=r[0] ** 2 + r[1] ** 2,
                     residual=r[2], model="graph") for r in roots
           if abs(r[0]) + abs(r[1]) > 1e-9]
    out.sort(key=lambda r: (r.lam, r.k1))
    return out
