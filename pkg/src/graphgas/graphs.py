"""Compact metric graphs and self-adjoint Laplacian boundary conditions.

A metric graph is a finite combinatorial graph whose edge ``e`` carries a
length ``l_e > 0`` and the coordinate chart ``[0, l_e]``; endpoint 0 maps to
the edge's tail vertex and endpoint ``l_e`` to its head vertex.  Boundary
values of a function ``psi`` on the graph are collected in the fixed order

    psi_bv = (psi_1(0), ..., psi_E(0), psi_1(l_1), ..., psi_E(l_E)),

and the matching derivative vector uses inward derivatives,

    psi'_bv = (psi_1'(0), ..., psi_E'(0), -psi_1'(l_1), ..., -psi_E'(l_E)).

A self-adjoint Laplacian is selected by an orthogonal projector ``P`` and a
self-adjoint map ``L`` with ``Pperp L Pperp = L`` on the 2E-dimensional
boundary space, through the condition

    (P + L) psi_bv + Pperp psi'_bv = 0.

Sign conventions used throughout the package:

* ``Robin(values)`` at a vertex puts ``P_v = 0`` and ``L_v = diag(values)``;
  a positive value is attractive (a lone Robin end on a long edge binds a
  state near energy ``-value**2``).
* ``Delta(c)`` is the delta potential of strength ``c`` at the vertex:
  continuity plus ``sum of inward derivatives = c * psi(v)``.  Negative ``c``
  is attractive and yields the positive L-eigenvalue ``-c/d`` on the
  constant vector, via ``L_v = -(c/d**2) * J`` (``J`` all ones, ``d`` the
  vertex degree).  ``Delta(0)`` is Neumann-Kirchhoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ValidationError

MATRIX_TOL = 1e-12


def _as_readonly(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MetricGraph:
    """Compact metric graph: edge list with strictly positive lengths.

    ``edges[e] = (tail, head)`` with dense integer vertex ids.  Loops
    (tail == head) are allowed and contribute two boundary values to their
    vertex.
    """

    edges: tuple
    lengths: tuple

    def __init__(self, edges, lengths):
        edges = tuple((int(u), int(v)) for u, v in edges)
        lengths = tuple(float(l) for l in lengths)
        if len(edges) != len(lengths):
            raise ValidationError("edges and lengths differ in count")
        if not edges:
            raise ValidationError("graph needs at least one edge")
        for l in lengths:
            if not (l > 0.0 and np.isfinite(l)):
                raise ValidationError(f"edge length must be positive and finite, got {l}")
        n = 1 + max(max(u, v) for u, v in edges)
        seen = {u for u, v in edges} | {v for u, v in edges}
        for v in range(n):
            if v not in seen:
                raise ValidationError(f"vertex {v} has no incident edge end")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "lengths", lengths)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_vertices(self):
        return 1 + max(max(u, v) for u, v in self.edges)

    @property
    def total_length(self):
        return float(sum(self.lengths))

    def scaled(self, eta):
        """Stretch every edge length by the factor ``eta > 0``."""
        if not eta > 0:
            raise ValidationError(f"scale factor must be positive, got {eta}")
        return MetricGraph(self.edges, tuple(eta * l for l in self.lengths))

    def vertex_ends(self, v):
        """Global boundary indices of the edge ends meeting vertex ``v``.

        End (e, 0) maps to index e, end (e, l_e) to index E + e; the order is
        deterministic (ascending edge index, tail end first).
        """
        E = self.num_edges
        out = []
        for e, (u, w) in enumerate(self.edges):
            if u == v:
                out.append(e)
            if w == v:
                out.append(E + e)
        return out

    def degree(self, v):
        return len(self.vertex_ends(v))


def scale_graph(graph, eta):
    return graph.scaled(eta)


def total_length(graph):
    return graph.total_length


# ---------------------------------------------------------------------------
# vertex condition specs


@dataclass(frozen=True)
class Dirichlet:
    pass


@dataclass(frozen=True)
class Kirchhoff:
    pass


@dataclass(frozen=True)
class Delta:
    strength: float


@dataclass(frozen=True)
class Robin:
    """Decoupled Robin ends: one real L-value per incident edge end."""

    values: tuple

    def __init__(self, values):
        if np.isscalar(values):
            values = (float(values),)
        object.__setattr__(self, "values", tuple(float(v) for v in values))


@dataclass(frozen=True)
class Custom:
    """Explicit (P_v, L_v) block on the vertex boundary space C^{d_v}."""

    P: np.ndarray = field(compare=False)
    L: np.ndarray = field(compare=False)

    def __init__(self, P, L):
        object.__setattr__(self, "P", _as_readonly(P))
        object.__setattr__(self, "L", _as_readonly(L))


VertexConditionSpec = Union[Dirichlet, Kirchhoff, Delta, Robin, Custom]


def _check_projector_pair(P, L, tol, where=""):
    if P.shape != L.shape or P.shape[0] != P.shape[1]:
        raise ValidationError(f"{where}P and L must be square matrices of equal size")
    herm = np.max(np.abs(P - P.conj().T))
    idem = np.max(np.abs(P @ P - P))
    if herm > tol or idem > tol:
        raise ValidationError(
            f"{where}P is not an orthogonal projector "
            f"(hermiticity defect {herm:.2e}, idempotency defect {idem:.2e})"
        )
    if np.max(np.abs(L - L.conj().T)) > tol:
        raise ValidationError(f"{where}L is not self-adjoint")
    Pperp = np.eye(P.shape[0]) - P
    if np.max(np.abs(Pperp @ L @ Pperp - L)) > tol:
        raise ValidationError(f"{where}L must satisfy Pperp L Pperp = L")


@dataclass(frozen=True)
class BoundaryConditions:
    """Global (P, L) pair on the boundary space C^{2E} in psi_bv order."""

    P: np.ndarray = field(compare=False)
    L: np.ndarray = field(compare=False)

    def __init__(self, P, L, tol=MATRIX_TOL):
        P = _as_readonly(P)
        L = _as_readonly(L)
        _check_projector_pair(P, L, tol)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "L", L)

    @property
    def dim(self):
        return self.P.shape[0]

    @property
    def Pperp(self):
        return np.eye(self.dim) - self.P

    def ker_P_basis(self, tol=1e-8):
        """Orthonormal basis of ker P (columns)."""
        w, V = np.linalg.eigh(self.P)
        return V[:, w < 0.5]

    def L_on_ker(self):
        """L restricted to ker P, in the ker_P_basis coordinates."""
        N = self.ker_P_basis()
        return N.conj().T @ self.L @ N

    def L_eigenvalues(self):
        """Eigenvalues of L on ker P (real, ascending); empty for P = 1."""
        Lk = self.L_on_ker()
        if Lk.shape[0] == 0:
            return np.empty(0)
        return np.linalg.eigvalsh(Lk)


def _vertex_blocks(spec, d):
    """(P_v, L_v) for one vertex of degree d."""
    if isinstance(spec, Dirichlet):
        return np.eye(d, dtype=complex), np.zeros((d, d), dtype=complex)
    if isinstance(spec, Kirchhoff):
        J = np.ones((d, d), dtype=complex)
        return np.eye(d) - J / d, np.zeros((d, d), dtype=complex)
    if isinstance(spec, Delta):
        # continuity + sum of inward derivatives = c * psi(v); reduces to
        # Kirchhoff at c = 0, and to Robin(-c) at degree 1
        J = np.ones((d, d), dtype=complex)
        c = spec.strength
        return np.eye(d) - J / d, -(c / d**2) * J
    if isinstance(spec, Robin):
        if len(spec.values) != d:
            raise ValidationError(
                f"Robin spec carries {len(spec.values)} values for a degree-{d} vertex"
            )
        return np.zeros((d, d), dtype=complex), np.diag(spec.values).astype(complex)
    if isinstance(spec, Custom):
        if spec.P.shape != (d, d):
            raise ValidationError(
                f"Custom block is {spec.P.shape} but the vertex has degree {d}"
            )
        _check_projector_pair(spec.P, spec.L, MATRIX_TOL, where="Custom block: ")
        return spec.P.copy(), spec.L.copy()
    raise ValidationError(f"unknown vertex condition spec {spec!r}")


def assemble_conditions(graph, specs):
    """Build the global (P, L) from per-vertex condition specs.

    ``specs`` is a sequence or mapping indexed by vertex id; every vertex must
    have a spec.  The per-vertex blocks are placed by the vertex_ends index
    map, so the result is block diagonal up to the global boundary-value
    permutation.
    """
    nv = graph.num_vertices
    if isinstance(specs, Mapping):
        spec_of = dict(specs)
    else:
        spec_of = dict(enumerate(specs))
    missing = [v for v in range(nv) if v not in spec_of]
    if missing:
        raise ValidationError(f"vertices without a condition spec: {missing}")

    dim = 2 * graph.num_edges
    P = np.zeros((dim, dim), dtype=complex)
    L = np.zeros((dim, dim), dtype=complex)
    for v in range(nv):
        ends = graph.vertex_ends(v)
        Pv, Lv = _vertex_blocks(spec_of[v], len(ends))
        idx = np.ix_(ends, ends)
        P[idx] = Pv
        L[idx] = Lv
    return BoundaryConditions(P, L)
