"""Discrete rectangular domains, grid fields, and difference operators.

The computational domain is the dilated cube ``(0, r)^d`` discretized with
spacing ``h = 1/m``.  Scalars live on nodes; fluxes live on edges, with the
forward-difference gradient and its exact negative adjoint as divergence.
Zero-trace (homogeneous Dirichlet) fields are extended by zero outside the
domain wherever a stencil needs a value beyond the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

DIRICHLET = "dirichlet"
PERIODIC = "periodic"

_RESOLUTION_TOL = 1e-9


@dataclass(frozen=True)
class Domain:
    """Dilated cube ``(0, r)^d`` with ``m`` grid cells per unit length."""

    d: int
    r: float
    m: int
    boundary: str
    shape: tuple  # nodes per axis

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def n_cells_axis(self) -> int:
        """Unit cells per axis (coefficient resolution, not grid resolution)."""
        return int(np.ceil(self.r - 1e-12))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        """Quadrature volume: one cell of volume h^d per node."""
        return self.n_nodes * self.h ** self.d

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        if not self.periodic:
            for ax in range(self.d):
                sl = [slice(None)] * self.d
                sl[ax] = 0
                mask[tuple(sl)] = False
                sl[ax] = -1
                mask[tuple(sl)] = False
        return mask

    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    @property
    def n_interior(self) -> int:
        if self.periodic:
            return self.n_nodes
        return int(np.prod([n - 2 for n in self.shape]))

    def axis_coords(self, ax: int) -> np.ndarray:
        return np.arange(self.shape[ax]) * self.h


def make_domain(d: int, r: float, m: int, boundary: str = DIRICHLET) -> Domain:
    """Build a domain, rejecting inconsistent resolutions.

    ``r * m`` must be integral (within 1e-9 in units of grid cells): the
    grid must land exactly on the domain boundary.
    """
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if r < 2:
        raise ValueError(f"dilation r must be >= 2, got {r}")
    if m < 1 or int(m) != m:
        raise ValueError(f"cells-per-unit m must be a positive integer, got {m}")
    if boundary not in (DIRICHLET, PERIODIC):
        raise ValueError(f"unknown boundary kind {boundary!r}")
    rm = r * m
    if abs(rm - round(rm)) > _RESOLUTION_TOL:
        raise ValueError(f"r*m = {rm} is not integral: inconsistent resolution")
    n_axis = int(round(rm))
    if boundary == DIRICHLET:
        n_axis += 1
    dom = Domain(d=d, r=float(r), m=int(m), boundary=boundary, shape=(n_axis,) * d)
    if boundary == DIRICHLET:
        # reproduce r from h*(nodes-1) to one part in 1e12
        assert abs(dom.h * (n_axis - 1) - r) <= 1e-12 * max(r, 1.0)
    return dom


@dataclass
class ScalarField:
    """One real value per node of a domain."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise ValueError(
                f"values shape {self.values.shape} != domain shape {self.domain.shape}"
            )

    def copy(self) -> "ScalarField":
        return ScalarField(self.domain, self.values.copy())

    def is_zero_trace(self) -> bool:
        if self.domain.periodic:
            return True
        return bool(np.all(self.values[self.domain.boundary_mask()] == 0.0))


@dataclass
class VectorField:
    """d arrays per domain, either edge-centered or node-centered.

    Edge layout: component k is indexed by the lower node of each axis-k
    edge, with shape[k] reduced by one on Dirichlet grids (periodic edges
    wrap, so shapes match the node grid).
    """

    domain: Domain
    components: tuple
    layout: str = "edge"  # "edge" | "node"

    def __post_init__(self):
        self.components = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(self.components) != self.domain.d:
            raise ValueError("need one component per dimension")
        for k, c in enumerate(self.components):
            expect = list(self.domain.shape)
            if self.layout == "edge" and not self.domain.periodic:
                expect[k] -= 1
            if c.shape != tuple(expect):
                raise ValueError(
                    f"component {k} has shape {c.shape}, expected {tuple(expect)}"
                )


def zeros(domain: Domain) -> ScalarField:
    return ScalarField(domain, np.zeros(domain.shape))


def from_function(domain: Domain, fn) -> ScalarField:
    """Sample ``fn(x1, ..., xd)`` (vectorized over coordinate arrays)."""
    grids = np.meshgrid(*[domain.axis_coords(ax) for ax in range(domain.d)], indexing="ij")
    return ScalarField(domain, np.asarray(fn(*grids), dtype=float))


# ---------------------------------------------------------------------------
# difference operators
# ---------------------------------------------------------------------------

def gradient(f: ScalarField) -> VectorField:
    """Forward-difference gradient on edges: ((f(x+h e_k) - f(x)) / h)_k."""
    dom = f.domain
    comps = []
    for ax in range(dom.d):
        if dom.periodic:
            comps.append((np.roll(f.values, -1, axis=ax) - f.values) / dom.h)
        else:
            comps.append(np.diff(f.values, axis=ax) / dom.h)
    return VectorField(dom, tuple(comps), layout="edge")


def divergence(q: VectorField) -> ScalarField:
    """Backward-difference divergence, the exact negative adjoint of gradient.

    Edges outside the grid are treated as carrying zero flux, which makes
    ``<grad f, q> = -<f, div q>`` hold exactly for every f (not only
    zero-trace ones) on Dirichlet grids.
    """
    if q.layout != "edge":
        raise ValueError("divergence expects an edge-centered field")
    dom = q.domain
    out = np.zeros(dom.shape)
    for ax, c in enumerate(q.components):
        if dom.periodic:
            out += (c - np.roll(c, 1, axis=ax)) / dom.h
        else:
            ext = np.zeros(dom.shape)
            sl_head = [slice(None)] * dom.d
            sl_head[ax] = slice(0, dom.shape[ax] - 1)
            ext[tuple(sl_head)] = c
            out += (ext - _shift(ext, ax, -1, periodic=False)) / dom.h
    return ScalarField(dom, out)


def grid_inner(a: np.ndarray, b: np.ndarray, h: float, d: int) -> float:
    """Grid inner product with cell volume h^d per sample."""
    return float(np.sum(a * b)) * h ** d


def vector_inner(p: VectorField, q: VectorField) -> float:
    h, d = p.domain.h, p.domain.d
    return sum(grid_inner(a, b, h, d) for a, b in zip(p.components, q.components))


# ---------------------------------------------------------------------------
# node-centered derivative helpers (zero extension / wrap)
# ---------------------------------------------------------------------------

def _shift(a: np.ndarray, axis: int, step: int, periodic: bool) -> np.ndarray:
    """out[i] = a[i + step]; wraps when periodic, zero-fills otherwise."""
    if periodic:
        return np.roll(a, -step, axis=axis)
    from .kernels import shift_zero

    return shift_zero(a, axis, step)


def node_gradient(f: ScalarField) -> VectorField:
    """Gradient averaged back to nodes: mean of the two adjacent edge slopes.

    Zero-trace convention at Dirichlet boundaries: the field is extended by
    zero, so the one-sided slopes at the boundary see a ghost value 0.
    """
    dom = f.domain
    per = dom.periodic
    comps = []
    for ax in range(dom.d):
        fwd = _shift(f.values, ax, 1, per) - f.values
        bwd = f.values - _shift(f.values, ax, -1, per)
        comps.append((fwd + bwd) / (2.0 * dom.h))
    return VectorField(dom, tuple(comps), layout="node")


def second_difference(f: ScalarField, ax_i: int, ax_j: int) -> np.ndarray:
    """Node-centered second difference d_i d_j with zero extension / wrap."""
    dom = f.domain
    per = dom.periodic
    u = f.values
    if ax_i == ax_j:
        return (_shift(u, ax_i, 1, per) - 2.0 * u + _shift(u, ax_i, -1, per)) / dom.h ** 2
    upp = _shift(_shift(u, ax_i, 1, per), ax_j, 1, per)
    upm = _shift(_shift(u, ax_i, 1, per), ax_j, -1, per)
    ump = _shift(_shift(u, ax_i, -1, per), ax_j, 1, per)
    umm = _shift(_shift(u, ax_i, -1, per), ax_j, -1, per)
    return (upp - upm - ump + umm) / (4.0 * dom.h ** 2)


def edge_to_node(q: VectorField) -> VectorField:
    """Average each edge component onto nodes (zero flux outside the grid)."""
    dom = q.domain
    per = dom.periodic
    comps = []
    for ax, c in enumerate(q.components):
        if per:
            full = c
        else:
            full = np.zeros(dom.shape)
            sl = [slice(None)] * dom.d
            sl[ax] = slice(0, dom.shape[ax] - 1)
            full[tuple(sl)] = c
        comps.append(0.5 * (full + _shift(full, ax, -1, per)))
    return VectorField(dom, tuple(comps), layout="node")


def node_to_edge(p: VectorField) -> VectorField:
    """Average each node component onto the edges of its own axis."""
    if p.layout != "node":
        raise ValueError("node_to_edge expects a node-centered field")
    dom = p.domain
    comps = []
    for ax, c in enumerate(p.components):
        if dom.periodic:
            comps.append(0.5 * (c + np.roll(c, -1, axis=ax)))
        else:
            lo = [slice(None)] * dom.d
            hi = [slice(None)] * dom.d
            lo[ax] = slice(0, dom.shape[ax] - 1)
            hi[ax] = slice(1, dom.shape[ax])
            comps.append(0.5 * (c[tuple(lo)] + c[tuple(hi)]))
    return VectorField(dom, tuple(comps), layout="edge")


def periodic_extension(values: np.ndarray, torus: Domain, target: Domain) -> np.ndarray:
    """Sample a torus node array onto a (possibly larger) congruent grid."""
    if torus.m != target.m:
        raise ValueError("resolution mismatch between torus and target grid")
    idx = [np.arange(target.shape[ax]) % torus.shape[ax] for ax in range(target.d)]
    return values[np.ix_(*idx)]
