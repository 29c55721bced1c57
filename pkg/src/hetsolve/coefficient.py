"""Stationary random conductivity fields, piecewise constant per unit cell.

Cell values are a pure function of (seed, cell coordinate) through a
counter-based hash, so sampling is reproducible, order-independent, and
exactly shift-equivariant: translating the cell lattice and re-sampling
gives the translated field.

Supported models:
    two-phase(p, a1, a2)        scalar a1 or a2 per cell, i.i.d. Bernoulli
    uniform-diagonal            each diagonal entry i.i.d. uniform [1/lam, lam]
    layered(axis, values)       deterministic slabs cycling through values
    constant(matrix or scalar)  one symmetric matrix everywhere
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Domain

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    x = (x + _GOLDEN) & _M64
    x ^= x >> np.uint64(30)
    x = (x * _MIX1) & _M64
    x ^= x >> np.uint64(27)
    x = (x * _MIX2) & _M64
    x ^= x >> np.uint64(31)
    return x


def cell_uniform(seed: int, coords, counter: int = 0) -> np.ndarray:
    """Uniform [0,1) variate per lattice cell, a pure function of its arguments.

    ``coords`` is a sequence of integer arrays (broadcastable), one per axis.
    """
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + np.uint64(counter))
        for c in coords:
            ci = np.asarray(c, dtype=np.int64).astype(np.uint64)
            h = _mix(h ^ ci)
        return (h >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


@dataclass(frozen=True)
class FieldModel:
    kind: str  # "two-phase" | "uniform-diagonal" | "layered" | "constant"
    params: dict

    def tag(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}:{inner}" if inner else self.kind


def two_phase(p: float, a1: float, a2: float) -> FieldModel:
    return FieldModel("two-phase", {"p": p, "a1": a1, "a2": a2})


def uniform_diagonal() -> FieldModel:
    return FieldModel("uniform-diagonal", {})


def layered(axis: int, values) -> FieldModel:
    return FieldModel("layered", {"axis": axis, "values": tuple(values)})


def constant(mat) -> FieldModel:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    return FieldModel("constant", {"matrix": tuple(map(tuple, mat))})


@dataclass
class CoefficientField:
    """Symmetric d x d conductivity per unit cell of a domain.

    Stochastic and layered models produce diagonal matrices stored in
    ``diag`` with shape cells + (d,); the constant model stores a full
    symmetric ``matrix`` instead.
    """

    domain: Domain
    seed: int
    model: FieldModel
    lam: float  # ellipticity bound: spectrum within [1/lam, lam]
    diag: np.ndarray | None = None
    matrix: np.ndarray | None = None
    origin: tuple = ()

    @property
    def is_constant(self) -> bool:
        return self.matrix is not None

    @property
    def cells_shape(self) -> tuple:
        n = self.domain.n_cells_axis if not self.domain.periodic else int(round(self.domain.r))
        return (n,) * self.domain.d

    def cell_entry(self, i: int, j: int) -> np.ndarray:
        """Per-cell (i, j) matrix entry as an array over the cell lattice."""
        if self.is_constant:
            return np.full(self.cells_shape, self.matrix[i, j])
        if i == j:
            return self.diag[..., i]
        return np.zeros(self.cells_shape)


def _check_range(values, lam, what):
    lo, hi = 1.0 / lam, lam
    vmin, vmax = np.min(values), np.max(values)
    if vmin < lo - 1e-12 or vmax > hi + 1e-12:
        raise ValueError(
            f"{what} outside ellipticity range [{lo}, {hi}]: found [{vmin}, {vmax}]"
        )


def sample_field(domain: Domain, seed: int, model: FieldModel, lam: float | None = None,
                 origin=None) -> CoefficientField:
    """Sample a coefficient field on the unit cells of ``domain``.

    ``lam`` is the uniform ellipticity constant; when omitted it is derived
    from the model parameters (the tightest admissible bound).  ``origin``
    shifts the cell lattice by an integer vector, which only relabels which
    hash counters are used (stationarity).
    """
    d = domain.d
    if origin is None:
        origin = (0,) * d
    origin = tuple(int(o) for o in origin)
    if domain.periodic:
        ncell = int(round(domain.r))
    else:
        ncell = domain.n_cells_axis
    shape = (ncell,) * d
    coords = np.meshgrid(
        *[np.arange(ncell, dtype=np.int64) + origin[ax] for ax in range(d)],
        indexing="ij",
    )

    kind = model.kind
    if kind == "two-phase":
        p, a1, a2 = model.params["p"], model.params["a1"], model.params["a2"]
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"phase probability p={p} not in [0, 1]")
        lam = lam if lam is not None else max(a1, a2, 1.0 / a1, 1.0 / a2)
        _check_range(np.array([a1, a2]), lam, "two-phase values")
        u = cell_uniform(seed, coords)
        scal = np.where(u < p, a1, a2)
        diag = np.repeat(scal[..., None], d, axis=-1)
    elif kind == "uniform-diagonal":
        if lam is None:
            raise ValueError("uniform-diagonal model needs an explicit lam")
        lo, hi = 1.0 / lam, lam
        diag = np.stack(
            [lo + (hi - lo) * cell_uniform(seed, coords, counter=k + 1) for k in range(d)],
            axis=-1,
        )
    elif kind == "layered":
        axis = int(model.params["axis"])
        values = np.asarray(model.params["values"], dtype=float)
        lam = lam if lam is not None else max(values.max(), 1.0 / values.min())
        _check_range(values, lam, "layer values")
        scal = values[(coords[axis]) % len(values)].astype(float)
        diag = np.repeat(scal[..., None], d, axis=-1)
    elif kind == "constant":
        mat = np.asarray(model.params["matrix"], dtype=float)
        if mat.shape == (1, 1):
            mat = mat[0, 0] * np.eye(d)
        if mat.shape != (d, d):
            raise ValueError(f"constant matrix shape {mat.shape} != ({d}, {d})")
        if not np.allclose(mat, mat.T, atol=1e-14):
            raise ValueError("constant coefficient matrix must be symmetric")
        eig = np.linalg.eigvalsh(mat)
        lam = lam if lam is not None else max(eig.max(), 1.0 / eig.min())
        _check_range(eig, lam, "constant matrix spectrum")
        return CoefficientField(domain, seed, model, float(lam), matrix=mat, origin=origin)
    else:
        raise ValueError(f"unknown model kind {kind!r}")

    if lam < 1.0:
        raise ValueError(f"ellipticity constant lam={lam} must be >= 1")
    _check_range(diag, lam, "sampled entries")
    return CoefficientField(domain, seed, model, float(lam), diag=diag, origin=origin)


# ---------------------------------------------------------------------------
# cell values -> edge conductances / node samples
# ---------------------------------------------------------------------------

def _gather_axis(arr, axis, left, right, weight=0.5):
    return weight * np.take(arr, left, axis=axis) + (1 - weight) * np.take(arr, right, axis=axis)


def _node_cell_indices(n_nodes, m, ncell, periodic):
    """Left/right adjacent cell index per node coordinate along one axis.

    Nodes strictly inside a cell map to it twice; nodes on a cell face map
    to both neighbours (averaged by the caller).  Dirichlet domain-boundary
    nodes have a single inside neighbour.
    """
    j = np.arange(n_nodes)
    cell = j // m
    on_face = (j % m == 0)
    left = np.where(on_face, cell - 1, cell)
    right = np.minimum(cell, ncell - 1)
    if periodic:
        left %= ncell
        right %= ncell
    else:
        left = np.clip(left, 0, ncell - 1)
        right = np.clip(right, 0, ncell - 1)
        # j == 0 face: only cell 0; j == n-1 (x = r) face: only the last cell
        left[0] = 0
    return left, right


def edge_coefficients(field: CoefficientField):
    """Per-axis edge conductance arrays in full node shape.

    Axis-k edges take the a_kk value of the cell containing their midpoint;
    where the midpoint lies on a cell face (possible only transversally) the
    average of the adjacent cells is used.  The trailing slot along the
    edge's own axis on Dirichlet grids is a phantom edge set to zero.
    """
    dom = field.domain
    d, m = dom.d, dom.m
    per = dom.periodic
    if field.is_constant:
        out = []
        for k in range(d):
            c = np.full(dom.shape, field.matrix[k, k])
            if not per:
                sl = [slice(None)] * d
                sl[k] = -1
                c[tuple(sl)] = 0.0
            out.append(c)
        return tuple(out)

    ncell = field.cells_shape[0]
    out = []
    for k in range(d):
        arr = field.diag[..., k]
        for ax in range(d):
            n_nodes = dom.shape[ax]
            if ax == k:
                # midpoint coordinate (j + 1/2) h is never integral: the
                # containing cell along the edge's own axis is j // m
                j = np.arange(n_nodes)
                idx = np.minimum(j // m, ncell - 1)
                if per:
                    idx = (j // m) % ncell
                arr = np.take(arr, idx, axis=ax)
            else:
                left, right = _node_cell_indices(n_nodes, m, ncell, per)
                arr = _gather_axis(arr, ax, left, right)
        c = np.ascontiguousarray(arr)
        if not per:
            sl = [slice(None)] * d
            sl[k] = -1
            c[tuple(sl)] = 0.0
        out.append(c)
    return tuple(out)


def edge_coefficient(field: CoefficientField, axis: int, index) -> float:
    """Conductance of one axis edge, indexed by its lower node."""
    c = edge_coefficients(field)[axis]
    return float(c[tuple(index)])


def edge_coefficients_exact(field: CoefficientField):
    """Edge conductances trimmed to the exact edge shapes (no phantom slot)."""
    ce = edge_coefficients(field)
    if field.domain.periodic:
        return ce
    out = []
    for k, c in enumerate(ce):
        sl = [slice(None)] * field.domain.d
        sl[k] = slice(0, field.domain.shape[k] - 1)
        out.append(c[tuple(sl)])
    return tuple(out)


def node_entry(field: CoefficientField, i: int, j: int) -> np.ndarray:
    """Matrix entry (i, j) sampled at nodes (adjacent cells averaged)."""
    dom = field.domain
    if field.is_constant:
        return np.full(dom.shape, field.matrix[i, j])
    if i != j:
        return np.zeros(dom.shape)
    arr = field.diag[..., i]
    ncell = field.cells_shape[0]
    for ax in range(dom.d):
        left, right = _node_cell_indices(dom.shape[ax], dom.m, ncell, dom.periodic)
        arr = _gather_axis(arr, ax, left, right)
    return arr


# ---------------------------------------------------------------------------
# model spec parsing ("two-phase:p=0.5,a1=1,a2=4" etc.)
# ---------------------------------------------------------------------------

def parse_model(spec: str) -> FieldModel:
    if ":" in spec:
        kind, rest = spec.split(":", 1)
    else:
        kind, rest = spec, ""
    kind = kind.strip()
    kv = {}
    if rest:
        for item in rest.split(","):
            key, val = item.split("=")
            kv[key.strip()] = val.strip()
    if kind == "two-phase":
        return two_phase(float(kv["p"]), float(kv["a1"]), float(kv["a2"]))
    if kind == "uniform-diagonal":
        return uniform_diagonal()
    if kind == "layered":
        values = tuple(float(v) for v in kv["values"].split(":"))
        return layered(int(kv.get("axis", 0)), values)
    if kind == "constant":
        if "c" in kv:
            return constant([[float(kv["c"])]])
        # full symmetric matrix via a11=..,a12=..,a22=..[,a13=..,...]
        d = 3 if any(k.endswith("3") for k in kv) else 2
        mat = np.zeros((d, d))
        for key, val in kv.items():
            i, j = int(key[1]) - 1, int(key[2]) - 1
            mat[i, j] = mat[j, i] = float(val)
        return constant(mat)
    raise ValueError(f"unknown model spec {spec!r}")
