"""Two-scale expansion of a homogenized solution, the compensating flux
field, and the cell-max diagnostics entering the expansion error bound.

The expansion of a zero-trace function vbar on the dilated domain is

    w = vbar + sum_k d_k(vbar * zeta) phi_k^{reg},

with zeta the unit-scale bump mollifier and phi_k^{reg} the regularized
correctors, extended periodically from their torus onto the domain.  The
flux field F satisfies div(a grad w - a_eff grad vbar) = div F in the
continuum; its discrete residual is the object of the refinement tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficient import CoefficientField, node_entry
from .grid import (
    Domain,
    ScalarField,
    VectorField,
    divergence,
    edge_to_node,
    gradient,
    node_gradient,
    node_to_edge,
    periodic_extension,
    second_difference,
)
from .homogenization import CorrectorSet, flux_potential_divergence
from .norms import bump, convolve, convolve_array, ell, heat, local_cell_norms, norm_hk, norm_hneg1


@dataclass
class TwoScaleReport:
    """Both sides of the expansion error bound, term by term."""

    lam: float
    mu: float
    lhs: float          # H1 distance between the oscillating solve and w
    rhs_det: float      # deterministic H2 term
    rhs_x1: float       # X1 group
    rhs_x2: float       # X2 group
    rhs_y1: float       # Y1 group (boundary band)
    x1: float
    x2: float
    y1: float
    vbar_h1: float
    vbar_h2: float

    @property
    def rhs_total(self) -> float:
        return self.rhs_det + self.rhs_x1 + self.rhs_x2 + self.rhs_y1

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs_total if self.rhs_total > 0 else 0.0

    def finite(self) -> bool:
        vals = [self.lhs, self.rhs_det, self.rhs_x1, self.rhs_x2, self.rhs_y1,
                self.x1, self.x2, self.y1]
        return all(np.isfinite(v) and v >= 0 for v in vals)


def _check_compatible(dom: Domain, cs: CorrectorSet):
    if cs.torus.m != dom.m:
        raise ValueError("resolution mismatch between domain grid and corrector grid")
    if cs.phi_reg is None:
        raise ValueError("correctors are not regularized; call regularize_correctors")


def _on_domain(arr: np.ndarray, cs: CorrectorSet, dom: Domain) -> np.ndarray:
    return periodic_extension(arr, cs.torus, dom)


def tile_field(field: CoefficientField, target: Domain) -> CoefficientField:
    """Periodic extension of the cell values onto a congruent domain."""
    if field.is_constant:
        return CoefficientField(target, field.seed, field.model, field.lam,
                                matrix=field.matrix, origin=field.origin)
    src_cells = field.diag.shape[0]
    ncell = target.n_cells_axis if not target.periodic else int(round(target.r))
    diag = field.diag
    for ax in range(target.d):
        idx = np.arange(ncell) % src_cells
        diag = np.take(diag, idx, axis=ax)
    return CoefficientField(target, field.seed, field.model, field.lam,
                            diag=diag, origin=field.origin)


def expand(vbar: ScalarField, cs: CorrectorSet) -> ScalarField:
    """Two-scale expansion of vbar with the regularized correctors."""
    dom = vbar.domain
    _check_compatible(dom, cs)
    vz = convolve(vbar, bump(1.0))
    dvz = node_gradient(vz)
    w = vbar.values.copy()
    for k in range(dom.d):
        w += dvz.components[k] * _on_domain(cs.phi_reg[k], cs, dom)
    return ScalarField(dom, w)


# ---------------------------------------------------------------------------
# heat-smoothed corrector derivatives (on the torus)
# ---------------------------------------------------------------------------

def smoothed_gradient_phi(cs: CorrectorSet, k: int):
    """Components of (grad phi_k) * K_{1/lam}, node-centered on the torus."""
    spec = heat(1.0 / cs.lam)
    phi = ScalarField(cs.torus, cs.phi[k])
    g = edge_to_node(gradient(phi))
    return tuple(convolve_array(c, cs.torus, spec) for c in g.components)


def smoothed_gradient_s(cs: CorrectorSet, k: int, i: int, j: int):
    """Components of (grad S_k,ij) * K_{1/lam} on the torus."""
    spec = heat(1.0 / cs.lam)
    g = node_gradient(ScalarField(cs.torus, cs.s_entry(k, i, j)))
    return tuple(convolve_array(c, cs.torus, spec) for c in g.components)


def smoothed_potential_divergence(cs: CorrectorSet, k: int):
    """Components of (div S_k) * K_{1/lam} on the torus (edge-centered)."""
    spec = heat(1.0 / cs.lam)
    div_s = flux_potential_divergence(cs, k)
    return tuple(convolve_array(c, cs.torus, spec) for c in div_s)


def smoothed_gradient_phi_edges(cs: CorrectorSet, k: int):
    """Edge-centered components of (grad phi_k) * K_{1/lam} on the torus."""
    spec = heat(1.0 / cs.lam)
    g = gradient(ScalarField(cs.torus, cs.phi[k]))
    return tuple(convolve_array(c, cs.torus, spec) for c in g.components)


# ---------------------------------------------------------------------------
# flux field of the expansion identity
# ---------------------------------------------------------------------------

def _avg_nodes_to_edge_torus(arr: np.ndarray, ax: int) -> np.ndarray:
    return 0.5 * (arr + np.roll(arr, -1, axis=ax))


def _avg_plaq_to_edge_torus(arr: np.ndarray, ax_j: int) -> np.ndarray:
    # (i,j)-plaquette values averaged along j land on axis-i edges
    return 0.5 * (arr + np.roll(arr, 1, axis=ax_j))


def _edge_slice(arr: np.ndarray, ax: int, dom: Domain) -> np.ndarray:
    if dom.periodic:
        return arr
    sl = [slice(None)] * dom.d
    sl[ax] = slice(0, dom.shape[ax] - 1)
    return arr[tuple(sl)]


def _avg_nodes_to_edge(arr: np.ndarray, ax: int, dom: Domain) -> np.ndarray:
    if dom.periodic:
        return _avg_nodes_to_edge_torus(arr, ax)
    lo = [slice(None)] * dom.d
    hi = [slice(None)] * dom.d
    lo[ax] = slice(0, dom.shape[ax] - 1)
    hi[ax] = slice(1, dom.shape[ax])
    return 0.5 * (arr[tuple(lo)] + arr[tuple(hi)])


def assemble_flux_field(vbar: ScalarField, cs: CorrectorSet,
                        field_r: CoefficientField | None = None) -> VectorField:
    """Edge-centered field F with div(a grad w - a_eff grad vbar) = div F.

    Three groups: the unmollified remainder of grad vbar, the second
    derivatives of the mollified vbar paired with (a phi^reg - S^reg), and
    the heat-smoothed corrector derivatives paired with grad(vbar * zeta).
    Rough factors (the coefficient, the corrector derivatives, the
    potential divergence) keep their exact edge placements; only smooth
    mollified factors are averaged across staggered positions.
    """
    from .coefficient import edge_coefficients_exact

    dom = vbar.domain
    _check_compatible(dom, cs)
    d = dom.d
    a_eff = cs.a_eff
    if field_r is None:
        field_r = tile_field(cs.field, dom)
    ce = edge_coefficients_exact(field_r)
    vz = convolve(vbar, bump(1.0))
    rough = ScalarField(dom, vbar.values - vz.values)
    d_rough_edge = gradient(rough)
    d_rough_node = node_gradient(rough)
    dvz = node_gradient(vz)
    second = {
        (j, k): second_difference(vz, j, k) for j in range(d) for k in range(j, d)
    }

    div_s_sm_all = [smoothed_potential_divergence(cs, k) for k in range(d)]
    grad_phi_sm_all = [smoothed_gradient_phi_edges(cs, k) for k in range(d)]

    # torus-side corrector objects, extended to the domain's edge lattices
    def on_edges(arr_torus, ax):
        return _edge_slice(periodic_extension(arr_torus, cs.torus, dom), ax, dom)

    comps = []
    for i in range(d):
        acc = (ce[i] - a_eff[i, i]) * d_rough_edge.components[i]
        for j in range(d):
            if j == i:
                continue
            a_ij = _avg_nodes_to_edge(_on_domain(node_entry(cs.field, i, j), cs, dom), i, dom)
            acc += (a_ij - a_eff[i, j]) * _avg_nodes_to_edge(d_rough_node.components[j], i, dom)
        for k in range(d):
            phi_e = on_edges(_avg_nodes_to_edge_torus(cs.phi_reg[k], i), i)
            div_s_sm = on_edges(div_s_sm_all[k][i], i)
            grad_phi_sm_i = on_edges(grad_phi_sm_all[k][i], i)
            p_k = _avg_nodes_to_edge(dvz.components[k], i, dom)
            for j in range(d):
                dd = _avg_nodes_to_edge(second[(min(j, k), max(j, k))], i, dom)
                if j == i:
                    acc += ce[i] * phi_e * dd
                else:
                    s_e = on_edges(
                        _avg_plaq_to_edge_torus(cs.s_entry(k, i, j, regularized=True), j), i
                    )
                    a_ij = _avg_nodes_to_edge(
                        _on_domain(node_entry(cs.field, i, j), cs, dom), i, dom
                    )
                    # axis-j edge values -> nodes -> axis-i edges (smooth)
                    sm_node = 0.5 * (
                        grad_phi_sm_all[k][j] + np.roll(grad_phi_sm_all[k][j], 1, axis=j)
                    )
                    sm_j = on_edges(_avg_nodes_to_edge_torus(sm_node, i), i)
                    acc += (a_ij * phi_e - s_e) * dd
                    acc += -a_ij * sm_j * p_k
            acc += (div_s_sm - ce[i] * grad_phi_sm_i) * p_k
        comps.append(acc)
    return VectorField(dom, tuple(comps), layout="edge")


def flux_identity_residual(vbar: ScalarField, cs: CorrectorSet,
                           field_r: CoefficientField):
    """Residual of the discrete flux identity, plus the L2 size of F.

    Returns ``(dual_norm, f_l2)`` with the residual measured in the
    zero-trace dual norm and F in the volume-normalized L2 norm (its upper
    bound for the dual norm of its divergence).
    """
    from .coefficient import edge_coefficients_exact

    dom = vbar.domain
    w = expand(vbar, cs)
    ce = edge_coefficients_exact(field_r)
    gw = gradient(w)
    flux_w = [ce[j] * gw.components[j] for j in range(dom.d)]
    ng = node_gradient(vbar)
    flux_bar_node = VectorField(
        dom,
        tuple(sum(cs.a_eff[i, j] * ng.components[j] for j in range(dom.d))
              for i in range(dom.d)),
        layout="node",
    )
    flux_bar = node_to_edge(flux_bar_node)
    f_edge = assemble_flux_field(vbar, cs, field_r)
    comps = tuple(
        flux_w[i] - flux_bar.components[i] - f_edge.components[i] for i in range(dom.d)
    )
    resid = divergence(VectorField(dom, comps, layout="edge"))
    f_l2 = float(np.sqrt(sum(np.mean(c * c) for c in f_edge.components)))
    return norm_hneg1(resid), f_l2


# ---------------------------------------------------------------------------
# cell-max diagnostics
# ---------------------------------------------------------------------------

def cell_max_correctors(cs: CorrectorSet, dom: Domain) -> float:
    """Sum over directions of the max over unit cells of the regularized
    corrector plus flux-potential local norms (reported as X1)."""
    _check_compatible(dom, cs)
    total = 0.0
    for k in range(dom.d):
        per_cell = local_cell_norms(_on_domain(cs.phi_reg[k], cs, dom), dom, eps=1.0)
        for i in range(dom.d):
            for j in range(dom.d):
                if i == j:
                    continue
                arr = _on_domain(cs.s_entry(k, i, j, regularized=True), cs, dom)
                per_cell = per_cell + local_cell_norms(arr, dom, eps=1.0)
        total += float(per_cell.max())
    return total


def cell_max_smoothed_gradients(cs: CorrectorSet, dom: Domain) -> float:
    """Same shape as X1 with the heat-smoothed gradients (reported as X2)."""
    _check_compatible(dom, cs)
    total = 0.0
    for k in range(dom.d):
        comps = [_on_domain(c, cs, dom) for c in smoothed_gradient_phi(cs, k)]
        mag = np.sqrt(sum(c * c for c in comps))
        per_cell = local_cell_norms(mag, dom, eps=1.0)
        for i in range(dom.d):
            for j in range(dom.d):
                if i == j:
                    continue
                sc = [_on_domain(c, cs, dom) for c in smoothed_gradient_s(cs, k, i, j)]
                smag = np.sqrt(sum(c * c for c in sc))
                per_cell = per_cell + local_cell_norms(smag, dom, eps=1.0)
        total += float(per_cell.max())
    return total


def boundary_band_cells(dom: Domain, width: float) -> np.ndarray:
    """Mask of unit cells within ``width`` of the domain boundary."""
    ncell = dom.n_cells_axis
    idx = np.arange(ncell, dtype=float)
    dist_axis = np.minimum(idx, dom.r - idx - 1.0)
    grids = np.meshgrid(*[dist_axis] * dom.d, indexing="ij")
    dist = np.minimum.reduce(grids)
    return dist < width


def cell_max_boundary_band(cs: CorrectorSet, dom: Domain, lam: float) -> float:
    """Corrector-only cell max restricted to the boundary band of width
    2*ell(lam) (reported as Y1)."""
    _check_compatible(dom, cs)
    band = boundary_band_cells(dom, 2.0 * ell(lam, dom.d))
    if not band.any():
        raise ValueError("empty boundary band")
    total = 0.0
    for k in range(dom.d):
        per_cell = local_cell_norms(_on_domain(cs.phi_reg[k], cs, dom), dom, eps=1.0)
        total += float(per_cell[band].max())
    return total


# ---------------------------------------------------------------------------
# the expansion error bound, term by term
# ---------------------------------------------------------------------------

def homogenized_rhs(vbar: ScalarField, a_eff: np.ndarray, mu: float) -> ScalarField:
    """Node field (mu^2 - div(a_eff grad)) vbar."""
    dom = vbar.domain
    ng = node_gradient(vbar)
    flux_node = VectorField(
        dom,
        tuple(sum(a_eff[i, j] * ng.components[j] for j in range(dom.d))
              for i in range(dom.d)),
        layout="node",
    )
    div_flux = divergence(node_to_edge(flux_node))
    return ScalarField(dom, mu * mu * vbar.values - div_flux.values)


def evaluate_bound(v: ScalarField, vbar: ScalarField, cs: CorrectorSet,
                   mu: float) -> TwoScaleReport:
    """Evaluate the expansion error and each group of its upper bound.

    ``v`` must solve ``(mu^2 - div(a grad)) v = (mu^2 - div(a_eff grad)) vbar``
    with zero trace (to CG tolerance).
    """
    dom = vbar.domain
    _check_compatible(dom, cs)
    lam = cs.lam
    w = expand(vbar, cs)
    diff = ScalarField(dom, v.values - w.values)
    lhs = norm_hk(diff, 1)
    h1 = norm_hk(vbar, 1)
    h2 = norm_hk(vbar, 2)
    x1 = cell_max_correctors(cs, dom)
    x2 = cell_max_smoothed_gradients(cs, dom)
    y1 = cell_max_boundary_band(cs, dom, lam)
    el = ell(lam, dom.d)
    cross = math.sqrt(h1 * h2)
    rhs_det = h2
    rhs_x1 = (h2 + mu * h1) * x1
    rhs_x2 = (math.sqrt(el) * cross + h1) * x2
    rhs_y1 = (math.sqrt(el) * (mu + 1.0 / dom.r + 1.0 / el) * cross + h2) * y1
    return TwoScaleReport(
        lam=lam, mu=mu, lhs=lhs, rhs_det=rhs_det, rhs_x1=rhs_x1, rhs_x2=rhs_x2,
        rhs_y1=rhs_y1, x1=x1, x2=x2, y1=y1, vbar_h1=h1, vbar_h2=h2,
    )
