"""Periodic cell problems: first-order correctors, the effective matrix,
skew flux potentials, and their heat-kernel regularizations.

Everything here lives on a torus of side L (the numerical surrogate for the
whole-space problem): correctors are the mean-zero solutions of

    -div(a (e_k + grad phi_k)) = 0,

the effective matrix column k is the torus average of the flux
``a (e_k + grad phi_k)``, and the flux potential S_k is the skew matrix
field with ``div S_k = a(e_k + grad phi_k) - a_eff e_k``, gauge-fixed by a
Poisson equation per entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .coefficient import CoefficientField, FieldModel, edge_coefficients, sample_field
from .grid import (
    Domain,
    ScalarField,
    VectorField,
    divergence,
    edge_to_node,
    gradient,
    make_domain,
)
from .norms import convolve_array, heat
from .operator import SolveFailure, assemble, cg_solve, mean_zero_projector


@dataclass
class CorrectorSet:
    """Correctors and derived objects for one coefficient sample.

    ``phi[k]`` and the flux potentials ``s[(k, i, j)]`` (stored for i < j;
    use :meth:`s_entry` for the full skew matrix) are node arrays on the
    torus.  ``phi_reg`` / ``s_reg`` hold the heat-regularized versions at
    scale 1/lam once :func:`regularize_correctors` has run.
    """

    field: CoefficientField
    torus: Domain
    phi: tuple
    a_eff: np.ndarray
    s: dict
    asymmetry: float
    lam: float | None = None
    phi_reg: tuple | None = None
    s_reg: dict | None = None
    cg_iterations: dict = dc_field(default_factory=dict)

    def s_entry(self, k: int, i: int, j: int, regularized: bool = False) -> np.ndarray:
        table = self.s_reg if regularized else self.s
        if i == j:
            return np.zeros(self.torus.shape)
        if i < j:
            return table[(k, i, j)]
        return -table[(k, j, i)]

    @property
    def d(self) -> int:
        return self.torus.d


def solve_corrector(field: CoefficientField, k: int, tol: float = 1e-9):
    """Mean-zero corrector phi_k on the torus; returns (ScalarField, report)."""
    dom = field.domain
    if not dom.periodic:
        raise ValueError("correctors are solved on a periodic domain")
    if field.is_constant:
        # e_k . x is already a-harmonic
        return ScalarField(dom, np.zeros(dom.shape)), None
    ce = edge_coefficients(field)
    comps = [np.zeros(dom.shape) for _ in range(dom.d)]
    comps[k] = ce[k]
    rhs = divergence(VectorField(dom, tuple(comps), layout="edge")).values.ravel()
    op = assemble(field, dom, mu2=0.0)
    proj = mean_zero_projector(op.n)
    x, rep = cg_solve(op, proj(rhs), tol=tol, projector=proj)
    if not rep.converged:
        raise SolveFailure(f"corrector solve k={k} did not converge", rep, x)
    return ScalarField(dom, op.embed(x)), rep


def corrector_flux(field: CoefficientField, phi: ScalarField, k: int) -> VectorField:
    """Edge flux a (e_k + grad phi_k)."""
    ce = edge_coefficients(field)
    g = gradient(phi)
    comps = []
    for j in range(field.domain.d):
        base = g.components[j] + (1.0 if j == k else 0.0)
        comps.append(ce[j] * base)
    return VectorField(field.domain, tuple(comps), layout="edge")


def effective_matrix(field: CoefficientField, phis) -> tuple:
    """Torus-averaged flux matrix, symmetrized; returns (a_eff, asymmetry).

    Column k is the average of ``a (e_k + grad phi_k)``.  Asymmetry above
    1e-4 signals an unconverged corrector and raises.
    """
    d = field.domain.d
    if field.is_constant:
        return field.matrix.copy(), 0.0
    raw = np.empty((d, d))
    for k in range(d):
        q = corrector_flux(field, phis[k], k)
        for i in range(d):
            raw[i, k] = float(np.mean(q.components[i]))
    asym = float(np.max(np.abs(raw - raw.T)))
    if asym > 1e-4:
        raise SolveFailure(f"effective matrix asymmetry {asym:.3e}: corrector unconverged")
    return 0.5 * (raw + raw.T), asym


def _forward_diff(arr: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (np.roll(arr, -1, axis=ax) - arr) / h


def _backward_diff(arr: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (arr - np.roll(arr, 1, axis=ax)) / h


def solve_flux_corrector(field: CoefficientField, phis, a_eff, k: int, tol: float = 1e-9):
    """Gauge-fixed skew potential for direction k: entries (i, j), i < j.

    Solves ``Lap S_ij = d_j g_i - d_i g_j`` on the torus.  The flux surplus
    g is edge-centered and the entry S_ij sits at the (i, j)-plaquette
    center (index p holds position p + (e_i + e_j)/2): the right-hand side
    is assembled from forward differences of the edge arrays and the
    backward-difference row divergence of S then reproduces g exactly (the
    staggered placements make div S - g discretely harmonic, hence zero).
    Returns ({(i, j): array}, reports).
    """
    dom = field.domain
    d = dom.d
    h = dom.h
    g_edge = corrector_flux(field, phis[k], k)
    g = tuple(g_edge.components[i] - a_eff[i, k] for i in range(d))
    lap = assemble(np.eye(d), dom, mu2=0.0)
    proj = mean_zero_projector(lap.n)
    out, reports = {}, {}
    for i in range(d):
        for j in range(i + 1, d):
            rhs = _forward_diff(g[i], j, h) - _forward_diff(g[j], i, h)
            # our operator realizes -Lap, so negate the right-hand side
            x, rep = cg_solve(lap, proj(-rhs.ravel()), tol=tol, projector=proj)
            if not rep.converged:
                raise SolveFailure(f"gauge solve (k={k},i={i},j={j}) failed", rep, x)
            out[(i, j)] = lap.embed(x)
            reports[(i, j)] = rep
    return out, reports


def flux_surplus(cs: CorrectorSet, k: int):
    """Edge-centered g_k = a(e_k + grad phi_k) - a_eff e_k on the torus."""
    dom = cs.torus
    g_edge = corrector_flux(cs.field, ScalarField(dom, cs.phi[k]), k)
    return tuple(g_edge.components[i] - cs.a_eff[i, k] for i in range(dom.d))


def flux_potential_divergence(cs: CorrectorSet, k: int, regularized: bool = False):
    """Row divergence (div S_k)_i = sum_j d_j S_k,ij, landing on axis-i edges.

    Backward differences move each plaquette entry onto the i-edge lattice,
    matching the placement of the flux surplus."""
    dom = cs.torus
    out = []
    for i in range(dom.d):
        acc = np.zeros(dom.shape)
        for j in range(dom.d):
            if i == j:
                continue
            acc += _backward_diff(cs.s_entry(k, i, j, regularized=regularized), j, dom.h)
        out.append(acc)
    return out


def solve_correctors(field: CoefficientField, tol: float = 1e-9) -> CorrectorSet:
    """All correctors, the effective matrix, and the flux potentials."""
    dom = field.domain
    d = dom.d
    phis, iters = [], {}
    for k in range(d):
        phi, rep = solve_corrector(field, k, tol=tol)
        phis.append(phi)
        iters[("phi", k)] = 0 if rep is None else rep.iterations
    a_eff, asym = effective_matrix(field, phis)
    s = {}
    for k in range(d):
        if field.is_constant:
            for i in range(d):
                for j in range(i + 1, d):
                    s[(k, i, j)] = np.zeros(dom.shape)
            continue
        sk, reps = solve_flux_corrector(field, phis, a_eff, k, tol=tol)
        for (i, j), arr in sk.items():
            s[(k, i, j)] = arr
            iters[("s", k, i, j)] = reps[(i, j)].iterations
    return CorrectorSet(
        field=field,
        torus=dom,
        phi=tuple(p.values for p in phis),
        a_eff=a_eff,
        s=s,
        asymmetry=asym,
        cg_iterations=iters,
    )


def regularize_correctors(cs: CorrectorSet, lam: float) -> CorrectorSet:
    """Subtract the heat-smoothed part at scale 1/lam: phi - phi * K_{1/lam}.

    Requires ``lam`` in (1/L, 1/2); the kernel is periodized onto the torus,
    so wide kernels (small lam at moderate L) remain exact circular
    convolutions.
    """
    L = cs.torus.r
    if not (1.0 / L < lam < 0.5):
        raise ValueError(f"lam={lam} outside (1/{L}, 1/2)")
    spec = heat(1.0 / lam)
    phi_reg = tuple(p - convolve_array(p, cs.torus, spec) for p in cs.phi)
    s_reg = {key: arr - convolve_array(arr, cs.torus, spec) for key, arr in cs.s.items()}
    return CorrectorSet(
        field=cs.field,
        torus=cs.torus,
        phi=cs.phi,
        a_eff=cs.a_eff,
        s=cs.s,
        asymmetry=cs.asymmetry,
        lam=lam,
        phi_reg=phi_reg,
        s_reg=s_reg,
        cg_iterations=cs.cg_iterations,
    )


def build_correctors(model: FieldModel, L: float, m: int, seed: int, d: int = 2,
                     lam: float | None = None, tol: float = 1e-9) -> CorrectorSet:
    """Sample a torus coefficient field and solve the full corrector set."""
    torus = make_domain(d, L, m, boundary="periodic")
    fld = sample_field(torus, seed, model)
    cs = solve_correctors(fld, tol=tol)
    if lam is not None:
        cs = regularize_correctors(cs, lam)
    return cs


def analytic_effective_matrix(model: FieldModel, d: int):
    """Closed-form effective matrix where one exists, else None.

    Layered media: harmonic mean across the layers, arithmetic mean along
    them.  Self-dual two-phase media at p = 1/2 in d = 2: sqrt(a1*a2) I.
    """
    if model.kind == "constant":
        mat = np.asarray(model.params["matrix"], dtype=float)
        if mat.shape == (1, 1):
            return mat[0, 0] * np.eye(d)
        return mat
    if model.kind == "layered":
        values = np.asarray(model.params["values"], dtype=float)
        axis = int(model.params["axis"])
        harm = len(values) / np.sum(1.0 / values)
        arith = float(np.mean(values))
        diag = np.full(d, arith)
        diag[axis] = harm
        return np.diag(diag)
    if model.kind == "two-phase" and d == 2 and abs(model.params["p"] - 0.5) < 1e-12:
        return np.sqrt(model.params["a1"] * model.params["a2"]) * np.eye(d)
    return None
