"""The three-solve iteration and its contraction measurement.

One round, starting from a guess v of the solution of
``-div(a grad u) = f`` with boundary data g:

    (lam^2 - div(a grad)) u0 = f + div(a grad v)        high-frequency part
    -div(a_eff grad) ubar    = lam^2 u0                 homogenized sweep
    (lam^2 - div(a grad)) ut = (lam^2 - div(a_eff grad)) ubar
    v_next = v + u0 + ut

All three solves have zero Dirichlet data, so the update lives in the
zero-trace space and the boundary values of v are preserved.  The
contraction factor of a round is the H1 error ratio against a tight
reference solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .coefficient import CoefficientField
from .grid import Domain, ScalarField, gradient, make_domain
from .norms import norm_hk, norm_lp
from .operator import SolveFailure, assemble, cg_solve

REFERENCE_TOL = 1e-10


class AlreadyConverged(ValueError):
    pass


@dataclass
class RoundRecord:
    round: int
    err_before: float       # H1 error of v entering the round
    err_after: float        # H1 error of v_next
    contraction: float      # err_after / err_before
    cg_iterations: tuple    # (u0 solve, ubar solve, ut solve)
    grad_u0: float          # L2 norms entering the energy inequalities
    u0_l2: float
    grad_ubar: float
    grad_err_before: float


@dataclass
class IterationState:
    domain: Domain
    lam: float
    tol: float
    reference: ScalarField
    v: ScalarField
    records: list = dc_field(default_factory=list)
    stopped_early: bool = False

    @property
    def errors(self):
        return [rec.err_after for rec in self.records]

    @property
    def contractions(self):
        return [rec.contraction for rec in self.records]


def _boundary_lift(domain: Domain, g) -> np.ndarray:
    """Full-grid array with the boundary data of g and zero interior."""
    lift = np.zeros(domain.shape)
    if np.isscalar(g):
        if g != 0.0:
            lift[domain.boundary_mask()] = g
        return lift
    gvals = g.values if isinstance(g, ScalarField) else np.asarray(g, dtype=float)
    mask = domain.boundary_mask()
    lift[mask] = gvals[mask]
    return lift


def solve_dirichlet(coeff, f, g, domain: Domain, tol: float = 1e-9, mu2: float = 0.0):
    """Solve ``(mu2 - div(a grad)) u = f`` with boundary data g.

    ``coeff`` is a CoefficientField or a constant matrix; f is a ScalarField
    or node array; g is a scalar or full-grid values (only its boundary
    entries are read).  Returns (ScalarField, SolveReport).
    """
    fvals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    op = assemble(coeff, domain, mu2=mu2)
    lift = _boundary_lift(domain, g)
    rhs = op.restrict(fvals) - op.restrict(op.apply_full(lift))
    z, rep = cg_solve(op, rhs, tol=tol)
    if not rep.converged:
        raise SolveFailure("Dirichlet solve did not converge", rep, z)
    return ScalarField(domain, lift + op.embed(z)), rep


def measure_contraction(v: ScalarField, v_next: ScalarField, u: ScalarField) -> float:
    """H1 error ratio of one round; raises AlreadyConverged on a null start."""
    dom = v.domain
    err_before = norm_hk(ScalarField(dom, v.values - u.values), 1)
    if err_before <= 1e-12 * norm_hk(u, 1):
        raise AlreadyConverged("initial error below measurement floor")
    err_after = norm_hk(ScalarField(dom, v_next.values - u.values), 1)
    return err_after / err_before


def iterate_once(v: ScalarField, f, field: CoefficientField, a_eff, lam: float,
                 tol: float = 1e-9):
    """One round of the three-solve update; returns (v_next, info dict).

    Any CG failure aborts the round with SolveFailure.
    """
    dom = v.domain
    if not (1.0 / dom.r < lam < 0.5):
        raise ValueError(f"lam={lam} outside (1/{dom.r}, 1/2)")
    a_eff = np.asarray(a_eff, dtype=float)
    eig = np.linalg.eigvalsh(a_eff)
    if eig.min() <= 0:
        raise ValueError("effective matrix must be positive definite")
    fvals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    lam2 = lam * lam

    op_a0 = assemble(field, dom, mu2=0.0)
    op_al = assemble(field, dom, mu2=lam2)
    op_b0 = assemble(a_eff, dom, mu2=0.0)
    op_bl = assemble(a_eff, dom, mu2=lam2)

    rhs1 = op_a0.restrict(fvals) - op_a0.restrict(op_a0.apply_full(v.values))
    u0, rep1 = cg_solve(op_al, rhs1, tol=tol)
    if not rep1.converged:
        raise SolveFailure("high-frequency solve failed", rep1, u0)

    ubar, rep2 = cg_solve(op_b0, lam2 * u0, tol=tol)
    if not rep2.converged:
        raise SolveFailure("homogenized solve failed", rep2, ubar)

    rhs3 = op_bl.matvec(ubar)
    ut, rep3 = cg_solve(op_al, rhs3, tol=tol)
    if not rep3.converged:
        raise SolveFailure("reconstruction solve failed", rep3, ut)

    v_next = ScalarField(dom, v.values + op_al.embed(u0 + ut))

    u0_field = ScalarField(dom, op_al.embed(u0))
    ubar_field = ScalarField(dom, op_b0.embed(ubar))
    info = {
        "cg_iterations": (rep1.iterations, rep2.iterations, rep3.iterations),
        "grad_u0": _grad_l2(u0_field),
        "u0_l2": norm_lp(u0_field, 2),
        "grad_ubar": _grad_l2(ubar_field),
        "ubar": ubar_field,
        "u0": u0_field,
    }
    return v_next, info


def _grad_l2(f: ScalarField) -> float:
    g = gradient(f)
    return float(np.sqrt(sum(np.mean(c * c) for c in g.components)))


def initial_guess(kind: str, field: CoefficientField, a_eff, f, g, domain: Domain,
                  tol: float, rng=None) -> ScalarField:
    """Initializer for the iteration: homogenized solve, boundary lift, or
    boundary lift plus white noise."""
    if kind == "hom":
        v0, _ = solve_dirichlet(a_eff, f, g, domain, tol=tol)
        return v0
    lift = _boundary_lift(domain, g)
    if kind == "zero":
        return ScalarField(domain, lift)
    if kind == "random":
        rng = np.random.default_rng(0) if rng is None else rng
        noise = np.zeros(domain.shape)
        noise[domain.interior_mask()] = rng.standard_normal(domain.n_interior)
        return ScalarField(domain, lift + noise)
    raise ValueError(f"unknown init kind {kind!r}")


def run(field: CoefficientField, a_eff, f, g, lam: float, rounds: int,
        tol: float = 1e-9, init: str = "hom", rng=None,
        reference: ScalarField | None = None) -> IterationState:
    """Iterate the three-solve update, recording errors and contractions.

    Stops early once the H1 error falls below ``100 * tol`` relative to the
    reference solution (solved here at tolerance 1e-10 unless provided).
    """
    if rounds < 1:
        raise ValueError("need at least one round")
    dom = field.domain
    if reference is None:
        reference, _ = solve_dirichlet(field, f, g, dom, tol=REFERENCE_TOL)
    u_h1 = norm_hk(reference, 1)
    v = initial_guess(init, field, a_eff, f, g, dom, tol, rng=rng)
    state = IterationState(domain=dom, lam=lam, tol=tol, reference=reference, v=v)
    for rnd in range(1, rounds + 1):
        err_before = norm_hk(ScalarField(dom, v.values - reference.values), 1)
        if err_before <= 100.0 * tol * max(u_h1, 1e-300):
            state.stopped_early = True
            break
        gerr = _grad_l2(ScalarField(dom, v.values - reference.values))
        v_next, info = iterate_once(v, f, field, a_eff, lam, tol=tol)
        err_after = norm_hk(ScalarField(dom, v_next.values - reference.values), 1)
        state.records.append(
            RoundRecord(
                round=rnd,
                err_before=err_before,
                err_after=err_after,
                contraction=err_after / err_before,
                cg_iterations=info["cg_iterations"],
                grad_u0=info["grad_u0"],
                u0_l2=info["u0_l2"],
                grad_ubar=info["grad_ubar"],
                grad_err_before=gerr,
            )
        )
        v = v_next
    state.v = v
    return state


def energy_inequality_slack(rec: RoundRecord, lam: float, ellipticity: float):
    """Left-minus-right of the discrete energy inequalities of one round.

    Returns (slack_grad_u0, slack_lam_u0, slack_grad_ubar); nonpositive
    values mean the inequality held:
        |grad u0|    <= L |grad(v - u)|
        lam |u0|     <= L |grad(v - u)|
        |grad ubar|  <= L^2 (|grad(v - u)| + |grad u0|)
    """
    bound = ellipticity * rec.grad_err_before
    s1 = rec.grad_u0 - bound
    s2 = lam * rec.u0_l2 - bound
    s3 = rec.grad_ubar - ellipticity**2 * (rec.grad_err_before + rec.grad_u0)
    return s1, s2, s3
