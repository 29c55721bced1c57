"""Symmetric positive (semi-)definite operators ``mu^2 - div(a grad)``.

Operators are applied matrix-free through the stencil kernels; this keeps
memory at O(N) and lets the numba / numpy backends share one code path.
Dirichlet boundaries are handled by elimination: the degree-of-freedom
vector holds interior nodes only, embedded into the full grid with zeros
before each stencil application, so the reduced operator is SPD whenever
``mu^2 > 0`` or the boundary is Dirichlet.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coefficient import CoefficientField, edge_coefficients
from .grid import DIRICHLET, Domain, ScalarField


class SolveFailure(RuntimeError):
    """Raised by callers when a conjugate-gradient solve did not converge."""

    def __init__(self, message, report=None, best=None):
        super().__init__(message)
        self.report = report
        self.best = best


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    wall_time: float
    converged: bool
    variant: str  # "cg" | "pcg-jacobi"


class EllipticOperator:
    """Matrix-free realization of ``f -> mu2*f - div(a grad f)``."""

    def __init__(self, domain: Domain, mu2: float, cedges=None, matrix=None):
        if mu2 < 0:
            raise ValueError(f"mu^2 must be nonnegative, got {mu2}")
        self.domain = domain
        self.mu2 = float(mu2)
        self._cedges = cedges
        self._matrix = matrix
        self._inv_h2 = 1.0 / domain.h ** 2
        self._interior = None
        if domain.boundary == DIRICHLET:
            self._interior = domain.interior_mask()

    # -- degrees of freedom -------------------------------------------------

    @property
    def n(self) -> int:
        return self.domain.n_interior

    @property
    def shape(self):
        return (self.n, self.n)

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Interior DOF vector -> full grid array (zero trace)."""
        if self._interior is None:
            return x.reshape(self.domain.shape)
        full = np.zeros(self.domain.shape)
        full[self._interior] = x
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        if self._interior is None:
            return full.reshape(-1)
        return full[self._interior]

    # -- application ---------------------------------------------------------

    def apply_full(self, full: np.ndarray) -> np.ndarray:
        """Stencil application on the full node grid (zero extension outside).

        Only interior-node outputs are meaningful on Dirichlet grids; the
        boundary rows are never part of the reduced system.
        """
        if self._matrix is not None:
            return kernels.matvec_const(
                full, self._matrix, self.mu2, self._inv_h2, self.domain.periodic
            )
        return kernels.matvec_diag(
            full, self._cedges, self.mu2, self._inv_h2, self.domain.periodic
        )

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.restrict(self.apply_full(self.embed(x)))

    def diagonal(self) -> np.ndarray:
        """Diagonal of the reduced matrix (for Jacobi preconditioning)."""
        dom = self.domain
        per = dom.periodic
        diag = np.full(dom.shape, self.mu2)
        if self._matrix is not None:
            mat = self._matrix
            base = float(np.sum(mat))  # every g_j[p] contributes -u[p]
            diag += self._inv_h2 * base
            for i in range(dom.d):
                if per:
                    diag += self._inv_h2 * mat[i, i]
                else:
                    sl = [slice(None)] * dom.d
                    sl[i] = slice(1, None)
                    diag[tuple(sl)] += self._inv_h2 * mat[i, i]
        else:
            for ax, c in enumerate(self._cedges):
                if per:
                    diag += self._inv_h2 * (c + np.roll(c, 1, axis=ax))
                else:
                    diag += self._inv_h2 * (c + kernels.shift_zero(c, ax, -1))
        return self.restrict(diag)

    def to_dense(self) -> np.ndarray:
        """Dense matrix by application to unit vectors; test-scale only."""
        n = self.n
        if n > 5000:
            raise ValueError(f"refusing to densify an operator with n={n}")
        cols = np.empty((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            cols[:, j] = self.matvec(e)
            e[j] = 0.0
        return cols


def assemble(coeff, domain: Domain, mu2: float = 0.0) -> EllipticOperator:
    """Assemble ``mu2 - div(a grad)`` from a field, matrix, or scalar.

    A :class:`CoefficientField` routes through per-edge conductances; a
    constant symmetric matrix with off-diagonal entries uses the composed
    forward/backward stencil (exactly symmetric either way).
    """
    if mu2 < 0:
        raise ValueError(f"mu^2 must be nonnegative, got {mu2}")
    if isinstance(coeff, CoefficientField):
        if coeff.domain.shape != domain.shape or coeff.domain.boundary != domain.boundary:
            raise ValueError("coefficient field domain does not match")
        if coeff.is_constant and np.any(coeff.matrix != np.diag(np.diag(coeff.matrix))):
            return EllipticOperator(domain, mu2, matrix=coeff.matrix)
        return EllipticOperator(domain, mu2, cedges=edge_coefficients(coeff))
    mat = np.atleast_2d(np.asarray(coeff, dtype=float))
    if mat.shape == (1, 1):
        mat = mat[0, 0] * np.eye(domain.d)
    if mat.shape != (domain.d, domain.d):
        raise ValueError(f"matrix shape {mat.shape} != ({domain.d}, {domain.d})")
    if not np.allclose(mat, mat.T, atol=1e-13):
        raise ValueError("coefficient matrix must be symmetric")
    if np.any(mat != np.diag(np.diag(mat))):
        return EllipticOperator(domain, mu2, matrix=mat)
    # diagonal constant matrices reuse the fast edge-coefficient kernels
    cedges = []
    for k in range(domain.d):
        c = np.full(domain.shape, mat[k, k])
        if domain.boundary == DIRICHLET:
            sl = [slice(None)] * domain.d
            sl[k] = -1
            c[tuple(sl)] = 0.0
        cedges.append(c)
    return EllipticOperator(domain, mu2, cedges=tuple(cedges))


# ---------------------------------------------------------------------------
# conjugate gradient
# ---------------------------------------------------------------------------

def cg_solve(op, rhs, tol: float = 1e-9, maxiter: int | None = None,
             preconditioner: str = "jacobi", projector=None, x0=None):
    """Conjugate gradient for SPD operators; singular-consistent systems are
    handled by passing a ``projector`` that removes the null space.

    Returns ``(x, SolveReport)``; the report carries the best iterate's
    relative residual and ``converged=False`` on failure, with ``x`` the
    best iterate seen.  ``rhs`` may be a ScalarField (solution returned as
    one) or a raw DOF vector.
    """
    as_field = isinstance(rhs, ScalarField)
    b = op.restrict(rhs.values) if as_field else np.asarray(rhs, dtype=float)
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must be in (0, 1), got {tol}")
    if maxiter is None:
        maxiter = max(10 * op.n, 1000)
    variant = "pcg-jacobi" if preconditioner == "jacobi" else "cg"

    t0 = time.perf_counter()
    if projector is not None:
        b = projector(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        x = np.zeros_like(b)
        rep = SolveReport(0, 0.0, time.perf_counter() - t0, True, variant)
        return (_as_output(op, x, as_field), rep)

    inv_diag = None
    if preconditioner == "jacobi":
        dg = op.diagonal()
        if np.any(dg <= 0):
            raise ValueError("operator diagonal is not positive")
        inv_diag = 1.0 / dg

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - op.matvec(x) if x0 is not None else b.copy()
    if projector is not None:
        r = projector(r)
    z = inv_diag * r if inv_diag is not None else r
    if projector is not None and inv_diag is not None:
        z = projector(z)
    p = z.copy()
    rz = float(r @ z)
    best_x, best_res = x.copy(), float(np.linalg.norm(r)) / bnorm
    it = 0
    while it < maxiter:
        res = float(np.linalg.norm(r)) / bnorm
        if res < best_res:
            best_res = res
            best_x = x.copy()
        if res <= tol:
            rep = SolveReport(it, res, time.perf_counter() - t0, True, variant)
            return (_as_output(op, x, as_field), rep)
        ap = op.matvec(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            break  # loss of positive definiteness; bail to failure path
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        if projector is not None:
            r = projector(r)
        z = inv_diag * r if inv_diag is not None else r
        if projector is not None and inv_diag is not None:
            z = projector(z)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    res = float(np.linalg.norm(r)) / bnorm
    if res < best_res:
        best_res, best_x = res, x.copy()
    if best_res <= tol:
        rep = SolveReport(it, best_res, time.perf_counter() - t0, True, variant)
        return (_as_output(op, best_x, as_field), rep)
    rep = SolveReport(it, best_res, time.perf_counter() - t0, False, variant)
    return (_as_output(op, best_x, as_field), rep)


def _as_output(op, x, as_field):
    if as_field:
        return ScalarField(op.domain, op.embed(x))
    return x


def mean_zero_projector(n: int):
    def proj(v):
        return v - v.mean()

    return proj


# ---------------------------------------------------------------------------
# spectral condition number estimation
# ---------------------------------------------------------------------------

def condition_estimate(op, power_iters: int = 200, rng=None, rtol: float = 1e-7):
    """Estimate (kappa_min, kappa_max, rho) of an SPD operator.

    kappa_max comes from a Lanczos eigensolve on the matvec; kappa_min from
    inverse power iteration with inner CG solves.  Inner-solve failures
    surface as :class:`SolveFailure`.
    """
    from scipy.sparse.linalg import LinearOperator, eigsh

    rng = np.random.default_rng(0) if rng is None else rng
    n = op.n
    lin = LinearOperator((n, n), matvec=op.matvec, dtype=float)
    kmax = float(eigsh(lin, k=1, which="LA", tol=1e-9,
                       maxiter=max(5000, 50 * power_iters),
                       return_eigenvectors=False)[0])

    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    rq_prev = None
    kmin = None
    for _ in range(power_iters):
        y, rep = cg_solve(op, x, tol=1e-12, maxiter=50 * n)
        if not rep.converged:
            raise SolveFailure("inner CG failed during inverse iteration", rep, y)
        y /= np.linalg.norm(y)
        rq = float(y @ op.matvec(y))
        x = y
        kmin = rq
        if rq_prev is not None and abs(rq - rq_prev) <= rtol * abs(rq):
            break
        rq_prev = rq
    rho = kmax / kmin
    return kmin, kmax, rho
