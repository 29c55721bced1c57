import numpy as np
import pytest

from hetsolve import coefficient as coeff
from hetsolve.grid import DIRICHLET, PERIODIC, gradient, make_domain, ScalarField
from hetsolve.operator import (
    EllipticOperator,
    assemble,
    cg_solve,
    condition_estimate,
    mean_zero_projector,
)


def laplacian_1d_eigs(n):
    k = np.arange(1, n + 1)
    return 2 - 2 * np.cos(k * np.pi / (n + 1))


def test_identity_coefficient_is_five_point_stencil():
    dom = make_domain(2, 2, 2)
    op = assemble(np.eye(2), dom, mu2=0.0)
    dense = op.to_dense() * dom.h**2
    # center row of the 3x3 interior
    assert dense[4, 4] == pytest.approx(4.0)
    row = dense[4]
    off = sorted(row[row != 0.0])
    assert off == pytest.approx([-1.0, -1.0, -1.0, -1.0, 4.0])


def test_mu2_adds_to_diagonal():
    dom = make_domain(2, 2, 2)
    op = assemble(np.eye(2), dom, mu2=9.0)
    diag = op.diagonal()
    assert np.allclose(diag, 9.0 + 4.0 / dom.h**2)


def test_reject_negative_shift():
    dom = make_domain(2, 2, 2)
    with pytest.raises(ValueError):
        assemble(np.eye(2), dom, mu2=-1.0)


def test_matvec_matches_dense_oracle():
    rng = np.random.default_rng(0)
    dom = make_domain(2, 2, 2)  # 3x3 interior
    field = coeff.sample_field(dom, 4, coeff.two_phase(0.5, 1.0, 4.0))
    op = assemble(field, dom, mu2=0.7)
    dense = op.to_dense()
    x = rng.standard_normal(op.n)
    assert np.allclose(op.matvec(x), dense @ x, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("boundary", [DIRICHLET, PERIODIC])
def test_symmetry_random_field(boundary):
    rng = np.random.default_rng(1)
    dom = make_domain(2, 4, 2, boundary)
    field = coeff.sample_field(dom, 9, coeff.two_phase(0.5, 1.0, 4.0))
    op = assemble(field, dom, mu2=0.25)
    x = rng.standard_normal(op.n)
    y = rng.standard_normal(op.n)
    lhs = float(op.matvec(x) @ y)
    rhs = float(x @ op.matvec(y))
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_energy_positivity_with_ellipticity():
    rng = np.random.default_rng(2)
    dom = make_domain(2, 4, 2)
    field = coeff.sample_field(dom, 3, coeff.two_phase(0.5, 1.0, 4.0))
    lam = field.lam
    op = assemble(field, dom, mu2=0.5)
    x = rng.standard_normal(op.n)
    f = ScalarField(dom, op.embed(x))
    g = gradient(f)
    hd = dom.h**dom.d
    energy = float(op.matvec(x) @ x) * hd
    l2 = float(x @ x) * hd
    grad2 = sum(float(np.sum(c * c)) for c in g.components) * hd
    assert energy >= 0.5 * l2 + grad2 / lam - 1e-10


def test_zero_row_sum_away_from_boundary():
    dom = make_domain(2, 4, 2)
    field = coeff.sample_field(dom, 8, coeff.two_phase(0.5, 1.0, 4.0))
    op = assemble(field, dom, mu2=0.0)
    ones = np.ones(dom.shape)
    out = op.apply_full(ones)
    # interior nodes not adjacent to the boundary see a full stencil
    assert np.allclose(out[2:-2, 2:-2], 0.0, atol=1e-12)


def test_cg_identity_one_iteration():
    dom = make_domain(2, 2, 2)
    op = assemble(np.eye(2), dom, mu2=1.0)

    class Identity:
        n = op.n
        domain = dom

        def matvec(self, x):
            return x

        def diagonal(self):
            return np.ones(self.n)

        def restrict(self, v):
            return v

        def embed(self, v):
            return v

    rng = np.random.default_rng(3)
    b = rng.standard_normal(op.n)
    x, rep = cg_solve(Identity(), b, tol=1e-12)
    assert rep.converged and rep.iterations == 1
    assert np.allclose(x, b)


def test_cg_hand_solved_2x2():
    class TwoByTwo:
        n = 2
        domain = None
        mat = np.array([[2.0, 1.0], [1.0, 2.0]])

        def matvec(self, x):
            return self.mat @ x

        def diagonal(self):
            return np.diag(self.mat)

        def restrict(self, v):
            return v

        def embed(self, v):
            return v

    x, rep = cg_solve(TwoByTwo(), np.array([3.0, 3.0]), tol=1e-12)
    assert rep.converged
    assert np.allclose(x, [1.0, 1.0], atol=1e-10)


def test_cg_zero_rhs_zero_iterations():
    dom = make_domain(2, 2, 2)
    op = assemble(np.eye(2), dom, mu2=1.0)
    x, rep = cg_solve(op, np.zeros(op.n), tol=1e-10)
    assert rep.iterations == 0 and rep.converged
    assert np.allclose(x, 0.0)


def test_cg_reports_failure_with_best_iterate():
    dom = make_domain(2, 4, 4)
    field = coeff.sample_field(dom, 5, coeff.two_phase(0.5, 1.0, 4.0))
    op = assemble(field, dom, mu2=0.0)
    rng = np.random.default_rng(4)
    b = rng.standard_normal(op.n)
    x, rep = cg_solve(op, b, tol=1e-12, maxiter=3)
    assert not rep.converged
    assert rep.relative_residual > 1e-12
    assert np.linalg.norm(x) > 0


def test_cg_periodic_mean_zero_projection():
    dom = make_domain(2, 4, 2, PERIODIC)
    field = coeff.sample_field(dom, 6, coeff.two_phase(0.5, 1.0, 4.0))
    op = assemble(field, dom, mu2=0.0)
    rng = np.random.default_rng(5)
    b = rng.standard_normal(op.n)
    proj = mean_zero_projector(op.n)
    x, rep = cg_solve(op, proj(b), tol=1e-10, projector=proj)
    assert rep.converged
    assert abs(x.mean()) < 1e-12
    assert np.linalg.norm(op.matvec(x) - proj(b)) <= 1e-9 * np.linalg.norm(proj(b))


def test_condition_identity():
    class Identity:
        n = 16
        domain = None

        def matvec(self, x):
            return x

        def diagonal(self):
            return np.ones(self.n)

        def restrict(self, v):
            return v

        def embed(self, v):
            return v

    kmin, kmax, rho = condition_estimate(Identity(), power_iters=5)
    assert rho == pytest.approx(1.0, rel=1e-6)


def test_condition_tridiagonal_closed_form():
    # 1-d Dirichlet Laplacian with h=1, realized as a dense operator
    n = 3
    mat = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)

    class Dense:
        domain = None

        def __init__(self, m):
            self.mat = m
            self.n = m.shape[0]

        def matvec(self, x):
            return self.mat @ x

        def diagonal(self):
            return np.diag(self.mat)

        def restrict(self, v):
            return v

        def embed(self, v):
            return v

    kmin, kmax, rho = condition_estimate(Dense(mat), power_iters=100)
    eigs = laplacian_1d_eigs(n)
    assert kmin == pytest.approx(eigs.min(), rel=0.02)
    assert kmax == pytest.approx(eigs.max(), rel=0.02)


def test_condition_shifted_matches_arithmetic():
    dom = make_domain(2, 4, 2)
    field = coeff.sample_field(dom, 12, coeff.two_phase(0.5, 1.0, 4.0))
    lam2 = 0.25**2
    kmin, kmax, _ = condition_estimate(assemble(field, dom, 0.0), power_iters=200)
    _, _, rho_shift = condition_estimate(assemble(field, dom, lam2), power_iters=200)
    predicted = (lam2 + kmax) / (lam2 + kmin)
    assert rho_shift == pytest.approx(predicted, rel=0.05)


def test_constant_matrix_operator_symmetric_and_spd():
    rng = np.random.default_rng(7)
    dom = make_domain(2, 2, 2)
    mat = np.array([[2.0, 0.5], [0.5, 1.0]])
    op = assemble(mat, dom, mu2=0.0)
    dense = op.to_dense()
    assert np.allclose(dense, dense.T, atol=1e-13)
    eigs = np.linalg.eigvalsh(dense)
    assert eigs.min() > 0
    # diagonal() agrees with the dense diagonal
    assert np.allclose(op.diagonal(), np.diag(dense), atol=1e-12)
