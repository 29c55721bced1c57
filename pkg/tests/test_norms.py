import math

import numpy as np
import pytest

from hetsolve import norms
from hetsolve.grid import (
    DIRICHLET,
    PERIODIC,
    ScalarField,
    from_function,
    make_domain,
)
from hetsolve.operator import assemble


def test_lp_norm_of_constant_is_exact():
    dom = make_domain(2, 4, 2)
    f = ScalarField(dom, np.full(dom.shape, 2.5))
    for p in (1, 2, 3, np.inf):
        assert norms.norm_lp(f, p) == pytest.approx(2.5, abs=1e-14)
    sub = (slice(1, 4), slice(2, 5))
    assert norms.norm_lp(f, 2, sub) == pytest.approx(2.5, abs=1e-14)


def test_lp_norm_converges_to_integral():
    # mean of x1^2 over (0, 2)^2 is 4/3
    for m in (4, 8, 16, 32):
        dom = make_domain(2, 2, m)
        f = from_function(dom, lambda x, y: x)
        val = norms.norm_lp(f, 2)
        assert abs(val - math.sqrt(4.0 / 3.0)) <= 2.0 / m


def test_lp_inf_is_max():
    dom = make_domain(2, 2, 2)
    vals = np.zeros(dom.shape)
    vals[2, 3] = -7.0
    assert norms.norm_lp(ScalarField(dom, vals), np.inf) == 7.0


def test_lp_rejects_empty_subdomain():
    dom = make_domain(2, 2, 2)
    f = ScalarField(dom, np.ones(dom.shape))
    with pytest.raises(ValueError):
        norms.norm_lp(f, 2, (slice(1, 1), slice(0, 2)))


def test_h1_of_zero():
    dom = make_domain(2, 2, 2)
    assert norms.norm_hk(ScalarField(dom, np.zeros(dom.shape)), 1) == 0.0


def test_h1_linear_matches_definition():
    # on the torus the quadrature volume is exactly r^d, so the weight of
    # the zeroth-order term is exactly 1/r
    dom = make_domain(2, 4, 4, PERIODIC)
    f = from_function(dom, lambda x, y: np.sin(np.pi * x / 2))
    got = norms.norm_hk(f, 1)
    vol = dom.volume
    expect = vol ** (-0.5) * norms.norm_lp(f, 2)
    for ax in range(2):
        d = (np.roll(f.values, -1, axis=ax) - f.values) / dom.h
        expect += np.sqrt(np.mean(d * d))
    assert got == pytest.approx(expect, rel=1e-14)
    assert vol == pytest.approx(dom.r**2, rel=1e-14)


def test_h1_weight_homogeneity_on_torus():
    # doubling the domain with the same field halves the zeroth-order weight
    f_amp = 3.0
    vals = {}
    for r in (4, 8):
        dom = make_domain(2, r, 2, PERIODIC)
        f = ScalarField(dom, np.full(dom.shape, f_amp))
        vals[r] = norms.norm_hk(f, 1)  # constants: only the zeroth term
    assert vals[8] == pytest.approx(0.5 * vals[4], rel=1e-14)


def test_poincare_constant_uniform_in_r():
    for r in (8, 16, 32):
        dom = make_domain(2, r, 2)
        f = from_function(dom, lambda x, y: np.sin(np.pi * x / r) * np.sin(np.pi * y / r))
        h1 = norms.norm_hk(f, 1)
        grad = 0.0
        for ax in range(2):
            d = np.diff(f.values, axis=ax) / dom.h
            grad += np.sqrt(np.mean(d * d))
        assert h1 <= 2.0 * grad


def test_h2_includes_mixed_term():
    dom = make_domain(2, 2, 8, PERIODIC)
    f = from_function(dom, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    v = norms.norm_hk(f, 2)
    assert v > norms.norm_hk(f, 1) * dom.volume ** (-1 / 2)
    with pytest.raises(ValueError):
        norms.norm_hk(f, 3)


def test_hneg1_zero():
    dom = make_domain(2, 2, 2)
    assert norms.norm_hneg1(ScalarField(dom, np.zeros(dom.shape))) == 0.0


def test_hneg1_duality_bound():
    rng = np.random.default_rng(0)
    dom = make_domain(2, 2, 4)
    f = ScalarField(dom, rng.standard_normal(dom.shape))
    dual = norms.norm_hneg1(f)
    vol = dom.volume
    for _ in range(20):
        g = np.zeros(dom.shape)
        g[1:-1, 1:-1] = rng.standard_normal((dom.shape[0] - 2, dom.shape[1] - 2))
        gf = ScalarField(dom, g)
        # normalize to unit H1 norm (the sum form dominates the Hilbert form)
        gn = norms.norm_hk(gf, 1)
        pair = np.sum(f.values * g) * dom.h**2 / vol / gn
        assert pair <= dual * (1 + 1e-8)


def test_hneg1_dense_oracle():
    rng = np.random.default_rng(1)
    dom = make_domain(2, 2, 2)  # 9 interior nodes
    f = ScalarField(dom, rng.standard_normal(dom.shape))
    vol = dom.volume
    kappa = vol ** (-2.0 / dom.d)
    gram = assemble(np.eye(2), dom, mu2=kappa)
    K = gram.to_dense()
    fi = gram.restrict(f.values)
    expect = math.sqrt(dom.h**2 / vol * float(fi @ np.linalg.solve(K, fi)))
    assert norms.norm_hneg1(f) == pytest.approx(expect, abs=1e-10)


# ---------------------------------------------------------------------------
# mollifiers / convolution
# ---------------------------------------------------------------------------

def test_kernel_mass_one():
    k = norms.heat_kernel_1d(0.5, 0.25)
    assert abs(k.sum() - 1.0) < 1e-10
    b = norms.bump_kernel(1.0, 0.25, 2)
    assert abs(b.sum() - 1.0) < 1e-10


def test_bump_support_radius():
    h = 0.125
    b = norms.bump_kernel(1.0, h, 2)
    half = (b.shape[0] - 1) // 2
    xs = np.arange(-half, half + 1) * h
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    outside = xx**2 + yy**2 >= 0.25
    assert np.all(b[outside] == 0.0)


def test_bump_degenerates_to_delta_at_m2():
    b = norms.bump_kernel(1.0, 0.5, 2)
    assert b.sum() == pytest.approx(1.0)
    assert b.max() == pytest.approx(1.0)  # single active node


def test_convolve_preserves_constants_periodic():
    dom = make_domain(2, 4, 2, PERIODIC)
    f = ScalarField(dom, np.full(dom.shape, 1.3))
    for spec in (norms.heat(0.7), norms.bump(1.0)):
        out = norms.convolve(f, spec)
        assert np.allclose(out.values, 1.3, atol=1e-12)


def test_convolve_preserves_mass_periodic():
    rng = np.random.default_rng(2)
    dom = make_domain(2, 4, 2, PERIODIC)
    f = ScalarField(dom, rng.standard_normal(dom.shape))
    out = norms.convolve(f, norms.heat(0.9))
    assert out.values.sum() * dom.h**2 == pytest.approx(f.values.sum() * dom.h**2, abs=1e-10)


def test_heat_semigroup():
    dom = make_domain(2, 8, 8, PERIODIC)
    f = from_function(dom, lambda x, y: np.sin(2 * np.pi * x / 8) * np.cos(2 * np.pi * y / 8))
    r, s = 0.5, 0.5
    two_step = norms.convolve(norms.convolve(f, norms.heat(r)), norms.heat(s))
    one_step = norms.convolve(f, norms.heat(math.sqrt(r * r + s * s)))
    rel = np.linalg.norm(two_step.values - one_step.values) / np.linalg.norm(one_step.values)
    assert rel <= 1e-3


def test_convolve_wide_heat_kernel_periodizes():
    # scale comparable to the torus: the folded kernel still has mass one
    dom = make_domain(2, 4, 2, PERIODIC)
    rng = np.random.default_rng(3)
    f = ScalarField(dom, rng.standard_normal(dom.shape))
    out = norms.convolve(f, norms.heat(4.0))
    assert np.allclose(out.values, f.values.mean(), atol=1e-3)


def test_convolve_dirichlet_zero_extension():
    dom = make_domain(2, 2, 4)
    f = ScalarField(dom, np.ones(dom.shape))
    out = norms.convolve(f, norms.heat(0.5))
    # zero extension pulls values down near the boundary, not in the center
    assert out.values[4, 4] > out.values[0, 0]
    assert out.values.max() <= 1.0 + 1e-12


def test_ell_values():
    assert norms.ell(0.3, 3) == 1.0
    assert norms.ell(1.0, 2) == pytest.approx(math.sqrt(math.log(2.0)), abs=1e-12)
    lams = [0.5, 0.25, 0.125]
    vals = [norms.ell(l, 2) for l in lams]
    assert vals[0] < vals[1] < vals[2]
    with pytest.raises(ValueError):
        norms.ell(0.0, 2)
    with pytest.raises(ValueError):
        norms.ell(1.5, 2)


# ---------------------------------------------------------------------------
# local cell norms
# ---------------------------------------------------------------------------

def test_local_cell_norms_constant():
    dom = make_domain(2, 4, 2)
    f = ScalarField(dom, np.full(dom.shape, 1.7))
    cells = norms.local_cell_norms(f, dom, eps=1.0)
    assert cells.shape == (4, 4)
    assert np.allclose(cells, 1.7)


def test_local_cell_norm_single_tile_is_global_norm():
    rng = np.random.default_rng(4)
    dom = make_domain(2, 2, 4)
    f = ScalarField(dom, rng.standard_normal(dom.shape))
    cells = norms.local_cell_norms(f, dom, eps=2.0)
    assert cells.shape == (1, 1)
    assert cells[0, 0] == pytest.approx(norms.norm_lp(f, 2), rel=1e-14)


def test_local_cell_norms_match_bruteforce():
    rng = np.random.default_rng(5)
    dom = make_domain(2, 2, 4)
    f = ScalarField(dom, rng.standard_normal(dom.shape))
    cells = norms.local_cell_norms(f, dom, eps=1.0)
    for z0 in range(2):
        for z1 in range(2):
            block = f.values[4 * z0 : 4 * z0 + 5, 4 * z1 : 4 * z1 + 5]
            assert cells[z0, z1] == pytest.approx(np.sqrt(np.mean(block**2)), rel=1e-14)
    assert cells.max() >= norms.norm_lp(f, 2) * 0.999e0 * 0  # max dominates trivially
    assert cells.max() >= np.sqrt(np.mean(f.values**2)) / 2


def test_local_cell_norms_periodic_wraps():
    dom = make_domain(2, 2, 2, PERIODIC)
    rng = np.random.default_rng(6)
    f = ScalarField(dom, rng.standard_normal(dom.shape))
    cells = norms.local_cell_norms(f, dom, eps=1.0)
    block = f.values[np.ix_([2, 3, 0], [2, 3, 0])]
    assert cells[1, 1] == pytest.approx(np.sqrt(np.mean(block**2)), rel=1e-14)


def test_local_cell_norms_unresolvable_eps():
    dom = make_domain(2, 2, 2)
    f = ScalarField(dom, np.ones(dom.shape))
    with pytest.raises(ValueError):
        norms.local_cell_norms(f, dom, eps=0.3)


# ---------------------------------------------------------------------------
# mixed-norm localization inequality (sanity-scale version)
# ---------------------------------------------------------------------------

def test_mixed_norm_inequality_holds_with_moderate_constant():
    rng = np.random.default_rng(7)
    dom = make_domain(2, 4, 4, PERIODIC)
    eps = 1.0
    ratios = []
    for _ in range(20):
        f = ScalarField(dom, rng.standard_normal(dom.shape))
        g = ScalarField(dom, rng.standard_normal(dom.shape))
        gs = norms.convolve(g, norms.bump(eps))
        prod = ScalarField(dom, f.values * gs.values)
        lhs = norms.norm_lp(prod, 2)
        fmax = norms.local_cell_norms(f, dom, eps=eps).max()
        rhs = fmax * norms.norm_lp(g, 2)
        ratios.append(lhs / rhs)
    assert max(ratios) < 3.0
