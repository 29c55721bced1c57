"""Volume-normalized norms, mollifiers, and local cell-norm machinery.

All underlined norms divide by the quadrature volume of their own node set
(one cell of volume h^d per node), so constants are reproduced exactly:
``|f| == c`` has every L^p norm equal to c.  The negative-order norm is the
Riesz realization on the zero-trace space: solve with the H^1 Gram operator
and take the induced quadratic form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import Domain, ScalarField

HEAT = "heat"
BUMP = "bump"


@dataclass(frozen=True)
class MollifierSpec:
    """Smoothing kernel: heat kernel at a length scale, or compactly
    supported bump at scale eps (support inside the ball of radius eps/2)."""

    kind: str
    scale: float
    trunc_sd: float = 5.0  # heat kernel truncation, in standard deviations

    def __post_init__(self):
        if self.kind not in (HEAT, BUMP):
            raise ValueError(f"unknown mollifier kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("mollifier scale must be positive")


def heat(scale: float, trunc_sd: float = 5.0) -> MollifierSpec:
    return MollifierSpec(HEAT, scale, trunc_sd)


def bump(eps: float) -> MollifierSpec:
    return MollifierSpec(BUMP, eps)


def heat_kernel_1d(scale: float, h: float, trunc_sd: float = 5.0) -> np.ndarray:
    """Discrete 1-d Gaussian ``exp(-x^2 / (4 scale^2))`` cut at trunc_sd
    standard deviations (std dev = sqrt(2) * scale), normalized to sum 1."""
    sigma = math.sqrt(2.0) * scale
    half = int(math.ceil(trunc_sd * sigma / h))
    x = np.arange(-half, half + 1) * h
    k = np.exp(-(x * x) / (4.0 * scale * scale))
    return k / k.sum()


def bump_kernel(eps: float, h: float, d: int) -> np.ndarray:
    """Discrete compactly supported bump, support strictly inside |x| < eps/2."""
    half = int(math.ceil(eps / (2.0 * h)))
    axes = [np.arange(-half, half + 1) * h for _ in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    r2 = sum(g * g for g in grids) / (eps * eps)
    k = np.zeros_like(r2)
    inside = r2 < 0.25
    k[inside] = np.exp(-1.0 / (0.25 - r2[inside]))
    total = k.sum()
    if total == 0.0:  # kernel narrower than the grid: degenerates to identity
        k[(half,) * d] = 1.0
        total = 1.0
    return k / total


def convolve(f: ScalarField, spec: MollifierSpec) -> ScalarField:
    return ScalarField(f.domain, convolve_array(f.values, f.domain, spec))


def convolve_array(values: np.ndarray, domain: Domain, spec: MollifierSpec) -> np.ndarray:
    """Mollify a node array.

    Periodic grids use exact circular convolution (the truncated kernel is
    periodized onto the torus, so arbitrarily wide heat kernels are fine).
    Dirichlet grids extend the field by zero outside the domain.
    """
    wrap = domain.periodic
    if spec.kind == HEAT:
        k1 = heat_kernel_1d(spec.scale, domain.h, spec.trunc_sd)
        out = values
        for ax in range(domain.d):
            if wrap:
                out = kernels.conv1d_circular(out, k1, ax)
            else:
                out = kernels.conv1d_zeroext(out, k1, ax)
        return out
    ker = bump_kernel(spec.scale, domain.h, domain.d)
    return kernels.conv_dense(values, ker, wrap)


def ell(lam: float, d: int) -> float:
    """Dimension-dependent logarithmic growth scale of the corrector."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must be in (0, 1], got {lam}")
    if d == 2:
        return math.sqrt(math.log1p(1.0 / lam))
    return 1.0


# ---------------------------------------------------------------------------
# underlined Lebesgue / Sobolev norms
# ---------------------------------------------------------------------------

def _subvalues(f: ScalarField, subdomain):
    if subdomain is None:
        return f.values
    vals = f.values[tuple(subdomain)]
    if vals.size == 0:
        raise ValueError("empty subdomain")
    return vals


def norm_lp(f: ScalarField, p: float, subdomain=None) -> float:
    """Volume-normalized L^p norm: |W|^{-1/p} * ||f||_{L^p(W)}."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals = _subvalues(f, subdomain)
    if math.isinf(p):
        return float(np.max(np.abs(vals)))
    return float(np.mean(np.abs(vals) ** p) ** (1.0 / p))


def _diff_axis(arr: np.ndarray, ax: int, periodic: bool, h: float) -> np.ndarray:
    if periodic:
        return (np.roll(arr, -1, axis=ax) - arr) / h
    return np.diff(arr, axis=ax) / h


def _derivative(arr: np.ndarray, beta, periodic: bool, h: float) -> np.ndarray:
    out = arr
    for ax, order in enumerate(beta):
        for _ in range(order):
            out = _diff_axis(out, ax, periodic, h)
    return out


def _rms(arr: np.ndarray) -> float:
    return float(np.sqrt(np.mean(arr * arr)))


def norm_hk(f: ScalarField, k: int, subdomain=None) -> float:
    """Weighted H^k norm: sum over |beta| <= k of
    |W|^{(|beta|-k)/d} * rms of the forward-difference derivative d^beta f.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"only k in {{0, 1, 2}} supported, got {k}")
    dom = f.domain
    vals = _subvalues(f, subdomain)
    vol = vals.size * dom.h ** dom.d
    total = 0.0
    for beta in itertools.product(range(k + 1), repeat=dom.d):
        order = sum(beta)
        if order > k:
            continue
        dv = _derivative(vals, beta, dom.periodic and subdomain is None, dom.h)
        total += vol ** ((order - k) / dom.d) * _rms(dv)
    return total


def norm_h1(f: ScalarField) -> float:
    return norm_hk(f, 1)


def norm_h2(f: ScalarField) -> float:
    return norm_hk(f, 2)


def norm_hneg1(f: ScalarField, tol: float = 1e-12) -> float:
    """Dual norm of the zero-trace H^1 space, by Riesz representation.

    Solves ``(|W|^{-2/d} - Lap) g = f`` on interior nodes and returns
    ``sqrt((h^d / |W|) f . g)``.
    """
    from .operator import SolveFailure, assemble, cg_solve

    dom = f.domain
    if dom.periodic:
        raise ValueError("the dual norm is defined on Dirichlet domains")
    vol = dom.volume
    kappa = vol ** (-2.0 / dom.d)
    gram = assemble(np.eye(dom.d), dom, mu2=kappa)
    rhs = gram.restrict(f.values)
    g, rep = cg_solve(gram, rhs, tol=tol)
    if not rep.converged:
        raise SolveFailure("Riesz solve failed", rep, g)
    val = dom.h ** dom.d / vol * float(rhs @ g)
    return math.sqrt(max(val, 0.0))


# ---------------------------------------------------------------------------
# local cell norms (the localization factor of the mixed-norm inequality)
# ---------------------------------------------------------------------------

def local_cell_norms(values, domain: Domain, eps: float = 1.0, subdomain=None):
    """Per-cell volume-normalized L^2 norms over the eps-cube tiling.

    ``values`` may be a ScalarField or a node array on ``domain``.  Returns
    an array of shape (r/eps,)*d whose entry z is the rms of the field over
    the closed node window of cell ``[z*eps, (z+1)*eps]^d``.  ``eps`` must be
    resolvable by the grid (eps*m integral).
    """
    if isinstance(values, ScalarField):
        values = values.values
    step_f = eps * domain.m
    if abs(step_f - round(step_f)) > 1e-9 or round(step_f) < 1:
        raise ValueError(f"cell size eps={eps} not resolvable at m={domain.m}")
    step = int(round(step_f))
    if subdomain is not None:
        values = values[tuple(subdomain)]
    sq = values * values
    if domain.periodic:
        sq = np.pad(sq, [(0, 1)] * domain.d, mode="wrap")
    win = np.lib.stride_tricks.sliding_window_view(sq, (step + 1,) * domain.d)
    win = win[(slice(None, None, step),) * domain.d]
    mean = win.mean(axis=tuple(range(domain.d, 2 * domain.d)))
    return np.sqrt(mean)
