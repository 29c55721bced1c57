"""Hot numeric kernels: stencil operator application and grid convolutions.

Every dispatcher here has two implementations producing the same numbers:
a numba ``@njit`` loop kernel and a vectorized numpy/scipy path.  The active
one is chosen per call via :func:`hetsolve._backend.numba_enabled`.

Conventions shared with the rest of the package:

* scalar grids are C-ordered ndarrays, one value per node;
* edge arrays for axis ``k`` have the full node shape; on Dirichlet grids
  the trailing slot along ``k`` is a phantom edge (coefficient 0) so the
  stencil sees a zero extension outside the domain;
* all difference quotients carry the factor ``1/h**2`` through ``inv_h2``.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._backend import njit, numba_enabled


# ---------------------------------------------------------------------------
# shifted views with zero fill (numpy path helpers)
# ---------------------------------------------------------------------------

def shift_zero(a: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Return ``out[i] = a[i + step]`` along ``axis`` with zero fill."""
    out = np.zeros_like(a)
    if step == 0:
        out[...] = a
        return out
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step > 0:
        src[axis] = slice(step, None)
        dst[axis] = slice(None, -step)
    else:
        src[axis] = slice(None, step)
        dst[axis] = slice(-step, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


# ---------------------------------------------------------------------------
# variable (diagonal) coefficient stencil:  out = mu2*u - div(c * grad u)
# ---------------------------------------------------------------------------

def _matvec_diag_np(u, cedges, mu2, inv_h2, periodic):
    out = mu2 * u
    for ax, c in enumerate(cedges):
        if periodic:
            q = c * (np.roll(u, -1, axis=ax) - u)
            out -= inv_h2 * (q - np.roll(q, 1, axis=ax))
        else:
            q = c * (shift_zero(u, ax, 1) - u)
            out -= inv_h2 * (q - shift_zero(q, ax, -1))
    return out


@njit(cache=True)
def _matvec_diag_dir_2d(u, c0, c1, mu2, inv_h2):
    n0, n1 = u.shape
    out = np.empty_like(u)
    for i in range(n0):
        for j in range(n1):
            v = u[i, j]
            acc = 0.0
            if i + 1 < n0:
                acc += c0[i, j] * (v - u[i + 1, j])
            if i > 0:
                acc += c0[i - 1, j] * (v - u[i - 1, j])
            if j + 1 < n1:
                acc += c1[i, j] * (v - u[i, j + 1])
            if j > 0:
                acc += c1[i, j - 1] * (v - u[i, j - 1])
            out[i, j] = mu2 * v + inv_h2 * acc
    return out


@njit(cache=True)
def _matvec_diag_per_2d(u, c0, c1, mu2, inv_h2):
    n0, n1 = u.shape
    out = np.empty_like(u)
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j > 0 else n1 - 1
            v = u[i, j]
            acc = c0[i, j] * (v - u[ip, j]) + c0[im, j] * (v - u[im, j])
            acc += c1[i, j] * (v - u[i, jp]) + c1[i, jm] * (v - u[i, jm])
            out[i, j] = mu2 * v + inv_h2 * acc
    return out


@njit(cache=True)
def _matvec_diag_dir_3d(u, c0, c1, c2, mu2, inv_h2):
    n0, n1, n2 = u.shape
    out = np.empty_like(u)
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                v = u[i, j, k]
                acc = 0.0
                if i + 1 < n0:
                    acc += c0[i, j, k] * (v - u[i + 1, j, k])
                if i > 0:
                    acc += c0[i - 1, j, k] * (v - u[i - 1, j, k])
                if j + 1 < n1:
                    acc += c1[i, j, k] * (v - u[i, j + 1, k])
                if j > 0:
                    acc += c1[i, j - 1, k] * (v - u[i, j - 1, k])
                if k + 1 < n2:
                    acc += c2[i, j, k] * (v - u[i, j, k + 1])
                if k > 0:
                    acc += c2[i, j, k - 1] * (v - u[i, j, k - 1])
                out[i, j, k] = mu2 * v + inv_h2 * acc
    return out


@njit(cache=True)
def _matvec_diag_per_3d(u, c0, c1, c2, mu2, inv_h2):
    n0, n1, n2 = u.shape
    out = np.empty_like(u)
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j > 0 else n1 - 1
            for k in range(n2):
                kp = k + 1 if k + 1 < n2 else 0
                km = k - 1 if k > 0 else n2 - 1
                v = u[i, j, k]
                acc = c0[i, j, k] * (v - u[ip, j, k]) + c0[im, j, k] * (v - u[im, j, k])
                acc += c1[i, j, k] * (v - u[i, jp, k]) + c1[i, jm, k] * (v - u[i, jm, k])
                acc += c2[i, j, k] * (v - u[i, j, kp]) + c2[i, j, km] * (v - u[i, j, km])
                out[i, j, k] = mu2 * v + inv_h2 * acc
    return out


def matvec_diag(u, cedges, mu2, inv_h2, periodic):
    """Apply ``mu2 - div(c grad)`` with per-edge diagonal coefficients."""
    if numba_enabled():
        if u.ndim == 2:
            fn = _matvec_diag_per_2d if periodic else _matvec_diag_dir_2d
            return fn(u, cedges[0], cedges[1], mu2, inv_h2)
        if u.ndim == 3:
            fn = _matvec_diag_per_3d if periodic else _matvec_diag_dir_3d
            return fn(u, cedges[0], cedges[1], cedges[2], mu2, inv_h2)
    return _matvec_diag_np(u, cedges, mu2, inv_h2, periodic)


# ---------------------------------------------------------------------------
# constant full-matrix coefficient:  out = mu2*u - div(A grad u)
#
# Mixed derivatives use the forward/backward pair on the zero-extended grid,
# which keeps the operator exactly symmetric.  This path is only hit for
# constant matrices with off-diagonal entries (effective-matrix solves), so a
# single vectorized implementation serves both backends.
# ---------------------------------------------------------------------------

def matvec_const(u, mat, mu2, inv_h2, periodic):
    d = u.ndim
    if periodic:
        grads = [np.roll(u, -1, axis=ax) - u for ax in range(d)]
    else:
        grads = [shift_zero(u, ax, 1) - u for ax in range(d)]
    out = mu2 * u
    for i in range(d):
        flux = mat[i, 0] * grads[0]
        for j in range(1, d):
            flux = flux + mat[i, j] * grads[j]
        if periodic:
            out += inv_h2 * (np.roll(flux, 1, axis=i) - flux)
        else:
            out += inv_h2 * (shift_zero(flux, i, -1) - flux)
    return out


# ---------------------------------------------------------------------------
# separable 1-d convolutions
# ---------------------------------------------------------------------------

@njit(cache=True)
def _conv1d_circ_lines(lines, kc):
    nlines, n = lines.shape
    out = np.empty_like(lines)
    for r in range(nlines):
        for i in range(n):
            s = 0.0
            for t in range(n):
                j = i - t
                if j < 0:
                    j += n
                s += kc[t] * lines[r, j]
            out[r, i] = s
    return out


@njit(cache=True)
def _conv1d_zero_lines(lines, k):
    nlines, n = lines.shape
    half = (k.shape[0] - 1) // 2
    out = np.empty_like(lines)
    for r in range(nlines):
        for i in range(n):
            lo = i - (n - 1)
            if lo < -half:
                lo = -half
            hi = i if i < half else half
            s = 0.0
            for t in range(lo, hi + 1):
                s += k[half + t] * lines[r, i - t]
            out[r, i] = s
    return out


def fold_kernel(kernel: np.ndarray, n: int) -> np.ndarray:
    """Periodize a centered odd-length kernel onto a circle of ``n`` nodes."""
    half = (kernel.shape[0] - 1) // 2
    kc = np.zeros(n)
    for t in range(-half, half + 1):
        kc[t % n] += kernel[half + t]
    return kc


def _apply_lines(values, axis, fn, *args):
    moved = np.moveaxis(values, axis, -1)
    shape = moved.shape
    lines = np.ascontiguousarray(moved).reshape(-1, shape[-1])
    out = fn(lines, *args)
    return np.moveaxis(out.reshape(shape), -1, axis)


def conv1d_circular(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Circular convolution along one axis; the kernel is periodized first."""
    n = values.shape[axis]
    kc = fold_kernel(kernel, n)
    if numba_enabled():
        return _apply_lines(values, axis, _conv1d_circ_lines, kc)
    spec = np.fft.rfft(kc)
    fhat = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = spec.shape[0]
    return np.fft.irfft(fhat * spec.reshape(shape), n=n, axis=axis)


def conv1d_zeroext(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Convolution along one axis with the field extended by zero."""
    if numba_enabled():
        return _apply_lines(values, axis, _conv1d_zero_lines, kernel)
    return ndimage.correlate1d(values, kernel, axis=axis, mode="constant", cval=0.0)


# ---------------------------------------------------------------------------
# dense (non-separable) small-kernel convolutions, 2d/3d
# ---------------------------------------------------------------------------

@njit(cache=True)
def _conv2d_dense(f, ker, wrap):
    n0, n1 = f.shape
    h0 = (ker.shape[0] - 1) // 2
    h1 = (ker.shape[1] - 1) // 2
    out = np.zeros_like(f)
    for i in range(n0):
        for j in range(n1):
            s = 0.0
            for a in range(-h0, h0 + 1):
                ia = i + a
                if wrap:
                    ia %= n0
                elif ia < 0 or ia >= n0:
                    continue
                for b in range(-h1, h1 + 1):
                    jb = j + b
                    if wrap:
                        jb %= n1
                    elif jb < 0 or jb >= n1:
                        continue
                    s += ker[h0 + a, h1 + b] * f[ia, jb]
            out[i, j] = s
    return out


@njit(cache=True)
def _conv3d_dense(f, ker, wrap):
    n0, n1, n2 = f.shape
    h0 = (ker.shape[0] - 1) // 2
    h1 = (ker.shape[1] - 1) // 2
    h2 = (ker.shape[2] - 1) // 2
    out = np.zeros_like(f)
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                s = 0.0
                for a in range(-h0, h0 + 1):
                    ia = i + a
                    if wrap:
                        ia %= n0
                    elif ia < 0 or ia >= n0:
                        continue
                    for b in range(-h1, h1 + 1):
                        jb = j + b
                        if wrap:
                            jb %= n1
                        elif jb < 0 or jb >= n1:
                            continue
                        for c in range(-h2, h2 + 1):
                            kc = k + c
                            if wrap:
                                kc %= n2
                            elif kc < 0 or kc >= n2:
                                continue
                            s += ker[h0 + a, h1 + b, h2 + c] * f[ia, jb, kc]
                out[i, j, k] = s
    return out


def conv_dense(values: np.ndarray, kernel: np.ndarray, wrap: bool) -> np.ndarray:
    """Convolve with a small centered d-dimensional symmetric kernel."""
    if wrap and any(k > n for k, n in zip(kernel.shape, values.shape)):
        raise ValueError("dense kernel larger than the periodic domain")
    if numba_enabled():
        if values.ndim == 2:
            return _conv2d_dense(values, kernel, wrap)
        if values.ndim == 3:
            return _conv3d_dense(values, kernel, wrap)
    mode = "wrap" if wrap else "constant"
    return ndimage.correlate(values, kernel, mode=mode, cval=0.0)
