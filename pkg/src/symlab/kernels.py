"""Odd one-homogeneous kernels, their Fourier multipliers and the spike angle equation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .errors import InputError, QuadratureError


@dataclass(frozen=True, eq=False)
class Kernel:
    """An odd, one-homogeneous vector field ``Omega`` on ``R^d \\ {0}``.

    Parameters
    ----------
    dim : int
        Dimension ``d`` of the ambient space.
    codomain_dim : int
        Number of real output components.
    evaluator : callable
        Vectorized map from an ``(n, d)`` array to an ``(n, codomain_dim)``
        array.  Must return 0 at the origin.
    lipschitz : float
        Global Lipschitz constant of ``Omega`` (equal to the one on the sphere
        by homogeneity).
    sup_norm : float
        ``max |Omega|`` on the unit sphere.
    name : str
    params : mapping
    analytic : bool
        Declared real analyticity of ``Omega(x) |x|^k`` away from 0.  Recorded,
        not verified.
    """

    dim: int
    codomain_dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    sup_norm: float
    name: str
    params: Mapping = field(default_factory=dict)
    analytic: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.dim:
            raise InputError(f"kernel {self.name} acts on R^{self.dim}, got dimension {X.shape[1]}")
        out = np.asarray(self.evaluator(X), dtype=float).reshape(X.shape[0], self.codomain_dim)
        return out[0] if single else out

    def describe(self):
        return {"name": self.name, **dict(self.params)}


def riesz_kernel(d):
    """``Omega(x) = x``."""
    d = int(d)
    if d < 1:
        raise InputError("d must be >= 1")
    return Kernel(d, d, lambda X: X.copy(), 1.0, 1.0, "riesz", {"d": d}, analytic=True)


def huovinen_kernel(k):
    """``Omega(z) = z^k / |z|^(k-1)`` on the plane, returned as a real pair."""
    k = int(k)
    if k < 1 or k % 2 == 0:
        raise InputError(f"Huovinen kernels need odd k >= 1, got {k}")

    def evaluate(X):
        z = X[:, 0] + 1j * X[:, 1]
        mod = np.abs(z)
        with np.errstate(over="ignore", invalid="ignore"):
            unit = np.divide(z, mod, out=np.zeros_like(z), where=mod > 0)
        # subnormal moduli overflow the division; fall back to the argument
        bad = ~np.isfinite(unit)
        unit[bad] = np.exp(1j * np.angle(z[bad]))
        w = z * unit ** (k - 1)
        return np.column_stack([w.real, w.imag])

    # |d/dz| and |d/dzbar| of |z| e^{ik theta} add up to k
    return Kernel(2, 2, evaluate, float(k), 1.0, "huovinen", {"k": k}, analytic=True)


def coordinate_kernel():
    """Scalar kernel ``Omega(x) = x_1`` on the plane."""
    return Kernel(2, 1, lambda X: X[:, :1].copy(), 1.0, 1.0, "coordinate", {}, analytic=True)


KERNELS = {"riesz": riesz_kernel, "huovinen": huovinen_kernel, "coordinate": coordinate_kernel}


def kernel_from_config(name, **params):
    if name not in KERNELS:
        raise InputError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}")
    return KERNELS[name](**params)


def check_kernel(kernel, n=1000, seed=0):
    """Largest relative oddness and homogeneity violations on random samples.

    Returns
    -------
    dict
        ``oddness`` and ``homogeneity`` errors, relative to ``|Omega(x)|``.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, kernel.dim)) * np.exp(rng.uniform(-3, 3, size=(n, 1)))
    t = np.exp(rng.uniform(-3, 3, size=(n, 1)))
    f = kernel(X)
    scale = np.maximum(np.abs(f).max(axis=1), 1e-300)
    odd = np.abs(kernel(-X) + f).max(axis=1) / scale
    hom = np.abs(kernel(t * X) - t * f).max(axis=1) / (t[:, 0] * scale)
    return {"oddness": float(odd.max()), "homogeneity": float(hom.max())}


# ------------------------------------------------------------- multiplier


@dataclass(frozen=True)
class QuadratureSpec:
    """Graded Gauss-Legendre rule used for the multiplier integral.

    Each side of a singular point is cut into ``levels`` geometric pieces with
    ratio ``ratio``; every piece gets ``order`` nodes.  The error estimate is
    the difference with a rule refined by ``extra_levels`` and ``extra_order``.
    ``sphere_nodes`` controls the smooth angular factor for ``d >= 3``.
    """

    order: int = 16
    levels: int = 30
    ratio: float = 0.15
    extra_levels: int = 10
    extra_order: int = 8
    sphere_nodes: int = 24
    tol: float = 1e-9

    def refined(self):
        return QuadratureSpec(self.order + self.extra_order, self.levels + self.extra_levels,
                              self.ratio, self.extra_levels, self.extra_order,
                              self.sphere_nodes + self.extra_order, self.tol)


@dataclass(frozen=True)
class MultiplierValue:
    xi: np.ndarray
    value: np.ndarray
    error: float


@lru_cache(maxsize=64)
def _gauss(n):
    return np.polynomial.legendre.leggauss(n)


def _graded_rule(length, spec):
    """Nodes ``u`` in ``(0, length)`` graded towards ``u = 0`` and their weights."""
    x, w = _gauss(spec.order)
    edges = length * spec.ratio ** np.arange(spec.levels + 1)
    edges = np.append(edges, 0.0)[::-1]
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def _multiplier_2d(kernel, xi, spec):
    t0 = math.atan2(xi[1], xi[0])
    u, w = _graded_rule(math.pi / 2, spec)
    # phi = angle from xi in (-pi/2, pi/2); u is the distance to the nearest zero of xi . omega
    phi = np.concatenate([-(math.pi / 2 - u), math.pi / 2 - u])
    logc = np.log(np.sin(np.concatenate([u, u])))
    ww = np.concatenate([w, w])
    om = np.column_stack([np.cos(t0 + phi), np.sin(t0 + phi)])
    f_pos = kernel(om)
    f_neg = kernel(-om)
    # positive arc: sgn = +1; mirrored arc: sgn = -1, same |xi . omega|
    integrand = f_pos * (0.5j * math.pi + logc[:, None]) + f_neg * (-0.5j * math.pi + logc[:, None])
    return -(ww[:, None] * integrand).sum(axis=0)


def _sphere_rule(m, spec):
    """Product rule on ``S^m`` (as points in ``R^(m+1)``) for smooth integrands."""
    if m == 1:
        n = max(8, 2 * spec.sphere_nodes)
        th = 2 * math.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(n, 2 * math.pi / n)
    inner, iw = _sphere_rule(m - 1, spec)
    x, w = _gauss(spec.sphere_nodes)
    g = 0.5 * math.pi * x
    gw = 0.5 * math.pi * w * np.cos(g) ** (m - 1)
    pts = np.concatenate([np.column_stack([np.full(len(inner), math.sin(gi)), math.cos(gi) * inner])
                          for gi in g])
    wts = np.concatenate([gwi * iw for gwi in gw])
    return pts, wts


def _orthonormal_complement(xi):
    d = xi.shape[0]
    q, _ = np.linalg.qr(np.column_stack([xi, np.eye(d)]))
    return q[:, 1:d] * np.sign(q[:, :1].T @ xi)[0]


def _multiplier_nd(kernel, xi, spec):
    d = xi.shape[0]
    inner, iw = _sphere_rule(d - 2, spec)
    basis = _orthonormal_complement(xi)
    u, w = _graded_rule(math.pi / 2, spec)
    # omega = sin(g) xi + cos(g) eta, g = +-u graded towards the great circle g = 0
    total = np.zeros(kernel.codomain_dim, dtype=complex)
    for sign in (1.0, -1.0):
        g = sign * u
        wt = w * np.cos(g) ** (d - 2)
        logt = np.log(np.sin(u))
        sg = 0.5j * math.pi * sign
        for eta, ew in zip(inner @ basis.T, iw):
            om = np.sin(g)[:, None] * xi + np.cos(g)[:, None] * eta
            f = kernel(om)
            total += ew * ((wt * (sg + logt))[:, None] * f).sum(axis=0)
    return -total


def multiplier(kernel, xi, quad=None):
    """Fourier multiplier of the principal value distribution of ``Omega``.

    Evaluates ``m(xi) = -int_S Omega(w) [i pi/2 sgn(xi.w) + log|xi.w|] dw`` with
    the sphere split along the great circle ``xi . w = 0``.

    Parameters
    ----------
    kernel : Kernel
    xi : array-like of shape (d,)
        Unit vector.
    quad : QuadratureSpec, optional

    Returns
    -------
    MultiplierValue
        ``value`` holds one complex number per kernel component and ``error``
        the difference to a refined rule.

    Raises
    ------
    QuadratureError
        If the two finest estimates differ by more than ``quad.tol``.
    """
    quad = quad or QuadratureSpec()
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape[0] != kernel.dim:
        raise InputError(f"xi must lie in R^{kernel.dim}")
    if abs(np.linalg.norm(xi) - 1) > 1e-12:
        raise InputError(f"xi must be a unit vector, |xi| = {np.linalg.norm(xi)!r}")
    if kernel.dim < 2:
        raise InputError("the multiplier needs d >= 2")
    fn = _multiplier_2d if kernel.dim == 2 else _multiplier_nd
    coarse = fn(kernel, xi, quad)
    fine = fn(kernel, xi, quad.refined())
    err = float(np.abs(fine - coarse).max())
    if not err <= quad.tol:
        raise QuadratureError(
            f"multiplier quadrature did not converge at xi={xi.tolist()} (difference {err:.3g})",
            coarse, fine)
    return MultiplierValue(xi, fine, err)


def sphere_grid(d, n):
    """Quasi-uniform unit vectors: equiangular for ``d = 2``, Fibonacci for ``d = 3``."""
    if d == 2:
        th = 2 * math.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        rho = np.sqrt(1 - z * z)
        ang = math.pi * (1 + math.sqrt(5)) * i
        return np.column_stack([rho * np.cos(ang), rho * np.sin(ang), z])
    rng = np.random.default_rng(0)
    g = rng.normal(size=(n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class NonvanishingScan:
    min_modulus: float
    witness: np.ndarray
    values: tuple
    margin: float

    @property
    def nonvanishing(self):
        return self.min_modulus > self.margin


def multiplier_nonvanishing_scan(kernel, sphere_nodes, quad=None, margin=1e-6):
    """Minimum of the modulus ``|m(xi)|`` (Euclidean over components) on a sphere grid.

    The verdict is non-vanishing iff the minimum exceeds ``margin`` plus ten
    times the largest quadrature error seen.
    """
    if sphere_nodes < 8:
        raise InputError("sphere_nodes must be >= 8")
    values = tuple(multiplier(kernel, xi, quad) for xi in sphere_grid(kernel.dim, sphere_nodes))
    mods = np.array([np.linalg.norm(v.value) for v in values])
    i = int(np.argmin(mods))
    worst_err = max(v.error for v in values)
    return NonvanishingScan(float(mods[i]), values[i].xi, values, margin + 10 * worst_err)


def multiplier_rows(values):
    """CSV header and rows ``xi..., re(m_1), im(m_1), ..., quad_error``."""
    v0 = values[0]
    header = [f"xi_{i + 1}" for i in range(v0.xi.shape[0])]
    for j in range(v0.value.shape[0]):
        header += [f"re_m_{j + 1}", f"im_m_{j + 1}"]
    header.append("quad_error")
    rows = []
    for v in values:
        row = list(v.xi)
        for m in v.value:
            row += [m.real, m.imag]
        rows.append(row + [v.error])
    return header, rows


# ------------------------------------------------------- spike equations


def huovinen_angle_residual(k, c_minus, c_plus, theta):
    """``c_minus (cos t e^{it} - 1)^k + c_plus (cos t e^{-it} - 1)^k``.

    Uses ``cos t e^{+-it} - 1 = +-i sin t e^{+-it}``, which is exact
    algebraically and avoids cancellation for small ``t``.
    """
    k = int(k)
    if k < 1 or k % 2 == 0:
        raise InputError(f"k must be odd, got {k}")
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    val = (1j * s) ** k * (c_minus * np.exp(1j * k * theta) - c_plus * np.exp(-1j * k * theta))
    return complex(val) if val.ndim == 0 else val


def huovinen_angle_roots(k, interval=(0.0, math.pi / 2), n_grid=None, c=1.0, tol=1e-12):
    """Roots of the equal-weight angle residual in ``interval = (a, b]``.

    Sign changes of the residual after removing its (constant) phase are
    bracketed on a uniform grid and bisected to ``tol``; roots closer than
    ``pi / (4k)`` are merged.

    Raises
    ------
    InputError
        If the grid spacing is at least ``pi / (2k)`` (roots are ``pi / k``
        apart, so coarser grids may miss sign changes).
    """
    k = int(k)
    if k < 1 or k % 2 == 0:
        raise InputError(f"k must be odd, got {k}")
    a, b = map(float, interval)
    if not 0 <= a < b:
        raise InputError("interval must satisfy 0 <= a < b")
    n_grid = int(n_grid) if n_grid is not None else 64 * k
    if (b - a) / n_grid >= math.pi / (2 * k):
        raise InputError(f"grid spacing {(b - a) / n_grid:.4g} >= pi/(2k) = {math.pi / (2 * k):.4g}")
    th = np.linspace(a, b, n_grid + 1)
    res = huovinen_angle_residual(k, c, c, th)
    phase = np.exp(-1j * np.angle(res[np.argmax(np.abs(res))]))

    def g(t):
        return (huovinen_angle_residual(k, c, c, t) * phase).real

    vals = (res * phase).real
    roots = []
    for i in range(n_grid):
        lo, hi = th[i], th[i + 1]
        glo, ghi = vals[i], vals[i + 1]
        if ghi == 0:
            roots.append(hi)
            continue
        if glo * ghi < 0:
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                gm = g(mid)
                if gm == 0:
                    lo = hi = mid
                    break
                if (gm < 0) == (glo < 0):
                    lo, glo = mid, gm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
    merged = []
    for r in sorted(roots):
        if r <= a + tol:
            continue
        if merged and r - merged[-1] < math.pi / (4 * k):
            continue
        merged.append(r)
    return merged


def center_balance(k, ray_angles, ray_weights):
    """``sum_j c_j exp(i k angle_j)``, the radius-free factor of the centre ball integral."""
    ang = np.asarray(ray_angles, dtype=float).reshape(-1)
    w = np.asarray(ray_weights, dtype=float).reshape(-1)
    if ang.shape != w.shape:
        raise InputError("ray_angles and ray_weights must have equal length")
    if np.any(w < 0):
        raise InputError("ray weights must be non-negative")
    return complex(np.sum(w * np.exp(1j * int(k) * ang)))
