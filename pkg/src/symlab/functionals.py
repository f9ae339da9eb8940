"""Pointwise functionals of a measure and a kernel at a point and a scale.

All quantities are evaluated by exact atom sums; the only approximation is the
discretization of the measure itself, for which each functional reports a
quadrature error estimate in terms of the grid spacing ``h``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import InputError, PreconditionError
from .measures import resolve_measure

TAIL_WINDOW = 5


@dataclass(frozen=True)
class CutoffEta:
    """Ramp ``t -> 1`` on ``[0, 1 - tau]``, ``0`` on ``[1, inf)``, linear between."""

    tau: float

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise InputError(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def lipschitz(self):
        return 1.0 / self.tau

    def __call__(self, t):
        return np.clip((1.0 - np.asarray(t, dtype=float)) / self.tau, 0.0, 1.0)


@dataclass(frozen=True)
class CutoffPhi:
    """``1`` on ``[0, 3]``, ``0`` on ``[4, inf)``, one minus a quintic smoothstep between."""

    max_derivative: float = 1.875

    @staticmethod
    def _smooth(u):
        return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))

    def __call__(self, t):
        u = np.clip(np.asarray(t, dtype=float) - 3.0, 0.0, 1.0)
        return 1.0 - self._smooth(u)

    def derivative(self, t):
        u = np.clip(np.asarray(t, dtype=float) - 3.0, 0.0, 1.0)
        return -30.0 * u * u * (1.0 - u) ** 2


PHI = CutoffPhi()


@dataclass
class ScanResult:
    """Radius-indexed values with a tail diagnostic.

    Parameters
    ----------
    radii : ndarray of shape (n,)
        Strictly decreasing radii.
    values : ndarray of shape (n, m)
    errors : ndarray of shape (n,)
        Quadrature error estimate per radius.
    threshold : float
        A scan is consistent with a vanishing limit iff ``tail_max`` is at most
        this value.
    resolution_floor : float
        Smallest radius the discretization supports (``20 h``).
    columns : dict
        Extra per-radius CSV columns.
    """

    kind: str
    radii: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    threshold: float
    resolution_floor: float
    window: int = TAIL_WINDOW
    columns: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.radii), -1)
        self.errors = np.asarray(self.errors, dtype=float).reshape(-1)
        if len(self.radii) == 0:
            raise InputError("a scan needs at least one radius")
        if np.any(np.diff(self.radii) >= 0):
            raise InputError("scan radii must be strictly decreasing")

    @property
    def magnitudes(self):
        return np.linalg.norm(self.values, axis=1)

    @property
    def tail(self):
        return slice(max(0, len(self.radii) - self.window), None)

    @property
    def tail_max(self):
        return float(self.magnitudes[self.tail].max())

    @property
    def tail_min(self):
        return float(self.magnitudes[self.tail].min())

    @property
    def verdict(self):
        return self.tail_max <= self.threshold

    def header(self):
        m = self.values.shape[1]
        base = self.meta.get("value_name", "value")
        names = [base] if m == 1 else [f"{base}_{j + 1}" for j in range(m)]
        return ["r", *names, "quad_error_estimate", *self.columns]

    def rows(self):
        extra = list(self.columns.values())
        for i, r in enumerate(self.radii):
            yield [r, *self.values[i], self.errors[i], *(c[i] for c in extra)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([_fmt(v) for v in row])

    def summary(self):
        return {
            "kind": self.kind,
            "tail_max": self.tail_max,
            "tail_min": self.tail_min,
            "threshold": self.threshold,
            "verdict": bool(self.verdict),
            "resolution_floor": self.resolution_floor,
            "tail_window": min(self.window, len(self.radii)),
            **self.meta,
        }


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v) + 0.0:.17g}"  # + 0.0 folds -0 into 0
    return str(v)


def _point(mu, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != mu.dim:
        raise InputError(f"point has dimension {x.shape[0]}, measure lives in R^{mu.dim}")
    return x


def _prepare(mu, x, r_min, r_max, what, check_floor=True):
    """Resolve a measure for queries on ``B(x, r_max)`` and validate the scales."""
    if r_min <= 0:
        raise InputError(f"{what}: radii must be positive")
    mu = resolve_measure(mu, r_min, x, extent=r_max * (1 + 1e-9))
    x = _point(mu, x)
    if check_floor:
        mu.check_resolution(r_min, what)
    mu.check_window(x, r_max, what)
    return mu, x


def _check_kernel(mu, kernel):
    if kernel.dim != mu.dim:
        raise InputError(f"kernel acts on R^{kernel.dim}, measure lives in R^{mu.dim}")


def _sorted_radii(radii):
    r = np.unique(np.asarray(radii, dtype=float).reshape(-1))[::-1]
    if r.size == 0:
        raise InputError("empty radius grid")
    if r.size != np.asarray(radii).size:
        raise InputError("radius grid has duplicates")
    return r


# ------------------------------------------------------------------- SLA


def radial_test_integral(nu, kernel, x, psi, support, layer_cake=False):
    """``int Omega(x - y) psi(|x - y|) dnu(y)`` for a profile vanishing beyond ``support``.

    Parameters
    ----------
    nu : DiscreteMeasure or MeasureSpec
    kernel : Kernel
    x : array-like
    psi : callable
        Vectorized profile on distances; must vanish on ``[support, inf)``.
    support : float
    layer_cake : bool, default=False
        If True, evaluate ``-int psi'(rho) [int_{B(x, rho)} Omega dnu] drho``
        instead, by Abel summation over the sorted atom distances.

    Returns
    -------
    ndarray of shape (codomain_dim,)
    """
    mu, x = _prepare(nu, x, support, support, "radial_test_integral", check_floor=False)
    _check_kernel(mu, kernel)
    disp, dist, w = mu.local(x, support)
    if not layer_cake:
        prof = np.asarray(psi(dist), dtype=float)
        return ((w * prof)[:, None] * kernel(-disp)).sum(axis=0)
    order = np.argsort(dist, kind="stable")
    dist, w, disp = dist[order], w[order], disp[order]
    G = np.cumsum(w[:, None] * kernel(-disp), axis=0)
    nodes = np.append(dist, support)
    jumps = np.diff(np.asarray(psi(nodes), dtype=float))
    return -(G * jumps[:, None]).sum(axis=0)


def sla_functional(mu, kernel, x, r, tau, s):
    """Small local action ``r^-(s+1) int Omega(x - y) eta_tau(|x - y| / r) dmu(y)``.

    Parameters
    ----------
    mu : DiscreteMeasure or MeasureSpec
    kernel : Kernel
    x : array-like of shape (d,)
    r : float
        Scale; must be at least ``20 h`` and ``B(x, r)`` must be trusted.
    tau : float
        Ramp width in ``(0, 1)``.
    s : float
        Dimension of the Calderon-Zygmund kernel ``Omega(x) / |x|^(s+1)``.

    Returns
    -------
    ndarray of shape (codomain_dim,)

    Examples
    --------
    >>> from symlab.measures import make_atomic_measure
    >>> from symlab.kernels import riesz_kernel
    >>> mu = make_atomic_measure([[1.0, 0.0]], [1.0])
    >>> sla_functional(mu, riesz_kernel(2), [0.0, 0.0], 2.0, 0.5, 1.0)
    array([-0.25,  0.  ])
    """
    mu, x = _prepare(mu, x, r, r, "sla_functional")
    eta = CutoffEta(tau)
    scale = r ** (s + 1)
    return radial_test_integral(mu, kernel, x, lambda d: eta(d / r) / scale, r)


def sla_error_estimate(mu, kernel, x, r, tau, s):
    """``h (Lip(Omega) + sup|Omega| / tau) mu(B(x, r)) / r^(s+1)``."""
    mu, x = _prepare(mu, x, r, r, "sla_error_estimate")
    mass = float(mu.local(x, r)[2].sum())
    return mu.resolution * (kernel.lipschitz + kernel.sup_norm / tau) * mass / r ** (s + 1)


def sla_scan(mu, kernel, x, radii, tau, s, threshold=None, threshold_factor=10.0):
    """Small local action along a decreasing radius grid.

    The verdict compares the largest tail magnitude with ``threshold``, which
    defaults to ``threshold_factor`` times the largest tail error estimate.
    """
    radii = _sorted_radii(radii)
    vals, errs, floor = [], [], 0.0
    for r in radii:
        m, _ = _prepare(mu, x, r, r, "sla_scan")
        vals.append(sla_functional(m, kernel, x, r, tau, s))
        errs.append(sla_error_estimate(m, kernel, x, r, tau, s))
        floor = max(floor, m.resolution_floor())
    res = ScanResult("sla", radii, vals, errs, 0.0, floor, meta={"tau": tau, "s": s})
    res.threshold = threshold if threshold is not None else threshold_factor * float(res.errors[res.tail].max())
    return res


# ---------------------------------------------------------- ball integrals


def _ball_profile(mu, kernel, x, radii):
    """Ball integrals ``int_{B(x, r)} Omega(x - y) dmu`` and masses for every radius."""
    disp, dist, w = mu.local(x, float(radii.max()))
    order = np.argsort(dist, kind="stable")
    dist, w = dist[order], w[order]
    F = np.cumsum(w[:, None] * kernel(-disp[order]), axis=0)
    F = np.vstack([np.zeros((1, kernel.codomain_dim)), F])
    M = np.concatenate([[0.0], np.cumsum(w)])
    idx = np.searchsorted(dist, radii, side="left")
    return F[idx], M[idx], dist, M


def ball_error_estimate(mu, kernel, x, r, s):
    """``[sup|Omega| r nu(r-h <= |y-x| < r+h) + h Lip(Omega) nu(B(x, r))] / r^s``."""
    h = mu.resolution
    if h == 0:
        return 0.0
    _, dist, w = mu.local(x, r + h)
    shell = float(w[dist >= r - h].sum())
    inner = float(w[dist < r].sum())
    return (kernel.sup_norm * r * shell + h * kernel.lipschitz * inner) / r**s


def symmetry_defect(nu, kernel, x, radii, s, full_output=False):
    """Normalized symmetry defect ``sup_r |int_{B(x,r)} Omega(x - y) dnu(y)| / r^s``.

    Parameters
    ----------
    nu : DiscreteMeasure or MeasureSpec
    kernel : Kernel
    x : array-like of shape (d,)
    radii : array-like
        Radius grid for the supremum.
    s : float
        Normalization exponent.
    full_output : bool, default=False
        If True, also return a dict with per-radius values and the
        discretization error estimate (maximum over the grid).

    Returns
    -------
    defect : float
    info : dict, only when ``full_output`` is True
    """
    radii = _sorted_radii(radii)
    mu, x = _prepare(nu, x, float(radii.min()), float(radii.max()), "symmetry_defect")
    _check_kernel(mu, kernel)
    F, _, _, _ = _ball_profile(mu, kernel, x, radii)
    per_r = np.linalg.norm(F, axis=1) / radii**s
    defect = float(per_r.max())
    if not full_output:
        return defect
    errs = np.array([ball_error_estimate(mu, kernel, x, r, s) for r in radii])
    return defect, {"radii": radii, "values": per_r, "integrals": F,
                    "error_estimate": float(errs.max()), "errors": errs}


@dataclass(frozen=True)
class SymmetricPointReport:
    point: np.ndarray
    defect: float
    error_estimate: float
    symmetric: bool


def symmetric_point_scan(nu, kernel, candidates, radii, s, threshold=None, factor=3.0):
    """Symmetry defect at every candidate point.

    A candidate is classified symmetric when its defect is at most
    ``threshold`` (default ``factor`` times its own error estimate, with a
    floor of ``1e-12``).
    """
    out = []
    for p in np.atleast_2d(np.asarray(candidates, dtype=float)):
        d, info = symmetry_defect(nu, kernel, p, radii, s, full_output=True)
        thr = threshold if threshold is not None else max(factor * info["error_estimate"], 1e-12)
        out.append(SymmetricPointReport(p, d, info["error_estimate"], d <= thr))
    return out


def density_ratio(mu, x, r, s):
    """``mu(B(x, r)) / r^s``."""
    mu, x = _prepare(mu, x, r, r, "density_ratio", check_floor=False)
    return float(mu.local(x, r)[2].sum()) / r**s


def density_scan(mu, x, radii, s):
    """Density ratios along a decreasing radius grid; tail max and min bracket the densities."""
    radii = _sorted_radii(radii)
    m, x = _prepare(mu, x, float(radii.min()), float(radii.max()), "density_scan")
    vals, errs = [], []
    for r in radii:
        _, dist, w = m.local(x, r + m.resolution)
        vals.append(float(w[dist < r].sum()) / r**s)
        errs.append(float(w[dist >= r - m.resolution].sum()) / r**s if m.resolution else 0.0)
    return ScanResult("density", radii, vals, errs, math.inf, m.resolution_floor(), meta={"s": s})


# ----------------------------------------------------------- principal values


@dataclass(frozen=True)
class PVResult:
    epsilons: np.ndarray
    values: np.ndarray
    cauchy_defect: float
    excluded_center_atom: bool


def _pv_terms(mu, kernel, x, s):
    disp = mu.points - x
    dist = np.linalg.norm(disp, axis=1)
    at_x = dist == 0
    excluded = bool(np.any(at_x & (mu.weights > 0)))
    keep = ~at_x
    disp, dist, w = disp[keep], dist[keep], mu.weights[keep]
    terms = (w / dist ** (s + 1))[:, None] * kernel(-disp)
    return dist, terms, excluded


def pv_estimator(mu, kernel, x, s, epsilons, window=TAIL_WINDOW):
    """Truncated integrals ``I_eps = int_{|x-y| > eps} Omega(x - y) / |x - y|^(s+1) dmu(y)``.

    Returns the values for each ``eps`` (sorted decreasingly) and the largest
    difference ``|I_a - I_b|`` over pairs in the final ``window`` epsilons.
    An atom sitting exactly at ``x`` is excluded with a warning.
    """
    eps = _sorted_radii(epsilons)
    mu, x = _prepare(mu, x, float(eps.min()), float(eps.max()), "pv_estimator")
    _check_kernel(mu, kernel)
    dist, terms, excluded = _pv_terms(mu, kernel, x, s)
    if excluded:
        warnings.warn("an atom sits at the evaluation point; it is excluded from the PV integral",
                      RuntimeWarning, stacklevel=2)
    vals = np.array([terms[dist > e].sum(axis=0) for e in eps]).reshape(len(eps), -1)
    tail = vals[max(0, len(eps) - window):]
    diffs = np.linalg.norm(tail[:, None, :] - tail[None, :, :], axis=2)
    return PVResult(eps, vals, float(diffs.max()), excluded)


def _diameter(points):
    """Largest pairwise Euclidean distance in a point cloud."""
    if len(points) < 2:
        return 0.0
    if points.shape[1] == 1:
        return float(points.max() - points.min())
    pts = points
    try:
        pts = points[ConvexHull(points).vertices]
    except (QhullError, ValueError):
        centred = points - points.mean(axis=0)
        _, _, vt = np.linalg.svd(centred, full_matrices=False)
        t = centred @ vt[0]
        resid = np.linalg.norm(centred - np.outer(t, vt[0]), axis=1)
        if resid.max() <= 1e-12 * max(1.0, np.abs(t).max()):
            return float(np.linalg.norm(points[np.argmax(t)] - points[np.argmin(t)]))
    if len(pts) > 4000:
        pts = pts[:4000]
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def annulus_sup(mu, kernel, x, s, r):
    """Exact ``sup_{0 < a < b <= r} |int_{a <= |x-y| < b} Omega(x-y) / |x-y|^(s+1) dmu|``.

    Annulus integrals are differences of partial sums over atoms sorted by
    distance (atoms at equal distance enter together), so the supremum is the
    diameter of the partial-sum cloud.
    """
    mu, x = _prepare(mu, x, r, r, "annulus_sup", check_floor=False)
    dist, terms, _ = _pv_terms(mu, kernel, x, s)
    inside = dist < r
    dist, terms = dist[inside], terms[inside]
    order = np.argsort(dist, kind="stable")
    dist, terms = dist[order], terms[order]
    S = np.vstack([np.zeros((1, terms.shape[1])), np.cumsum(terms, axis=0)])
    # keep partial sums only at the end of each group of equal distances
    last = np.append(dist[1:] != dist[:-1], True) if len(dist) else np.zeros(0, bool)
    S = np.vstack([S[:1], S[1:][last]])
    return _diameter(S)


def upper_density_bound(mu, x, s, r):
    """``sup_{0 < rho <= r} mu(B(x, rho) \\ {x}) / rho^s`` for an atomic measure."""
    mu, x = _prepare(mu, x, r, r, "upper_density_bound", check_floor=False)
    _, dist, w = mu.local(x, r)
    keep = dist > 0
    dist, w = dist[keep], w[keep]
    if dist.size == 0:
        return 0.0
    order = np.argsort(dist)
    dist, cum = dist[order], np.cumsum(w[order])
    last = np.append(dist[1:] != dist[:-1], True)
    return float((cum[last] / dist[last] ** s).max())


def telescoping_constant(eps, s, sup_norm=1.0):
    """Constant ``C`` with ``sharp_bound(eps) <= C (eps k + delta / eps)``."""
    q = (1.0 - eps) ** (s + 1)
    return max(sup_norm * (1.0 / q - 1.0) / eps, eps / (1.0 - q))


def telescoping_bound(k, delta, eps, s, sup_norm=1.0):
    """Sharp telescoping bound on ``|r^-(s+1) int_{B(x,r)} Omega(x-y) dmu|``.

    With ``r_j = (1 - eps)^j r``, splitting the ball into the annuli
    ``r_{j+1} <= |x - y| < r_j`` gives
    ``sup|Omega| ((1-eps)^-(s+1) - 1) k + delta / (1 - (1-eps)^(s+1))``.
    """
    q = (1.0 - eps) ** (s + 1)
    return sup_norm * (1.0 / q - 1.0) * k + delta / (1.0 - q)


def optimal_epsilon(k, delta, eps_grid):
    """Grid minimizer of ``eps k + delta / eps``."""
    g = np.asarray(eps_grid, dtype=float)
    return float(g[np.argmin(g * k + delta / g)])


@dataclass(frozen=True)
class TelescopingCheck:
    lhs: float
    bound: float
    constant: float
    simple_bound: float
    k: float
    delta: float
    eps: float

    @property
    def passed(self):
        return self.lhs <= self.bound * (1 + 1e-12) + 1e-15


def pv_to_sla_check(mu, kernel, x, s, r, eps, delta, k=None):
    """Check the telescoping estimate behind the principal value to SLA implication.

    Parameters
    ----------
    mu, kernel, x, s, r
        Measure, kernel, point, dimension and scale.
    eps : float
        Ratio of the geometric radii, in ``(0, 1/2)``.
    delta : float
        Claimed bound on every annulus integral inside ``B(x, r)``.
    k : float, optional
        Claimed density bound ``mu(B(x, rho)) <= k rho^s`` for ``rho <= r``;
        defaults to the observed value.

    Returns
    -------
    TelescopingCheck
        ``lhs = |r^-(s+1) int_{B(x,r)} Omega(x-y) dmu|``, the sharp bound and
        ``simple_bound = C (eps k + delta / eps)``.

    Raises
    ------
    PreconditionError
        If ``delta`` or ``k`` is smaller than the observed value.
    """
    if not 0 < eps < 0.5:
        raise InputError("eps must lie in (0, 1/2)")
    observed_delta = annulus_sup(mu, kernel, x, s, r)
    observed_k = upper_density_bound(mu, x, s, r)
    if k is None:
        k = observed_k
    tol = 1e-12
    if delta < observed_delta * (1 - tol):
        raise PreconditionError(f"delta={delta:.6g} is below the observed annulus supremum {observed_delta:.6g}")
    if k < observed_k * (1 - tol):
        raise PreconditionError(f"k={k:.6g} is below the observed density bound {observed_k:.6g}")
    m, xx = _prepare(mu, x, r, r, "pv_to_sla_check", check_floor=False)
    F, _, _, _ = _ball_profile(m, kernel, xx, np.array([r]))
    lhs = float(np.linalg.norm(F[0])) / r ** (s + 1)
    C = telescoping_constant(eps, s, kernel.sup_norm)
    return TelescopingCheck(lhs, telescoping_bound(k, delta, eps, s, kernel.sup_norm), C,
                            C * (eps * k + delta / eps), float(k), float(delta), float(eps))
