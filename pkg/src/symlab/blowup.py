"""Blow-ups of a measure at a point and finite proxies for their weak limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .functionals import PHI, sla_functional, symmetry_defect
from .measures import push_forward, resolve_measure

NET_SIZE_LIMIT = 250_000


def rescale(mu, a, r, s):
    """``r^-s (T_{a,r})_# mu`` with ``T_{a,r}(y) = (y - a) / r``."""
    if r <= 0:
        raise InputError("r must be positive")
    return push_forward(mu, a, r, r ** (-s))


@dataclass(frozen=True)
class TestNet:
    """Lattice hats ``g_z(y) = max(0, min(eps - |y - z|, 4 - |y|))``.

    Each member is 1-Lipschitz, vanishes outside ``B(0, 4)`` and is bounded by
    ``min(eps, 4)``.  The centres ``z`` form a lattice of spacing ``eps / 2``
    in ``B(0, 4)``, so every point of the ball is within ``eps / 2`` of a
    centre; a 1-Lipschitz ``f`` vanishing on the sphere is then within
    ``eps`` in sup norm of the piecewise interpolant ``sum_z f(z) g_z / S``
    with the partition ``S = sum_z g_z`` (normalized hats).
    """

    __test__ = False

    epsilon: float
    centers: np.ndarray
    dim: int

    @property
    def size(self):
        return len(self.centers)

    def __call__(self, y):
        """Values of every member at the points ``y``, shape ``(len(y), size)``."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.empty((len(y), self.size))
        edge = 4.0 - np.linalg.norm(y, axis=1)
        step = max(1, 4_000_000 // max(self.size, 1))
        for lo in range(0, len(y), step):
            sl = slice(lo, lo + step)
            dz = np.linalg.norm(y[sl, None, :] - self.centers[None, :, :], axis=2)
            out[sl] = np.maximum(0.0, np.minimum(self.epsilon - dz, edge[sl, None]))
        return out


def build_test_net(epsilon, d=2, max_size=NET_SIZE_LIMIT):
    """Hat functions centred on the lattice ``(eps / 2) Z^d`` inside ``B(0, 4)``.

    Raises
    ------
    InputError
        If the estimated number of members exceeds ``max_size``.
    """
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    step = epsilon / 2
    vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * 4.0**d
    estimate = vol / step**d
    if estimate > max_size:
        raise InputError(f"test net would have about {estimate:.3g} members (limit {max_size})")
    K = int(math.floor(4.0 / step))
    grid = np.stack(np.meshgrid(*[np.arange(-K, K + 1)] * d, indexing="ij"), -1).reshape(-1, d) * step
    return TestNet(float(epsilon), grid[np.linalg.norm(grid, axis=1) < 4.0], d)


@dataclass
class BlowupSequence:
    """Normalized push-forwards of ``base`` at ``center`` along decreasing radii.

    ``normalization='r^s'`` divides by ``r^s``; ``'3^s k r^s'`` divides by
    ``3^s k r^s`` with ``k`` defaulting to the largest observed density ratio
    ``mu(B(a, r)) / r^s`` over the radii.
    """

    base: object
    center: np.ndarray
    radii: np.ndarray
    s: float
    normalization: str = "r^s"
    k: float | None = None
    factors: np.ndarray = field(init=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(-1)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        if self.radii.size == 0 or np.any(self.radii <= 0) or np.any(np.diff(self.radii) >= 0):
            raise InputError("radii must be positive and strictly decreasing")
        rs = self.radii**self.s
        if self.normalization == "r^s":
            self.factors = rs
        elif self.normalization == "3^s k r^s":
            if self.k is None:
                self.k = max(self._mass(r) / r**self.s for r in self.radii)
            if self.k <= 0:
                raise InputError("k must be positive for the 3^s k r^s normalization")
            self.factors = 3.0**self.s * self.k * rs
        else:
            raise InputError(f"unknown normalization {self.normalization!r}")

    def _mass(self, r):
        mu = resolve_measure(self.base, r, self.center, extent=4 * r)
        return float(mu.local(self.center, r)[2].sum())

    def measure(self, i):
        """The ``i``-th blow-up, trusted on ``B(0, 4)``."""
        r = self.radii[i]
        mu = resolve_measure(self.base, r, self.center, extent=4 * r * (1 + 1e-9))
        mu.check_window(self.center, 4 * r, "blow-up")
        return push_forward(mu, self.center, r, 1.0 / self.factors[i])


@dataclass(frozen=True)
class WeakConvergenceReport:
    moments: np.ndarray
    cauchy_defect: float
    diverging: bool

    def rows(self, radii):
        header = ["r", *[f"g_{j}" for j in range(self.moments.shape[1])]]
        return header, [[r, *m] for r, m in zip(radii, self.moments)]


def weak_convergence_diagnostic(seq, net, phi=PHI, window=5, growth_factor=4.0):
    """Moments ``int g phi(|y|) d mu_j`` of every net member along the sequence.

    Returns the moment matrix (rows = radii, columns = net members), the
    largest oscillation of a moment over the final ``window`` radii, and a
    divergence flag raised when the largest moment grows by more than
    ``growth_factor`` from the first to the last radius.
    """
    if net.dim != seq.center.shape[0]:
        raise InputError("test net and measure live in different dimensions")
    rows = []
    for i in range(len(seq.radii)):
        mu = seq.measure(i)
        disp, dist, w = mu.local(np.zeros(net.dim), 4.0)
        rows.append((w * phi(dist)) @ net(disp) if len(w) else np.zeros(net.size))
    M = np.array(rows)
    tail = M[max(0, len(M) - window):]
    defect = float((tail.max(axis=0) - tail.min(axis=0)).max()) if M.size else 0.0
    first, last = np.abs(M[0]).max(), np.abs(M[-1]).max()
    diverging = bool(last > growth_factor * max(first, 1e-300))
    return WeakConvergenceReport(M, defect, diverging)


@dataclass(frozen=True)
class TangentReport:
    radii: np.ndarray
    blowup_defects: np.ndarray
    sla_values: np.ndarray
    correlation: float | None
    weak: WeakConvergenceReport | None


def tangent_symmetry_experiment(mu, kernel, a, radii, s, net_epsilon=None, tau=0.5,
                                unit_radii=None):
    """Blow-up symmetry defects next to the small local action.

    For each ``r`` the blow-up ``r^-s T_{a,r} mu`` is tested for symmetry at
    the origin over ``unit_radii`` (default 8 radii in ``[1/2, 1]``) while the
    SLA of ``mu`` is taken at ``(a, r)``.  The report gives both series and
    their Pearson correlation (None when either series is constant).
    """
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    unit = np.geomspace(0.5, 1.0, 8) if unit_radii is None else np.asarray(unit_radii, dtype=float)
    a = np.asarray(a, dtype=float)
    defects, slas = [], []
    for r in radii:
        base = resolve_measure(mu, r, a, extent=4 * r * (1 + 1e-9))
        base.check_window(a, r, "tangent experiment")
        tilde = rescale(base, a, r, s)
        defects.append(symmetry_defect(tilde, kernel, np.zeros_like(a), unit, s))
        slas.append(float(np.linalg.norm(sla_functional(base, kernel, a, r, tau, s))))
    defects, slas = np.array(defects), np.array(slas)
    corr = None
    if len(radii) > 1 and np.std(defects) > 0 and np.std(slas) > 0:
        corr = float(np.corrcoef(defects, slas)[0, 1])
    weak = None
    if net_epsilon is not None:
        seq = BlowupSequence(mu, a, radii, s)
        weak = weak_convergence_diagnostic(seq, build_test_net(net_epsilon, len(a)))
    return TangentReport(radii, defects, slas, corr, weak)
