"""Atomic approximations of locally finite measures and their generators.

Every measure in the lab is a cloud of weighted atoms.  Continuous measures
(Hausdorff measure on planes and lines, Cantor products) are discretized on a
regular grid of spacing ``h`` and truncated to a bounded region; the region in
which the truncation is invisible is tracked by :class:`Window` objects so that
functionals can refuse queries that would see the artificial edge.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, ResolutionError, TrustedWindowError

RESOLUTION_FACTOR = 20.0


@dataclass(frozen=True)
class Window:
    """Region on which a truncated measure agrees with its untruncated model.

    ``kind='ball'`` uses ``center``/``radius``; ``kind='box'`` uses per
    coordinate bounds ``lo``/``hi`` (infinite entries allowed).
    """

    kind: str
    center: tuple = ()
    radius: float = math.inf
    lo: tuple = ()
    hi: tuple = ()

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", center=tuple(float(c) for c in center), radius=float(radius))

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=tuple(float(v) for v in lo), hi=tuple(float(v) for v in hi))

    def inner_radius(self, x):
        """Largest ``rho`` such that ``B(x, rho)`` lies inside the window."""
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            return self.radius - float(np.linalg.norm(x - np.asarray(self.center)))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return float(np.min(np.minimum(x - lo, hi - x)))

    def transformed(self, a, r):
        a = np.asarray(a, dtype=float)
        if self.kind == "ball":
            return Window.ball((np.asarray(self.center) - a) / r, self.radius / r)
        return Window.box((np.asarray(self.lo) - a) / r, (np.asarray(self.hi) - a) / r)

    def to_dict(self):
        if self.kind == "ball":
            return {"kind": "ball", "center": list(self.center), "radius": self.radius}
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, data):
        if data["kind"] == "ball":
            return cls.ball(data["center"], data["radius"])
        return cls.box(data["lo"], data["hi"])


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atom cloud in ``R^d``.

    Parameters
    ----------
    points : array of shape (n, d)
    weights : array of shape (n,)
        Non-negative atom masses.
    resolution : float
        Grid spacing ``h`` of the discretization, 0 for genuinely atomic
        measures.
    provenance : mapping
        Generator name and parameters, kept for reproducibility.
    windows : tuple of Window
        Trusted regions; a query ball must fit inside all of them.
    """

    points: np.ndarray
    weights: np.ndarray
    resolution: float = 0.0
    provenance: Mapping = field(default_factory=dict)
    windows: tuple = ()

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        w = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if pts.ndim == 1:
            pts = pts.reshape(len(w), -1) if len(w) else pts.reshape(0, 1)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise InputError("points must have shape (n, d) with d >= 1")
        if pts.shape[0] != w.shape[0]:
            raise InputError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise InputError("atom positions and weights must be finite")
        if np.any(w < 0):
            raise InputError("measures are non-negative: found a negative weight")
        if self.resolution < 0:
            raise InputError("resolution must be >= 0")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "windows", tuple(self.windows))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def n_atoms(self):
        return self.points.shape[0]

    @property
    def total_mass(self):
        return float(self.weights.sum())

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    def ball_indices(self, x, r):
        """Indices of atoms in the open ball ``B(x, r)``."""
        x = np.asarray(x, dtype=float)
        if self.n_atoms == 0:
            return np.zeros(0, dtype=int)
        idx = np.asarray(self.tree.query_ball_point(x, r), dtype=int)
        if idx.size:
            d = np.linalg.norm(self.points[idx] - x, axis=1)
            idx = np.sort(idx[d < r])
        return idx

    def local(self, x, r):
        """Atoms of ``B(x, r)`` as ``(displacement y - x, distance, weight)``."""
        idx = self.ball_indices(x, r)
        disp = self.points[idx] - np.asarray(x, dtype=float)
        return disp, np.linalg.norm(disp, axis=1), self.weights[idx]

    def inner_radius(self, x):
        """Radius of the largest trusted ball centred at ``x``."""
        if not self.windows:
            return math.inf
        return min(w.inner_radius(x) for w in self.windows)

    def check_window(self, x, radius, what="query"):
        rho = self.inner_radius(x)
        if radius > rho * (1 + 1e-12):
            raise TrustedWindowError(
                f"{what}: ball of radius {radius:.6g} around {np.asarray(x).tolist()} "
                f"leaves the trusted window (largest trusted radius {rho:.6g})"
            )

    def resolution_floor(self):
        return RESOLUTION_FACTOR * self.resolution

    def check_resolution(self, r, what="query"):
        floor = self.resolution_floor()
        if r < floor * (1 - 1e-12):
            raise ResolutionError(
                f"{what}: radius {r:.6g} is below the resolution floor "
                f"{floor:.6g} (= {RESOLUTION_FACTOR:g} h)"
            )

    def scaled(self, factor):
        """Same atoms with every weight multiplied by ``factor``."""
        prov = dict(self.provenance)
        prov["mass_scale"] = prov.get("mass_scale", 1.0) * factor
        return replace(self, weights=self.weights * factor, provenance=prov)

    def __repr__(self):
        name = self.provenance.get("generator", "atoms")
        return (
            f"DiscreteMeasure({name}, d={self.dim}, n={self.n_atoms}, "
            f"mass={self.total_mass:.6g}, h={self.resolution:.3g})"
        )


@dataclass(frozen=True)
class GrowthReport:
    exponent: float
    worst_ratio: float
    worst_witness: tuple
    tolerance: float = 1e-9

    @property
    def member(self):
        """Whether the sample is consistent with the growth bound ``mu(B) <= r^s``."""
        return self.worst_ratio <= 1 + self.tolerance


def _as_point(x, d=None):
    x = np.asarray(x, dtype=float).reshape(-1)
    if d is not None and x.shape[0] != d:
        raise InputError(f"expected a point in R^{d}, got dimension {x.shape[0]}")
    return x


def _clip_ball(pts, window):
    if window is None:
        return np.ones(len(pts), dtype=bool)
    c, rad = window
    return np.linalg.norm(pts - np.asarray(c, dtype=float), axis=1) < rad


def _window_list(windows, window):
    out = list(windows)
    if window is not None:
        out.append(Window.ball(window[0], window[1]))
    return tuple(out)


def _line_atoms(anchor, direction, center, R, h, window=None):
    """Grid ``anchor + j h u`` restricted to ``B(center, R)`` (and ``window``)."""
    anchor = np.asarray(anchor, dtype=float)
    u = np.asarray(direction, dtype=float)
    c = np.asarray(center, dtype=float)
    off = anchor - c
    b = float(off @ u)
    disc = b * b - (float(off @ off) - R * R)
    if disc <= 0:
        return np.zeros((0, anchor.shape[0]))
    root = math.sqrt(disc)
    lo, hi = -b - root, -b + root
    if window is not None:
        wc = np.asarray(window[0], dtype=float)
        woff = anchor - wc
        wb = float(woff @ u)
        wdisc = wb * wb - (float(woff @ woff) - window[1] ** 2)
        if wdisc <= 0:
            return np.zeros((0, anchor.shape[0]))
        wroot = math.sqrt(wdisc)
        lo, hi = max(lo, -wb - wroot), min(hi, -wb + wroot)
        if lo >= hi:
            return np.zeros((0, anchor.shape[0]))
    j = np.arange(math.floor(lo / h) - 1, math.ceil(hi / h) + 2)
    pts = anchor + np.outer(h * j, u)
    keep = np.linalg.norm(pts - c, axis=1) < R
    keep &= _clip_ball(pts, window)
    return pts[keep]


def _check_orthonormal(basis, d, s):
    B = np.asarray(basis, dtype=float).reshape(s, -1)
    if B.shape[1] != d:
        raise InputError(f"basis vectors must live in R^{d}")
    if not np.allclose(B @ B.T, np.eye(s), atol=1e-9):
        raise InputError("basis must be orthonormal")
    return B


def make_flat_measure(d, s, basis, center, density, R, h, window=None):
    """Discretize ``density * H^s`` on the affine plane ``center + span(basis)``.

    Atoms sit on the lattice ``center + h * k @ basis`` (``k`` integer) inside
    ``B(center, R)``, each of mass ``density * h**s``.  ``window=(c, rho)``
    additionally discards atoms outside ``B(c, rho)``.
    """
    d, s = int(d), int(s)
    if not 1 <= s < d:
        raise InputError(f"need 1 <= s < d, got s={s}, d={d}")
    if density < 0:
        raise InputError("density must be non-negative")
    if not 0 < h <= R:
        raise InputError("need 0 < h <= R")
    B = _check_orthonormal(basis, d, s)
    c = _as_point(center, d)
    if s == 1:
        pts = _line_atoms(c, B[0], c, R, h, window)
    else:
        K = int(math.floor(R / h)) + 1
        ks = np.stack(np.meshgrid(*[np.arange(-K, K + 1)] * s, indexing="ij"), -1).reshape(-1, s)
        ks = ks[np.linalg.norm(h * ks, axis=1) < R]
        pts = c + (h * ks) @ B
        pts = pts[(np.linalg.norm(pts - c, axis=1) < R) & _clip_ball(pts, window)]
    prov = {"generator": "flat", "d": d, "s": s, "basis": B.tolist(), "center": c.tolist(),
            "density": float(density), "R": float(R), "h": float(h)}
    return DiscreteMeasure(pts, np.full(len(pts), density * h**s), h, prov,
                           _window_list([Window.ball(c, R)], window))


def make_lines_measure(angles, center, densities, R, h, window=None):
    """Planar union of full lines through ``center`` at the given angles."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    dens = np.broadcast_to(np.asarray(densities, dtype=float), angles.shape)
    if np.any(dens < 0):
        raise InputError("line densities must be non-negative")
    if not 0 < h <= R:
        raise InputError("need 0 < h <= R")
    z = _as_point(center, 2)
    chunks, weights = [], []
    for a, c in zip(angles, dens):
        pts = _line_atoms(z, (math.cos(a), math.sin(a)), z, R, h, window)
        chunks.append(pts)
        weights.append(np.full(len(pts), c * h))
    prov = {"generator": "lines", "angles": angles.tolist(), "center": z.tolist(),
            "densities": dens.tolist(), "R": float(R), "h": float(h)}
    pts = np.concatenate(chunks) if chunks else np.zeros((0, 2))
    w = np.concatenate(weights) if weights else np.zeros(0)
    return DiscreteMeasure(pts, w, h, prov, _window_list([Window.ball(z, R)], window))


def make_spike_measure(k, m, angle, center, c, R, h, window=None):
    """``c`` times length measure on ``m`` lines through ``center`` (``m | k``, ``k`` odd).

    Lines sit at angles ``angle + pi n / m``; each is discretized from the
    centre outwards with spacing ``h`` so the centre is an atom of every line.
    """
    k, m = int(k), int(m)
    if k < 1 or k % 2 == 0:
        raise InputError(f"k must be a positive odd integer, got {k}")
    if m < 1 or k % m:
        raise InputError(f"m={m} does not divide k={k}")
    angles = angle + math.pi * np.arange(m) / m
    mu = make_lines_measure(angles, center, c, R, h, window)
    prov = {"generator": "spike", "k": k, "m": m, "angle": float(angle),
            "center": list(mu.provenance["center"]), "c": float(c), "R": float(R), "h": float(h)}
    return replace(mu, provenance=prov)


def cantor_ratio(s):
    """Contraction ratio of the two-map Cantor set of dimension ``s - 1``."""
    return 2.0 ** (-1.0 / (s - 1.0))


def cantor_intervals(s, depth, lo=-math.inf, hi=math.inf):
    """Level-``depth`` intervals of the Cantor set in ``[0, 1]``.

    Returns ``(left_endpoints, length, mass_per_interval)``; only intervals
    meeting ``[lo, hi]`` are kept (pruned while recursing).
    """
    if not 1 < s < 2:
        raise InputError(f"Cantor product needs s in (1, 2), got {s}")
    if depth < 0:
        raise InputError("depth must be >= 0")
    lam = cantor_ratio(s)
    lefts = np.zeros(1)
    length = 1.0
    for _ in range(int(depth)):
        length *= lam
        lefts = np.concatenate([lefts, lefts + (length / lam) * (1 - lam)])
        # children of [a, a + L/lam] are [a, a + L] and [a + L/lam - L, a + L/lam]
        lefts = lefts[(lefts + length > lo) & (lefts < hi)]
    return np.sort(lefts), length, 0.5 ** int(depth)


def make_cantor_product_measure(s, depth, R, window=None):
    """Lebesgue measure on ``[-R, R]`` times the natural Cantor measure.

    The Cantor factor has ratio ``2**(-1/(s-1))`` and total mass 1; every
    level-``depth`` interval is one atom at its centre.  The first coordinate
    is a grid of spacing ``h = ratio**depth``.
    """
    if R <= 0:
        raise InputError("R must be positive")
    lo2, hi2 = -math.inf, math.inf
    lo1, hi1 = -R, R
    if window is not None:
        wc, wr = np.asarray(window[0], dtype=float), float(window[1])
        lo1, hi1 = max(lo1, wc[0] - wr), min(hi1, wc[0] + wr)
        lo2, hi2 = wc[1] - wr, wc[1] + wr
    lefts, length, mass = cantor_intervals(s, depth, lo2, hi2)
    h = length
    j = np.arange(math.ceil(lo1 / h - 1e-9), math.floor(hi1 / h + 1e-9) + 1)
    x1 = h * j
    x1 = x1[(x1 >= -R) & (x1 <= R)]
    centers = lefts + length / 2
    pts = np.column_stack([np.repeat(x1, len(centers)), np.tile(centers, len(x1))])
    if window is not None:
        pts = pts[_clip_ball(pts, window)]
    prov = {"generator": "cantor", "s": float(s), "depth": int(depth), "R": float(R),
            "ratio": cantor_ratio(s), "h": h}
    return DiscreteMeasure(pts, np.full(len(pts), mass * h), h, prov,
                           _window_list([Window.box((-R, -math.inf), (R, math.inf))], window))


def _parallel_lines(direction, offsets, weights, R, h, window):
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    chunks, ws = [], []
    for off, wgt in zip(offsets, weights):
        pts = _line_atoms(off, u, np.zeros(2), R, h, window)
        chunks.append(pts)
        ws.append(np.full(len(pts), wgt * h))
    if not chunks:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(chunks), np.concatenate(ws)


def make_lattice_lines_measure(direction, a, c, d_weight, R, h, window=None):
    """Parallel lines ``L + j a`` with weight ``c`` (odd ``j``) or ``d_weight`` (even ``j``)."""
    u = _as_point(direction, 2)
    u = u / np.linalg.norm(u)
    a = _as_point(a, 2)
    if c < 0 or d_weight < 0:
        raise InputError("line weights must be non-negative")
    if not 0 < h <= R:
        raise InputError("need 0 < h <= R")
    a_perp = a - (a @ u) * u
    gap = float(np.linalg.norm(a_perp))
    if gap <= 1e-12 * max(1.0, float(np.linalg.norm(a))):
        raise InputError("the shift a is parallel to the line direction")
    J = int(math.floor(R / gap))
    js = np.arange(-J, J + 1)
    offsets = [j * a_perp for j in js]
    weights = [c if j % 2 else d_weight for j in js]
    pts, w = _parallel_lines(u, offsets, weights, R, h, window)
    prov = {"generator": "lattice", "direction": u.tolist(), "a": a.tolist(), "c": float(c),
            "d_weight": float(d_weight), "R": float(R), "h": float(h)}
    return DiscreteMeasure(pts, w, h, prov, _window_list([Window.ball((0, 0), R)], window))


def make_triangle_tiling_measure(b, alpha, a_density, R, h, window=None):
    """Length measure on the edges of an equilateral triangle tiling.

    Three families of parallel lines at spacing ``b`` with directions
    ``alpha + 2 pi j / 3``; every crossing is a triple point.
    """
    if b <= 0:
        raise InputError("b must be positive")
    if a_density < 0:
        raise InputError("a_density must be non-negative")
    if not 0 < h <= R:
        raise InputError("need 0 < h <= R")
    L = int(math.floor(R / b))
    chunks, ws = [], []
    for j in range(3):
        th = alpha + 2 * math.pi * j / 3
        u = np.array([math.cos(th), math.sin(th)])
        n = np.array([math.cos(th + math.pi / 2), math.sin(th + math.pi / 2)])
        offsets = [l * b * n for l in range(-L, L + 1)]
        pts, w = _parallel_lines(u, offsets, [a_density] * len(offsets), R, h, window)
        chunks.append(pts)
        ws.append(w)
    prov = {"generator": "tiling", "b": float(b), "alpha": float(alpha),
            "a_density": float(a_density), "R": float(R), "h": float(h)}
    return DiscreteMeasure(np.concatenate(chunks), np.concatenate(ws), h, prov,
                           _window_list([Window.ball((0, 0), R)], window))


def make_atomic_measure(points, weights):
    """Purely atomic measure; exact, so no trusted window and no resolution floor."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float).reshape(-1)
    prov = {"generator": "atoms", "points": pts.tolist(), "weights": w.tolist()}
    return DiscreteMeasure(pts, w, 0.0, prov)


def zero_measure(d):
    return DiscreteMeasure(np.zeros((0, d)), np.zeros(0), 0.0, {"generator": "zero", "d": d})


def ball_mass(mu, x, r):
    """``mu(B(x, r))`` for the open ball."""
    if r <= 0:
        raise InputError("radius must be positive")
    idx = mu.ball_indices(_as_point(x, mu.dim), r)
    return float(mu.weights[idx].sum())


def push_forward(mu, a, r, mass_scale):
    """Image of ``mu`` under ``y -> (y - a) / r`` with masses times ``mass_scale``."""
    if r <= 0:
        raise InputError("r must be positive")
    a = _as_point(a, mu.dim)
    prov = {"generator": "push_forward", "a": a.tolist(), "r": float(r),
            "mass_scale": float(mass_scale), "base": dict(mu.provenance)}
    return DiscreteMeasure(
        (mu.points - a) / r,
        mu.weights * mass_scale,
        mu.resolution / r,
        prov,
        tuple(w.transformed(a, r) for w in mu.windows),
    )


def growth_check(mu, s, centers, radii, tolerance=1e-9):
    """Worst sampled value of ``mu(B(x, r)) / r**s``."""
    if not 0 < s < mu.dim:
        raise InputError(f"growth exponent must lie in (0, {mu.dim})")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if centers.size == 0 or radii.size == 0:
        raise InputError("growth_check needs non-empty samples")
    worst, witness = 0.0, (centers[0].tolist(), float(radii[0]))
    rmax = float(radii.max())
    for x in centers:
        _, dist, w = mu.local(x, rmax)
        order = np.argsort(dist)
        cum = np.concatenate([[0.0], np.cumsum(w[order])])
        counts = np.searchsorted(dist[order], radii, side="left")
        ratios = cum[counts] / radii**s
        i = int(np.argmax(ratios))
        if ratios[i] > worst:
            worst, witness = float(ratios[i]), (x.tolist(), float(radii[i]))
    return GrowthReport(float(s), worst, witness, tolerance)


def support_sample(mu, count, seed=0, min_inner_radius=0.0):
    """Deterministic sample of atom positions with positive weight.

    Only atoms whose trusted inner radius is at least ``min_inner_radius`` are
    eligible.
    """
    rng = np.random.default_rng(seed)
    ok = np.flatnonzero(mu.weights > 0)
    if min_inner_radius > 0 and mu.windows:
        inner = np.array([mu.inner_radius(p) for p in mu.points[ok]])
        ok = ok[inner >= min_inner_radius]
    if ok.size == 0:
        raise InputError("no eligible support atoms to sample")
    pick = rng.choice(ok, size=min(count, ok.size), replace=False)
    return mu.points[np.sort(pick)].copy()


# ---------------------------------------------------------------- tables


def write_measure_table(mu, path):
    """Write ``# d=.. h=.. provenance=<json>`` followed by ``x_1 .. x_d w`` rows."""
    prov = dict(mu.provenance)
    prov["windows"] = [w.to_dict() for w in mu.windows]
    lines = [f"# d={mu.dim} h={mu.resolution!r} provenance={json.dumps(prov, sort_keys=True)}"]
    for p, w in zip(mu.points, mu.weights):
        lines.append(" ".join(f"{v:.17g}" for v in (*p, w)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_measure_table(path):
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise InputError(f"{path}: missing header line")
    header = text[0][1:].strip()
    d_part, h_part, prov_part = header.split(" ", 2)
    if not (d_part.startswith("d=") and h_part.startswith("h=") and prov_part.startswith("provenance=")):
        raise InputError(f"{path}: malformed header {text[0]!r}")
    d = int(d_part[2:])
    h = float(h_part[2:])
    prov = json.loads(prov_part[len("provenance="):])
    windows = tuple(Window.from_dict(w) for w in prov.pop("windows", []))
    rows = [list(map(float, ln.split())) for ln in text[1:] if ln.strip()]
    data = np.array(rows, dtype=float).reshape(-1, d + 1)
    return DiscreteMeasure(data[:, :d], data[:, d], h, prov, windows)


# ---------------------------------------------------- scale-adapted specs

GENERATORS: dict[str, Callable[..., DiscreteMeasure]] = {
    "flat": make_flat_measure,
    "lines": make_lines_measure,
    "spike": make_spike_measure,
    "cantor": make_cantor_product_measure,
    "lattice": make_lattice_lines_measure,
    "tiling": make_triangle_tiling_measure,
    "atoms": make_atomic_measure,
}


@dataclass(frozen=True)
class MeasureSpec:
    """A generator plus parameters, materialized on demand at a query scale.

    With ``h_ratio`` set, :meth:`materialize` refines the grid so that
    ``h <= r / h_ratio``: line generators halve ``h`` (grids stay nested, so
    atoms of coarse versions are atoms of fine ones) and the Cantor product
    deepens its construction.  Passing ``x`` restricts the atoms to
    ``B(x, window_factor * r)``.
    """

    generator: str
    params: Mapping
    h_ratio: float | None = None
    window_factor: float = 5.0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InputError(f"unknown generator {self.generator!r}")

    @property
    def dim(self):
        if self.generator == "flat":
            return int(self.params["d"])
        if self.generator == "atoms":
            return np.atleast_2d(np.asarray(self.params["points"], dtype=float)).shape[1]
        return 2

    def materialize(self, r=None, x=None, extent=None):
        params = dict(self.params)
        if r is not None and self.h_ratio:
            target = r / self.h_ratio
            if self.generator == "cantor":
                lam = cantor_ratio(params["s"])
                depth = int(params["depth"])
                while lam**depth > target * (1 + 1e-12):
                    depth += 1
                params["depth"] = depth
            elif "h" in params:
                h = float(params["h"])
                while h > target * (1 + 1e-12):
                    h /= 2
                params["h"] = h
        if r is not None and x is not None and self.generator != "atoms":
            reach = self.window_factor * r if extent is None else extent
            params["window"] = (np.asarray(x, dtype=float), reach)
        mu = GENERATORS[self.generator](**params)
        prov = dict(mu.provenance)
        prov["spec"] = {"generator": self.generator, "h_ratio": self.h_ratio}
        return replace(mu, provenance=prov)


def resolve_measure(mu, r=None, x=None, extent=None):
    """Return a concrete measure adequate for queries at scale ``r`` near ``x``.

    ``extent`` is the largest distance from ``x`` the query will look at; a
    :class:`MeasureSpec` is materialized on ``B(x, extent)`` (default
    ``window_factor * r``).
    """
    if isinstance(mu, DiscreteMeasure):
        return mu
    if isinstance(mu, MeasureSpec):
        return mu.materialize(r, x, extent)
    if callable(mu):
        return mu(r)
    raise InputError(f"cannot interpret {type(mu).__name__} as a measure")
