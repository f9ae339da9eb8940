"""Windowed bounded-Lipschitz transport numbers and their candidate families.

The alpha number at ``B(x, r)`` is

    r^-s  inf_nu  sup_f  int f phi(|. - x| / r) d(mu - c nu),

with ``f`` ranging over ``1/r``-Lipschitz functions vanishing outside
``B(x, 4r)``.  On atomic measures the inner supremum is a finite linear
program: by McShane extension it is enough to impose the pairwise Lipschitz
constraints between atoms and ``|f_i| <= 4 - |p_i - x| / r``.
"""
from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import InputError, SolverError
from .functionals import PHI, ScanResult
from .measures import (DiscreteMeasure, Window, _line_atoms, make_flat_measure, push_forward,
                       resolve_measure)

for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

N_EXACT = 400
GOLDEN_ITERS = 6
FEASIBILITY_TOL = 1e-10


# ------------------------------------------------------------ instances


@dataclass(frozen=True, eq=False)
class LipschitzDualInstance:
    """Signed atoms ``a_i`` at ``p_i`` inside ``B(x, 4r)``.

    The dual value is ``max sum_i a_i f_i`` subject to
    ``|f_i - f_j| <= |p_i - p_j| / r`` and ``|f_i| <= 4 - |p_i - x| / r``.
    """

    center: np.ndarray
    r: float
    s: float
    positions: np.ndarray
    coefficients: np.ndarray
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.center, dtype=float).reshape(-1)
        P = np.asarray(self.positions, dtype=float).reshape(-1, x.shape[0])
        a = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if P.shape[0] != a.shape[0]:
            raise InputError("positions and coefficients differ in length")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(a))):
            raise InputError("instance entries must be finite")
        if self.r <= 0:
            raise InputError("r must be positive")
        if np.any(np.linalg.norm(P - x, axis=1) >= 4 * self.r):
            raise InputError("every entry must lie in the open ball B(x, 4r)")
        for arr in (x, P, a):
            arr.setflags(write=False)
        object.__setattr__(self, "center", x)
        object.__setattr__(self, "positions", P)
        object.__setattr__(self, "coefficients", a)

    @property
    def n(self):
        return self.coefficients.shape[0]

    @property
    def bounds(self):
        return 4.0 - np.linalg.norm(self.positions - self.center, axis=1) / self.r

    def lengths(self):
        return cdist(self.positions, self.positions) / self.r

    def scaled(self, lam):
        return replace(self, coefficients=self.coefficients * lam)

    def without(self, index):
        keep = np.arange(self.n) != index
        return replace(self, positions=self.positions[keep], coefficients=self.coefficients[keep])


@dataclass(frozen=True)
class DualSolution:
    """Optimal dual value (already divided by ``r^s``) and a feasible maximizer."""

    value: float
    f_values: np.ndarray
    method: str
    certificate_gap: float
    raw_value: float
    audit: Mapping = field(default_factory=dict)


def audit_solution(inst, f, pairs=True):
    """Smallest slacks of the three constraint families for ``f``.

    ``pairs=False`` skips the quadratic pairwise sweep and reports a pair
    slack of 0; only for ``f`` that is Lipschitz by construction.
    """
    f = np.asarray(f, dtype=float)
    if inst.n == 0:
        return {"pair_slack": 0.0, "boundary_slack": 0.0, "sup_slack": 0.0}
    b = inst.bounds
    out = {"boundary_slack": float((b - np.abs(f)).min()),
           "sup_slack": float((4.0 - np.abs(f)).min())}
    if not pairs:
        out["pair_slack"] = 0.0
        return out
    worst = math.inf
    step = max(1, 2_000_000 // max(inst.n, 1))
    for lo in range(0, inst.n, step):
        sl = slice(lo, lo + step)
        L = cdist(inst.positions[sl], inst.positions) / inst.r
        worst = min(worst, float((L - np.abs(f[sl, None] - f[None, :])).min()))
    out["pair_slack"] = worst
    return out


def _solve_highs(inst):
    n = inst.n
    a, b = inst.coefficients, inst.bounds
    L = inst.lengths()
    iu, ju = np.triu_indices(n, 1)
    need = L[iu, ju] < b[iu] + b[ju]
    iu, ju, lij = iu[need], ju[need], L[iu, ju][need]
    m = iu.size
    rows = np.repeat(np.arange(2 * m), 2)
    cols = np.column_stack([np.concatenate([iu, ju]), np.concatenate([ju, iu])]).ravel()
    vals = np.tile([1.0, -1.0], 2 * m)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * m, n)) if m else None
    rhs = np.concatenate([lij, lij]) if m else None
    res = linprog(-a, A_ub=A, b_ub=rhs, bounds=np.column_stack([-b, b]), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    dual = float(b @ (res.lower.marginals * -1.0) + b @ res.upper.marginals)
    if m:
        dual += float(rhs @ res.ineqlin.marginals)
    return -float(res.fun), np.asarray(res.x, dtype=float), abs(float(res.fun) - dual)


def _extended(Pi, bi, Pj, bj, r):
    return np.minimum(cdist(Pi, Pj) / r, bi[:, None] + bj[None, :])


def _solve_network(inst, chunk=2048):
    a, b, r, P = inst.coefficients, inst.bounds, inst.r, inst.positions
    pos, neg = a > 0, a < 0
    a_plus, a_minus = float(a[pos].sum()), float(-a[neg].sum())
    total = a_plus + a_minus
    src = np.append(a[pos], a_minus) / total
    snk = np.append(-a[neg], a_plus) / total
    snk *= src.sum() / snk.sum()
    C = np.zeros((src.size, snk.size))
    C[:-1, :-1] = _extended(P[pos], b[pos], P[neg], b[neg], r)
    C[:-1, -1] = b[pos]
    C[-1, :-1] = b[neg]
    _, log = ot.emd(src, snk, C, numItermax=100_000_000, log=True)
    if log.get("warning"):
        raise SolverError(f"network simplex: {log['warning']}")
    cost = float(log["cost"]) * total
    u = np.asarray(log["u"], dtype=float)
    # c-transform of the source potentials gives a 1-Lipschitz potential on all entries
    Ps, bs, us = P[pos], b[pos], u[:-1]
    g = np.empty(inst.n)
    for lo in range(0, inst.n, chunk):
        sl = slice(lo, lo + chunk)
        vals = _extended(Ps, bs, P[sl], b[sl], r) - us[:, None] if us.size else np.empty((0, b[sl].size))
        g[sl] = np.minimum(vals.min(axis=0, initial=np.inf), b[sl] - u[-1])
    g_boundary = min(float((bs - us).min(initial=np.inf)), -float(u[-1]))
    f = -(g - g_boundary)
    # the boundary pins f to [-b, b]; clip rounding noise only
    f = np.clip(f, -b, b)
    value = float(a @ f)
    return value, f, max(cost - value, 0.0)


def lipschitz_dual_value(inst, n_exact=N_EXACT, gap_tol=1e-9):
    """Solve the Lipschitz-dual linear program.

    Parameters
    ----------
    inst : LipschitzDualInstance
    n_exact : int, default=400
        Up to this many entries the LP is solved directly (HiGHS dual
        simplex); larger instances go through the equivalent transport problem
        (network simplex) and a feasible ``f`` is recovered by a c-transform.
    gap_tol : float
        Relative tolerance on the certificate gap ``cost - sum a f``.

    Returns
    -------
    DualSolution
        ``value`` is the LP maximum divided by ``r^s``.

    Raises
    ------
    SolverError
        If the solver fails, the audit finds a violated constraint, or the
        certificate gap is too large.
    """
    if inst.n == 0:
        return DualSolution(0.0, np.zeros(0), "empty", 0.0, 0.0, audit_solution(inst, np.zeros(0)))
    a = inst.coefficients
    if np.all(a >= 0) or np.all(a <= 0):
        # f = +-b is 1/r-Lipschitz and attains the ceiling sum |a| b
        f = np.copysign(inst.bounds, a.sum()) if a.sum() != 0 else np.zeros(inst.n)
        raw, gap = float(np.abs(a) @ inst.bounds), 0.0
        method = "one-signed"
    elif inst.n <= n_exact:
        raw, f, gap = _solve_highs(inst)
        method = "exact-lp"
    else:
        raw, f, gap = _solve_network(inst)
        method = "network-simplex"
    # |b_i - b_j| <= |p_i - p_j| / r by the reverse triangle inequality
    audit = audit_solution(inst, f, pairs=method != "one-signed")
    scale = max(1.0, float(np.abs(inst.coefficients) @ inst.bounds))
    if min(audit.values()) < -FEASIBILITY_TOL:
        raise SolverError(f"{method}: recovered f violates a constraint ({audit})", gap)
    if gap > gap_tol * scale:
        raise SolverError(f"{method}: certificate gap {gap:.3g} too large", gap)
    ceiling = float(np.abs(inst.coefficients) @ inst.bounds)
    if raw > ceiling * (1 + 1e-9) + 1e-12:
        raise SolverError(f"{method}: value {raw:.6g} exceeds the a-priori bound {ceiling:.6g}", gap)
    raw = max(raw, 0.0)
    return DualSolution(raw / inst.r**inst.s, f, method, gap, raw, audit)


# ------------------------------------------------------------ brute force


def _prufer_parents(seq, n_nodes):
    degree = np.ones(n_nodes, dtype=int)
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = int(np.flatnonzero(degree == 1)[0])
        edges.append((leaf, v))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = np.flatnonzero(degree == 1)
    edges.append((int(u), int(w)))
    adj = [[] for _ in range(n_nodes)]
    for p, q in edges:
        adj[p].append(q)
        adj[q].append(p)
    parent = np.full(n_nodes, -1)
    stack, seen = [0], {0}
    while stack:
        v = stack.pop()
        for w_ in adj[v]:
            if w_ not in seen:
                seen.add(w_)
                parent[w_] = v
                stack.append(w_)
    return parent[1:]


@lru_cache(maxsize=8)
def _tree_structures(n):
    """All labelled trees on ``{0 (boundary), 1..n}`` rooted at 0.

    Returns ``parents`` of shape (T, n) and ``anc`` of shape (T, n, n) with
    ``anc[t, v, u]`` true when node ``u + 1`` lies on the path from ``v + 1``
    to the root (``v`` included).
    """
    if n == 1:
        parents = np.zeros((1, 1), dtype=int)
    else:
        parents = np.array([_prufer_parents(seq, n + 1)
                            for seq in itertools.product(range(n + 1), repeat=n - 1)])
    T = parents.shape[0]
    anc = np.zeros((T, n, n), dtype=bool)
    cur = np.tile(np.arange(1, n + 1), (T, 1))
    rows = np.arange(T)[:, None]
    cols = np.arange(n)[None, :]
    for _ in range(n):
        live = cur > 0
        anc[np.broadcast_to(rows, cur.shape)[live], np.broadcast_to(cols, cur.shape)[live], cur[live] - 1] = True
        nxt = np.zeros_like(cur)
        nxt[live] = parents[np.broadcast_to(rows, cur.shape)[live], cur[live] - 1]
        cur = nxt
    return parents, anc


def brute_force_dual_value(inst, chunk=4096):
    """Dual value by exhaustive vertex enumeration (``n <= 6``).

    Every vertex of the constraint polytope has ``n`` independent tight
    constraints ``f_u - f_w = +-L_uw`` or ``f_u = +-b_u``; read as edges on
    ``{boundary, 1..n}`` they form a spanning tree.  All labelled trees
    (Pruefer sequences) and sign patterns are enumerated; the largest
    objective over the feasible vertices is the maximum.
    """
    n = inst.n
    if n > 6:
        raise InputError(f"brute force is limited to n <= 6 entries, got {n}")
    if n == 0:
        return 0.0
    a, b = inst.coefficients, inst.bounds
    L = inst.lengths()
    parents, anc = _tree_structures(n)
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
    nodes = np.arange(n)[None, :]
    tol = 1e-10 * max(1.0, float(b.max()))
    best = -math.inf
    for lo in range(0, len(parents), chunk):
        par, A = parents[lo:lo + chunk], anc[lo:lo + chunk]
        # E[t, u]: length of the tight constraint joining u to its parent
        E = np.where(par == 0, b[None, :], L[nodes, np.maximum(par - 1, 0)])
        f = np.matmul(A * E[:, None, :], signs.T).transpose(0, 2, 1).reshape(-1, n)
        ok = np.all(np.abs(f) <= b + tol, axis=1)
        cand = f[ok]
        ok2 = np.all(np.abs(cand[:, :, None] - cand[:, None, :]) <= L + tol, axis=(1, 2))
        if np.any(ok2):
            best = max(best, float((cand[ok2] @ a).max()))
    if best == -math.inf:
        raise SolverError("no feasible vertex found")
    return max(best, 0.0) / inst.r**inst.s


def random_instance(rng, n, d=2, r=1.0, s=1.0):
    """Random instance with ``n`` entries in ``B(0, 4r)`` and Gaussian coefficients."""
    x = np.zeros(d)
    dirs = rng.normal(size=(n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rad = 4 * r * rng.uniform(0, 1, size=(n, 1)) ** (1 / d) * 0.999
    return LipschitzDualInstance(x, r, s, dirs * rad, rng.normal(size=n))


# ----------------------------------------------------------- building


def _local_phi(mu, x, r):
    disp, dist, w = mu.local(x, 4 * r)
    return x + disp, PHI(dist / r) * w, 4.0 - dist / r


def c_coefficient(mu, nu, x, r):
    """``int phi(|.-x|/r) dmu / int phi(|.-x|/r) dnu``, or 0 when the denominator vanishes."""
    mu, x = _prepare(mu, x, r)
    nu, _ = _prepare(nu, x, r, floor=False)
    num = float(_local_phi(mu, x, r)[1].sum())
    den = float(_local_phi(nu, x, r)[1].sum())
    return num / den if den > 0 else 0.0


def _prepare(mu, x, r, floor=True):
    mu = resolve_measure(mu, r, x, extent=4 * r * (1 + 1e-9))
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != mu.dim:
        raise InputError(f"point has dimension {x.shape[0]}, measure lives in R^{mu.dim}")
    if floor:
        mu.check_resolution(r, "alpha")
    mu.check_window(x, 4 * r, "alpha (needs 4r + |x - center| <= R)")
    return mu, x


def _merge(P, a, tol):
    if len(P) < 2:
        return P, a
    pairs = cKDTree(P).query_pairs(tol, output_type="ndarray")
    if pairs.size == 0:
        return P, a
    g = sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(P), len(P)))
    _, labels = connected_components(g, directed=False)
    uniq, first = np.unique(labels, return_index=True)
    coef = np.bincount(labels, weights=a)[uniq]
    order = np.argsort(first)
    return P[first[order]], coef[order]


def build_instance(mu, nu, x, r, s, c=None, merge_tol=1e-9):
    """Signed entries ``phi(|p - x| / r) (mu_w - c nu_w)`` on ``B(x, 4r)``.

    Atoms closer than ``merge_tol * r`` are merged; entries whose net
    coefficient is negligible (``<= 1e-14`` of the total variation) are
    dropped.  ``c`` defaults to :func:`c_coefficient`.
    """
    mu, x = _prepare(mu, x, r)
    nu, _ = _prepare(nu, x, r, floor=False)
    Pm, am, _ = _local_phi(mu, x, r)
    Pn, an, _ = _local_phi(nu, x, r)
    mass_mu, mass_nu = float(am.sum()), float(an.sum())
    if c is None:
        c = mass_mu / mass_nu if mass_nu > 0 else 0.0
    P = np.vstack([Pm, Pn])
    a = np.concatenate([am, -c * an])
    keep = a != 0
    P, a = _merge(P[keep], a[keep], merge_tol * r)
    total = float(np.abs(a).sum())
    keep = np.abs(a) > 1e-14 * total
    return LipschitzDualInstance(x, r, s, P[keep], a[keep],
                                 {"c": c, "mass_mu": mass_mu, "mass_nu": c * mass_nu})


# ------------------------------------------------------------ candidates


def _unit_ball_volume(s):
    return math.pi ** (s / 2) / math.gamma(s / 2 + 1)


@dataclass
class Candidate:
    """A materializable candidate symmetric measure.

    ``geometry`` drives the rigorous lower bound: ``('lines', anchors, dirs)``,
    ``('plane', point, basis)``, ``('atoms', measure)`` or ``('zero',)``.
    """

    kind: str
    params: dict
    geometry: tuple
    builder: object = None

    def build(self):
        return self.builder()

    def distances(self, P):
        kind = self.geometry[0]
        if kind == "zero":
            return np.full(len(P), np.inf)
        if kind == "atoms":
            nu = self.geometry[1]
            if nu.n_atoms == 0:
                return np.full(len(P), np.inf)
            keep = nu.weights > 0
            if not np.any(keep):
                return np.full(len(P), np.inf)
            return cKDTree(nu.points[keep]).query(P)[0]
        if kind == "plane":
            _, point, basis = self.geometry
            D = P - point
            proj = D @ basis.T
            return np.sqrt(np.maximum((D * D).sum(axis=1) - (proj * proj).sum(axis=1), 0.0))
        _, anchors, dirs = self.geometry
        best = np.full(len(P), np.inf)
        for a0, u in zip(anchors, dirs):
            D = P - a0
            t = D @ u
            best = np.minimum(best, np.sqrt(np.maximum((D * D).sum(axis=1) - t * t, 0.0)))
        return best

    def lower_bound(self, P, phiw, b, r, s):
        """Each unmatched unit of ``mu`` mass travels to ``supp(nu)`` or to the boundary."""
        return float(phiw @ np.minimum(self.distances(P) / r, b)) / r**s

    def descriptor(self):
        return {"kind": self.kind, **self.params}


def _plane_basis_from_normal(n):
    n = n / np.linalg.norm(n)
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(len(n))]))
    return q[:, 1:len(n)].T


def _fibonacci_hemisphere(N):
    i = np.arange(2 * N) + 0.5
    z = 1 - i / N
    rho = np.sqrt(np.maximum(0.0, 1 - z * z))
    ang = math.pi * (1 + math.sqrt(5)) * i
    pts = np.column_stack([rho * np.cos(ang), rho * np.sin(ang), z])
    return pts[pts[:, 2] > 0][:N]


@dataclass(frozen=True)
class CandidateFamily:
    """Parametrized family of candidate symmetric measures through ``x``.

    Use the constructors :meth:`flat`, :meth:`spike`, :meth:`zero` and
    :meth:`explicit`.  ``include_zero`` adds the zero measure and ``extra``
    appends explicit candidates to any family.  Candidates are discretized
    with spacing ``h = mu.h`` when ``0 < mu.h <= r / h_ratio`` and
    ``r / h_ratio`` otherwise, on ``B(x, 4r(1 + margin))``.
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    include_zero: bool = True
    extra: tuple = ()
    h_ratio: float = 200.0
    margin: float = 0.25

    @classmethod
    def flat(cls, n_angles=180, angles=None, refine=True, n_normals=400, include_zero=True, **kw):
        return cls("flat", {"n_angles": n_angles, "angles": None if angles is None else tuple(angles),
                            "refine": refine, "n_normals": n_normals}, include_zero, **kw)

    @classmethod
    def spike(cls, k, ms=None, n_rotations=60, n_offsets=41, offset_range=4.7, refine=True,
              include_zero=True, **kw):
        k = int(k)
        if k < 1 or k % 2 == 0:
            raise InputError(f"spike families need odd k, got {k}")
        ms = tuple(m for m in range(1, k + 1) if k % m == 0) if ms is None else tuple(int(m) for m in ms)
        if any(k % m for m in ms):
            raise InputError(f"every m must divide k={k}")
        return cls("spike", {"k": k, "ms": ms, "n_rotations": n_rotations, "n_offsets": n_offsets,
                             "offset_range": offset_range, "refine": refine}, include_zero, **kw)

    @classmethod
    def zero(cls, **kw):
        return cls("zero", {}, True, **kw)

    @classmethod
    def explicit(cls, candidates, include_zero=True, **kw):
        return cls("explicit", {}, include_zero, tuple(candidates), **kw)

    def with_extra(self, *candidates):
        return replace(self, extra=self.extra + tuple(candidates))

    def transported(self, x, r, s):
        """Family seen from the rescaled frame ``y -> (y - x) / r``."""
        moved = []
        for nu in self.extra:
            nu = resolve_measure(nu, r, x, extent=4 * r * (1 + self.margin))
            moved.append(push_forward(nu, x, r, r ** (-s)))
        return replace(self, extra=tuple(moved))

    def to_dict(self):
        return {"kind": self.kind, **{k: v for k, v in self.params.items()},
                "include_zero": self.include_zero, "n_extra": len(self.extra),
                "h_ratio": self.h_ratio, "margin": self.margin}

    # ---- materialization
    def _flat_candidate(self, x, s, basis, h, R, label):
        d = x.shape[0]
        dens = 1.0 / _unit_ball_volume(s)
        basis = np.atleast_2d(basis)
        return Candidate("flat", label, ("plane", x, basis),
                         lambda: make_flat_measure(d, s, basis, x, dens, R, h))

    def _flat_angle(self, x, s, theta, h, R):
        u = np.array([[math.cos(theta), math.sin(theta)]])
        return self._flat_candidate(x, s, u, h, R, {"angle": float(theta)})

    def _spike_candidate(self, x, m, beta, t, h, R):
        u0 = np.array([math.cos(beta), math.sin(beta)])
        z = x - t * u0
        anchors = [x] + [z] * (m - 1)
        dirs = [np.array([math.cos(beta + math.pi * n / m), math.sin(beta + math.pi * n / m)])
                for n in range(m)]
        dens = 1.0 / (2 * m)

        def build():
            chunks = [_line_atoms(a0, u, x, R, h) for a0, u in zip(anchors, dirs)]
            pts = np.concatenate(chunks)
            prov = {"generator": "spike_candidate", "k": self.params["k"], "m": m, "beta": float(beta),
                    "offset": float(t), "center": z.tolist(), "h": h, "R": R}
            return DiscreteMeasure(pts, np.full(len(pts), dens * h), h, prov, (Window.ball(x, R),))

        params = {"m": m, "beta": float(beta), "offset": float(t)}
        return Candidate("spike", params, ("lines", np.array(anchors), np.array(dirs)), build)

    def generate(self, x, r, s, d, h, R):
        """Grid candidates in deterministic order: family grid, extras, zero."""
        out = []
        p = self.params
        if self.kind == "flat":
            if abs(s - round(s)) > 1e-12 or not 1 <= round(s) < d:
                raise InputError(f"flat candidates need an integer 1 <= s < d, got s={s}")
            s_int = int(round(s))
            if d == 2:
                angles = p["angles"] if p["angles"] is not None else math.pi * np.arange(p["n_angles"]) / p["n_angles"]
                out += [self._flat_angle(x, s_int, th, h, R) for th in angles]
            elif d == 3:
                for nv in _fibonacci_hemisphere(p["n_normals"]):
                    basis = _plane_basis_from_normal(nv) if s_int == 2 else nv[None, :]
                    out.append(self._flat_candidate(x, s_int, basis, h, R, {"vector": nv.tolist()}))
            else:
                rng = np.random.default_rng(0)
                for _ in range(p["n_normals"]):
                    q, _ = np.linalg.qr(rng.normal(size=(d, s_int)))
                    out.append(self._flat_candidate(x, s_int, q.T, h, R, {"basis": q.T.tolist()}))
        elif self.kind == "spike":
            if d != 2 or abs(s - 1) > 1e-12:
                raise InputError("spike candidates live in the plane with s = 1")
            betas = math.pi * np.arange(p["n_rotations"]) / p["n_rotations"]
            offsets = r * np.linspace(-p["offset_range"], p["offset_range"], p["n_offsets"])
            for m in p["ms"]:
                for beta in betas:
                    for t in (offsets if m > 1 else [0.0]):
                        out.append(self._spike_candidate(x, m, beta, float(t), h, R))
        elif self.kind not in ("zero", "explicit"):
            raise InputError(f"unknown family kind {self.kind!r}")
        for j, nu in enumerate(self.extra):
            nu = resolve_measure(nu, r, x, extent=R)
            if nu.dim != d:
                raise InputError("explicit candidate lives in the wrong dimension")
            nu.check_window(x, 4 * r, "explicit candidate")
            out.append(Candidate("explicit", {"index": j, "generator": nu.provenance.get("generator", "atoms")},
                                 ("atoms", nu), (lambda nu=nu: nu)))
        if self.include_zero or self.kind == "zero":
            out.append(Candidate("zero", {}, ("zero",),
                                 lambda: DiscreteMeasure(np.zeros((0, d)), np.zeros(0), 0.0, {"generator": "zero"})))
        return out

    def refinements(self, best, x, r, s, d, h, R):
        """One-dimensional refinement axes ``(lo, hi, make)`` around ``best``."""
        p = self.params
        if not p.get("refine", False):
            return []
        if best.kind == "flat" and d == 2 and "angle" in best.params:
            step = math.pi / p["n_angles"]
            th = best.params["angle"]
            return [(th - step, th + step, lambda v: self._flat_angle(x, int(round(s)), v, h, R))]
        if best.kind == "spike":
            m, beta, t = best.params["m"], best.params["beta"], best.params["offset"]
            step = math.pi / p["n_rotations"]
            axes = [("beta", beta - step, beta + step)]
            if m > 1:
                dt = r * 2 * p["offset_range"] / max(p["n_offsets"] - 1, 1)
                axes.append(("offset", t - dt, t + dt))
            return axes
        return []


@dataclass
class AlphaResult:
    """Outcome of an alpha minimization; unpacks as ``(value, candidate)``."""

    value: float
    candidate: dict
    solution: DualSolution
    stats: dict
    lower_bound: float = math.nan

    def __iter__(self):
        yield self.value
        yield self.candidate


class _Evaluator:
    """Branch and bound over candidates with two rigorous lower bounds.

    ``lb`` is the cheap bound of :meth:`Candidate.lower_bound`.  ``sharp_lb``
    builds the candidate and tests the objective against the one-parameter
    family ``f_m = +-clip(dist(., supp nu) / r - m, -b, b)``, each member
    being ``1/r``-Lipschitz and vanishing on the sphere, so every value is a
    lower bound for the dual maximum.  With ``rel_tol > 0`` a candidate is
    also skipped once its bound is within ``rel_tol`` of the incumbent; the
    smallest skipped bound is reported as a certified lower end.
    """

    M_GRID = np.linspace(0.0, 4.0, 161)

    def __init__(self, mu, x, r, s, n_exact, P, phiw, b, rel_tol=0.0):
        self.mu, self.x, self.r, self.s, self.n_exact = mu, x, r, s, n_exact
        self.P, self.phiw, self.b = P, phiw, b
        self.rel_tol = rel_tol
        self.best = (math.inf, None, None, None)
        self.n_solved = 0
        self.n_pruned = 0
        self.lower = math.inf

    def lb(self, cand):
        return cand.lower_bound(self.P, self.phiw, self.b, self.r, self.s)

    def sharp_lb(self, cand, nu):
        r = self.r
        Q, phiw_nu, b_nu = _local_phi(nu, self.x, r)
        den = float(phiw_nu.sum())
        c = float(self.phiw.sum()) / den if den > 0 else 0.0
        d_mu = np.minimum(cand.distances(self.P) / r, 8.0)
        d_nu = np.minimum(cand.distances(Q) / r, 8.0) if len(Q) else np.zeros(0)
        m = self.M_GRID[:, None]
        g = (np.clip(d_mu[None, :] - m, -self.b, self.b) @ self.phiw
             - c * (np.clip(d_nu[None, :] - m, -b_nu, b_nu) @ phiw_nu))
        return float(np.abs(g).max()) / r**self.s

    def _skip(self, bound):
        v = self.best[0]
        if bound > v:
            return True
        return self.rel_tol > 0 and bound >= (1.0 - self.rel_tol) * v

    def solve(self, cand, nu=None):
        nu = cand.build() if nu is None else nu
        inst = build_instance(self.mu, nu, self.x, self.r, self.s)
        self.n_solved += 1
        return lipschitz_dual_value(inst, self.n_exact)

    def offer(self, idx, cand, lb=None):
        """Evaluate ``cand`` unless a lower bound rules it out; returns a value or a bound."""
        lb = self.lb(cand) if lb is None else lb
        if self._skip(lb):
            self.n_pruned += 1
            self.lower = min(self.lower, lb)
            return lb
        nu = None
        if self.best[0] < math.inf and cand.kind != "zero":
            nu = cand.build()
            lb = max(lb, self.sharp_lb(cand, nu))
            if self._skip(lb):
                self.n_pruned += 1
                self.lower = min(self.lower, lb)
                return lb
        sol = self.solve(cand, nu)
        v = sol.value
        if v < self.best[0] or (v == self.best[0] and idx < self.best[3]):
            self.best = (v, cand, sol, idx)
        return v


def _golden(f, lo, hi, iters):
    g = (math.sqrt(5) - 1) / 2
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)


def alpha_general(mu, x, r, s, family, n_exact=N_EXACT, golden_iters=GOLDEN_ITERS, rel_tol=0.0):
    """Alpha number of ``mu`` at ``B(x, r)`` over a candidate family.

    Candidates are visited in increasing order of a rigorous lower bound on
    their dual value and the scan stops once that bound exceeds the best value
    found, so the result equals the minimum over the whole grid.  A golden
    section refinement around the grid minimizer follows when the family
    allows it.

    Parameters
    ----------
    mu : DiscreteMeasure or MeasureSpec
    x : array-like
    r : float
    s : float
    family : CandidateFamily
    n_exact : int, default=400
    golden_iters : int, default=6
        Golden-section steps per refinement axis; each step costs one solve
        unless the lower bound prunes it.
    rel_tol : float, default=0.0
        Skip candidates whose rigorous lower bound is at least
        ``(1 - rel_tol)`` times the incumbent.  With the default the value is
        the exact minimum over the evaluated candidates; otherwise the true
        minimum lies in ``[lower_bound, value]``.

    Returns
    -------
    AlphaResult
    """
    mu, x = _prepare(mu, x, r)
    d = mu.dim
    h = mu.resolution if 0 < mu.resolution <= r / family.h_ratio * (1 + 1e-12) else r / family.h_ratio
    R = 4 * r * (1 + family.margin)
    cands = family.generate(x, r, s, d, h, R)
    if not cands:
        raise InputError("empty candidate family")
    P, phiw, b = _local_phi(mu, x, r)
    ev = _Evaluator(mu, x, r, s, n_exact, P, phiw, b, rel_tol)
    lbs = np.array([ev.lb(c) for c in cands])
    for i in np.argsort(lbs, kind="stable"):
        if lbs[i] > ev.best[0]:
            ev.n_pruned += len(cands) - ev.n_solved - ev.n_pruned
            ev.lower = min(ev.lower, float(lbs[i]))
            break
        ev.offer(int(i), cands[i], lbs[i])
    n_grid = len(cands)
    if ev.best[0] > 1e-12:
        _refine(ev, family, x, r, s, d, h, R, golden_iters, n_grid)
    value, cand, sol, _ = ev.best
    stats = {"n_candidates": n_grid, "n_solved": ev.n_solved, "n_pruned": ev.n_pruned, "h": h}
    return AlphaResult(value, cand.descriptor(), sol, stats, min(value, ev.lower))


def _refine(ev, family, x, r, s, d, h, R, iters, counter):
    best = ev.best[1]
    counter = [counter]

    def offer(c):
        counter[0] += 1
        return ev.offer(counter[0], c)

    if best.kind == "flat" and d == 3 and family.params.get("refine"):
        rng = np.random.default_rng(0)
        spread = math.sqrt(4 * math.pi / family.params["n_normals"])
        s_int = int(round(s))
        for _ in range(3):
            v0 = np.asarray(ev.best[1].params["vector"])
            for _ in range(30):
                nv = v0 + spread * rng.normal(size=3) / math.sqrt(3)
                nv /= np.linalg.norm(nv)
                basis = _plane_basis_from_normal(nv) if s_int == 2 else nv[None, :]
                offer(family._flat_candidate(x, s_int, basis, h, R, {"vector": nv.tolist()}))
            spread /= 3
        return
    axes = family.refinements(best, x, r, s, d, h, R)
    if best.kind == "flat":
        for lo, hi, make in axes:
            _golden(lambda v: offer(make(v)), lo, hi, iters)
        return
    for name, lo, hi in axes:
        cur = ev.best[1].params

        def make(v, name=name, cur=cur):
            p = dict(cur)
            p[name] = v
            return family._spike_candidate(x, p["m"], p["beta"], p["offset"], h, R)

        _golden(lambda v: offer(make(v)), lo, hi, iters)


def alpha_flat(mu, x, r, s, sampling=None, n_exact=N_EXACT, h_ratio=200.0, margin=0.25,
               golden_iters=GOLDEN_ITERS, rel_tol=0.0):
    """Transport distance to the best flat candidate ``c H^s`` on ``x + L``.

    ``sampling`` is passed to :meth:`CandidateFamily.flat` (for instance
    ``{'angles': [...], 'refine': False}`` to restrict the planes).
    """
    if abs(s - round(s)) > 1e-12:
        raise InputError(f"flat candidates need an integer s, got {s}")
    fam = CandidateFamily.flat(include_zero=False, h_ratio=h_ratio, margin=margin, **(sampling or {}))
    return alpha_general(mu, x, r, s, fam, n_exact, golden_iters, rel_tol)


def alpha_scan(mu, x, radii, s, family, threshold=0.02, n_exact=N_EXACT, golden_iters=GOLDEN_ITERS,
               rel_tol=0.0):
    """Alpha numbers along a decreasing radius grid."""
    radii = np.unique(np.asarray(radii, dtype=float))[::-1]
    vals, lowers, errs, kinds, params, methods, gaps = [], [], [], [], [], [], []
    floor = 0.0
    for r in radii:
        m, _ = _prepare(mu, x, r)
        res = alpha_general(m, x, r, s, family, n_exact, golden_iters, rel_tol)
        vals.append(res.value)
        lowers.append(res.lower_bound)
        errs.append(_alpha_error(m, x, r, s, res.stats["h"]))
        kinds.append(res.candidate["kind"])
        params.append(json.dumps({k: v for k, v in res.candidate.items() if k != "kind"}, sort_keys=True))
        methods.append(res.solution.method)
        gaps.append(res.solution.certificate_gap)
        floor = max(floor, m.resolution_floor())
    return ScanResult("alpha", radii, vals, errs, threshold, floor,
                      columns={"alpha_lower": lowers, "best_candidate_kind": kinds, "best_candidate_params": params,
                               "solver_method": methods, "gap": gaps},
                      meta={"s": s, "family": family.to_dict(), "value_name": "alpha"})


def _alpha_error(mu, x, r, s, h_candidate):
    """Moving every atom of ``mu`` and of ``c nu`` by half a grid step: ``(h_mu + h_nu) m / r^(s+1)``."""
    _, phiw, _ = _local_phi(mu, x, r)
    return 0.5 * (mu.resolution + h_candidate) / r * 2 * float(phiw.sum()) / r**s


@dataclass(frozen=True)
class ScalingCheck:
    lhs: float
    rhs: float
    gap: float


def scaling_invariance_check(mu, x, r, s, family, n_exact=N_EXACT):
    """Compare ``alpha_mu(B(x, r))`` with ``alpha_{mu~}(B(0, 1))`` for ``mu~ = r^-s T_{x,r} mu``."""
    from .blowup import rescale

    base, x = _prepare(mu, x, r)
    lhs = alpha_general(base, x, r, s, family, n_exact).value
    tilde = rescale(base, x, r, s)
    rhs = alpha_general(tilde, np.zeros_like(x), 1.0, s, family.transported(x, r, s), n_exact).value
    return ScalingCheck(lhs, rhs, abs(lhs - rhs))
