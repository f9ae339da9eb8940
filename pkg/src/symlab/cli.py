"""Batch experiment runner: ``lab <subcommand> --config run.yaml``.

A run reads one YAML file (schema in the README), executes one scan type and
writes plain CSV tables plus ``manifest.json`` into the output directory.
CSV bodies depend only on the config and seed; wall-clock data lives in the
manifest.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from .errors import ConfigError, LabError, TrustedWindowError
from .functionals import (_fmt, density_scan, optimal_epsilon, pv_estimator, pv_to_sla_check, sla_scan,
                          symmetric_point_scan, annulus_sup, upper_density_bound)
from .kernels import (KERNELS, QuadratureSpec, kernel_from_config, multiplier, multiplier_nonvanishing_scan,
                      multiplier_rows, sphere_grid)
from .measures import (GENERATORS, MeasureSpec, read_measure_table, resolve_measure, support_sample,
                       write_measure_table)
from .transport import GOLDEN_ITERS, N_EXACT, CandidateFamily, alpha_scan

SUBCOMMANDS = ("gen", "sla", "alpha", "pv", "defect", "density", "multiplier", "blowup", "verify")
TOP_KEYS = {"measure", "kernel", "points", "radii", "s", "tau", "family", "thresholds", "solver",
            "output", "seed", "pv", "multiplier", "blowup", "verify"}


def _version():
    try:
        return version("symlab")
    except PackageNotFoundError:  # pragma: no cover - source checkout without install
        return "unknown"


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``raw`` keeps the parsed YAML (with the effective seed) so the manifest
    can echo exactly what was run.
    """

    measure: dict | None
    kernel: dict
    points: dict
    radii: dict | None
    s: float
    tau: list
    family: dict
    thresholds: dict
    solver: dict
    output: dict
    seed: int
    sections: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data, seed=None, out=None):
        if not isinstance(data, dict):
            raise ConfigError("<root>", "the config must be a mapping")
        unknown = set(data) - TOP_KEYS
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(key, f"unknown key (allowed: {sorted(TOP_KEYS)})")
        data = json.loads(json.dumps(data))
        if seed is not None:
            data["seed"] = int(seed)
        data.setdefault("seed", 0)
        if out is not None:
            data.setdefault("output", {})["dir"] = str(out)
        measure = data.get("measure")
        if measure is not None:
            if "table" not in measure:
                gen = measure.get("generator")
                if gen not in GENERATORS:
                    raise ConfigError("measure.generator", f"unknown generator {gen!r}; known: {sorted(GENERATORS)}")
        kernel = data.get("kernel", {"name": "riesz", "params": {"d": 2}})
        if kernel.get("name") not in KERNELS:
            raise ConfigError("kernel.name", f"unknown kernel {kernel.get('name')!r}; known: {sorted(KERNELS)}")
        radii = data.get("radii")
        if radii is not None:
            for key in ("r_max", "ratio", "count"):
                if key not in radii:
                    raise ConfigError(f"radii.{key}", "missing")
            if not 0 < float(radii["ratio"]) < 1:
                raise ConfigError("radii.ratio", f"must lie in (0, 1), got {radii['ratio']}")
            if float(radii["r_max"]) <= 0 or int(radii["count"]) < 1:
                raise ConfigError("radii", "r_max must be positive and count >= 1")
        thresholds = data.get("thresholds", {}) or {}
        for key, val in thresholds.items():
            if val is not None and not float(val) > 0:
                raise ConfigError(f"thresholds.{key}", "thresholds must be positive")
        tau = data.get("tau", [0.5])
        tau = [tau] if not isinstance(tau, list) else tau
        for t in tau:
            if not 0 < float(t) <= 1:
                raise ConfigError("tau", f"tau must lie in (0, 1], got {t}")
        family = data.get("family", {"kind": "flat"})
        if family.get("kind") not in ("flat", "spike", "zero", "explicit"):
            raise ConfigError("family.kind", f"unknown family {family.get('kind')!r}")
        sections = {k: data.get(k, {}) or {} for k in ("pv", "multiplier", "blowup", "verify")}
        return cls(measure, kernel, data.get("points", {"list": [[0.0, 0.0]]}), radii,
                   float(data.get("s", 1.0)), [float(t) for t in tau], family, thresholds,
                   data.get("solver", {}) or {}, data.get("output", {}) or {}, int(data["seed"]),
                   sections, data)

    # ---- builders
    def radius_grid(self):
        if self.radii is None:
            raise ConfigError("radii", "this subcommand needs a radius grid")
        r = float(self.radii["r_max"]) * float(self.radii["ratio"]) ** np.arange(int(self.radii["count"]))
        return r

    def build_measure(self):
        m = self.measure
        if m is None:
            raise ConfigError("measure", "this subcommand needs a measure")
        if "table" in m:
            return read_measure_table(m["table"])
        params = dict(m.get("params", {}))
        if m.get("h_ratio"):
            return MeasureSpec(m["generator"], params, h_ratio=float(m["h_ratio"]))
        try:
            return GENERATORS[m["generator"]](**params)
        except TypeError as exc:
            raise ConfigError("measure.params", str(exc)) from exc

    def build_kernel(self):
        try:
            return kernel_from_config(self.kernel["name"], **(self.kernel.get("params") or {}))
        except TypeError as exc:
            raise ConfigError("kernel.params", str(exc)) from exc

    def build_points(self, mu):
        p = self.points
        if "list" in p:
            pts = np.atleast_2d(np.asarray(p["list"], dtype=float))
            return pts
        if "sample" in p:
            base = resolve_measure(mu)
            reach = p.get("min_inner_radius")
            if reach is None:
                reach = 4 * float(self.radii["r_max"]) if self.radii else 0.0
            return support_sample(base, int(p["sample"]), int(p.get("seed", self.seed)), float(reach))
        raise ConfigError("points", "give either 'list' or 'sample'")

    def build_family(self, mu=None):
        f = dict(self.family)
        kind = f.pop("kind")
        params = f.pop("params", {}) or {}
        if kind == "flat":
            return CandidateFamily.flat(**params)
        if kind == "spike":
            return CandidateFamily.spike(**params)
        if kind == "zero":
            return CandidateFamily.zero(**params)
        tables = params.pop("tables", [])
        return CandidateFamily.explicit([read_measure_table(t) for t in tables], **params)


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    version: str
    outputs: list
    wall_clock_seconds: float
    started: str
    verdicts: dict

    def write(self, directory):
        path = Path(directory) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def check_windows(mu, points, r_max):
    """Refuse scans whose ``B(x, 4 r_max)`` leaves the trusted window.

    Raises
    ------
    TrustedWindowError
        Naming the violated inequality ``4 r_max <= dist(x, window boundary)``.
    """
    base = mu.materialize() if isinstance(mu, MeasureSpec) else mu
    for x in points:
        rho = base.inner_radius(x)
        if 4 * r_max > rho * (1 + 1e-12):
            raise TrustedWindowError(
                f"window check failed at x={np.asarray(x).tolist()}: need 4 r_max <= R - |x - c|, "
                f"i.e. 4 * {r_max:.6g} = {4 * r_max:.6g} <= {rho:.6g}")


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ------------------------------------------------------------ subcommands


def _run_gen(cfg, out, threads):
    mu = cfg.build_measure()
    if isinstance(mu, MeasureSpec):
        r_min = float(cfg.radius_grid().min()) if cfg.radii else None
        mu = mu.materialize(r_min)
    path = out / cfg.output.get("table", "measure.txt")
    write_measure_table(mu, path)
    return [path.name], {"n_atoms": mu.n_atoms, "total_mass": mu.total_mass, "h": mu.resolution}


def _run_sla(cfg, out, threads):
    mu, K, radii = cfg.build_measure(), cfg.build_kernel(), cfg.radius_grid()
    pts = cfg.build_points(mu)
    check_windows(mu, pts, float(radii.max()))
    thr = cfg.thresholds.get("sla")
    jobs = [(i, j, x, tau) for i, x in enumerate(pts) for j, tau in enumerate(cfg.tau)]
    scans = _map(lambda job: sla_scan(mu, K, job[2], radii, job[3], cfg.s, threshold=thr), jobs, threads)
    files, verdicts = [], {}
    for (i, j, _, _), sc in zip(jobs, scans):
        name = f"sla_p{i}_tau{j}.csv"
        sc.to_csv(out / name)
        files.append(name)
        verdicts[f"p{i}_tau{j}"] = sc.summary()
    return files, verdicts


def _run_alpha(cfg, out, threads):
    mu, radii = cfg.build_measure(), cfg.radius_grid()
    pts = cfg.build_points(mu)
    check_windows(mu, pts, float(radii.max()))
    fam = cfg.build_family()
    sol = cfg.solver
    thr = float(cfg.thresholds.get("alpha", 0.02))

    def one(x):
        return alpha_scan(mu, x, radii, cfg.s, fam, thr, int(sol.get("n_exact", N_EXACT)),
                          int(sol.get("golden_iters", GOLDEN_ITERS)), float(sol.get("rel_tol", 0.0)))

    files, verdicts = [], {}
    for i, sc in enumerate(_map(one, list(pts), threads)):
        name = f"alpha_p{i}.csv"
        sc.to_csv(out / name)
        files.append(name)
        summ = sc.summary()
        summ["tail_lower"] = float(np.min(np.asarray(sc.columns["alpha_lower"], dtype=float)[sc.tail]))
        verdicts[f"p{i}"] = summ
    return files, verdicts


def _run_pv(cfg, out, threads):
    mu, K, radii = cfg.build_measure(), cfg.build_kernel(), cfg.radius_grid()
    pts = cfg.build_points(mu)
    check_windows(mu, pts, float(radii.max()))
    sec = cfg.sections["pv"]
    eps_grid = np.linspace(0.01, 0.49, 49)
    files, verdicts = [], {}
    for i, x in enumerate(pts):
        res = pv_estimator(mu, K, x, cfg.s, radii)
        name = f"pv_p{i}.csv"
        m = res.values.shape[1]
        header = ["epsilon", *([f"I_{j + 1}" for j in range(m)] if m > 1 else ["I"])]
        _write_csv(out / name, header, [[e, *v] for e, v in zip(res.epsilons, res.values)])
        files.append(name)
        r = float(sec.get("r", radii.max()))
        base = resolve_measure(mu, r, x, extent=4 * r)
        delta = annulus_sup(base, K, x, cfg.s, r)
        k = upper_density_bound(base, x, cfg.s, r)
        eps = float(sec.get("eps", optimal_epsilon(k, delta, eps_grid)))
        chk = pv_to_sla_check(base, K, x, cfg.s, r, eps, delta, k)
        verdicts[f"p{i}"] = {"cauchy_defect": res.cauchy_defect, "excluded_center_atom": res.excluded_center_atom,
                             "r": r, "eps": eps, "delta": delta, "k": k, "lhs": chk.lhs, "bound": chk.bound,
                             "simple_bound": chk.simple_bound, "constant": chk.constant, "passed": chk.passed}
    return files, verdicts


def _run_defect(cfg, out, threads):
    mu, K, radii = cfg.build_measure(), cfg.build_kernel(), cfg.radius_grid()
    pts = cfg.build_points(mu)
    check_windows(mu, pts, float(radii.max()))
    reports = symmetric_point_scan(mu, K, pts, radii, cfg.s, threshold=cfg.thresholds.get("defect"))
    d = pts.shape[1]
    header = [*[f"x_{j + 1}" for j in range(d)], "defect", "error_estimate", "symmetric"]
    _write_csv(out / "defect.csv", header,
               [[*rep.point, rep.defect, rep.error_estimate, int(rep.symmetric)] for rep in reports])
    return ["defect.csv"], {"n_symmetric": sum(r.symmetric for r in reports), "n_points": len(reports),
                            "max_defect": max(r.defect for r in reports)}


def _run_density(cfg, out, threads):
    mu, radii = cfg.build_measure(), cfg.radius_grid()
    pts = cfg.build_points(mu)
    check_windows(mu, pts, float(radii.max()))
    files, verdicts = [], {}
    for i, x in enumerate(pts):
        sc = density_scan(mu, x, radii, cfg.s)
        name = f"density_p{i}.csv"
        sc.to_csv(out / name)
        files.append(name)
        verdicts[f"p{i}"] = {"tail_min": sc.tail_min, "tail_max": sc.tail_max}
    return files, verdicts


def _run_multiplier(cfg, out, threads):
    K = cfg.build_kernel()
    sec = cfg.sections["multiplier"]
    quad = QuadratureSpec(**(sec.get("quad") or {}))
    nodes = int(sec.get("sphere_nodes", 16))
    vals = _map(lambda xi: multiplier(K, xi, quad), list(sphere_grid(K.dim, nodes)), threads)
    header, rows = multiplier_rows(vals)
    _write_csv(out / "multiplier.csv", header, rows)
    scan = multiplier_nonvanishing_scan(K, max(nodes, 8), quad, float(sec.get("margin", 1e-6)))
    return ["multiplier.csv"], {"min_modulus": scan.min_modulus, "witness": scan.witness.tolist(),
                                "nonvanishing": bool(scan.nonvanishing), "margin": scan.margin}


def _run_blowup(cfg, out, threads):
    from .blowup import tangent_symmetry_experiment

    mu, K, radii = cfg.build_measure(), cfg.build_kernel(), cfg.radius_grid()
    pts = cfg.build_points(mu)
    check_windows(mu, pts, float(radii.max()))
    sec = cfg.sections["blowup"]
    files, verdicts = [], {}
    for i, a in enumerate(pts):
        rep = tangent_symmetry_experiment(mu, K, a, radii, cfg.s, sec.get("net_epsilon"),
                                          float(cfg.tau[0]))
        name = f"blowup_p{i}.csv"
        _write_csv(out / name, ["r", "blowup_defect", "sla"],
                   [[r, d, v] for r, d, v in zip(rep.radii, rep.blowup_defects, rep.sla_values)])
        files.append(name)
        summ = {"correlation": rep.correlation, "max_defect": float(rep.blowup_defects.max()),
                "max_sla": float(rep.sla_values.max())}
        if rep.weak is not None:
            mname = f"blowup_moments_p{i}.csv"
            header, rows = rep.weak.rows(rep.radii)
            _write_csv(out / mname, header, rows)
            files.append(mname)
            summ.update(cauchy_defect=rep.weak.cauchy_defect, diverging=rep.weak.diverging)
        verdicts[f"p{i}"] = summ
    return files, verdicts


def _run_verify(cfg, out, threads):
    from .verify import run_suite

    select = cfg.sections["verify"].get("criteria")
    results = run_suite(set(select) if select else None, echo=print)
    _write_csv(out / "verify.csv", ["criterion", "name", "verdict", "measured", "tolerance", "seconds", "detail"],
               [r.row() for r in results])
    return ["verify.csv"], {f"criterion_{r.number}": r.passed for r in results}


RUNNERS = {"gen": _run_gen, "sla": _run_sla, "alpha": _run_alpha, "pv": _run_pv, "defect": _run_defect,
           "density": _run_density, "multiplier": _run_multiplier, "blowup": _run_blowup,
           "verify": _run_verify}


def run(config, subcommand, threads=1):
    """Execute one subcommand and write its tables plus ``manifest.json``.

    Parameters
    ----------
    config : ExperimentConfig
    subcommand : str
    threads : int, default=1
        Worker threads for independent points; BLAS pools are capped to the
        same number.

    Returns
    -------
    RunManifest
    """
    if subcommand not in RUNNERS:
        raise ConfigError("subcommand", f"unknown subcommand {subcommand!r}")
    out = Path(config.output.get("dir", "results"))
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    with threadpool_limits(limits=max(1, threads)):
        files, verdicts = RUNNERS[subcommand](config, out, max(1, threads))
    manifest = RunManifest(subcommand, config.raw, _version(), files, time.perf_counter() - t0, started,
                           verdicts)
    manifest.write(out)
    return manifest


def load_config(path, seed=None, out=None):
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data, seed=seed, out=out)


def build_parser():
    p = argparse.ArgumentParser(prog="lab", description="Symmetric-measure experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=False, help="YAML experiment file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="seed for point sampling (overrides seed)")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            if args.subcommand != "verify":
                raise ConfigError("--config", "required for this subcommand")
            cfg = ExperimentConfig.from_dict({}, seed=args.seed, out=args.out)
        else:
            cfg = load_config(args.config, args.seed, args.out)
        manifest = run(cfg, args.subcommand, args.threads)
    except LabError as exc:
        print(f"lab {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output.get("dir", "results"))
    print(f"wrote {len(manifest.outputs)} file(s) and manifest.json to {out}")
    if args.subcommand == "verify":
        return 0 if all(manifest.verdicts.values()) else 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
