"""Command-line experiment runner: ``run <config>``, ``report <dir>``, ``zoo list``.

Per-seed work is split into fixed-size chunks of consecutive seeds, so the
chunking never depends on ``--workers`` and outputs are bit-identical across
worker counts. Exit codes: 0 pass or success, 1 error, 2 fail, 3 inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import construct, verify
from .cloud import Box, Neighborhood, PointCloud
from .cocycle import ZOO, SystemSpec, affine_series, system_from_config
from .driver import NoiseSpec, make_driver, shift
from .errors import ConfigError, ScheduleInfeasible
from .omega import OmegaConfig, invariance_check, omega_limit_batch

TASKS = ("omega", "strong-b", "strong-c", "weak-b", "weak-c", "criterion-strong", "criterion-weak",
         "classify", "equivalence")
EXIT = {"pass": 0, "success": 0, "strong": 0, "error": 1, "fail": 2, "not-strong": 2, "inconclusive": 3}
CHUNK = 32
MANIFEST = "manifest.json"


# --- config -------------------------------------------------------------------

def _need(params: dict, key: str, where: str):
    if key not in params:
        raise ConfigError(f"missing field {where}.{key}")
    return params[key]


def parse_region(spec, where: str):
    """Region JSON: {"box": {...}}, {"ball": {...}}, {"points": [...]}, or {"neighborhood": ...}."""
    if not isinstance(spec, dict):
        raise ConfigError(f"field {where} must be an object")
    try:
        if "box" in spec:
            return Box.from_json(spec["box"])
        if "ball" in spec:
            return Neighborhood.ball(spec["ball"]["center"], float(spec["ball"]["radius"]))
        if "points" in spec:
            return PointCloud(spec["points"])
        if "neighborhood" in spec:
            return Neighborhood.from_json(spec["neighborhood"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad region in field {where}: {exc}") from None
    raise ConfigError(f"field {where} needs one of box, ball, points, neighborhood")


def _omega_cfg(p: dict, where: str) -> OmegaConfig:
    try:
        return OmegaConfig(int(_need(p, "t_min", where)), int(_need(p, "t_max", where)),
                           int(p.get("stride", 1)), int(p.get("sample_density", 101)),
                           float(p.get("prune_eps", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"bad field {where}: {exc}") from None


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return normalize_config(cfg)


def normalize_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg = json.loads(json.dumps(cfg))
    system = _need(cfg, "system", "config")
    if isinstance(system, str):
        system = {"system": system, "params": cfg.get("params", {})}
    cfg["system"] = system
    ens = cfg.setdefault("ensemble", {})
    if not isinstance(ens, dict):
        raise ConfigError("field ensemble must be an object")
    ens.setdefault("seed_base", 0)
    ens.setdefault("count", 1)
    if not isinstance(ens["count"], int) or ens["count"] < 1:
        raise ConfigError("field ensemble.count must be an integer >= 1")
    if not isinstance(ens["seed_base"], int):
        raise ConfigError("field ensemble.seed_base must be an integer")
    override = os.environ.get("RA_SEED_OVERRIDE")
    if override:
        try:
            ens["seed_base"] = int(override)
        except ValueError:
            raise ConfigError("RA_SEED_OVERRIDE must be an integer") from None
    task = _need(cfg, "task", "config")
    if task not in TASKS:
        raise ConfigError(f"field task must be one of {list(TASKS)}, got {task!r}")
    cfg.setdefault("parameters", {})
    build_system(cfg)
    return cfg


def build_system(cfg: dict) -> SystemSpec:
    sysm = system_from_config(cfg["system"])
    if cfg.get("noise") is not None:
        noise = NoiseSpec.from_dict(cfg["noise"])
        if noise.increments_per_step != sysm.noise.increments_per_step:
            raise ConfigError("field noise must keep the system's increments_per_step")
        sysm = SystemSpec(sysm.name, sysm.dimension, sysm.step, sysm.parameters, noise, sysm.state_box,
                          sysm.metric, sysm.description)
    return sysm


def _seeds(cfg: dict) -> list[int]:
    ens = cfg["ensemble"]
    return list(range(ens["seed_base"], ens["seed_base"] + ens["count"]))


def _chunks(seeds: list[int]) -> list[list[int]]:
    return [seeds[i:i + CHUNK] for i in range(0, len(seeds), CHUNK)]


# --- attractor providers ------------------------------------------------------

def make_provider(sysm: SystemSpec, spec: dict):
    """Per-seed attractor estimate from config.

    kinds: "series" (affine closed form), "point", "omega" (Omega-limit of a
    region) and "strong-b". An optional "truncate": {"axis", "min"} keeps
    only points with coordinate >= min, as a deliberately wrong estimate.
    """
    kind = _need(spec, "kind", "parameters.attractor")
    trunc = spec.get("truncate")
    if kind == "series":
        depth = int(spec.get("depth", 200))

        def base(w):
            return PointCloud([[affine_series(sysm, w, depth)]])
    elif kind == "point":
        pt = PointCloud([_need(spec, "point", "parameters.attractor")])

        def base(w):
            return pt
    elif kind == "omega":
        region = parse_region(_need(spec, "B", "parameters.attractor"), "parameters.attractor.B")
        ocfg = _omega_cfg(spec, "parameters.attractor")

        def base(w):
            return omega_limit_batch(sysm, region, [w], ocfg)[0]
    elif kind == "strong-b":
        ocfg = _omega_cfg(spec, "parameters.attractor")
        k_max = int(spec.get("k_max", 3))

        def base(w):
            res = construct.strong_B_batch(sysm, [w], k_max, ocfg)[0]
            return None if res is None else res.attractor
    else:
        raise ConfigError(f"unknown attractor kind {kind!r}")
    if not trunc:
        return base
    axis, lo = int(trunc.get("axis", 0)), float(trunc.get("min", 0.0))

    def truncated(w):
        A = base(w)
        if A is None:
            return None
        keep = A.points[:, axis] >= lo
        return PointCloud(A.points[keep], A.resolution) if keep.any() else None
    return truncated


# --- per-chunk work (runs in worker processes) --------------------------------

def _drivers(sysm: SystemSpec, seeds):
    return [make_driver(s, sysm.noise) for s in seeds]


def _chunk_work(payload):
    cfg, seeds, shared = payload
    sysm = build_system(cfg)
    p = cfg["parameters"]
    ws = _drivers(sysm, seeds)
    records = _task_records(sysm, cfg, ws, shared)
    if "invariance_t" in p and cfg["task"] in ("omega", "strong-b", "strong-c", "weak-b", "weak-c"):
        t = int(p["invariance_t"])
        tol = float(p.get("invariance_tol", 1e-3))
        shifted = _task_records(sysm, cfg, [shift(w, t) for w in ws], shared)
        for w, rec, other in zip(ws, records, shifted):
            rec["invariance"] = None
            if rec["cloud"] is None or other["cloud"] is None:
                continue
            try:
                d = invariance_check(sysm, rec["cloud"], w, t, lambda _w, c=other["cloud"]: c)
            except ArithmeticError:
                continue
            rec["invariance"] = {"forward": d.forward, "strict": d.strict, "resolution": d.resolution,
                                 "within": d.within(tol)}
    return records


def _task_records(sysm, cfg, ws, shared):
    p = cfg["parameters"]
    task = cfg["task"]
    if task == "omega":
        region = parse_region(_need(p, "B", "parameters"), "parameters.B")
        clouds = omega_limit_batch(sysm, region, ws, _omega_cfg(p, "parameters"))
        return [{"cloud": c} for c in clouds]
    if task == "strong-b":
        x0 = p.get("x0")
        builds = construct.strong_B_batch(sysm, ws, int(p.get("k_max", 3)), _omega_cfg(p, "parameters"), x0)
        return [_strong_record(b) for b in builds]
    if task == "strong-c":
        c_sets = [Box.from_json(c) for c in shared["c_sets"]]
        builds = construct.strong_C_batch(sysm, ws, c_sets, _omega_cfg(p, "parameters"))
        return [_strong_record(b) for b in builds]
    if task in ("weak-b", "weak-c"):
        sched = construct.Schedule.from_json(shared["schedule"])
        res = construct.weak_batch(sysm, ws, sched, int(shared["n_window"]), float(p.get("prune_eps", 0.0)),
                                   int(p.get("density", 41)))
        return [_weak_record(r) for r in res]
    if task == "criterion-strong":
        B = parse_region(_need(p, "B", "parameters"), "parameters.B")
        C = _target(shared["C"])
        out, entry = verify.strong_outcomes(sysm, B, C, float(_need(p, "delta", "parameters")), ws,
                                            int(_need(p, "s_max", "parameters")),
                                            int(_need(p, "t_max", "parameters")), int(p.get("stride", 1)),
                                            int(p.get("density", 101)))
        return [{"outcome": bool(o), "entry": e} for o, e in zip(out, entry)]
    if task == "criterion-weak":
        B = parse_region(_need(p, "B", "parameters"), "parameters.B")
        C = _target(shared["C"])
        inside = verify.weak_curve(sysm, B, C, float(_need(p, "delta", "parameters")), ws, shared["t_grid"],
                                   p.get("images", "forward"), int(p.get("density", 101)))
        return [{"inside": row.tolist()} for row in inside]
    if task == "classify":
        B = parse_region(_need(p, "B", "parameters"), "parameters.B")
        prov = make_provider(sysm, _need(p, "attractor", "parameters"))
        out = []
        for w in ws:
            E, F, skipped = verify.mode_distances(sysm, prov, B, [w], shared["t_grid"], int(p.get("density", 101)))
            out.append({"e": E[0].tolist(), "f": F[0].tolist()} if not skipped else {"e": None, "f": None})
        return out
    if task == "equivalence":
        sets = [parse_region(b, "parameters.sets") for b in _need(p, "sets", "parameters")]
        prov = make_provider(sysm, _need(p, "attractor", "parameters"))
        dist, flags, _ = verify.equivalence_distances(sysm, prov, sets, ws, _omega_cfg(p, "parameters"),
                                                      float(p.get("tol", 1e-6)))
        # realign: skipped seeds are absent from the per-B lists
        present = [prov(w) is not None for w in ws]
        out, j = [], 0
        for ok in present:
            if ok:
                out.append({"dist": [d[j] for d in dist], "ok": [f[j] for f in flags]})
                j += 1
            else:
                out.append({"dist": None, "ok": None})
        return out
    raise ConfigError(f"unknown task {task!r}")


def _strong_record(b):
    if b is None:
        return {"cloud": None, "saturated": None, "increments": None}
    return {"cloud": b.attractor, "saturated": b.saturated, "increments": b.increments}


def _weak_record(r):
    if isinstance(r, Exception):
        return {"cloud": None, "j0": None, "unstable": type(r).__name__ == "WeakConstructionUnstable",
                "diverged": type(r).__name__ == "DivergenceError", "max_defect": None}
    return {"cloud": r.attractor, "j0": r.j0, "unstable": False, "diverged": False,
            "max_defect": max(r.nesting_defects, default=0.0)}


def _target(spec: dict):
    if "box" in spec:
        return Box.from_json(spec["box"])
    if "neighborhood" in spec:
        return Neighborhood.from_json(spec["neighborhood"])
    return PointCloud(spec["points"])


def _encode_target(C) -> dict:
    if isinstance(C, Box):
        return {"box": C.to_json()}
    if isinstance(C, Neighborhood):
        return {"neighborhood": C.to_json()}
    return {"points": C.points.tolist()}


def _map(payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [_chunk_work(pl) for pl in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chunk_work, payloads))


# --- shared (ensemble-level) preparation --------------------------------------

def _fit_sets(sysm, cfg, coverages):
    p = cfg["parameters"]
    fit = p.get("fit", {})
    B = parse_region(fit.get("B", p.get("B", {"box": {"lower": [-1.0] * sysm.dimension,
                                                     "upper": [1.0] * sysm.dimension}})), "parameters.fit.B")
    t = int(fit.get("t", 100))
    ws = _drivers(sysm, _seeds(cfg))
    return construct.fit_c_sets(sysm, ws, B, coverages, t, int(fit.get("density", 41)))


def _prepare(sysm: SystemSpec, cfg: dict) -> dict:
    p = cfg["parameters"]
    task = cfg["task"]
    if task == "strong-c":
        k_max = int(p.get("k_max", 4))
        coverages = [1.0 - 1.0 / k for k in range(2, k_max + 1)]
        return {"c_sets": [c.to_json() for c in _fit_sets(sysm, cfg, coverages)]}
    if task in ("weak-b", "weak-c"):
        n_max = int(p.get("n_max", 4))
        c_sets = _fit_sets(sysm, cfg, [1.0 - 2.0 ** -m for m in range(1, n_max + 1)])
        grid = p.get("u_grid", {"start": 2, "stop": 50})
        u_grid = list(range(int(grid["start"]), int(grid["stop"]) + 1, int(grid.get("step", 1))))
        ws = _drivers(sysm, _seeds(cfg))
        conf = float(p.get("confidence", 0.95))
        dens = int(p.get("density", 41))
        if task == "weak-b":
            sched = construct.find_schedule(sysm, ws, c_sets, n_max, u_grid, p.get("radii"), p.get("x0"),
                                            conf, False, dens)
        else:
            sched = construct.find_schedule_C(sysm, ws, c_sets, n_max, u_grid, float(p.get("gamma_max", 1.0)),
                                              float(p.get("gamma_min", 1e-3)), float(p.get("gamma_tol", 1e-2)),
                                              conf, dens)
        return {"schedule": sched.to_json(), "n_window": int(p.get("n_window", n_max))}
    if task in ("criterion-strong", "criterion-weak"):
        C = p.get("C")
        if C is None:
            raise ConfigError("missing field parameters.C")
        if "fit" in C:
            cov = float(C["fit"].get("coverage", 0.99))
            sub = dict(cfg, parameters=dict(p, fit=C["fit"]))
            target = _fit_sets(sysm, sub, [cov])[0]
        else:
            target = parse_region(C, "parameters.C")
        shared = {"C": _encode_target(target)}
        if task == "criterion-weak":
            shared["t_grid"] = _grid_param(p, "t_grid")
        return shared
    if task == "classify":
        return {"t_grid": _grid_param(p, "t_grid")}
    return {}


def _grid_param(p: dict, key: str) -> list[int]:
    g = _need(p, key, "parameters")
    if isinstance(g, list):
        return [int(t) for t in g]
    return list(range(int(g["start"]), int(g["stop"]) + 1, int(g.get("step", 1))))


# --- reduction and artifacts --------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _oracle_error(sysm, seed, cloud, depth=200):
    if sysm.name != "affine" or cloud is None:
        return None
    ref = affine_series(sysm, make_driver(seed, sysm.noise), depth)
    return float(np.max(np.abs(cloud.points[:, 0] - ref)))


def _reduce(sysm, cfg, seeds, records, shared) -> tuple[str, dict, dict]:
    """Verdict, JSON report and extra files (name -> text)."""
    p = cfg["parameters"]
    task = cfg["task"]
    files: dict[str, str] = {}
    if task in ("omega", "strong-b", "strong-c", "weak-b", "weak-c"):
        rows = []
        for s, r in zip(seeds, records):
            c = r["cloud"]
            if c is not None:
                buf = io.StringIO()
                np.savetxt(buf, c.points, delimiter=",", fmt="%.17g",
                           header=",".join(f"x{i}" for i in range(c.dimension)), comments="")
                files[f"clouds/seed_{s}.csv"] = buf.getvalue()
            row = {"seed": s, "points": None if c is None else len(c),
                   "resolution": None if c is None else c.resolution,
                   "oracle_error": _oracle_error(sysm, s, c)}
            for key in ("saturated", "j0", "unstable", "diverged", "max_defect"):
                if key in r:
                    row[key] = r[key]
            if "invariance_t" in p:
                d = r.get("invariance")
                row["invariance_forward"] = None if d is None else d["forward"]
                row["invariance_strict"] = None if d is None else d["strict"]
            rows.append(row)
        header = list(rows[0])
        files["summary.csv"] = _csv_text(header, [[_fmt(row[h]) for h in header] for row in rows])
        ok = [r["cloud"] is not None for r in records]
        report = {"task": task, "seeds": len(seeds), "completed": int(sum(ok))}
        errs = [row["oracle_error"] for row in rows if row["oracle_error"] is not None]
        if errs:
            report["max_oracle_error"] = max(errs)
        if task in ("strong-b", "strong-c"):
            report["saturated"] = int(sum(bool(r["saturated"]) for r in records if r["saturated"] is not None))
            if task == "strong-c":
                report["c_sets"] = shared["c_sets"]
        if task in ("weak-b", "weak-c"):
            files["schedule.json"] = json.dumps(shared["schedule"], indent=2, sort_keys=True)
            summ = construct.ensemble_summary(records, shared["n_window"], shared["schedule"]["kind"])
            report.update(summ)
        inv = [r["invariance"] for r in records if r.get("invariance") is not None]
        if "invariance_t" in p:
            report["invariance_defects"] = {
                "t": int(p["invariance_t"]), "checked": len(inv),
                "within": int(sum(d["within"] for d in inv)),
                "max_forward": max((d["forward"] for d in inv), default=None),
                "max_strict": max((d["strict"] for d in inv), default=None)}
        verdict = "success" if any(ok) else "fail"
        report["verdict"] = verdict
        return verdict, report, files
    if task == "criterion-strong":
        C = _target(shared["C"])
        rep = verify.strong_report([r["outcome"] for r in records], [r["entry"] for r in records], C,
                                   float(_need(p, "eps", "parameters")), float(p["delta"]), int(p["s_max"]),
                                   int(p["t_max"]), int(p.get("stride", 1)), float(p.get("confidence", 0.95)),
                                   p.get("criterion", "strongB"))
        files["summary.csv"] = _csv_text(["seed", "outcome", "entry_time"],
                                         [[s, r["outcome"], _fmt(r["entry"])] for s, r in zip(seeds, records)])
        return rep.verdict, rep.to_json(), files
    if task == "criterion-weak":
        C = _target(shared["C"])
        inside = np.array([r["inside"] for r in records], dtype=bool)
        rep = verify.weak_report(inside, shared["t_grid"], C, float(_need(p, "eps", "parameters")),
                                 float(p["delta"]), p.get("images", "forward"), float(p.get("confidence", 0.95)),
                                 p.get("criterion", "weakB"))
        files["curve.csv"] = _csv_text(["t", "p", "lower", "upper"],
                                       [[c["t"], repr(c["p"]), repr(c["lower"]), repr(c["upper"])]
                                        for c in rep.curve])
        files["summary.csv"] = _csv_text(["seed", "inside_last"],
                                         [[s, r["inside"][-1]] for s, r in zip(seeds, records)])
        return rep.verdict, rep.to_json(), files
    if task == "classify":
        kept = [(s, r) for s, r in zip(seeds, records) if r["e"] is not None]
        skipped = len(records) - len(kept)
        rep = verify.mode_report([r["e"] for _, r in kept], [r["f"] for _, r in kept], shared["t_grid"],
                                 float(_need(p, "delta", "parameters")), float(p.get("alpha", 0.05)),
                                 float(p.get("tail_fraction", 0.5)), skipped)
        files["tails.csv"] = _csv_text(["seed", "pullback_tail_sup", "forward_tail_sup"],
                                       [[s, repr(a), repr(b)] for (s, _), a, b in
                                        zip(kept, rep.tail_sup, rep.forward_tail_sup)])
        files["summary.csv"] = _csv_text(["t", "pullback_exceedance", "forward_exceedance"],
                                         [[t, repr(a), repr(b)] for t, a, b in
                                          zip(rep.t_grid, rep.exceedance, rep.forward_exceedance)])
        out = rep.to_json()
        out["ks"] = verify.forward_pullback_ks(rep)
        return "success", out, files
    if task == "equivalence":
        kept = [r for r in records if r["ok"] is not None]
        n_sets = len(p["sets"])
        dist = [[r["dist"][b] for r in kept] for b in range(n_sets)]
        flags = [[r["ok"][b] for r in kept] for b in range(n_sets)]
        rep = verify.equivalence_report(dist, flags, float(p.get("tol", 1e-6)), float(p.get("alpha", 0.05)),
                                        len(records) - len(kept))
        files["summary.csv"] = _csv_text(["B", "fraction"], [[b, repr(f)] for b, f in enumerate(rep.fractions)])
        return rep.verdict, rep.to_json(), files
    raise ConfigError(f"unknown task {task!r}")


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "statsmodels", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def run_experiment(cfg: dict, out_dir: Path, workers: int = 1) -> int:
    """Run a normalized config and write artifacts; returns the exit code."""
    start = time.perf_counter()
    sysm = build_system(cfg)
    seeds = _seeds(cfg)
    files: dict[str, str] = {}
    try:
        shared = _prepare(sysm, cfg)
    except ScheduleInfeasible as exc:
        verdict, report = "fail", {"task": cfg["task"], "verdict": "fail", "schedule_infeasible_level": exc.level,
                                   "message": str(exc)}
    else:
        payloads = [(cfg, chunk, shared) for chunk in _chunks(seeds)]
        records = [r for part in _map(payloads, workers) for r in part]
        verdict, report, files = _reduce(sysm, cfg, seeds, records, shared)
        report.setdefault("verdict", verdict)
    files["report.json"] = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    files["config.json"] = json.dumps(cfg, indent=2, sort_keys=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name in sorted(files):
        path = out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = files[name].encode()
        path.write_bytes(data)
        hashes[name] = _sha(data)
    content = _sha("".join(f"{n}:{h}\n" for n, h in sorted(hashes.items())).encode())
    code = EXIT[verdict]
    manifest = {
        "config_hash": _sha(json.dumps(cfg, sort_keys=True).encode()),
        "content_hash": content,
        "files": hashes,
        "task": cfg["task"],
        "verdict": verdict,
        "exit_code": code,
        "versions": _versions(),
        "wall_time": time.perf_counter() - start,
        "workers": workers,
    }
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return code


# --- report -------------------------------------------------------------------

def render_report(run_dir: Path) -> str:
    """Deterministic text summary of a run directory."""
    man_path = run_dir / MANIFEST
    if not man_path.is_file():
        raise ConfigError(f"no {MANIFEST} in {run_dir}")
    man = json.loads(man_path.read_text())
    rep = json.loads((run_dir / "report.json").read_text())
    lines = [f"task: {man['task']}", f"verdict: {man['verdict']} (exit {man['exit_code']})",
             f"content hash: {man['content_hash']}"]
    if "estimate" in rep:
        lo, hi = rep["interval"]
        lines.append(f"estimate: {rep['estimate']:.4f}  95% interval [{lo:.4f}, {hi:.4f}]  "
                     f"eps={rep['eps']} delta={rep['delta']}")
        if rep.get("horizon", {}).get("t0") is not None:
            lines.append(f"t0: {rep['horizon']['t0']}")
    if "j0_histogram" in rep:
        lines.append(f"j0 histogram: {json.dumps(rep['j0_histogram'], sort_keys=True)}")
        lines.append(f"j0 <= 3 frequency: {rep['j0_at_most_3']:.4f}")
        lines.append(f"unstable: {rep['unstable']}/{rep['seeds']} (budget {rep['unstable_budget']:.4f})")
    if "max_oracle_error" in rep:
        lines.append(f"max attractor-vs-oracle error: {rep['max_oracle_error']:.3e}")
    if "completed" in rep:
        lines.append(f"completed seeds: {rep['completed']}/{rep['seeds']}")
    if "pullback_as" in rep:
        lines.append(f"pullback_as={rep['pullback_as']} weak_in_prob={rep['weak_in_prob']} "
                     f"forward_as={rep['forward_as']} (skipped {rep['skipped']})")
    if "fractions" in rep:
        lines.append("fractions: " + ", ".join(f"{f:.4f}" for f in rep["fractions"]))
    if "schedule_infeasible_level" in rep:
        lines.append(f"schedule infeasible at level {rep['schedule_infeasible_level']}")
    if "invariance_defects" in rep:
        inv = rep["invariance_defects"]
        lines.append(f"invariance at t={inv['t']}: {inv['within']}/{inv['checked']} within bound, "
                     f"max forward {inv['max_forward']}, max strict {inv['max_strict']}")
    return "\n".join(lines) + "\n"


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randattr", description="Random attractor experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", default=None)
    rep = sub.add_parser("report", help="summarize a run directory")
    rep.add_argument("run_dir")
    zoo = sub.add_parser("zoo", help="built-in systems")
    zoo.add_argument("action", choices=["list"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "zoo":
            for name in sorted(ZOO):
                sysm = system_from_config({"system": name})
                print(f"{name}: dimension {sysm.dimension}, {sysm.description}")
            return 0
        if args.command == "report":
            sys.stdout.write(render_report(Path(args.run_dir)))
            return 0
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = load_config(args.config)
        out = args.out or cfg.get("output") or str(Path("runs") / Path(args.config).stem)
        return run_experiment(cfg, Path(out), args.workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, ArithmeticError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
