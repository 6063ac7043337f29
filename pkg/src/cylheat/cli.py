"""Command-line driver: parameter sweeps with reproducible CSV/JSON output.

A single YAML config file selects the command and all inputs; every
QuadratureSpec field can be overridden from the config, and ``--tol``
overrides the relative tolerance from the command line.  Sweep points are
dispatched to a process pool and written in input order; a point that fails
to converge gets an error flag in its row instead of aborting the sweep.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import math
import os
import sys
import time

import numpy as np
import yaml

from . import __version__
from .constants import CONSTANTS_TABLE
from .greens import CylPoint, GreensConvergenceError, tr_gg_dagger, tr_im_g_coincident
from .materials import CylinderSpec, ParticleSpec, material_from_config
from .observables import (Angular, Parallel, Perpendicular, angular_ratio,
                          heat_radiation, heat_transfer)
from .quadrature import QuadratureSpec, omega_grid

COMMANDS = ("hr-sweep", "ht-parallel", "ht-angular", "ht-perpendicular",
            "spectrum", "point")


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "temperature": 300.0,
    "particle": {"material": "sic", "radius_m": 1.0e-8},
    "particle2": {"material": "sic", "radius_m": 1.0e-8},
    "cylinder": {"material": "sic"},
    "geometry": {},
    "quad": {},
    "output": {"path": "cylheat_out.csv", "format": "csv"},
}


def load_config(path):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return normalize_config(raw)


def normalize_config(raw):
    cfg = {}
    for key, default in _DEFAULTS.items():
        val = raw.get(key, default)
        if isinstance(default, dict):
            merged = dict(default)
            merged.update(val or {})
            cfg[key] = merged
        else:
            cfg[key] = val
    for key in ("command", "sweep", "spectrum"):
        if key in raw:
            cfg[key] = raw[key]
    if cfg.get("command") not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, "
                          f"got {cfg.get('command')!r}")
    if cfg["temperature"] <= 0:
        raise ConfigError("temperature must be positive")
    cfg["quad"] = dict(cfg["quad"])
    # eagerly validate materials and quad overrides
    quad_from_config(cfg)
    material_from_config(cfg["particle"]["material"])
    material_from_config(cfg["particle2"]["material"])
    material_from_config(cfg["cylinder"]["material"])
    return cfg


def dump_config(cfg) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def config_hash(cfg) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]


def quad_from_config(cfg) -> QuadratureSpec:
    known = {f.name for f in dataclasses.fields(QuadratureSpec)}
    overrides = dict(cfg.get("quad") or {})
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown quad fields {sorted(unknown)}")
    if "omega_range_factor" in overrides:
        overrides["omega_range_factor"] = tuple(
            overrides["omega_range_factor"])
    try:
        return QuadratureSpec(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad quad settings: {exc}") from exc


def sweep_values(cfg):
    sweep = cfg.get("sweep")
    if not sweep:
        raise ConfigError("this command needs a sweep section")
    if "values" in sweep:
        vals = [float(v) for v in sweep["values"]]
        if not vals:
            raise ConfigError("sweep.values is empty")
        return sweep.get("var"), vals
    try:
        lo, hi = float(sweep["min"]), float(sweep["max"])
        pts = int(sweep["points"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"sweep needs min/max/points or values: {exc}")
    if pts < 1 or lo > hi or lo <= 0 and sweep.get("scale", "log") == "log":
        raise ConfigError("invalid sweep range")
    scale = sweep.get("scale", "log")
    if pts == 1:
        vals = [lo]
    elif scale == "log":
        vals = list(np.geomspace(lo, hi, pts))
    elif scale == "lin":
        vals = list(np.linspace(lo, hi, pts))
    else:
        raise ConfigError(f"unknown sweep scale {scale!r}")
    return sweep.get("var"), vals


def _particle(cfg, key) -> ParticleSpec:
    sub = cfg[key]
    return ParticleSpec(radius=float(sub["radius_m"]),
                        material=material_from_config(sub["material"]),
                        temperature=float(cfg["temperature"]))


def _cylinder(cfg, radius=None) -> CylinderSpec:
    sub = cfg["cylinder"]
    mat = material_from_config(sub["material"])
    r = radius if radius is not None else sub.get("radius_m")
    if r is None:
        raise ConfigError("cylinder.radius_m is required unless swept")
    return CylinderSpec(radius=float(r), material=mat)


# --------------------------------------------------------------------------
# per-point evaluation (top level so the process pool can pickle it)


def eval_point(task):
    cfg, command, value = task
    t0 = time.perf_counter()
    quad = quad_from_config(cfg)
    geo = cfg["geometry"]
    row = {}
    try:
        if command == "hr-sweep":
            particle = _particle(cfg, "particle")
            cyl = _cylinder(cfg, radius=value)
            h = float(geo["h_m"])
            res = heat_radiation(particle, cyl, h=h, quad=quad)
            row.update(radius_m=value, h_m=h,
                       hr_W=res.watts, hr_ratio_to_vacuum=res.ratio_to_vacuum,
                       est_rel_error=res.convergence.est_rel_error,
                       n_used=res.convergence.n_used,
                       flags=";".join(res.convergence.flags))
        elif command == "ht-parallel":
            p1, p2 = _particle(cfg, "particle"), _particle(cfg, "particle2")
            cyl = None
            if cfg["cylinder"]["material"] != "none":
                cyl = _cylinder(cfg)
            h = float(geo["h_m"])
            res = heat_transfer(p1, p2, Parallel(h=h, d=value), cyl, quad)
            row.update(d_m=value, h_m=h,
                       radius_m=cyl.radius if cyl else 0.0,
                       ht_per_vol2_W_per_m6=res.watts_per_vol2,
                       ht_ratio_to_vacuum=res.ratio_to_vacuum,
                       est_rel_error=res.convergence.est_rel_error,
                       n_used=res.convergence.n_used,
                       flags=";".join(res.convergence.flags))
        elif command == "ht-angular":
            p1, p2 = _particle(cfg, "particle"), _particle(cfg, "particle2")
            cyl = _cylinder(cfg)
            h, dz = float(geo["h_m"]), float(geo["dz_m"])
            dphi = math.radians(value)
            res = heat_transfer(p1, p2, Angular(h=h, dphi=dphi, dz=dz),
                                cyl, quad)
            ref = heat_transfer(p1, p2, Angular(h=h, dphi=0.0, dz=dz),
                                cyl, quad)
            row.update(dphi_deg=value, h_m=h, dz_m=dz, radius_m=cyl.radius,
                       ht_per_vol2_W_per_m6=res.watts_per_vol2,
                       ht_ratio_to_vacuum=res.ratio_to_vacuum,
                       ht_ratio_to_zero_angle=(res.watts_per_vol2
                                               / ref.watts_per_vol2),
                       est_rel_error=res.convergence.est_rel_error,
                       n_used=res.convergence.n_used,
                       flags=";".join(res.convergence.flags))
        elif command == "ht-perpendicular":
            p1, p2 = _particle(cfg, "particle"), _particle(cfg, "particle2")
            cyl = _cylinder(cfg, radius=value)
            h = float(geo["h_m"])
            res = heat_transfer(p1, p2, Perpendicular(h=h), cyl, quad)
            row.update(radius_m=value, h_m=h, d_m=2.0 * (value + h),
                       ht_per_vol2_W_per_m6=res.watts_per_vol2,
                       ht_ratio_to_vacuum=res.ratio_to_vacuum,
                       est_rel_error=res.convergence.est_rel_error,
                       n_used=res.convergence.n_used,
                       flags=";".join(res.convergence.flags))
        elif command == "spectrum":
            quantity = cfg["spectrum"]["quantity"]
            cyl = None
            if cfg["cylinder"]["material"] != "none":
                cyl = _cylinder(cfg)
            h = float(geo["h_m"])
            r1 = (cyl.radius if cyl else 0.0) + h
            if quantity == "tr_im_g":
                val = tr_im_g_coincident(r1, value, cyl, quad)
            elif quantity == "tr_gg_dagger":
                d = float(geo["d_m"])
                p1 = CylPoint(r=r1, phi=0.0, z=0.0)
                p2 = CylPoint(r=r1, phi=0.0, z=d)
                val = tr_gg_dagger(p1, p2, value, cyl, quad)
            else:
                raise ConfigError(f"unknown spectrum quantity {quantity!r}")
            row.update(omega_rad_per_s=value, value=val)
        else:
            raise ConfigError(f"unhandled command {command!r}")
        row["error"] = ""
    except (GreensConvergenceError, ArithmeticError, ValueError) as exc:
        row.setdefault("flags", "failed")
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time_s"] = time.perf_counter() - t0
    return row


# --------------------------------------------------------------------------
# output writers


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows, cfg, path, fmt):
    meta = {
        "tool": f"cylheat {__version__}",
        "command": cfg["command"],
        "config_sha256": config_hash(cfg),
        "constants": CONSTANTS_TABLE,
    }
    cols = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    if fmt == "csv":
        lines = [f"# {meta['tool']}",
                 f"# command: {meta['command']}",
                 f"# config_sha256: {meta['config_sha256']}",
                 "# constants: " + " ".join(
                     f"{k}={v!r}" for k, v in CONSTANTS_TABLE.items()),
                 ",".join(cols)]
        for row in rows:
            lines.append(",".join(_fmt(row.get(c, "")) for c in cols))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps({"meta": meta, "rows": rows}, indent=1,
                          default=float) + "\n"
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# --------------------------------------------------------------------------
# command dispatch


def run_hr_sweep(cfg, threads=None):
    """Rows of HR and HR ratio versus the swept cylinder radius."""
    _, values = sweep_values(cfg)
    tasks = [(cfg, "hr-sweep", v) for v in values]
    return _run_tasks(tasks, threads)


def run_ht_sweep(cfg, threads=None):
    """Rows of volume-normalized HT versus the swept variable."""
    command = cfg["command"]
    _, values = sweep_values(cfg)
    tasks = [(cfg, command, v) for v in values]
    return _run_tasks(tasks, threads)


def run_spectrum(cfg, threads=None):
    spec = cfg.get("spectrum")
    if not spec:
        raise ConfigError("spectrum command needs a spectrum section")
    omegas = omega_grid(float(spec["omega_min"]), float(spec["omega_max"]),
                        int(spec.get("points", 400)),
                        spec.get("scale", "lin"))
    tasks = [(cfg, "spectrum", float(w)) for w in omegas]
    return _run_tasks(tasks, threads)


def run_point(cfg, threads=None):
    kind = (cfg.get("point") or cfg["geometry"].get("kind")
            or "hr")
    sub = {"hr": "hr-sweep", "ht-parallel": "ht-parallel",
           "ht-angular": "ht-angular",
           "ht-perpendicular": "ht-perpendicular"}.get(kind)
    if sub is None:
        raise ConfigError(f"unknown point kind {kind!r}")
    geo = cfg["geometry"]
    if sub == "hr-sweep" or sub == "ht-perpendicular":
        value = float(cfg["cylinder"]["radius_m"])
    elif sub == "ht-parallel":
        value = float(geo["d_m"])
    else:
        value = float(geo.get("dphi_deg", 0.0))
    return [eval_point((cfg, sub, value))]


def _run_tasks(tasks, threads):
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(tasks) <= 1:
        return [eval_point(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(eval_point, tasks))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cylheat",
        description="Near-field heat radiation and transfer of nanoparticles "
                    "next to an infinite cylinder")
    parser.add_argument("--config", required=True, help="YAML config file")
    parser.add_argument("--out", default=None, help="output path ('-' stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None,
                        help="override quad.rel_tol")
    parser.add_argument("--dump-config", action="store_true",
                        help="echo the normalized config and exit")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.tol is not None:
            cfg["quad"]["rel_tol"] = args.tol
            quad_from_config(cfg)
        if args.dump_config:
            sys.stdout.write(dump_config(cfg))
            return 0
        command = cfg["command"]
        if command == "hr-sweep":
            rows = run_hr_sweep(cfg, args.threads)
        elif command in ("ht-parallel", "ht-angular", "ht-perpendicular"):
            rows = run_ht_sweep(cfg, args.threads)
        elif command == "spectrum":
            rows = run_spectrum(cfg, args.threads)
        elif command == "point":
            rows = run_point(cfg, args.threads)
        else:
            raise ConfigError(f"unhandled command {command!r}")
        out = args.out or cfg["output"]["path"]
        fmt = args.format or cfg["output"]["format"]
        write_rows(rows, cfg, out, fmt)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if any(r.get("error") for r in rows):
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
