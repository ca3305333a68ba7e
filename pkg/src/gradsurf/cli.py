"""Reproducible experiment runner.

Every command reads a single JSON config, resolves defaults, seeds all
randomness from one integer, and writes its outputs plus a run manifest
into the output directory.  Outputs are canonicalized (sorted rows, no
timestamps), so equal configs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cluster_swap import Triplet, shifted_analysis, swappable_set
from .errors import ConfigParse, GradsurfError
from .feasibility import (
    FeasibilityGraph,
    allowed_slope_polytope,
    extend_boundary,
    torus_slope_feasible,
)
from .lattice import box_region, outer_boundary
from .observables import EXACT_SUM, convexity_margin, sigma_estimate
from .potential import PeriodicPotential, validate_sap
from .rng import RngStream
from .sampler import cftp_sample, heat_bath_sweep, torus_sample
from .tilings import (
    count_tilings_bruteforce,
    count_tilings_kasteleyn,
    uniform_tiling_sample,
)
from .verification import run_battery

F = Fraction


def _slope(spec) -> tuple[Fraction, Fraction]:
    return (Fraction(str(spec[0])), Fraction(str(spec[1])))


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc


def _resolve_potential(cfg: dict) -> PeriodicPotential:
    spec = cfg.get("potential", {"preset": "domino"})
    if isinstance(spec, str):
        pot = PeriodicPotential.load(spec)
    else:
        pot = PeriodicPotential.from_dict(spec)
    report = validate_sap(pot)
    if not report.valid:
        bad = sorted(cls for cls, r in report.per_class.items() if not r.ok)
        raise ConfigParse(f"potential fails validation on classes {bad}")
    return pot


def _region_from_spec(spec) -> frozenset:
    if isinstance(spec, str) and "x" in spec:
        w, h = (int(t) for t in spec.split("x"))
        return frozenset((i, j) for i in range(w) for j in range(h))
    return frozenset(tuple(v) for v in spec)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _write_json(path: Path, obj) -> None:
    _write(path, json.dumps(obj, indent=1, sort_keys=True, default=str) + "\n")


def _manifest(command: str, cfg: dict, seed: int, pot: PeriodicPotential | None) -> dict:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return {
        "command": command,
        "config": cfg,
        "config_hash": hashlib.sha256(blob).hexdigest()[:16],
        "potential_hash": pot.config_hash() if pot is not None else None,
        "seed": seed,
        "versions": {
            "gradsurf": __version__,
            "numpy": np.__version__,
            "python": "%d.%d" % sys.version_info[:2],
        },
    }


def _config_csv(config, name: Path, sample_id=None) -> list[str]:
    rows = []
    for (x, y), h in config.sorted_items():
        prefix = f"{sample_id}," if sample_id is not None else ""
        rows.append(f"{prefix}{x},{y},{h}")
    return rows


# ---------------------------------------------------------------------------
# Commands


def cmd_sample(cfg, seed, out: Path):
    pot = _resolve_potential(cfg)
    mode = cfg.get("mode", "torus")
    samples = int(cfg.get("samples", 1))
    sweeps = int(cfg.get("sweeps", 64))
    rows = ["sample,x,y,height"]
    if mode == "torus":
        n = int(cfg["n"])
        slope = _slope(cfg.get("slope", [0, 0]))
        for s in range(samples):
            config = torus_sample(pot, n, slope, sweeps, RngStream(seed, s))
            rows.extend(_config_csv(config, out, s))
    else:
        region = sorted(_region_from_spec(cfg["region"]))
        level = int(cfg.get("boundary_level", 0))
        boundary = {v: level for v in outer_boundary(region)}
        graph = FeasibilityGraph.from_potential(pot, set(region) | set(boundary))
        for s in range(samples):
            config = extend_boundary(graph, boundary)
            config = _restrict(config, region)
            stream = RngStream(seed, s)
            for t in range(sweeps):
                config = heat_bath_sweep(pot, config, boundary=boundary, rng=stream.at(t))
            rows.extend(_config_csv(config, out, s))
    _write(out / "samples.csv", "\n".join(rows) + "\n")
    _write_json(out / "manifest.json", _manifest("sample", cfg, seed, pot))
    return 0


def _restrict(config, region):
    from .heights import HeightConfig

    values = {v: config.values[v] for v in region}
    return HeightConfig(values, reference=sorted(region)[0])


def cmd_cftp(cfg, seed, out: Path):
    pot = _resolve_potential(cfg)
    region = sorted(_region_from_spec(cfg["region"]))
    level = int(cfg.get("boundary_level", 0))
    boundary = {v: level for v in outer_boundary(region)}
    samples = int(cfg.get("samples", 1))
    rows = ["sample,x,y,height"]
    for s in range(samples):
        config = cftp_sample(pot, region, boundary, RngStream(seed, s))
        for (x, y), h in sorted(config.values.items()):
            rows.append(f"{s},{x},{y},{h}")
    _write(out / "samples.csv", "\n".join(rows) + "\n")
    _write_json(out / "manifest.json", _manifest("cftp", cfg, seed, pot))
    return 0


def cmd_tile(cfg, seed, out: Path):
    from .tilings import matching_to_height

    region = _region_from_spec(cfg["region"])
    result: dict = {"squares": len(region)}
    if cfg.get("count", True):
        brute = count_tilings_bruteforce(region) if len(region) <= 36 else None
        kast = count_tilings_kasteleyn(region)
        result["count_kasteleyn"] = kast
        result["count_bruteforce"] = brute
        print(kast)
    samples = int(cfg.get("samples", 0))
    if samples:
        rows = ["sample,square1_x,square1_y,square2_x,square2_y"]
        height_rows = ["sample,x,y,height"]
        for s in range(samples):
            t = uniform_tiling_sample(region, RngStream(seed, s))
            for d in sorted(tuple(sorted(dom)) for dom in t.dominoes):
                (ax, ay), (bx, by) = d
                rows.append(f"{s},{ax},{ay},{bx},{by}")
            for (x, y), h in matching_to_height(t).sorted_items():
                height_rows.append(f"{s},{x},{y},{h}")
        _write(out / "tilings.csv", "\n".join(rows) + "\n")
        _write(out / "heights.csv", "\n".join(height_rows) + "\n")
    _write_json(out / "counts.json", result)
    _write_json(out / "manifest.json", _manifest("tile", cfg, seed, None))
    return 0


def cmd_feasibility(cfg, seed, out: Path):
    from .feasibility import distances_csv, shortest_distances

    pot = _resolve_potential(cfg)
    bound = cfg.get("cycle_length_bound")
    poly = allowed_slope_polytope(pot, None if bound is None else int(bound))
    _write(out / "polytope.csv", "\n".join(poly.csv_rows()) + "\n")
    if "distance_region" in cfg:
        region = sorted(_region_from_spec(cfg["distance_region"]))
        graph = FeasibilityGraph.from_potential(pot, region)
        table = shortest_distances(graph, region)
        _write(out / "distances.csv", "\n".join(distances_csv(table)) + "\n")
    checks = []
    for item in cfg.get("slopes", []):
        u = _slope(item["slope"])
        n = int(item["n"])
        checks.append(
            {
                "slope": [str(u[0]), str(u[1])],
                "n": n,
                "feasible": torus_slope_feasible(pot, n, u),
                "in_polytope": poly.contains(u),
            }
        )
    _write_json(
        out / "feasibility.json",
        {"truncated": poly.truncated, "feasible_at_zero": poly.feasible, "checks": checks},
    )
    _write_json(out / "manifest.json", _manifest("feasibility", cfg, seed, pot))
    return 0


def cmd_sigma(cfg, seed, out: Path):
    pot = _resolve_potential(cfg)
    n = int(cfg["n"])
    method = cfg.get("method", EXACT_SUM)
    budget = int(cfg.get("budget", 2048))
    estimates = []
    records = []
    for k, spec in enumerate(cfg["slopes"]):
        u = _slope(spec)
        est = sigma_estimate(pot, u, n, method=method, budget=budget, rng=RngStream(seed, k))
        estimates.append(est)
        records.append(est.to_record(seed=seed))
    result = {"estimates": records}
    if len(estimates) == 3:
        try:
            report = convexity_margin(estimates[0], estimates[1], estimates[2])
            result["margin"] = report.to_record(seed=seed)
        except GradsurfError:
            pass
    _write_json(out / "sigma.json", result)
    _write_json(out / "manifest.json", _manifest("sigma", cfg, seed, pot))
    return 0


def cmd_swap(cfg, seed, out: Path):
    pot = _resolve_potential(cfg)
    n = int(cfg.get("n", 8))
    slope = _slope(cfg.get("slope", [0, 0]))
    sweeps = int(cfg.get("sweeps", 64))
    trials = int(cfg.get("trials", 16))
    window = sorted((i, j) for i in range(n) for j in range(n))
    scans = []
    cluster_rows = ["trial,x,y,zeta,cluster,boundary_touch"]
    for t in range(trials):
        phi1 = torus_sample(pot, n, slope, sweeps, RngStream(seed, 2 * t))
        phi2 = torus_sample(pot, n, slope, sweeps, RngStream(seed, 2 * t + 1))
        phi1 = _restrict(phi1, window)
        phi2 = _restrict(phi2, window)
        trip = Triplet.build(phi1, phi2, rng=RngStream(seed, 10_000 + t).at(0))
        analysis = shifted_analysis(pot, trip, 0, window)
        scans.append(
            {
                "trial": t,
                "b_plus": analysis.b_plus,
                "b_minus": analysis.b_minus,
                "gap": analysis.b_plus - analysis.b_minus,
            }
        )
        ss = swappable_set(pot, trip, window)
        for ci, cl in enumerate(sorted(ss.clusters, key=lambda c: c.anchor)):
            for (x, y) in sorted(cl.vertices):
                cluster_rows.append(
                    f"{t},{x},{y},{cl.zeta},{ci},{int(cl.touches_boundary)}"
                )
    gaps = [s["gap"] for s in scans]
    _write_json(
        out / "swap.json",
        {
            "window": n,
            "scans": scans,
            "gap_in_01_fraction": sum(1 for g in gaps if g in (0, 1)) / len(gaps),
        },
    )
    _write(out / "clusters.csv", "\n".join(cluster_rows) + "\n")
    _write_json(out / "manifest.json", _manifest("swap", cfg, seed, pot))
    return 0


def cmd_verify(cfg, seed, out: Path):
    results = run_battery()
    lines = []
    for name, ok, detail in results:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        print(lines[-1])
    _write(out / "report.txt", "\n".join(lines) + "\n")
    _write_json(
        out / "report.json",
        {
            "checks": [
                {"name": n, "passed": ok, "detail": d} for n, ok, d in results
            ],
            "all_passed": all(ok for _, ok, _ in results),
        },
    )
    _write_json(out / "manifest.json", _manifest("verify", cfg, seed, None))
    return 0 if all(ok for _, ok, _ in results) else 1


COMMANDS = {
    "sample": cmd_sample,
    "cftp": cmd_cftp,
    "tile": cmd_tile,
    "feasibility": cmd_feasibility,
    "sigma": cmd_sigma,
    "swap": cmd_swap,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gradsurf",
        description="Gradient random-surface simulation and verification runner",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="out")
    parser.add_argument("--threads", type=int, default=1, help="accepted; chains run sequentially")
    args = parser.parse_args(argv)
    cfg = _load_config(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = Path(args.out)
    try:
        return COMMANDS[args.command](cfg, seed, out)
    except GradsurfError as exc:
        payload = {"error": exc.kind, "message": str(exc)}
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "error.json", payload)
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
