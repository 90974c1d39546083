"""Experiment command line: parameter sweeps persisted as CSV.

Subcommands::

    cfirs run <spec.json> [--out DIR] [--threads N] [--seed S]
    cfirs summarize <results.csv> [--out FILE]

The spec file is a single JSON document (see ``ExperimentSpec.from_dict``)
describing the base scenario, one sweep parameter with its values, the
schemes to compare, and the seed count. Results land in ``results.csv`` (one
row per (sweep value, scheme, seed)) next to a ``manifest.json`` echoing the
configuration. Exit codes: 0 success, 2 spec/input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as chan
from . import pipeline
from .channel import Geometry
from .config import SystemConfig
from .pipeline import SchemeSpec

SWEEPS = (
    "iterations",
    "n_phase_shifts",
    "ue_center_x",
    "irs_pathloss_exponent",
    "reflecting_efficiency",
    "csi_error_rho",
    "discrete_levels",
)

RESULT_COLUMNS = (
    "sweep_param", "value", "scheme", "seed",
    "sum_rate_bits", "iterations", "wall_ms", "converged",
)


class SpecError(ValueError):
    """Raised for anything wrong with an experiment spec or input file."""


@dataclass
class ExperimentSpec:
    base: SystemConfig
    geometry: Geometry
    fixed_ue: bool
    sweep: str
    sweep_values: list
    schemes: list
    n_seeds: int
    master_seed: int
    output_dir: str
    raw: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            raise SpecError("spec root must be a JSON object")
        for key in ("base", "sweep", "sweep_values", "schemes"):
            if key not in doc:
                raise SpecError(f"spec.{key}: required field missing")
        try:
            base = SystemConfig(**doc["base"])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"spec.base: {exc}") from exc
        sweep = doc["sweep"]
        if sweep not in SWEEPS:
            raise SpecError(f"spec.sweep: {sweep!r} is not one of {SWEEPS}")
        values = doc["sweep_values"]
        if not isinstance(values, list) or not values:
            raise SpecError("spec.sweep_values: must be a non-empty list")
        schemes = []
        for idx, item in enumerate(doc["schemes"]):
            if not isinstance(item, dict):
                raise SpecError(f"spec.schemes[{idx}]: must be an object")
            try:
                schemes.append(SchemeSpec(**item))
            except (TypeError, ValueError) as exc:
                raise SpecError(f"spec.schemes[{idx}]: {exc}") from exc
        labels = [s.label for s in schemes]
        if len(set(labels)) != len(labels):
            raise SpecError("spec.schemes: labels must be unique")
        n_seeds = int(doc.get("n_seeds", 1))
        if n_seeds < 1:
            raise SpecError("spec.n_seeds: must be >= 1")
        master_seed = int(doc.get("master_seed", 0))
        geometry, fixed_ue = _parse_geometry(doc.get("geometry"), base)
        return cls(
            base=base,
            geometry=geometry,
            fixed_ue=fixed_ue,
            sweep=sweep,
            sweep_values=list(values),
            schemes=schemes,
            n_seeds=n_seeds,
            master_seed=master_seed,
            output_dir=doc.get("output_dir", "results"),
            raw=doc,
        )


def _parse_geometry(doc, base: SystemConfig):
    if doc is None:
        return chan.default_geometry(base), False
    try:
        center = float(doc.get("ue_center_x", 100.0))
        radius = float(doc.get("ue_radius", 10.0))
        geo = chan.default_geometry(base, ue_center_x=center, ue_radius=radius)
        bs = np.asarray(doc.get("bs_positions", geo.bs_positions), float)
        irs = np.asarray(doc.get("irs_positions", geo.irs_positions), float)
        fixed_ue = "ue_positions" in doc
        ue = np.asarray(doc.get("ue_positions", geo.ue_positions), float)
        geo = Geometry(
            bs_positions=bs, irs_positions=irs, ue_positions=ue,
            ue_center_x=center, ue_radius=radius,
        )
        geo.validate(base)
        return geo, fixed_ue
    except (TypeError, ValueError) as exc:
        raise SpecError(f"spec.geometry: {exc}") from exc


def _sweep_config(spec: ExperimentSpec, value):
    """(config, geometry, schemes) for one sweep value."""
    base, geometry, schemes = spec.base, spec.geometry, spec.schemes
    if spec.sweep == "n_phase_shifts":
        n = int(value)
        n_h = base.n_h if base.n_h >= 1 and n % base.n_h == 0 else 1
        return base.with_(n=n, n_h=n_h, n_v=n // n_h), geometry, schemes
    if spec.sweep == "ue_center_x":
        geo = chan.default_geometry(base, ue_center_x=float(value), ue_radius=geometry.ue_radius)
        geo = Geometry(
            bs_positions=geometry.bs_positions,
            irs_positions=geometry.irs_positions,
            ue_positions=geo.ue_positions,
            ue_center_x=float(value),
            ue_radius=geometry.ue_radius,
        )
        return base, geo, schemes
    if spec.sweep == "irs_pathloss_exponent":
        return base.with_(pathloss_irs=float(value)), geometry, schemes
    if spec.sweep == "reflecting_efficiency":
        return base.with_(alpha=float(value)), geometry, schemes
    if spec.sweep == "csi_error_rho":
        swept = [dataclasses.replace(s, csi_error_rho=float(value)) for s in schemes]
        return base, geometry, swept
    if spec.sweep == "discrete_levels":
        m = int(value)
        cfg = base.with_(discrete_levels=m)
        swept = [
            dataclasses.replace(s, levels=m) if s.solver == "discrete" else s
            for s in schemes
        ]
        return cfg, geometry, swept
    return base, geometry, schemes  # iterations sweep: handled by the caller


def _realize(config, geometry, fixed_ue, master_seed, seed_index):
    rng = np.random.default_rng(pipeline.channel_seed_key(master_seed, seed_index))
    geo = geometry if fixed_ue else chan.sample_ue_positions(geometry, rng)
    angles = chan.sample_angles(config, rng)
    return chan.sample_channels(config, geo, angles, rng)


def _run_unit(spec: ExperimentSpec, value, seed_index: int):
    """All schemes on one (sweep value, realization) pair -> list of rows."""
    rows = []
    if spec.sweep == "iterations":
        caps = [int(v) for v in spec.sweep_values]
        horizon = max(caps)
        config = spec.base.with_(max_outer=horizon, eps3=0.0)
        channels = _realize(config, spec.geometry, spec.fixed_ue, spec.master_seed, seed_index)
        for scheme in spec.schemes:
            rng = np.random.default_rng(
                pipeline.scheme_seed_key(spec.master_seed, seed_index, scheme.label)
            )
            start = time.perf_counter()
            _, _, trace = pipeline.joint_optimize(channels, config, scheme, rng)
            wall_ms = (time.perf_counter() - start) * 1e3
            rates = trace.sum_rate
            for cap in caps:
                idx = min(cap, len(rates) - 1)
                rate_nats = rates[idx]
                rel = abs(rates[idx] - rates[idx - 1]) / abs(rates[idx]) if idx >= 1 and rates[idx] else 0.0
                rows.append({
                    "sweep_param": "iterations",
                    "value": cap,
                    "scheme": scheme.label,
                    "seed": seed_index,
                    "sum_rate_bits": rate_nats / math.log(2.0),
                    "iterations": idx,
                    "wall_ms": wall_ms,
                    "converged": rel < spec.base.eps3,
                })
        return rows
    config, geometry, schemes = _sweep_config(spec, value)
    channels = _realize(config, geometry, spec.fixed_ue, spec.master_seed, seed_index)
    for scheme in schemes:
        rng = np.random.default_rng(
            pipeline.scheme_seed_key(spec.master_seed, seed_index, scheme.label)
        )
        start = time.perf_counter()
        _, _, trace = pipeline.joint_optimize(channels, config, scheme, rng)
        wall_ms = (time.perf_counter() - start) * 1e3
        rows.append({
            "sweep_param": spec.sweep,
            "value": value,
            "scheme": scheme.label,
            "seed": seed_index,
            "sum_rate_bits": trace.final_sum_rate_true / math.log(2.0),
            "iterations": trace.iterations,
            "wall_ms": wall_ms,
            "converged": trace.converged,
        })
    return rows


def _unit_worker(args):
    spec_doc, value, seed_index = args
    spec = ExperimentSpec.from_dict(spec_doc)
    return _run_unit(spec, value, seed_index)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def run_spec(spec: ExperimentSpec, out_dir: Path, threads: int = 1) -> Path:
    """Execute the sweep and write results.csv + manifest.json into out_dir."""
    if spec.sweep == "iterations":
        units = [(None, s) for s in range(spec.n_seeds)]
    else:
        units = [(v, s) for v in spec.sweep_values for s in range(spec.n_seeds)]
    if threads > 1:
        payloads = [(spec.raw, value, seed) for value, seed in units]
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_unit_worker, payloads))
    else:
        chunks = [_run_unit(spec, value, seed) for value, seed in units]
    rows = [row for chunk in chunks for row in chunk]

    value_order = {v: i for i, v in enumerate(spec.sweep_values)}
    scheme_order = {s.label: i for i, s in enumerate(spec.schemes)}
    rows.sort(key=lambda r: (value_order[r["value"]], scheme_order[r["scheme"]], r["seed"]))

    out_dir.mkdir(parents=True, exist_ok=True)
    results = out_dir / "results.csv"
    with results.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    manifest = {
        "version": __version__,
        "master_seed": spec.master_seed,
        "sweep": spec.sweep,
        "sweep_values": spec.sweep_values,
        "schemes": [s.label for s in spec.schemes],
        "n_seeds": spec.n_seeds,
        "rows": len(rows),
        "spec": spec.raw,
        "seed_split": "SeedSequence(master, spawn_key=(0, seed)) for channels; "
                      "(1, seed, sha256(label)[:8]) per scheme",
    }
    with (out_dir / "manifest.json").open("w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results


def summarize(results_csv: Path, out_path: Path = None) -> Path:
    """Per (sweep value, scheme) mean / standard error -> summary CSV."""
    groups = {}
    sweep_param = ""
    try:
        fh = open(results_csv, newline="")
    except OSError as exc:
        raise SpecError(f"{results_csv}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "sum_rate_bits" not in reader.fieldnames:
            raise SpecError(f"{results_csv}: missing header with sum_rate_bits column")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (row["value"], row["scheme"])
                rate = float(row["sum_rate_bits"])
                sweep_param = row["sweep_param"]
            except (KeyError, TypeError, ValueError) as exc:
                raise SpecError(f"{results_csv}: row {lineno}: {exc}") from exc
            groups.setdefault(key, []).append(rate)
    if out_path is None:
        out_path = Path(results_csv).with_name("summary.csv")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sweep_param", "value", "scheme", "n_seeds", "mean_sum_rate_bits", "stderr_sum_rate_bits"]
        )

        def sort_key(item):
            value, scheme = item[0]
            try:
                return (0, float(value), scheme)
            except ValueError:
                return (1, 0.0, scheme)

        for (value, scheme), rates in sorted(groups.items(), key=sort_key):
            arr = np.asarray(rates, float)
            stderr = arr.std(ddof=1) / np.sqrt(arr.size) if arr.size > 1 else 0.0
            writer.writerow([
                sweep_param, value, scheme, arr.size,
                _fmt(float(arr.mean())), _fmt(float(stderr)),
            ])
    return out_path


def run(spec_file, out_dir=None, threads: int = 1, master_seed=None) -> Path:
    """Load and execute a spec file; raises SpecError on bad input."""
    path = Path(spec_file)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"{spec_file}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{spec_file}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    spec = ExperimentSpec.from_dict(doc)
    if master_seed is not None:
        doc = dict(doc)
        doc["master_seed"] = int(master_seed)
        spec = ExperimentSpec.from_dict(doc)
    target = Path(out_dir) if out_dir is not None else Path(spec.output_dir)
    return run_spec(spec, target, threads=threads)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cfirs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment spec")
    p_run.add_argument("spec", help="path to the JSON experiment spec")
    p_run.add_argument("--out", default=None, help="output directory (overrides spec)")
    p_run.add_argument("--threads", type=int, default=1, help="parallel workers")
    p_run.add_argument("--seed", type=int, default=None, help="override master seed")
    p_sum = sub.add_parser("summarize", help="aggregate a results.csv")
    p_sum.add_argument("results", help="path to results.csv")
    p_sum.add_argument("--out", default=None, help="summary file path")
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            results = run(args.spec, out_dir=args.out, threads=args.threads, master_seed=args.seed)
            print(results)
        else:
            out = summarize(Path(args.results), Path(args.out) if args.out else None)
            print(out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
