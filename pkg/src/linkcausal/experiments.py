"""Replication harness: schemes x overlaps x modes, with seeded parallelism.

Each replication generates a fresh population, builds the comparison tensor,
runs the requested model modes plus the known-link benchmark chain (whose
posterior mean is the target the squared error is measured against), and
returns per-replication metrics.  Replications are independent tasks keyed by
(scheme, overlap, missing fraction, replication), so results are identical
however they are scheduled.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import causal
from .comparators import build_comparisons
from .records import RunConfig
from .sampler import run_chain, run_two_stage_pipeline
from .simgen import SimConfig, generate_population, sim_schema

__all__ = [
    "MatrixSpec",
    "run_experiment_matrix",
    "write_report_csv",
    "write_report_json",
    "format_text_table",
]

MODES = ("joint", "two_stage", "known_link")


@dataclass(frozen=True)
class MatrixSpec:
    """The experiment grid and the data-generation knobs shared by all cells."""

    schemes: tuple[str, ...] = ("L", "N")
    overlaps: tuple[float, ...] = (0.1, 0.5, 0.9)
    modes: tuple[str, ...] = MODES
    replications: int = 20
    missing_fracs: tuple[float, ...] = (0.0,)
    n_a: int = 1000
    n_b: int = 1000
    typo_prob: float = 0.22
    digit_swap_prob: float = 0.18
    name_zipf: float = 1.2
    outcome_model: str = "auto"  # "auto": parametric for L, spline for N
    seed: int = 0

    def __post_init__(self):
        for mode in self.modes:
            if mode not in MODES:
                raise ValueError(f"unknown mode {mode!r}")
        if self.outcome_model not in ("auto", "parametric", "spline"):
            raise ValueError("outcome_model must be auto, parametric or spline")


def _cell_key(scheme: str, overlap: float, missing_frac: float, rep: int):
    # stable across grid orderings so adding cells never reseeds existing ones
    return ("LN".index(scheme), int(round(overlap * 1e6)),
            int(round(missing_frac * 1e6)), rep)


def _chain_seed(seed_seq: np.random.SeedSequence) -> int:
    return int(seed_seq.generate_state(1, np.uint64)[0])


def _replicate(args):
    """Run one (scheme, overlap, missing_frac, replication) task."""
    scheme, overlap, missing_frac, rep, spec, base_cfg, io_opts = args
    trace_dir = io_opts.get("trace_dir")
    z_every = io_opts.get("z_every", 0)
    data_dir = io_opts.get("data_dir")
    outcome_model = spec.outcome_model
    if outcome_model == "auto":
        outcome_model = "parametric" if scheme == "L" else "spline"
    base_cfg = replace(base_cfg, outcome_model=outcome_model)

    root = np.random.SeedSequence(
        entropy=spec.seed, spawn_key=_cell_key(scheme, overlap, missing_frac, rep))
    ss_data, ss_joint, ss_two, ss_known = root.spawn(4)

    sim_cfg = SimConfig(
        n_a=spec.n_a, n_b=spec.n_b, overlap=float(overlap), scheme=scheme,
        missing_frac=float(missing_frac), typo_prob=spec.typo_prob,
        digit_swap_prob=spec.digit_swap_prob, name_zipf=spec.name_zipf,
        seed=spec.seed)
    bundle = generate_population(sim_cfg, rng=np.random.default_rng(ss_data))
    comparisons = build_comparisons(bundle.file_a, bundle.file_b, sim_schema())
    n_b = len(bundle.file_b)

    stem = (f"{scheme}_ov{overlap:g}_miss{missing_frac:g}_r{rep}")
    if data_dir is not None:
        _write_bundle(bundle, data_dir, stem)

    out = {"scheme": scheme, "overlap": overlap, "missing_frac": missing_frac,
           "rep": rep, "modes": {}}

    known_cfg = replace(base_cfg, mode="known_link", seed=_chain_seed(ss_known))
    trace_known = run_chain(bundle.file_a, bundle.file_b, comparisons, known_cfg,
                            true_links=bundle.true_links)
    atel0 = float(causal.AtelPosterior.from_draws(trace_known.post_burnin_atel()).mean)
    out["atel0"] = atel0

    for mode in spec.modes:
        try:
            if mode == "known_link":
                trace, modal = trace_known, None
            elif mode == "joint":
                cfg = replace(base_cfg, mode="joint", seed=_chain_seed(ss_joint))
                trace = run_chain(bundle.file_a, bundle.file_b, comparisons, cfg)
                modal = trace.modal_links()
            else:
                cfg = replace(base_cfg, mode="two_stage", seed=_chain_seed(ss_two))
                _, trace, stage1 = run_two_stage_pipeline(
                    bundle.file_a, bundle.file_b, comparisons, cfg)
                modal = stage1.modal_links()
                if trace_dir is not None:
                    stage1.write_csv(
                        f"{trace_dir}/trace_{stem}_two_stage_stage1.csv", z_every)
            if trace_dir is not None:
                trace.write_csv(f"{trace_dir}/trace_{stem}_{mode}.csv", z_every)
            post = causal.AtelPosterior.from_draws(trace.post_burnin_atel())
            entry = {
                "mse": causal.compute_mse(post.draws, atel0),
                "atel_mean": post.mean, "atel_q025": post.q025,
                "atel_q500": post.q500, "atel_q975": post.q975,
                "atel_sd": float(post.draws.std(ddof=1)),
            }
            if modal is not None:
                ppv, npv = causal.compute_ppv_npv(modal, bundle.true_links, n_b)
                entry["ppv"], entry["npv"] = ppv, npv
            out["modes"][mode] = entry
        except Exception as exc:  # record and continue; the cell turns partial
            out["modes"][mode] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def run_experiment_matrix(spec: MatrixSpec, base_cfg: RunConfig, threads: int = 1,
                          trace_dir=None, z_every: int = 0, data_dir=None):
    """Run the full grid; returns (aggregate rows, per-replication results).

    trace_dir/data_dir, when set, make each worker write its chain traces and
    the generated File A/B CSVs under deterministic names.
    """
    io_opts = {"trace_dir": str(trace_dir) if trace_dir else None,
               "z_every": z_every,
               "data_dir": str(data_dir) if data_dir else None}
    tasks = [
        (scheme, overlap, missing, rep, spec, base_cfg, io_opts)
        for scheme in spec.schemes
        for overlap in spec.overlaps
        for missing in spec.missing_fracs
        for rep in range(spec.replications)
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reps = list(pool.map(_replicate, tasks, chunksize=1))
    else:
        reps = [_replicate(task) for task in tasks]
    rows = _aggregate(spec, reps)
    return rows, reps


def _write_bundle(bundle, data_dir: str, stem: str):
    """Emit File A / File B CSVs with a planted id column for truth checks."""
    inv_links = {i: j for j, i in bundle.true_links.items()}
    schema = sim_schema()
    with open(f"{data_dir}/file_a_{stem}.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in schema] + ["y", "rid"])
        for rec in bundle.file_a:
            y = "NA" if rec.y is None else repr(rec.y)
            rid = f"a{rec.row_id}" if rec.row_id in inv_links else f"u{rec.row_id}"
            writer.writerow(list(rec.link_fields) + [y, rid])
    with open(f"{data_dir}/file_b_{stem}.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in schema] + ["x1", "x2", "w", "rid"])
        for rec in bundle.file_b:
            i = bundle.true_links.get(rec.row_id)
            rid = f"a{i}" if i is not None else f"v{rec.row_id}"
            writer.writerow(list(rec.link_fields)
                            + [repr(v) for v in rec.x] + [str(rec.w), rid])


def _mean_se(values):
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return None, None
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else None
    return mean, se


def _aggregate(spec: MatrixSpec, reps):
    rows = []
    for scheme in spec.schemes:
        for overlap in spec.overlaps:
            for missing in spec.missing_fracs:
                cell = [r for r in reps
                        if r["scheme"] == scheme and r["overlap"] == overlap
                        and r["missing_frac"] == missing]
                for mode in spec.modes:
                    ok = [r["modes"][mode] for r in cell
                          if "error" not in r["modes"][mode]]
                    failed = len(cell) - len(ok)
                    row = {
                        "scheme": scheme, "overlap": overlap,
                        "missing_frac": missing, "mode": mode,
                        "reps_ok": len(ok), "reps_failed": failed,
                        "status": "ok" if failed == 0 else "partial",
                    }
                    for name in ("ppv", "npv"):
                        vals = [e[name] for e in ok
                                if e.get(name) is not None]
                        row[f"{name}_mean"], row[f"{name}_se"] = _mean_se(vals)
                    row["mse_mean"], row["mse_se"] = _mean_se(
                        [e["mse"] for e in ok])
                    for name in ("atel_mean", "atel_q025", "atel_q500",
                                 "atel_q975"):
                        row[name], _ = _mean_se([e[name] for e in ok])
                    row["atel0_mean"], _ = _mean_se([r["atel0"] for r in cell])
                    rows.append(row)
    return rows


_CSV_COLUMNS = [
    "scheme", "overlap", "missing_frac", "mode", "reps_ok", "reps_failed",
    "status", "ppv_mean", "ppv_se", "npv_mean", "npv_se", "mse_mean", "mse_se",
    "atel_mean", "atel_q025", "atel_q500", "atel_q975", "atel0_mean",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_report_csv(rows, path):
    """Table in the mode/overlap/PPV/NPV/MSE layout, 6 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in _CSV_COLUMNS])


def write_report_json(rows, reps, path):
    """Full-precision JSON summary of the aggregate and per-replication data."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"cells": rows, "replications": reps}, fh, indent=1,
                  sort_keys=True)
        fh.write("\n")


def format_text_table(rows) -> str:
    header = ["scheme", "overlap", "miss", "mode", "PPV", "NPV", "MSE", "ATEL 50%"]
    lines = ["  ".join(f"{h:>9}" for h in header)]
    for row in rows:
        lines.append("  ".join(f"{v:>9}" for v in [
            row["scheme"], _fmt(row["overlap"]), _fmt(row["missing_frac"]),
            row["mode"], _fmt(row.get("ppv_mean")), _fmt(row.get("npv_mean")),
            _fmt(row.get("mse_mean")), _fmt(row.get("atel_q500")),
        ]))
    return "\n".join(lines) + "\n"
