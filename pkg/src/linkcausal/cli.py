"""Command-line front end: simulate, link, and report subcommands.

Exit codes: 0 success, 1 runtime/model error, 2 usage error.  Every command
is deterministic given its flags and seed; report numbers carry 6
significant digits while trace files keep full precision.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import causal, experiments, records, sampler
from .comparators import build_comparisons

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkcausal",
        description="Bipartite record linkage with joint causal-effect estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the synthetic replication matrix")
    sim.add_argument("--scheme", default="L", help="comma list from {L,N}")
    sim.add_argument("--overlap", default="0.9", help="comma list of fractions")
    sim.add_argument("--mode", default="joint",
                     help="comma list from {joint,two_stage,known_link}")
    sim.add_argument("--missing-frac", default="0", help="comma list in [0,1)")
    sim.add_argument("--reps", type=int, default=20)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--n-a", type=int, default=1000)
    sim.add_argument("--n-b", type=int, default=1000)
    sim.add_argument("--typo-prob", type=float, default=0.22)
    sim.add_argument("--digit-swap-prob", type=float, default=0.18)
    sim.add_argument("--outcome-model", default="auto",
                     choices=["auto", "parametric", "spline"])
    sim.add_argument("--config", help="RunConfig key=value file")
    sim.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config key")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sim.add_argument("--write-data", action="store_true",
                     help="emit the generated File A/B CSVs per replication")
    sim.add_argument("--no-traces", action="store_true",
                     help="skip writing per-run trace files")
    sim.add_argument("--z-every", type=int, default=0,
                     help="write z snapshots every K iterations")

    link = sub.add_parser("link", help="link two CSV files and estimate the effect")
    link.add_argument("--file-a", required=True)
    link.add_argument("--file-b", required=True)
    link.add_argument("--schema", required=True,
                      help="link-field schema key=value file")
    link.add_argument("--config", help="RunConfig key=value file")
    link.add_argument("--set", dest="overrides", action="append", default=[],
                      metavar="KEY=VALUE")
    link.add_argument("--mode", choices=["joint", "two_stage"],
                      help="override the configured mode")
    link.add_argument("--seed", type=int, help="override the configured seed")
    link.add_argument("--truth", metavar="ID_COLUMN",
                      help="id column present in both files; adds PPV/NPV")
    link.add_argument("--out", required=True, help="output directory")
    link.add_argument("--z-every", type=int, default=0)

    rep = sub.add_parser("report", help="summarize previously written traces")
    rep.add_argument("--traces", nargs="+", required=True)
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--density-grid", type=int, default=0,
                     help="also write an effect-draw histogram with K bins")
    return parser


def _parse_list(raw: str, cast):
    return tuple(cast(tok) for tok in raw.split(",") if tok.strip())


def _run_config(args) -> records.RunConfig:
    pairs = records._parse_kv_lines(args.config) if args.config else {}
    for item in args.overrides:
        if "=" not in item:
            raise records.ConfigError(f"--set {item!r}: expected KEY=VALUE")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    return records.config_from_pairs(pairs, source="<flags>")


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    spec = experiments.MatrixSpec(
        schemes=_parse_list(args.scheme, str),
        overlaps=_parse_list(args.overlap, float),
        modes=_parse_list(args.mode, str),
        replications=args.reps,
        missing_fracs=_parse_list(args.missing_frac, float),
        n_a=args.n_a, n_b=args.n_b,
        typo_prob=args.typo_prob, digit_swap_prob=args.digit_swap_prob,
        outcome_model=args.outcome_model, seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    trace_dir = None
    if not args.no_traces:
        trace_dir = os.path.join(args.out, "traces")
        os.makedirs(trace_dir, exist_ok=True)
    data_dir = None
    if args.write_data:
        data_dir = os.path.join(args.out, "data")
        os.makedirs(data_dir, exist_ok=True)
    rows, reps = experiments.run_experiment_matrix(spec, cfg,
                                                   threads=args.threads,
                                                   trace_dir=trace_dir,
                                                   z_every=args.z_every,
                                                   data_dir=data_dir)
    experiments.write_report_csv(rows, os.path.join(args.out, "report.csv"))
    experiments.write_report_json(rows, reps, os.path.join(args.out, "report.json"))
    text = experiments.format_text_table(rows)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def _truth_links_from_ids(path_a, path_b, id_column):
    header_a, rows_a = records._read_csv(path_a)
    header_b, rows_b = records._read_csv(path_b)
    for header, path in ((header_a, path_a), (header_b, path_b)):
        if id_column not in header:
            raise records.DataFileError(f"{path}: missing id column {id_column!r}")
    ids_a = {row[header_a.index(id_column)]: i for i, row in enumerate(rows_a)}
    truth = {}
    col_b = header_b.index(id_column)
    for j, row in enumerate(rows_b):
        i = ids_a.get(row[col_b])
        if i is not None:
            truth[j] = i
    return truth


def cmd_link(args) -> int:
    cfg = _run_config(args)
    if args.mode:
        cfg = replace(cfg, mode=args.mode)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if cfg.mode == "known_link":
        raise records.ConfigError("cmd_link supports joint or two_stage modes")
    schema = records.load_link_schema(args.schema)
    file_a = records.load_file_a(args.file_a, schema.link_fields,
                                 schema.outcome_column)
    file_b = records.load_file_b(args.file_b, schema.link_fields,
                                 schema.covariate_columns,
                                 schema.treatment_column)
    comparisons = build_comparisons(file_a, file_b, schema.link_fields)

    os.makedirs(args.out, exist_ok=True)
    if cfg.mode == "two_stage":
        _, trace, stage1 = sampler.run_two_stage_pipeline(
            file_a, file_b, comparisons, cfg)
        modal = stage1.modal_links()
        stage1.write_csv(os.path.join(args.out, "trace_stage1.csv"), args.z_every)
    else:
        trace = sampler.run_chain(file_a, file_b, comparisons, cfg)
        modal = trace.modal_links()
    trace.write_csv(os.path.join(args.out, "trace.csv"), args.z_every)

    with open(os.path.join(args.out, "links.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "modal", "probability"])
        for j in range(trace.n_b):
            q, prob = modal[j]
            writer.writerow([j, "no_link" if q == causal.NO_LINK else q,
                             f"{prob:.6g}"])

    post = causal.AtelPosterior.from_draws(trace.post_burnin_atel())
    summary = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "n_a": trace.n_a,
        "n_b": trace.n_b,
        "atel": {"q025": post.q025, "q500": post.q500, "q975": post.q975,
                 "mean": post.mean},
        "mean_links": float(np.mean(trace.n_links[cfg.burn_in:])),
    }
    if args.truth:
        truth = _truth_links_from_ids(args.file_a, args.file_b, args.truth)
        ppv, npv = causal.compute_ppv_npv(modal, truth, trace.n_b)
        summary["ppv"] = ppv
        summary["npv"] = npv
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    sys.stdout.write(
        f"ATEL 2.5%={post.q025:.6g} 50%={post.q500:.6g} 97.5%={post.q975:.6g}\n")
    return 0


def cmd_report(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for path in args.traces:
        data = sampler.load_trace_csv(path)
        post = causal.AtelPosterior.from_draws(data["atel"])
        rows.append({
            "trace": os.path.basename(path), "mode": data["mode"],
            "seed": data["seed"], "draws": len(post.draws),
            "atel_mean": post.mean, "atel_q025": post.q025,
            "atel_q500": post.q500, "atel_q975": post.q975,
            "mean_links": float(np.mean(data["n_links"])),
        })
        if args.density_grid > 0:
            stem = os.path.splitext(os.path.basename(path))[0]
            counts, edges = np.histogram(post.draws, bins=args.density_grid)
            grid_path = os.path.join(args.out, f"density_{stem}.csv")
            with open(grid_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_left", "bin_right", "count"])
                for b in range(args.density_grid):
                    writer.writerow([repr(float(edges[b])),
                                     repr(float(edges[b + 1])), int(counts[b])])

    columns = ["trace", "mode", "seed", "draws", "atel_mean", "atel_q025",
               "atel_q500", "atel_q975", "mean_links"]
    with open(os.path.join(args.out, "summary.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([experiments._fmt(row[c]) for c in columns])
    lines = ["  ".join(f"{c:>10}" for c in columns)]
    for row in rows:
        lines.append("  ".join(f"{experiments._fmt(row[c]):>10}" for c in columns))
    text = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": cmd_simulate, "link": cmd_link, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except Exception as exc:
        print(f"linkcausal: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
