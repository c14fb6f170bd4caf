"""``twinbench`` command line: run, rank, stats and report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiment, stats
from .data import DataError, load_csv, standardize
from .experiment import ConfigError, ExperimentConfig, ResultsStore
from .featsel import CRITERIA, rank_features

EXIT_OK, EXIT_PARTIAL, EXIT_INPUT = 0, 1, 2
log = logging.getLogger("twinbench")


def _criterion(name):
    lookup = {c.lower(): c for c in CRITERIA}
    lookup.update({"t-test": "TTest", "ttest": "TTest"})
    try:
        return lookup[name.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown criterion {name!r}; choose from {', '.join(CRITERIA)}")


def cmd_run(args):
    cfg = ExperimentConfig.load(args.config).with_env_seed()
    out = Path(args.out) if args.out else Path(args.config).with_suffix("").parent / "results"
    store = experiment.run(cfg, out, jobs=args.jobs, resume=args.resume)
    failed = store.failed()
    done = sum(1 for s in store.cells.values() if s == "done")
    print(f"{done} cell(s) done, {len(failed)} failed; results in {out}")
    for cid in failed:
        print(f"  failed: {cid}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_rank(args):
    ds = load_csv(args.data, args.label_column, id_column=args.id_column)
    z, _ = standardize(ds, ds)
    r = rank_features(z, args.criterion, seed=args.seed)
    pos = np.empty(ds.d, dtype=int)
    pos[r.order] = np.arange(1, ds.d + 1)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_id", "score", "rank"])
        for j in r.order:
            w.writerow([ds.feature_ids[j], repr(float(r.scores[j])), int(pos[j])])
    print(f"{args.criterion}: ranked {ds.d} features -> {out}")
    return EXIT_OK


def read_scores(path):
    """Rows = datasets/criteria (first column is the row name), columns = algorithms."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2 or len(rows[0]) < 3:
        raise DataError("score file needs a header, at least one row and two algorithm columns")
    names = [h.strip() for h in rows[0][1:]]
    S = np.full((len(rows) - 1, len(names)), np.nan)
    for i, row in enumerate(rows[1:]):
        for j, cell in enumerate(row[1:len(names) + 1]):
            cell = cell.strip()
            if cell and cell.lower() != "nan":
                try:
                    S[i, j] = float(cell)
                except ValueError:
                    raise DataError(f"non-numeric score {cell!r} at row {i + 2}") from None
    return names, [r[0] for r in rows[1:]], S


def write_stats(report: stats.FriedmanReport, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rm = report.rank_matrix
    summary = {"N": rm.N, "k": rm.k, "chi2": report.chi2, "chi2_p": report.chi2_p, "F_F": report.ff,
               "F_F_p": report.ff_p, "F_F_df": [rm.k - 1, (rm.k - 1) * (rm.N - 1)], "alpha": report.alpha,
               "q_alpha": report.q, "CD": report.cd, "reject_null": bool(report.reject),
               "dropped_rows": list(rm.dropped_rows), "notes": list(report.notes)}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    with (out / "ranks.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "average_rank"])
        for name, r in zip(report.names, rm.avg_ranks):
            w.writerow([name, f"{r:.4f}"])
    with (out / "pairs.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["better", "worse", "rank_better", "rank_worse", "difference", "significant"])
        for i in range(rm.k):
            for j in range(rm.k):
                if rm.avg_ranks[i] < rm.avg_ranks[j]:
                    d = rm.avg_ranks[j] - rm.avg_ranks[i]
                    w.writerow([report.names[i], report.names[j], f"{rm.avg_ranks[i]:.4f}",
                                f"{rm.avg_ranks[j]:.4f}", f"{d:.4f}", "Yes" if d >= report.cd else "No"])
    cols, rows = report.significance_table()
    with (out / "significance_table.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Models", *cols])
        for name, cells in rows:
            w.writerow([name, *cells])
    return summary


def cmd_stats(args):
    names, _, S = read_scores(args.scores)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = stats.friedman_report(S, names, args.alpha, args.q)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    s = write_stats(report, args.out)
    print(f"N={s['N']} k={s['k']} chi2={s['chi2']:.2f} F_F={s['F_F']:.2f} (p={s['F_F_p']:.3g}) "
          f"q={s['q_alpha']:.3f} CD={s['CD']:.2f}")
    for note in report.notes:
        print(f"note: {note}")
    print(f"{len(report.pairs)} significant pair(s); details in {args.out}")
    return EXIT_OK


def cmd_report(args):
    store = ResultsStore.open(args.store)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        files = experiment.emit_tables(store, args.matter, args.features)
    store.flush()
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for f in files:
        if f.name.endswith("_results_lin.csv") or f.name.endswith("_results_nl.csv"):
            print(f"== {f.name}")
            print(f.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="twinbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate the configured lattice")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--resume", action="store_true")
    r.set_defaults(fn=cmd_run)

    k = sub.add_parser("rank", help="rank the features of one CSV by a criterion")
    k.add_argument("--data", required=True)
    k.add_argument("--criterion", required=True, type=_criterion)
    k.add_argument("--out", required=True)
    k.add_argument("--label-column", default="label")
    k.add_argument("--id-column", default="subject_id")
    k.add_argument("--seed", type=int, default=0)
    k.set_defaults(fn=cmd_rank)

    s = sub.add_parser("stats", help="Friedman / Iman-Davenport / Nemenyi on a score matrix")
    s.add_argument("--scores", required=True)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--q", type=float, default=None, help="override the tabulated q_alpha")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_stats)

    t = sub.add_parser("report", help="emit tables for one matter and feature count of a store")
    t.add_argument("--store", required=True)
    t.add_argument("--matter", default="CM", choices=("GM", "WM", "CM"))
    t.add_argument("--features", type=int, default=500)
    t.set_defaults(fn=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, DataError, FileNotFoundError, stats.StatsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
