"""A small benchmark run, end to end, followed by a rank-based comparison.

Two synthetic modalities stand in for grey- and white-matter features. We run
six classifiers with three criteria at three feature counts, write the usual
results store to a temporary directory and then ask whether the classifiers differ
significantly. Friedman ranks each classifier within every (criterion, count)
block. The Nemenyi critical difference says how far apart two average ranks
must be before the gap means anything.
"""

import tempfile
from pathlib import Path

import numpy as np

from twinbench import stats
from twinbench.data import write_csv
from twinbench.experiment import ExperimentConfig, run
from twinbench.synthetic import paired_modalities

classifiers = ["TWSVM (Linear)", "LSTWSVM (Linear)", "KRR (Linear)", "KNN", "RaF", "RVFL"]
criteria = ["TTest", "Wilcoxon", "MRMR"]
counts = [20, 60, 120]

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    gm, wm = paired_modalities(n=80, d_gm=150, d_wm=100, n_informative=6, effect=1.0, seed=1)
    cfg = ExperimentConfig.from_dict({
        "data": {"gm": str(write_csv(gm, tmp / "gm.csv")), "wm": str(write_csv(wm, tmp / "wm.csv"))},
        "matters": ["CM"], "classifiers": classifiers, "criteria": criteria,
        "feature_counts": counts, "folds": 5, "search": "default", "seed": 0,
    }, tmp)
    store = run(cfg, tmp / "results", jobs=2)
    print(f"{len(store.records())} cells evaluated; files written:")
    for p in sorted((tmp / "results" / "tables").glob("CM_120_*")):
        print("  ", p.name)
    print("\n" + (tmp / "results" / "tables" / "CM_120_results_lin.csv").read_text())

    # score matrix: one row per (criterion, count) block, one column per classifier
    acc = {(r["criterion"], r["feature_count"], r["classifier"]): r["mean"]["accuracy"]
           for r in store.records()}
    S = np.array([[acc[c, n, k] for k in classifiers] for c in criteria for n in counts])

report = stats.friedman_report(S, classifiers)
rm = report.rank_matrix
print(f"N = {rm.N} blocks, k = {rm.k} classifiers")
for name, r in sorted(zip(classifiers, rm.avg_ranks), key=lambda t: t[1]):
    print(f"  {name:<18} average rank {r:.2f}")
print(f"F_F = {report.ff:.2f} (p = {report.ff_p:.3g}), CD = {report.cd:.2f}")
for i, j in report.pairs:
    print(f"  {classifiers[i]} ranks significantly better than {classifiers[j]}")
if not report.pairs:
    print("  no pair is separated by the critical difference")
