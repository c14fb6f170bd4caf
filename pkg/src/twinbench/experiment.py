"""Config-driven lattice runner, results store and table/curve emission."""

from __future__ import annotations

import concurrent.futures as cf
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import shutil
import traceback
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, registry
from .data import MODALITIES, Dataset, DataError, combine_modalities, load_csv, stratified_kfold
from .evaluation import METRIC_NAMES, CvContext, grid_evaluate
from .featsel import CRITERIA, DISPLAY_NAMES, NCA

log = logging.getLogger("twinbench")

DEFAULT_COUNTS = tuple(range(100, 1301, 100))
SEED_ENV = "TWINBENCH_SEED"
SELECTION_NOTE = ("hyperparameters chosen by best mean cross-validated accuracy over the grid; "
                  "reported accuracies are optimistically biased")
# metric -> file infix; accuracy uses the published "results" name
TABLE_FILES = {"accuracy": "results", "auc": "auc", "sensitivity": "sensitivity", "specificity": "specificity",
               "precision": "precision", "f_measure": "f_measure", "g_mean": "g_mean"}
GROUPINGS = ("by_family", "by_criterion", "by_matter", "by_kernel")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    gm: str | None = None
    wm: str | None = None
    label_column: str = "label"
    id_column: str = "subject_id"
    matters: tuple = ("CM",)
    classifiers: tuple = tuple(s.label for s in registry.TABLE_CLASSIFIERS)
    criteria: tuple = CRITERIA
    feature_counts: tuple = DEFAULT_COUNTS
    folds: int = 10
    seed: int = 0
    search: str = "grid"
    grids: dict = field(default_factory=dict)
    nca_exponents: tuple = registry.NCA_EXPONENTS
    standardize: bool = True
    rank_on_full: bool = False
    mrmr_bins: int = 10
    nca_iters: int = 200
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = dict(d)
        data = d.pop("data", {}) or {}
        known = {f for f in cls.__dataclass_fields__} - {"base_dir"}
        flags = d.pop("flags", {}) or {}
        d.update(flags)
        for k in ("gm", "wm", "label_column", "id_column"):
            if k in data:
                d[k] = data[k]
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k in ("matters", "classifiers", "criteria", "feature_counts", "nca_exponents"):
            if k in d:
                d[k] = tuple(d[k])
        cfg = cls(**d, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"no such config file: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        return cls.from_dict(raw, path.parent)

    def validate(self):
        if not self.matters or any(m not in MODALITIES for m in self.matters):
            raise ConfigError(f"matters must be a non-empty subset of {MODALITIES}")
        if len(set(self.matters)) != len(self.matters):
            raise ConfigError("duplicate matter")
        need = {"GM": ("gm",), "WM": ("wm",), "CM": ("gm", "wm")}
        for m in self.matters:
            for src in need[m]:
                if not getattr(self, src):
                    raise ConfigError(f"matter {m} needs the {src} data path")
        try:
            self.classifiers = tuple(registry.get(c).label for c in self.classifiers)
        except KeyError as e:
            raise ConfigError(str(e)) from None
        if not self.classifiers or len(set(self.classifiers)) != len(self.classifiers):
            raise ConfigError("classifier list empty or duplicated")
        if not self.criteria or any(c not in CRITERIA for c in self.criteria) \
                or len(set(self.criteria)) != len(self.criteria):
            raise ConfigError(f"criteria must be distinct names from {CRITERIA}")
        fc = list(self.feature_counts)
        if not fc or any(not isinstance(c, int) or c < 1 for c in fc) or fc != sorted(set(fc)):
            raise ConfigError("feature_counts must be positive, strictly ascending integers")
        if not isinstance(self.folds, int) or self.folds < 2:
            raise ConfigError("folds must be an integer >= 2")
        if self.search not in ("grid", "default"):
            raise ConfigError("search must be 'grid' or 'default'")
        try:
            self.seed = int(self.seed)
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        for name, g in self.grids.items():
            try:
                registry.parse_grid(registry.get(name), g)
            except (KeyError, ValueError) as e:
                raise ConfigError(f"grid for {name!r}: {e}") from None
        if not self.nca_exponents:
            raise ConfigError("nca_exponents must not be empty")

    def with_env_seed(self, environ=None):
        environ = os.environ if environ is None else environ
        if SEED_ENV in environ:
            try:
                self.seed = int(environ[SEED_ENV])
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer") from None
        return self

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def grid_for(self, label):
        spec = registry.get(label)
        if self.search == "default":
            return [dict(spec.default)]
        over = self.grids.get(label, self.grids.get(spec.key))
        return spec.points(registry.parse_grid(spec, over))

    def rank_grid(self, criterion):
        if criterion == NCA and self.search == "grid":
            return [{"nca_exponent": int(i)} for i in self.nca_exponents]
        return [{}]

    def lattice(self):
        """Cell coordinates ``(matter, criterion, count, classifier)`` in canonical order."""
        return [(m, c, n, k) for m in self.matters for c in self.criteria for n in self.feature_counts
                for k in self.classifiers]

    def fingerprint(self):
        d = asdict(self)
        d.pop("base_dir")
        return hashlib.sha256(_canonical_json(d).encode()).hexdigest()


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=list)


def load_matters(cfg: ExperimentConfig):
    """Load every dataset the config's matters need, keyed by matter tag."""
    gm = wm = None
    if "GM" in cfg.matters or "CM" in cfg.matters:
        gm = load_csv(cfg.resolve(cfg.gm), cfg.label_column, "GM", cfg.id_column)
    if "WM" in cfg.matters or "CM" in cfg.matters:
        wm = load_csv(cfg.resolve(cfg.wm), cfg.label_column, "WM", cfg.id_column)
    out = {}
    for m in cfg.matters:
        out[m] = {"GM": gm, "WM": wm}.get(m) or combine_modalities(gm, wm)
        if cfg.feature_counts[-1] > out[m].d:
            raise DataError(f"{m} has {out[m].d} features, fewer than feature count {cfg.feature_counts[-1]}")
    return out


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def cell_id(matter, criterion, count, classifier):
    return f"{matter}_{criterion}_{count}_{registry.get(classifier).key}"


def _metric_dict(m):
    return {k: getattr(m, k) for k in METRIC_NAMES}


def cell_record(res, seed, standardize):
    return {
        "note": SELECTION_NOTE,
        "classifier": res.classifier,
        "criterion": res.criterion,
        "feature_count": res.feature_count,
        "matter": res.matter,
        "hyper": res.hyper,
        "rank_options": res.rank_options,
        "rank_on_full": res.rank_on_full,
        "standardize": standardize,
        "seed": seed,
        "folds": [_metric_dict(f) for f in res.folds],
        "mean": _metric_dict(res.mean),
        "excluded": res.excluded,
        "skipped_folds": list(res.skipped_folds),
        "grid": [{"hyper": g.hyper, "rank_options": g.rank_options, "mean": _metric_dict(g.mean)}
                 for g in res.grid],
    }


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def fmt_percent(v):
    return "NaN" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{100.0 * v:.2f}"


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------

class ResultsStore:
    """An output directory with cell records, emitted files and a manifest.

    Every write goes through :meth:`write`, which records the SHA-256 of the
    content in ``manifest.json``.  The manifest holds no timestamps, so it is
    identical across reruns with the same inputs.
    """

    MANIFEST = "manifest.json"

    def __init__(self, root, meta=None):
        self.root = Path(root)
        self.files = {}
        self.cells = {}
        self.meta = dict(meta or {})
        m = self.root / self.MANIFEST
        if m.is_file():
            data = json.loads(m.read_text(encoding="utf-8"))
            self.files = data.get("files", {})
            self.cells = data.get("cells", {})
            if not meta:
                self.meta = data.get("meta", {})

    @classmethod
    def open(cls, root):
        root = Path(root)
        if not (root / cls.MANIFEST).is_file():
            raise FileNotFoundError(f"{root} holds no {cls.MANIFEST}")
        return cls(root)

    def write(self, rel, text):
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        self.files[str(rel)] = hashlib.sha256(data).hexdigest()
        return path

    def read(self, rel):
        return (self.root / rel).read_text(encoding="utf-8")

    def flush(self):
        body = {"meta": self.meta, "cells": dict(sorted(self.cells.items())),
                "files": dict(sorted(self.files.items()))}
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / (self.MANIFEST + ".tmp")
        tmp.write_text(_dumps(body), encoding="utf-8")
        os.replace(tmp, self.root / self.MANIFEST)

    def completed(self, cid):
        """True when the cell finished and its record still matches the manifest hash."""
        if self.cells.get(cid) != "done":
            return False
        rel = f"cells/{cid}.json"
        p = self.root / rel
        return p.is_file() and hashlib.sha256(p.read_bytes()).hexdigest() == self.files.get(rel)

    def records(self):
        out = []
        for cid, status in sorted(self.cells.items()):
            if status == "done":
                out.append(json.loads(self.read(f"cells/{cid}.json")))
        return out

    def failed(self):
        return sorted(c for c, s in self.cells.items() if s == "failed")


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

_WORKER = {}


def _init_worker(state):
    _WORKER.clear()
    _WORKER.update(state)


def _context(matter):
    st = _WORKER
    ctx = st["contexts"].get(matter)
    if ctx is None:
        cfg = st["cfg"]
        ds = st["data"][matter]
        ctx = CvContext(ds, st["plans"][matter], cfg.standardize, cfg.rank_on_full, cfg.mrmr_bins, cfg.nca_iters)
        ctx.preload(st["rankings"].get(matter, {}))
        st["contexts"][matter] = ctx
    return ctx


def _rank_job(matter, fold, criterion, options):
    ctx = _context(matter)
    r = ctx.ranking(fold, criterion, options)
    key = ("full" if ctx.rank_on_full else fold, criterion, tuple(sorted(options.items())))
    return matter, key, r


def _cell_job(matter, criterion, count, classifier):
    cfg = _WORKER["cfg"]
    ctx = _context(matter)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = grid_evaluate(ctx.ds, ctx.plan, classifier, criterion, count, cfg.grid_for(classifier),
                                rank_grid=cfg.rank_grid(criterion), seed=cfg.seed, context=ctx)
        return "done", cell_record(res, cfg.seed, cfg.standardize)
    except Exception as e:  # recorded per cell; the run carries on
        return "failed", {"classifier": classifier, "criterion": criterion, "feature_count": count,
                          "matter": matter, "error": f"{type(e).__name__}: {e}",
                          "traceback": traceback.format_exc(limit=8)}


def _pool_map(jobs, fn, state, n_workers):
    """Yield ``fn(*job)`` results in job order, on a process pool when ``n_workers > 1``."""
    if n_workers <= 1 or len(jobs) <= 1:
        _init_worker(state)
        for j in jobs:
            yield fn(*j)
        return
    with cf.ProcessPoolExecutor(n_workers, initializer=_init_worker, initargs=(state,)) as ex:
        futs = [ex.submit(fn, *j) for j in jobs]
        for f in futs:
            yield f.result()


def run_meta(cfg):
    return {"config_sha256": cfg.fingerprint(), "seed": cfg.seed, "folds": cfg.folds, "search": cfg.search,
            "standardize": cfg.standardize, "rank_on_full": cfg.rank_on_full,
            "versions": {"twinbench": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "note": SELECTION_NOTE}


def run(cfg: ExperimentConfig, out, jobs=1, resume=False, data=None) -> ResultsStore:
    """Evaluate every lattice cell and emit all tables and curves.

    With ``resume`` an existing store produced by the same configuration is
    extended: finished cells are kept and only missing or failed cells are
    computed.  Without it the cell records are recomputed from scratch.
    """
    data = data if data is not None else load_matters(cfg)
    meta = run_meta(cfg)
    out = Path(out)
    if resume and (out / ResultsStore.MANIFEST).is_file():
        store = ResultsStore(out)
        if store.meta.get("config_sha256") != meta["config_sha256"]:
            raise ConfigError(f"{out} was produced by a different configuration; cannot resume")
        store.meta = meta
    else:
        if (out / ResultsStore.MANIFEST).is_file():
            for sub in ("cells", "failures", "tables", "curves"):
                shutil.rmtree(out / sub, ignore_errors=True)
        store = ResultsStore(out, meta)
        store.files, store.cells = {}, {}
    plans = {m: stratified_kfold(ds, cfg.folds, cfg.seed) for m, ds in data.items()}
    todo = [c for c in cfg.lattice() if not store.completed(cell_id(*c))]
    log.info("%d cells in lattice, %d to compute", len(cfg.lattice()), len(todo))

    state = {"cfg": cfg, "data": data, "plans": plans, "rankings": {}, "contexts": {}}
    rank_jobs = sorted({(m, f, c, tuple(sorted(o.items())))
                        for m, c, _, _ in todo for o in cfg.rank_grid(c)
                        for f in ([0] if cfg.rank_on_full else range(cfg.folds))})
    rank_jobs = [(m, f, c, dict(o)) for m, f, c, o in rank_jobs
                 if cfg.rank_on_full or _fold_usable(data[m], plans[m], f)]
    for matter, key, r in _pool_map(rank_jobs, _rank_job, state, jobs):
        state["rankings"].setdefault(matter, {})[key] = r
    state["contexts"] = {}

    for (m, c, n, k), (status, rec) in zip(todo, _pool_map(todo, _cell_job, state, jobs)):
        cid = cell_id(m, c, n, k)
        if status == "done":
            store.write(f"cells/{cid}.json", _dumps(rec))
            store.files.pop(f"failures/{cid}.json", None)
            fp = store.root / "failures" / f"{cid}.json"
            if fp.exists():
                fp.unlink()
        else:
            log.warning("cell %s failed: %s", cid, rec["error"])
            store.write(f"failures/{cid}.json", _dumps(rec))
        store.cells[cid] = status
        store.flush()
    emit_all(store, cfg)
    store.flush()
    return store


def _fold_usable(ds, plan, f):
    tr, _ = plan.split(f)
    return ds.rows(tr).has_both_classes()


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _index(records):
    return {(r["matter"], r["criterion"], r["feature_count"], r["classifier"]): r for r in records}


def emit_cells_csv(store: ResultsStore, records=None):
    """One row per finished cell with full-precision fold-mean metrics."""
    records = store.records() if records is None else records
    head = ["matter", "criterion", "feature_count", "classifier", *METRIC_NAMES,
            *(f"excluded_{k}" for k in METRIC_NAMES), "skipped_folds", "hyper", "rank_options"]
    rows = [[f"# {SELECTION_NOTE}"], head]
    for r in sorted(records, key=lambda r: (r["matter"], CRITERIA.index(r["criterion"]), r["feature_count"],
                                            _row_pos(r["classifier"]))):
        rows.append([r["matter"], r["criterion"], r["feature_count"], r["classifier"],
                     *(repr(float(r["mean"][k])) for k in METRIC_NAMES),
                     *(r["excluded"][k] for k in METRIC_NAMES),
                     " ".join(map(str, r["skipped_folds"])),
                     _canonical_json(r["hyper"]), _canonical_json(r["rank_options"])])
    store.write("cells.csv", _csv_text(rows))


def _row_pos(label):
    order = [s.label for s in registry.all_specs()]
    return order.index(label) if label in order else len(order)


def table_name(matter, count, metric, half):
    return f"{matter}_{count}_{TABLE_FILES[metric]}_{half}.csv"


def emit_tables(store: ResultsStore, matter, feature_count, classifiers=None, criteria=None, records=None):
    """Write the lin/nl tables of every metric for one matter and feature count.

    Rows follow the published classifier order, columns the criterion order;
    values are fold-mean percentages with two decimals and undefined means
    are written as ``NaN``.  Missing cells are left blank (with a warning).
    """
    records = store.records() if records is None else records
    idx = _index(records)
    if classifiers is None:
        present = {r["classifier"] for r in records}
        classifiers = [s.label for s in registry.all_specs() if s.label in present]
    classifiers = sorted(classifiers, key=_row_pos)
    if criteria is None:
        present = {r["criterion"] for r in records}
        criteria = [c for c in CRITERIA if c in present]
    written = []
    missing = 0
    for metric in METRIC_NAMES:
        for half in (registry.LIN, registry.NL):
            rows = [["Methods", *(DISPLAY_NAMES[c] for c in criteria)]]
            for label in classifiers:
                if registry.get(label).table != half:
                    continue
                row = [label]
                for c in criteria:
                    r = idx.get((matter, c, feature_count, label))
                    if r is None:
                        missing += 1
                        row.append("")
                    else:
                        row.append(fmt_percent(r["mean"][metric]))
                rows.append(row)
            rel = f"tables/{table_name(matter, feature_count, metric, half)}"
            store.write(rel, _csv_text(rows))
            written.append(store.root / rel)
    if missing:
        warnings.warn(f"{matter} {feature_count}: {missing // len(METRIC_NAMES)} missing cell(s) left blank",
                      stacklevel=2)
    return written


def _family_of(label):
    return registry.get(label).family


def _kernel_group(label, present):
    """``Linear``/``Non-Linear`` for methods present in both variants, else None."""
    for a, b in (("(Linear)", "(Non-Linear)"),):
        if label.endswith(b):
            base = label[: -len(b)].strip()
            partner = f"{base} {a}" if f"{base} {a}" in present else base
            return "Non-Linear" if partner in present else None
        if label.endswith(a):
            base = label[: -len(a)].strip()
            return "Linear" if f"{base} {b}" in present else None
    return "Linear" if f"{label} (Non-Linear)" in present else None


def curve_table(records, grouping, matter=None):
    """``(groups, counts, values)`` with ``values[i][j]`` the mean accuracy of
    group ``j`` at ``counts[i]`` over all matching cells (NaN-free means)."""
    recs = [r for r in records if matter is None or r["matter"] == matter]
    present = {r["classifier"] for r in recs}
    if grouping == "by_family":
        key = lambda r: _family_of(r["classifier"])
        order = registry.FAMILIES + ("baseline",)
    elif grouping == "by_criterion":
        key = lambda r: DISPLAY_NAMES[r["criterion"]]
        order = tuple(DISPLAY_NAMES[c] for c in CRITERIA)
    elif grouping == "by_matter":
        key = lambda r: r["matter"]
        order = MODALITIES
    elif grouping == "by_kernel":
        key = lambda r: _kernel_group(r["classifier"], present)
        order = ("Linear", "Non-Linear")
    else:
        raise ValueError(f"unknown grouping {grouping!r}")
    buckets = {}
    for r in recs:
        g = key(r)
        acc = r["mean"]["accuracy"]
        if g is None or acc is None or math.isnan(acc):
            continue
        buckets.setdefault((g, r["feature_count"]), []).append(acc)
    groups = [g for g in order if any(k[0] == g for k in buckets)]
    counts = sorted({k[1] for k in buckets})
    values = [[float(np.mean(buckets[(g, n)])) if (g, n) in buckets else math.nan for g in groups]
              for n in counts]
    return groups, counts, values


def emit_curves(store: ResultsStore, grouping, records=None):
    """CSV plus SVG line chart of mean accuracy versus feature count.

    ``by_matter`` pools all matters into one file; the other groupings
    write one file per matter.
    """
    records = store.records() if records is None else records
    matters = [None] if grouping == "by_matter" else sorted({r["matter"] for r in records},
                                                            key=MODALITIES.index)
    written = []
    for m in matters:
        groups, counts, values = curve_table(records, grouping, m)
        stem = grouping if m is None else f"{m}_{grouping}"
        rows = [["feature_count", *groups]]
        rows += [[n, *(repr(v) for v in vals)] for n, vals in zip(counts, values)]
        store.write(f"curves/{stem}.csv", _csv_text(rows))
        store.write(f"curves/{stem}.svg", svg_chart(counts, groups, values,
                                                    title=f"{m + ' ' if m else ''}{grouping.replace('_', ' ')}"))
        written.append(store.root / f"curves/{stem}.csv")
    return written


def emit_all(store: ResultsStore, cfg: ExperimentConfig | None = None):
    records = store.records()
    emit_cells_csv(store, records)
    store.write("tables/NOTE.txt", SELECTION_NOTE + "\n")
    combos = sorted({(r["matter"], r["feature_count"]) for r in records})
    for m, n in combos:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            emit_tables(store, m, n, cfg.classifiers if cfg else None, cfg.criteria if cfg else None, records)
    if records:
        for g in GROUPINGS:
            emit_curves(store, g, records)


_PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def svg_chart(xs, names, values, title="", width=640, height=400):
    """Dependency-free SVG with axes, one polyline per series and a legend."""
    left, right, top, bottom = 60, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    V = np.array(values, dtype=float) if len(values) else np.zeros((0, len(names)))
    finite = V[np.isfinite(V)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.05, hi + 0.05
    x0, x1 = (min(xs), max(xs)) if xs else (0, 1)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(v):
        return top + (hi - v) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left}" y="18" font-size="13">{_esc(title)}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for x in xs:
        out.append(f'<text x="{px(x):.2f}" y="{top + ph + 15}" text-anchor="middle">{x}</text>')
    for t in np.linspace(lo, hi, 5):
        out.append(f'<text x="{left - 5}" y="{py(t) + 4:.2f}" text-anchor="end">{100 * t:.1f}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">features</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.2f}" transform="rotate(-90 14 {top + ph / 2:.2f})" '
               f'text-anchor="middle">accuracy (%)</text>')
    for j, name in enumerate(names):
        colour = _PALETTE[j % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(V[i, j]):.2f}" for i, x in enumerate(xs) if np.isfinite(V[i, j]))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{pts}"/>')
        ly = top + 14 * j + 10
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 28}" y2="{ly}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly + 4}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def read_table(path):
    """Parse an emitted table into ``{(row, column): float}`` (NaN kept, blanks skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    head = rows[0][1:]
    out = {}
    for row in rows[1:]:
        for c, cell in zip(head, row[1:]):
            if cell != "":
                out[(row[0], c)] = float(cell)
    return head, [r[0] for r in rows[1:]], out
