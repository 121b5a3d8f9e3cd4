"""Experiment sweeps: grid execution, crash-safe CSV emission, plots.

The CSV is the source of truth; plots are derived artifacts.  Records are
appended (and flushed) as they complete, so a killed sweep loses at most the
in-flight record; re-running with resume=True skips completed (point, seed,
arm) combinations and rewrites the file in sorted order, which makes the
final CSV independent of scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .hermite import LinkSpec, link_from_hermite, normalize_link
from .model import IndexModel, augment, make_sparse_direction, make_sparse_frame, sample_dataset
from .training import TrainConfig, excess_risk, fit

CSV_COLUMNS = [
    "d", "n", "M", "s", "q", "alpha", "link", "mode", "delta",
    "seed", "arm", "support_residual", "excess_risk", "wall_time_ms", "error",
]

GRID_KEYS = ["d", "n", "M", "s", "q", "alpha", "link", "mode", "delta"]


def make_link(name: str) -> LinkSpec:
    """Resolve a link name: 'heK' is the normalized degree-K Hermite
    polynomial; 'poly:c0,c1,...' normalizes the given monomial polynomial."""
    name = name.strip().lower()
    if name.startswith("he"):
        k = int(name[2:])
        gam = [0.0] * (k + 1)
        gam[k] = 1.0
        return normalize_link(link_from_hermite(gam))
    if name.startswith("poly:"):
        from .hermite import link_from_monomial

        coeffs = [float(t) for t in name[5:].split(",")]
        return normalize_link(link_from_monomial(coeffs))
    raise ValueError(f"unknown link {name!r}")


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian grid over model/training coordinates plus seed replicates."""

    grid: dict[str, list]
    seeds: int = 3
    base_seed: int = 0
    r: int = 2  # columns used in multi mode
    m: int = 64
    kappa: float = 1.0
    n_test: int = 20000
    out: str = "sweep.csv"
    resume: bool = False
    jobs: int = 1
    compare: bool = False  # paired pruned/unpruned arms

    def __post_init__(self):
        grid = {k: list(v) for k, v in self.grid.items()}
        defaults = {
            "d": [256], "n": [4000], "M": [16], "s": [16], "q": [1.0],
            "alpha": [0.5], "link": ["he2"], "mode": ["single"], "delta": [0.0],
        }
        for k, dv in defaults.items():
            grid.setdefault(k, dv)
        unknown = set(grid) - set(defaults)
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        if any(len(v) == 0 for v in grid.values()):
            raise ValueError("empty grid axis")
        object.__setattr__(self, "grid", grid)
        if self.seeds < 1:
            raise ValueError("need at least one seed")


@dataclass
class ResultRecord:
    point: dict
    seed: int
    arm: str
    support_residual: float = math.nan
    excess_risk: float = math.nan
    wall_time_ms: float = math.nan
    error: str = ""

    def row(self) -> list[str]:
        vals = []
        for key in CSV_COLUMNS:
            if key in self.point:
                v = self.point[key]
                vals.append(repr(v) if isinstance(v, float) else str(v))
            elif key == "seed":
                vals.append(str(self.seed))
            elif key == "arm":
                vals.append(self.arm)
            elif key == "error":
                vals.append(self.error)
            else:
                v = getattr(self, key)
                vals.append(repr(float(v)))
        return vals

    def key(self) -> tuple:
        return tuple(str(self.point[k]) for k in GRID_KEYS) + (str(self.seed), self.arm)


def record_seed(base_seed: int, point: dict, seed_index: int) -> int:
    """Stable per-record seed: hash of the grid coordinates, independent of
    execution order, so parallel scheduling cannot change any number."""
    canon = ";".join(f"{k}={point[k]}" for k in GRID_KEYS) + f";rep={seed_index}"
    digest = hashlib.sha256(canon.encode()).digest()
    mix = int.from_bytes(digest[:8], "little")
    return int(np.random.SeedSequence(entropy=base_seed, spawn_key=(mix,)).generate_state(1)[0])


def _build_model(point: dict, spec: SweepSpec, seed: int) -> IndexModel:
    link = make_link(point["link"])
    if point["mode"] == "multi":
        V = make_sparse_frame(point["d"], spec.r, point["s"], seed)
        links = tuple(
            link_from_hermite([g / math.sqrt(spec.r) for g in link.hermite_coeffs])
            for _ in range(spec.r)
        )
        return IndexModel(V=V, links=links, noise_delta=point["delta"])
    v = make_sparse_direction(point["d"], point["s"], "flat")
    return IndexModel(V=v[:, None], links=(link,), noise_delta=point["delta"])


def support_residual(model: IndexModel, J) -> float:
    """||V restricted off J||_F^2 / r, in [0, 1]; the augmented coordinate
    (absent from V) never counts."""
    mask = np.ones(model.d, dtype=bool)
    inside = [i for i in J.indices if i < model.d]
    mask[inside] = False
    return float(np.sum(model.V[mask] ** 2)) / model.r


def run_point(point: dict, spec: SweepSpec, seed_index: int, arm: str = "pruned") -> ResultRecord:
    seed = record_seed(spec.base_seed, point, seed_index)
    rec = ResultRecord(point=point, seed=seed, arm=arm)
    t0 = time.perf_counter()
    try:
        model = _build_model(point, spec, seed)
        data = augment(sample_dataset(model, point["n"], seed), seed + 1)
        cfg = TrainConfig(
            M=point["M"], c=1.0 / math.log(data.d), m=spec.m,
            mode=point["mode"], seed=seed, kappa=spec.kappa,
        )
        pred = fit(data, cfg, force_full_support=(arm == "unpruned"))
        rec.support_residual = support_residual(model, pred.J)
        rec.excess_risk = excess_risk(pred, model, spec.n_test, seed + 2)
    except Exception as exc:  # recorded, never aborts the sweep
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return rec


def _grid_points(spec: SweepSpec):
    keys = GRID_KEYS
    for combo in product(*(spec.grid[k] for k in keys)):
        yield dict(zip(keys, combo))


def _load_done(path) -> dict[tuple, list[str]]:
    done = {}
    if os.path.exists(path):
        with open(path) as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                if row.get("error"):
                    continue  # failed records are retried on resume
                key = tuple(row[k] for k in GRID_KEYS) + (row["seed"], row["arm"])
                done[key] = [row[c] for c in CSV_COLUMNS]
        return done
    return done


def _rewrite_sorted(path, rows: dict[tuple, list[str]]) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for key in sorted(rows):
            writer.writerow(rows[key])
    os.replace(tmp, path)


def _execute(tasks, spec: SweepSpec) -> list[ResultRecord]:
    done = _load_done(spec.out) if spec.resume else {}
    pending = [t for t in tasks if _task_key(t) not in done]
    records = []

    header_needed = not (spec.resume and os.path.exists(spec.out))
    mode = "a" if not header_needed else "w"
    with open(spec.out, mode, newline="") as fh:
        writer = csv.writer(fh)
        if header_needed:
            writer.writerow(CSV_COLUMNS)
            fh.flush()

        def emit(rec: ResultRecord):
            records.append(rec)
            writer.writerow(rec.row())
            fh.flush()
            done[rec.key()] = rec.row()

        if spec.jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                futures = [pool.submit(run_point, *t[:3], arm=t[3]) for t in pending]
                for fut in futures:
                    emit(fut.result())
        else:
            for t in pending:
                emit(run_point(*t[:3], arm=t[3]))

    _rewrite_sorted(spec.out, done)
    return records


def _task_key(task) -> tuple:
    point, spec, seed_index, arm = task
    seed = record_seed(spec.base_seed, point, seed_index)
    return tuple(str(point[k]) for k in GRID_KEYS) + (str(seed), arm)


def run_sweep(spec: SweepSpec) -> list[ResultRecord]:
    """Generate -> augment -> fit -> measure for every grid point and seed."""
    tasks = [
        (point, spec, si, "pruned")
        for point in _grid_points(spec)
        for si in range(spec.seeds)
    ]
    return _execute(tasks, spec)


def compare_pruned_unpruned(spec: SweepSpec) -> list[ResultRecord]:
    """Paired records per (point, seed): pruning on vs. support forced to
    all coordinates, identical seeds otherwise."""
    tasks = []
    for point in _grid_points(spec):
        for si in range(spec.seeds):
            tasks.append((point, spec, si, "pruned"))
            tasks.append((point, spec, si, "unpruned"))
    return _execute(tasks, spec)


PLOT_KINDS = ("risk_vs_n", "residual_vs_n", "coherence_hist")


def emit_plots(csv_path, kind: str, out=None):
    """Render one deterministic SVG for the requested view of a result CSV.

    Log-log medians vs n for the risk/residual kinds (one line per arm),
    histogram of pairwise correlations for coherence_hist.  Byte-identical
    across re-runs: fixed hash salt, no timestamps.
    """
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "sparse-index-lab"

    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    out = out or (os.path.splitext(str(csv_path))[0] + f"_{kind}.svg")

    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    if kind == "coherence_hist":
        col = "avg_correlation" if rows and "avg_correlation" in rows[0] else "value"
        vals = [float(r[col]) for r in rows if r.get(col)]
        if vals:
            ax.hist(vals, bins=min(40, max(5, len(vals) // 5)), color="#336699")
        else:
            print(f"warning: no rows in {csv_path}; emitting empty axes", file=sys.stderr)
        ax.set_xlabel("pairwise average correlation")
        ax.set_ylabel("count")
    else:
        ycol = "excess_risk" if kind == "risk_vs_n" else "support_residual"
        groups: dict[tuple, dict[int, list[float]]] = {}
        for r in rows:
            if r.get("error"):
                continue
            try:
                yval = float(r[ycol])
                nval = int(r["n"])
            except (KeyError, ValueError):
                raise ValueError(f"CSV {csv_path} lacks the result-record schema")
            groups.setdefault((r.get("arm", ""),), {}).setdefault(nval, []).append(yval)
        if not groups:
            print(f"warning: no rows in {csv_path}; emitting empty axes", file=sys.stderr)
        for (arm,), series in sorted(groups.items()):
            ns = sorted(series)
            med = [float(np.median(series[n])) for n in ns]
            ax.plot(ns, med, marker="o", label=arm or "all")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(ycol.replace("_", " "))
        if groups:
            ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


def parse_config(path) -> dict:
    """Flat key=value config; arrays as comma lists in square brackets."""

    def convert(tok: str):
        tok = tok.strip()
        try:
            return int(tok)
        except ValueError:
            pass
        try:
            return float(tok)
        except ValueError:
            return tok

    out: dict = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not key or not val:
                raise ValueError(f"malformed config line: {line!r}")
            if val.startswith("[") and val.endswith("]"):
                out[key] = [convert(t) for t in val[1:-1].split(",") if t.strip()]
            else:
                out[key] = convert(val)
    return out
