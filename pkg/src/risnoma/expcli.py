"""Experiment harness: sweep runner and trend summarizer.

Four studies are supported, selected by sweep kind:

  convergence    one scenario point, per-iteration energy histories
  ris-location   RIS x-coordinate swept along the AP-user axis (m)
  ris-size       reflecting-element count L
  data-size      raw data size per SU (Kbits)

Each sweep writes one CSV per scheme (``<kind>_<scheme>.csv``) with one row
per (sweep value, seed). Rows carry the full per-SU (rho, p) so any row can
be recomputed through sysmodel.total_energy. The convergence sweep also
writes ``convergence_<scheme>_history.csv`` with per-iteration energies.
Floats are written with repr() so identical specs give byte-identical files.

With ``--plots``, seed-mean curves (band = per-seed min/max) are rendered to
SVG next to the CSVs. ``summarize`` re-reads a results directory and prints
machine-checkable trend verdicts.

CLI examples:

  python -m risnoma.expcli run --scenario cfg/experiment.ini \\
      --sweep ris-location --seeds 0..9 --schemes jtac --out results --plots
  python -m risnoma.expcli summarize --in results
"""

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import jtac, scenario

SWEEP_KINDS = ("convergence", "ris-location", "ris-size", "data-size")

DEFAULT_GRIDS = {
    "ris-location": (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0),   # RIS x (m)
    "ris-size": (20.0, 40.0, 60.0, 80.0, 100.0),           # element count
    "data-size": (4.0, 8.0, 12.0),                         # Q (Kbits)
}

KBIT = 1e3

# slack band for trend verdicts, fraction of the compared mean
TREND_SLACK = 0.02

# tolerated numerical rise inside a "nonincreasing" energy history (J)
HISTORY_RISE_TOL = 1e-9

REQUIRED_COLUMNS = ("value", "seed", "E_o", "E_s", "E_t",
                    "mean_rho", "iterations", "converged")
HISTORY_COLUMNS = ("seed", "iteration", "E_o", "E_s", "E_t", "min_slack_bits")


class SchemaError(ValueError):
    """A results CSV is missing required columns."""


@dataclass(frozen=True)
class SweepSpec:
    """One sweep request: grid, seeds, schemes, and output location."""
    kind: str
    values: tuple
    seeds: tuple
    schemes: tuple
    output_dir: str
    plots: bool = False
    dump_dir: str = None
    workers: int = 1

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}; expected one of {SWEEP_KINDS}")
        if not self.values:
            raise ValueError("sweep grid must be nonempty")
        if not self.seeds:
            raise ValueError("seed list must be nonempty")
        if not self.schemes:
            raise ValueError("scheme list must be nonempty")
        for s in self.schemes:
            if s not in jtac.SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; expected subset of {jtac.SCHEMES}")


def default_grid(kind, scen):
    if kind == "convergence":
        return (float(scen.L),)
    return DEFAULT_GRIDS[kind]


def apply_value(scen, kind, value):
    """Scenario for one sweep point (seed applied separately)."""
    if kind == "convergence":
        return scen
    if kind == "ris-location":
        return replace(scen, ris_pos=(float(value), 0.0))
    if kind == "ris-size":
        return replace(scen, L=int(value))
    if kind == "data-size":
        return replace(scen, Q=(float(value) * KBIT,) * scen.K)
    raise ValueError(f"unknown sweep kind {kind!r}")


def _result_row(kind_value, seed, scen, sol):
    # worst rank-1 quality among the run's cleanly converged relaxations;
    # nan when no inner solve reached the rank-1 exit
    conv = [r1 for (_, r1, _, _, ok) in sol.beam_solves
            if ok and np.isfinite(r1)]
    row = {
        "value": float(kind_value),
        "seed": int(seed),
        "E_o": sol.energy.E_o,
        "E_s": float(np.sum(sol.energy.E_s)),
        "E_t": float(np.sum(sol.energy.E_t)),
        "mean_rho": float(np.mean(sol.cfg.rho)),
        "iterations": int(sol.iterations),
        "converged": bool(sol.converged),
        "rank1": float(sol.rank1_quality),
        "min_rank1_converged": float(np.min(conv)) if conv else float("nan"),
        "feasible": bool(sol.feasible),
        "note": sol.note,
    }
    for k in range(scen.K):
        row[f"rho_{k + 1}"] = float(sol.cfg.rho[k])
        row[f"p_{k + 1}"] = float(sol.cfg.p[k])
    return row


def _error_row(kind_value, seed, scen, message):
    row = {
        "value": float(kind_value),
        "seed": int(seed),
        "E_o": float("nan"),
        "E_s": float("nan"),
        "E_t": float("nan"),
        "mean_rho": float("nan"),
        "iterations": 0,
        "converged": False,
        "rank1": float("nan"),
        "min_rank1_converged": float("nan"),
        "feasible": False,
        "note": message,
    }
    for k in range(scen.K):
        row[f"rho_{k + 1}"] = float("nan")
        row[f"p_{k + 1}"] = float("nan")
    return row


def run_one(base, kind, value, seed, scheme, dump_dir=None):
    """One sweep point. Returns (row, history_rows, completed)."""
    scen = replace(apply_value(base, kind, value), seed=int(seed))
    ch = scenario.generate_channels(scen)
    try:
        if scheme == "jtac":
            sol = jtac.run_jtac(scen, ch, dump_dir=dump_dir)
        else:
            sol = jtac.run_baseline(scen, ch, scheme, dump_dir=dump_dir)
    except Exception as exc:  # record the failure, keep the sweep going
        return _error_row(value, seed, scen, f"run failed: {exc}"), [], False
    hist = [dict(seed=int(seed), **h) for h in sol.history_rows]
    return _result_row(value, seed, scen, sol), hist, True


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in fieldnames])


def run_sweep(spec: SweepSpec, base: scenario.NetworkScenario):
    """Execute a sweep and write its artifacts.

    Returns dict with keys 'files' (written paths) and 'all_completed'
    (False when any individual run raised; such runs appear in the CSV as
    converged=false rows with the error in the note column).
    """
    os.makedirs(spec.output_dir, exist_ok=True)
    if spec.dump_dir:
        os.makedirs(spec.dump_dir, exist_ok=True)

    tasks = [(scheme, value, seed)
             for scheme in spec.schemes
             for value in spec.values
             for seed in spec.seeds]
    first = tasks[0]

    def work(task):
        scheme, value, seed = task
        dump = spec.dump_dir if (spec.dump_dir and task == first) else None
        return task, run_one(base, spec.kind, value, seed, scheme, dump_dir=dump)

    results = {}
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            for task, out in pool.map(work, tasks):
                results[task] = out
    else:
        for task in tasks:
            results[task] = work(task)[1]

    fieldnames = list(REQUIRED_COLUMNS)
    for k in range(base.K):
        fieldnames.append(f"rho_{k + 1}")
    for k in range(base.K):
        fieldnames.append(f"p_{k + 1}")
    fieldnames += ["rank1", "min_rank1_converged", "feasible", "note"]

    files = []
    all_completed = True
    per_scheme_rows = {}
    for scheme in spec.schemes:
        rows, hist_rows = [], []
        for value in spec.values:
            for seed in spec.seeds:
                row, hist, completed = results[(scheme, value, seed)]
                rows.append(row)
                hist_rows.extend(hist)
                all_completed = all_completed and completed
        rows.sort(key=lambda r: (r["value"], r["seed"]))
        path = os.path.join(spec.output_dir, f"{spec.kind}_{scheme}.csv")
        _write_csv(path, fieldnames, rows)
        files.append(path)
        per_scheme_rows[scheme] = rows
        if spec.kind == "convergence":
            hist_rows.sort(key=lambda r: (r["seed"], r["iteration"]))
            hpath = os.path.join(spec.output_dir,
                                 f"convergence_{scheme}_history.csv")
            _write_csv(hpath, HISTORY_COLUMNS, hist_rows)
            files.append(hpath)

    if spec.plots:
        files.extend(_render_plots(spec, per_scheme_rows))

    return {"files": files, "all_completed": all_completed}


# ------------------------------------------------------------------ plotting

def _render_plots(spec, per_scheme_rows):
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "risnoma"
    import matplotlib.pyplot as plt

    out = []
    if spec.kind == "convergence":
        path = os.path.join(spec.output_dir, "convergence_energy.svg")
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        for scheme in spec.schemes:
            hfile = os.path.join(spec.output_dir,
                                 f"convergence_{scheme}_history.csv")
            hist = _load_csv(hfile, HISTORY_COLUMNS)
            by_seed = {}
            for r in hist:
                by_seed.setdefault(int(float(r["seed"])), []).append(float(r["E_o"]))
            if not by_seed:
                continue
            span = max(len(v) for v in by_seed.values())
            padded = np.array([v + [v[-1]] * (span - len(v))
                               for v in by_seed.values()])
            it = np.arange(span)
            ax.plot(it, padded.mean(axis=0), marker="o", ms=3, label=scheme)
            ax.fill_between(it, padded.min(axis=0), padded.max(axis=0), alpha=0.15)
        ax.set_xlabel("outer iteration")
        ax.set_ylabel("total energy $E_o$ (J)")
        ax.set_yscale("log")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
        out.append(path)
        return out

    axis_label = {"ris-location": "RIS x-coordinate (m)",
                  "ris-size": "reflecting elements L",
                  "data-size": "raw data size (Kbits)"}[spec.kind]
    for column, ylabel, stem in (("E_o", "total energy $E_o$ (J)", "energy"),
                                 ("mean_rho", r"mean extraction factor $\rho$", "rho")):
        path = os.path.join(spec.output_dir, f"{spec.kind}_{stem}.svg")
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        for scheme in spec.schemes:
            rows = per_scheme_rows[scheme]
            xs = sorted({r["value"] for r in rows})
            series = [[r[column] for r in rows if r["value"] == x] for x in xs]
            mean = [float(np.mean(v)) for v in series]
            lo = [float(np.min(v)) for v in series]
            hi = [float(np.max(v)) for v in series]
            ax.plot(xs, mean, marker="o", ms=3, label=scheme)
            ax.fill_between(xs, lo, hi, alpha=0.15)
        ax.set_xlabel(axis_label)
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
        out.append(path)
    return out


# ----------------------------------------------------------------- summarize

def _load_csv(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise SchemaError(f"{os.path.basename(path)}: missing columns {missing}")
        return list(reader)


def _seed_means(rows, column):
    """Seed-mean of a column keyed by sweep value, sorted by value."""
    acc = {}
    for r in rows:
        acc.setdefault(float(r["value"]), []).append(float(r[column]))
    return {v: float(np.mean(acc[v])) for v in sorted(acc)}


def _verdict_location(rows):
    e = _seed_means(rows, "E_o")
    xs = sorted(e)
    lo, hi = xs[0], xs[-1]
    mid = 4.0 if 4.0 in e else xs[len(xs) // 2]
    ok = (e[mid] >= e[lo] * (1 - TREND_SLACK)
          and e[mid] >= e[hi] * (1 - TREND_SLACK))
    detail = (f"mean E_o: x={lo:g} {e[lo]:.3f} J, x={mid:g} {e[mid]:.3f} J, "
              f"x={hi:g} {e[hi]:.3f} J")
    return ok, detail


def _verdict_monotone(rows, column, direction):
    """direction=-1: nonincreasing in the sweep value, +1: nondecreasing."""
    m = _seed_means(rows, column)
    vals = [m[v] for v in sorted(m)]
    for prev, nxt in zip(vals, vals[1:]):
        if direction < 0 and nxt > prev * (1 + TREND_SLACK):
            return False, _fmt_series(m)
        if direction > 0 and nxt < prev * (1 - TREND_SLACK):
            return False, _fmt_series(m)
    return True, _fmt_series(m)


def _fmt_series(means):
    return ", ".join(f"{v:g}: {means[v]:.4f}" for v in sorted(means))


def _verdict_histories(paths):
    bad = []
    for path in paths:
        scheme = os.path.basename(path)[len("convergence_"):-len("_history.csv")]
        rows = _load_csv(path, HISTORY_COLUMNS)
        by_seed = {}
        for r in rows:
            by_seed.setdefault(int(float(r["seed"])), []).append(
                (int(float(r["iteration"])), float(r["E_o"])))
        for seed, hist in sorted(by_seed.items()):
            hist.sort()
            for (i0, e0), (i1, e1) in zip(hist, hist[1:]):
                if e1 > e0 + HISTORY_RISE_TOL:
                    bad.append(f"{scheme} seed {seed} iteration {i1} "
                               f"({e0:.6f} -> {e1:.6f} J)")
    return (not bad), bad


def summarize(in_dir):
    """Trend report over a results directory. Returns the report text."""
    if not os.path.isdir(in_dir):
        raise SchemaError(f"not a directory: {in_dir}")
    lines = [f"trend report for {in_dir}", ""]

    def jtac_rows(kind):
        path = os.path.join(in_dir, f"{kind}_jtac.csv")
        if not os.path.exists(path):
            return None
        return _load_csv(path, REQUIRED_COLUMNS)

    rows = jtac_rows("ris-location")
    if rows is None:
        lines.append("(i)   location U-shape: SKIP (no ris-location_jtac.csv)")
    else:
        ok, detail = _verdict_location(rows)
        lines.append(f"(i)   location U-shape: {'PASS' if ok else 'FAIL'} ({detail})")

    rows = jtac_rows("ris-size")
    if rows is None:
        lines.append("(ii)  size trend: SKIP (no ris-size_jtac.csv)")
    else:
        ok_e, de = _verdict_monotone(rows, "E_o", direction=-1)
        ok_r, dr = _verdict_monotone(rows, "mean_rho", direction=+1)
        ok = ok_e and ok_r
        lines.append(f"(ii)  size trend: {'PASS' if ok else 'FAIL'} "
                     f"(E_o nonincreasing: {ok_e} [{de}]; "
                     f"mean rho nondecreasing: {ok_r} [{dr}])")

    rows = jtac_rows("data-size")
    if rows is None:
        lines.append("(iii) data trend: SKIP (no data-size_jtac.csv)")
    else:
        ok_e, de = _verdict_monotone(rows, "E_o", direction=+1)
        ok_r, dr = _verdict_monotone(rows, "mean_rho", direction=-1)
        ok = ok_e and ok_r
        lines.append(f"(iii) data trend: {'PASS' if ok else 'FAIL'} "
                     f"(E_o nondecreasing: {ok_e} [{de}]; "
                     f"mean rho nonincreasing: {ok_r} [{dr}])")

    hists = sorted(
        os.path.join(in_dir, f) for f in os.listdir(in_dir)
        if f.startswith("convergence_") and f.endswith("_history.csv"))
    if not hists:
        lines.append("(iv)  convergence: SKIP (no convergence histories)")
    else:
        ok, bad = _verdict_histories(hists)
        if ok:
            lines.append(f"(iv)  convergence: PASS "
                         f"(all histories nonincreasing, {len(hists)} files)")
        else:
            lines.append("(iv)  convergence: FAIL")
            lines.extend(f"        {b}" for b in bad)

    report = "\n".join(lines) + "\n"
    with open(os.path.join(in_dir, "summary.txt"), "w") as fh:
        fh.write(report)
    return report


# ----------------------------------------------------------------------- CLI

def parse_seeds(text):
    """'0..9' (inclusive), '4', or '0,2,5'."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return tuple(range(lo, hi + 1))
    if "," in text:
        return tuple(int(p) for p in text.split(",") if p.strip())
    return (int(text),)


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="risnoma-exp",
        description="Sweep runner and trend summarizer for the uplink optimizer.")
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="execute one sweep")
    runp.add_argument("--scenario", required=True, help="scenario config file")
    runp.add_argument("--sweep", required=True, choices=SWEEP_KINDS)
    runp.add_argument("--seeds", required=True,
                      help="seed range 'a..b' (inclusive) or comma list")
    runp.add_argument("--schemes", nargs="+", choices=jtac.SCHEMES,
                      default=list(jtac.SCHEMES))
    runp.add_argument("--out", required=True, help="output directory")
    runp.add_argument("--values", default=None,
                      help="override the sweep grid (comma-separated; "
                           "not valid for the convergence sweep)")
    runp.add_argument("--plots", action="store_true",
                      help="render SVG plots next to the CSVs")
    runp.add_argument("--dump-conic", default=None, metavar="DIR",
                      help="dump the first run's conic subproblems to DIR")
    runp.add_argument("--workers", type=int, default=1)

    sump = sub.add_parser("summarize", help="trend verdicts over a results dir")
    sump.add_argument("--in", dest="in_dir", required=True)
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "summarize":
        try:
            report = summarize(args.in_dir)
        except SchemaError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(report, end="")
        return 0

    try:
        base = scenario.load_scenario(args.scenario)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.values is not None:
        if args.sweep == "convergence":
            print("error: --values has no effect for the convergence sweep",
                  file=sys.stderr)
            return 2
        values = tuple(float(v) for v in args.values.split(",") if v.strip())
    else:
        values = default_grid(args.sweep, base)
    try:
        spec = SweepSpec(kind=args.sweep, values=values,
                         seeds=parse_seeds(args.seeds),
                         schemes=tuple(args.schemes), output_dir=args.out,
                         plots=args.plots, dump_dir=args.dump_conic,
                         workers=args.workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run_sweep(spec, base)
    for path in result["files"]:
        print(path)
    if not result["all_completed"]:
        print("warning: some runs failed; see the note column", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
