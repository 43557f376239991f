"""Command-line interface: ``radaupinn {tableau,solve,train,study}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .config import parse_config
from .dae import make_problem
from .errors import ConfigError, DomainError, NumericalError, TrainingAborted
from .experiments import (
    error_report,
    reference_trajectory,
    run_order_study,
    variable_names,
)
from .network import save_checkpoint
from .pinn import march
from .solver import integrate
from .tableau import radau_tableau, verify_order_conditions

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TRAINING = 4


def _fmt(x):
    return repr(float(x))


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


class Output:
    """Writes artifacts under one directory, or to stdout when none is set."""

    def __init__(self, directory):
        self.directory = directory
        if directory is not None:
            os.makedirs(directory, exist_ok=True)

    def path(self, name):
        full = os.path.normpath(os.path.join(self.directory, name))
        root = os.path.normpath(self.directory)
        if os.path.commonpath([full, root]) != root:
            raise ConfigError(f"refusing to write outside output directory: {name}")
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def write(self, name, text, stdout=False):
        if self.directory is None:
            if stdout:
                sys.stdout.write(text)
            return
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def write_json(self, name, obj):
        if self.directory is not None:
            self.write(name, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _manifest(cfg, wall_time, extra=None):
    blob = {
        "config": cfg.to_json(),
        "seeds": {"seed": cfg["seed"], "study.seeds": list(cfg["study.seeds"])},
        "versions": {
            "radaupinn": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_s": wall_time,
    }
    blob.update(extra or {})
    return blob


# -- subcommands -------------------------------------------------------------

def run_tableau(cfg, out: Output):
    tab = radau_tableau(cfg["stages"])
    res = verify_order_conditions(tab)
    if cfg["format"] == "json":
        text = json.dumps({
            "v": tab.v, "order": tab.order, "c": tab.c.tolist(), "A": tab.A.tolist(),
            "b": tab.b.tolist(),
            "residuals": {"B": res.B, "C": res.C, "D": res.D},
        }, indent=2) + "\n"
        name = "tableau.json"
    else:
        header = ["c"] + [f"a_{j + 1}" for j in range(tab.v)] + ["b"]
        rows = [[tab.c[i], *tab.A[i], tab.b[i]] for i in range(tab.v)]
        text = _csv_text(header, rows)
        text += f"# order={tab.order} B={res.B!r} C={res.C!r} D={res.D!r}\n"
        name = "tableau.csv"
    sys.stdout.write(text)
    out.write(name, text)
    return {}


def run_solve(cfg, out: Output):
    p = make_problem(cfg["problem"], **_params(cfg))
    tab = radau_tableau(cfg["stages"])
    traj = integrate(p, tab, cfg["t0"], cfg["tend"], cfg["h"], cfg.newton())
    header = ["t"] + variable_names(p) + ["g_residual"]
    rows = []
    for t, y, z in zip(traj.grid, traj.y, traj.z):
        g = np.asarray(p.g(t, y), dtype=float)
        rows.append([t, *y, *z, float(np.max(np.abs(g))) if g.size else 0.0])
    out.write("trajectory.csv", _csv_text(header, rows), stdout=True)
    return {"steps": len(traj.steps),
            "newton_iters": [s.newton_iters for s in traj.steps]}


def _params(cfg):
    if cfg["problem"] == "pendulum":
        return cfg.problem_params
    return {}


def _segment_checkpoint(out: Output, k, model):
    # stacked parameters of all n + 2 networks; SegmentModel.network(j) unpacks one
    save_checkpoint(out.path(f"checkpoints/segment_{k:03d}.json"), model.params,
                    model.hidden_layout)


def _trajectory_rows(p, traj, ref):
    rows = []
    for i, t in enumerate(traj.grid):
        pred = np.concatenate([traj.y[i], traj.z[i]])
        exact = np.concatenate([ref.y[i], ref.z[i]])
        rows.append([t, *pred, *np.abs(exact - pred)])
    return rows


def run_train(cfg, out: Output):
    p = make_problem(cfg["problem"], **_params(cfg))
    tab = radau_tableau(cfg["stages"])
    tcfg = cfg.train_config()
    h = cfg["h"]
    try:
        traj = march(p, tab, cfg["t0"], cfg["tend"], h, tcfg)
        aborted = None
    except TrainingAborted as exc:
        traj, aborted = getattr(exc, "trajectory", None), exc
        if traj is None:
            raise
    names = variable_names(p)
    ref = reference_trajectory(p, traj.grid, tab) if traj.predictions else None
    if ref is not None:
        header = ["t"] + [f"{v}_pred" for v in names] + [f"ae_{v}" for v in names]
        out.write("trajectory.csv", _csv_text(header, _trajectory_rows(p, traj, ref)), stdout=True)
        rep = error_report(p, tab, h, traj, ref)
        mae_rows = [[t, *row] for t, row in zip(rep.segment_mid, rep.mae)]
        out.write("segment_mae.csv", _csv_text(["segment_t"] + [f"mae_{v}" for v in names],
                                               mae_rows))
    hist_rows = [[rec.index, *row] for rec in traj.segments for row in rec.history]
    out.write("history.csv", _csv_text(
        ["segment", "iteration", "L_f", "L_g", "L_s", "total", "best_total"], hist_rows))
    if out.directory is not None:
        for rec in traj.segments:
            _segment_checkpoint(out, rec.index, rec.model)
    extra = {
        "segments": [
            {"index": r.index, "t_n": r.t_n, "seed": r.seed, "best_loss": r.best_loss,
             "final_loss": r.final_loss, "best_iteration": r.best_iteration,
             "iterations_run": r.iterations_run, "wall_time_s": r.wall_time}
            for r in traj.segments
        ],
        "stage_points": traj.n_stage_points,
    }
    if aborted is not None:
        extra["aborted"] = str(aborted)
        out.write_json("manifest.json", _manifest(cfg, None, extra))
        raise aborted
    return extra


def run_study(cfg, out: Output):
    p = make_problem(cfg["problem"], **_params(cfg))
    tcfg = cfg.train_config()
    report = run_order_study(p, cfg["study.orders"], tcfg, cfg["t0"], cfg["tend"], cfg["h"],
                             seeds=cfg["study.seeds"])
    header = ["problem", "v", "order", "variable", "segment_t", "MAE", "seed"]
    rows = [[r[k] for k in header] for r in report.rows]
    out.write("study.csv", _csv_text(header, rows), stdout=True)
    for (v, seed), rep in report.reports.items():
        out.write_json(f"runs/v{v}_seed{seed}/manifest.json", {
            "config": {**cfg.to_json(), "stages": v, "seed": seed},
            "aggregate_mae": float(rep.mae.mean()),
            "metadata": rep.metadata,
        })
    for (v, seed), rep in report.ae_tables.items():
        ae_rows = []
        for k, t_end in enumerate(rep.end_times):
            for i in range(rep.ae_stage.shape[1]):
                ae_rows.append([rep.stage_times[k, i], "stage", *rep.ae_stage[k, i]])
            ae_rows.append([t_end, "end", *rep.ae_end[k]])
        out.write(f"ae_v{v}_seed{seed}.csv",
                  _csv_text(["t", "kind"] + [f"ae_{n}" for n in rep.variables], ae_rows))
    summary = {
        "problem": p.name,
        "aggregate_mae": {str(2 * v - 1): mae for v, mae in report.aggregate.items()},
        "ranking": [{"v": v, "order": o, "aggregate_mae": m} for v, o, m in report.ranking],
        "aggregation": "median over seeds of mean per-segment MAE",
        "expected_outcome": "at full scale the 5th-order (v=3) model is expected to rank first",
    }
    out.write_json("summary.json", summary)
    return {"ranking": summary["ranking"]}


COMMANDS = {
    "tableau": run_tableau,
    "solve": run_solve,
    "train": run_train,
    "study": run_study,
}


def dispatch(cfg) -> int:
    out = Output(cfg["out"])
    start = time.perf_counter()
    try:
        extra = COMMANDS[cfg.mode](cfg, out)
    except TrainingAborted as exc:
        logger.error("training aborted: %s", exc)
        return EXIT_TRAINING
    except (ConfigError, DomainError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    out.write_json("manifest.json", _manifest(cfg, time.perf_counter() - start, extra))
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _common(sub):
    sub.add_argument("--config", help="flat key=value config file or a run manifest")
    sub.add_argument("--problem", help="hessenberg or pendulum")
    sub.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                     help="problem parameter, e.g. m=1 or lambda=1")
    sub.add_argument("--stages", help="Radau stage count v")
    sub.add_argument("--h", help="step size")
    sub.add_argument("--t0", help="start time")
    sub.add_argument("--tend", help="end time")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", help="random seed")
    sub.add_argument("--format", help="csv or json")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any config key, e.g. net.width=50")


def build_parser():
    parser = argparse.ArgumentParser(prog="radaupinn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="mode", required=True)
    for mode in COMMANDS:
        sub = subs.add_parser(mode)
        _common(sub)
        if mode == "study":
            sub.add_argument("--orders", help="comma-separated stage counts, e.g. 2,3,5,7")
            sub.add_argument("--seeds", help="comma-separated seeds")
        if mode in ("train", "study"):
            sub.add_argument("--iterations", help="Adam iterations per segment")
    return parser


def _split_pair(text, flag):
    if "=" not in text:
        raise ConfigError(f"{flag} expects NAME=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def overrides_from_args(args) -> dict:
    ov = {"mode": args.mode}
    simple = {"problem": "problem", "stages": "stages", "h": "h", "t0": "t0", "tend": "tend",
              "out": "out", "seed": "seed", "format": "format", "orders": "study.orders",
              "seeds": "study.seeds", "iterations": "train.iterations"}
    for attr, key in simple.items():
        value = getattr(args, attr, None)
        if value is not None:
            ov[key] = value
    for item in args.param:
        name, value = _split_pair(item, "--param")
        ov[f"problem.{name}"] = value
    for item in args.set:
        key, value = _split_pair(item, "--set")
        ov[key] = value
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, overrides_from_args(args))
    except (ConfigError, OSError) as exc:
        print(f"radaupinn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
