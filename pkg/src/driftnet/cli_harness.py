"""Command line entry point and config-driven experiment runner.

``driftnet sweep --config exp.yaml`` simulates, fits and scores every
(cell, seed) pair, then writes a CSV table and a summary with the fitted
log-log slope. Re-running a config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, parse_config
from .drift_models import ClassParams, build_composition, confine_drift
from .errors import ConfigError
from .relu_net import Architecture, dumps
from .risk_eval import (
    CSV_COLUMNS,
    CSV_VERSION,
    _TRAIN_STREAM,
    Cell,
    DriftFamily,
    fit_loglog,
    network_estimator,
    run_cell,
    summarize,
)
from .sde_sim import _initial_state, derive_seed, make_regression_set, ou_model, simulate_path, write_path
from .theory_calc import RateParams, select_architecture, theory_report
from .trainer import TrainConfig, estimate_opt_gap, fit_least_squares

log = logging.getLogger("driftnet")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2
CSV_TAG = f"# driftnet-sweep-csv v{CSV_VERSION}"
PLOT_TAG = "# driftnet-plot-data v1"


class EmptyInputError(ValueError):
    """A CSV handed to :func:`emit_plot_data` holds no data rows."""


# --------------------------------------------------------------------------
# building blocks from a config


def class_params(cfg: ExperimentConfig) -> ClassParams:
    c = cfg["class"]
    return ClassParams(c["q"], tuple(c["dims"]), tuple(c["active"]), tuple(c["smooth"]), c["holder_k"])


def _start_point(x0, dim):
    arr = np.asarray(x0, dtype=np.float64)
    return np.full(dim, float(arr)) if arr.ndim == 0 else arr.reshape(dim)


def build_family(cfg: ExperimentConfig) -> tuple[DriftFamily, ClassParams]:
    cls = class_params(cfg)
    p = cfg["model"]["params"]
    K = cls.holder_k
    F = cfg["architecture"]["F"] if cfg["architecture"]["F"] is not None else max(K, 1.0)
    if cfg["model"]["recipe"] == "ou":
        dim, coord, theta = int(p["dim"]), int(p["coord"]), float(p["theta"])
        model = ou_model(theta, float(p["sigma"]), dim)

        def target(x, _c=coord - 1, _t=theta):
            x = np.atleast_2d(np.asarray(x, dtype=np.float64))
            inside = np.all((x >= 0.0) & (x <= 1.0), axis=1)
            return np.where(inside, -_t * x[:, _c], 0.0)

        x0 = _start_point(p["x0"], dim)
        return DriftFamily(model, target, coord, x0, F, K), cls
    f = build_composition(cls, p["composition"], seed=int(p["composition_seed"]), options=p["options"])
    confined = confine_drift(f, int(p["coord"]), float(p["radial_rate"]), dim=cls.d)
    fam = DriftFamily.from_confined(confined, float(p["sigma"]), _start_point(p["x0"], cls.d), K)
    return DriftFamily(fam.model, fam.target, fam.coord, fam.x0, F, K), cls


def train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(**cfg["train"])


def cells(cfg: ExperimentConfig) -> list[Cell]:
    return [Cell(c["n"], c["delta"], c["substeps"]) for c in cfg["grid"]]


def estimator_for(cfg: ExperimentConfig, cls: ClassParams):
    arch_cfg = cfg["architecture"]
    constants = arch_cfg["constants"]
    if arch_cfg["source"] == "explicit":
        arch = Architecture.uniform(cls.d, arch_cfg["depth"], arch_cfg["width"])
        return network_estimator(cls, train_config(cfg), constants, arch=arch, s=arch_cfg["s"])
    return network_estimator(cls, train_config(cfg), constants)


# --------------------------------------------------------------------------
# experiment runner


def _failed_row(cell: Cell, seed: int, exc: BaseException) -> dict:
    row = {k: "" for k in CSV_COLUMNS}
    row.update(n=cell.n, delta=cell.delta, n_delta=cell.horizon, seed=seed)
    msg = " ".join(str(exc).split())
    row["status"] = f"failed: {type(exc).__name__}: {msg}"
    return row


def _one(tree: dict, index: int, seed: int) -> dict:
    cfg = ExperimentConfig(tree)
    cell = cells(cfg)[index]
    try:
        family, cls = build_family(cfg)
        est = estimator_for(cfg, cls)
        return run_cell(family, cls, cell, seed, est, cfg["copies"], cfg["architecture"]["constants"])
    except Exception as exc:  # isolate the cell; the run carries on
        log.warning("cell n=%s delta=%s seed=%s failed: %s", cell.n, cell.delta, seed, exc)
        return _failed_row(cell, seed, exc)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, np.floating):
        return repr(float(value))
    return str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_TAG + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    rows: list
    csv_path: Path
    summary_path: Path
    slope: float
    exponent: float
    failed: int


def _summary_text(cfg: ExperimentConfig, result) -> str:
    lines = [
        f"name: {cfg['name']}",
        f"cells: {len(cfg['grid'])}",
        f"seeds: {len(cfg['seeds'])}",
        f"rows: {len(result.rows)}",
        f"failed_rows: {result.failed}",
        f"excluded_zero_risk_cells: {result.excluded}",
        f"slope: {_fmt(float(result.slope))}",
        f"intercept: {_fmt(float(result.intercept))}",
        f"slope_defined: {str(result.slope_defined).lower()}",
        f"theory_exponent: {_fmt(float(result.exponent))}",
        "cell_means:",
    ]
    for horizon, mean in result.cell_means:
        lines.append(f"  - n_delta: {_fmt(float(horizon))}, gen_risk: {_fmt(float(mean))}")
    return "\n".join(lines) + "\n"


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Optional[Path] = None,
    seed_offset: int = 0,
    jobs: int = 1,
) -> ExperimentResult:
    """Run every cell x seed of ``cfg`` and write ``<name>.csv`` plus ``<name>_summary.txt``.

    Rows are written in grid order, then seed order, whatever ``jobs`` is.
    """
    out = Path(out_dir if out_dir is not None else cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    cls = class_params(cfg)
    tasks = [(i, s + seed_offset) for i in range(len(cfg["grid"])) for s in cfg["seeds"]]
    tree = cfg.to_dict()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one, [tree] * len(tasks), *zip(*tasks)))
    else:
        rows = [_one(tree, i, s) for i, s in tasks]

    result = summarize(rows, cls)
    csv_path = out / f"{cfg['name']}.csv"
    summary_path = out / f"{cfg['name']}_summary.txt"
    csv_path.write_text(rows_to_csv(rows), encoding="utf-8")
    summary_path.write_text(_summary_text(cfg, result), encoding="utf-8")
    return ExperimentResult(rows, csv_path, summary_path, result.slope, result.exponent, result.failed)


# --------------------------------------------------------------------------
# plot data


def read_csv_rows(path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if len(lines) < 2:
        raise EmptyInputError(f"{path}: no data rows")
    return list(csv.DictReader(lines))


def emit_plot_data(csv_path, out_path=None) -> dict:
    """Write (ln nΔ, ln risk) points for every ok row with positive risk, plus
    the least-squares line through them. Zero-risk rows are dropped and
    counted in a comment line.

    Raises:
        EmptyInputError: the CSV has no data rows.
    """
    rows = [r for r in read_csv_rows(csv_path) if r["status"] == "ok"]
    if not rows:
        raise EmptyInputError(f"{csv_path}: no successful rows")
    horizons = [float(r["n_delta"]) for r in rows]
    risks = [float(r["gen_risk"]) for r in rows]
    fit = fit_loglog(horizons, risks)
    pts = [(math.log(h), math.log(r)) for h, r in zip(horizons, risks) if r > 0]
    lines = [
        PLOT_TAG,
        f"# excluded_zero_risk_rows: {fit['excluded']}",
        "# line: ln_risk = intercept + slope * ln_n_delta",
        f"# intercept: {_fmt(fit['intercept'])}",
        f"# slope: {_fmt(fit['slope'])}",
        "ln_n_delta,ln_risk",
    ]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in pts]
    out_path = Path(out_path) if out_path is not None else Path(csv_path).with_suffix(".plot.txt")
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"points": pts, "intercept": fit["intercept"], "slope": fit["slope"], "excluded": fit["excluded"], "path": out_path}


def read_plot_data(path) -> dict:
    meta, pts = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# ") and ": " in line:
            key, val = line[2:].split(": ", 1)
            meta[key] = val
        elif line and not line.startswith("#") and not line.startswith("ln_"):
            a, b = line.split(",")
            pts.append((float(a), float(b)))
    return {
        "points": pts,
        "intercept": float(meta["intercept"]),
        "slope": float(meta["slope"]),
        "excluded": int(meta["excluded_zero_risk_rows"]),
    }


# --------------------------------------------------------------------------
# subcommands


def _cmd_simulate(cfg, out, args) -> int:
    family, _ = build_family(cfg)
    for i, cell in enumerate(cells(cfg)):
        for s in cfg["seeds"]:
            seed = s + args.seed_offset
            x0 = _initial_state(family.x0, family.model.dim, derive_seed(seed, _TRAIN_STREAM))
            path = simulate_path(family.model, x0, cell.n, cell.delta, cell.substeps, seed)
            target = out / f"path_cell{i}_seed{seed}.bin"
            with open(target, "wb") as fh:
                write_path(path, fh)
            print(f"wrote {target}")
    return EXIT_OK


def _cmd_fit(cfg, out, args) -> int:
    family, cls = build_family(cfg)
    tcfg = train_config(cfg)
    arch_cfg = cfg["architecture"]
    rows = []
    for i, cell in enumerate(cells(cfg)):
        if arch_cfg["source"] == "explicit":
            arch, s_budget = Architecture.uniform(cls.d, arch_cfg["depth"], arch_cfg["width"]), arch_cfg["s"]
        else:
            rate = RateParams(cls, cell.n, cell.delta, arch_cfg["constants"])
            arch, s_budget = select_architecture(rate, family.sup_bound, family.holder_k)
        for s in cfg["seeds"]:
            seed = s + args.seed_offset
            x0 = _initial_state(family.x0, family.model.dim, derive_seed(seed, _TRAIN_STREAM))
            path = simulate_path(family.model, x0, cell.n, cell.delta, cell.substeps, seed)
            data = make_regression_set(path, family.coord)
            run_cfg = TrainConfig(**{**tcfg.__dict__, "seed": derive_seed(seed, _TRAIN_STREAM)})
            fit = fit_least_squares(data, arch, s_budget, family.sup_bound, run_cfg)
            (out / f"network_cell{i}_seed{seed}.json").write_text(dumps(fit.best_params), encoding="utf-8")
            psi = estimate_opt_gap(fit) if run_cfg.extend else math.nan
            rows.append([cell.n, cell.delta, seed, arch.depth, arch.widths[1], s_budget, fit.best_loss, fit.zero_loss, fit.best_restart, psi])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "delta", "seed", "L", "width", "s", "best_loss", "zero_loss", "best_restart", "psi_hat"])
    writer.writerows([[_fmt(v) for v in r] for r in rows])
    (out / f"{cfg['name']}_fits.csv").write_text(buf.getvalue(), encoding="utf-8")
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _cmd_theory(cfg, out, args) -> int:
    family, cls = build_family(cfg)
    blocks = []
    for cell in cells(cfg):
        rate = RateParams(cls, cell.n, cell.delta, cfg["architecture"]["constants"])
        report = theory_report(rate, family.sup_bound, family.holder_k)
        blocks.append("\n".join(f"{k}: {_fmt(v)}" for k, v in report.items()))
    text = "\n\n".join(blocks) + "\n"
    (out / f"{cfg['name']}_theory.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_sweep(cfg, out, args) -> int:
    res = run_experiment(cfg, out, args.seed_offset, args.jobs)
    print(f"wrote {res.csv_path} and {res.summary_path}")
    print(f"slope {res.slope:.4f} vs theory exponent {res.exponent:.4f}; failed rows {res.failed}")
    return EXIT_PARTIAL if res.failed else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="driftnet", description="Deep ReLU drift estimation experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (
        ("simulate", "simulate observed paths for every cell and seed"),
        ("fit", "fit networks for every cell and seed"),
        ("theory", "print closed-form rate quantities and the selected architecture"),
        ("sweep", "run the full experiment and write CSV plus summary"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out-dir", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep")
    p = sub.add_parser("plot-data", help="turn a sweep CSV into (ln nΔ, ln risk) series")
    p.add_argument("csv", help="CSV written by sweep")
    p.add_argument("--out", default=None, help="output file (default: <csv>.plot.txt)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "plot-data":
        try:
            res = emit_plot_data(args.csv, args.out)
        except (EmptyInputError, OSError) as exc:
            print(f"driftnet: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"wrote {res['path']} ({len(res['points'])} points, slope {res['slope']:.4f})")
        return EXIT_OK
    if args.jobs < 1:
        print("driftnet: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(Path(args.config))
    except (ConfigError, OSError) as exc:
        violations = getattr(exc, "violations", [str(exc)])
        for v in violations:
            print(f"driftnet: config error: {v}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out_dir if args.out_dir is not None else cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    handler = {"simulate": _cmd_simulate, "fit": _cmd_fit, "theory": _cmd_theory, "sweep": _cmd_sweep}[args.command]
    return handler(cfg, out, args)


if __name__ == "__main__":
    sys.exit(main())
