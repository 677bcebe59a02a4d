"""Command-line entry point: ``mrdesign <command> --config PATH --seed N --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 oracle failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, build_config, load_config
from .core import (
    MRDError,
    TypeMatrix,
    assignment_from_labels,
    classify_cells,
    consistency_report,
    infer_conjunctive_axes,
    read_matrix_csv,
    stream_rng,
    write_matrix_csv,
)
from .designs import draw
from .estimators import ESTIMATE_COLUMNS, estimates_row, spillover_estimates, type_means
from .harness import (
    RunContext,
    make_bank,
    run_oracle_suite,
    run_replication,
    run_scaling_study,
    write_csv,
    write_json,
    write_oracle_report,
)
from .outcomes import realize
from .variance import InsufficientReplicationError, estimate_variances

log = logging.getLogger("mrdesign")

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE = 0, 2, 3


def _draw(cfg: ExperimentConfig):
    if cfg.design is None:
        raise ConfigError("config.design: required for this command")
    return draw(cfg.design, stream_rng(cfg.seed, "sample"))


def _write_matrix(path: Path, cells: np.ndarray, ctx: RunContext) -> None:
    write_matrix_csv(path, cells)
    cols = ["buyer"] + [str(j + 1) for j in range(cells.shape[1])]
    write_json(path.with_name(path.name + ".meta.json"), ctx.meta(cols))


def _consistency_doc(W) -> dict:
    rep = consistency_report(W)
    return {
        "buyer_fractions": [str(f) for f in rep.buyer_fractions],
        "seller_fractions": [str(f) for f in rep.seller_fractions],
        "grand_fraction": str(rep.grand_fraction),
        "V_B": sorted(str(f) for f in rep.V_B),
        "V_S": sorted(str(f) for f in rep.V_S),
    }


def cmd_sample(cfg: ExperimentConfig, out: Path, args) -> int:
    d = _draw(cfg)
    ctx = RunContext("sample", cfg.seed, cfg.digest)
    _write_matrix(out / "assignment.csv", d.W.to_labels(), ctx)
    if d.types is not None:
        _write_matrix(out / "types.csv", d.types.to_names(), ctx)
    for name, grid in d.labels.items():
        _write_matrix(out / f"labels_{name}.csv", np.asarray(grid), ctx)
    if d.axis is not None:
        rows = [("buyer", i + 1, int(v)) for i, v in enumerate(d.axis.buyer)]
        rows += [("seller", j + 1, int(v)) for j, v in enumerate(d.axis.seller)]
        write_csv(out / "axes.csv", ("axis", "index", "label"), rows, ctx)
    return EXIT_OK


def cmd_classify(cfg: ExperimentConfig, out: Path, args) -> int:
    ctx = RunContext("classify", cfg.seed, cfg.digest)
    if "assignment_path" in cfg.raw:
        W = assignment_from_labels(read_matrix_csv(cfg.resolve(cfg.raw["assignment_path"])))
        axis = infer_conjunctive_axes(W)
        types = classify_cells(axis) if axis is not None else None
    else:
        d = _draw(cfg)
        W, types = d.W, d.types
    doc = {**ctx.meta([]), "consistency": _consistency_doc(W)}
    if types is not None:
        _write_matrix(out / "types.csv", types.to_names(), ctx)
        doc["type_counts"] = {w.value: n for w, n in types.counts.items()}
    else:
        doc["type_counts"] = None
        log.warning("assignment is not a conjunctive SMRD matrix; no types written")
    write_json(out / "classification.json", doc)
    return EXIT_OK


def cmd_estimate(cfg: ExperimentConfig, out: Path, args) -> int:
    ctx = RunContext("estimate", cfg.seed, cfg.digest)
    if "observed_path" in cfg.raw:
        if "types_path" not in cfg.raw:
            raise ConfigError("config.types_path: required with observed_path")
        Y = read_matrix_csv(cfg.resolve(cfg.raw["observed_path"])).astype(float)
        types = TypeMatrix.from_names(read_matrix_csv(cfg.resolve(cfg.raw["types_path"])))
        dims = cfg.design.dims if cfg.design is not None else None
    else:
        d = _draw(cfg)
        if d.types is None:
            raise ConfigError(f"config.design.kind: {cfg.design.kind} yields no exposure types")
        bank = make_bank(cfg, cfg.design.dims, stream_rng(cfg.seed, "bank", 0))
        types, Y, dims = d.types, realize(bank, d.types), cfg.design.dims
    means = type_means(Y, types)
    est = spillover_estimates(means)
    row = estimates_row(means, est)
    write_csv(out / "estimates.csv", ESTIMATE_COLUMNS, [row], ctx)
    doc = {**ctx.meta(ESTIMATE_COLUMNS), "estimates": dict(zip(ESTIMATE_COLUMNS, row))}
    if est.theta_note:
        doc["theta_note"] = est.theta_note
    if dims is not None:
        try:
            v = estimate_variances(Y, types, dims, cfg.cross_weight)
            doc["sigma_hat"] = {w.value: s.value for w, s in v.sigma.items()}
            doc["bounds"] = {e: {"lo": b.lo, "hi": b.hi, "clamped": b.clamped} for e, b in v.bounds.items()}
        except InsufficientReplicationError as exc:
            doc["variance_note"] = str(exc)
    write_json(out / "estimates.json", doc)
    return EXIT_OK


def cmd_replicate(cfg: ExperimentConfig, out: Path, args) -> int:
    rep = run_replication(cfg, out, args.threads, False if args.no_figures else None)
    for group, res in rep.checks.items():
        bad = [k for k, ok in res.items() if not ok]
        if bad:
            log.warning("%s: not satisfied for %s", group, ", ".join(bad))
    return EXIT_OK


def cmd_scale(cfg: ExperimentConfig, out: Path, args) -> int:
    rep = run_scaling_study(cfg, out, args.threads, False if args.no_figures else None)
    for w, ok in rep.decreasing.items():
        if not ok:
            log.warning("mean sigma_%s is not strictly decreasing across the ladder", w)
    return EXIT_OK


def cmd_oracle(cfg: ExperimentConfig, out: Path, args) -> int:
    o = dict(cfg.oracle)
    if args.budget is not None:
        o["budget"] = args.budget
    if args.fault_injection:
        o["fault_injection"] = True
    rep = run_oracle_suite(o["budget"], cfg.seed, o["banks"], o["fault_injection"], args.threads)
    write_oracle_report(rep, out, RunContext("oracle", cfg.seed, cfg.digest))
    for w in rep.warnings:
        log.warning(w)
    for c in rep.checks:
        verdict = "PASS" if c.passed else ("WARN" if c.diagnostic else "FAIL")
        dev = "nan" if math.isnan(c.max_deviation) else f"{c.max_deviation:.3e}"
        print(f"{verdict} {c.check} [{c.instance}] max_deviation={dev} tol={c.tolerance:.0e}")
    return EXIT_OK if rep.passed else EXIT_ORACLE


COMMANDS = {
    "sample": (cmd_sample, "draw one assignment from a design"),
    "classify": (cmd_classify, "exposure types and consistency sets of an assignment"),
    "estimate": (cmd_estimate, "spillover estimates, Sigma-hat and bounds for one draw"),
    "replicate": (cmd_replicate, "Monte-Carlo replication against closed-form moments"),
    "scale": (cmd_scale, "Sigma-hat and bound widths across a size ladder"),
    "oracle": (cmd_oracle, "exhaustive-enumeration checks of the closed forms"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrdesign", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, required=name != "oracle", help="JSON config file")
        s.add_argument("--seed", type=int, help="master seed (overrides the config)")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker threads")
        if name in ("replicate", "scale"):
            s.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        if name == "oracle":
            s.add_argument("--budget", type=int, help="largest support size to enumerate")
            s.add_argument("--fault-injection", action="store_true",
                           help="corrupt the closed forms; the suite must fail")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.config is None:
            cfg = build_config({}, args.seed, require_seed=False)
        else:
            cfg = load_config(args.config, args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command][0](cfg, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MRDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
