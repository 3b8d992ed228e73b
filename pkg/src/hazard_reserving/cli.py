"""Command line: simulate, fit, predict, evaluate, replicate, tune."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .chain_ladder import cl_fit_predict
from .claims import ClaimSet, Schema, load_claims, write_claims
from .config import RunConfig, load_config, to_plain
from .errors import ConfigError, ReservingError
from .pipeline import (
    chain_ladder_metrics,
    evaluate_reserve,
    fit_reserve,
    load_fit,
    run_scenario,
    save_fit,
    summarise,
)
from .simulate import simulate
from .triangles import build_cells, n_dev_columns
from .tuning import tune_random


def _dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _schema(args, cfg: RunConfig) -> Schema:
    if args.schema:
        return Schema.load(args.schema)
    if cfg.schema:
        return Schema(cfg.schema)
    sibling = Path(args.data).with_name("schema.json")
    if sibling.exists():
        return Schema.load(sibling)
    raise ConfigError("no schema: pass --schema, set 'schema' in the config, or put schema.json next to the data")


def _claims(args, cfg: RunConfig) -> ClaimSet:
    res = load_claims(args.data, _schema(args, cfg), cutoff=args.cutoff or cfg.simulation.days)
    if res.rejected:
        print(f"skipped {len(res.rejected)} rows reported after the cutoff", file=sys.stderr)
    return res.claims


def _truth(args, cfg: RunConfig, cutoff: int) -> ClaimSet:
    res = load_claims(args.truth, _schema(args, cfg))
    truth = res.claims
    truth.cutoff = cutoff
    return truth


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args, cfg: RunConfig) -> None:
    sim = cfg.simulation if args.scenario is None else replace(cfg.simulation, scenario=args.scenario)
    data = simulate(sim, args.seed if args.seed is not None else 1)
    out = _out(args)
    write_claims(data.observed, out / "claims.csv")
    write_claims(data.truth, out / "truth.csv")
    data.observed.schema.dump(out / "schema.json")


def _pipeline(args, cfg: RunConfig):
    pc = cfg.pipeline
    if getattr(args, "model", None):
        pc = replace(pc, model=args.model)
    if args.seed is not None:
        pc = replace(pc, split_seed=args.seed)
    return pc


def cmd_fit(args, cfg: RunConfig) -> None:
    claims = _claims(args, cfg)
    pc = _pipeline(args, cfg)
    out = _out(args)
    if pc.model == "cl":
        tri = _cl_triangle(claims, pc.eval_delta)
        res = cl_fit_predict(tri)
        _dump({"pipeline": to_plain(pc), "model": {"kind": "cl", "factors": res.factors.tolist()}}, out / "fit.json")
        return
    fitted = fit_reserve(claims, pc)
    save_fit(fitted, out / "fit.json")
    fitted.triangle.export_factors(out / "factors.csv")
    if args.fine_factors:
        fitted.table.export_csv(out / "factors_fine.csv")


def _cl_triangle(claims: ClaimSet, delta: int) -> np.ndarray:
    n_cols = n_dev_columns(delta, claims.cutoff)
    return build_cells(claims, delta, np.array(["all"] * len(claims)), ["all"], n_cols)[0]


def _is_cl(path) -> bool:
    with open(path) as fh:
        return json.load(fh)["model"]["kind"] == "cl"


def cmd_predict(args, cfg: RunConfig) -> None:
    claims = _claims(args, cfg)
    out = _out(args)
    if _is_cl(args.fit):
        with open(args.fit) as fh:
            delta = json.load(fh)["pipeline"]["eval_delta"]
        tri = _cl_triangle(claims, delta)
        res = cl_fit_predict(tri)
        _write_cl_triangle(out / "triangle.csv", tri, res.predicted)
        _dump({"total_predicted": float(res.predicted.sum())}, out / "prediction.json")
        return
    fitted = load_fit(args.fit, claims)
    fitted.triangle.to_long_csv(out / "triangle.csv")
    tri = fitted.triangle
    per_key = {k: float(tri.predicted[i].sum()) for i, k in enumerate(tri.keys)}
    _dump({"total_predicted": tri.total_predicted(), "by_features": per_key}, out / "prediction.json")


def _write_cl_triangle(path, observed, predicted) -> None:
    K, J = observed.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "j", "features", "observed", "predicted"])
        for k in range(K):
            for j in range(J):
                lower = k + j >= K
                w.writerow([k, j, "all", "" if lower else f"{observed[k, j]:.12g}",
                            f"{predicted[k, j]:.12g}" if lower else ""])


def cmd_evaluate(args, cfg: RunConfig) -> None:
    claims = _claims(args, cfg)
    truth = _truth(args, cfg, claims.cutoff)
    out = _out(args)
    if _is_cl(args.fit):
        with open(args.fit) as fh:
            delta = json.load(fh)["pipeline"]["eval_delta"]
        metrics = chain_ladder_metrics(claims, truth, delta)
        metrics["crps"] = None
    else:
        fitted = load_fit(args.fit, claims)
        metrics = evaluate_reserve(fitted, truth)
        metrics.update({f"loss_{k}": v for k, v in fitted.losses.items()})
    _dump(metrics, out / "metrics.json")


def _clean(row: dict) -> dict:
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in row.items()}


def cmd_replicate(args, cfg: RunConfig) -> None:
    rc = cfg.replicate
    seed0 = args.seed if args.seed is not None else rc.seed
    scenarios = [args.scenario] if args.scenario else list(rc.scenarios)
    out = _out(args)
    rows = []
    for sc in scenarios:
        sim = replace(cfg.simulation, scenario=sc)
        for r in range(rc.replications):
            rows.extend(run_scenario(sc, seed0 + r, rc.models, cfg.pipeline, sim))
            print(f"{sc} replication {r + 1}/{rc.replications} done", file=sys.stderr)
    with open(out / "replications.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(_clean(row), sort_keys=True) + "\n")
    summary = [_clean(s) for s in summarise(rows)]
    _dump(summary, out / "summary.json")
    write_summary_table(summary, out / "summary.csv")


def write_summary_table(summary: list[dict], path) -> None:
    """Mean (sd) per scenario and model, one column per metric."""
    metrics = ("R_tot", "R_cell", "R_cal", "crps")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "scenario", "n"] + list(metrics))
        for s in summary:
            cells = []
            for m in metrics:
                mean, sd = s[f"{m}_mean"], s[f"{m}_sd"]
                cells.append("--" if mean is None else f"{mean:.4f} ({sd:.4f})")
            w.writerow([s["model"], s["scenario"], s["n"]] + cells)


def cmd_tune(args, cfg: RunConfig) -> None:
    claims = _claims(args, cfg)
    tc = cfg.tune
    if args.model:
        tc = replace(tc, model=args.model)
    if args.seed is not None:
        tc = replace(tc, seed=args.seed)
    res = tune_random(claims, tc)
    out = _out(args)
    res.write_log(out / "trials.jsonl")
    _dump({"model": tc.model, "score": res.best_score, "params": res.best}, out / "best.json")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hazard-reserving", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="overrides the configured seed")
        sp.add_argument("--out", required=True, help="output directory")
        if data:
            sp.add_argument("--data", required=True, help="claims CSV")
            sp.add_argument("--schema", help="column roles (JSON); default: schema.json next to the data")
            sp.add_argument("--cutoff", type=int, help="valuation day; default: simulation.days")

    sp = sub.add_parser("simulate", help="simulate a scenario")
    common(sp, data=False)
    sp.add_argument("--scenario")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a model and export factors")
    common(sp)
    sp.add_argument("--model", choices=("cl", "cox", "gbm", "mlp"))
    sp.add_argument("--fine-factors", action="store_true", help="also export the native-width factor table")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="fill the lower triangle from a fit")
    common(sp)
    sp.add_argument("--fit", required=True, help="fit.json from the fit command")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="score a fit against reported-later claims")
    common(sp)
    sp.add_argument("--fit", required=True)
    sp.add_argument("--truth", required=True, help="claims reported after the cutoff")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("replicate", help="simulate, fit and score over replications")
    common(sp, data=False)
    sp.add_argument("--scenario")
    sp.set_defaults(func=cmd_replicate)

    sp = sub.add_parser("tune", help="random hyperparameter search")
    common(sp)
    sp.add_argument("--model", choices=("gbm", "mlp"))
    sp.set_defaults(func=cmd_tune)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except (ReservingError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
