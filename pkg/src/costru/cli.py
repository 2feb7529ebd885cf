"""Command-line entry point.

Subcommands: generate, train, verify, sweep-epsilon, evaluate.
Exit codes: 0 ok, 1 verification failure, 2 usage/config error, 3 IO error.
Every command is deterministic given (config, seed); all CSVs carry a
comment line recording the config hash and seed, then a header row.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import baselines, experiments, simplex_lab, verification
from .core import CheckRow, InputError, make_rng
from .problems import datasets as ds
from .problems.spanning_tree import MstEvaluator, MstOracle
from .problems.toy import ToyEvaluator, ToyOracle, toy_dataset
from .trainer import TrainConfig, evaluate_policy, train_primal_dual

log = logging.getLogger("costru")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_IO = 3


class ConfigError(ValueError):
    pass


# Section -> key -> type.  Unknown sections or keys are rejected.
_SCHEMA: dict[str, dict[str, type]] = {
    "problem": {"kind": str},
    "run": {"seed": int, "workers": int},
    "generate": {
        "rows": int, "cols": int, "train_instances": int, "val_instances": int,
        "test_instances": int, "scenarios_per_instance": int, "feature_dim": int,
        "cost_low": float, "cost_high": float, "noise_scale": float,
        "noise_common": float, "ratio_low": float, "ratio_span": float,
    },
    "train": {
        "nb_iterations": int, "nb_scenarios": int, "nb_samples": int,
        "nb_epochs": int, "lr_init": float, "epsilon": float, "kappa": float,
    },
    "saa": {"n_saa_scenarios": int, "lagrangian_iters": int, "sigma0": float},
    "sweep": {"epsilons": str, "nb_seeds": int},
    "verify": {"instances": int, "probes": int, "trials": int, "iterations": int,
               "draws": int},
}

_DEFAULTS: dict[str, dict] = {
    "problem": {"kind": "mst"},
    "run": {"seed": 0, "workers": 1},
    "generate": {
        "rows": 20, "cols": 20, "train_instances": 50, "val_instances": 50,
        "test_instances": 50, "scenarios_per_instance": 20, "feature_dim": 5,
        "cost_low": 5.0, "cost_high": 10.0, "noise_scale": 1.0,
        "noise_common": 0.6, "ratio_low": 0.5, "ratio_span": 6.0,
    },
    "saa": {"n_saa_scenarios": 20, "lagrangian_iters": 50, "sigma0": 1.0},
    "sweep": {"epsilons": "1,2,2.5,3,4,5,10,150", "nb_seeds": 30},
    "verify": {"instances": 0, "probes": 1000, "trials": 1000, "iterations": 50,
               "draws": 500},
}


def load_config(path: str | None) -> dict[str, dict]:
    """Parse the flat key/value config file and fill in defaults."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
    cfg: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        cfg[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            typ = _SCHEMA[section][key]
            try:
                cfg[section][key] = typ(raw) if typ is not str else raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
    for section, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        merged.update(cfg.get(section, {}))
        cfg[section] = merged
    kind = cfg["problem"]["kind"]
    if kind not in ("toy", "mst"):
        raise ConfigError(f"problem.kind must be toy or mst, not {kind!r}")
    train_defaults = experiments.TOY_DEFAULTS if kind == "toy" else experiments.MST_DEFAULTS
    merged = dict(train_defaults)
    merged.update(cfg.get("train", {}))
    cfg["train"] = merged
    return cfg


def config_hash(cfg: dict[str, dict]) -> str:
    lines = sorted(
        f"{section}.{key}={cfg[section][key]}"
        for section in cfg
        for key in cfg[section]
    )
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list], chash: str, seed: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={chash} seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _train_config(cfg: dict, seed: int, workers: int) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        nb_iterations=t["nb_iterations"], nb_scenarios=t["nb_scenarios"],
        nb_samples=t["nb_samples"], nb_epochs=t["nb_epochs"], lr_init=t["lr_init"],
        epsilon=t["epsilon"], kappa=t["kappa"], seed=seed, workers=workers,
    )


def _saa_config(cfg: dict) -> baselines.SaaConfig:
    s = cfg["saa"]
    return baselines.SaaConfig(
        n_saa_scenarios=s["n_saa_scenarios"], lagrangian_iters=s["lagrangian_iters"],
        sigma0=s["sigma0"],
    )


def _load_mst_data(data_dir: Path):
    splits = {}
    for split in ("train", "val", "test"):
        path = data_dir / f"{split}.npz"
        if not path.exists():
            raise ConfigError(f"missing dataset file {path}")
        splits[split] = ds.load_split(path)
    return splits


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg["run"]["seed"]
    chash = config_hash(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg["problem"]["kind"] == "toy":
        manifest = {"problem": "toy", "seed": seed, "config_hash": chash}
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
        log.info("toy problem is tabular; wrote manifest only")
        return EXIT_OK
    gen_cfg = ds.GenConfig(**cfg["generate"])
    for split in ("train", "val", "test"):
        instances = ds.generate_mst_split(gen_cfg, seed, split)
        ds.save_split(out / f"{split}.npz", instances, split)
    ds.write_manifest(out / "manifest.json", gen_cfg, seed)
    log.info("wrote dataset under %s", out)
    return EXIT_OK


def _train_toy(args, cfg, seed, workers, chash, out: Path) -> int:
    data = toy_dataset()
    oracle = ToyOracle()
    config = _train_config(cfg, seed, workers)
    if args.method == "primal-dual":
        start = time.perf_counter()
        trajectory = train_primal_dual(data, oracle, config)
        log.info("toy primal-dual took %.0f ms", 1e3 * (time.perf_counter() - start))
        rows = [
            [t + 1, trajectory.per_iteration[t, 0], trajectory.running_average[t, 0]]
            for t in range(config.nb_iterations)
        ]
        write_csv(out / "trajectory.csv", ["iteration", "theta_current", "theta_avg"],
                  rows, chash, seed)
        np.savez(out / "weights.npz", per_iteration=trajectory.per_iteration,
                 running_average=trajectory.running_average,
                 final_average=trajectory.final_average)
    elif args.method == "uncoordinated":
        w = baselines.uncoordinated_imitation(data, oracle, config)
        cost, gap = evaluate_policy(w, data, oracle, ToyEvaluator())
        write_csv(out / "metrics.csv", ["mean_cost", "mean_gap"], [[cost, gap]],
                  chash, seed)
        np.savez(out / "weights.npz", weights=w, final_average=w)
    else:
        log.error("method %s is not defined for the toy problem", args.method)
        return EXIT_USAGE
    return EXIT_OK


def _train_mst(args, cfg, seed, workers, chash, out: Path) -> int:
    splits = _load_mst_data(Path(args.data))
    train_insts, train_data = splits["train"]
    _, val_data = splits["val"]
    _, test_data = splits["test"]
    oracle = MstOracle(train_insts[0].rows, train_insts[0].cols)
    evaluator = MstEvaluator(oracle)
    config = _train_config(cfg, seed, workers)
    start = time.perf_counter()

    if args.method == "primal-dual":
        trajectory = train_primal_dual(train_data, oracle, config)
        series = experiments.mst_gap_series(trajectory, val_data, test_data, oracle)
        rows = [
            [t + 1, series.val_current[t], series.val_average[t],
             series.test_current[t], series.test_average[t]]
            for t in range(config.nb_iterations)
        ]
        write_csv(out / "metrics.csv",
                  ["iteration", "val_gap_current_w", "val_gap_avg_w",
                   "test_gap_current_w", "test_gap_avg_w"], rows, chash, seed)
        np.savez(out / "weights.npz", per_iteration=trajectory.per_iteration,
                 running_average=trajectory.running_average,
                 final_average=trajectory.final_average)
    elif args.method in ("uncoordinated", "fully-coordinated"):
        if args.method == "uncoordinated":
            w = baselines.uncoordinated_imitation(train_data, oracle, config)
        else:
            targets = baselines.lagrangian_targets(train_data, oracle, _saa_config(cfg))
            ctx_ids = np.array(sorted(targets), dtype=np.int64)
            np.savez(out / "targets.npz", context_ids=ctx_ids,
                     solutions=np.stack([targets[c] for c in ctx_ids]))
            w = baselines.fully_coordinated_imitation(
                train_data, oracle, _saa_config(cfg), config, targets)
        val = evaluate_policy(w, val_data, oracle, evaluator)
        test = evaluate_policy(w, test_data, oracle, evaluator)
        write_csv(out / "metrics.csv",
                  ["val_mean_cost", "val_gap", "test_mean_cost", "test_gap"],
                  [[val[0], val[1], test[0], test[1]]], chash, seed)
        np.savez(out / "weights.npz", weights=w, final_average=w)
    elif args.method == "median":
        d_median = baselines.pooled_median_second_stage(train_data)
        rows = []
        solutions = {}
        for split_name, data in (("val", val_data), ("test", test_data)):
            sols = {ctx: baselines.median_policy_solution(group[0], d_median, oracle)
                    for ctx, group in data.by_context().items()}
            cost, gap = baselines.evaluate_fixed_solutions(sols, data, evaluator)
            rows.append([split_name, cost, gap])
            solutions[split_name] = sols
        write_csv(out / "metrics.csv", ["split", "mean_cost", "mean_gap"], rows,
                  chash, seed)
        for split_name, sols in solutions.items():
            ctx_ids = np.array(sorted(sols), dtype=np.int64)
            np.savez(out / f"median_solutions_{split_name}.npz", context_ids=ctx_ids,
                     solutions=np.stack([sols[c] for c in ctx_ids]))
    else:  # pragma: no cover - argparse restricts choices
        return EXIT_USAGE
    log.info("%s training took %.0f ms", args.method,
             1e3 * (time.perf_counter() - start))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg["run"]["seed"]
    workers = args.workers if args.workers is not None else cfg["run"]["workers"]
    chash = config_hash(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg["problem"]["kind"] == "toy":
        return _train_toy(args, cfg, seed, workers, chash, out)
    if args.data is None:
        log.error("--data is required for the spanning-tree problem")
        return EXIT_USAGE
    return _train_mst(args, cfg, seed, workers, chash, out)


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg["run"]["seed"]
    chash = config_hash(cfg)
    with np.load(args.weights) as data:
        if "final_average" in data:
            w = data["final_average"]
        else:
            w = data["weights"]
    if cfg["problem"]["kind"] == "toy":
        dataset = toy_dataset()
        cost, gap = evaluate_policy(np.atleast_1d(w), dataset, ToyOracle(), ToyEvaluator())
    else:
        instances, dataset = ds.load_split(Path(args.data) / f"{args.split}.npz")
        oracle = MstOracle(instances[0].rows, instances[0].cols)
        cost, gap = evaluate_policy(np.atleast_1d(w), dataset, oracle, MstEvaluator(oracle))
    write_csv(Path(args.out), ["split", "mean_cost", "mean_gap"],
              [[args.split, cost, gap]], chash, seed)
    return EXIT_OK


_SUITES = ("convergence", "mirror-descent", "five-point", "risk-bound",
           "jensen-gap", "conjugates", "oracles", "gradients")


def run_verify_suite(suite: str, cfg: dict, seed: int) -> list[CheckRow]:
    v = cfg["verify"]

    def instances(default: int) -> int:
        return v["instances"] if v["instances"] > 0 else default

    if suite == "convergence":
        return simplex_lab.run_convergence_suite(
            n_instances=instances(20), seed=seed)
    if suite == "mirror-descent":
        return simplex_lab.run_mirror_descent_suite(iters=v["iterations"], seed=seed)
    if suite == "five-point":
        return simplex_lab.run_five_point_suite(probes=v["probes"], seed=seed)
    if suite == "risk-bound":
        return simplex_lab.run_risk_bound_suite(n_instances=instances(100), seed=seed)
    if suite == "jensen-gap":
        return simplex_lab.run_jensen_gap_suite(trials=v["trials"], seed=seed)
    if suite == "conjugates":
        return simplex_lab.run_conjugate_suite(n_instances=instances(50), seed=seed)
    if suite == "oracles":
        return verification.run_oracle_suite(
            n_kruskal=v["draws"], n_anticipative=max(2, v["draws"] * 2 // 5), seed=seed)
    if suite == "gradients":
        return verification.run_gradient_suite(seed=seed)
    raise ConfigError(f"unknown suite {suite!r}")


def _write_verify_trace(suite: str, cfg: dict, seed: int, out: Path, chash: str) -> None:
    """Per-iteration trace CSV next to the report for the iterative suites."""
    from .regularizers import RegularizerKind

    g = make_rng(seed, 7).generator()
    if suite == "convergence":
        costs = simplex_lab.random_cost_table(g, 5, 6)
        config = simplex_lab.LabConfig(1.0, RegularizerKind.negentropy(),
                                       max_iters=cfg["verify"]["iterations"])
        rows = simplex_lab.alternating_trace(costs, config, np.zeros(6))
        write_csv(out.with_name(out.stem + "_trace.csv"),
                  ["iteration", "surrogate_value", "partial_min_value", "jensen_gap"],
                  [list(r) for r in rows], chash, seed)
    elif suite == "mirror-descent":
        g = make_rng(seed, 31).generator()
        costs = simplex_lab.random_cost_table(g, 3, 4)
        config = simplex_lab.LabConfig(1.0, RegularizerKind.negentropy())
        s0 = g.standard_normal(4)
        s0 -= s0.mean()
        _, comparison = simplex_lab.run_mirror_descent_comparison(
            costs, config, s0, cfg["verify"]["iterations"])
        rows = [[t + 1, dev] for t, dev in enumerate(comparison.deviations)]
        write_csv(out.with_name(out.stem + "_trace.csv"),
                  ["iteration", "max_deviation"], rows, chash, seed)


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg["run"]["seed"]
    chash = config_hash(cfg)
    rows = run_verify_suite(args.suite, cfg, seed)
    out = Path(args.out) if args.out else Path(f"verify_{args.suite}.csv")
    write_csv(out, CheckRow.csv_header(), [r.csv_row() for r in rows], chash, seed)
    _write_verify_trace(args.suite, cfg, seed, out, chash)
    failed = [r for r in rows if not r.passed]
    for r in failed:
        log.error("FAIL %s: measured %.3g vs threshold %.3g", r.check, r.measured,
                  r.threshold)
    log.info("%s: %d checks, %d failures", args.suite, len(rows), len(failed))
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_sweep_epsilon(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg["run"]["seed"]
    chash = config_hash(cfg)
    epsilons = [float(tok) for tok in cfg["sweep"]["epsilons"].split(",") if tok.strip()]
    overrides = {
        key: cfg["train"][key]
        for key in ("nb_iterations", "nb_scenarios", "nb_samples", "nb_epochs",
                    "lr_init", "kappa")
    }
    results = experiments.run_toy_epsilon_sweep(
        epsilons, cfg["sweep"]["nb_seeds"], base_seed=seed, **overrides)
    write_csv(Path(args.out), ["epsilon", "proportion_optimal"],
              [[eps, prop] for eps, prop in results], chash, seed)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costru",
        description="Contextual stochastic combinatorial optimization policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="key/value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("generate", help="write dataset containers and manifest")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one of the four methods")
    p.add_argument("method", choices=["primal-dual", "uncoordinated",
                                      "fully-coordinated", "median"])
    common(p)
    p.add_argument("--data", default=None, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate stored weights on a split")
    common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="run a theorem/property check suite")
    p.add_argument("suite", choices=list(_SUITES))
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep-epsilon", help="toy perturbation-scale sweep")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_epsilon)

    return parser


def _setup_logging() -> None:
    level = os.environ.get("COSTRU_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=levels.get(level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        log.error("%s", exc)
        print(f"costru: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        log.error("%s", exc)
        print(f"costru: io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
