"""Command-line entry point: ``fleetrisk <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from fleetrisk.config import RunConfig, dump_json, load_run_config
from fleetrisk.csvio import (RISK_COL, read_failures, read_fleet_table, read_prediction_file, read_truth,
                             write_fleet_table, write_prediction_file)
from fleetrisk.features import build_feature_matrix
from fleetrisk.harness import (StageError, calibrate_strategy, generate_files, predict_strategy, replace_strategies,
                               run_all, score_files, stage)
from fleetrisk.labeling import label_fleet, truck_sequences
from fleetrisk.phases import Submission, simulate_phases
from fleetrisk.schema import RiskLabel
from fleetrisk.scoring import dev_phase_score
from fleetrisk.strategies import STRATEGIES, normalize_test, normalize_train

logger = logging.getLogger("fleetrisk")


def _has_labels(path: str) -> bool:
    with open(path) as fh:
        return RISK_COL in fh.readline().strip().split(",")


def _out(args, default_name: str) -> Path:
    if getattr(args, "output", None):
        return Path(args.output)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


def _strategy_spec(cfg: RunConfig, name: str) -> dict:
    for spec in cfg.strategies:
        if spec["name"] == name:
            return spec
    return {"name": name}


def cmd_generate(args, cfg: RunConfig) -> None:
    with stage("generate"):
        paths = generate_files(cfg.generator, args.out or cfg.output_dir)
    for key, path in paths.items():
        print(f"{key}={path}")


def cmd_label(args, cfg: RunConfig) -> None:
    with stage("label"):
        fleet = read_fleet_table(args.fleet, expect_labels=_has_labels(args.fleet))
        labeled = label_fleet(fleet.with_labels(None), read_failures(args.failures))
        path = _out(args, "labeled.csv")
        write_fleet_table(labeled, path)
    print(f"labeled={path} rows={len(labeled)}")


def cmd_featurize(args, cfg: RunConfig) -> None:
    with stage("featurize"):
        labeled = _has_labels(args.table)
        table = read_fleet_table(args.table, expect_labels=labeled)
        if args.normalize:
            q = cfg.features.quantile_q
            table = normalize_train(table, q) if labeled else normalize_test(table, q)
        path = _out(args, "features.csv")
        with open(path, "w") as fh:
            for k, seq in enumerate(truck_sequences(table)):
                rows, flat = build_feature_matrix(seq, cfg.features)
                if args.flat:
                    if k == 0:
                        fh.write(",".join(["chassis_id"] + [f"v{j}" for j in range(len(flat))]) + "\n")
                    fh.write(",".join([seq.chassis_id] + [repr(float(v)) for v in flat]) + "\n")
                    continue
                if k == 0:
                    fh.write(",".join(["chassis_id", "timestep"] + [f"c{j}" for j in range(rows.shape[1])]) + "\n")
                for t, row in zip(seq.timesteps, rows):
                    fh.write(",".join([seq.chassis_id, str(int(t))] + [repr(float(v)) for v in row]) + "\n")
    print(f"features={path}")


def cmd_calibrate(args, cfg: RunConfig) -> None:
    with stage(f"calibrate:{args.strategy}"):
        train = read_fleet_table(args.train, expect_labels=True)
        fitted = calibrate_strategy(args.strategy, _strategy_spec(cfg, args.strategy), train, cfg.validation,
                                    cfg.seed, cfg.features.quantile_q)
        path = _out(args, f"{args.strategy}.json")
        dump_json(fitted, path)
    print(f"calibrated={path} validation_score={fitted['validation_score']}")


def cmd_predict(args, cfg: RunConfig) -> None:
    with stage(f"predict:{args.strategy}"):
        test = read_fleet_table(args.test, expect_labels=False)
        failures = None
        if args.strategy == "oracle":
            if not args.failures:
                raise ValueError("the oracle strategy needs --failures")
            failures = read_failures(args.failures)
            train = None
        else:
            train = read_fleet_table(args.train, expect_labels=True)
        spec = json.loads(Path(args.fitted).read_text()) if args.fitted else _strategy_spec(cfg, args.strategy)
        if spec.get("name", args.strategy) != args.strategy:
            raise ValueError(f"fitted config is for {spec['name']!r}, not {args.strategy!r}")
        labels = predict_strategy(args.strategy, spec, train, test, cfg.seed, cfg.features.quantile_q, failures)
        path = _out(args, f"{args.strategy}.csv")
        write_prediction_file([RiskLabel(int(c)) for c in labels], path)
        read_prediction_file(path, expected_rows=len(test))
    print(f"predictions={path} rows={len(labels)}")


def cmd_score(args, cfg: RunConfig) -> None:
    with stage("score"):
        if args.phase == "final":
            report = score_files(args.truth, args.pred)
        else:
            truth, gens = read_truth(args.truth)
            pred = read_prediction_file(args.pred, expected_rows=len(truth))
            report = dev_phase_score(truth, pred, gens, cfg.phases.dev_fraction, cfg.seed)
    print(report.as_text())
    print(report.as_record())


def _parse_submission(text: str, phase: str) -> tuple[str, int]:
    path, _, day = text.partition("@")
    if day and phase == "final":
        raise ValueError("final submissions take no day tag")
    return path, int(day) if day else 0


def cmd_simulate(args, cfg: RunConfig) -> None:
    with stage("simulate-phases"):
        truth, gens = read_truth(args.truth)
        subs = []
        for phase, items in (("dev", args.dev or []), ("final", args.final or [])):
            for item in items:
                path, day = _parse_submission(item, phase)
                labels = read_prediction_file(path, expected_rows=len(truth))
                subs.append(Submission(phase, labels, day=day, name=Path(path).stem))
        record = simulate_phases(truth, gens, subs, cfg.phases, cfg.seed)
        path = _out(args, "experiment.json")
        dump_json(record.to_dict(), path)
    for entry in record.entries:
        print(f"{entry.phase} day={entry.day} {entry.name}: {entry.report.as_record()}")
    for phase in ("dev", "final"):
        best = record.best(phase)
        if best is not None:
            print(f"best_{phase}={best.name} score={best.report.final:.6f}")


def cmd_run_all(args, cfg: RunConfig) -> None:
    if args.strategy:
        cfg = replace_strategies(cfg, args.strategy)
    run_all(cfg)
    print((Path(cfg.output_dir) / "summary.txt").read_text(), end="")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="run config JSON file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the run and generator seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="fleetrisk", parents=[common],
                                     description="Synthetic fleet risk-classification challenge toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="generate challenge CSVs, truth and failures")

    p = sub.add_parser("label", parents=[common], help="attach risk labels to a fleet table")
    p.add_argument("--fleet", required=True)
    p.add_argument("--failures", required=True)
    p.add_argument("--output")

    p = sub.add_parser("featurize", parents=[common], help="dump per-sequence feature matrices")
    p.add_argument("--table", required=True)
    p.add_argument("--flat", action="store_true", help="one flat vector per sequence instead of per-row matrix")
    p.add_argument("--normalize", action="store_true", help="apply the per-split quantile shift first")
    p.add_argument("--output")

    names = list(STRATEGIES) + ["oracle"]
    p = sub.add_parser("calibrate", parents=[common], help="fit thresholds on a validation carve-out")
    p.add_argument("--strategy", required=True, choices=list(STRATEGIES))
    p.add_argument("--train", required=True)
    p.add_argument("--output")

    p = sub.add_parser("predict", parents=[common], help="fit on train and write a prediction file")
    p.add_argument("--strategy", required=True, choices=names)
    p.add_argument("--train")
    p.add_argument("--test", required=True)
    p.add_argument("--fitted", help="calibrated config written by 'calibrate'")
    p.add_argument("--failures", help="failure map, only for the oracle")
    p.add_argument("--output")

    p = sub.add_parser("score", parents=[common], help="score a prediction file against truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--phase", choices=["dev", "final"], default="final")

    p = sub.add_parser("simulate-phases", parents=[common], help="replay submissions through both phases")
    p.add_argument("--truth", required=True)
    p.add_argument("--dev", nargs="*", metavar="PRED[@DAY]")
    p.add_argument("--final", nargs="*", metavar="PRED")
    p.add_argument("--output")

    p = sub.add_parser("run-all", parents=[common], help="run the whole pipeline")
    p.add_argument("--strategy", action="append", choices=names, help="restrict to these strategies (repeatable)")
    return parser


COMMANDS = {
    "generate": cmd_generate, "label": cmd_label, "featurize": cmd_featurize, "calibrate": cmd_calibrate,
    "predict": cmd_predict, "score": cmd_score, "simulate-phases": cmd_simulate, "run-all": cmd_run_all,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for key in ("config", "seed", "out", "verbose"):
        if not hasattr(args, key):
            setattr(args, key, None)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "predict" and args.strategy != "oracle" and not args.train:
        print("error: [predict] --train is required", file=sys.stderr)
        return 2
    try:
        with stage("config"):
            cfg = load_run_config(args.config).with_overrides(seed=args.seed, output_dir=args.out)
        COMMANDS[args.command](args, cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
