import argparse
import logging
import sys

import config
from experiments.runner import (
    experiment_payload,
    inspect_model,
    run_batch_baseline,
    run_batch_compare,
    run_diagnose,
    run_gen_data,
    run_incremental_experiment,
    run_new_class_experiment,
)
from exporters.report_exporter import report_exporter

logger = logging.getLogger(__name__)

RUNNERS = {
    'gen-data': run_gen_data,
    'batch-compare': run_batch_compare,
    'incremental': run_incremental_experiment,
    'new-class': run_new_class_experiment,
    'batch-baseline': run_batch_baseline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (dotenv syntax)")
    common.add_argument("--seed", type=int, help="overrides SEED")
    common.add_argument("--out", help="overrides OUTPUT_DIR")
    common.add_argument("--format", choices=["text", "structured"], default="text")
    common.add_argument("--xlsx", action="store_true", help="also write report.xlsx")

    parser = argparse.ArgumentParser(description="DGA bushing diagnosis with incremental Learn++ ensembles")
    sub = parser.add_subparsers(dest="cmd", required=True)

    sub.add_parser("gen-data", parents=[common], help="generate a synthetic labeled dataset")
    sub.add_parser("batch-compare", parents=[common], help="compare MLP, RBF and SVM at both levels")
    sub.add_parser("incremental", parents=[common], help="level-1 Learn++ run over five databases")
    sub.add_parser("new-class", parents=[common], help="level-2 Learn++ run with a class introduced later")
    sub.add_parser("batch-baseline", parents=[common], help="pooled vs class-starved batch MLP")

    p_diagnose = sub.add_parser("diagnose", parents=[common], help="diagnose the rows of a gas-record CSV")
    p_diagnose.add_argument("--input", help="CSV with gas records (defaults to DATASET_PATH)")
    p_diagnose.add_argument("--level1-model", help="overrides LEVEL1_MODEL")
    p_diagnose.add_argument("--level2-model", help="overrides LEVEL2_MODEL")

    p_inspect = sub.add_parser("inspect-model", parents=[common], help="describe a model snapshot")
    p_inspect.add_argument("model", help="snapshot file")
    return parser


def overrides_from_args(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides['SEED'] = str(args.seed)
    if args.out:
        overrides['OUTPUT_DIR'] = args.out
    if getattr(args, 'level1_model', None):
        overrides['LEVEL1_MODEL'] = args.level1_model
    if getattr(args, 'level2_model', None):
        overrides['LEVEL2_MODEL'] = args.level2_model
    return overrides


def run(args) -> int:
    cfg = config.load_experiment_config(args.config, kind=args.cmd, overrides=overrides_from_args(args))
    if args.cmd == 'inspect-model':
        result = inspect_model(args.model)
    elif args.cmd == 'diagnose':
        result = run_diagnose(cfg, args.input, xlsx=args.xlsx)
    else:
        result = RUNNERS[args.cmd](cfg, xlsx=args.xlsx)

    if args.format == 'structured':
        print(report_exporter.dumps(experiment_payload(cfg, result)), end='')
    else:
        print(report_exporter.render_text(result.tables()), end='')
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT, stream=sys.stderr)
    try:
        return run(args)
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        message = str(e).replace('\n', ' ').replace('  - ', '- ')
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
