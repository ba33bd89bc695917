"""Command-line entry point for the analog noise-mitigation toolkit."""
import argparse
import logging
import sys
from typing import List, Optional

from cli.commands import COMMANDS
from utils.config_loader import load_config
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    return [float(value) for value in text.split(",") if value.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Analog noise denoiser toolkit")
    parser.add_argument("--config", help="YAML/JSON file merged over config/config.yaml")
    parser.add_argument("--output-dir", help="Output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, help="Master seed (overrides seed)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    prepare = sub.add_parser("prepare-data", help="Write the synthetic dataset or verify CIFAR-10")
    prepare.add_argument("--out", help="Directory for exported batches")

    sub.add_parser("train-backbone", help="Train the SmallCNN backbone on clean data")

    evaluate = sub.add_parser("eval", help="Clean and noisy accuracy over seeds")
    evaluate.add_argument("--model", help="Checkpoint (default: registered backbone)")
    evaluate.add_argument("--noise-sigma-pct", type=float, help="Noise sigma as %% of feature magnitude")
    evaluate.add_argument("--seeds", type=int, help="Number of noise seeds")

    sweep = sub.add_parser("sweep", help="Accuracy versus noise sigma")
    sweep.add_argument("--model", help="Checkpoint (default: registered denoised model or backbone)")
    sweep.add_argument("--sigmas", type=_float_list, help="Comma separated sigma percentages")
    sweep.add_argument("--seeds", type=int, help="Number of noise seeds")

    plan = sub.add_parser("plan", help="Score layers and select denoiser positions")
    plan.add_argument("--model", help="Checkpoint (default: registered backbone)")
    plan.add_argument("--eta", type=float, help="Parameter budget in %% of backbone parameters")
    plan.add_argument("--all-layers", action="store_true", help="Ignore the budget; plan every layer")

    train_den = sub.add_parser("train-denoiser", help="Attach and train denoisers on the frozen backbone")
    train_den.add_argument("--model", help="Checkpoint (default: registered backbone)")
    train_den.add_argument("--plan", help="Plan file (default: registered plan)")

    hw_sim = sub.add_parser("hw-sim", help="Cycle report (and optional fixed-point run) of the denoisers")
    hw_sim.add_argument("--model", help="Checkpoint with denoisers")
    hw_sim.add_argument("--shape-table", help="Layer shape CSV instead of a model")
    hw_sim.add_argument("--attach", help="Comma separated layer names carrying denoisers (with --shape-table)")
    hw_sim.add_argument("--functional", action="store_true", help="Also run the fixed-point DCU model")

    report = sub.add_parser("report", help="Render result tables from an output directory")
    report.add_argument("--dir", help="Directory holding the CSV results")

    luts = sub.add_parser("dump-luts", help="Write the Box-Muller lookup tables as hex")
    luts.add_argument("--out", help="Output directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        config = load_config(args.config, {"output_dir": args.output_dir, "seed": args.seed})
        logger.info(f"Running {args.command} (seed={config.seed}, output_dir={config.output_dir})")
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(str(e))
        return 2
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
