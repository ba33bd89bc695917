"""Command implementations: thin orchestration over the toolkit packages."""
import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
import torch

from cli.report import render_report
from dataset.dataset_manager import DatasetManager
from denoiser.attach import attach, denoiser_overhead_pct
from denoiser.block import denoiser_forward
from graph.forward import forward
from graph.model import ModelGraph, small_cnn
from hw.dcu import (build_cycle_report, dcu_run, dequantize_denoiser, model_attachment_ratios,
                    quantize_denoiser, requantization_bound, shape_table_from_model)
from hw.fixed_point import QFormat, dequantize, quantize
from hw.noise_cancel import LfsrBank
from hw.unc import dump_luts
from noise.injection import NoiseSpec, apply_noise_spec
from noise.rng import RngState
from placement.scoring import layer_grad_scores
from placement.selection import PlacementPlan, select_layers
from trainer.checkpoint import load_checkpoint, save_checkpoint
from trainer.evaluate_model import (evaluate_model, evaluate_over_seeds, noise_accuracy_table,
                                    noise_sweep, strip_denoisers, summarize)
from trainer.model_registry import ArtifactRegistry
from trainer.train_backbone import train_backbone
from trainer.train_denoisers import train_denoisers
from utils.config_loader import ExperimentConfig, load_shape_table
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["model", "baseline", "noisy", "denoised", "overhead_pct"]


def write_csv(frame: pd.DataFrame, path: Path, seed: int) -> str:
    """CSV with a leading ``# seed=<seed>`` comment line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write(f"# seed={seed}\n")
        frame.to_csv(handle, index=False)
    logger.info(f"Wrote {path}")
    return str(path)


def _pct(value: float) -> float:
    return round(100.0 * value, 2)


def _output_dir(config: ExperimentConfig) -> Path:
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    return root


def _resolve_model(args: argparse.Namespace, registry: ArtifactRegistry, kind: str) -> str:
    """Explicit --model path, else the registered artifact of ``kind``."""
    if getattr(args, "model", None):
        return args.model
    entry = registry.get(kind)
    if entry is None:
        raise FileNotFoundError(f"No --model given and no '{kind}' artifact registered; run the "
                                f"command that produces it first")
    return entry["path"]


def _noise_layers(config: ExperimentConfig, model: ModelGraph) -> List[int]:
    return list(config.noise.layers) if config.noise.layers is not None else model.conv_indices()


def _noise_spec(config: ExperimentConfig, model: ModelGraph, sigma_pct: Optional[float] = None) -> NoiseSpec:
    sigma = config.noise.sigma_pct if sigma_pct is None else sigma_pct
    return NoiseSpec.for_layers(_noise_layers(config, model), sigma, config.noise.mean,
                                config.seed, config.noise.sigma_mode)


def _seed_list(config: ExperimentConfig, count: Optional[int] = None) -> List[int]:
    return [config.seed + k for k in range(count or config.evaluation.seeds)]


def _input_hw(config: ExperimentConfig):
    return (config.dataset.image_size, config.dataset.image_size)


def cmd_prepare_data(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Export the synthetic dataset in CIFAR-10 layout, or verify a CIFAR-10 directory."""
    manager = DatasetManager(config)
    if config.dataset.kind == "synthetic":
        out_dir = Path(args.out or Path(config.output_dir) / "data")
        manager.export_synthetic(str(out_dir))
        print(f"Synthetic dataset written to {out_dir}")
    stats = manager.get_dataset_stats()
    print(" ".join(f"{split}={count}" for split, count in stats.items()))
    return 0


def cmd_train_backbone(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out = _output_dir(config)
    registry = ArtifactRegistry(str(out))
    manager = DatasetManager(config)
    training = config.training

    model = small_cnn(classes=config.dataset.classes, seed=config.seed)
    model.name = "SmallCNN"
    trained, state, history = train_backbone(model, manager.get("train"), training.backbone_epochs,
                                             config.seed, training.batch_size, training.lr)
    path = save_checkpoint(trained, str(out / "backbone.anmd"), state)

    test = evaluate_model(trained, manager.get("test"))
    frame = pd.DataFrame(history, columns=["epoch", "loss", "train_acc"])
    frame["test_acc"] = float("nan")
    if len(frame):
        frame.loc[frame.index[-1], "test_acc"] = test["accuracy"]
    write_csv(frame, out / "backbone_metrics.csv", config.seed)
    registry.register("backbone", path, config.seed, {"test_acc": test["accuracy"]})
    print(f"Backbone test accuracy: {_pct(test['accuracy'])}%")
    return 0


def cmd_eval(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out = _output_dir(config)
    registry = ArtifactRegistry(str(out))
    model, _ = load_checkpoint(_resolve_model(args, registry, "backbone"))
    sigma = config.noise.sigma_pct if args.noise_sigma_pct is None else args.noise_sigma_pct

    test = DatasetManager(config).get("test")
    table = noise_accuracy_table(model, test, sigma, _seed_list(config, args.seeds),
                                 noise_layers=_noise_layers(config, model),
                                 batch_size=config.training.batch_size)
    path = write_csv(table, out / f"eval_sigma{sigma:g}.csv", config.seed)
    mean = table.loc[table["row"] == "mean"].iloc[0]
    std = table.loc[table["row"] == "std"].iloc[0]
    registry.register("eval", path, config.seed,
                      {"sigma_pct": sigma, "clean_acc": mean["clean_acc"], "noisy_acc": mean["noisy_acc"]})
    print(f"clean={_pct(mean['clean_acc'])}% noisy={_pct(mean['noisy_acc'])}"
          f"±{_pct(std['noisy_acc'])}% at sigma={sigma:g}%")
    return 0


def cmd_sweep(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Accuracy versus noise level, noisy backbone and (if present) model*."""
    out = _output_dir(config)
    registry = ArtifactRegistry(str(out))
    kind = "denoised" if registry.get("denoised") else "backbone"
    model, _ = load_checkpoint(_resolve_model(args, registry, kind))
    sigmas = args.sigmas or config.evaluation.sweep_sigmas

    test = DatasetManager(config).get("test")
    frame = noise_sweep(model, test, sigmas, _seed_list(config, args.seeds),
                        noise_layers=_noise_layers(config, model),
                        batch_size=config.training.batch_size)
    accuracy_columns = [c for c in frame.columns if c != "sigma_pct"]
    frame[accuracy_columns] = (frame[accuracy_columns] * 100.0).round(2)
    path = write_csv(frame, out / "sweep.csv", config.seed)
    registry.register("sweep", path, config.seed, {"sigmas": list(sigmas)})
    print(frame.to_string(index=False))
    return 0


def cmd_plan(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out = _output_dir(config)
    registry = ArtifactRegistry(str(out))
    model, _ = load_checkpoint(_resolve_model(args, registry, "backbone"))
    placement = config.placement
    eta = placement.eta_pct if args.eta is None else args.eta
    if args.all_layers:
        eta = None

    calib = DatasetManager(config).calibration_batch(placement.calib_samples)
    scores = layer_grad_scores(model, calib.images, calib.labels)
    shapes = model.activation_shapes((1, model.input_channels()) + _input_hw(config))
    channel_map = {index: shapes[index][1] for index in scores}
    plan = select_layers(scores, eta, model.backbone_parameter_count(), channel_map,
                         ratio=placement.ratio, mode=placement.mode)

    path = out / "plan.txt"
    path.write_text(plan.to_text(seed=config.seed))
    registry.register("plan", str(path), config.seed,
                      {"layers": plan.layer_indices, "budget": plan.budget, "total_cost": plan.total_cost})
    print(plan.to_text(seed=config.seed), end="")
    return 0


def cmd_train_denoiser(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out = _output_dir(config)
    registry = ArtifactRegistry(str(out))
    model, _ = load_checkpoint(_resolve_model(args, registry, "backbone"))
    plan_path = Path(args.plan or (registry.get("plan") or {}).get("path", out / "plan.txt"))
    if not plan_path.exists():
        raise FileNotFoundError(f"Plan file not found: {plan_path}; run 'plan' first")
    plan = PlacementPlan.from_text(plan_path.read_text())
    if not plan.entries:
        raise ConfigError(f"Plan {plan_path} selects no layers (budget {plan.budget}); "
                          f"raise --eta or use --all-layers when planning")

    manager = DatasetManager(config)
    training = config.training
    noisy = apply_noise_spec(model, _noise_spec(config, model))
    starred = attach(noisy, plan, ratio=config.placement.ratio, seed=config.seed,
                     input_hw=_input_hw(config))
    trained, state, _ = train_denoisers(starred, manager.get("train"), training.denoiser_epochs,
                                        config.seed, training.batch_size, training.lr)
    trained.name = f"{model.name}*"
    path = save_checkpoint(trained, str(out / "denoised.anmd"), state)

    test = manager.get("test")
    seeds = _seed_list(config)
    baseline = evaluate_model(strip_denoisers(model), test, batch_size=training.batch_size)["accuracy"]
    noisy_acc = summarize(evaluate_over_seeds(noisy, test, "noisy", seeds, training.batch_size))["mean"]
    denoised_acc = summarize(evaluate_over_seeds(trained, test, "noisy", seeds, training.batch_size))["mean"]
    overhead = denoiser_overhead_pct(trained)

    summary = pd.DataFrame([{
        "model": model.name,
        "baseline": _pct(baseline),
        "noisy": _pct(noisy_acc),
        "denoised": _pct(denoised_acc),
        "overhead_pct": round(overhead, 2),
    }], columns=SUMMARY_COLUMNS)
    write_csv(summary, out / "summary.csv", config.seed)
    registry.register("denoised", path, config.seed,
                      {"baseline": baseline, "noisy": noisy_acc, "denoised": denoised_acc,
                       "overhead_pct": overhead})
    print(summary.to_string(index=False))
    return 0


def _functional_check(model: ModelGraph, config: ExperimentConfig) -> pd.DataFrame:
    """Run every attached block through the fixed-point DCU on one test image.

    The float reference shares the DCU's quantized weights and LFSR draws, so
    ``max_lsb_err`` only measures activation requantization and must stay
    within ``lsb_bound``.
    """
    image = DatasetManager(config).get("test").images[:1]
    mode = "noisy" if model.noise_spec is not None else "clean"
    _, tape = forward(model, image, mode=mode, rng=RngState(seed=config.seed), record=True)

    cfg = config.hw
    q = QFormat(frac_bits=cfg.frac_bits)
    rows = []
    for index in sorted(model.attachments):
        activation = tape.outputs[index].detach()
        if index in tape.noise:
            activation = activation + tape.noise[index]
        x_q = quantize(activation, q)

        bank = LfsrBank.from_master_seed(config.seed + index, cfg.num_cancel_lanes)
        eps = bank.clone().z1(x_q.raw.size, q, cfg.lut_bits).reshape(x_q.shape) / q.scale
        qden = quantize_denoiser(model.attachments[index], q)
        x_hat, phases = dcu_run(qden, x_q, cfg, bank)
        with torch.no_grad():
            reference, _, _ = denoiser_forward(dequantize(x_q).double(),
                                               dequantize_denoiser(qden, model.attachments[index]),
                                               torch.from_numpy(eps))
        error = (dequantize(x_hat).double() - reference).abs().max().item()
        rows.append({"layer": model.layers[index].label, "elements": x_q.raw.size,
                     "cycles": sum(c for _, c in phases), "max_abs_err": error,
                     "max_lsb_err": error * q.scale,
                     "lsb_bound": float(requantization_bound(qden, eps).max())})
    return pd.DataFrame(rows, columns=["layer", "elements", "cycles", "max_abs_err", "max_lsb_err", "lsb_bound"])


def cmd_hw_sim(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out = _output_dir(config)
    registry = ArtifactRegistry(str(out))
    model = None
    if args.model or (not args.shape_table and config.backbone.kind == "small_cnn"):
        model, _ = load_checkpoint(_resolve_model(args, registry, "denoised"))
        table = shape_table_from_model(model, _input_hw(config))
        attachments: Dict[str, float] = model_attachment_ratios(model)
    else:
        table = load_shape_table(args.shape_table or config.backbone.shape_table)
        names = [name.strip() for name in (args.attach or "").split(",") if name.strip()]
        attachments = {name: config.placement.ratio for name in names}

    report = build_cycle_report(table, attachments, config.hw)
    report.to_csv(str(out / "cycles.csv"), seed=config.seed)
    write_csv(report.layer_frame(), out / "layer_cycles.csv", config.seed)
    totals = report.totals()

    if args.functional:
        if model is None or not model.attachments:
            raise ConfigError("--functional needs a model with denoisers (--model)")
        write_csv(_functional_check(model, config), out / "hw_functional.csv", config.seed)

    registry.register("hw", str(out / "cycles.csv"), config.seed, totals)
    latency_us = totals["total_cycles"] / config.hw.clock_mhz
    print(f"baseline={totals['baseline_cycles']} denoiser={totals['denoiser_cycles']} cycles, "
          f"overhead={totals['overhead_pct']:.2f}%, latency={latency_us:.1f} us")
    return 0


def cmd_report(args: argparse.Namespace, config: ExperimentConfig) -> int:
    directory = Path(args.dir or config.output_dir)
    text = render_report(str(directory))
    (directory / "report.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_dump_luts(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out_dir = args.out or str(Path(config.output_dir) / "luts")
    for name, path in dump_luts(out_dir, config.hw.lut_bits).items():
        print(f"{name}: {path}")
    return 0


COMMANDS = {
    "prepare-data": cmd_prepare_data,
    "train-backbone": cmd_train_backbone,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "plan": cmd_plan,
    "train-denoiser": cmd_train_denoiser,
    "hw-sim": cmd_hw_sim,
    "report": cmd_report,
    "dump-luts": cmd_dump_luts,
}
