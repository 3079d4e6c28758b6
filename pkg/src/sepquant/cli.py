"""Command line pipeline: analyze -> allocate -> simulate.

Every command exits 0 on success and prints one machine-parsable
``error: <category>: <message>`` line to stderr on failure. Exit codes:
1 invalid input, 2 I/O or container errors, 3 infeasible budget. Reports are
JSON with stable key order and no timestamps, so re-running a command on
unchanged inputs reproduces byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from sepquant import container
from sepquant.allocator import (
    BOPS_BUDGET,
    SIZE_BUDGET,
    BitConfig,
    Budget,
    InfeasibleBudgetError,
    LayerProfile,
    brute_force_allocation,
    importance,
    model_size,
    solve_lp,
)
from sepquant.model import evaluate_config, load_model
from sepquant.separability import pool_features, score_layer

MB = 1e6  # decimal megabytes, matching standard model-size reporting
GIGA = 1e9


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _load_json(path):
    return json.loads(Path(path).read_text())


def _load_profiles(path) -> list[LayerProfile]:
    raw = _load_json(path)
    profiles = []
    for entry in raw["layers"]:
        profiles.append(
            LayerProfile(
                layer_id=entry["layer_id"],
                param_count=int(entry["param_count"]),
                mac_count=int(entry.get("mac_count", 0)),
                pinned_bits=entry.get("pinned_bits"),
            )
        )
    return profiles


def _parse_bit_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        b_min, b_max = int(lo), int(hi)
    except ValueError:
        raise ValueError(f"--bits expects MIN:MAX, got {text!r}") from None
    if b_min < 1 or b_min > b_max:
        raise ValueError(f"bad bit range {text!r}")
    return b_min, b_max


def _budget_from_args(args) -> Budget:
    if args.budget_mb is not None:
        return Budget(kind=SIZE_BUDGET, limit=args.budget_mb * MB, activation_bits=args.act_bits)
    if args.budget_bytes is not None:
        return Budget(kind=SIZE_BUDGET, limit=args.budget_bytes, activation_bits=args.act_bits)
    return Budget(kind=BOPS_BUDGET, limit=args.budget_bops, activation_bits=args.act_bits)


def cmd_analyze(features_path, out_path, samples: int | None = None, seed: int = 0) -> dict:
    """Score every layer in a feature dump and write the report."""
    tensors, metadata = container.read_container(features_path)
    by_name = {t.name: t for t in tensors}
    layer_order = metadata.get("layer_order", [t.name for t in tensors])
    class_ids = metadata.get("class_ids", [])
    missing = [l for l in layer_order if l not in by_name]
    if missing:
        raise ValueError(f"feature dump missing layer tensor(s): {', '.join(missing)}")

    image_count = by_name[layer_order[0]].shape[0] if layer_order else 0
    if samples is not None and samples < 1:
        raise ValueError(f"--samples must be >= 1, got {samples}")
    if samples is not None and samples < image_count:
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(image_count, size=samples, replace=False))
    else:
        picked = np.arange(image_count)

    layers = []
    for layer_id in layer_order:
        fmap = by_name[layer_id].data[picked]
        ids = picked.tolist()
        classes = [class_ids[i] for i in ids] if class_ids else []
        score = score_layer(pool_features(fmap, layer_id, image_ids=ids, class_ids=classes))
        layers.append(
            {
                "layer_id": layer_id,
                "alpha": score.alpha,
                "word_occurrences": score.words.total_words,
                "feature_count": int(score.tf.shape[0]),
                "image_count": int(score.tf.shape[1]),
            }
        )

    report = {"sample_count": int(len(picked)), "layers": layers}
    _write_json(out_path, report)
    return report


def _pin_first_last(profiles: list[LayerProfile], pin_bits: int) -> list[LayerProfile]:
    pinned = list(profiles)
    for idx in (0, len(pinned) - 1):
        p = pinned[idx]
        if p.pinned_bits is None:
            pinned[idx] = LayerProfile(
                layer_id=p.layer_id,
                param_count=p.param_count,
                mac_count=p.mac_count,
                pinned_bits=pin_bits,
            )
    return pinned


def cmd_allocate(
    scores_path,
    profile_path,
    out_path,
    budget: Budget,
    bit_range: tuple[int, int],
    beta: float = 1.0,
    pin_first_last: bool = True,
    pin_bits: int = 8,
) -> BitConfig:
    """Solve the bit allocation for a scores report and model profile."""
    scores = _load_json(scores_path)
    profiles = _load_profiles(profile_path)
    score_ids = [l["layer_id"] for l in scores["layers"]]
    profile_ids = [p.layer_id for p in profiles]
    if score_ids != profile_ids:
        raise ValueError(
            f"scores layers {score_ids} do not match profile layers {profile_ids}"
        )
    if pin_first_last and profiles:
        profiles = _pin_first_last(profiles, pin_bits)

    alphas = [l["alpha"] for l in scores["layers"]]
    theta = importance(alphas, beta)
    config = solve_lp(theta, profiles, budget, bit_range)

    payload = {
        "layer_ids": config.layer_ids,
        "bits": config.bits,
        "objective": config.objective,
        "relaxed_objective": config.relaxed_objective,
        "size_bytes": config.size_bytes,
        "bops": config.bops,
        "feasible": config.feasible,
        "budget_kind": budget.kind,
        "budget_limit": budget.limit,
        "activation_bits": budget.activation_bits,
        "bit_range": [bit_range[0], bit_range[1]],
        "beta": beta,
        "pinned": [p.pinned_bits for p in profiles],
    }
    _write_json(out_path, payload)
    print(
        f"objective {config.objective:.6f} (relaxed {config.relaxed_objective:.6f})"
        f"  size {config.size_bytes / MB:.6f} MB  bops {config.bops / GIGA:.6f} G"
    )
    return config


def cmd_simulate(model_path, config_path, dataset_path, out_path) -> dict:
    """Fake-quantize the model per the bit configuration and evaluate it."""
    config = _load_json(config_path)
    graph = load_model(model_path)
    tensors, _ = container.read_container(dataset_path)
    by_name = {t.name: t for t in tensors}
    for required in ("images", "labels"):
        if required not in by_name:
            raise ValueError(f"dataset container missing {required!r} tensor")
    images = by_name["images"].data
    labels = by_name["labels"].data.astype(np.int64)

    model_ids = [l.name for l in graph.quantizable_layers()]
    if config["layer_ids"] != model_ids:
        raise ValueError(
            f"bit config layers {config['layer_ids']} do not match model layers {model_ids}"
        )
    report = evaluate_config(
        graph,
        list(config["bits"]),
        images,
        labels,
        activation_bits=int(config.get("activation_bits", 8)),
    )
    payload = {
        "layer_ids": report.layer_ids,
        "bits": config["bits"],
        "per_layer_mse": report.per_layer_mse,
        "top1_accuracy": report.top1_accuracy,
        "size_bytes": report.size_bytes,
        "bops": report.bops,
        "activation_bits": int(config.get("activation_bits", 8)),
    }
    _write_json(out_path, payload)

    bits = config["bits"]
    w_bit = str(bits[0]) if len(set(bits)) == 1 else "mixed"
    print("W bit  A bit  Model Size (MB)  BOPs (G)  Top-1 (%)")
    print(
        f"{w_bit:>5}  {payload['activation_bits']:>5}  {report.size_bytes / MB:>15.6f}"
        f"  {report.bops / GIGA:>8.6f}  {report.top1_accuracy * 100:>9.2f}"
    )
    return payload


def cmd_pipeline(args) -> None:
    """analyze -> allocate -> simulate with all intermediate files written."""
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = "analyze"
    try:
        scores_path = out_dir / "scores.json"
        cmd_analyze(args.features, scores_path, samples=args.samples, seed=args.seed)
        stage = "allocate"
        config_path = out_dir / "bitconfig.json"
        cmd_allocate(
            scores_path,
            args.profile,
            config_path,
            budget=_budget_from_args(args),
            bit_range=_parse_bit_range(args.bits),
            beta=args.beta,
            pin_first_last=args.pin_first_last,
            pin_bits=args.pin_bits,
        )
        stage = "simulate"
        cmd_simulate(args.model, config_path, args.dataset, out_dir / "report.json")
    except Exception as exc:
        # Keep the exception type (it decides the exit code), note the stage.
        exc.pipeline_stage = stage
        raise


def _add_allocation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beta", type=float, default=1.0, help="importance exponent (default 1.0)")
    parser.add_argument("--bits", default="4:8", help="bit search range MIN:MAX (default 4:8)")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--budget-mb", type=float, help="weight size budget in megabytes (1e6 bytes)")
    group.add_argument("--budget-bytes", type=float, help="weight size budget in bytes")
    group.add_argument("--budget-bops", type=float, help="compute budget in bit operations")
    parser.add_argument("--act-bits", type=int, default=8, help="fixed activation bits (default 8)")
    parser.add_argument(
        "--pin-first-last",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="pin the first and last quantizable layers (default on)",
    )
    parser.add_argument("--pin-bits", type=int, default=8, help="bit-width for pinned layers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepquant",
        description="Class-separability driven mixed-precision bit allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="score class separability of a feature dump")
    p.add_argument("features", help="feature dump (.fmap)")
    p.add_argument("--out", required=True, help="scores report path (JSON)")
    p.add_argument("--samples", type=int, default=None, help="subsample this many images")
    p.add_argument("--seed", type=int, default=0, help="subsampling seed")

    p = sub.add_parser("allocate", help="solve the bit allocation LP")
    p.add_argument("scores", help="scores report from analyze")
    p.add_argument("profile", help="model profile (JSON)")
    p.add_argument("--out", required=True, help="bit configuration path (JSON)")
    _add_allocation_flags(p)

    p = sub.add_parser("simulate", help="evaluate a bit configuration on a dataset")
    p.add_argument("model", help="model description (JSON)")
    p.add_argument("config", help="bit configuration from allocate")
    p.add_argument("dataset", help="dataset container (.fmap) with images and labels")
    p.add_argument("--out", required=True, help="evaluation report path (JSON)")

    p = sub.add_parser("pipeline", help="analyze, allocate and simulate in one run")
    p.add_argument("--features", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_allocation_flags(p)

    return parser


def _describe(exc: Exception) -> str:
    stage = getattr(exc, "pipeline_stage", None)
    return f"[{stage}] {exc}" if stage else str(exc)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "analyze":
            cmd_analyze(args.features, args.out, samples=args.samples, seed=args.seed)
        elif args.command == "allocate":
            cmd_allocate(
                args.scores,
                args.profile,
                args.out,
                budget=_budget_from_args(args),
                bit_range=_parse_bit_range(args.bits),
                beta=args.beta,
                pin_first_last=args.pin_first_last,
                pin_bits=args.pin_bits,
            )
        elif args.command == "simulate":
            cmd_simulate(args.model, args.config, args.dataset, args.out)
        elif args.command == "pipeline":
            cmd_pipeline(args)
    except InfeasibleBudgetError as exc:
        print(f"error: infeasible: {_describe(exc)}", file=sys.stderr)
        return 3
    except container.ContainerError as exc:
        print(f"error: container: {_describe(exc)}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {_describe(exc)}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: invalid: {_describe(exc)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
