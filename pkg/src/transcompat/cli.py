"""Command-line entry point: ``synth``, ``train``, and ``eval`` subcommands.

Wires the generator, trainer, and evaluator into reproducible runs:

* Every artifact-producing command writes a run manifest next to its
  outputs (command, effective flags, seed, input/output paths, SHA-256
  digests, wall-clock duration), so identical flags and inputs can be
  checked for identical artifact digests.
* ``--config FILE`` loads flag values from a JSON object (keys are flag
  names with dashes replaced by underscores); flags given explicitly on
  the command line override file values, which override built-in defaults.
* Exit codes: 0 success, 1 runtime failure (missing or malformed files,
  incompatible checkpoint), 2 usage error (unknown flags, invalid values).
* Logs go to standard error; machine-readable output goes to files only.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .corpus import CorpusError, load_corpus
from .evaluator import EvalConfig, evaluate, write_report
from .models import (
    MODEL_KINDS,
    CheckpointError,
    TrainConfig,
    load_model,
    save_model,
)
from .sampling import build_eval_candidates
from .synth import SynthConfig, generate_synthetic
from .trainer import train
from .utils import atomic_write_json, sha256_file

_MODALITY_ALIASES = {"v": "visual", "t": "textual"}

_SYNTH_DEFAULTS = {
    "categories": 4,
    "items_per_cat": 200,
    "pairs_per_relation": 600,
    "latent_dim": 8,
    "feature_dim": 32,
    "noise": 0.05,
    "seed": 0,
    "threads": 1,
}

_TRAIN_DEFAULTS = {
    "model": "transnfcm",
    "modalities": "visual,textual",
    "dim": 128,
    "hidden": None,
    "epochs": 30,
    "batch": 128,
    "lr": 0.001,
    "lr_drop_every": 10,
    "lr_drop_factor": 10.0,
    "momentum": 0.9,
    "margin": 1.0,
    "dropout": 0.5,
    "encoder_lr_scale": 1.0,
    "negatives_per_side": 1,
    "untied_relations": False,
    "mask_l1": 5e-4,
    "val_negatives": 100,
    "val_mode": "open",
    "keep_best": True,
    "seed": 0,
    "threads": 1,
}

_EVAL_DEFAULTS = {
    "negatives": 100,
    "k": "5,10,20,40",
    "split": "test",
    "mode": "open",
    "part": "all",
    "seed": 0,
    "threads": 1,
}


class UsageError(Exception):
    """Invalid flag or config value; maps to exit code 2."""


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _parse_modalities(raw: str) -> tuple[str, ...]:
    names = [_MODALITY_ALIASES.get(part.strip(), part.strip()) for part in raw.split(",")]
    if any(not name for name in names):
        raise UsageError(f"--modalities has an empty entry: '{raw}'")
    return tuple(names)


def _parse_ks(raw: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise UsageError(f"--k must be a comma-separated list of integers, got '{raw}'")
    return ks


def _coerce(key: str, value, default):
    """Coerce a config-file value to the flag's type; reject mismatches."""
    if value is None or default is None or isinstance(default, str):
        return value
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError
            return value
        if isinstance(default, int):
            if int(value) != value:
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"config value for '{key}' must be a {type(default).__name__}, got {value!r}")
    return value


def _effective_flags(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults, --config file values, and explicit flags (in that order)."""
    merged = dict(defaults)
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise RuntimeError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise RuntimeError(f"config file is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object of flag values")
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise UsageError(f"config file has unknown keys: {', '.join(unknown)}")
        merged.update({k: _coerce(k, v, defaults[k]) for k, v in loaded.items()})
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if merged.get("threads") is not None and merged["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return merged


def _expand_inputs(paths: list[Path]) -> dict[str, str]:
    """Digest input files; directories expand to their files (manifests excluded)."""
    digests: dict[str, str] = {}
    for path in paths:
        if path.is_dir():
            for child in sorted(path.iterdir()):
                if child.is_file() and not child.name.endswith("manifest.json"):
                    digests[str(child)] = sha256_file(child)
        else:
            digests[str(path)] = sha256_file(path)
    return digests


def _write_manifest(
    manifest_path: Path,
    command: str,
    flags: dict,
    inputs: list[Path],
    outputs: list[Path],
    started: float,
) -> None:
    manifest = {
        "command": command,
        "flags": flags,
        "seed": flags.get("seed"),
        "inputs": _expand_inputs(inputs),
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "duration_seconds": round(time.time() - started, 3),
    }
    atomic_write_json(manifest_path, manifest)
    _log(f"manifest written to {manifest_path}")


def cmd_synth(args: argparse.Namespace) -> int:
    started = time.time()
    flags = _effective_flags(args, _SYNTH_DEFAULTS)
    flags["out"] = str(args.out)
    try:
        config = SynthConfig(
            num_categories=flags["categories"],
            items_per_category=flags["items_per_cat"],
            latent_dim=flags["latent_dim"],
            feature_dim=flags["feature_dim"],
            noise_sigma=flags["noise"],
            pairs_per_relation=flags["pairs_per_relation"],
            seed=flags["seed"],
        )
        config.validate()
        out_dir = Path(generate_synthetic(config, args.out))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))
    outputs = sorted(p for p in out_dir.iterdir() if p.is_file() and p.name != "run_manifest.json")
    _log(f"synthetic corpus written to {out_dir} ({len(outputs)} files)")
    _write_manifest(out_dir / "run_manifest.json", "synth", flags, [], outputs, started)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.time()
    flags = _effective_flags(args, _TRAIN_DEFAULTS)
    flags["data"] = str(args.data)
    flags["out"] = str(args.out)
    try:
        config = TrainConfig(
            model=flags["model"],
            modalities=_parse_modalities(flags["modalities"]),
            embed_dim=flags["dim"],
            hidden_dim=flags["hidden"],
            epochs=flags["epochs"],
            batch_size=flags["batch"],
            lr=flags["lr"],
            lr_drop_every=flags["lr_drop_every"],
            lr_drop_factor=flags["lr_drop_factor"],
            momentum=flags["momentum"],
            margin=flags["margin"],
            dropout=flags["dropout"],
            encoder_lr_scale=flags["encoder_lr_scale"],
            negatives_per_side=flags["negatives_per_side"],
            untied_relations=bool(flags["untied_relations"]),
            mask_l1=flags["mask_l1"],
            val_negatives=flags["val_negatives"],
            val_mode=flags["val_mode"],
            keep_best=bool(flags["keep_best"]),
            seed=flags["seed"],
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))

    corpus = load_corpus(args.data)
    for warning in corpus.warnings:
        _log(f"corpus warning: {warning}")
    missing = [m for m in config.modalities if m not in corpus.features]
    if missing:
        raise RuntimeError(
            f"corpus at {args.data} has no features for modalities: {', '.join(missing)}"
        )

    def log_epoch(stats: dict) -> None:
        val = "n/a" if stats["val_auc"] is None else f"{stats['val_auc']:.4f}"
        _log(
            f"epoch {stats['epoch']:3d}  lr {stats['lr']:.2e}  "
            f"loss {stats['loss']:.4f}  active {stats['active_fraction']:.3f}  "
            f"val_auc {val}"
        )

    result = train(corpus, config, on_epoch=log_epoch)
    ckpt_path = Path(args.out)
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, ckpt_path)
    history_path = ckpt_path.with_name(ckpt_path.name + ".history.json")
    atomic_write_json(
        history_path,
        {
            "history": result.history,
            "best_epoch": result.best_epoch,
            "best_val_auc": result.best_val_auc,
        },
    )
    best = "n/a" if result.best_val_auc is None else f"{result.best_val_auc:.4f}"
    _log(f"checkpoint written to {ckpt_path} (best val AUC {best} at epoch {result.best_epoch})")
    _write_manifest(
        ckpt_path.with_name(ckpt_path.name + ".manifest.json"),
        "train",
        flags,
        [Path(args.data)],
        [ckpt_path, history_path],
        started,
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.time()
    flags = _effective_flags(args, _EVAL_DEFAULTS)
    flags["data"] = str(args.data)
    flags["checkpoint"] = str(args.checkpoint)
    flags["report"] = str(args.report)
    try:
        eval_config = EvalConfig(
            ks=_parse_ks(flags["k"]),
            mode=flags["mode"],
            part=flags["part"],
            split=flags["split"],
        )
        if flags["negatives"] < 1:
            raise ValueError("--negatives must be >= 1")
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))

    corpus = load_corpus(args.data)
    for warning in corpus.warnings:
        _log(f"corpus warning: {warning}")
    model = load_model(args.checkpoint)
    for modality, dim in model.input_dims.items():
        if modality not in corpus.features:
            raise RuntimeError(
                f"checkpoint needs modality '{modality}' but the corpus has none"
            )
        if corpus.features[modality].dim != dim:
            raise RuntimeError(
                f"checkpoint expects {dim}-dim '{modality}' features, "
                f"corpus provides {corpus.features[modality].dim}-dim"
            )
    if eval_config.split not in corpus.splits:
        raise RuntimeError(f"corpus has no '{eval_config.split}' split")

    candidates = build_eval_candidates(
        corpus,
        model.table,
        eval_config.split,
        flags["negatives"],
        eval_config.mode,
        flags["seed"],
    )
    report = evaluate(model, corpus, candidates, eval_config)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, report_path)
    auc = "n/a" if report.auc_pct is None else f"{report.auc_pct:.1f}"
    _log(
        f"{report.model} on {report.split}/{report.mode}/{report.part}: "
        f"AUC {auc}%  queries {report.n_queries}  "
        f"skipped {report.n_skipped_unknown_relation} unknown-relation, "
        f"{report.n_skipped_no_negatives} empty"
    )
    _write_manifest(
        report_path.with_name(report_path.name + ".manifest.json"),
        "eval",
        flags,
        [Path(args.data), Path(args.checkpoint)],
        [report_path],
        started,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transcompat",
        description="Translation-based compatibility models: corpus synthesis, "
        "training, and ranking evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic corpus directory")
    synth.add_argument("--out", required=True, help="output corpus directory")
    synth.add_argument("--categories", type=int)
    synth.add_argument("--items-per-cat", type=int)
    synth.add_argument("--pairs-per-relation", type=int)
    synth.add_argument("--latent-dim", type=int)
    synth.add_argument("--feature-dim", type=int)
    synth.add_argument("--noise", type=float)
    synth.set_defaults(func=cmd_synth)

    trainp = sub.add_parser("train", help="train a model on a corpus directory")
    trainp.add_argument("--data", required=True, help="corpus directory")
    trainp.add_argument("--out", required=True, help="checkpoint output path")
    trainp.add_argument("--model", help=f"one of {', '.join(MODEL_KINDS)}")
    trainp.add_argument("--modalities", help="comma-separated (v,t = visual,textual)")
    trainp.add_argument("--dim", type=int, help="embedding dim per modality")
    trainp.add_argument("--hidden", type=int, help="optional hidden layer width")
    trainp.add_argument("--epochs", type=int)
    trainp.add_argument("--batch", type=int)
    trainp.add_argument("--lr", type=float)
    trainp.add_argument("--lr-drop-every", type=int)
    trainp.add_argument("--lr-drop-factor", type=float)
    trainp.add_argument("--momentum", type=float)
    trainp.add_argument("--margin", type=float)
    trainp.add_argument("--dropout", type=float)
    trainp.add_argument("--encoder-lr-scale", type=float)
    trainp.add_argument("--negatives-per-side", type=int)
    trainp.add_argument("--untied-relations", action=argparse.BooleanOptionalAction)
    trainp.add_argument("--mask-l1", type=float)
    trainp.add_argument("--val-negatives", type=int)
    trainp.add_argument("--val-mode", choices=("open", "known-target"))
    trainp.add_argument("--keep-best", action=argparse.BooleanOptionalAction)
    trainp.set_defaults(func=cmd_train)

    evalp = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    evalp.add_argument("--data", required=True, help="corpus directory")
    evalp.add_argument("--checkpoint", required=True, help="trained model checkpoint")
    evalp.add_argument("--report", required=True, help="report JSON output path")
    evalp.add_argument("--negatives", type=int, help="candidates per query")
    evalp.add_argument("--k", help="comma-separated Hit@K cutoffs")
    evalp.add_argument("--split", choices=("train", "val", "test"))
    evalp.add_argument("--mode", choices=("open", "known-target"))
    evalp.add_argument("--part", choices=("all", "global", "category"))
    evalp.set_defaults(func=cmd_eval)

    for sp in (synth, trainp, evalp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--config", help="JSON file of flag values (flags override)")
        sp.add_argument("--threads", type=int, help="worker cap (runs use at most this many)")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return 2
    except (CorpusError, CheckpointError, OSError, RuntimeError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
