"""Command line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Stdout carries
requested data (or emitted artifact paths); diagnostics go to stderr.
Every randomized subcommand takes an explicit --seed. Train options
resolve as: built-in defaults (or --preset) < --config JSON < flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .corpus import SynthConfig, load_corpus, load_stats, synth_corpus
from .errors import ScrapsError
from .evaluation import (
    emit_report,
    length_profile,
    retrieve_topk,
    robustness_sweep,
    score_audio_pair,
    sensitivity_sweep,
)
from .features import FeatureConfig, featurize, load_wav, standardize
from .smel import read_smel, write_smel
from .training import (
    TrainConfig,
    desk_model_config,
    desk_synth_config,
    desk_train_config,
    fit,
    load_checkpoint,
)
from .vocab import load_vocab

log = logging.getLogger(__name__)


@dataclass
class CommandResult:
    exit_code: int
    artifacts: list[str]


def _int_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return int(parts[0]), int(parts[1])


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p]


def _int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scraps",
        description="Dual phonetic/acoustic encoders with a contrastive "
        "embedding space: corpus synthesis, training, and the "
        "corruption evaluation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth-corpus", help="generate a seeded synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--preset", choices=["desk"], default=None)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--n-utterances", type=int, default=None)
    p.add_argument("--dev-count", type=int, default=None,
                   help="split off this many utterances into manifest_dev.jsonl")
    p.add_argument("--seq-len", type=_int_pair, default=None, metavar="LO,HI")
    p.add_argument("--frames-per-phoneme", type=_int_pair, default=None, metavar="LO,HI")
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--speaker-bias-sigma", type=float, default=None)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("featurize", help="WAV (16 kHz mono PCM) to SMEL log-mels")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train the dual encoders")
    p.add_argument("--corpus", default=None,
                   help="corpus dir with manifest_train.jsonl/manifest_dev.jsonl")
    p.add_argument("--train-manifest", default=None)
    p.add_argument("--dev-manifest", default=None)
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--preset", choices=["desk"], default=None)
    p.add_argument("--config", default=None, help="JSON config file (defaults < file < flags)")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--grad-clip", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    for name in ("d-model", "n-layers", "n-heads", "d-embed",
                 "max-phonemes", "max-frames"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--share-integrator", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--use-integrator", action=argparse.BooleanOptionalAction,
                   default=None)
    p.set_defaults(func=cmd_train)

    for name in ("eval-sensitivity", "eval-robustness"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} sweep over corruption amounts")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--manifest", required=True)
        p.add_argument("--method", required=True,
                       choices=["substitute", "gaussian", "mix"])
        p.add_argument("--amounts", required=True, type=_float_list,
                       metavar="A1,A2,...")
        p.add_argument("--seed", required=True, type=int)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--format", choices=["json", "csv", "tsv-plot"], default="json")
        if name == "eval-robustness":
            p.add_argument("--chunk", type=int, default=128)
            p.add_argument("--bootstrap", type=int, default=1000)
            p.set_defaults(func=cmd_eval_robustness)
        else:
            p.set_defaults(func=cmd_eval_sensitivity)

    p = sub.add_parser("retrieve", help="rank manifest mels against one phoneme query")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query-index", type=int, default=None)
    group.add_argument("--query-id", default=None)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("score-pair", help="text-free correspondence of two SMEL files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mel-a", required=True)
    p.add_argument("--mel-b", required=True)
    p.add_argument("--stats", required=True, help="stats.json used at training time")
    p.set_defaults(func=cmd_score_pair)

    p = sub.add_parser("length-profile", help="score distribution by phoneme count")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--buckets", required=True, type=_int_list, metavar="E0,E1,...")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_length_profile)

    p = sub.add_parser("export-backbone", help="export one transformer backbone")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--which", required=True, choices=["phonetic", "acoustic"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_backbone)

    return parser


def cmd_synth_corpus(args) -> list[str]:
    if args.preset == "desk":
        base = desk_synth_config(seed=args.seed)
        dev_count = 256
    else:
        base = SynthConfig(seed=args.seed)
        dev_count = 0
    overrides = {}
    for attr, flag in (
        ("vocab_size", args.vocab_size),
        ("n_utterances", args.n_utterances),
        ("seq_len_range", args.seq_len),
        ("frames_per_phoneme_range", args.frames_per_phoneme),
        ("noise_sigma", args.noise_sigma),
        ("speaker_bias_sigma", args.speaker_bias_sigma),
    ):
        if flag is not None:
            overrides[attr] = flag
    if args.dev_count is not None:
        dev_count = args.dev_count
    config = SynthConfig(**{**base.__dict__, **overrides})
    manifests = synth_corpus(config, args.out, dev_count=dev_count)
    out = Path(args.out)
    artifacts = [str(m) for m in manifests] + [
        str(out / "stats.json"), str(out / "vocab.txt"),
    ]
    for a in artifacts:
        print(a)
    return artifacts


def cmd_featurize(args) -> list[str]:
    samples, rate = load_wav(args.wav)
    mel = featurize(samples, rate, FeatureConfig())
    write_smel(mel, args.out)
    print(args.out)
    return [args.out]


def _load_train_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_train(args) -> list[str]:
    if args.corpus:
        train_manifest = str(Path(args.corpus) / "manifest_train.jsonl")
        dev_manifest = str(Path(args.corpus) / "manifest_dev.jsonl")
    else:
        if not (args.train_manifest and args.dev_manifest):
            raise ValueError("provide --corpus or both --train-manifest/--dev-manifest")
        train_manifest = args.train_manifest
        dev_manifest = args.dev_manifest
    vocab = load_vocab(Path(train_manifest).parent / "vocab.txt")

    if args.preset == "desk":
        config = desk_train_config(
            train_manifest, dev_manifest, args.checkpoint_dir, seed=args.seed,
            model_overrides={"vocab_size": vocab.size},
        )
    else:
        config = TrainConfig(
            model=desk_model_config(vocab_size=vocab.size),
            train_manifest=train_manifest,
            dev_manifest=dev_manifest,
            checkpoint_dir=args.checkpoint_dir,
            seed=args.seed,
        )
    cfg_dict = config.to_dict()
    if args.config:
        file_cfg = _load_train_json(args.config)
        model_part = file_cfg.pop("model", {})
        cfg_dict.update(file_cfg)
        cfg_dict["model"].update(model_part)
    flag_map = {
        "max_steps": args.max_steps, "batch_size": args.batch_size, "lr": args.lr,
        "eval_every": args.eval_every, "grad_clip": args.grad_clip,
        "weight_decay": args.weight_decay, "seed": args.seed,
        "checkpoint_dir": args.checkpoint_dir,
        "train_manifest": train_manifest, "dev_manifest": dev_manifest,
    }
    model_flag_map = {
        "d_model": args.d_model, "n_layers": args.n_layers, "n_heads": args.n_heads,
        "d_embed": args.d_embed, "dropout": args.dropout,
        "temperature": args.temperature, "max_phonemes": args.max_phonemes,
        "max_frames": args.max_frames, "share_integrator": args.share_integrator,
        "use_integrator": args.use_integrator,
    }
    cfg_dict.update({k: v for k, v in flag_map.items() if v is not None})
    cfg_dict["model"].update(
        {k: v for k, v in model_flag_map.items() if v is not None}
    )
    config = TrainConfig.from_dict(cfg_dict)
    _, history = fit(config, resume_from=args.resume)
    artifacts = [history["final_checkpoint"],
                 str(Path(config.checkpoint_dir) / "metrics.jsonl")]
    for a in artifacts:
        print(a)
    return artifacts


def _load_model(checkpoint_path):
    state = load_checkpoint(checkpoint_path)
    return state.params, state.config.model


def cmd_eval_sensitivity(args) -> list[str]:
    params, model = _load_model(args.checkpoint)
    corpus = load_corpus(args.manifest)
    report = sensitivity_sweep(
        params, model, corpus, args.method, args.amounts, args.seed, n=args.n,
    )
    path = emit_report(report, args.format, args.out)
    print(str(path))
    return [str(path)]


def cmd_eval_robustness(args) -> list[str]:
    params, model = _load_model(args.checkpoint)
    corpus = load_corpus(args.manifest)
    report = robustness_sweep(
        params, model, corpus, args.method, args.amounts, args.seed,
        n=args.n, chunk=args.chunk, bootstrap=args.bootstrap,
    )
    path = emit_report(report, args.format, args.out)
    print(str(path))
    return [str(path)]


def cmd_retrieve(args) -> list[str]:
    params, model = _load_model(args.checkpoint)
    corpus = load_corpus(args.manifest)
    if args.query_id is not None:
        try:
            qi = corpus.ids.index(args.query_id)
        except ValueError:
            raise ValueError(f"query id {args.query_id!r} not in manifest") from None
    else:
        qi = args.query_index
        if not 0 <= qi < len(corpus):
            raise ValueError(f"query index {qi} out of range [0, {len(corpus)})")
    ranked = retrieve_topk(
        corpus.phonemes[qi], corpus.mels, params, model, k=args.k
    )
    for rank, (idx, prob) in enumerate(ranked, 1):
        print(f"{rank}\t{idx}\t{corpus.ids[idx]}\t{prob:.6f}")
    return []


def cmd_score_pair(args) -> list[str]:
    params, model = _load_model(args.checkpoint)
    stats = load_stats(args.stats)
    mel_a = standardize(read_smel(args.mel_a), stats)
    mel_b = standardize(read_smel(args.mel_b), stats)
    score = score_audio_pair(mel_a.data, mel_b.data, params, model)
    print(f"{score:.6f}")
    return []


def cmd_length_profile(args) -> list[str]:
    params, model = _load_model(args.checkpoint)
    corpus = load_corpus(args.manifest)
    profile = length_profile(
        params, model, corpus, args.buckets, n=args.n, seed=args.seed
    )
    text = json.dumps(profile, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
        return [args.out]
    sys.stdout.write(text)
    return []


def cmd_export_backbone(args) -> list[str]:
    from .checkpoint import export_backbone

    params, model = _load_model(args.checkpoint)
    export_backbone(params, model, args.which, args.out)
    print(args.out)
    return [args.out]


def dispatch(argv) -> CommandResult:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CommandResult(int(exc.code or 0), [])
    try:
        artifacts = args.func(args) or []
    except (ScrapsError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandResult(1, [])
    return CommandResult(0, artifacts)


def main() -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    sys.exit(dispatch(sys.argv[1:]).exit_code)


if __name__ == "__main__":
    main()
