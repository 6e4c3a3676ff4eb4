"""Command-line interface: build-corpus, train, generate, evaluate."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape

from .beat import load_tracker
from .config import PACKAGE_NAME, VERSION, load_config, setup_logging, validate_config
from .dsp import load_wav, mix, save_wav
from .errors import ConfigError, DrumAccompanimentError, PipelineError
from .metrics import evaluate_run, render_report, write_report
from .pipeline import (
    build_corpus,
    cut_clips,
    generate,
    load_bundle,
    load_corpus,
    record_metrics,
    save_corpus,
    train_all,
    train_stage,
)
from .schema import Architecture, BeatLevel, CliConfig, Split, Stage, VariantSpec

logger = logging.getLogger(__name__)

TEST_CLIPS_DIR = "test_clips"


def _variant(config: CliConfig, name: Optional[str], beat_level: Optional[str]) -> VariantSpec:
    """Variant from --variant (architecture, display name or slug) and --beat-level."""
    try:
        if name is not None and name not in {a.value for a in Architecture}:
            variant = VariantSpec.from_name(name)
            if beat_level is not None and BeatLevel(beat_level) != variant.beat_level:
                raise ConfigError(f"--beat-level {beat_level} contradicts variant {name!r}", field_path="variant")
            return variant
        return VariantSpec(
            architecture=name or config.variant.architecture,
            beat_level=beat_level or config.variant.beat_level,
        )
    except ValidationError as exc:
        raise ConfigError(exc.errors()[0]["msg"], field_path="variant") from exc
    except ValueError as exc:
        raise ConfigError(str(exc), field_path="variant") from exc


# =============================================================================
# COMMANDS
# =============================================================================


def cmd_build_corpus(args: argparse.Namespace, config: CliConfig) -> None:
    seed = config.seed if args.seed is None else args.seed
    if args.stems is not None:
        stems_root = Path(args.stems)
        if not stems_root.is_dir():
            raise PipelineError(f"stems directory not found: {stems_root}", stage="build_corpus")
        source = sorted(p for p in stems_root.iterdir() if p.is_dir())
    else:
        source = config.synthetic.model_copy(update={"n_recordings": args.synthetic or config.synthetic.n_recordings})
    corpus = build_corpus(source, seed)
    out_dir = Path(args.out or config.paths.corpus_dir)
    manifest = save_corpus(corpus, out_dir)

    for rec_id in corpus.splits[Split.TEST]:
        for clip in cut_clips(corpus.recording(rec_id), config.dsp):
            save_wav(clip.drumless, out_dir / TEST_CLIPS_DIR / "drumless" / f"{clip.clip_id}.wav", subtype="FLOAT")
            save_wav(clip.drums, out_dir / TEST_CLIPS_DIR / "drums" / f"{clip.clip_id}.wav", subtype="FLOAT")
    sizes = ", ".join(f"{split.value} {len(ids)}" for split, ids in corpus.splits.items())
    logger.info("Wrote %s (%s)", manifest, sizes)


def cmd_train(args: argparse.Namespace, config: CliConfig) -> None:
    variant = _variant(config, args.variant, args.beat_level)
    corpus = load_corpus(args.corpus or config.paths.corpus_dir)
    run_dir = Path(args.run_dir or config.paths.run_dir)
    if args.stage == "all":
        if args.resume is not None:
            raise ConfigError("--resume needs a single --stage", field_path="stage")
        manifest = train_all(corpus, config, run_dir, variant)
        logger.info("Trained %s into %s", variant.name, run_dir)
        for name, path in manifest.checkpoints.items():
            logger.info("  %s: %s", name, path)
        return
    resume = Path(args.resume) if args.resume else None
    written = train_stage(Stage(args.stage), corpus, config, run_dir, variant, resume)
    for name, path in written.items():
        logger.info("%s: %s", name, path)


def cmd_generate(args: argparse.Namespace, config: CliConfig) -> None:
    variant = _variant(config, args.variant, args.beat_level)
    drumless = load_wav(args.input)
    bundle = load_bundle(args.run_dir or config.paths.run_dir, variant, config)
    drums = generate(drumless, bundle, config, config.seed if args.seed is None else args.seed)
    save_wav(drums, args.out)
    logger.info("Wrote %s (%s, %.1f s)", args.out, variant.name, drums.duration)
    if args.mix:
        save_wav(mix(drumless, drums), args.mix)
        logger.info("Wrote mix %s", args.mix)


def _wav_files(directory: str) -> dict[str, Path]:
    root = Path(directory)
    if not root.is_dir():
        raise PipelineError(f"directory not found: {root}", stage="evaluate")
    return {p.stem: p for p in sorted(root.glob("*.wav"))}


def cmd_evaluate(args: argparse.Namespace, config: CliConfig) -> None:
    references, generated = _wav_files(args.test), _wav_files(args.generated)
    if len(references) != len(generated):
        raise PipelineError(f"{len(references)} test clips but {len(generated)} generated clips", stage="evaluate")
    if set(references) != set(generated):
        missing = sorted(set(references) ^ set(generated))
        raise PipelineError(f"clip names differ between directories: {', '.join(missing[:5])}", stage="evaluate")
    tracker = load_tracker(args.tracker)
    report = evaluate_run(
        [(name, load_wav(path)) for name, path in references.items()],
        [load_wav(generated[name]) for name in references],
        tracker,
        config.dsp,
        config.beat_decoder,
    )
    write_report(report, args.out)
    render_report(report)
    if args.run_dir:
        variant = _variant(config, args.variant, args.beat_level)
        record_metrics(args.run_dir, variant, report)
        logger.info("Recorded %s metrics in %s", variant.name, args.run_dir)


# =============================================================================
# ENTRY POINT
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (defaults to the built-in full-size settings).")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="Override a config field, e.g. lm.chunk=8.")
    common.add_argument("--log-level", help="Logging level (overrides DRUM_ACCOMPANIMENT_LOG_LEVEL).")

    variant = argparse.ArgumentParser(add_help=False)
    variant.add_argument("--variant", help="seq2seq, decoder_only, or a full variant name such as 'seq2seq+beat (low)'.")
    variant.add_argument("--beat-level", choices=[level.value for level in BeatLevel], help="Beat condition level.")

    parser = argparse.ArgumentParser(prog=PACKAGE_NAME, description="Generate drum tracks for drumless music.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build-corpus", parents=[common], help="Build a paired drumless/drum corpus.")
    source = build.add_mutually_exclusive_group(required=True)
    source.add_argument("--stems", help="Directory with one sub-directory of stem WAVs (including drums.wav) per recording.")
    source.add_argument("--synthetic", type=int, metavar="N", help="Render N synthetic recordings.")
    build.add_argument("--out", help="Corpus directory (defaults to paths.corpus_dir).")
    build.add_argument("--seed", type=int, help="Split/synthesis seed (defaults to the config seed).")

    train = commands.add_parser("train", parents=[common, variant], help="Train one stage or the whole model.")
    train.add_argument("--stage", default="all", choices=["all", *(stage.value for stage in Stage)])
    train.add_argument("--resume", help="Checkpoint to continue training from.")
    train.add_argument("--corpus", help="Corpus directory (defaults to paths.corpus_dir).")
    train.add_argument("--run-dir", help="Checkpoint directory (defaults to paths.run_dir).")

    gen = commands.add_parser("generate", parents=[common, variant], help="Generate drums for a drumless WAV.")
    gen.add_argument("--input", required=True, help="Drumless WAV file.")
    gen.add_argument("--out", required=True, help="Output drum WAV file.")
    gen.add_argument("--mix", help="Also write the input mixed with the generated drums here.")
    gen.add_argument("--seed", type=int, help="Sampling seed (defaults to the config seed).")
    gen.add_argument("--run-dir", help="Checkpoint directory (defaults to paths.run_dir).")

    evaluate = commands.add_parser("evaluate", parents=[common, variant], help="Score generated drums against references.")
    evaluate.add_argument("--test", required=True, help="Directory of reference drum WAVs.")
    evaluate.add_argument("--generated", required=True, help="Directory of generated drum WAVs with matching names.")
    evaluate.add_argument("--tracker", required=True, help="Drum tracker checkpoint.")
    evaluate.add_argument("--out", required=True, help="Report file (tab-separated).")
    evaluate.add_argument("--run-dir", help="Also record the mean metrics of the variant in this run's manifest.")
    return parser


COMMANDS = {
    "build-corpus": cmd_build_corpus,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    stderr = Console(stderr=True)
    try:
        config = load_config(args.config, args.overrides)
        validate_config(config)
        COMMANDS[args.command](args, config)
    except DrumAccompanimentError as exc:
        stderr.print(f"[red]error[/red] {escape(str(exc))}", highlight=False, soft_wrap=True)
        return 1
    except FileNotFoundError as exc:
        stderr.print(f"[red]error[/red] {escape(f'[io] {exc}')}", highlight=False, soft_wrap=True)
        return 1
    except ValueError as exc:
        # pydantic.ValidationError lands here too
        stage = args.command.replace("-", "_")
        stderr.print(f"[red]error[/red] {escape(f'[{stage}] {exc}')}", highlight=False, soft_wrap=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
