"""Command-line entry point: ``utrnet {generate,train,eval,predict,experiment-dots}``.

Failures print one line to stderr starting with an error code and exit
nonzero: ``E_USAGE`` (2), ``E_DATA`` (3) or ``E_NUMERIC`` (4).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from threadpoolctl import threadpool_limits

from . import config as cfgmod
from .ctc import beam_decode, greedy_decode
from .data import load_dataset, pad_batch, read_image, to_network_input
from .exceptions import CheckpointError, ContractError, DataValidationError, DimensionError, NumericError
from .metrics import EvalReport
from .synthgen import GlyphAtlas, desk_atlas, generate_dataset
from .tensor import Tensor, no_grad, precision
from .trainer import load_checkpoint, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _shared(p: argparse.ArgumentParser, out_required: bool) -> None:
    p.add_argument("--config", metavar="PATH", help="config file with [section] key = value entries")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", metavar="DIR", required=out_required, help="output directory")
    p.add_argument("--threads", type=int, default=1, metavar="N", help="BLAS threads (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="utrnet", description="Synthetic text-line data, training and recognition.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="render a synthetic line dataset")
    _shared(g, out_required=True)
    g.add_argument("--n", type=int, default=512, help="number of lines (default 512)")
    g.add_argument("--atlas", metavar="DIR", help="glyph atlas directory (default: built-in desk atlas)")

    t = sub.add_parser("train", help="train a recognizer on a dataset directory")
    _shared(t, out_required=True)
    t.add_argument("--data", required=True, metavar="DIR", help="training dataset directory")
    t.add_argument("--val", metavar="DIR", help="validation dataset (default: the training set)")
    t.add_argument("--backbone", choices=["unet", "hrnet", "lowres-baseline"])
    t.add_argument("--preset", choices=["micro", "tiny", "full"])
    t.add_argument("--max-iter", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--eval-every", type=int)
    t.add_argument("--target-accuracy", type=float)
    t.add_argument("--dtype", choices=["float32", "float64"])

    e = sub.add_parser("eval", help="character accuracy on a labeled dataset")
    _shared(e, out_required=False)
    e.add_argument("--data", required=True, metavar="DIR", help="labeled dataset directory")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint", metavar="PATH", help="decode the dataset with this model")
    src.add_argument("--predictions", metavar="TSV", help="'<path>\\t<transcript>' file of predictions")
    e.add_argument("--beam", type=int, metavar="N", help="prefix beam search width (default greedy)")

    pr = sub.add_parser("predict", help="transcribe images")
    _shared(pr, out_required=False)
    pr.add_argument("--checkpoint", required=True, metavar="PATH")
    pr.add_argument("--images", required=True, metavar="PATH", help="image file or directory")
    pr.add_argument("--beam", type=int, metavar="N", help="prefix beam search width (default greedy)")
    pr.add_argument("--batch-size", type=int, default=16)

    x = sub.add_parser("experiment-dots", help="high-resolution vs low-resolution dot discrimination")
    _shared(x, out_required=True)
    x.add_argument("--seeds", help="comma-separated seeds (default 0,1,2)")
    x.add_argument("--n-train", type=int)
    x.add_argument("--n-test", type=int)
    x.add_argument("--max-iter", type=int)
    x.add_argument("--batch-size", type=int)
    x.add_argument("--max-words", type=int, help="words per line (default 1)")
    x.add_argument("--highres-backbone", choices=["unet", "hrnet"])
    return parser


# ---------------------------------------------------------------------------


def _decoder(beam: Optional[int]):
    if beam is None:
        return greedy_decode
    if beam < 1:
        raise ContractError(f"--beam must be >= 1, got {beam}")
    return lambda lp: beam_decode(lp, beam)


def transcribe(checkpoint, images: Sequence, beam: Optional[int] = None, batch_size: int = 16) -> List[str]:
    """Decode raw ``(H, W)`` images with a saved model."""
    model, charset, _ = load_checkpoint(checkpoint)
    decode = _decoder(beam)
    cfg = model.config
    dtype = next(iter(model.parameters())).dtype
    prepared = [to_network_input(im, cfg.height, cfg.rtl) for im in images]
    out: List[str] = []
    with precision(dtype), no_grad():
        for start in range(0, len(prepared), batch_size):
            chunk = prepared[start : start + batch_size]
            batch, widths = pad_batch(chunk, model.width_multiple, dtype=dtype)
            lp, lengths = model(Tensor(batch), widths)
            out.extend(charset.decode(decode(lp.data[: lengths[i], i, :])) for i in range(len(chunk)))
    return out


def _read_tsv(path) -> List[Tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise DataValidationError(f"{path}:{lineno}: expected '<path>\\t<transcript>'")
            rows.append((parts[0], parts[1]))
    return rows


def _list_images(target: Path) -> List[Path]:
    if target.is_file():
        return [target]
    if not target.is_dir():
        raise DataValidationError(f"no such image file or directory: {target}")
    labels = target / "labels.tsv"
    if labels.exists():
        return [target / rel for rel, _ in _read_tsv(labels)]
    files = sorted(p for p in target.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise DataValidationError(f"no images found in {target}")
    return files


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    sections = cfgmod.read_config(args.config)
    synth = cfgmod.synth_config(sections)
    seed = args.seed if args.seed is not None else 0
    if args.n < 1:
        raise ContractError(f"--n must be >= 1, got {args.n}")
    atlas = GlyphAtlas.load(args.atlas) if args.atlas else desk_atlas()
    out = generate_dataset(args.out, args.n, synth, seed=seed, atlas=atlas)
    cfgmod.write_effective_config(
        out / "effective.cfg",
        {
            "synth": cfgmod.flat_fields(synth, skip=("augmentation",)),
            "augment": cfgmod.flat_fields(synth.augmentation),
            "run": {"n": args.n, "seed": seed, "atlas": atlas.name},
        },
    )
    print(f"wrote {args.n} lines to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    sections = cfgmod.read_config(args.config)
    cfgmod.merge(sections, "model", {"backbone": args.backbone, "preset": args.preset})
    cfgmod.merge(
        sections,
        "train",
        {
            "max_iter": args.max_iter,
            "batch_size": args.batch_size,
            "eval_every": args.eval_every,
            "target_accuracy": args.target_accuracy,
            "dtype": args.dtype,
            "seed": args.seed,
        },
    )
    if args.seed is not None:
        cfgmod.merge(sections, "model", {"seed": args.seed})
    tcfg = cfgmod.train_config(sections)
    tcfg.validate()
    samples, charset = load_dataset(args.data)
    val = None
    if args.val:
        val, val_charset = load_dataset(args.val)
        if val_charset != charset:
            raise DataValidationError(f"validation charset differs from training charset ({args.val})")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_effective_config(
        out / "effective.cfg",
        {
            "model": cfgmod.flat_fields(tcfg.model),
            "train": cfgmod.flat_fields(tcfg, skip=("model",)),
            "run": {"data": args.data, "val": args.val or "", "threads": args.threads},
        },
    )
    with open(out / "train.log", "w", encoding="utf-8") as log:
        result = train(tcfg, samples, charset, val, out_dir=out, log_file=log)
    print(f"iterations\t{result.iterations}")
    print(f"best_accuracy\t{result.best_accuracy!r}\t(iteration {result.best_iter})")
    print(f"checkpoint\t{out / 'best.ckpt'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    samples, charset = load_dataset(args.data)
    gts = [s.transcript for s in samples]
    if args.checkpoint:
        model_charset = load_checkpoint(args.checkpoint)[1]
        if model_charset != charset:
            raise CheckpointError(f"checkpoint charset does not match {args.data}/charset.txt")
        preds = transcribe(args.checkpoint, [s.image for s in samples], args.beam)
    else:
        table = dict(_read_tsv(args.predictions))
        missing = [s.path for s in samples if s.path not in table]
        if missing:
            raise DataValidationError(f"predictions missing for {len(missing)} images, first: {missing[0]}")
        preds = [table[s.path] for s in samples]
    report = EvalReport.from_pairs(list(zip(preds, gts)))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.tsv").write_text(report.to_tsv(), encoding="utf-8")
        (out / "predictions.tsv").write_text(
            "".join(f"{s.path}\t{p}\n" for s, p in zip(samples, preds)), encoding="utf-8"
        )
    sys.stdout.write(report.to_tsv())
    print(f"accuracy\t{report.accuracy!r}")
    return EXIT_OK


def cmd_predict(args) -> int:
    root = Path(args.images)
    files = _list_images(root)
    for f in files:
        if not f.exists():
            raise DataValidationError(f"image not found: {f}")
    images = [read_image(f) for f in files]
    preds = transcribe(args.checkpoint, images, args.beam, args.batch_size)
    base = root if root.is_dir() else root.parent
    lines = [f"{f.relative_to(base).as_posix()}\t{p}\n" for f, p in zip(files, preds)]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "predictions.tsv").write_text("".join(lines), encoding="utf-8")
    sys.stdout.write("".join(lines))
    return EXIT_OK


def cmd_experiment_dots(args) -> int:
    from .experiments import run_dots_experiment

    sections = cfgmod.read_config(args.config)
    cfgmod.merge(
        sections,
        "experiment",
        {
            "seeds": args.seeds,
            "n_train": args.n_train,
            "n_test": args.n_test,
            "max_iter": args.max_iter,
            "batch_size": args.batch_size,
            "max_words": args.max_words,
            "highres_backbone": args.highres_backbone,
        },
    )
    if args.seed is not None and args.seeds is None:
        cfgmod.merge(sections, "experiment", {"seeds": args.seed})
    settings = cfgmod.experiment_settings(sections)
    base = cfgmod.train_config(sections)
    synth = cfgmod.synth_config(sections)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_effective_config(
        out / "effective.cfg",
        {
            "experiment": settings,
            "model": cfgmod.flat_fields(base.model),
            "train": cfgmod.flat_fields(base, skip=("model",)),
            "synth": cfgmod.flat_fields(synth, skip=("augmentation",)),
            "augment": cfgmod.flat_fields(synth.augmentation),
        },
    )
    with open(out / "train.log", "w", encoding="utf-8") as log:
        payload = run_dots_experiment(out, base_train=base, synth=synth, log_file=log, **settings)
    sys.stdout.write((out / "report.tsv").read_text(encoding="utf-8"))
    s = payload["summary"]
    print(f"dot_wins\t{s['dot_wins']}/{s['seeds']}\tdirection_holds\t{s['direction_holds']}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "experiment-dots": cmd_experiment_dots,
}


def _fail(code: str, status: int, message: str) -> int:
    print(f"{code}: {' '.join(str(message).split())}", file=sys.stderr)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
    except UsageError as exc:
        return _fail("E_USAGE", EXIT_USAGE, exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](args)
    except (ContractError, DimensionError) as exc:
        return _fail("E_USAGE", EXIT_USAGE, exc)
    except (DataValidationError, CheckpointError, OSError) as exc:
        return _fail("E_DATA", EXIT_DATA, exc)
    except (NumericError, FloatingPointError) as exc:
        return _fail("E_NUMERIC", EXIT_NUMERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
