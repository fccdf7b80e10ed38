"""Dot-discrimination comparison: high-resolution backbone vs a low-resolution baseline.

Both models get the same data, seed, iteration budget and optimizer settings.
Accuracy on a held-out set is split into two character groups: characters
that share a base shape with others and differ only by dots, and characters
whose base shape is unique.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO

from .data import load_dataset
from .metrics import EvalReport
from .synthgen import SynthConfig, desk_atlas, generate_dataset
from .trainer import PreparedSet, TrainConfig, decode_batch, train

GROUPS = ("dot", "unique")


@dataclass
class GroupScore:
    hits: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.hits / self.total if self.total else float("nan")


@dataclass
class ModelResult:
    seed: int
    backbone: str
    overall: float
    groups: Dict[str, GroupScore]
    per_char: Dict[str, float]


def group_scores(report: EvalReport, groups: Dict[str, Sequence[str]]) -> Dict[str, GroupScore]:
    out = {}
    for name, chars in groups.items():
        hits = sum(report.char_hits.get(c, 0) for c in chars)
        total = sum(report.char_totals.get(c, 0) for c in chars)
        out[name] = GroupScore(hits, total)
    return out


def _predict(model, data: PreparedSet, charset, batch_size: int) -> List[str]:
    model.eval()
    dtype = next(iter(model.parameters())).dtype
    preds: List[str] = []
    for start in range(0, len(data), batch_size):
        idx = list(range(start, min(start + batch_size, len(data))))
        images, widths, _ = data.batch(idx, model.width_multiple, dtype)
        preds.extend(charset.decode(p) for p in decode_batch(model, images, widths))
    return preds


def run_dots_experiment(
    out_dir,
    seeds: Sequence[int] = (0, 1, 2),
    n_train: int = 256,
    n_test: int = 128,
    max_iter: int = 3000,
    batch_size: int = 8,
    max_words: int = 1,
    highres_backbone: str = "unet",
    lowres_backbone: str = "lowres-baseline",
    base_train: Optional[TrainConfig] = None,
    synth: Optional[SynthConfig] = None,
    log_file: Optional[TextIO] = None,
) -> Dict:
    """Train both backbones per seed and archive ``report.tsv`` and ``report.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atlas = desk_atlas()
    groups = {"dot": atlas.dot_distinguished(), "unique": atlas.shape_unique()}
    synth = synth or SynthConfig()
    synth = dataclasses.replace(synth, max_words=max_words, min_words=min(synth.min_words, max_words))
    base = base_train or TrainConfig()
    results: List[ModelResult] = []
    for seed in seeds:
        train_dir = generate_dataset(out / f"data/seed{seed}/train", n_train, synth, seed=2 * seed, atlas=atlas)
        test_dir = generate_dataset(out / f"data/seed{seed}/test", n_test, synth, seed=2 * seed + 1, atlas=atlas)
        train_samples, charset = load_dataset(train_dir)
        test_samples, _ = load_dataset(test_dir)
        for backbone in (highres_backbone, lowres_backbone):
            cfg = dataclasses.replace(
                base,
                batch_size=batch_size,
                max_iter=max_iter,
                eval_every=max(max_iter, 1),
                seed=seed,
                target_accuracy=None,
                model=dataclasses.replace(base.model, backbone=backbone, seed=seed),
            )
            if log_file is not None:
                log_file.write(f"# seed {seed} backbone {backbone}\n")
            result = train(cfg, train_samples, charset, log_file=log_file)
            test = PreparedSet(test_samples, charset, cfg.model.height, cfg.model.rtl)
            preds = _predict(result.model, test, charset, batch_size)
            report = EvalReport.from_pairs(list(zip(preds, test.texts)))
            (out / f"eval_seed{seed}_{backbone}.tsv").write_text(report.to_tsv(), encoding="utf-8")
            results.append(
                ModelResult(seed, backbone, report.accuracy, group_scores(report, groups), report.per_char())
            )
    summary = summarize(results, highres_backbone, lowres_backbone)
    payload = {
        "settings": {
            "seeds": list(seeds),
            "n_train": n_train,
            "n_test": n_test,
            "max_iter": max_iter,
            "batch_size": batch_size,
            "max_words": max_words,
            "highres_backbone": highres_backbone,
            "lowres_backbone": lowres_backbone,
        },
        "groups": groups,
        "results": [
            {
                "seed": r.seed,
                "backbone": r.backbone,
                "overall": r.overall,
                "groups": {g: dataclasses.asdict(s) | {"accuracy": s.accuracy} for g, s in r.groups.items()},
                "per_char": r.per_char,
            }
            for r in results
        ],
        "summary": summary,
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    (out / "report.tsv").write_text(format_report(results), encoding="utf-8")
    return payload


def summarize(results: Sequence[ModelResult], highres: str, lowres: str) -> Dict:
    by_seed: Dict[int, Dict[str, ModelResult]] = {}
    for r in results:
        by_seed.setdefault(r.seed, {})[r.backbone] = r
    wins = 0
    for pair in by_seed.values():
        if pair[highres].groups["dot"].accuracy >= pair[lowres].groups["dot"].accuracy:
            wins += 1
    return {"dot_wins": wins, "seeds": len(by_seed), "direction_holds": wins * 2 > len(by_seed)}


def format_report(results: Sequence[ModelResult]) -> str:
    lines = ["seed\tbackbone\toverall\tdot_accuracy\tunique_accuracy\tdot_hits\tdot_total\tunique_hits\tunique_total"]
    for r in results:
        d, u = r.groups["dot"], r.groups["unique"]
        lines.append(
            f"{r.seed}\t{r.backbone}\t{r.overall:.6f}\t{d.accuracy:.6f}\t{u.accuracy:.6f}\t"
            f"{d.hits}\t{d.total}\t{u.hits}\t{u.total}"
        )
    return "\n".join(lines) + "\n"
