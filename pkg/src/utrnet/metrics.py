"""Edit-distance based character accuracy and per-character breakdowns.

Transcripts are compared codepoint by codepoint; no Unicode normalisation is
applied here.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

from .exceptions import ContractError

Pair = Tuple[Sequence, Sequence]


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _table(gt: Sequence, pred: Sequence) -> List[List[int]]:
    m, n = len(gt), len(pred)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (gt[i - 1] != pred[j - 1]))
    return d


def align(gt: Sequence, pred: Sequence) -> List[Tuple[int, int]]:
    """Optimal alignment as (gt_index | -1, pred_index | -1) pairs.

    Backtrace ties prefer the diagonal (match/substitution), then insertion
    (an extra predicted symbol), then deletion (a missed ground-truth symbol).
    """
    d = _table(gt, pred)
    i, j = len(gt), len(pred)
    steps = []
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (gt[i - 1] != pred[j - 1]):
            steps.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif j > 0 and d[i][j] == d[i][j - 1] + 1:
            steps.append((-1, j - 1))
            j -= 1
        else:
            steps.append((i - 1, -1))
            i -= 1
    return steps[::-1]


def char_accuracy(pairs: Iterable[Pair]) -> float:
    """Corpus-level ``(sum len(GT) - sum ED(Pred, GT)) / sum len(GT)``.

    Can be negative when predictions are much longer than the ground truth.
    """
    total = 0
    dist = 0
    for pred, gt in pairs:
        total += len(gt)
        dist += edit_distance(pred, gt)
    if total == 0:
        raise ContractError("character accuracy needs a corpus with non-empty ground truth")
    return (total - dist) / total


def per_char_accuracy(pairs: Iterable[Pair]) -> Dict:
    hits, totals = _char_counts(pairs)
    return {ch: hits[ch] / totals[ch] for ch in totals}


def _char_counts(pairs: Iterable[Pair]) -> Tuple[Counter, Counter]:
    hits: Counter = Counter()
    totals: Counter = Counter()
    for pred, gt in pairs:
        totals.update(gt)
        for gi, pj in align(gt, pred):
            if gi >= 0 and pj >= 0 and gt[gi] == pred[pj]:
                hits[gt[gi]] += 1
    return hits, totals


@dataclass
class EvalReport:
    total_gt_length: int
    total_edit_distance: int
    accuracy: float
    char_hits: Dict = field(default_factory=dict)
    char_totals: Dict = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Pair]) -> "EvalReport":
        pairs = list(pairs)
        total = sum(len(gt) for _, gt in pairs)
        dist = sum(edit_distance(p, g) for p, g in pairs)
        if total == 0:
            raise ContractError("evaluation corpus has no ground-truth characters")
        hits, totals = _char_counts(pairs)
        return cls(total, dist, (total - dist) / total, dict(hits), dict(totals))

    def per_char(self) -> Dict:
        return {ch: self.char_hits.get(ch, 0) / n for ch, n in self.char_totals.items()}

    def to_tsv(self) -> str:
        """One row per character (sorted by codepoint) plus a summary row."""
        lines = ["char\thits\ttotal\taccuracy"]
        for ch in sorted(self.char_totals):
            hit = self.char_hits.get(ch, 0)
            n = self.char_totals[ch]
            lines.append(f"{_show(ch)}\t{hit}\t{n}\t{hit / n:.6f}")
        lines.append(
            f"#summary\t{self.total_gt_length - self.total_edit_distance}\t"
            f"{self.total_gt_length}\t{self.accuracy:.6f}"
        )
        return "\n".join(lines) + "\n"


def _show(ch) -> str:
    return {" ": "<space>", "\t": "<tab>"}.get(ch, str(ch))
