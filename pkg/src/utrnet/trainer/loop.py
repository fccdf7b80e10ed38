"""Training loop: forward, CTC, backward, clip, AdaDelta."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from ..ctc import ctc_loss_tensor, greedy_decode
from ..data import CharSet, Sample, pad_batch, to_network_input
from ..exceptions import ContractError, DataValidationError, NumericError
from ..metrics import char_accuracy
from ..model import ModelConfig, UTRNet, build_model
from ..tensor import Tensor, no_grad, precision
from .checkpoint import save_checkpoint
from .optim import AdaDelta, clip_gradients

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 32
    clip: float = 5.0
    max_iter: int = 3000
    eval_every: int = 100
    seed: int = 0
    lr: float = 1.0
    rho: float = 0.95
    eps: float = 1e-6
    target_accuracy: Optional[float] = None  # stop early once reached
    dtype: str = "float32"
    model: ModelConfig = field(default_factory=ModelConfig)

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.clip <= 0:
            raise ContractError(f"clip must be > 0, got {self.clip}")
        if self.max_iter < 0 or self.eval_every < 1:
            raise ContractError("max_iter must be >= 0 and eval_every >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ContractError(f"dtype must be float32 or float64, got {self.dtype!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d


@dataclass
class TrainResult:
    model: UTRNet
    charset: CharSet
    losses: List[float]
    evals: List[Tuple[int, float]]
    best_accuracy: float
    best_iter: int
    iterations: int


class PreparedSet:
    """Network-ready images and encoded targets for a list of samples."""

    def __init__(self, samples: Sequence[Sample], charset: CharSet, height: int, rtl: bool):
        self.images = [to_network_input(s.image, height, rtl) for s in samples]
        self.texts = [s.transcript for s in samples]
        self.targets = [charset.encode(t) for t in self.texts]

    def __len__(self) -> int:
        return len(self.images)

    def batch(self, idx: Sequence[int], width_multiple: int, dtype) -> Tuple[np.ndarray, np.ndarray, list]:
        arr, widths = pad_batch([self.images[i] for i in idx], width_multiple, dtype=dtype)
        return arr, widths, [self.targets[i] for i in idx]


def decode_batch(model: UTRNet, images: np.ndarray, widths: np.ndarray) -> List[List[int]]:
    with no_grad():
        log_probs, lengths = model(Tensor(images), widths)
    lp = log_probs.data
    return [greedy_decode(lp[: lengths[i], i, :]) for i in range(lp.shape[1])]


def evaluate(model: UTRNet, data: PreparedSet, charset: CharSet, batch_size: int = 32) -> float:
    was_training = model.training
    model.eval()
    dtype = next(iter(model.parameters())).dtype
    preds: List[str] = []
    for start in range(0, len(data), batch_size):
        idx = list(range(start, min(start + batch_size, len(data))))
        images, widths, _ = data.batch(idx, model.width_multiple, dtype)
        preds.extend(charset.decode(p) for p in decode_batch(model, images, widths))
    model.train(was_training)
    return char_accuracy(zip(preds, data.texts))


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start : start + batch_size].tolist()


def train(
    config: TrainConfig,
    samples: Sequence[Sample],
    charset: CharSet,
    val_samples: Optional[Sequence[Sample]] = None,
    out_dir=None,
    log_file: Optional[TextIO] = None,
    callback: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Train a fresh model; evaluates on ``val_samples`` (or the training set).

    With ``out_dir`` the best-accuracy checkpoint is written to
    ``out_dir/best.ckpt`` and the final weights to ``out_dir/last.ckpt``.
    """
    config.validate()
    if not samples:
        raise DataValidationError("training set is empty")
    dtype = np.dtype(config.dtype)
    mcfg = config.model
    with precision(dtype):
        model = build_model(mcfg, len(charset))
    model.astype(dtype)
    train_set = PreparedSet(samples, charset, mcfg.height, mcfg.rtl)
    val_set = PreparedSet(val_samples, charset, mcfg.height, mcfg.rtl) if val_samples else train_set
    optimizer = AdaDelta(model.parameters(), lr=config.lr, rho=config.rho, eps=config.eps)
    shuffle_rng = np.random.default_rng([config.seed, 0])
    dropout_rng = np.random.default_rng([config.seed, 1])
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    losses: List[float] = []
    evals: List[Tuple[int, float]] = []
    best_acc, best_iter = -np.inf, 0
    batches = _batches(len(train_set), config.batch_size, shuffle_rng)
    it = 0
    with precision(dtype):
        model.train()
        while it < config.max_iter:
            idx = next(batches)
            images, widths, targets = train_set.batch(idx, model.width_multiple, dtype)
            optimizer.zero_grad()
            log_probs, lengths = model(Tensor(images), widths, dropout_rng)
            try:
                loss = ctc_loss_tensor(log_probs, targets, lengths)
            except NumericError as exc:
                raise NumericError(f"iteration {it + 1}: {exc}; dataset indices {idx}") from None
            value = float(np.asarray(loss.data).reshape(-1)[0])
            if not np.isfinite(value):
                raise NumericError(f"iteration {it + 1}: non-finite loss {value}; dataset indices {idx}")
            loss.backward()
            norm = clip_gradients(model.parameters(), config.clip)
            if not np.isfinite(norm):
                raise NumericError(f"iteration {it + 1}: non-finite gradient norm; dataset indices {idx}")
            optimizer.step()
            it += 1
            losses.append(value)
            if callback is not None:
                callback(it, value)
            acc_field = ""
            if it % config.eval_every == 0 or it == config.max_iter:
                acc = evaluate(model, val_set, charset, config.batch_size)
                evals.append((it, acc))
                acc_field = f"{acc:.6f}"
                if acc > best_acc:
                    best_acc, best_iter = acc, it
                    if out is not None:
                        save_checkpoint(out / "best.ckpt", model, charset, {"iteration": it, "accuracy": acc})
            if log_file is not None:
                log_file.write(f"{it}\t{value:.6f}\t{acc_field}\n")
                log_file.flush()
            log.debug("iter %d loss %.4f %s", it, value, acc_field)
            if config.target_accuracy is not None and acc_field and best_acc >= config.target_accuracy:
                break
    model.eval()
    if out is not None:
        save_checkpoint(out / "last.ckpt", model, charset, {"iteration": it})
    return TrainResult(model, charset, losses, evals, float(best_acc), best_iter, it)
