"""scikit-learn style wrapper around training and decoding."""

from __future__ import annotations

from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .ctc import beam_decode, greedy_decode
from .data import CharSet, Sample, pad_batch, to_network_input
from .metrics import char_accuracy
from .model import ModelConfig
from .tensor import Tensor, no_grad, precision
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train
from .validation import check_charset_covers, check_images, check_transcripts


class UTRNetRecognizer(BaseEstimator):
    """Text-line recognizer: images in, transcripts out.

    ``X`` is a sequence of 2-D grayscale images (dark ink on a light
    background; floats in [0, 1] or uint8) of any width.  ``y`` is a sequence
    of transcripts.  The charset is derived from ``y`` unless given.
    """

    def __init__(
        self,
        backbone: str = "unet",
        preset: str = "tiny",
        hidden_size: int = 32,
        dropout_passes: int = 5,
        drop_fraction: float = 0.5,
        height: int = 32,
        rtl: bool = True,
        batch_size: int = 32,
        max_iter: int = 3000,
        eval_every: int = 100,
        clip: float = 5.0,
        lr: float = 1.0,
        rho: float = 0.95,
        eps: float = 1e-6,
        target_accuracy: Optional[float] = None,
        dtype: str = "float32",
        charset: Optional[str] = None,
        random_state: int = 0,
    ):
        self.backbone = backbone
        self.preset = preset
        self.hidden_size = hidden_size
        self.dropout_passes = dropout_passes
        self.drop_fraction = drop_fraction
        self.height = height
        self.rtl = rtl
        self.batch_size = batch_size
        self.max_iter = max_iter
        self.eval_every = eval_every
        self.clip = clip
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.target_accuracy = target_accuracy
        self.dtype = dtype
        self.charset = charset
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        model = ModelConfig(
            backbone=self.backbone,
            preset=self.preset,
            hidden_size=self.hidden_size,
            dropout_passes=self.dropout_passes,
            drop_fraction=self.drop_fraction,
            height=self.height,
            rtl=self.rtl,
            seed=self.random_state,
        )
        return TrainConfig(
            batch_size=self.batch_size,
            clip=self.clip,
            max_iter=self.max_iter,
            eval_every=self.eval_every,
            seed=self.random_state,
            lr=self.lr,
            rho=self.rho,
            eps=self.eps,
            target_accuracy=self.target_accuracy,
            dtype=self.dtype,
            model=model,
        )

    def fit(self, X, y, X_val=None, y_val=None) -> "UTRNetRecognizer":
        images = check_images(X)
        texts = check_transcripts(y, len(images))
        charset = CharSet(list(self.charset)) if self.charset is not None else CharSet.from_texts(texts)
        check_charset_covers(charset, texts)
        samples = [Sample(f"#{i}", im, t) for i, (im, t) in enumerate(zip(images, texts))]
        val = None
        if X_val is not None:
            v_images = check_images(X_val)
            v_texts = check_transcripts(y_val, len(v_images))
            check_charset_covers(charset, v_texts)
            val = [Sample(f"#v{i}", im, t) for i, (im, t) in enumerate(zip(v_images, v_texts))]
        result = train(self._train_config(), samples, charset, val)
        self.model_ = result.model
        self.charset_ = charset
        self.n_iter_ = result.iterations
        self.loss_curve_ = result.losses
        self.eval_history_ = result.evals
        self.best_accuracy_ = result.best_accuracy
        return self

    def _log_probs(self, X) -> List[np.ndarray]:
        check_is_fitted(self, "model_")
        images = check_images(X)
        cfg = self.model_.config
        dtype = next(iter(self.model_.parameters())).dtype
        prepared = [to_network_input(im, cfg.height, cfg.rtl) for im in images]
        out: List[np.ndarray] = []
        self.model_.eval()
        with precision(dtype), no_grad():
            for start in range(0, len(prepared), self.batch_size):
                chunk = prepared[start : start + self.batch_size]
                batch, widths = pad_batch(chunk, self.model_.width_multiple, dtype=dtype)
                lp, lengths = self.model_(Tensor(batch), widths)
                out.extend(lp.data[: lengths[i], i, :].copy() for i in range(len(chunk)))
        return out

    def predict_log_proba(self, X) -> List[np.ndarray]:
        """Per-line ``(T_i, K + 1)`` log-probabilities; the last column is the blank."""
        return self._log_probs(X)

    def predict(self, X, beam_width: Optional[int] = None) -> List[str]:
        """Greedy decoding by default; prefix beam search when ``beam_width`` is set."""
        decode = greedy_decode if beam_width is None else (lambda lp: beam_decode(lp, beam_width))
        return [self.charset_.decode(decode(lp)) for lp in self._log_probs(X)]

    def score(self, X, y) -> float:
        preds = self.predict(X)
        return char_accuracy(zip(preds, check_transcripts(y, len(preds))))

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        save_checkpoint(path, self.model_, self.charset_, {"estimator": self.get_params()})

    @classmethod
    def load(cls, path) -> "UTRNetRecognizer":
        model, charset, meta = load_checkpoint(path)
        params = dict(meta.get("extra", {}).get("estimator", {}))
        valid = cls().get_params()
        est = cls(**{k: v for k, v in params.items() if k in valid})
        est.model_ = model
        est.charset_ = charset
        return est
