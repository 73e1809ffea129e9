"""Classification, domain-adversarial and student losses, plus their weighted sum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LOG_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    lam: float = 1.0   # teacher adversarial trade-off
    beta: float = 0.3  # student trade-off

    def __post_init__(self):
        if not (self.lam >= 0 and self.beta >= 0):
            raise ValueError(f"loss weights must be >= 0, got lambda={self.lam}, beta={self.beta}")


def _check_labels(logits: Tensor, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    k = logits.shape[1]
    if labels.shape != (logits.shape[0],):
        raise ValueError(f"need one label per row: {logits.shape[0]} rows, labels shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    return labels


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean of ``-log softmax(logits)[label]`` over the batch."""
    labels = _check_labels(logits, labels)
    return ad.neg(ad.mean(ad.take(ad.log_softmax(logits), labels)))


def source_cls_loss(logits: Tensor, labels) -> Tensor:
    return cross_entropy(logits, labels)


def student_loss(logits: Tensor, pseudo_labels) -> Tensor:
    return cross_entropy(logits, pseudo_labels)


def _safe_log(p: Tensor) -> Tensor:
    return ad.log(ad.clamp(p, LOG_EPS, 1.0))


def dann_domain_loss(ds: Tensor, dt: Tensor) -> Tensor:
    """``-mean(log ds) - mean(log(1 - dt))``; source is domain 1, target domain 0."""
    return ad.sub(ad.neg(ad.mean(_safe_log(ds))), ad.mean(_safe_log(ad.sub(1.0, dt))))


def domain_loss_from_logits(zs: Tensor, zt: Tensor) -> Tensor:
    """The same loss with ``ds = sigmoid(zs)``, ``dt = sigmoid(zt)``, evaluated on the logits.

    Equal to :func:`dann_domain_loss` away from saturation. A saturated
    discriminator still gets a gradient here, where the clamped version's
    gradient is exactly zero and D can never recover.
    """
    return ad.sub(ad.neg(ad.mean(ad.log_sigmoid(zs))), ad.mean(ad.log_sigmoid(ad.neg(zt))))


def cdan_domain_loss(hs_scores: Tensor, ht_scores: Tensor) -> Tensor:
    # same functional form; only the discriminator's input differs
    return dann_domain_loss(hs_scores, ht_scores)


def total_loss(lg1: Tensor, ld1: Tensor, lg2: Tensor | None, w: LossWeights) -> Tensor:
    """Surrogate minimized by one backward pass: ``lg1 + lam*ld1 + beta*lg2``.

    The domain term is added with a plus sign because the GRL in front of the
    discriminator already flips its gradient for everything upstream, so D
    descends on ``lam*ld1`` while F (and G for CDAN) ascend on it.
    """
    out = ad.add(lg1, ad.scale(ld1, w.lam))
    if lg2 is not None:
        out = ad.add(out, ad.scale(lg2, w.beta))
    return out


def reported_objective(lg1: float, ld1: float, lg2: float | None, w: LossWeights) -> float:
    """The overall objective as logged: ``lg1 - lam*ld1 + beta*lg2``."""
    value = float(lg1) - w.lam * float(ld1)
    if lg2 is not None:
        value += w.beta * float(lg2)
    return value
