"""Analytic-versus-numeric gradient verification.

Builds a tiny float64 model, computes the joint loss's analytic gradients
through the hand-written backward pass, and compares every parameter
element against central finite differences.  The relative error uses a
small floor in the denominator so near-zero gradients are judged on an
absolute scale.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .. import util
from ..corpus import CLS, MASK as MASK_ID, PAD, SEP
from ..objectives import IGNORE_INDEX, Objective
from .config import ModelConfig, init_params
from .network import Batch, batch_losses

TINY_CONFIG = ModelConfig(
    vocab_size=16,
    max_len=8,
    d_model=8,
    n_layers=1,
    n_heads=2,
    d_ff=16,
    dropout=0.0,
    k_dtp=4,
    seed=7,
)


def _tiny_batch(objectives: frozenset[Objective]) -> Batch:
    # Two six-token rows, one ending in padding, so masking paths are hit.
    ids = np.array(
        [
            [CLS, 7, MASK_ID, 9, 10, SEP],
            [CLS, 11, 12, MASK_ID, SEP, PAD],
        ],
        dtype=np.int64,
    )
    batch = Batch(ids=ids)
    if objectives & {Objective.MLM, Objective.TAMLM}:
        labels = np.full_like(ids, IGNORE_INDEX)
        labels[0, 2] = 8
        labels[0, 4] = 10  # a kept-style position still carries its label
        labels[1, 3] = 13
        batch.mlm_labels = labels
    if Objective.DTP in objectives:
        batch.dtp_labels = np.array([1, 3], dtype=np.int64)
    if Objective.TIR in objectives:
        batch.slots = np.array(
            [
                [0, 1, 3, 1],
                [0, 3, 5, 0],
                [1, 1, 4, 1],
            ],
            dtype=np.int64,
        )
    return batch


def _loss_value(params, cfg, batch) -> float:
    parts, _ = batch_losses(params, cfg, batch, want_grads=False)
    return sum(ce / count for ce, count in parts.values())


def grad_check(
    objectives: Iterable[Objective] = (Objective.TAMLM, Objective.DTP),
    step: float = 1e-5,
    only: Optional[Iterable[str]] = None,
    config: ModelConfig = TINY_CONFIG,
    seed: int = 0,
) -> float:
    """Maximum relative error between analytic and central-difference gradients.

    Checks every element of every parameter tensor (or just the tensors
    named by `only`) through the mean-reduced joint loss of the given
    objective set.
    """
    objectives = frozenset(objectives)
    params = init_params(config, dtype=np.float64)
    # Nudge away from the symmetric init so gradients are generic.
    shake = util.rng_from(seed, "shake")
    for name, p in params.items():
        p += shake.normal(0.0, 0.01, size=p.shape)

    batch = _tiny_batch(objectives)
    _, analytic = batch_losses(params, config, batch, want_grads=True)

    names = sorted(params) if only is None else sorted(set(only))
    worst = 0.0
    for name in names:
        tensor = params[name]
        flat = tensor.reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + step
            hi = _loss_value(params, config, batch)
            flat[j] = keep - step
            lo = _loss_value(params, config, batch)
            flat[j] = keep
            numeric = (hi - lo) / (2.0 * step)
            denom = max(abs(grad_flat[j]), abs(numeric), 1e-4)
            worst = max(worst, abs(grad_flat[j] - numeric) / denom)
    return worst
