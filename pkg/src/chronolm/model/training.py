"""Pretraining and fine-tuning loops, plus checkpoint-level inference helpers.

Loss normalization happens over whole gradient-accumulation groups: each
micro-batch backpropagates component sums divided by the group's total item
counts, so an accumulated step equals the step a single concatenated batch
would have taken.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .. import util
from ..corpus import CLS, PAD, SEP, Vocab, word_spans
from ..errors import LabelOutOfRange
from ..objectives import (
    IGNORE_INDEX,
    LabelSpace,
    Objective,
    PretrainExample,
    TirExample,
)
from ..temporal import TimePoint, render, truncate
from .checkpoint import EncoderCheckpoint
from .config import ModelConfig, TrainConfig, init_params
from .network import Batch, batch_losses, encoder_forward
from .optim import AdamState, adamw_step

LogRow = tuple[int, str, float]
Dataset = Union[
    Sequence[Union[PretrainExample, TirExample]],
    Callable[[int], Sequence[Union[PretrainExample, TirExample]]],
]


def _pad_rows(rows: list[list[int]], fill: int) -> np.ndarray:
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), fill, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def pretrain_batch(examples: Sequence[PretrainExample]) -> Batch:
    ids = _pad_rows([list(e.input_ids) for e in examples], PAD)
    labels = _pad_rows([list(e.mlm_labels) for e in examples], IGNORE_INDEX)
    dtp = np.array(
        [e.dtp_label if e.dtp_label is not None else -1 for e in examples],
        dtype=np.int64,
    )
    return Batch(ids=ids, mlm_labels=labels,
                 dtp_labels=dtp if (dtp >= 0).any() else None)


def tir_batch(examples: Sequence[TirExample]) -> Batch:
    ids = _pad_rows([list(e.input_ids) for e in examples], PAD)
    rows = [
        (i, s.boundary_left, s.boundary_right, s.label)
        for i, e in enumerate(examples)
        for s in e.slots
    ]
    slots = (np.array(rows, dtype=np.int64) if rows
             else np.zeros((0, 4), dtype=np.int64))
    return Batch(ids=ids, slots=slots)


def _chunks(seq: list, size: int) -> list[list]:
    return [seq[i: i + size] for i in range(0, len(seq), size)]


def _component_name(component: str, objectives: frozenset[Objective]) -> str:
    if component == "mlm" and Objective.TAMLM in objectives:
        return Objective.TAMLM.value
    return component


def _run_step(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    micro_batches: list[Batch],
    train_cfg: TrainConfig,
    state: AdamState,
    rng: np.random.Generator,
) -> dict[str, float]:
    """One optimizer step over an accumulation group of micro-batches."""
    denoms = {"mlm": 0, "dtp": 0, "tir": 0, "cls": 0}
    for b in micro_batches:
        for k, v in b.counts().items():
            denoms[k] += v
    denoms = {k: float(v) for k, v in denoms.items() if v}

    totals: dict[str, float] = {}
    accum: Optional[dict[str, np.ndarray]] = None
    for b in micro_batches:
        parts, grads = batch_losses(
            params, cfg, b, denoms=dict(denoms),
            train=True, rng=rng, want_grads=True,
        )
        for k, (ce_sum, _) in parts.items():
            totals[k] = totals.get(k, 0.0) + ce_sum
        if accum is None:
            accum = grads
        else:
            for name in accum:
                accum[name] += grads[name]
    adamw_step(params, accum, state, train_cfg)
    return {k: totals[k] / denoms[k] for k in totals}


def pretrain(
    dataset: Dataset,
    vocab: Vocab,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    seed: int = 0,
    initial: Optional[EncoderCheckpoint] = None,
) -> tuple[EncoderCheckpoint, list[LogRow]]:
    """Train the encoder on pre-built or per-epoch-built examples.

    dataset is either a fixed example list or a callable mapping an epoch
    number to that epoch's examples (fresh masking per epoch).  Zero epochs
    returns the initialization untouched.
    """
    if not train_cfg.objectives:
        raise ValueError("pretraining needs a non-empty objective set")
    if initial is not None:
        params = {k: p.copy() for k, p in initial.params.items()}
        model_cfg = initial.config
    else:
        params = init_params(model_cfg)
    state = AdamState.for_params(params)
    provider = dataset if callable(dataset) else (lambda _epoch: dataset)

    log: list[LogRow] = []
    step = 0
    for epoch in range(train_cfg.epochs):
        examples = list(provider(epoch))
        masked = [e for e in examples if isinstance(e, PretrainExample)]
        swapped = [e for e in examples if isinstance(e, TirExample)]

        order_rng = util.rng_from(seed, "order", epoch)
        streams: list[list[Batch]] = []
        for group, builder in ((masked, pretrain_batch), (swapped, tir_batch)):
            if not group:
                continue
            idx = order_rng.permutation(len(group))
            shuffled = [group[i] for i in idx]
            micro = [builder(c) for c in _chunks(shuffled, train_cfg.batch_size)]
            streams.append(_chunks(micro, train_cfg.grad_accumulation))

        drop_rng = util.rng_from(seed, "dropout", epoch)
        n_steps = max((len(s) for s in streams), default=0)
        for i in range(n_steps):
            group = [b for s in streams if i < len(s) for b in s[i]]
            losses = _run_step(params, model_cfg, group, train_cfg, state, drop_rng)
            step += 1
            for component in sorted(losses):
                log.append((step, _component_name(component, train_cfg.objectives),
                            losses[component]))
    ckpt = EncoderCheckpoint(model_cfg, params, vocab.content_hash(), vocab)
    return ckpt, log


@dataclass(frozen=True)
class LabeledExample:
    """A classification item: a text, its gold time, optional paired document."""

    text: str
    time: TimePoint
    doc_timestamp: Optional[TimePoint] = None
    doc_text: Optional[str] = None


def text_input_ids(
    text: str,
    vocab: Vocab,
    lowercase: bool = False,
    max_len: Optional[int] = None,
) -> tuple[int, ...]:
    """[CLS] text [SEP], truncated to max_len."""
    ids = [vocab.id_of(form) for form, _, _ in word_spans(text, lowercase)]
    if max_len is not None:
        ids = ids[: max_len - 2]
    return (CLS, *ids, SEP)


def labeled_input_ids(
    example: LabeledExample,
    vocab: Vocab,
    lowercase: bool = False,
    max_len: Optional[int] = None,
) -> tuple[int, ...]:
    """Assemble [CLS] text [SEP] (rendered timestamp + document) [SEP].

    Without a paired document this is just the delimited text.
    """
    first = [vocab.id_of(form) for form, _, _ in word_spans(example.text, lowercase)]
    if example.doc_text is None:
        seq = [CLS, *first, SEP]
    else:
        if example.doc_timestamp is None:
            raise ValueError("document text requires a document timestamp")
        stamp = [vocab.id_of(form) for form, _, _
                 in word_spans(render(example.doc_timestamp), lowercase)]
        doc = [vocab.id_of(form) for form, _, _
               in word_spans(example.doc_text, lowercase)]
        seq = [CLS, *first, SEP, *stamp, *doc, SEP]
    if max_len is not None and len(seq) > max_len:
        seq = seq[: max_len - 1] + [SEP]
    return tuple(seq)


def prepare_labeled(
    examples: Iterable[LabeledExample],
    space: LabelSpace,
    vocab: Vocab,
    lowercase: bool = False,
    max_len: Optional[int] = None,
) -> list[tuple[tuple[int, ...], int]]:
    return [
        (
            labeled_input_ids(e, vocab, lowercase, max_len),
            space.index_of(truncate(e.time, space.granularity)),
        )
        for e in examples
    ]


def finetune(
    checkpoint: EncoderCheckpoint,
    records: Sequence[tuple[Sequence[int], int]],
    n_classes: int,
    train_cfg: TrainConfig,
    seed: int = 0,
) -> tuple[EncoderCheckpoint, list[LogRow]]:
    """Train a classifier head (and the whole encoder under it).

    records are (input id sequence, class label) pairs; labels must fall in
    [0, n_classes).  Returns a checkpoint whose config carries k_cls.
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    for _, label in records:
        if not 0 <= label < n_classes:
            raise LabelOutOfRange(f"label {label} outside 0..{n_classes - 1}")
    cfg = dc_replace(checkpoint.config, k_cls=n_classes)
    params = {k: p.copy() for k, p in checkpoint.params.items()}
    dtype = params["emb.tok"].dtype
    head_rng = util.rng_from(seed, "cls-head")
    params["head.cls.w"] = head_rng.normal(
        0.0, 0.02, size=(cfg.d_model, n_classes)
    ).astype(dtype)
    params["head.cls.b"] = np.zeros(n_classes, dtype=dtype)

    state = AdamState.for_params(params)
    log: list[LogRow] = []
    step = 0
    for epoch in range(train_cfg.epochs):
        order = util.rng_from(seed, "order", epoch).permutation(len(records))
        shuffled = [records[i] for i in order]
        micro = []
        for chunk in _chunks(shuffled, train_cfg.batch_size):
            ids = _pad_rows([list(r[0]) for r in chunk], PAD)
            labels = np.array([r[1] for r in chunk], dtype=np.int64)
            micro.append(Batch(ids=ids, cls_labels=labels))
        drop_rng = util.rng_from(seed, "dropout", epoch)
        for group in _chunks(micro, train_cfg.grad_accumulation):
            losses = _run_step(params, cfg, group, train_cfg, state, drop_rng)
            step += 1
            for component in sorted(losses):
                log.append((step, component, losses[component]))
    ckpt = EncoderCheckpoint(cfg, params, checkpoint.vocab_sha256, checkpoint.vocab)
    return ckpt, log


def encode(
    checkpoint: EncoderCheckpoint,
    input_ids: Sequence[int],
    train_mode: bool = False,
    seed: int = 0,
) -> np.ndarray:
    """Per-position hidden states for one sequence, shape (length, d_model).

    Inference mode is deterministic; train mode applies dropout drawn from
    the seed.
    """
    ids = np.asarray(input_ids, dtype=np.int64)[None, :]
    rng = util.rng_from(seed, "encode") if train_mode else None
    hidden, _ = encoder_forward(checkpoint.params, checkpoint.config, ids,
                                train=train_mode, rng=rng)
    return hidden[0]


def encode_batch(
    checkpoint: EncoderCheckpoint,
    sequences: Sequence[Sequence[int]],
    batch_size: int = 64,
) -> list[np.ndarray]:
    """Inference-mode hidden states for many sequences (ragged lengths ok)."""
    out: list[np.ndarray] = []
    for chunk in _chunks(list(sequences), batch_size):
        ids = _pad_rows([list(s) for s in chunk], PAD)
        hidden, _ = encoder_forward(checkpoint.params, checkpoint.config, ids)
        for row, seq in zip(hidden, chunk):
            out.append(row[: len(seq)])
    return out


def mlm_loss(
    checkpoint: EncoderCheckpoint,
    hidden: np.ndarray,
    mlm_labels: Sequence[int],
) -> tuple[float, np.ndarray]:
    """Mean masked-token cross entropy and per-position vocabulary logits.

    Positions labeled IGNORE_INDEX contribute nothing; with no labeled
    positions the loss is zero.
    """
    logits = hidden @ checkpoint.params["head.mlm.w"] + checkpoint.params["head.mlm.b"]
    labels = np.asarray(mlm_labels)
    keep = labels != IGNORE_INDEX
    if not keep.any():
        return 0.0, logits
    kept = logits[keep]
    shifted = kept - kept.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    ce = -logp[np.arange(kept.shape[0]), labels[keep]]
    return float(ce.mean()), logits


def dtp_loss(
    checkpoint: EncoderCheckpoint,
    h_first: np.ndarray,
    label: int,
) -> tuple[float, np.ndarray]:
    """Timestamp-classification cross entropy from the first position's state."""
    k = checkpoint.config.k_dtp
    if k is None:
        raise ValueError("model has no timestamp head")
    if not 0 <= label < k:
        raise LabelOutOfRange(f"label {label} outside 0..{k - 1}")
    logits = h_first @ checkpoint.params["head.dtp.w"] + checkpoint.params["head.dtp.b"]
    shifted = logits - logits.max()
    logp = shifted - np.log(np.exp(shifted).sum())
    return float(-logp[label]), logits


def tir_loss(
    checkpoint: EncoderCheckpoint,
    hidden: np.ndarray,
    slots: Sequence[tuple[int, int, int]],
) -> tuple[float, np.ndarray]:
    """Mean replaced-or-kept cross entropy over boundary-state pairs."""
    if not slots:
        return 0.0, np.zeros((0, 2), dtype=hidden.dtype)
    arr = np.asarray([[s[0], s[1], s[2]] for s in slots], dtype=np.int64)
    feats = np.concatenate([hidden[arr[:, 0]], hidden[arr[:, 1]]], axis=-1)
    logits = feats @ checkpoint.params["head.tir.w"] + checkpoint.params["head.tir.b"]
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    ce = -logp[np.arange(arr.shape[0]), arr[:, 2]]
    return float(ce.mean()), logits


def joint_loss(
    objectives: Iterable[Objective],
    parts: dict[str, float],
) -> float:
    """Unweighted sum of the active objectives' losses, keyed by name."""
    active = set(objectives)
    if not active:
        raise ValueError("objective set must be non-empty")
    return float(sum(parts[o.value] for o in active))


def classify(
    checkpoint: EncoderCheckpoint,
    sequences: Sequence[Sequence[int]],
    batch_size: int = 64,
) -> np.ndarray:
    """Argmax classes from the fine-tuned head for a list of id sequences."""
    if checkpoint.config.k_cls is None:
        raise ValueError("model has no fine-tuned classifier head")
    w = checkpoint.params["head.cls.w"]
    b = checkpoint.params["head.cls.b"]
    out = []
    for chunk in _chunks(list(sequences), batch_size):
        ids = _pad_rows([list(s) for s in chunk], PAD)
        hidden, _ = encoder_forward(checkpoint.params, checkpoint.config, ids)
        out.append(np.argmax(hidden[:, 0] @ w + b, axis=-1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def predict_dtp(
    checkpoint: EncoderCheckpoint,
    sequences: Sequence[Sequence[int]],
    batch_size: int = 64,
) -> np.ndarray:
    """Argmax classes from the timestamp head."""
    if checkpoint.config.k_dtp is None:
        raise ValueError("model has no timestamp head")
    w = checkpoint.params["head.dtp.w"]
    b = checkpoint.params["head.dtp.b"]
    out = []
    for chunk in _chunks(list(sequences), batch_size):
        ids = _pad_rows([list(s) for s in chunk], PAD)
        hidden, _ = encoder_forward(checkpoint.params, checkpoint.config, ids)
        out.append(np.argmax(hidden[:, 0] @ w + b, axis=-1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
