"""Command-line pipeline: tag, build-vocab, build-dataset, pretrain,
finetune, eval, probe, baseline, synth, ablate.

Every command takes --config (key=value sections), --seed, and --out;
explicit flags override config file values.  Outputs are written
atomically, and any toolkit error exits nonzero with a diagnostic naming
the offending record or flag.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import Optional, Sequence

from . import util
from .config import RunConfig
from .corpus import (
    Document,
    Vocab,
    build_vocab,
    load_corpus,
    load_tagged,
    tagged_to_json,
    tokenize,
)
from .errors import ChronoError, MalformedRecord
from .evaluation import (
    DEFAULT_ABLATION,
    EvalSet,
    Prediction,
    accuracy,
    mae,
    mean_average_precision,
    mrr,
    random_guess,
    run_ablation,
    similarity_rank,
)
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.training import (
    LabeledExample,
    classify,
    finetune,
    prepare_labeled,
    pretrain,
)
from .objectives import (
    LabelSpace,
    Objective,
    example_from_json,
    example_provider,
    pretrain_example_to_json,
    tir_example_to_json,
    PretrainExample,
)
from .synth import synth_corpus, synth_events
from .temporal import Granularity, TimePoint, annotate, truncate


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    util.atomic_write_text(path, buf.getvalue())


def _write_loss_log(path: str, rows) -> None:
    _write_csv(path, ("step", "objective", "loss"),
               [(step, name, f"{value:.6f}") for step, name, value in rows])


def _load_labeled(path: str) -> list[LabeledExample]:
    out = []
    for lineno, obj in util.read_jsonl(path):
        try:
            time = TimePoint.parse(obj["time"])
            doc_ts = (TimePoint.parse(obj["doc_timestamp"])
                      if obj.get("doc_timestamp") else None)
            out.append(LabeledExample(
                text=obj["text"], time=time,
                doc_timestamp=doc_ts, doc_text=obj.get("doc_text"),
            ))
        except (KeyError, ValueError) as exc:
            raise MalformedRecord(f"{path} line {lineno}: {exc}") from None
    if not out:
        raise MalformedRecord(f"{path}: no labeled records")
    return out


def _labeled_to_json(example: LabeledExample, index: int) -> dict:
    obj = {"id": f"event-{index:05d}", "text": example.text,
           "time": example.time.isoformat()}
    if example.doc_timestamp is not None:
        obj["doc_timestamp"] = example.doc_timestamp.isoformat()
    if example.doc_text is not None:
        obj["doc_text"] = example.doc_text
    return obj


def _need(args: argparse.Namespace, cfg: RunConfig, flag: str) -> str:
    """Resolve a path from the flag or the [paths] config section."""
    value = getattr(args, flag.replace("-", "_"), None) or cfg.paths.get(flag)
    if not value:
        raise MalformedRecord(f"missing required path: --{flag}")
    return value


def _space_or_fail(cfg: RunConfig) -> LabelSpace:
    space = cfg.label_space()
    if space is None:
        raise MalformedRecord(
            "label space required: set [labelspace] start/end in the config"
        )
    return space


def cmd_tag(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    records = []
    for doc in load_corpus(_need(args, cfg, "corpus")):
        records.append(tagged_to_json(doc, annotate(doc.text, doc.timestamp)))
    util.write_jsonl(out, records)
    print(f"tagged {len(records)} documents -> {out}")


def cmd_build_vocab(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    vocab = build_vocab(
        load_corpus(_need(args, cfg, "corpus")),
        max_size=args.max_size,
        min_freq=args.min_freq,
        lowercase=cfg.lowercase,
        include_timestamps=True,
    )
    vocab.save(out)
    print(f"vocabulary of {vocab.size} tokens -> {out}")


def cmd_build_dataset(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    vocab = Vocab.load(_need(args, cfg, "vocab"))
    objectives = Objective.parse_set(args.objectives)
    space = _space_or_fail(cfg) if Objective.DTP in objectives else cfg.label_space()
    tagged = list(load_tagged(_need(args, cfg, "tagged")))
    provider = example_provider(
        tagged, vocab, objectives, space,
        temporal_mask_ratio=cfg.temporal_mask_ratio,
        mask_budget=cfg.mask_budget,
        replace_prob=cfg.replace_prob,
        seed=cfg.seed,
        lowercase=cfg.lowercase,
        max_len=cfg.model["max_len"],
    )
    records = []
    for example in provider(args.epoch):
        if isinstance(example, PretrainExample):
            records.append(pretrain_example_to_json(example))
        else:
            records.append(tir_example_to_json(example))
    util.write_jsonl(out, records)
    print(f"{len(records)} examples -> {out}")


def _pretrain_dataset(args, cfg: RunConfig, vocab: Vocab, objectives):
    """Static examples from --dataset, or per-epoch builds from --tagged."""
    if args.dataset:
        examples = [example_from_json(obj) for _, obj in util.read_jsonl(args.dataset)]
        if not examples:
            raise MalformedRecord(f"{args.dataset}: no examples")
        return examples
    tagged = list(load_tagged(_need(args, cfg, "tagged")))
    space = cfg.label_space()
    return example_provider(
        tagged, vocab, objectives, space,
        temporal_mask_ratio=cfg.temporal_mask_ratio,
        mask_budget=cfg.mask_budget,
        replace_prob=cfg.replace_prob,
        seed=cfg.seed,
        lowercase=cfg.lowercase,
        max_len=cfg.model["max_len"],
    )


def cmd_pretrain(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    vocab = Vocab.load(_need(args, cfg, "vocab"))
    train_cfg = cfg.train_config()
    if args.objectives:
        import dataclasses
        train_cfg = dataclasses.replace(
            train_cfg, objectives=Objective.parse_set(args.objectives))
    k_dtp = None
    if Objective.DTP in train_cfg.objectives:
        k_dtp = _space_or_fail(cfg).size
    dataset = _pretrain_dataset(args, cfg, vocab, train_cfg.objectives)
    model_cfg = cfg.model_config(vocab.size, k_dtp=k_dtp)
    ckpt, log = pretrain(dataset, vocab, model_cfg, train_cfg, seed=cfg.seed)
    save_checkpoint(ckpt, out)
    if args.loss_log:
        _write_loss_log(args.loss_log, log)
    print(f"pretrained {train_cfg.epochs} epochs, {len(log)} loss rows -> {out}")


def cmd_finetune(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    vocab = Vocab.load(_need(args, cfg, "vocab"))
    space = _space_or_fail(cfg)
    ckpt = load_checkpoint(_need(args, cfg, "checkpoint"), vocab=vocab)
    examples = _load_labeled(_need(args, cfg, "train-data"))
    records = prepare_labeled(examples, space, vocab, cfg.lowercase,
                              ckpt.config.max_len)
    tuned, log = finetune(ckpt, records, space.size, cfg.finetune_config(),
                          seed=cfg.seed)
    save_checkpoint(tuned, out)
    if args.loss_log:
        _write_loss_log(args.loss_log, log)
    print(f"fine-tuned on {len(records)} examples -> {out}")


def _metric_rows(name: str, predictions, granularities):
    rows = []
    for g in granularities:
        scoped = [Prediction(p.predicted, p.gold, g) for p in predictions]
        rows.append((name, "acc", str(g), f"{accuracy(scoped):.4f}"))
        rows.append((name, "mae", str(g), f"{mae(scoped, g):.4f}"))
    return rows


def _parse_granularities(text: Optional[str], default: Granularity):
    if not text:
        return [default]
    return [Granularity.parse(p) for p in text.split(",") if p.strip()]


def cmd_eval(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    if args.predictions:
        predictions = []
        for lineno, obj in util.read_jsonl(args.predictions):
            try:
                predicted = TimePoint.parse(obj["predicted"])
                gold = TimePoint.parse(obj["gold"])
            except (KeyError, ValueError) as exc:
                raise MalformedRecord(
                    f"{args.predictions} line {lineno}: {exc}") from None
            g = min(predicted.granularity, gold.granularity)
            predictions.append(Prediction(predicted, gold, g))
        if not predictions:
            raise MalformedRecord(f"{args.predictions}: no prediction records")
        finest = min(p.granularity for p in predictions)
        granularities = _parse_granularities(args.granularities, finest)
        rows = _metric_rows(args.name, predictions, granularities)
    else:
        vocab = Vocab.load(_need(args, cfg, "vocab"))
        space = _space_or_fail(cfg)
        ckpt = load_checkpoint(_need(args, cfg, "checkpoint"), vocab=vocab)
        examples = _load_labeled(_need(args, cfg, "data"))
        records = prepare_labeled(examples, space, vocab, cfg.lowercase,
                                  ckpt.config.max_len)
        picks = classify(ckpt, [ids for ids, _ in records])
        g = space.granularity
        predictions = [
            Prediction(space.point_at(int(pick)), truncate(e.time, g), g)
            for pick, e in zip(picks, examples)
        ]
        granularities = _parse_granularities(args.granularities, g)
        rows = _metric_rows(args.name, predictions, granularities)
    _write_csv(out, ("configuration", "metric", "granularity", "value"), rows)
    print(f"{len(rows)} metric rows -> {out}")


def cmd_probe(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    vocab = Vocab.load(_need(args, cfg, "vocab"))
    space = _space_or_fail(cfg)
    ckpt = load_checkpoint(_need(args, cfg, "checkpoint"), vocab=vocab)
    ranked = similarity_rank(ckpt, args.query, space, lowercase=cfg.lowercase)
    rows = [
        (rank, point.isoformat(), f"{score:.6f}")
        for rank, (point, score) in enumerate(ranked.ranking, start=1)
    ]
    _write_csv(out, ("rank", "point", "score"), rows)
    print(f"ranked {len(rows)} candidates for {args.query!r} -> {out}")


def cmd_baseline(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    space = _space_or_fail(cfg)
    golds = [e.time for e in _load_labeled(_need(args, cfg, "data"))]
    acc, err = random_guess(space, golds, trials=args.trials, seed=cfg.seed)
    rows = [
        ("random-guess", "acc", str(space.granularity), f"{acc:.4f}"),
        ("random-guess", "mae", str(space.granularity), f"{err:.4f}"),
    ]
    _write_csv(out, ("configuration", "metric", "granularity", "value"), rows)
    print(f"random-guess baseline over {len(golds)} golds -> {out}")


def cmd_synth(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    start = TimePoint.parse(args.start)
    end = TimePoint.parse(args.end)
    if args.events:
        space = LabelSpace(Granularity.YEAR, start, end)
        events = synth_events(args.n, space, noise=args.noise, seed=cfg.seed)
        util.write_jsonl(out, [_labeled_to_json(e, i) for i, e in enumerate(events)])
        print(f"{len(events)} synthetic events over {space.size} years -> {out}")
    else:
        space = LabelSpace(Granularity.MONTH, start, end)
        docs = synth_corpus(args.n, space, noise=args.noise, seed=cfg.seed)
        util.write_jsonl(out, [
            {"id": d.id, "timestamp": d.timestamp.isoformat(), "text": d.text}
            for d in docs
        ])
        print(f"{len(docs)} synthetic documents over {space.size} months -> {out}")


def cmd_ablate(args, cfg: RunConfig) -> None:
    out = _need(args, cfg, "out")
    vocab = Vocab.load(_need(args, cfg, "vocab"))
    space = _space_or_fail(cfg)
    tagged = list(load_tagged(_need(args, cfg, "tagged")))
    train_examples = _load_labeled(_need(args, cfg, "eval-train"))
    test_examples = _load_labeled(_need(args, cfg, "eval-test"))
    eval_space = space
    if args.eval_start and args.eval_end:
        g = (Granularity.parse(args.eval_granularity)
             if args.eval_granularity else space.granularity)
        eval_space = LabelSpace(
            g,
            truncate(TimePoint.parse(args.eval_start), g),
            truncate(TimePoint.parse(args.eval_end), g),
        )
    elif args.eval_granularity:
        g = Granularity.parse(args.eval_granularity)
        eval_space = LabelSpace(g, truncate(space.start, g), truncate(space.end, g))
    combos = DEFAULT_ABLATION
    if args.combinations:
        combos = tuple(Objective.parse_set(c) for c in args.combinations.split(";"))
    rows = run_ablation(
        tagged, vocab, space,
        model_cfg=cfg.model_config(vocab.size),
        pretrain_cfg=cfg.train_config(),
        finetune_cfg=cfg.finetune_config(),
        eval_sets=[EvalSet("events", tuple(train_examples),
                           tuple(test_examples), eval_space)],
        combinations=combos,
        seed=cfg.seed,
        temporal_mask_ratio=cfg.temporal_mask_ratio,
        mask_budget=cfg.mask_budget,
        replace_prob=cfg.replace_prob,
        lowercase=cfg.lowercase,
    )
    _write_csv(
        out,
        ("configuration", "metric", "granularity", "value"),
        [(r.configuration, r.metric, r.granularity, f"{r.value:.4f}") for r in rows],
    )
    print(f"{len(rows)} ablation rows -> {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronolm",
        description="Time-aware pretraining toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="global random seed")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("tag", help="recognize and normalize temporal expressions")
    common(p)
    p.add_argument("--corpus", help="corpus JSONL")

    p = sub.add_parser("build-vocab", help="rank tokens into a vocabulary file")
    common(p)
    p.add_argument("--corpus", help="corpus JSONL")
    p.add_argument("--max-size", type=int, default=8192)
    p.add_argument("--min-freq", type=int, default=1)

    p = sub.add_parser("build-dataset", help="materialize training examples")
    common(p)
    p.add_argument("--tagged", help="tagged corpus JSONL")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--objectives", default="tamlm,dtp",
                   help="comma list drawn from mlm,tamlm,dtp,tir")
    p.add_argument("--epoch", type=int, default=0,
                   help="epoch number mixed into the sampling seed")

    p = sub.add_parser("pretrain", help="train the encoder")
    common(p)
    p.add_argument("--dataset", help="pre-built dataset JSONL (static plans)")
    p.add_argument("--tagged", help="tagged corpus JSONL (fresh plans per epoch)")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--objectives", help="override the configured objective set")
    p.add_argument("--loss-log", help="write per-step losses to this CSV")

    p = sub.add_parser("finetune", help="train a classifier head on labeled data")
    common(p)
    p.add_argument("--checkpoint", help="encoder checkpoint")
    p.add_argument("--train-data", help="labeled JSONL")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--loss-log", help="write per-step losses to this CSV")

    p = sub.add_parser("eval", help="score predictions or a fine-tuned model")
    common(p)
    p.add_argument("--checkpoint", help="fine-tuned checkpoint")
    p.add_argument("--data", help="labeled JSONL")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--predictions", help="JSONL of predicted/gold pairs")
    p.add_argument("--granularities", help="comma list, e.g. year,month")
    p.add_argument("--name", default="model", help="configuration column value")

    p = sub.add_parser("probe", help="rank label-space points by similarity")
    common(p)
    p.add_argument("--checkpoint", help="encoder checkpoint")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--query", required=True, help="probe text")

    p = sub.add_parser("baseline", help="random-guess accuracy and error")
    common(p)
    p.add_argument("--data", help="labeled JSONL supplying gold times")
    p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("synth", help="generate a synthetic corpus or event set")
    common(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--start", required=True, help="span start, e.g. 1987-01")
    p.add_argument("--end", required=True, help="span end, e.g. 1990-12")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--events", action="store_true",
                   help="emit year-labeled events instead of documents")

    p = sub.add_parser("ablate", help="pretrain and evaluate objective combinations")
    common(p)
    p.add_argument("--tagged", help="tagged corpus JSONL")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--eval-train", help="labeled JSONL for fine-tuning")
    p.add_argument("--eval-test", help="labeled JSONL for scoring")
    p.add_argument("--eval-start", help="evaluation label-space start")
    p.add_argument("--eval-end", help="evaluation label-space end")
    p.add_argument("--eval-granularity", help="evaluate at this granularity")
    p.add_argument("--combinations",
                   help="semicolon-separated objective sets, e.g. 'mlm;tamlm,dtp'")
    return parser


_COMMANDS = {
    "tag": cmd_tag,
    "build-vocab": cmd_build_vocab,
    "build-dataset": cmd_build_dataset,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "probe": cmd_probe,
    "baseline": cmd_baseline,
    "synth": cmd_synth,
    "ablate": cmd_ablate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        _COMMANDS[args.command](args, cfg)
    except ChronoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
