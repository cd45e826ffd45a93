"""``ruletag`` command line: ingest | rules | train | eval | predict | ablate | synth.

Exit codes: 1 configuration, 2 data, 3 numeric, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace

from ruletag.ablation import run_ablation
from ruletag.corpus import (
    SUBSAMPLE_PERCENTS, CorpusSplit, TagSet, format_corpus, parse_corpus, split_corpus,
    subsample_train,
)
from ruletag.embeddings import EmbeddingStore, load_vectors
from ruletag.errors import ConfigError, DataError, ParseError, RuleTagError
from ruletag.metrics import evaluate, select_tail_labels
from ruletag.models import ModelConfig, load_checkpoint, predict_all, save_checkpoint, train
from ruletag.rules import apply_rules, compile_dictionaries, load_dictionaries, rule_only_predict
from ruletag.synthetic import SyntheticConfig, dictionaries_json, generate_synthetic

log = logging.getLogger("ruletag")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_IO = 1, 2, 3, 4


@dataclass
class RunConfig:
    corpus: str | None = None
    dictionaries: str | None = None
    embeddings: str | None = None
    output_dir: str | None = None
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    split_seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        own = {f.name for f in fields(cls)} - {"model"}
        run = {k: v for k, v in doc.items() if k in own}
        if "fractions" in run:
            run["fractions"] = tuple(run["fractions"])
        model = ModelConfig.from_dict({k: v for k, v in doc.items() if k not in own})
        return cls(model=model, **run)

    def check_paths(self):
        for name in ("corpus", "dictionaries", "embeddings"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(f"{name} path does not exist: {path}")

    def to_dict(self) -> dict:
        doc = {k: getattr(self, k) for k in ("corpus", "dictionaries", "embeddings", "output_dir", "split_seed")}
        doc["fractions"] = list(self.fractions)
        doc.update(self.model.to_dict())
        return doc


# helpers --------------------------------------------------------------------


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _outdir(path):
    if path is None:
        raise ConfigError("an output directory is required (--out)")
    os.makedirs(path, exist_ok=True)
    return path


def _load_corpus(path, tagset=None):
    return parse_corpus(_read(path), tagset, source=path)


def _load_json(path):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _load_store(path, config: ModelConfig) -> EmbeddingStore:
    if path is None:
        return EmbeddingStore(config.dim, trainable=config.fine_tune, oov_policy=config.oov_policy, seed=config.seed)
    return load_vectors(_read(path), trainable=config.fine_tune, oov_policy=config.oov_policy,
                        seed=config.seed, source=path)


def _parse_list(text, cast):
    try:
        return [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def _table1(split: CorpusSplit, tags: TagSet) -> str:
    rows = [("", "Doc", "Sen")]
    for name in ("train", "val", "test"):
        part = getattr(split, name)
        rows.append((name.capitalize(), str(len({s.doc_id for s in part})), str(len(part))))
    lines = [f"{a:<8}{b:>8}{c:>8}" for a, b, c in rows]
    lines.append(f"{'#Labels':<8}{len(tags.labels):>16}")
    return "\n".join(lines)


def _run_config(args) -> RunConfig:
    doc = _load_json(args.config) if getattr(args, "config", None) else {}
    run = RunConfig.from_dict(doc)
    overrides = {}
    for name in ("corpus", "dictionaries", "embeddings"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "fractions", None) is not None:
        overrides["fractions"] = tuple(_parse_list(args.fractions, float))
    if getattr(args, "split_seed", None) is not None:
        overrides["split_seed"] = args.split_seed
    model_over = {}
    for name in ("variant", "seed", "window", "penalty", "imitation", "epochs", "hidden", "dim", "dropout", "lr",
                 "match_mode", "inference_source"):
        value = getattr(args, name, None)
        if value is not None:
            model_over[name] = value
    run = replace(run, **overrides)
    if model_over:
        run.model = ModelConfig.from_dict({**run.model.to_dict(), **model_over})
    run.check_paths()
    return run


def _split_from_manifest(sentences, manifest, part):
    if part == "all":
        return sentences
    docs = set(manifest["split"][part])
    return [s for s in sentences if s.doc_id in docs]


# commands -------------------------------------------------------------------


def cmd_ingest(args):
    sentences, tags = _load_corpus(args.corpus)
    fractions = tuple(_parse_list(args.fractions, float)) if args.fractions else (0.7, 0.1, 0.2)
    split = split_corpus(sentences, fractions, args.seed)
    out = _outdir(args.out)
    _write(os.path.join(out, "corpus.tsv"), format_corpus(sentences, tags))
    for name in ("train", "val", "test"):
        _write(os.path.join(out, f"{name}.tsv"), format_corpus(getattr(split, name), tags))
    _write(os.path.join(out, "tags.json"), json.dumps({"names": list(tags.names), "other": tags.other_index}, indent=2) + "\n")
    manifest = {"fractions": list(split.fractions), "seed": args.seed, "split": split.doc_ids}
    _write(os.path.join(out, "split.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(_table1(split, tags))
    return 0


def cmd_rules(args):
    sentences, tags = _load_corpus(args.corpus)
    dicts = load_dictionaries(_read(args.dictionaries), tags, not args.no_case_fold)
    config = ModelConfig(window=args.window, match_mode=args.match_mode, similarity_threshold=args.threshold,
                         case_fold=not args.no_case_fold, negative_scope=args.negative_scope)
    store = load_vectors(_read(args.embeddings), source=args.embeddings) if args.embeddings else None
    if config.match_mode == "similarity" and store is None:
        raise ConfigError("--match-mode similarity needs --embeddings")
    lines, gold, pred = [], [], []
    for s in sentences:
        vecs = apply_rules(s, dicts, config.rule_config(), store)
        pred.append(rule_only_predict(vecs))
        gold.append(s.tags)
        for tok, bits in zip(s.tokens, vecs):
            lines.append(f"{tok.surface}\t{tags.name(tok.tag)}\t{','.join(str(int(b)) for b in bits)}\n")
    report = evaluate(gold, pred, tags)
    out = _outdir(args.out)
    _write(os.path.join(out, "rules.tsv"), "".join(lines))
    _write(os.path.join(out, "rule_report.json"), json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    print(f"tokens {len(lines)}  rule-only micro-F1 {report.micro_f1:.4f}  macro-F1 {report.macro_f1:.4f}")
    return 0


def _prepare(run: RunConfig):
    if run.corpus is None:
        raise ConfigError("a corpus is required")
    sentences, tags = _load_corpus(run.corpus)
    dicts = None
    if run.dictionaries is not None:
        dicts = load_dictionaries(_read(run.dictionaries), tags, run.model.case_fold)
    elif run.model.uses_rules:
        raise ConfigError(f"variant {run.model.variant} needs --dictionaries")
    else:
        dicts = compile_dictionaries({}, [], tags)
    store = _load_store(run.embeddings, run.model)
    split = split_corpus(sentences, run.fractions, run.split_seed)
    return sentences, tags, dicts, store, split


def cmd_train(args):
    run = _run_config(args)
    _, tags, dicts, store, split = _prepare(run)
    if args.percent is not None:
        split = subsample_train(split, args.percent, run.model.seed)
    out = _outdir(run.output_dir)
    model, history = train(run.model, split, tags, dicts, store)
    extra = {
        "embeddings_path": os.path.abspath(run.embeddings) if run.embeddings else None,
        "split": split.doc_ids,
        "fractions": list(split.fractions),
        "split_seed": run.split_seed,
        "percent": split.percent,
    }
    save_checkpoint(model, os.path.join(out, "checkpoint.json"), extra)
    _write(os.path.join(out, "train_log.jsonl"), "".join(json.dumps(e, sort_keys=True) + "\n" for e in history))
    _write(os.path.join(out, "config.json"), json.dumps(run.to_dict(), indent=2, sort_keys=True) + "\n")
    best = max(history, key=lambda e: e["val_micro_f1"])
    print(f"variant {run.model.variant}: best epoch {best['epoch']} val micro-F1 {best['val_micro_f1']:.4f}")
    return 0


def _checkpoint(path, embeddings=None):
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        doc = json.loads(_read(path))
        extra = doc.get("extra") or {}
        emb = doc["embedding"]
    except (json.JSONDecodeError, KeyError, AttributeError) as exc:
        raise DataError(f"{path}: not a checkpoint ({exc})") from None
    emb_path = embeddings or extra.get("embeddings_path")
    store = None
    if emb_path:
        store = load_vectors(_read(emb_path), oov_policy=emb["oov_policy"], seed=emb["seed"], source=emb_path)
    return load_checkpoint(path, store), extra


def cmd_eval(args):
    model, extra = _checkpoint(args.checkpoint, args.embeddings)
    sentences, _ = _load_corpus(args.corpus, model.tags)
    if args.split != "all":
        if "split" not in extra:
            raise DataError("checkpoint has no split manifest; use --split all")
        sentences = _split_from_manifest(sentences, extra, args.split)
        if not sentences:
            raise DataError(f"no sentences of split {args.split!r} in {args.corpus}")
    tail = set()
    if args.tail_from:
        train_sents, _ = _load_corpus(args.tail_from, model.tags)
        tail = select_tail_labels(train_sents, model.tags, args.tail_budget)
    report = evaluate([s.tags for s in sentences], predict_all(model, sentences), model.tags, tail)
    out = _outdir(args.out)
    _write(os.path.join(out, "report.json"), json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    print(f"micro-F1 {report.micro_f1:.4f}  macro-F1 {report.macro_f1:.4f}")
    return 0


def _read_raw(path):
    """Sentences of a raw token file: 1 to 3 columns, blank-line separated."""
    sentences, words, doc = [], [], None
    count = 0
    for lineno, line in enumerate(_read(path).splitlines(), start=1):
        parts = line.split()
        if not parts:
            if words:
                sentences.append((doc if doc is not None else count, words))
                count += 1
            words, doc = [], None
            continue
        if len(parts) > 3:
            raise ParseError(f"expected at most 3 columns, got {len(parts)}", lineno, path)
        if len(parts) >= 2:
            try:
                doc = int(parts[1])
            except ValueError:
                raise ParseError(f"doc id {parts[1]!r} is not an integer", lineno, path) from None
        words.append(parts[0])
    if words:
        sentences.append((doc if doc is not None else count, words))
    if not sentences:
        raise ParseError("empty input", None, path)
    return sentences


def cmd_predict(args):
    model, _ = _checkpoint(args.checkpoint, args.embeddings)
    blocks = []
    for doc, words in _read_raw(args.input):
        tags = model.predict(words)
        blocks.append("".join(f"{w}\t{doc}\t{model.tags.name(t)}\n" for w, t in zip(words, tags)))
    parent = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(parent, exist_ok=True)
    _write(args.out, "\n".join(blocks))
    print(f"tagged {len(blocks)} sentences -> {args.out}")
    return 0


def cmd_ablate(args):
    run = _run_config(args)
    _, tags, dicts, store, split = _prepare(run)
    doc = _load_json(args.grid) if args.grid else {}
    variants = _parse_list(args.variants, str) if args.variants else doc.get("variants", ["A", "B", "C", "D"])
    percents = _parse_list(args.percents, int) if args.percents else doc.get("percents", list(SUBSAMPLE_PERCENTS))
    seeds = _parse_list(args.seeds, int) if args.seeds else doc.get("seeds", [run.model.seed])
    grid = run_ablation(split, tags, dicts, store, variants, percents, seeds, run.model,
                        tail_budget=doc.get("tail_budget", 0.05), tail_unit=doc.get("tail_unit", "tokens"))
    out = _outdir(run.output_dir)
    _write(os.path.join(out, "cells.jsonl"), grid.jsonl())
    _write(os.path.join(out, "summary.csv"), grid.summary_csv())
    _write(os.path.join(out, "tail_summary.csv"), grid.summary_csv(("tail_micro",)))
    print(grid.summary_csv(), end="")
    return 0


def cmd_synth(args):
    config = SyntheticConfig.from_json(_read(args.config)) if args.config else SyntheticConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    sentences, tags, dicts = generate_synthetic(config)
    out = _outdir(args.out)
    _write(os.path.join(out, "corpus.tsv"), format_corpus(sentences, tags))
    _write(os.path.join(out, "dictionaries.json"), dictionaries_json(dicts, tags))
    _write(os.path.join(out, "synthetic.json"), json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"{len(sentences)} sentences, {len(tags.labels)} labels -> {out}")
    return 0


# parser ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _model_flags(p):
    p.add_argument("--config", help="JSON run/training config")
    p.add_argument("--corpus")
    p.add_argument("--dictionaries")
    p.add_argument("--embeddings")
    p.add_argument("--out")
    p.add_argument("--fractions", help="train,val,test fractions, e.g. 0.7,0.1,0.2")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=["A", "B", "C", "D"])
    p.add_argument("--window", type=int)
    p.add_argument("--penalty", type=float, help="rule penalty C")
    p.add_argument("--imitation", type=float, help="imitation weight pi")
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--match-mode", choices=["exact", "similarity"])
    p.add_argument("--inference-source", choices=["teacher", "student"])


def build_parser():
    parser = _Parser(prog="ruletag", description="Dictionary-rule augmented BiLSTM event tagging.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate, normalise and split a corpus")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fractions")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rules", help="rule vectors and the rule-only baseline")
    p.add_argument("corpus")
    p.add_argument("--dictionaries", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--match-mode", choices=["exact", "similarity"], default="exact")
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--negative-scope", choices=["sentence", "token"], default="sentence")
    p.add_argument("--no-case-fold", action="store_true")
    p.add_argument("--embeddings")
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("train", help="train one variant")
    _model_flags(p)
    p.add_argument("--percent", type=int, choices=SUBSAMPLE_PERCENTS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["all", "train", "val", "test"], default="all")
    p.add_argument("--tail-from", help="training corpus used to pick tail labels")
    p.add_argument("--tail-budget", type=float, default=0.05)
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="tag a raw token file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="variant x training-size x seed grid")
    _model_flags(p)
    p.add_argument("--grid", help="JSON with variants, percents, seeds")
    p.add_argument("--variants")
    p.add_argument("--percents")
    p.add_argument("--seeds")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="write a synthetic corpus and dictionaries")
    p.add_argument("--config", help="synthetic config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except RuleTagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
