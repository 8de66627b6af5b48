"""Command-line entry point: analyze, topics-train, topics-infer, train, generate, evaluate, matrix."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata
from pathlib import Path

from .analysis import KeywordSets, SubsetMask, classify_turn, summarize
from .corpus import FeatureLookupError, Vocabulary, build_vocabulary, decode, load_dataset, load_features, \
    load_word_vectors
from .metrics import DEFAULT_SUBSETS, EvalReport, evaluate
from .model import AUDIO_MODES, ConfigError, ModelConfig, load_checkpoint
from .topics import CATEGORIES, TOPIC_MODE_CATEGORIES, SeedLexicon, TopicFeaturizer, TopicModelState, \
    build_document_views, default_stopwords, infer_topics, top_k_topics, train_lda
from .training import TrainConfig, TrainingDivergence, load_best, make_examples, train
from . import plotting

log = logging.getLogger("avsd")

DATA_ENV = "AVSD_DATA_DIR"
AUDIO_FILES = {"vggish128": "vggish", "aclnet50": "aclnet"}


class CLIError(Exception):
    """Reported as a one-line diagnostic with exit code 1."""


# -- helpers ------------------------------------------------------------------------


def _data_path(value, default_name: str, what: str) -> Path:
    if value:
        return Path(value)
    base = os.environ.get(DATA_ENV)
    if not base:
        raise CLIError(f"no {what} given; pass a path or set {DATA_ENV}")
    return Path(base) / default_name


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "torch", "numba", "matplotlib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def write_manifest(out_dir, command: str, config: dict, seeds: dict) -> Path:
    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, "config": config, "seeds": seeds, "versions": _versions()}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_topic_models(directory, categories) -> dict[str, TopicModelState]:
    models = {}
    for cat in categories:
        path = Path(directory) / f"{cat}.json"
        if not path.exists():
            raise CLIError(f"missing topic model {path}; run topics-train --category {cat}")
        models[cat] = TopicModelState.load(path)
    return models


# -- experiment specs ---------------------------------------------------------------


@dataclass
class ExperimentSpec:
    name: str
    train_data: str
    valid_data: str
    test_data: str | None = None
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    features: str | None = None
    topic_models: str | None = None
    word_vectors: str | None = None
    min_frequency: int = 1
    fold_in_iterations: int = 50
    subsets: list = field(default_factory=lambda: list(DEFAULT_SUBSETS))
    strategy: str = "greedy"
    beam_width: int = 1

    def model_config(self, vocab_size: int, **extra) -> ModelConfig:
        return ModelConfig.from_json({**self.model, **extra, "vocab_size": vocab_size})

    def train_config(self, checkpoint_dir) -> TrainConfig:
        return TrainConfig.from_json({**self.train, "checkpoint_dir": str(checkpoint_dir), "run_id": self.name})

    def validate(self) -> None:
        if not self.name or "/" in self.name:
            raise ConfigError(f"experiment name {self.name!r} must be nonempty and contain no '/'")
        if "vocab_size" in self.model:
            raise ConfigError(f"{self.name}: vocab_size is derived from the training data")
        for key in ("checkpoint_dir", "run_id"):
            if key in self.train:
                raise ConfigError(f"{self.name}: train.{key} is set by the runner")
        probe = dict(self.model)
        if probe.get("video_mode") == "fixed" and not probe.get("video_dim"):
            probe["video_dim"] = 1  # inferred from the features at run time
        try:
            ModelConfig.from_json({**probe, "vocab_size": 8})
            TrainConfig.from_json(self.train)
        except ConfigError as exc:
            raise ConfigError(f"{self.name}: {exc}") from None
        if self.strategy not in ("greedy", "beam"):
            raise ConfigError(f"{self.name}: strategy={self.strategy!r} is not one of greedy, beam")
        if self.beam_width < 1:
            raise ConfigError(f"{self.name}: beam_width must be >= 1")
        for s in self.subsets:
            SubsetMask([]).mask(s)


def load_experiment_matrix(path) -> list[ExperimentSpec]:
    """Parse a JSON array of experiment specs; relative paths resolve against the file's directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: expected a JSON array of experiment specs")
    known = {f.name for f in fields(ExperimentSpec)}
    specs, seen = [], set()
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: entry {i} is not an object")
        unknown = set(entry) - known
        if unknown:
            raise ConfigError(f"{path}: entry {i} has unknown fields: {', '.join(sorted(unknown))}")
        try:
            spec = ExperimentSpec(**entry)
        except TypeError as exc:
            raise ConfigError(f"{path}: entry {i}: {exc}") from None
        for key in ("train_data", "valid_data", "test_data", "features", "topic_models", "word_vectors"):
            val = getattr(spec, key)
            if val is not None and not Path(val).is_absolute():
                setattr(spec, key, str(path.parent / val))
        spec.validate()
        if spec.name in seen:
            raise ConfigError(f"{path}: duplicate experiment name {spec.name!r}")
        seen.add(spec.name)
        specs.append(spec)
    return specs


def _feature_source(spec: ExperimentSpec, config_model: dict):
    audio = AUDIO_FILES.get(config_model.get("audio_mode", "none"))
    video = "video" if config_model.get("video_mode", "none") == "fixed" else None
    if audio is None and video is None:
        return None
    if spec.features is None:
        raise CLIError(f"{spec.name}: audio/video modes need a features directory")
    cache = {}

    def get(video_id):
        if video_id not in cache:
            cache[video_id] = load_features(spec.features, video_id, audio=audio, video=video)
        return cache[video_id]

    return get


def _featurizer(spec: ExperimentSpec, topic_mode: str, rng_seed: int):
    if topic_mode == "none":
        return None
    if spec.topic_models is None:
        raise CLIError(f"topic_mode {topic_mode!r} needs --topic-models (a topics-train output directory)")
    models = load_topic_models(spec.topic_models, TOPIC_MODE_CATEGORIES[topic_mode])
    return TopicFeaturizer(models, spec.fold_in_iterations, rng_seed)


def train_experiment(spec: ExperimentSpec, out_dir):
    """Build vocabulary/examples, train, and return (record, vocab, featurizer, features, model config)."""
    out_dir = Path(out_dir)
    train_dialogs = load_dataset(spec.train_data)
    valid_dialogs = load_dataset(spec.valid_data)
    vocab = build_vocabulary(train_dialogs, spec.min_frequency)
    topic_mode = spec.model.get("topic_mode", "none")
    rng_seed = int(spec.model.get("rng_seed", 0))
    featurizer = _featurizer(spec, topic_mode, rng_seed)
    features = _feature_source(spec, spec.model)
    extra = {}
    if features is not None and spec.model.get("video_mode") == "fixed" and not spec.model.get("video_dim"):
        extra["video_dim"] = int(features(train_dialogs[0].video_id).d_v)
    rows = covered = None
    if spec.word_vectors:
        table, rows, covered = load_word_vectors(spec.word_vectors, vocab, rng_seed)
        extra.update(use_pretrained_word_vectors=True, embed_dim=table.dim)
    mc = spec.model_config(len(vocab), **extra)
    tc = spec.train_config(out_dir / "checkpoints")
    train_ex = make_examples(train_dialogs, vocab, mc, features, featurizer)
    valid_ex = make_examples(valid_dialogs, vocab, mc, features, featurizer)
    ckpt_extra = {"vocab": vocab.to_json(), "fold_in_iterations": spec.fold_in_iterations}
    record = train(mc, tc, train_ex, valid_ex, word_vectors=rows, covered=covered, checkpoint_extra=ckpt_extra)
    _write_json(out_dir / "run_record.json", record.to_json())
    plotting.plot_training_curves(record.train_loss, record.valid_ppl, record.best_epoch,
                                  out_dir / "figures" / "training.png")
    return record, vocab, featurizer, features, mc


def generate_answers(model, vocab: Vocabulary, dialogs, features=None, featurizer=None,
                     strategy: str = "greedy", beam_width: int = 1) -> list[dict]:
    examples = make_examples(dialogs, vocab, model.config, features, featurizer)
    turns = [t for d in dialogs for t in d.turns]
    out = []
    for ex, turn in zip(examples, turns):
        hyp = decode(model.generate(ex, strategy, beam_width), vocab)
        out.append({
            "video_id": ex.video_id,
            "turn_index": ex.turn_index,
            "question": list(turn.question.tokens),
            "reference": list(turn.answer.tokens),
            "hypothesis": hyp,
        })
    return out


def evaluate_generated(records: list[dict], ks: KeywordSets, subsets=DEFAULT_SUBSETS) -> EvalReport:
    for i, r in enumerate(records):
        if not r.get("reference"):
            raise CLIError(f"generated record {i} has an empty reference")
    mask = SubsetMask([classify_turn(r["question"], r["reference"], ks, 0, r["turn_index"]) for r in records])
    return evaluate([r["hypothesis"] for r in records], [r["reference"] for r in records], mask, ks, subsets)


def write_report(report: EvalReport, out_dir, title: str = "eval") -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_dir / f"{title}.csv")
    (out_dir / f"{title}.txt").write_text(report.table() + "\n")
    plotting.plot_eval_report(report, out_dir / "figures" / f"{title}_metrics.png")
    if any(b is not None for b in report.binary.values()):
        plotting.plot_binary_prf(report.binary, out_dir / "figures" / f"{title}_binary_prf.png")


def run_experiment(spec: ExperimentSpec, out_dir, ks: KeywordSets | None = None):
    out_dir = Path(out_dir)
    record, vocab, featurizer, features, mc = train_experiment(spec, out_dir)
    model, _ = load_best(out_dir / "checkpoints", spec.name)
    test_dialogs = load_dataset(spec.test_data or spec.valid_data)
    generated = generate_answers(model, vocab, test_dialogs, features, featurizer, spec.strategy, spec.beam_width)
    _write_json(out_dir / "generated.json", generated)
    report = evaluate_generated(generated, ks or KeywordSets.load(), spec.subsets)
    write_report(report, out_dir)
    write_manifest(out_dir, "matrix", {"experiment": asdict(spec), "model_config": mc.to_json()},
                   {"model": mc.rng_seed, "train": spec.train_config(".").rng_seed})
    return record, report


# -- subcommands --------------------------------------------------------------------


def cmd_analyze(args) -> int:
    dialogs = load_dataset(_data_path(args.data, "train.json", "--data"))
    ks = KeywordSets.load(args.keywords)
    summary = summarize(dialogs, ks)
    rows = summary.rows()
    width = max(len(k) for k, _ in rows) + 2
    for k, v in rows:
        print(k.ljust(width) + v)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["statistic", "value"])
            w.writerows(rows)
    if args.figures:
        qs = [len(t.question.tokens) for d in dialogs for t in d.turns]
        ans = [len(t.answer.tokens) for d in dialogs for t in d.turns]
        plotting.plot_length_histograms(qs, ans, Path(args.figures) / "lengths.png")
        write_manifest(args.figures, "analyze", {"data": str(args.data), "keywords": args.keywords}, {})
    return 0


def cmd_topics_train(args) -> int:
    dialogs = load_dataset(_data_path(args.data, "train.json", "--data"))
    cats = CATEGORIES if args.category == "all" else (args.category,)
    lexicon = None if args.unguided else SeedLexicon.load(args.seeds)
    stopwords = frozenset() if args.no_stopwords else default_stopwords()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cat in cats:
        docs = [v.tokens for v in build_document_views(dialogs, cat)]
        state = train_lda(docs, K=args.k, alpha=args.alpha, beta=args.beta, iterations=args.iters,
                          rng_seed=args.rng_seed, seed_lexicon=lexicon, seed_confidence=args.seed_confidence,
                          stopwords=stopwords, category=cat)
        state.save(out / f"{cat}.json")
        print(f"[{cat}] {len(docs)} documents, vocab {state.V}")
        for name, words in zip(state.topic_names, state.top_words(args.top_words)):
            print(f"  {name}: {' '.join(words)}")
    write_manifest(out, "topics-train", {
        "data": str(args.data), "categories": list(cats), "K": args.k, "alpha": args.alpha, "beta": args.beta,
        "iterations": args.iters, "seed_confidence": args.seed_confidence,
        "seeds": None if args.unguided else (args.seeds or "builtin"), "stopwords": not args.no_stopwords,
    }, {"rng_seed": args.rng_seed})
    return 0


def cmd_topics_infer(args) -> int:
    state = TopicModelState.load(args.model)
    if args.text is not None:
        from .corpus import tokenize
        docs = [("text", tokenize(args.text))]
    else:
        dialogs = load_dataset(_data_path(args.data, "valid.json", "--data"))
        cat = args.category or state.category
        if cat is None:
            raise CLIError("the model has no category; pass --category")
        docs = [(f"{v.dialog_id}:{v.turn_index}", v.tokens) for v in build_document_views(dialogs, cat)]
    rows = []
    for key, toks in docs:
        dist = infer_topics(state, toks, args.fold_in_iterations, args.rng_seed)
        top = ", ".join(f"{state.topic_names[k]}={p:.3f}" for k, p in top_k_topics(dist, min(3, state.K)))
        print(f"{key}\t{top}")
        rows.append([key] + [repr(float(p)) for p in dist.probs])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["document"] + list(state.topic_names))
            w.writerows(rows)
    return 0


def _spec_from_args(args) -> ExperimentSpec:
    model = json.loads(Path(args.config).read_text()).get("model", {}) if args.config else {}
    train_over = json.loads(Path(args.config).read_text()).get("train", {}) if args.config else {}
    for key in ("attention_mode", "topic_mode", "audio_mode", "video_mode", "embed_dim", "hidden_dim",
                "video_dim", "max_decode_len", "K"):
        val = getattr(args, key)
        if val is not None:
            model[key] = val
    for key, dest in (("epochs", "max_epochs"), ("lr", "learning_rate"), ("batch_size", "batch_size"),
                      ("clip_norm", "clip_norm")):
        val = getattr(args, key)
        if val is not None:
            train_over[dest] = val
    model["rng_seed"] = args.rng_seed
    train_over["rng_seed"] = args.rng_seed
    spec = ExperimentSpec(
        name=args.run_id,
        train_data=str(_data_path(args.train, "train.json", "--train")),
        valid_data=str(_data_path(args.valid, "valid.json", "--valid")),
        model=model, train=train_over,
        features=args.features or (str(Path(os.environ[DATA_ENV]) / "features") if DATA_ENV in os.environ else None),
        topic_models=args.topic_models, word_vectors=args.word_vectors, min_frequency=args.min_frequency,
        fold_in_iterations=args.fold_in_iterations,
    )
    spec.validate()
    if model.get("topic_mode", "none") != "none" and not spec.topic_models:
        raise CLIError(f"topic_mode {model['topic_mode']!r} needs --topic-models (a topics-train output directory)")
    return spec


def cmd_train(args) -> int:
    spec = _spec_from_args(args)
    record, _, _, _, mc = train_experiment(spec, args.out)
    write_manifest(args.out, "train", {"experiment": asdict(spec), "model_config": mc.to_json()},
                   {"rng_seed": args.rng_seed})
    print(f"best epoch {record.best_epoch}: valid perplexity {record.valid_ppl[record.best_epoch]:.4f}")
    print(f"checkpoint {record.checkpoint}")
    return 0


def cmd_generate(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    extra = meta["extra"]
    if "vocab" not in extra:
        raise CLIError(f"{args.checkpoint} carries no vocabulary; it was not written by `avsd train`")
    vocab = Vocabulary.from_json(extra["vocab"])
    cfg = model.config
    spec = ExperimentSpec(name="generate", train_data="", valid_data="", model=cfg.to_json(),
                          features=args.features, topic_models=args.topic_models,
                          fold_in_iterations=extra.get("fold_in_iterations", 50))
    spec.model.pop("vocab_size")
    features = _feature_source(spec, spec.model)
    featurizer = _featurizer(spec, cfg.topic_mode, cfg.rng_seed)
    dialogs = load_dataset(_data_path(args.data, "test.json", "--data"))
    generated = generate_answers(model, vocab, dialogs, features, featurizer, args.strategy, args.beam_width)
    _write_json(args.out, generated)
    write_manifest(Path(args.out).parent, "generate", {
        "checkpoint": str(args.checkpoint), "data": str(args.data), "strategy": args.strategy,
        "beam_width": args.beam_width, "model_config": cfg.to_json(),
    }, {"model": cfg.rng_seed})
    print(f"wrote {len(generated)} answers to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    records = json.loads(Path(args.generated).read_text())
    report = evaluate_generated(records, KeywordSets.load(args.keywords), args.subsets or DEFAULT_SUBSETS)
    print(report.table())
    if args.out:
        write_report(report, args.out)
        write_manifest(args.out, "evaluate", {"generated": str(args.generated), "keywords": args.keywords}, {})
    return 0


def cmd_matrix(args) -> int:
    specs = load_experiment_matrix(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ks = KeywordSets.load(args.keywords)
    reports = {}
    for spec in specs:
        log.info("experiment %s", spec.name)
        _, reports[spec.name] = run_experiment(spec, out / spec.name, ks)
        print(f"[{spec.name}] done")
    with open(out / "matrix.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "metric", "subset", "score", "n_examples"])
        for name, rep in reports.items():
            for metric, subset, score, n in rep.rows():
                w.writerow([name, metric, subset, "" if score is None else repr(score), n])
    if reports:
        plotting.plot_matrix_comparison(reports, out / "figures" / "matrix_overall.png")
        binary = {n: r.binary.get("binary_answer") for n, r in reports.items()}
        if any(b is not None for b in binary.values()):
            plotting.plot_binary_prf(binary, out / "figures" / "matrix_binary_prf.png")
    write_manifest(out, "matrix", {"spec": str(args.spec), "experiments": [asdict(s) for s in specs]}, {})
    print(f"{len(specs)} experiments written to {out}")
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="avsd", description="Topic-guided audio-visual dialog answer generation.")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="dataset statistics and keyword-classifier rates")
    a.add_argument("--data", help=f"dataset JSON (default ${DATA_ENV}/train.json)")
    a.add_argument("--keywords", help="keyword-set JSON (default: built-in lists)")
    a.add_argument("--csv", help="write the statistics table as CSV")
    a.add_argument("--figures", help="directory for length histograms")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("topics-train", help="fit (guided) LDA per document category")
    t.add_argument("--data")
    t.add_argument("--category", default="all", choices=CATEGORIES + ("all",))
    t.add_argument("--k", type=int, default=None, help="topics (default: size of the seed lexicon)")
    t.add_argument("--alpha", type=float, default=0.1)
    t.add_argument("--beta", type=float, default=0.01)
    t.add_argument("--iters", type=int, default=300)
    t.add_argument("--seed-confidence", type=float, default=0.15)
    t.add_argument("--seeds", help="seed lexicon JSON (default: built-in nine topics)")
    t.add_argument("--unguided", action="store_true", help="standard LDA without seed words")
    t.add_argument("--no-stopwords", action="store_true")
    t.add_argument("--top-words", type=int, default=8)
    t.add_argument("--rng-seed", type=int, default=0)
    t.add_argument("--out", required=True, help="output directory; writes <category>.json")
    t.set_defaults(func=cmd_topics_train)

    i = sub.add_parser("topics-infer", help="fold-in topic distributions for new documents")
    i.add_argument("--model", required=True)
    g = i.add_mutually_exclusive_group(required=True)
    g.add_argument("--text")
    g.add_argument("--data")
    i.add_argument("--category", choices=CATEGORIES)
    i.add_argument("--fold-in-iterations", type=int, default=50)
    i.add_argument("--rng-seed", type=int, default=0)
    i.add_argument("--csv")
    i.set_defaults(func=cmd_topics_infer)

    r = sub.add_parser("train", help="train an answer generator")
    r.add_argument("--train")
    r.add_argument("--valid")
    r.add_argument("--features", help=f"feature directory (default ${DATA_ENV}/features)")
    r.add_argument("--topic-models", help="topics-train output directory")
    r.add_argument("--word-vectors")
    r.add_argument("--config", help="JSON with optional 'model' and 'train' override objects")
    r.add_argument("--attention-mode")
    r.add_argument("--topic-mode")
    r.add_argument("--audio-mode", choices=tuple(AUDIO_MODES))
    r.add_argument("--video-mode", choices=("none", "fixed"))
    r.add_argument("--video-dim", type=int)
    r.add_argument("--embed-dim", type=int)
    r.add_argument("--hidden-dim", type=int)
    r.add_argument("--max-decode-len", type=int)
    r.add_argument("--K", type=int)
    r.add_argument("--epochs", type=int)
    r.add_argument("--lr", type=float)
    r.add_argument("--batch-size", type=int)
    r.add_argument("--clip-norm", type=float)
    r.add_argument("--min-frequency", type=int, default=2)
    r.add_argument("--fold-in-iterations", type=int, default=50)
    r.add_argument("--rng-seed", type=int, default=0)
    r.add_argument("--run-id", default="run")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_train)

    n = sub.add_parser("generate", help="decode answers with a trained checkpoint")
    n.add_argument("--checkpoint", required=True)
    n.add_argument("--data")
    n.add_argument("--features")
    n.add_argument("--topic-models")
    n.add_argument("--strategy", choices=("greedy", "beam"), default="greedy")
    n.add_argument("--beam-width", type=int, default=1)
    n.add_argument("--out", required=True, help="generated answers JSON")
    n.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="score generated answers overall and per subset")
    e.add_argument("--generated", required=True)
    e.add_argument("--keywords")
    e.add_argument("--subsets", nargs="*")
    e.add_argument("--out", help="directory for eval.csv, eval.txt and figures")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("matrix", help="run an experiment grid end to end")
    m.add_argument("--spec", required=True)
    m.add_argument("--keywords")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_matrix)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, ValueError, KeyError, FeatureLookupError, OSError, TrainingDivergence) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"avsd {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
