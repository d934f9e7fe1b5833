"""Command-line entry point.

Subcommands cover every pipeline stage (ingest, featurize, pca, train,
predict, evaluate, embed, synth) plus ``end-to-end``, which runs the whole
comparison from a key-value config file; any exposed flag overrides its
config key.  Exit codes: 0 success, 1 usage error, 2 data/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import classifiers, neuralnet, pipeline
from ._native import BACKEND
from .config import PipelineConfig, apply_overrides, config_hash, load_config, write_meta_sidecar
from .corpus import (
    SPACE_CLASSES,
    LabelSpace,
    consolidate_labels,
    ingest_corpus,
    normalize_text,
    write_corpus_jsonl,
)
from .embeddings import (
    read_labels_jsonl,
    read_pheb,
    synth_embeddings,
    write_labels_jsonl,
    write_pheb,
)
from .errors import DataError, PhenotextError
from .lexicon import (
    FeatureMatrix,
    build_vocabulary,
    featurize,
    load_builtin_lexicon,
    load_features,
    load_lexicon,
    load_vocabulary,
    save_features,
    save_vocabulary,
)
from .metrics import save_report
from .pca import fit_pca, load_pca, save_pca, transform_pca
from .synth import SynthSpec, corpus_embeddings, generate_synthetic_corpus

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage problems; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


# ---------------------------------------------------------------------------
# shared helpers


def _class_names_for(labels) -> list[str]:
    present = set(labels)
    for space in (LabelSpace.BINARY2, LabelSpace.RAW4):
        names = [str(c) for c in SPACE_CLASSES[space]]
        if present <= set(names):
            return names
    return sorted(present)


def _labels_to_indices(labels, names: list[str]) -> np.ndarray:
    order = {n: i for i, n in enumerate(names)}
    out = []
    for lab in labels:
        if lab not in order:
            raise DataError(f"label {lab!r} is outside the class set {names}")
        out.append(order[lab])
    return np.asarray(out, dtype=np.int64)


def _require_labels(feats: FeatureMatrix, path) -> list[str]:
    if feats.labels is None:
        raise DataError(f"{path} has no label column")
    return feats.labels


def _save_matrix_csv(path, ids, cols, values, labels=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["id"] + list(cols) + (["label"] if labels is not None else [])
        writer.writerow(header)
        for i, row_id in enumerate(ids):
            row = [row_id] + [str(float(v)) for v in values[i]]
            if labels is not None:
                row.append(labels[i])
            writer.writerow(row)


def _meta_field(artifact_path, key: str) -> str | None:
    meta_path = f"{artifact_path}.meta.json"
    if not os.path.exists(meta_path):
        return None
    try:
        with open(meta_path, encoding="utf-8") as fh:
            return json.load(fh).get(key)
    except (OSError, json.JSONDecodeError):
        return None


def _meta_hash(artifact_path) -> str | None:
    return _meta_field(artifact_path, "config_hash")


def _warn_hash_mismatch(**named) -> None:
    """Warn when lineage hashes that should agree do not.

    Sidecars record a lineage hash: the stage's knobs plus its inputs'
    lineages, with file paths excluded so the train and test halves of one
    flow share a hash. Comparisons are like-for-like (e.g. the features a
    model was fit on vs the features it is applied to); unknown lineage
    (missing sidecar) stays silent.
    """
    known = {k: v for k, v in named.items() if v}
    if len(set(known.values())) > 1:
        detail = ", ".join(f"{k}={v[:12]}" for k, v in sorted(known.items()))
        log.warning("inputs were produced by different configs: %s", detail)


def _stage_hash(command: str, args: argparse.Namespace, keys: list[str]) -> str:
    return config_hash({"command": command, **{k: getattr(args, k) for k in keys}})


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_ingest(args) -> int:
    corpus = ingest_corpus(args.infile, format=args.format)
    n_raw = len(corpus)
    corpus = normalize_text(corpus)
    if args.consolidate:
        corpus = consolidate_labels(corpus)
    write_corpus_jsonl(corpus, args.out)
    lineage = config_hash({"stage": "ingest", "source": _meta_hash(args.infile),
                           "format": args.format, "consolidate": args.consolidate})
    write_meta_sidecar(args.out, lineage)
    print(f"ingested {n_raw} notes -> {len(corpus)} written to {args.out} "
          f"({corpus.label_space.value})")
    return 0


def cmd_featurize(args) -> int:
    corpus = normalize_text(ingest_corpus(args.corpus))
    corpus_lin = _meta_hash(args.corpus)
    if args.vocab and os.path.exists(args.vocab):
        vocab = load_vocabulary(args.vocab)
        vocab_lin = _meta_hash(args.vocab)
        _warn_hash_mismatch(corpus=corpus_lin,
                            vocab_corpus=_meta_field(args.vocab, "corpus_lineage"))
    else:
        lexicon = load_lexicon(args.lexicon) if args.lexicon else load_builtin_lexicon()
        vocab = build_vocabulary(corpus, lexicon, top_k=args.top_k)
        vocab_lin = config_hash({"stage": "vocabulary", "corpus": corpus_lin,
                                 "lexicon": args.lexicon or "builtin",
                                 "top_k": args.top_k})
        if args.vocab:
            save_vocabulary(vocab, args.vocab)
            write_meta_sidecar(args.vocab, vocab_lin,
                               {"corpus_lineage": corpus_lin, "n_terms": len(vocab)})
    feats = featurize(corpus, vocab)
    save_features(feats, args.out)
    write_meta_sidecar(args.out, config_hash({"stage": "featurize",
                                              "corpus": corpus_lin,
                                              "vocab": vocab_lin}))
    print(f"featurized {feats.shape[0]} notes x {feats.shape[1]} terms -> {args.out}")
    return 0


def cmd_pca(args) -> int:
    if args.pca_cmd == "fit":
        feats = load_features(args.infile)
        model = fit_pca(feats.values, n_components=args.components)
        feat_lin = _meta_hash(args.infile)
        lineage = config_hash({"stage": "pca", "features": feat_lin,
                               "components": args.components})
        save_pca(model, args.model,
                 extra={"config_hash": lineage, "features_lineage": feat_lin})
        ev = ", ".join(f"{v:.4f}" for v in model.explained_variance)
        print(f"fit pca({args.components}) on {feats.shape[0]} rows -> {args.model}")
        print(f"explained variance: {ev}")
        return 0
    # transform
    model = load_pca(args.model)
    feats = load_features(args.infile)
    with open(args.model, encoding="utf-8") as fh:
        payload = json.load(fh)
    feat_lin = _meta_hash(args.infile)
    _warn_hash_mismatch(model_fit_features=payload.get("features_lineage"),
                        features=feat_lin)
    z = transform_pca(model, feats.values)
    cols = [f"pc{i + 1}" for i in range(z.shape[1])]
    _save_matrix_csv(args.out, feats.row_ids, cols, z, feats.labels)
    write_meta_sidecar(args.out,
                       config_hash({"stage": "transform",
                                    "model": payload.get("config_hash"),
                                    "features": feat_lin}),
                       {"n_components": z.shape[1]})
    print(f"transformed {z.shape[0]} rows -> {args.out}")
    return 0


def _trainer_config_from_args(args, class_weights=None) -> neuralnet.TrainerConfig:
    return neuralnet.TrainerConfig(
        learning_rate=args.lr,
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        class_weights=class_weights,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    input_lin = _meta_hash(args.embeddings if args.algo == "lstm" else args.infile)
    chash = config_hash({"stage": "train", "algo": args.algo, "seed": args.seed,
                         "input": input_lin})
    if args.algo == "lstm":
        if not args.embeddings or not args.labels:
            raise DataError("train --algo lstm needs --embeddings and --labels")
        es = read_pheb(args.embeddings)
        if len(es) == 0:
            raise DataError(f"{args.embeddings}: empty embedding file")
        by_id = read_labels_jsonl(args.labels)
        missing = [i for i in es.ids if i not in by_id]
        if missing:
            raise DataError(
                f"{len(missing)} embedding id(s) missing from {args.labels}: "
                + ", ".join(repr(m) for m in missing[:5])
            )
        labels = [by_id[i] for i in es.ids]
        names = _class_names_for(labels)
        y = _labels_to_indices(labels, names)
        cfg = _trainer_config_from_args(args)
        net = neuralnet.embed_baseline_train(
            es, y, cfg, hidden_layers=_parse_layers(args.layers or "64"),
            dropout_rate=args.dropout,
        )
        neuralnet.save_net(net, args.out,
                           extra={"class_names": names, "config_hash": chash,
                                  "train_input_lineage": input_lin})
        print(f"trained lstm baseline on {len(es)} embeddings -> {args.out}")
        return 0

    feats = load_features(args.infile)
    labels = _require_labels(feats, args.infile)
    names = _class_names_for(labels)
    y = _labels_to_indices(labels, names)
    X = feats.values
    if args.algo == "knn":
        model = classifiers.KnnModel(k=args.k, points=X, labels=y)
        classifiers.save_knn(model, args.out,
                             extra={"class_names": names, "config_hash": chash,
                                    "train_input_lineage": input_lin})
    elif args.algo == "svm":
        gamma = args.gamma if args.gamma == "scale" else float(args.gamma)
        cfg = classifiers.SvmConfig(c_penalty=args.c, kernel=args.kernel,
                                    gamma=gamma, seed=args.seed)
        model = classifiers.svm_fit(X, y, cfg)
        classifiers.save_svm(model, args.out,
                             extra={"class_names": names, "config_hash": chash,
                                    "train_input_lineage": input_lin})
    elif args.algo == "mlp":
        spec = neuralnet.NetSpec(
            input_dim=X.shape[1],
            hidden_layers=_parse_layers(args.layers or "32,16,8,4,2,1"),
            output_classes=len(names), cell="dense", dropout_rate=args.dropout,
        )
        net = neuralnet.NeuralNet(spec, seed=args.seed)
        valid = None
        if args.valid:
            vfeats = load_features(args.valid)
            vy = _labels_to_indices(_require_labels(vfeats, args.valid), names)
            valid = (vfeats.values, vy)
        neuralnet.train(net, (X, y), valid, _trainer_config_from_args(args))
        neuralnet.save_net(net, args.out,
                           extra={"class_names": names, "config_hash": chash,
                                  "train_input_lineage": input_lin})
    else:  # pragma: no cover - argparse restricts choices
        raise DataError(f"unknown algo {args.algo!r}")
    print(f"trained {args.algo} on {len(y)} rows -> {args.out}")
    return 0


def _parse_layers(raw: str) -> tuple:
    try:
        layers = tuple(int(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise DataError(f"bad --layers value {raw!r}; want e.g. 32,16,8") from None
    if not layers:
        raise DataError("--layers must name at least one layer size")
    return layers


def _model_inputs(model, payload, test_path):
    """Input records for a model: (ids, inputs, features-or-None)."""
    if payload["algo"] == "lstm":
        es = read_pheb(test_path)
        return es.ids, neuralnet.embeddings_to_sequences(es), None
    feats = load_features(test_path)
    return feats.row_ids, feats.values, feats


def cmd_predict(args) -> int:
    model, payload = pipeline.load_model(args.model)
    ids, inputs, feats = _model_inputs(model, payload, args.infile)
    _warn_hash_mismatch(model_trained_on=payload.get("train_input_lineage"),
                        features=_meta_hash(args.infile))
    pred = pipeline.predict_with(model, inputs)
    names = payload.get("class_names") or [str(i) for i in range(int(pred.max()) + 1)]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "prediction"])
        for note_id, p in zip(ids, pred):
            writer.writerow([note_id, names[int(p)]])
    print(f"wrote {len(ids)} predictions -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model, payload = pipeline.load_model(args.model)
    ids, inputs, feats = _model_inputs(model, payload, args.test)
    _warn_hash_mismatch(model_trained_on=payload.get("train_input_lineage"),
                        features=_meta_hash(args.test))
    if args.gold:
        by_id = read_labels_jsonl(args.gold)
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise DataError(
                f"{len(missing)} test id(s) missing from {args.gold}: "
                + ", ".join(repr(m) for m in missing[:5])
            )
        gold_labels = [by_id[i] for i in ids]
    else:
        if feats is None:
            raise DataError("embedding input needs --gold labels")
        gold_labels = _require_labels(feats, args.test)
    names = payload.get("class_names") or _class_names_for(gold_labels)
    gold = _labels_to_indices(gold_labels, names)
    report = pipeline.evaluate_run(model, inputs, gold, names, payload["algo"])
    save_report(report, args.report)
    if args.table:
        print(report.render(), end="")
    print(f"micro-F1 {report.micro_f1:.4f} on {report.n_examples} examples "
          f"-> {args.report}")
    return 0


def cmd_embed(args) -> int:
    if args.embed_cmd == "inspect":
        es = read_pheb(args.file)
        print(f"format: PHEB1 v1  mode: {es.mode}  records: {len(es)}  dim: {es.dim}")
        for note_id, vec in zip(es.ids, es.vectors):
            chunks = 1 if es.mode == "averaged" else vec.shape[0]
            print(f"{note_id}\t{chunks}")
        return 0
    # synth
    es, labels = synth_embeddings(args.n, args.dim, n_classes=args.classes,
                                  mode=args.mode, seed=args.seed)
    write_pheb(es, args.out)
    write_labels_jsonl(es.ids, [str(int(c)) for c in labels],
                       f"{args.out}.labels.jsonl")
    print(f"wrote {len(es)} {es.mode} embeddings (dim {es.dim}) -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(n_train=args.train_n, n_test=args.test_n, signal=args.signal,
                     n_signal_terms=args.n_terms, seed=args.seed)
    train, test, lexicon = generate_synthetic_corpus(spec)
    os.makedirs(args.out, exist_ok=True)
    chash = _stage_hash(
        "synth", args, ["train_n", "test_n", "signal", "n_terms", "seed", "emb_dim"]
    )
    paths = {}

    def emit(name):
        paths[name] = os.path.join(args.out, name)
        return paths[name]

    write_corpus_jsonl(train, emit("train.jsonl"))
    write_corpus_jsonl(test, emit("test.jsonl"))
    with open(emit("lexicon.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lexicon.terms) + "\n")
    for split, corpus, sub_seed in (("train", train, 1), ("test", test, 2)):
        es = corpus_embeddings(corpus, dim=args.emb_dim, signal=args.signal,
                               seed=spec.seed * 1000 + sub_seed)
        path = emit(f"emb_{split}.pheb")
        write_pheb(es, path)
        write_labels_jsonl(es.ids, [n.label.value for n in corpus.notes],
                           f"{path}.labels.jsonl")
    for path in paths.values():
        write_meta_sidecar(path, chash)
    print(f"synthetic corpus (signal={args.signal}, seed={args.seed}):")
    for name in sorted(paths):
        print(f"  {paths[name]}")
    return 0


def cmd_end_to_end(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides: dict[str, str] = {}
    for key, value in (
        ("train_path", args.train),
        ("test_path", args.test),
        ("lexicon_path", args.lexicon),
        ("out_dir", args.out_dir),
        ("seed", args.seed),
        ("top_k", args.top_k),
        ("n_components", args.components),
        ("knn_k", args.knn_k),
        ("embeddings_train", args.embeddings_train),
        ("embeddings_test", args.embeddings_test),
    ):
        if value is not None:
            overrides[key] = str(value)
    if args.consolidate is not None:
        overrides["consolidate"] = str(args.consolidate)
    for item in args.set or []:
        if "=" not in item:
            raise DataError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = raw.strip()
    cfg = apply_overrides(cfg, overrides)
    result = pipeline.run_end_to_end(cfg)
    print(f"{'model':<8} micro-F1")
    print("-" * 17)
    for name, score in sorted(result.scores.items()):
        print(f"{name:<8} {score:.4f}")
    print(f"artifacts in {result.out_dir} (config {result.config_hash[:12]})")
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="phenotext",
                     description="clinical-note phenotyping pipeline")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log stage timings and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="read a corpus, normalize, write jsonl")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["jsonl", "n2c2", "n2c2_xml"], default="jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--consolidate", action="store_true",
                   help="merge smoker labels and drop unknowns")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="term presence features from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", default="", help="term list (default: bundled)")
    p.add_argument("--vocab", default="",
                   help="vocabulary csv: loaded if present, else built and saved")
    p.add_argument("--top-k", dest="top_k", type=int, default=250)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("pca", help="fit or apply the PCA projection")
    psub = p.add_subparsers(dest="pca_cmd", required=True, metavar="fit|transform")
    pf = psub.add_parser("fit")
    pf.add_argument("--in", dest="infile", required=True)
    pf.add_argument("--components", type=int, default=7)
    pf.add_argument("--model", required=True)
    pt = psub.add_parser("transform")
    pt.add_argument("--model", required=True)
    pt.add_argument("--in", dest="infile", required=True)
    pt.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("train", help="fit a classifier on transformed features")
    p.add_argument("--algo", choices=["knn", "svm", "mlp", "lstm"], required=True)
    p.add_argument("--in", dest="infile", help="training csv (knn/svm/mlp)")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=27)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    p.add_argument("--gamma", default="scale")
    p.add_argument("--layers", default="", help="comma sizes, e.g. 32,16,8,4,2,1")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--max-epochs", dest="max_epochs", type=int, default=500)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--valid", default="", help="validation csv (mlp)")
    p.add_argument("--embeddings", default="", help="PHEB1 file (lstm)")
    p.add_argument("--labels", default="", help="labels jsonl sidecar (lstm)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write predictions for a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model and write a report")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True, help="features csv or PHEB1 file")
    p.add_argument("--gold", default="", help="labels jsonl (default: label column)")
    p.add_argument("--report", required=True)
    p.add_argument("--table", action="store_true", help="print the aligned table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("embed", help="inspect or synthesize embedding files")
    esub = p.add_subparsers(dest="embed_cmd", required=True, metavar="inspect|synth")
    ei = esub.add_parser("inspect")
    ei.add_argument("file")
    es = esub.add_parser("synth")
    es.add_argument("--n", type=int, default=100)
    es.add_argument("--dim", type=int, default=16)
    es.add_argument("--classes", type=int, default=2)
    es.add_argument("--seed", type=int, default=0)
    es.add_argument("--mode", choices=["averaged", "per_chunk"], default="averaged")
    es.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train-n", dest="train_n", type=int, default=200)
    p.add_argument("--test-n", dest="test_n", type=int, default=60)
    p.add_argument("--signal", type=float, default=0.8)
    p.add_argument("--n-terms", dest="n_terms", type=int, default=12)
    p.add_argument("--emb-dim", dest="emb_dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("end-to-end", help="run the full comparison pipeline")
    p.add_argument("--config", default="", help="key = value config file")
    p.add_argument("--train", help="training corpus path")
    p.add_argument("--test", help="test corpus path")
    p.add_argument("--lexicon")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--components", type=int)
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--embeddings-train", dest="embeddings_train")
    p.add_argument("--embeddings-test", dest="embeddings_test")
    p.add_argument("--consolidate", dest="consolidate", action="store_true",
                   default=None)
    p.add_argument("--no-consolidate", dest="consolidate", action="store_false")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key")
    p.set_defaults(func=cmd_end_to_end)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.debug("kernel backend: %s", BACKEND)
    try:
        return args.func(args)
    except PhenotextError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
