"""End-to-end run: corpora in, evaluation reports and fitted models out.

Stages: ingest -> normalize -> (optionally) consolidate labels -> vocabulary
-> binary features -> PCA -> kNN / SVM / perceptron stack -> reports.  When
the config points at precomputed note embeddings, a recurrent baseline is
trained over them as an extra branch.

Every artifact is written atomically with sorted keys and carries the config
hash, so two runs with the same config and inputs produce byte-identical
files.  Wall-clock stage timings are deliberately quarantined in their own
``timings.json``, which is the single non-reproducible output.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import classifiers, neuralnet
from .config import PipelineConfig, config_hash, save_config, write_meta_sidecar
from .corpus import LabeledCorpus, LabelSpace, consolidate_labels, ingest_corpus, normalize_text
from .embeddings import EmbeddingSet, read_pheb
from .errors import DataError
from .lexicon import (
    build_vocabulary,
    featurize,
    load_builtin_lexicon,
    load_lexicon,
    save_features,
    save_vocabulary,
)
from .metrics import EvalReport, build_report, save_report
from .pca import fit_pca, save_pca, transform_pca

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    out_dir: str
    config_hash: str
    reports: dict[str, EvalReport] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def scores(self) -> dict[str, float]:
        return {name: rep.micro_f1 for name, rep in self.reports.items()}


class _Clock:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def lap(self, stage: str) -> None:
        now = time.perf_counter()
        self.timings[stage] = round(now - self._t0, 6)
        log.info("stage %-10s %.3fs", stage, self.timings[stage])
        self._t0 = now


def load_model(path):
    """Read a serialized model JSON; returns (model, raw payload dict)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    algo = payload.get("algo")
    if algo == "knn":
        return classifiers.load_knn(payload), payload
    if algo == "svm":
        return classifiers.load_svm(payload), payload
    if algo in ("mlp", "lstm"):
        return neuralnet.load_net(payload), payload
    raise DataError(f"{path}: unknown or missing model algo {algo!r}")


def predict_with(model, inputs) -> np.ndarray:
    """Class indices from any fitted model on features or sequences."""
    if isinstance(model, classifiers.KnnModel):
        return classifiers.knn_predict_batch(model, inputs)
    if isinstance(model, classifiers.SvmModel):
        return classifiers.svm_predict_batch(model, inputs)
    if isinstance(model, neuralnet.NeuralNet):
        return model.predict(inputs)
    raise DataError(f"cannot predict with object of type {type(model).__name__}")


def evaluate_run(model, inputs, gold_indices, class_names, model_name: str) -> EvalReport:
    """Score a fitted model; wall clock is measured around prediction only.

    The measured seconds land on the report's volatile field (logged, never
    serialized), keeping report files deterministic.
    """
    t0 = time.perf_counter()
    pred = predict_with(model, inputs)
    seconds = time.perf_counter() - t0
    report = build_report(model_name, pred, gold_indices, class_names)
    report.wall_clock_seconds = seconds
    log.info("evaluated %s on %d examples in %.3fs", model_name, len(pred), seconds)
    return report


def _align_embeddings(es: EmbeddingSet, corpus: LabeledCorpus) -> EmbeddingSet:
    """Subset/reorder an embedding set to match corpus note order by id."""
    by_id = {nid: vec for nid, vec in zip(es.ids, es.vectors)}
    missing = [n.id for n in corpus.notes if n.id not in by_id]
    if missing:
        shown = ", ".join(repr(m) for m in missing[:5])
        raise DataError(
            f"{len(missing)} corpus note(s) have no embedding record: {shown}"
        )
    ids = [n.id for n in corpus.notes]
    return EmbeddingSet(
        mode=es.mode, dim=es.dim, ids=ids, vectors=[by_id[i] for i in ids]
    )


def _trainer_config(cfg: PipelineConfig, class_weights) -> neuralnet.TrainerConfig:
    return neuralnet.TrainerConfig(
        learning_rate=cfg.learning_rate,
        lr_floor=cfg.lr_floor,
        lr_reduce_factor=cfg.lr_reduce_factor,
        lr_patience=cfg.lr_patience,
        early_stop_patience=cfg.early_stop_patience,
        min_delta=cfg.min_delta,
        max_epochs=cfg.max_epochs,
        restart_f1_threshold=cfg.restart_f1_threshold,
        max_restarts=cfg.max_restarts,
        class_weights=class_weights,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )


def run_end_to_end(cfg: PipelineConfig) -> RunResult:
    if not cfg.train_path or not cfg.test_path:
        raise DataError("config must set train_path and test_path")
    os.makedirs(cfg.out_dir, exist_ok=True)
    chash = config_hash(cfg)
    result = RunResult(out_dir=cfg.out_dir, config_hash=chash)
    clock = _Clock()

    def out(name: str) -> str:
        path = os.path.join(cfg.out_dir, name)
        result.artifacts[name] = path
        return path

    save_config(cfg, out("config_used.txt"))
    write_meta_sidecar(result.artifacts["config_used.txt"], chash)

    train = ingest_corpus(cfg.train_path, format=cfg.corpus_format)
    test = ingest_corpus(cfg.test_path, format=cfg.corpus_format,
                         label_space=train.label_space)
    clock.lap("ingest")

    train = normalize_text(train)
    test = normalize_text(test)
    if cfg.consolidate and train.label_space is LabelSpace.RAW4:
        train = consolidate_labels(train)
        test = consolidate_labels(test)
    clock.lap("normalize")

    lexicon = load_lexicon(cfg.lexicon_path) if cfg.lexicon_path else load_builtin_lexicon()
    vocab = build_vocabulary(train, lexicon, top_k=cfg.top_k)
    save_vocabulary(vocab, out("vocabulary.csv"))
    write_meta_sidecar(result.artifacts["vocabulary.csv"], chash,
                       {"n_terms": len(vocab)})
    clock.lap("vocabulary")

    feats_train = featurize(train, vocab)
    feats_test = featurize(test, vocab)
    save_features(feats_train, out("features_train.csv"))
    save_features(feats_test, out("features_test.csv"))
    write_meta_sidecar(result.artifacts["features_train.csv"], chash)
    write_meta_sidecar(result.artifacts["features_test.csv"], chash)
    clock.lap("featurize")

    pca = fit_pca(feats_train.values, n_components=cfg.n_components)
    z_train = transform_pca(pca, feats_train.values)
    z_test = transform_pca(pca, feats_test.values)
    save_pca(pca, out("pca.json"), extra={"config_hash": chash})
    clock.lap("pca")

    class_names = [str(c) for c in train.class_names]
    y_train = np.asarray(train.class_indices(), dtype=np.int64)
    y_test = np.asarray(test.class_indices(), dtype=np.int64)
    n_classes = len(class_names)

    def finish(name: str, pred: np.ndarray) -> None:
        report = build_report(name, pred, y_test, class_names,
                              extra={"config_hash": chash})
        result.reports[name] = report
        save_report(report, out(f"report_{name}.json"))

    if cfg.knn_k > len(y_train):
        raise DataError(
            f"knn_k={cfg.knn_k} exceeds the {len(y_train)} training notes"
        )
    knn = classifiers.KnnModel(k=cfg.knn_k, points=z_train, labels=y_train)
    classifiers.save_knn(knn, out("model_knn.json"), extra={"config_hash": chash})
    finish("knn", classifiers.knn_predict_batch(knn, z_test))
    clock.lap("knn")

    present = np.unique(y_train)
    if n_classes == 2 and len(present) == 2:
        svm_cfg = classifiers.SvmConfig(
            c_penalty=cfg.svm_c, kernel=cfg.svm_kernel, gamma=cfg.gamma_value(),
            tol=cfg.svm_tol, max_passes=cfg.svm_max_passes, seed=cfg.seed,
        )
        svm = classifiers.svm_fit(z_train, y_train, svm_cfg)
        classifiers.save_svm(svm, out("model_svm.json"), extra={"config_hash": chash})
        finish("svm", classifiers.svm_predict_batch(svm, z_test))
    else:
        log.warning("svm branch skipped: needs a two-class label space "
                    "with both classes present")
    clock.lap("svm")

    # the perceptron stack trains plain; class weighting and dropout belong
    # to the embedding baseline branch
    spec = neuralnet.NetSpec(
        input_dim=z_train.shape[1], hidden_layers=cfg.mlp_hidden,
        output_classes=n_classes, cell="dense", dropout_rate=0.0,
    )
    mlp = neuralnet.NeuralNet(spec, seed=cfg.seed)
    neuralnet.train(mlp, (z_train, y_train), None, _trainer_config(cfg, None))
    neuralnet.save_net(mlp, out("model_mlp.json"), extra={"config_hash": chash})
    finish("mlp", mlp.predict(z_test))
    clock.lap("mlp")

    if cfg.embeddings_train:
        es_train = _align_embeddings(read_pheb(cfg.embeddings_train), train)
        es_test = _align_embeddings(read_pheb(cfg.embeddings_test), test)
        if es_train.dim != es_test.dim:
            raise DataError(
                f"embedding dims differ: train {es_train.dim} vs test {es_test.dim}"
            )
        lstm = neuralnet.embed_baseline_train(
            es_train, y_train, _trainer_config(cfg, None),
            dropout_rate=cfg.dropout_rate,
        )
        neuralnet.save_net(lstm, out("model_lstm.json"), extra={"config_hash": chash})
        seqs = neuralnet.embeddings_to_sequences(es_test)
        finish("lstm", lstm.predict(seqs))
        clock.lap("lstm")

    summary = {
        "config_hash": chash,
        "n_train": len(y_train),
        "n_test": len(y_test),
        "label_space": train.label_space.value,
        "class_names": class_names,
        "vocab_size": len(vocab),
        "n_components": cfg.n_components,
        "micro_f1": {k: v for k, v in sorted(result.scores.items())},
    }
    _atomic_write(out("summary.json"),
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    lines = [f"{'model':<8} micro-F1", "-" * 17]
    lines += [f"{name:<8} {f1:.4f}" for name, f1 in sorted(result.scores.items())]
    _atomic_write(out("summary.txt"), "\n".join(lines) + "\n")

    result.timings = clock.timings
    _atomic_write(out("timings.json"),
                  json.dumps(clock.timings, indent=2, sort_keys=True) + "\n")
    return result


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
