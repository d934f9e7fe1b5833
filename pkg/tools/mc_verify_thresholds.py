"""Monte-Carlo check of the end-to-end synthetic thresholds before freezing.

Runs the full pipeline over many seeds at signal 0.8 (expects the KNN row
comfortably above 0.90) and at signal 0.0 (expects KNN micro-F1 to track the
test-set majority prior within 0.1 on average).  Run from the repo root:

    python tools/mc_verify_thresholds.py
"""

from __future__ import annotations

import os
import sys
import tempfile
import time

import numpy as np

from phenotext.config import PipelineConfig
from phenotext.corpus import consolidate_labels, write_corpus_jsonl
from phenotext.pipeline import run_end_to_end
from phenotext.synth import SynthSpec, generate_synthetic_corpus


def one_run(seed: int, signal: float, max_epochs: int) -> tuple[float, float]:
    """Returns (knn micro-F1, test majority prior) for one seeded corpus."""
    spec = SynthSpec(n_train=400, n_test=100, signal=signal, seed=seed)
    train, test, lexicon = generate_synthetic_corpus(spec)
    with tempfile.TemporaryDirectory() as tmp:
        train_path = os.path.join(tmp, "train.jsonl")
        test_path = os.path.join(tmp, "test.jsonl")
        lex_path = os.path.join(tmp, "lexicon.txt")
        write_corpus_jsonl(train, train_path)
        write_corpus_jsonl(test, test_path)
        with open(lex_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lexicon.terms) + "\n")
        cfg = PipelineConfig(
            train_path=train_path, test_path=test_path, lexicon_path=lex_path,
            out_dir=os.path.join(tmp, "run"), seed=seed, max_epochs=max_epochs,
        )
        result = run_end_to_end(cfg)
    gold = np.array(consolidate_labels(test).class_indices())
    prior = max(np.mean(gold == c) for c in np.unique(gold))
    return result.scores["knn"], float(prior)


def main() -> int:
    t0 = time.perf_counter()
    print("signal=0.8, seeds 0..9 (threshold: every KNN micro-F1 >= 0.90)")
    worst = 1.0
    for seed in range(10):
        f1, prior = one_run(seed, 0.8, max_epochs=500)
        worst = min(worst, f1)
        print(f"  seed {seed}: knn={f1:.4f} prior={prior:.2f}")
    print(f"  worst: {worst:.4f}  margin over 0.90: {worst - 0.90:+.4f}")

    print("signal=0.0, seeds 0..4 (threshold: |mean knn - mean prior| <= 0.1)")
    f1s, priors = [], []
    for seed in range(5):
        f1, prior = one_run(seed, 0.0, max_epochs=50)
        f1s.append(f1)
        priors.append(prior)
        print(f"  seed {seed}: knn={f1:.4f} prior={prior:.2f}")
    gap = abs(float(np.mean(f1s)) - float(np.mean(priors)))
    print(f"  mean knn {np.mean(f1s):.4f} vs mean prior {np.mean(priors):.4f} "
          f"-> gap {gap:.4f} (limit 0.1)")
    print(f"total {time.perf_counter() - t0:.1f}s")
    ok = worst >= 0.90 and gap <= 0.1
    print("VERDICT:", "thresholds hold" if ok else "THRESHOLDS DO NOT HOLD")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
