"""Synthetic clinical-note corpora with a tunable label signal.

Notes are filler prose with gazetteer terms injected.  Signal terms appear
with probability 0.5 + 0.5*signal in smoker notes and 0.5 - 0.5*signal in
non-smoker notes, so ``signal=1`` is perfectly separable and ``signal=0`` is
pure noise; decoy terms appear at a label-independent rate and absent terms
pad the lexicon without ever matching.  Term words are generated gibberish,
globally unique and disjoint from the filler vocabulary, so no term can nest
inside another.  Everything is driven by one seeded generator: equal seeds
give byte-identical corpora.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import LabeledCorpus, LabelSpace, Note, PhenotypeLabel
from .embeddings import EmbeddingSet
from .errors import ConfigError
from .lexicon import Lexicon

# Raw four-way label prior; consolidation drops unknowns, leaving roughly a
# 40/60 smoker/non-smoker split.
RAW_PRIORS = (
    (PhenotypeLabel.CURRENT_SMOKER, 0.22),
    (PhenotypeLabel.PAST_SMOKER, 0.12),
    (PhenotypeLabel.NON_SMOKER, 0.51),
    (PhenotypeLabel.UNKNOWN, 0.15),
)

DECOY_PRESENCE = 0.35

_FILLER = (
    "the patient was admitted with complaints of discomfort and was seen by "
    "the service for further review history reveals no acute distress on exam "
    "vital signs were stable labs within normal limits plan to continue "
    "current management follow up in clinic as needed denies fever chills or "
    "night sweats reports good appetite and sleep medications reviewed and "
    "reconciled at discharge"
).split()

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SynthSpec:
    n_train: int = 200
    n_test: int = 60
    signal: float = 0.8
    n_signal_terms: int = 12
    n_decoy_terms: int = 8
    n_absent_terms: int = 5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.signal <= 1.0):
            raise ConfigError("signal must be in [0, 1]")
        if self.n_train < 4 or self.n_test < 2:
            raise ConfigError("need at least 4 train and 2 test notes")
        if self.n_signal_terms < 1:
            raise ConfigError("need at least one signal term")


def _make_word(rng: np.random.Generator) -> str:
    syllables = rng.integers(2, 4)
    return "".join(
        _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
        for _ in range(syllables)
    )


def _make_terms(rng: np.random.Generator, count: int, used: set[str]) -> list[str]:
    terms = []
    for _ in range(count):
        words = []
        for _ in range(int(rng.integers(1, 4))):
            while True:
                w = _make_word(rng)
                if w not in used:
                    used.add(w)
                    break
            words.append(w)
        terms.append(" ".join(words))
    return terms


def _draw_label(rng: np.random.Generator) -> PhenotypeLabel:
    r = rng.random()
    acc = 0.0
    for label, p in RAW_PRIORS:
        acc += p
        if r < acc:
            return label
    return RAW_PRIORS[-1][0]


def _presence_prob(label: PhenotypeLabel, signal: float) -> float:
    if label in (PhenotypeLabel.CURRENT_SMOKER, PhenotypeLabel.PAST_SMOKER):
        return 0.5 + 0.5 * signal
    if label is PhenotypeLabel.NON_SMOKER:
        return 0.5 - 0.5 * signal
    return 0.5  # unknown-status notes carry no signal either way


def _render_note(rng: np.random.Generator, present_terms: list[str]) -> str:
    n_filler = int(rng.integers(30, 80))
    words = [_FILLER[rng.integers(len(_FILLER))] for _ in range(n_filler)]
    # messy surface forms: sporadic caps and punctuation on filler words
    for i in range(len(words)):
        r = rng.random()
        if r < 0.08:
            words[i] = words[i].upper()
        elif r < 0.16:
            words[i] = words[i].capitalize()
        if rng.random() < 0.12:
            words[i] += "." if rng.random() < 0.5 else ","
    tokens = list(words)
    for term in present_terms:
        pos = int(rng.integers(0, len(tokens) + 1))
        tokens.insert(pos, term.upper() if rng.random() < 0.2 else term)
    # ragged whitespace: newlines and double spaces survive until normalization
    seps = []
    for _ in range(len(tokens) - 1):
        r = rng.random()
        seps.append("\n" if r < 0.06 else ("  " if r < 0.12 else " "))
    out = [tokens[0]]
    for sep, tok in zip(seps, tokens[1:]):
        out.append(sep)
        out.append(tok)
    return "".join(out)


def _gen_notes(rng, spec: SynthSpec, signal_terms, decoy_terms, count, prefix):
    notes = []
    for i in range(count):
        label = _draw_label(rng)
        p = _presence_prob(label, spec.signal)
        present = [t for t in signal_terms if rng.random() < p]
        present += [t for t in decoy_terms if rng.random() < DECOY_PRESENCE]
        notes.append(
            Note(id=f"{prefix}-{i:05d}", text=_render_note(rng, present), label=label)
        )
    return notes


def _has_both_binary_classes(notes) -> bool:
    smoker = any(
        n.label in (PhenotypeLabel.CURRENT_SMOKER, PhenotypeLabel.PAST_SMOKER)
        for n in notes
    )
    non = any(n.label is PhenotypeLabel.NON_SMOKER for n in notes)
    return smoker and non


def generate_synthetic_corpus(spec: SynthSpec):
    """Returns (train_corpus, test_corpus, lexicon), all in the raw label space.

    Both splits are resampled (from the same seeded stream) until each
    contains both binary classes, so consolidation can never produce a
    single-class training set.
    """
    rng = np.random.default_rng(spec.seed)
    used: set[str] = set(_FILLER)
    signal_terms = _make_terms(rng, spec.n_signal_terms, used)
    decoy_terms = _make_terms(rng, spec.n_decoy_terms, used)
    absent_terms = _make_terms(rng, spec.n_absent_terms, used)

    for attempt in range(100):
        train_notes = _gen_notes(rng, spec, signal_terms, decoy_terms,
                                 spec.n_train, "tr")
        test_notes = _gen_notes(rng, spec, signal_terms, decoy_terms,
                                spec.n_test, "te")
        if _has_both_binary_classes(train_notes) and _has_both_binary_classes(test_notes):
            break
    else:  # pragma: no cover - astronomically unlikely at the given priors
        raise ConfigError("could not sample both classes in 100 attempts")

    lexicon = Lexicon(
        terms=sorted(signal_terms + decoy_terms + absent_terms), source="synthetic"
    )
    train = LabeledCorpus(notes=train_notes, label_space=LabelSpace.RAW4)
    test = LabeledCorpus(notes=test_notes, label_space=LabelSpace.RAW4)
    return train, test, lexicon


EMBED_CENTER_SCALE = 4.0


def corpus_embeddings(corpus: LabeledCorpus, dim: int = 16, signal: float = 0.8,
                      seed: int = 0, mode: str = "averaged") -> EmbeddingSet:
    """Synthetic per-note embeddings clustering by the binarized label.

    Class centers sit ``EMBED_CENTER_SCALE * signal`` apart from the origin
    over unit noise, so ``signal=0`` carries nothing and high signal is
    cleanly separable.  Unknown-status notes get pure noise; they are dropped
    by consolidation anyway.
    """
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((2, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= EMBED_CENTER_SCALE * signal
    vectors = []
    for note in corpus.notes:
        if note.label in (PhenotypeLabel.CURRENT_SMOKER, PhenotypeLabel.PAST_SMOKER,
                          PhenotypeLabel.SMOKER):
            center = centers[1]
        elif note.label is PhenotypeLabel.NON_SMOKER:
            center = centers[0]
        else:
            center = np.zeros(dim)
        if mode == "averaged":
            vectors.append((center + rng.standard_normal(dim)).astype(np.float32))
        else:
            chunks = int(rng.integers(1, 4))
            vectors.append(
                (center + rng.standard_normal((chunks, dim))).astype(np.float32)
            )
    return EmbeddingSet(mode=mode, dim=dim, ids=[n.id for n in corpus.notes],
                        vectors=vectors)
