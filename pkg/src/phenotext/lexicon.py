"""Gazetteer term scanning and binary presence features.

A lexicon is a flat list of lowercase medical terms (1..6 words each).  The
scanner finds whole-word phrase occurrences in normalized note text using
left-to-right maximal munch: at each word boundary the longest matching term
wins and consumes its span, so nested terms inside a longer match are not
reported separately.  The most common terms across a training corpus form
the vocabulary, and notes become binary presence rows over it.
"""

from __future__ import annotations

import csv
import importlib.resources
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _native
from .corpus import LabeledCorpus, Note, normalize_string
from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 250
MAX_TERM_WORDS = 6


@dataclass
class Lexicon:
    terms: list[str]
    source: str = ""

    def __post_init__(self):
        seen = set()
        for term in self.terms:
            if not term or term != term.strip():
                raise DataError(f"lexicon term {term!r} is empty or has outer whitespace")
            if term != term.lower():
                raise DataError(f"lexicon term {term!r} is not lowercase")
            if len(term.split(" ")) > MAX_TERM_WORDS:
                raise DataError(f"lexicon term {term!r} exceeds {MAX_TERM_WORDS} words")
            if term in seen:
                raise DataError(f"duplicate lexicon term {term!r}")
            seen.add(term)

    def __len__(self) -> int:
        return len(self.terms)


class ScanAutomaton:
    """Character trie over the term list, in both dict and flat-array form.

    The dict trie feeds the pure-Python kernel; the flat arrays (edges sorted
    by codepoint per node, walked by binary search) feed the compiled one.
    """

    def __init__(self, terms: list[str]):
        if not terms:
            raise DataError("cannot build a scanner from an empty lexicon")
        self.terms = list(terms)
        children: list[dict[str, int]] = [{}]
        term_at: list[int] = [-1]
        for ti, term in enumerate(self.terms):
            node = 0
            for ch in term:
                nxt = children[node].get(ch)
                if nxt is None:
                    nxt = len(children)
                    children[node][ch] = nxt
                    children.append({})
                    term_at.append(-1)
                node = nxt
            term_at[node] = ti
        self.children = children
        self.term_at = term_at

        n_nodes = len(children)
        first_edge = np.zeros(n_nodes + 1, dtype=np.int32)
        chars: list[int] = []
        targets: list[int] = []
        for node, edges in enumerate(children):
            for ch, target in sorted((ord(c), t) for c, t in edges.items()):
                chars.append(ch)
                targets.append(target)
            first_edge[node + 1] = len(chars)
        self.first_edge = first_edge
        self.edge_char = np.asarray(chars, dtype=np.uint32)
        self.edge_target = np.asarray(targets, dtype=np.int32)
        self.term_at_flat = np.asarray(term_at, dtype=np.int32)


class TermScanner:
    """Compiled (or pure-Python) matcher for one lexicon."""

    def __init__(self, lexicon: Lexicon, backend: str | None = None):
        self.lexicon = lexicon
        self.automaton = ScanAutomaton(lexicon.terms)
        if backend is None:
            backend = _native.BACKEND
        if backend == "compiled" and not _native.HAVE_COMPILED:
            raise DataError("compiled kernel module is not available")
        if backend not in ("compiled", "pure-python"):
            raise DataError(f"unknown scanner backend {backend!r}")
        self.backend = backend

    def scan_indices(self, text: str) -> set[int]:
        a = self.automaton
        if self.backend == "compiled":
            return _native.compiled.scan_flat(
                text, a.first_edge, a.edge_char, a.edge_target, a.term_at_flat
            )
        return _native.pure.scan_trie(text, a.children, a.term_at)

    def scan(self, text: str) -> set[str]:
        return {self.automaton.terms[i] for i in self.scan_indices(text)}


def scan_terms(note: Note, lexicon: Lexicon) -> set[str]:
    """Every lexicon term occurring in the note as a whole-word phrase match.

    Expects normalized text (lowercase, single spaces); each term is reported
    at most once.
    """
    return TermScanner(lexicon).scan(note.text)


@dataclass
class TermVocabulary:
    """Selected terms ordered by descending document frequency (ties: term order)."""

    terms: list[str]
    doc_freq: list[int]

    def __post_init__(self):
        if len(self.terms) != len(self.doc_freq):
            raise DataError("vocabulary terms and doc_freq lengths differ")
        for i in range(len(self.terms) - 1):
            a = (-self.doc_freq[i], self.terms[i])
            b = (-self.doc_freq[i + 1], self.terms[i + 1])
            if a > b:
                raise DataError("vocabulary is not sorted by (doc_freq desc, term asc)")
        if any(f < 1 for f in self.doc_freq):
            raise DataError("vocabulary doc_freq must be >= 1")

    def __len__(self) -> int:
        return len(self.terms)


def build_vocabulary(
    corpus: LabeledCorpus, lexicon: Lexicon, top_k: int = DEFAULT_TOP_K
) -> TermVocabulary:
    """Select the top_k most common lexicon terms by document frequency."""
    if len(corpus) == 0:
        raise DataError("cannot build a vocabulary from an empty corpus")
    if top_k < 1:
        raise DataError("top_k must be >= 1")
    scanner = TermScanner(lexicon)
    freq: Counter[str] = Counter()
    for note in corpus.notes:
        freq.update(scanner.scan(note.text))
    if not freq:
        raise DataError("no lexicon term matched any note; cannot featurize")
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return TermVocabulary(terms=[t for t, _ in ranked], doc_freq=[f for _, f in ranked])


@dataclass
class FeatureMatrix:
    """Binary presence matrix: rows are notes, columns follow the vocabulary."""

    values: np.ndarray  # (N, V) of {0.0, 1.0}
    row_ids: list[str]
    terms: list[str]
    labels: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        n, v = self.values.shape
        if n != len(self.row_ids) or v != len(self.terms):
            raise DataError("feature matrix shape does not match ids/terms")
        if self.labels is not None and len(self.labels) != n:
            raise DataError("feature matrix labels length mismatch")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def featurize(
    corpus: LabeledCorpus, vocab: TermVocabulary, with_labels: bool = True
) -> FeatureMatrix:
    """Binary presence rows for every note, scanned against the vocabulary.

    Test corpora are featurized against the training vocabulary unchanged;
    all-zero rows (no vocabulary term present) are retained.
    """
    if len(vocab) == 0:
        raise DataError("cannot featurize with an empty vocabulary")
    scanner = TermScanner(Lexicon(terms=list(vocab.terms), source="vocabulary"))
    col = {t: j for j, t in enumerate(vocab.terms)}
    values = np.zeros((len(corpus), len(vocab)), dtype=np.float64)
    for i, note in enumerate(corpus.notes):
        for term in scanner.scan(note.text):
            values[i, col[term]] = 1.0
    labels = [n.label.value for n in corpus.notes] if with_labels else None
    return FeatureMatrix(
        values=values, row_ids=[n.id for n in corpus.notes], terms=list(vocab.terms),
        labels=labels,
    )


# ---------------------------------------------------------------------------
# File formats


def load_lexicon(path) -> Lexicon:
    """One term per line; '#' starts a comment, blank lines are skipped."""
    terms = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                terms.append(normalize_string(line))
    return Lexicon(terms=terms, source=str(path))


def load_builtin_lexicon() -> Lexicon:
    """The curated disease/chemical list shipped with the package."""
    text = (
        importlib.resources.files("phenotext")
        .joinpath("data/disease_terms.txt")
        .read_text(encoding="utf-8")
    )
    terms = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            terms.append(line)
    return Lexicon(terms=terms, source="builtin")


def save_vocabulary(vocab: TermVocabulary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "term", "doc_freq"])
        for rank, (term, freq) in enumerate(zip(vocab.terms, vocab.doc_freq), start=1):
            writer.writerow([rank, term, freq])


def load_vocabulary(path) -> TermVocabulary:
    terms, freqs = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["rank", "term", "doc_freq"]:
            raise DataError(f"{path}: expected header rank,term,doc_freq")
        for row in reader:
            if len(row) != 3:
                raise DataError(f"{path}: malformed vocabulary row {row!r}")
            terms.append(row[1])
            freqs.append(int(row[2]))
    return TermVocabulary(terms=terms, doc_freq=freqs)


def save_features(matrix: FeatureMatrix, path) -> None:
    """CSV with header id,<term1>,...,<termV>[,label]."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["id"] + list(matrix.terms)
        if matrix.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i, row_id in enumerate(matrix.row_ids):
            row = [row_id] + [str(int(v)) for v in matrix.values[i]]
            if matrix.labels is not None:
                row.append(matrix.labels[i])
            writer.writerow(row)


def load_features(path) -> FeatureMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise DataError(f"{path}: expected a feature CSV with an id column")
        has_labels = header[-1] == "label"
        terms = header[1 : -1 if has_labels else len(header)]
        ids, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} fields")
            ids.append(row[0])
            vals = row[1 : 1 + len(terms)]
            try:
                rows.append([float(v) for v in vals])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric feature value") from None
            if has_labels:
                labels.append(row[-1])
    values = np.asarray(rows, dtype=np.float64).reshape(len(ids), len(terms))
    return FeatureMatrix(
        values=values, row_ids=ids, terms=list(terms),
        labels=labels if has_labels else None,
    )
