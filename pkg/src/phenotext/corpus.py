"""Clinical note ingestion, normalization and label consolidation.

A corpus is an ordered list of ``(id, text, label)`` notes.  Labels live in
one of two spaces: the raw four-way smoking status and the binary space
obtained by merging current/past smokers and dropping unknowns.  The
canonical interchange format is JSON Lines with keys ``id``, ``text`` and
``label``; an XML reader is provided for the original discharge-record
distribution format.
"""

from __future__ import annotations

import enum
import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

from .errors import DataError

log = logging.getLogger(__name__)


class PhenotypeLabel(enum.Enum):
    CURRENT_SMOKER = "current smoker"
    PAST_SMOKER = "past smoker"
    NON_SMOKER = "non-smoker"
    UNKNOWN = "unknown"
    SMOKER = "smoker"

    def __str__(self) -> str:
        return self.value


class LabelSpace(enum.Enum):
    RAW4 = "raw4"
    BINARY2 = "binary2"


# Class index order is fixed so that serialized models are unambiguous.
# In the binary space the smoker class is index 1 (the positive class).
SPACE_CLASSES = {
    LabelSpace.RAW4: (
        PhenotypeLabel.CURRENT_SMOKER,
        PhenotypeLabel.PAST_SMOKER,
        PhenotypeLabel.NON_SMOKER,
        PhenotypeLabel.UNKNOWN,
    ),
    LabelSpace.BINARY2: (PhenotypeLabel.NON_SMOKER, PhenotypeLabel.SMOKER),
}

_LABEL_BY_STRING = {lab.value: lab for lab in PhenotypeLabel}


def parse_label(raw: str) -> PhenotypeLabel:
    """Parse a label string (case-insensitive), raising DataError if unknown."""
    key = " ".join(str(raw).lower().split())
    try:
        return _LABEL_BY_STRING[key]
    except KeyError:
        allowed = ", ".join(sorted(_LABEL_BY_STRING))
        raise DataError(f"unknown label {raw!r}; expected one of: {allowed}") from None


@dataclass(frozen=True)
class Note:
    id: str
    text: str
    label: PhenotypeLabel


@dataclass
class LabeledCorpus:
    notes: list[Note] = field(default_factory=list)
    label_space: LabelSpace = LabelSpace.RAW4

    def __post_init__(self):
        allowed = set(SPACE_CLASSES[self.label_space])
        seen: set[str] = set()
        for i, note in enumerate(self.notes):
            if note.id in seen:
                raise DataError(f"duplicate note id {note.id!r} (record {i + 1})")
            seen.add(note.id)
            if not note.text.strip():
                raise DataError(f"note {note.id!r} has empty text")
            if note.label not in allowed:
                raise DataError(
                    f"label {note.label.value!r} of note {note.id!r} is not valid "
                    f"in the {self.label_space.value} label space"
                )

    def __len__(self) -> int:
        return len(self.notes)

    @property
    def class_names(self) -> tuple[PhenotypeLabel, ...]:
        return SPACE_CLASSES[self.label_space]

    def class_indices(self) -> list[int]:
        """Labels as integer class indices in the fixed per-space order."""
        order = {lab: i for i, lab in enumerate(self.class_names)}
        return [order[n.label] for n in self.notes]


def _infer_space(labels: list[PhenotypeLabel]) -> LabelSpace:
    # "smoker" only exists after consolidation, so its presence marks the
    # binary space; otherwise default to the raw space (an all-non-smoker
    # file is ambiguous and callers can pass the space explicitly).
    if any(lab is PhenotypeLabel.SMOKER for lab in labels):
        return LabelSpace.BINARY2
    return LabelSpace.RAW4


def ingest_corpus(
    path,
    format: str = "jsonl",
    label_space: LabelSpace | None = None,
) -> LabeledCorpus:
    """Read a corpus file, preserving record order.

    ``format`` is ``jsonl`` (canonical) or ``n2c2_xml``.  When ``label_space``
    is None it is inferred from the labels present.
    """
    if format in ("jsonl",):
        records = _read_jsonl(path)
    elif format in ("n2c2_xml", "n2c2", "xml"):
        records = _read_n2c2_xml(path)
    else:
        raise DataError(f"unknown corpus format {format!r}")

    notes = [Note(id=i, text=t, label=lab) for i, t, lab in records]
    space = label_space or _infer_space([n.label for n in notes])
    return LabeledCorpus(notes=notes, label_space=space)


def _read_jsonl(path) -> list[tuple[str, str, PhenotypeLabel]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}: line {lineno}: expected an object")
            for key in ("id", "text", "label"):
                if key not in obj:
                    raise DataError(f"{path}: line {lineno}: missing key {key!r}")
            try:
                label = parse_label(obj["label"])
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            records.append((str(obj["id"]), str(obj["text"]), label))
    return records


def _read_n2c2_xml(path) -> list[tuple[str, str, PhenotypeLabel]]:
    """Read the discharge-record XML distribution: RECORD elements carrying an
    ID attribute, a SMOKING child with a STATUS attribute, and a TEXT child.
    """
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise DataError(f"{path}: invalid XML: {exc}") from None
    records = []
    for n, rec in enumerate(tree.getroot().iter("RECORD"), start=1):
        rec_id = rec.get("ID")
        if rec_id is None:
            raise DataError(f"{path}: RECORD {n} has no ID attribute")
        smoking = rec.find("SMOKING")
        if smoking is None or smoking.get("STATUS") is None:
            raise DataError(f"{path}: RECORD {rec_id}: missing SMOKING STATUS")
        status = smoking.get("STATUS")
        text_el = rec.find("TEXT")
        if text_el is None or not (text_el.text or "").strip():
            raise DataError(f"{path}: RECORD {rec_id}: missing TEXT")
        # Some distributions carry a bare SMOKER status (smoker of unknown
        # recency); it consolidates identically to a current smoker, so map
        # it there to stay inside the four-value raw space.
        if " ".join(status.lower().split()) == "smoker":
            log.warning("record %s: raw status SMOKER mapped to current smoker", rec_id)
            label = PhenotypeLabel.CURRENT_SMOKER
        else:
            try:
                label = parse_label(status)
            except DataError as exc:
                raise DataError(f"{path}: RECORD {rec_id}: {exc}") from None
        records.append((str(rec_id), text_el.text, label))
    return records


def write_corpus_jsonl(corpus: LabeledCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for note in corpus.notes:
            fh.write(
                json.dumps(
                    {"id": note.id, "text": note.text, "label": note.label.value},
                    ensure_ascii=False,
                )
                + "\n"
            )


def normalize_string(text: str) -> str:
    """Lowercase and collapse whitespace runs to single spaces."""
    return " ".join(text.lower().split())


def normalize_text(corpus: LabeledCorpus) -> LabeledCorpus:
    """Return a corpus with every note's text normalized; ids/labels unchanged."""
    notes = [replace(n, text=normalize_string(n.text)) for n in corpus.notes]
    return LabeledCorpus(notes=notes, label_space=corpus.label_space)


_CONSOLIDATION = {
    PhenotypeLabel.CURRENT_SMOKER: PhenotypeLabel.SMOKER,
    PhenotypeLabel.PAST_SMOKER: PhenotypeLabel.SMOKER,
    PhenotypeLabel.NON_SMOKER: PhenotypeLabel.NON_SMOKER,
}


def consolidate_labels(corpus: LabeledCorpus) -> LabeledCorpus:
    """Merge current/past smokers into one smoker class and drop unknowns.

    The result lives in the binary label space; relative note order is kept.
    """
    if corpus.label_space is LabelSpace.BINARY2:
        raise DataError("corpus is already in the binary label space")
    kept = []
    removed = 0
    for note in corpus.notes:
        if note.label is PhenotypeLabel.UNKNOWN:
            removed += 1
            continue
        kept.append(replace(note, label=_CONSOLIDATION[note.label]))
    if removed:
        log.warning("consolidation removed %d unknown-status note(s)", removed)
    return LabeledCorpus(notes=kept, label_space=LabelSpace.BINARY2)
