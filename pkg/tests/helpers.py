"""Shared test fixtures-by-hand: tiny corpora and file writers."""

from __future__ import annotations

import json

from phenotext.corpus import LabeledCorpus, LabelSpace, Note, PhenotypeLabel

CUR = PhenotypeLabel.CURRENT_SMOKER
PAST = PhenotypeLabel.PAST_SMOKER
NON = PhenotypeLabel.NON_SMOKER
UNK = PhenotypeLabel.UNKNOWN
SMK = PhenotypeLabel.SMOKER


def note(i: int, text: str, label: PhenotypeLabel) -> Note:
    return Note(id=f"n{i:03d}", text=text, label=label)


def raw4_corpus() -> LabeledCorpus:
    return LabeledCorpus(
        notes=[
            note(1, "patient smokes two packs daily with copd", CUR),
            note(2, "quit smoking in 1999 after asthma diagnosis", PAST),
            note(3, "denies tobacco use; history of diabetes mellitus", NON),
            note(4, "social history not recorded this admission", UNK),
            note(5, "continues to smoke despite counseling", CUR),
        ],
        label_space=LabelSpace.RAW4,
    )


def write_jsonl(path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def corpus_rows(corpus: LabeledCorpus) -> list[dict]:
    return [
        {"id": n.id, "text": n.text, "label": n.label.value} for n in corpus.notes
    ]
