"""Prediction result files and their transposition.

Three line formats:

* per-document  ``doc_id,label:score label:score ...``
* submission    ``doc_id,label label ...``
* transposed    ``label doc:score doc:score ...``

``transpose_file`` flips between the per-document and transposed forms.
Scores travel as verbatim strings (parsed only for sort keys), so
transposing twice reproduces a canonically ordered input byte for byte.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

from .corpus import ParseError
from .inference import PredictionList, TransposedPrediction


def write_predictions(path, preds: Iterable[PredictionList], precision: int = 6) -> None:
    with open(path, "w") as fh:
        for pred in preds:
            entries = " ".join(f"{l}:{s:.{precision}f}" for l, s in pred.pairs())
            fh.write(f"{pred.doc_id},{entries}\n")


def read_predictions(path) -> list[tuple[int, list[tuple[int, float]]]]:
    out = []
    for doc_id, entries in _read_entry_lines(path, head_sep=","):
        out.append((doc_id, [(t, float(s)) for t, s in entries]))
    return out


def write_submission(path, rows: Iterable[tuple[int, Iterable[int]]]) -> None:
    with open(path, "w") as fh:
        for doc_id, labels in rows:
            fh.write(f"{doc_id}," + " ".join(str(l) for l in sorted(labels)) + "\n")


def read_submission(path) -> list[tuple[int, frozenset[int]]]:
    out = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            head, sep, rest = line.partition(",")
            if not sep or not head.isdigit():
                raise ParseError(f"bad submission line {line!r}", line_no)
            labels = frozenset(int(tok) for tok in rest.split())
            out.append((int(head), labels))
    return out


def write_transposed(path, tp: TransposedPrediction, precision: int = 6) -> None:
    with open(path, "w") as fh:
        for label in tp.labels():
            entries = " ".join(f"{e.doc_id}:{e.score:.{precision}f}" for e in tp[label])
            fh.write(f"{label} {entries}".rstrip() + "\n")


def read_transposed(path) -> dict[int, list[tuple[int, float]]]:
    return {
        label: [(d, float(s)) for d, s in entries]
        for label, entries in _read_entry_lines(path, head_sep=" ")
    }


def _read_entry_lines(path, head_sep: str):
    """Yield (head_id, [(target_id, score_string), ...]) per line."""
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            head, sep, rest = line.partition(head_sep)
            if not head.isdigit():
                raise ParseError(f"bad result line {line!r}", line_no)
            entries = []
            for tok in rest.split():
                target, colon, score = tok.partition(":")
                if not colon or not target.isdigit():
                    raise ParseError(f"bad entry {tok!r}", line_no)
                float(score)  # validate early; the string itself is kept
                entries.append((int(target), score))
            yield int(head), entries


def detect_format(path) -> str:
    """'per-document' if the first token carries a comma, 'transposed'
    otherwise, 'empty' when the file has no content lines."""
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            first = line.split(" ", 1)[0]
            return "per-document" if "," in first else "transposed"
    return "empty"


def transpose_file(in_path, out_path) -> str:
    """Flip a result file between its two orientations.

    Returns the detected input format.  Output lines are canonically
    ordered: heads ascending, entries by (score desc, id asc), scores
    copied verbatim.  An empty input produces an empty output.
    """
    fmt = detect_format(in_path)
    if fmt == "empty":
        open(out_path, "w").close()
        return fmt
    sep_in = "," if fmt == "per-document" else " "
    sep_out = " " if fmt == "per-document" else ","
    flipped: dict[int, list[tuple[int, str]]] = defaultdict(list)
    for head, entries in _read_entry_lines(in_path, head_sep=sep_in):
        for target, score in entries:
            flipped[target].append((head, score))
    with open(out_path, "w") as fh:
        for target in sorted(flipped):
            entries = sorted(flipped[target], key=lambda e: (-float(e[1]), e[0]))
            body = " ".join(f"{h}:{s}" for h, s in entries)
            fh.write(f"{target}{sep_out}{body}".rstrip() + "\n")
    return fmt
