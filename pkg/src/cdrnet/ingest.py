"""Parsing and validation of raw CDR and demographic label files.

Input formats (UTF-8 CSV, plain comma-separated tokens, one header row):

    CDR:    user_id,direction,kind,timestamp,duration_s,correspondent_id
            direction in {in,out}; kind in {call,text};
            timestamp "YYYY-MM-DDThh:mm:ss" (local wall-clock, no timezone)
    labels: user_id,gender,age_years

Parsing is total: every data line is either accepted or rejected with a
line-numbered reason in the IngestReport; a dirty line never aborts the
run. The only fatal data condition is a duplicate user_id in the labels
file. Texts must carry duration 0; coercing instead of rejecting would
hide upstream schema errors.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable

CDR_HEADER = "user_id,direction,kind,timestamp,duration_s,correspondent_id"
LABELS_HEADER = "user_id,gender,age_years"

MAX_AGE = 130


class ParseError(ValueError):
    """A single malformed input line."""


class IngestError(ValueError):
    """Dataset-level violation that aborts the run (e.g. duplicate label)."""


class Direction(enum.Enum):
    INCOMING = "in"
    OUTGOING = "out"


class Kind(enum.Enum):
    CALL = "call"
    TEXT = "text"


@dataclass(frozen=True, slots=True)
class CdrRecord:
    user_id: str
    direction: Direction
    kind: Kind
    timestamp: datetime
    duration_s: int
    correspondent_id: str


@dataclass(frozen=True, slots=True)
class LabelRecord:
    user_id: str
    gender: str
    age_years: int


@dataclass(frozen=True, slots=True)
class Rejection:
    stream: str  # "cdr" or "labels"
    line: int    # 1-based physical line number within that file
    reason: str


@dataclass
class IngestReport:
    """Accounting for one ingest run; accepted + rejected covers every data line."""

    records_accepted: int = 0
    records_rejected: int = 0
    labels_accepted: int = 0
    labels_rejected: int = 0
    rejections: list[Rejection] = field(default_factory=list)

    def reject(self, stream: str, line: int, reason: str) -> None:
        if stream == "cdr":
            self.records_rejected += 1
        else:
            self.labels_rejected += 1
        self.rejections.append(Rejection(stream, line, reason))

    def to_json(self) -> dict:
        return {
            "records_accepted": self.records_accepted,
            "records_rejected": self.records_rejected,
            "labels_accepted": self.labels_accepted,
            "labels_rejected": self.labels_rejected,
            "rejections": [
                {"stream": r.stream, "line": r.line, "reason": r.reason}
                for r in self.rejections
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _parse_timestamp(text: str) -> datetime:
    # Exactly "YYYY-MM-DDThh:mm:ss". fromisoformat alone is too permissive
    # (fractional seconds, offsets, space separators), so pin length and 'T'.
    if len(text) != 19 or text[10] != "T":
        raise ParseError(f"unparseable timestamp {text!r}")
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"unparseable timestamp {text!r}") from None


def parse_cdr_line(line: str) -> CdrRecord:
    """Parse one CDR data row; raises ParseError with the specific defect."""
    fields = line.rstrip("\r\n").split(",")
    if len(fields) != 6:
        raise ParseError(f"expected 6 fields, got {len(fields)}")
    user_id, direction_s, kind_s, ts_s, dur_s, correspondent = fields
    if not user_id:
        raise ParseError("empty user_id")
    if not correspondent:
        raise ParseError("empty correspondent_id")
    try:
        direction = Direction(direction_s)
    except ValueError:
        raise ParseError(f"unknown direction {direction_s!r}") from None
    try:
        kind = Kind(kind_s)
    except ValueError:
        raise ParseError(f"unknown kind {kind_s!r}") from None
    timestamp = _parse_timestamp(ts_s)
    if not dur_s.isdigit():
        raise ParseError(f"negative or non-integer duration {dur_s!r}")
    duration = int(dur_s)
    if kind is Kind.TEXT and duration != 0:
        raise ParseError(f"text with nonzero duration {duration}")
    return CdrRecord(user_id, direction, kind, timestamp, duration, correspondent)


def format_cdr_line(record: CdrRecord) -> str:
    """Canonical line form; parse_cdr_line(format_cdr_line(r)) == r."""
    return ",".join(
        (
            record.user_id,
            record.direction.value,
            record.kind.value,
            record.timestamp.isoformat(timespec="seconds"),
            str(record.duration_s),
            record.correspondent_id,
        )
    )


def parse_labels_line(line: str) -> LabelRecord:
    """Parse one label row "user_id,gender,age_years"; raises ParseError."""
    fields = line.rstrip("\r\n").split(",")
    if len(fields) != 3:
        raise ParseError(f"expected 3 fields, got {len(fields)}")
    user_id, gender, age_s = fields
    if not user_id:
        raise ParseError("empty user_id")
    if not gender:
        raise ParseError("empty gender")
    if not age_s.isdigit():
        raise ParseError(f"negative or non-integer age {age_s!r}")
    age = int(age_s)
    if age > MAX_AGE:
        raise ParseError(f"age {age} out of [0, {MAX_AGE}]")
    return LabelRecord(user_id, gender, age)


def _consume(lines, header, parser, stream, report, accept) -> None:
    first = True
    for line_no, raw in enumerate(lines, start=1):
        text = raw.rstrip("\r\n")
        if first:
            first = False
            if text == header:
                continue
        try:
            record = parser(text)
        except ParseError as exc:
            report.reject(stream, line_no, str(exc))
            continue
        accept(record, line_no)


def ingest(
    cdr_lines: Iterable[str],
    label_lines: Iterable[str] | None = None,
) -> tuple[dict[str, list[CdrRecord]], dict[str, LabelRecord], IngestReport]:
    """Single-pass parse of both streams into per-user groups and a label map.

    Records are grouped by user_id and sorted by timestamp within each
    group (stable, so equal timestamps keep input order). Users without a
    label are retained: usable for prediction, excluded from training.
    """
    report = IngestReport()
    groups: dict[str, list[CdrRecord]] = {}

    def accept_record(rec: CdrRecord, line_no: int) -> None:
        report.records_accepted += 1
        groups.setdefault(rec.user_id, []).append(rec)

    _consume(cdr_lines, CDR_HEADER, parse_cdr_line, "cdr", report, accept_record)

    labels: dict[str, LabelRecord] = {}
    if label_lines is not None:

        def accept_label(rec: LabelRecord, line_no: int) -> None:
            if rec.user_id in labels:
                raise IngestError(
                    f"duplicate label for user {rec.user_id!r} at labels line {line_no}"
                )
            report.labels_accepted += 1
            labels[rec.user_id] = rec

        _consume(label_lines, LABELS_HEADER, parse_labels_line, "labels", report, accept_label)

    for records in groups.values():
        records.sort(key=lambda r: r.timestamp)
    return groups, labels, report


def load_labels(label_lines: Iterable[str]) -> tuple[dict[str, LabelRecord], IngestReport]:
    """Parse a labels stream alone (train/evaluate paths need no CDR data)."""
    _, labels, report = ingest([], label_lines)
    return labels, report
