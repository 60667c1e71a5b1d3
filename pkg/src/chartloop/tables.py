"""Core domain types: chart tables, values, questions, and reasoning traces.

Everything here is immutable after construction so tables and traces can be
shared freely across concurrent evaluation workers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Optional, Sequence


class TableError(ValueError):
    """Raised when a chart table violates its structural invariants."""


class TraceError(ValueError):
    """Raised when a reasoning trace violates the trace invariants."""


class ValueKind(str, Enum):
    NUMERIC = "numeric"
    TEXT = "text"
    YES_NO = "yes_no"


_NUMERIC_RE = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")


def canonical_decimal(d: Decimal) -> str:
    """Render a Decimal without exponent notation and without trailing zeros."""
    if d == 0:
        return "0"
    return format(d.normalize(), "f")


@dataclass(frozen=True)
class Value:
    """A table cell or answer value, preserving the source's printed form.

    ``raw`` is always the exact text as printed; numeric values additionally
    carry a parsed ``Decimal`` so arithmetic never goes through binary floats
    and rendering never re-rounds.
    """

    kind: ValueKind
    raw: str
    number: Optional[Decimal] = None

    @staticmethod
    def from_raw(raw: str) -> "Value":
        """Classify a printed token: yes/no, plain decimal, or free text."""
        stripped = raw.strip()
        if stripped.lower() in ("yes", "no"):
            return Value(ValueKind.YES_NO, stripped)
        if _NUMERIC_RE.fullmatch(stripped):
            try:
                return Value(ValueKind.NUMERIC, raw, Decimal(stripped))
            except InvalidOperation:
                pass
        return Value(ValueKind.TEXT, raw)

    @staticmethod
    def numeric(d: Decimal) -> "Value":
        return Value(ValueKind.NUMERIC, canonical_decimal(d), d)

    @staticmethod
    def yes_no(flag: bool) -> "Value":
        return Value(ValueKind.YES_NO, "yes" if flag else "no")

    @staticmethod
    def text(s: str) -> "Value":
        return Value(ValueKind.TEXT, s)

    def render(self) -> str:
        return self.raw

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.raw


@dataclass(frozen=True)
class SeriesLabel:
    """A data series name with its optional legend color."""

    name: str
    color: Optional[str] = None

    def render(self) -> str:
        return f"{self.name} ({self.color})" if self.color else self.name


@dataclass(frozen=True)
class ChartTable:
    """The ground-truth table underlying a chart.

    ``cells[i][j]`` is the value of series ``i`` at x-label ``j``.  Row/column
    shape is enforced at construction; name uniqueness and cell non-emptiness
    are enforced by :meth:`validate`, which every ingestion and generation
    path calls (raw construction stays permissive because real chart corpora
    contain degenerate axes, e.g. repeated year groups).
    """

    source_id: str
    series: tuple[SeriesLabel, ...]
    x_labels: tuple[str, ...]
    cells: tuple[tuple[Value, ...], ...]

    def __post_init__(self) -> None:
        if len(self.cells) != len(self.series):
            raise TableError(
                f"{self.source_id}: {len(self.cells)} cell rows for {len(self.series)} series"
            )
        for i, row in enumerate(self.cells):
            if len(row) != len(self.x_labels):
                raise TableError(
                    f"{self.source_id}: row {i} has {len(row)} cells for "
                    f"{len(self.x_labels)} x-labels"
                )

    @staticmethod
    def build(
        source_id: str,
        series: Sequence[tuple[str, Optional[str]] | str],
        x_labels: Sequence[str],
        cells: Sequence[Sequence[str]],
    ) -> "ChartTable":
        """Construct from plain strings; cell strings keep their precision."""
        labels = tuple(
            SeriesLabel(s, None) if isinstance(s, str) else SeriesLabel(s[0], s[1])
            for s in series
        )
        rows = tuple(tuple(Value.from_raw(str(c)) for c in row) for row in cells)
        return ChartTable(source_id, labels, tuple(x_labels), rows)

    def validate(self) -> None:
        """Check uniqueness and non-emptiness invariants; raise TableError."""
        seen: set[str] = set()
        for label in self.series:
            key = normalize_name(label.name)
            if not key:
                raise TableError(f"{self.source_id}: empty series name")
            if key in seen:
                raise TableError(f"{self.source_id}: duplicate series name {label.name!r}")
            seen.add(key)
        seen.clear()
        for x in self.x_labels:
            key = normalize_name(x)
            if not key:
                raise TableError(f"{self.source_id}: empty x-label")
            if key in seen:
                raise TableError(f"{self.source_id}: duplicate x-label {x!r}")
            seen.add(key)
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                if not cell.raw.strip():
                    raise TableError(f"{self.source_id}: empty cell at [{i}][{j}]")

    def cell(self, series_index: int, x_index: int) -> Value:
        return self.cells[series_index][x_index]

    def to_dict(self) -> dict:
        return {
            "id": self.source_id,
            "series": [{"name": s.name, "color": s.color} for s in self.series],
            "x_labels": list(self.x_labels),
            "cells": [[v.raw for v in row] for row in self.cells],
        }

    @staticmethod
    def from_dict(obj: dict) -> "ChartTable":
        series = [(s["name"], s.get("color")) for s in obj["series"]]
        return ChartTable.build(str(obj["id"]), series, [str(x) for x in obj["x_labels"]], obj["cells"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def normalize_name(name: str) -> str:
    """Case-fold and collapse whitespace for entity comparison."""
    return " ".join(name.split()).casefold()


def underlying_length(table: ChartTable) -> int:
    """Number of data cells: table complexity measure for the analysis plots."""
    return len(table.series) * len(table.x_labels)


def bucket_length(length: int, edges: Sequence[int]) -> int:
    """Index of the half-open interval [edge_i, edge_{i+1}) containing length.

    Values at or beyond the last edge fall into the final bucket; values below
    the first edge clamp to bucket 0.
    """
    if not edges:
        raise ValueError("bucket edges must be non-empty")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket edges must be strictly increasing")
    index = 0
    for i, edge in enumerate(edges):
        if length >= edge:
            index = i
        else:
            break
    return index


def bucket_labels(edges: Sequence[int]) -> list[str]:
    labels = [f"[{a},{b})" for a, b in zip(edges, edges[1:])]
    labels.append(f"{edges[-1]}+")
    return labels


class TemplateType(str, Enum):
    DATA_RETRIEVAL = "data_retrieval"
    STRUCTURAL = "structural"
    ARITHMETIC = "arithmetic"
    COMPOUND = "compound"
    COMPARISON = "comparison"
    MIN_MAX = "min_max"


@dataclass(frozen=True)
class QAInstance:
    """A question over a chart with its gold answer.

    ``template_type`` is present iff the instance came from a template
    generator or a template-tagged corpus.
    """

    question: str
    gold: Value
    chart_id: str
    template_type: Optional[TemplateType] = None

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "gold": self.gold.raw,
            "chart_id": self.chart_id,
            "template_type": self.template_type.value if self.template_type else None,
        }

    @staticmethod
    def from_dict(obj: dict) -> "QAInstance":
        tt = obj.get("template_type")
        return QAInstance(
            question=str(obj["question"]),
            gold=Value.from_raw(str(obj["gold"])),
            chart_id=str(obj["chart_id"]),
            template_type=TemplateType(tt) if tt else None,
        )


class StepRole(str, Enum):
    REASONER_QUERY = "reasoner_query"
    READER_ANSWER = "reader_answer"
    CONCLUSION = "conclusion"
    PROTOCOL_ERROR = "protocol_error"


class Termination(str, Enum):
    CONCLUSION = "conclusion"
    MAX_STEPS = "max_steps"
    BACKEND_ERROR = "backend_error"
    PARSE_ERROR = "parse_error"


@dataclass(frozen=True)
class Step:
    role: StepRole
    text: str


@dataclass(frozen=True)
class ReasoningTrace:
    """An episode transcript: reasoner lines, spliced reader answers, outcome."""

    steps: tuple[Step, ...]
    final: Optional[Value]
    terminated_by: Termination

    def to_dict(self) -> dict:
        return {
            "steps": [{"role": s.role.value, "text": s.text} for s in self.steps],
            "final": self.final.raw if self.final else None,
            "terminated_by": self.terminated_by.value,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ReasoningTrace":
        steps = tuple(Step(StepRole(s["role"]), s["text"]) for s in obj["steps"])
        final = Value.from_raw(obj["final"]) if obj.get("final") is not None else None
        return ReasoningTrace(steps, final, Termination(obj["terminated_by"]))


def validate_trace(trace: ReasoningTrace) -> None:
    """Enforce the trace invariants every producer must satisfy."""
    previous: Optional[StepRole] = None
    for i, step in enumerate(trace.steps):
        if step.role is StepRole.READER_ANSWER and previous is not StepRole.REASONER_QUERY:
            raise TraceError(f"step {i}: reader answer not preceded by a reasoner query")
        if step.role is StepRole.CONCLUSION and i != len(trace.steps) - 1:
            raise TraceError(f"step {i}: conclusion is not the last step")
        previous = step.role
    if trace.terminated_by is Termination.CONCLUSION:
        if trace.final is None:
            raise TraceError("conclusion termination without a final value")
        if not trace.steps or trace.steps[-1].role is not StepRole.CONCLUSION:
            raise TraceError("conclusion termination without a conclusion step")
    else:
        if trace.final is not None:
            raise TraceError(f"final value set for {trace.terminated_by.value} termination")


def iter_cells(table: ChartTable) -> Iterable[tuple[int, int, Value]]:
    for i in range(len(table.series)):
        for j in range(len(table.x_labels)):
            yield i, j, table.cells[i][j]
