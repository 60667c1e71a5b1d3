"""Few-shot prompt construction for both prompting regimes.

The stepwise style interleaves queries and reader answers line by line; the
two baseline styles put a linearized table in front of plain CoT answers.
The shipped exemplar texts are package data and render byte-identically to
the stored prompt files, which the tests pin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional, Sequence

from .tables import ChartTable

STEPWISE_HEADER = "Answer the following questions step by step."
DEPLOT_1SHOT_HEADER = "Read the table below to answer the following questions."
DEPLOT_5SHOT_HEADER = "Read the table to answer the following question."


class PromptStyle(str, Enum):
    STEPWISE_5SHOT = "stepwise_5shot"
    DEPLOT_1SHOT = "deplot_1shot"
    DEPLOT_5SHOT = "deplot_5shot"


class PromptConfigError(ValueError):
    """Raised on style/context mismatches or empty exemplar lists."""


@dataclass(frozen=True)
class StepExemplar:
    """One worked example: a question plus its alternating step lines."""

    question: str
    steps: tuple[str, ...]

    def render(self) -> str:
        lines = [f"Q: {self.question}", f"A: {self.steps[0]}"]
        lines.extend(self.steps[1:])
        return "\n".join(lines)


def _data_text(name: str) -> str:
    return resources.files("chartloop.data").joinpath(name).read_text(encoding="utf-8")


def default_step_exemplars() -> tuple[StepExemplar, ...]:
    """The five shipped interleaved exemplars."""
    payload = json.loads(_data_text("stepwise_exemplars.json"))
    return tuple(
        StepExemplar(e["question"], tuple(e["steps"])) for e in payload["exemplars"]
    )


def shipped_prompt_text(style: PromptStyle) -> str:
    """The stored prompt prefix for a style (everything before the question)."""
    return _data_text(f"{style.value}.txt")


def annotated_examples_text() -> str:
    """The shipped hand-annotated reasoning examples in [INST] form."""
    return _data_text("annotated_examples.txt")


def linearize_table(table: ChartTable) -> str:
    """Render a chart table in the baseline's Header/Row text form.

    Multi-series tables put one series per row under an Entity header;
    single-series tables put one x-label per row.
    """
    lines: list[str] = []
    if len(table.series) > 1:
        lines.append("Header: Entity | " + " | ".join(table.x_labels))
        for i, label in enumerate(table.series):
            cells = " | ".join(v.raw for v in table.cells[i])
            lines.append(f"Row {i + 1}: {label.name} | {cells}")
    else:
        lines.append(f"Header: Characteristic | {table.series[0].name}")
        for j, x in enumerate(table.x_labels):
            lines.append(f"Row {j + 1}: {x} | {table.cells[0][j].raw}")
    return "\n".join(lines)


def build_prompt(
    style: PromptStyle,
    exemplars: Optional[Sequence[StepExemplar]],
    question: str,
    context: Optional[str] = None,
) -> str:
    """Assemble the full prompt ending with the question stub "Q: ...\\nA: ".

    The stepwise style takes structured exemplars and forbids a context
    table; the baseline styles use their shipped exemplar text and require a
    linearized context table for the new question.
    """
    if style is PromptStyle.STEPWISE_5SHOT:
        if context is not None:
            raise PromptConfigError("stepwise prompts take no context table")
        if exemplars is None:
            exemplars = default_step_exemplars()
        if not exemplars:
            raise PromptConfigError("at least one exemplar is required")
        blocks = "\n\n".join(e.render() for e in exemplars)
        return f"{STEPWISE_HEADER}\n\n{blocks}\n\nQ: {question}\nA: "
    if context is None:
        raise PromptConfigError(f"{style.value} prompts require a context table")
    prefix = shipped_prompt_text(style)
    if style is PromptStyle.DEPLOT_1SHOT:
        # The 1-shot block already ends with the repeated instruction line.
        return f"{prefix}{context}\n\nQ: {question}\nA: "
    return f"{prefix}{context}\nQ: {question}\nA: "
