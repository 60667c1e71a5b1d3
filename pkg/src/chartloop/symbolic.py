"""Rule-based reasoner for template questions.

Three jobs, kept deliberately separable so the closed loop is verifiable:

* ``gen_questions`` instantiates template questions over a table,
* ``compute_gold`` answers a plan by brute force straight from the table
  cells (never through the step protocol), and
* ``decompose``/``deduce`` drive the live episode: pattern-match the question
  into atomic queries, then fold the reader's answers into a concluding
  sentence ending "So the answer is X.".

Running decompose -> reader -> deduce against compute_gold is the package's
main correctness oracle: the two answer paths share no extraction code.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from enum import Enum
from typing import Optional, Sequence

from .oracle import edit_similarity
from .protocol import (
    AnswerKind,
    AtomicQuery,
    QueryOp,
    ReaderAnswer,
    describe_query,
    format_query,
    group_query,
    point_query,
)
from .tables import ChartTable, QAInstance, TemplateType, Value, normalize_name

UNKNOWN_CONCLUSION = "So the answer is unknown."

_RATIO_STEP = Decimal("0.0001")
_AVERAGE_STEP = Decimal("0.01")


class SkippedTemplate(ValueError):
    """The table is too small or non-numeric for the requested template."""


class NotTemplated(ValueError):
    """The question matches no known template pattern."""


class UndefinedResult(ArithmeticError):
    """The reduce has no defined result (e.g. division by zero)."""


class Reduce(str, Enum):
    IDENTITY = "identity"
    SUM = "sum"
    DIFFERENCE = "difference"
    RATIO = "ratio"
    AVERAGE = "average"
    MIN = "min"
    MAX = "max"
    ARGMIN = "argmin"
    ARGMAX = "argmax"
    COUNT_GREATER = "count_greater"
    COUNT_LESS = "count_less"
    SECOND_HIGHEST = "second_highest"
    COMPARE_YES_NO = "compare_yes_no"
    ARG_MATCH = "arg_match"
    SUM_TWO_SMALLEST_VS_LARGEST = "sum_two_smallest_vs_largest"
    COUNT_SERIES = "count_series"
    COUNT_X_LABELS = "count_x_labels"


@dataclass(frozen=True)
class QuestionPlan:
    """A question's decomposition: atomic queries plus the final reduce."""

    template_type: TemplateType
    queries: tuple[AtomicQuery, ...]
    reduce: Reduce
    reduce_args: tuple[Value, ...] = ()


@dataclass(frozen=True)
class GoldComputation:
    answer: Value
    derivation: str


def stable_seed(*parts: object) -> int:
    """Process-independent integer seed from arbitrary key parts."""
    key = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


# ---------------------------------------------------------------------------
# Question grammar: the same patterns drive generation and decomposition.
# ---------------------------------------------------------------------------

def _with_describe(queries: Sequence[AtomicQuery], describe_first: bool) -> tuple[AtomicQuery, ...]:
    if describe_first:
        return (describe_query(), *queries)
    return tuple(queries)


def _pattern_table() -> list[tuple[TemplateType, re.Pattern, object]]:
    P = re.compile
    return [
        (TemplateType.STRUCTURAL, P(r"^How many legend labels are there\?$"),
         lambda m: ((), Reduce.COUNT_SERIES, ())),
        (TemplateType.STRUCTURAL, P(r"^How many x-axis labels are there\?$"),
         lambda m: ((), Reduce.COUNT_X_LABELS, ())),
        (TemplateType.DATA_RETRIEVAL,
         P(r"^In which (?:year|category) is the value of (.+) equal to (.+)\?$"),
         lambda m: ((group_query(m.group(1)),), Reduce.ARG_MATCH, (Value.from_raw(m.group(2)),))),
        (TemplateType.DATA_RETRIEVAL,
         P(r"^In which \w+ the (.+) in (.+) is (.+)\?$"),
         lambda m: ((group_query(m.group(2)),), Reduce.ARG_MATCH, (Value.from_raw(m.group(3)),))),
        (TemplateType.ARITHMETIC,
         P(r"^By how many points does (.+) surpass (.+) in (.+) in the year of .+\?$"),
         lambda m: ((point_query(m.group(1), m.group(3)), point_query(m.group(2), m.group(3))),
                    Reduce.DIFFERENCE, ())),
        (TemplateType.ARITHMETIC,
         P(r"^By how many points does the value in (.+) surpass the value in (.+)\?$"),
         lambda m: ((point_query(m.group(1)), point_query(m.group(2))), Reduce.DIFFERENCE, ())),
        (TemplateType.ARITHMETIC,
         P(r"^By how many points does (.+) surpass (.+) in (.+)\?$"),
         lambda m: ((point_query(m.group(1), m.group(3)), point_query(m.group(2), m.group(3))),
                    Reduce.DIFFERENCE, ())),
        (TemplateType.ARITHMETIC,
         P(r"^What is the sum of the values of (.+) and (.+) in (.+)\?$"),
         lambda m: ((point_query(m.group(1), m.group(3)), point_query(m.group(2), m.group(3))),
                    Reduce.SUM, ())),
        (TemplateType.ARITHMETIC,
         P(r"^What is the sum of the values in (.+) and (.+)\?$"),
         lambda m: ((point_query(m.group(1)), point_query(m.group(2))), Reduce.SUM, ())),
        (TemplateType.ARITHMETIC,
         P(r"^What is the average of the values of (.+) and (.+) in (.+)\?$"),
         lambda m: ((point_query(m.group(1), m.group(3)), point_query(m.group(2), m.group(3))),
                    Reduce.AVERAGE, ())),
        (TemplateType.ARITHMETIC,
         P(r"^What is the average value of (.+) across all (?:years|categories)\?$"),
         lambda m: ((group_query(m.group(1)),), Reduce.AVERAGE, ())),
        (TemplateType.COMPOUND,
         P(r"^In how many (?:years|categories), is the value of the bar (greater than|below) (.+)\?$"),
         lambda m: ((group_query(None),),
                    Reduce.COUNT_GREATER if m.group(1) == "greater than" else Reduce.COUNT_LESS,
                    (Value.from_raw(m.group(2)),))),
        (TemplateType.COMPOUND,
         P(r"^In how many (?:years|categories), is the value of (.+) (greater than|below) (.+)\?$"),
         lambda m: ((group_query(m.group(1)),),
                    Reduce.COUNT_GREATER if m.group(2) == "greater than" else Reduce.COUNT_LESS,
                    (Value.from_raw(m.group(3)),))),
        (TemplateType.COMPARISON,
         P(r"^What is the ratio of the value of (.+) in (.+) to that in (.+)\?$"),
         lambda m: ((point_query(m.group(1), m.group(2)), point_query(m.group(1), m.group(3))),
                    Reduce.RATIO, ())),
        (TemplateType.COMPARISON,
         P(r"^What is the ratio of the value in (.+) to that in (.+)\?$"),
         lambda m: ((point_query(m.group(1)), point_query(m.group(2))), Reduce.RATIO, ())),
        (TemplateType.COMPARISON,
         P(r"^Is the value of (.+) in (.+) greater than the value of (.+) in (.+)\?$"),
         lambda m: ((point_query(m.group(1), m.group(2)), point_query(m.group(3), m.group(4))),
                    Reduce.COMPARE_YES_NO, ())),
        (TemplateType.COMPARISON,
         P(r"^Is the value in (.+) greater than the value in (.+)\?$"),
         lambda m: ((point_query(m.group(1)), point_query(m.group(2))), Reduce.COMPARE_YES_NO, ())),
        (TemplateType.COMPARISON,
         P(r"^Is the sum of (?:the )?two smallest segments greater than the largest segment\?$"),
         lambda m: ((group_query(None),), Reduce.SUM_TWO_SMALLEST_VS_LARGEST, ())),
        (TemplateType.MIN_MAX,
         P(r"^Across all (?:years|categories), what is the (minimum|maximum) value of (.+)\?$"),
         lambda m: ((group_query(m.group(2)),),
                    Reduce.MIN if m.group(1) == "minimum" else Reduce.MAX, ())),
        (TemplateType.MIN_MAX,
         P(r"^Across all \w+, what is the (minimum|maximum) (?:.+ )?in (.+)\?$"),
         lambda m: ((group_query(m.group(2)),),
                    Reduce.MIN if m.group(1) == "minimum" else Reduce.MAX, ())),
        (TemplateType.MIN_MAX,
         P(r"^In which (?:year|category) is the value of (.+) the (highest|lowest)\?$"),
         lambda m: ((group_query(m.group(1)),),
                    Reduce.ARGMAX if m.group(2) == "highest" else Reduce.ARGMIN, ())),
        (TemplateType.MIN_MAX,
         P(r"^Which (?:year|category) has the second highest value of (.+)\?$"),
         lambda m: ((group_query(m.group(1)),), Reduce.SECOND_HIGHEST, ())),
        (TemplateType.DATA_RETRIEVAL,
         P(r"^What is the value of (.+) in (.+)\?$"),
         lambda m: ((point_query(m.group(1), m.group(2)),), Reduce.IDENTITY, ())),
        (TemplateType.DATA_RETRIEVAL,
         P(r"^What is the value of (.+)\?$"),
         lambda m: ((point_query(m.group(1)),), Reduce.IDENTITY, ())),
    ]


_PATTERNS = _pattern_table()


def decompose(
    question: str,
    plan_hint: Optional[QuestionPlan] = None,
    describe_first: bool = True,
) -> QuestionPlan:
    """Pattern-match a question into a QuestionPlan.

    Entities are taken verbatim from the question text; spelling is aligned
    to the chart's own names later, once the figure description is in hand.
    Raises NotTemplated for anything outside the grammar (such questions need
    a real language model).  Structural questions are answered entirely from
    the description, so they are also NotTemplated when describe is disabled.
    """
    if plan_hint is not None:
        return plan_hint
    text = question.strip()
    for template_type, pattern, build in _PATTERNS:
        m = pattern.match(text)
        if not m:
            continue
        queries, reduce, args = build(m)
        if template_type is TemplateType.STRUCTURAL and not describe_first:
            raise NotTemplated("structural questions need the figure description")
        return QuestionPlan(
            template_type=template_type,
            queries=_with_describe(queries, describe_first),
            reduce=reduce,
            reduce_args=tuple(args),
        )
    raise NotTemplated(question)


# ---------------------------------------------------------------------------
# Gold computation: brute force over the table, independent of the protocol.
# ---------------------------------------------------------------------------

def _find_exact(names: Sequence[str], wanted: str) -> Optional[int]:
    want = normalize_name(wanted)
    for i, name in enumerate(names):
        if normalize_name(name) == want:
            return i
    return None


def _gold_point(table: ChartTable, query: AtomicQuery) -> Value:
    series_names = [s.name for s in table.series]
    entity, by = query.entity or "", query.by
    if by is not None:
        si, xi = _find_exact(series_names, entity), _find_exact(table.x_labels, by)
        if si is None or xi is None:
            si, xi = _find_exact(series_names, by), _find_exact(table.x_labels, entity)
        if si is None or xi is None:
            raise UndefinedResult(f"cannot locate cell ({entity!r}, {by!r})")
        return table.cells[si][xi]
    if len(table.series) == 1:
        xi = _find_exact(table.x_labels, entity)
        if xi is not None:
            return table.cells[0][xi]
    if len(table.x_labels) == 1:
        si = _find_exact(series_names, entity)
        if si is not None:
            return table.cells[si][0]
    raise UndefinedResult(f"ambiguous point {entity!r}")


def _gold_group(table: ChartTable, query: AtomicQuery) -> list[tuple[str, Value]]:
    series_names = [s.name for s in table.series]
    if query.entity is None:
        if len(table.series) != 1:
            raise UndefinedResult("entity-free group on a multi-series table")
        return [(x, table.cells[0][j]) for j, x in enumerate(table.x_labels)]
    si = _find_exact(series_names, query.entity)
    if si is not None:
        return [(x, table.cells[si][j]) for j, x in enumerate(table.x_labels)]
    xi = _find_exact(table.x_labels, query.entity)
    if xi is not None:
        return [(s, table.cells[i][xi]) for i, s in enumerate(series_names)]
    raise UndefinedResult(f"cannot locate group {query.entity!r}")


def _require_numbers(values: Sequence[Value]) -> list[Decimal]:
    numbers = []
    for v in values:
        if v.number is None:
            raise UndefinedResult(f"non-numeric value {v.raw!r}")
        numbers.append(v.number)
    return numbers


def compute_gold(table: ChartTable, plan: QuestionPlan) -> GoldComputation:
    """Evaluate the plan's reduce by exhaustively reading cells off the table.

    This path never touches the query/answer strings, so it stays an
    independent check on the episode pipeline.
    """
    scalars: list[Value] = []
    groups: list[list[tuple[str, Value]]] = []
    for query in plan.queries:
        if query.op is QueryOp.DESCRIBE:
            continue
        if query.op is QueryOp.EXTRACT_POINT:
            scalars.append(_gold_point(table, query))
        else:
            groups.append(_gold_group(table, query))
    reduce = plan.reduce

    if reduce is Reduce.COUNT_SERIES:
        n = len(table.series)
        return GoldComputation(Value.from_raw(str(n)), f"len(series)={n}")
    if reduce is Reduce.COUNT_X_LABELS:
        n = len(table.x_labels)
        return GoldComputation(Value.from_raw(str(n)), f"len(x_labels)={n}")
    if reduce is Reduce.IDENTITY:
        v = scalars[0]
        return GoldComputation(v, f"cell={v.raw}")
    if reduce in (Reduce.SUM, Reduce.DIFFERENCE, Reduce.RATIO, Reduce.AVERAGE,
                  Reduce.COMPARE_YES_NO) and scalars:
        numbers = _require_numbers(scalars)
        if reduce is Reduce.SUM:
            total = sum(numbers, Decimal(0))
            return GoldComputation(Value.from_raw(str(total)), f"sum{numbers}={total}")
        if reduce is Reduce.DIFFERENCE:
            d = numbers[0] - numbers[1]
            return GoldComputation(Value.from_raw(str(d)), f"{numbers[0]}-{numbers[1]}={d}")
        if reduce is Reduce.RATIO:
            if numbers[1] == 0:
                raise UndefinedResult("ratio with zero denominator")
            r = (numbers[0] / numbers[1]).quantize(_RATIO_STEP, rounding=ROUND_HALF_UP)
            return GoldComputation(Value.from_raw(str(r)), f"{numbers[0]}/{numbers[1]}={r}")
        if reduce is Reduce.AVERAGE:
            m = (sum(numbers, Decimal(0)) / len(numbers)).quantize(
                _AVERAGE_STEP, rounding=ROUND_HALF_UP)
            return GoldComputation(Value.from_raw(str(m)), f"avg{numbers}={m}")
        flag = numbers[0] > numbers[1]
        return GoldComputation(Value.yes_no(flag), f"{numbers[0]}>{numbers[1]}={flag}")

    pairs = groups[0]
    keys = [k for k, _ in pairs]
    values = [v for _, v in pairs]
    numbers = _require_numbers(values)

    if reduce is Reduce.AVERAGE:
        m = (sum(numbers, Decimal(0)) / len(numbers)).quantize(_AVERAGE_STEP, ROUND_HALF_UP)
        return GoldComputation(Value.from_raw(str(m)), f"avg{numbers}={m}")
    if reduce in (Reduce.MIN, Reduce.ARGMIN):
        ordered = sorted(range(len(numbers)), key=lambda i: (numbers[i], i))
        i = ordered[0]
        answer = values[i] if reduce is Reduce.MIN else Value.from_raw(keys[i])
        return GoldComputation(answer, f"min at {keys[i]}={values[i].raw}")
    if reduce in (Reduce.MAX, Reduce.ARGMAX):
        ordered = sorted(range(len(numbers)), key=lambda i: (-numbers[i], i))
        i = ordered[0]
        answer = values[i] if reduce is Reduce.MAX else Value.from_raw(keys[i])
        return GoldComputation(answer, f"max at {keys[i]}={values[i].raw}")
    if reduce in (Reduce.COUNT_GREATER, Reduce.COUNT_LESS):
        threshold = _require_numbers(plan.reduce_args)[0]
        if reduce is Reduce.COUNT_GREATER:
            hits = [v for v in numbers if v > threshold]
        else:
            hits = [v for v in numbers if v < threshold]
        return GoldComputation(Value.from_raw(str(len(hits))), f"{len(hits)} of {numbers}")
    if reduce is Reduce.SECOND_HIGHEST:
        ordered = sorted(range(len(numbers)), key=lambda i: (-numbers[i], i))
        i = ordered[1]
        return GoldComputation(Value.from_raw(keys[i]), f"2nd highest at {keys[i]}")
    if reduce is Reduce.ARG_MATCH:
        target = plan.reduce_args[0]
        for k, v in pairs:
            if target.number is not None and v.number is not None:
                if v.number == target.number:
                    return GoldComputation(Value.from_raw(k), f"{target.raw} at {k}")
            elif v.raw == target.raw:
                return GoldComputation(Value.from_raw(k), f"{target.raw} at {k}")
        raise UndefinedResult(f"no cell equals {target.raw!r}")
    if reduce is Reduce.SUM_TWO_SMALLEST_VS_LARGEST:
        asc = sorted(numbers)
        total = asc[0] + asc[1]
        flag = total > asc[-1]
        return GoldComputation(Value.yes_no(flag), f"{asc[0]}+{asc[1]} vs {asc[-1]}")
    raise UndefinedResult(f"unsupported reduce {reduce}")


# ---------------------------------------------------------------------------
# Deduction over reader answers.
# ---------------------------------------------------------------------------

def _unknown() -> tuple[str, Optional[Value]]:
    return UNKNOWN_CONCLUSION, None


def deduce(
    plan: QuestionPlan, reader_answers: Sequence[ReaderAnswer]
) -> tuple[str, Optional[Value]]:
    """Fold the reader's answers into a concluding sentence and final value.

    Any unavailable or misaligned answer produces the unknown conclusion (a
    no-answer verdict downstream) rather than an exception.
    """
    if len(reader_answers) != len(plan.queries):
        return _unknown()
    if any(a.kind is AnswerKind.UNAVAILABLE for a in reader_answers):
        return _unknown()

    description = next((a for a in reader_answers if a.kind is AnswerKind.DESCRIPTION), None)
    scalars = [a.scalar for a in reader_answers if a.kind is AnswerKind.SCALAR and a.scalar]
    groups = [list(a.pairs) for a in reader_answers if a.kind is AnswerKind.GROUP]
    reduce = plan.reduce

    try:
        if reduce is Reduce.COUNT_SERIES:
            if description is None:
                return _unknown()
            n = len(description.series)
            return f"There are {n} legend labels. So the answer is {n}.", Value.from_raw(str(n))
        if reduce is Reduce.COUNT_X_LABELS:
            if description is None:
                return _unknown()
            n = len(description.x_labels)
            return f"There are {n} x-axis labels. So the answer is {n}.", Value.from_raw(str(n))
        if reduce is Reduce.IDENTITY:
            v = scalars[0]
            return f"The value is {v.raw}. So the answer is {v.raw}.", v
        if reduce is Reduce.SUM:
            numbers = _require_numbers(scalars)
            total = sum(numbers, Decimal(0))
            expr = "+".join(v.raw for v in scalars)
            return f"The sum is {expr}={total}. So the answer is {total}.", Value.from_raw(str(total))
        if reduce is Reduce.DIFFERENCE:
            a, b = scalars[0], scalars[1]
            (na, nb) = _require_numbers([a, b])
            d = na - nb
            text = f"{a.raw} surpasses {b.raw} by {a.raw}-{b.raw}={d}. So the answer is {d}."
            return text, Value.from_raw(str(d))
        if reduce is Reduce.RATIO:
            a, b = scalars[0], scalars[1]
            (na, nb) = _require_numbers([a, b])
            if nb == 0:
                return _unknown()
            r = (na / nb).quantize(_RATIO_STEP, rounding=ROUND_HALF_UP)
            text = f"The ratio is {a.raw}/{b.raw}={r}. So the answer is {r}."
            return text, Value.from_raw(str(r))
        if reduce is Reduce.AVERAGE:
            pool = scalars if scalars else [v for _, v in groups[0]]
            numbers = _require_numbers(pool)
            m = (sum(numbers, Decimal(0)) / len(numbers)).quantize(_AVERAGE_STEP, ROUND_HALF_UP)
            expr = "(" + "+".join(v.raw for v in pool) + f")/{len(numbers)}"
            return f"The average is {expr}={m}. So the answer is {m}.", Value.from_raw(str(m))
        if reduce is Reduce.COMPARE_YES_NO:
            a, b = scalars[0], scalars[1]
            (na, nb) = _require_numbers([a, b])
            if na > nb:
                return f"{a.raw} is greater than {b.raw}. So the answer is yes.", Value.yes_no(True)
            return f"{a.raw} is not greater than {b.raw}. So the answer is no.", Value.yes_no(False)

        pairs = groups[0]
        keys = [k for k, _ in pairs]
        values = [v for _, v in pairs]
        numbers = _require_numbers(values)

        if reduce in (Reduce.MIN, Reduce.ARGMIN):
            i = sorted(range(len(numbers)), key=lambda i: (numbers[i], i))[0]
            v, k = values[i], keys[i]
            answer = v.raw if reduce is Reduce.MIN else k
            text = f"The minimum value is {v.raw} in {k}. So the answer is {answer}."
            return text, Value.from_raw(answer)
        if reduce in (Reduce.MAX, Reduce.ARGMAX):
            i = sorted(range(len(numbers)), key=lambda i: (-numbers[i], i))[0]
            v, k = values[i], keys[i]
            answer = v.raw if reduce is Reduce.MAX else k
            text = f"The maximum value is {v.raw} in {k}. So the answer is {answer}."
            return text, Value.from_raw(answer)
        if reduce in (Reduce.COUNT_GREATER, Reduce.COUNT_LESS):
            threshold = plan.reduce_args[0]
            t = _require_numbers([threshold])[0]
            if reduce is Reduce.COUNT_GREATER:
                hits = [v for v in values if v.number is not None and v.number > t]
                relation = "greater than"
            else:
                hits = [v for v in values if v.number is not None and v.number < t]
                relation = "below"
            listing = ", ".join(v.raw for v in hits)
            n = len(hits)
            text = (f"The values that are {relation} {threshold.raw} are [{listing}]. "
                    f"So the answer is {n}.")
            return text, Value.from_raw(str(n))
        if reduce is Reduce.SECOND_HIGHEST:
            i = sorted(range(len(numbers)), key=lambda i: (-numbers[i], i))[1]
            v, k = values[i], keys[i]
            text = f"The second highest value is {v.raw} in {k}. So the answer is {k}."
            return text, Value.from_raw(k)
        if reduce is Reduce.ARG_MATCH:
            target = plan.reduce_args[0]
            for k, v in pairs:
                matched = (
                    v.number == target.number
                    if (v.number is not None and target.number is not None)
                    else v.raw == target.raw
                )
                if matched:
                    text = f"The value {target.raw} is in {k}. So the answer is {k}."
                    return text, Value.from_raw(k)
            return _unknown()
        if reduce is Reduce.SUM_TWO_SMALLEST_VS_LARGEST:
            order = sorted(range(len(numbers)), key=lambda i: (numbers[i], i))
            # The two smallest read in list order, as the worked traces do.
            first, second = sorted(order[:2])
            a, b = values[first], values[second]
            c = values[order[-1]]
            total = numbers[first] + numbers[second]
            largest = numbers[order[-1]]
            if total > largest:
                relation, verdict = "greater than", Value.yes_no(True)
            elif total < largest:
                relation, verdict = "smaller than", Value.yes_no(False)
            else:
                relation, verdict = "equal to", Value.yes_no(False)
            listing = ", ".join(v.raw for v in values)
            text = (f"Among [{listing}], the two smallest values are {a.raw} and {b.raw} "
                    f"while the largest value is {c.raw}. {a.raw}+{b.raw}={total}, "
                    f"which is {relation} {c.raw}. So the answer is {verdict.raw}.")
            return text, verdict
    except (IndexError, UndefinedResult):
        return _unknown()
    return _unknown()


# ---------------------------------------------------------------------------
# Template question generation.
# ---------------------------------------------------------------------------

_YEAR_RE = re.compile(r"\d{4}")


def _x_word(table: ChartTable) -> tuple[str, str]:
    if all(_YEAR_RE.fullmatch(x) for x in table.x_labels):
        return "year", "years"
    return "category", "categories"


def _numeric_row(table: ChartTable, i: int) -> bool:
    return all(v.number is not None for v in table.cells[i])


def _numeric_rows(table: ChartTable) -> list[int]:
    return [i for i in range(len(table.series)) if _numeric_row(table, i)]


def _gen_data_retrieval(table: ChartTable, rng: random.Random):
    single = len(table.series) == 1
    word, _ = _x_word(table)
    rows = _numeric_rows(table)
    choices = ["point"] + (["arg_match"] if rows else [])
    kind = rng.choice(choices)
    if kind == "point":
        si = rng.randrange(len(table.series))
        xi = rng.randrange(len(table.x_labels))
        if single:
            question = f"What is the value of {table.x_labels[xi]}?"
            queries = (point_query(table.x_labels[xi]),)
        else:
            name = table.series[si].name
            question = f"What is the value of {name} in {table.x_labels[xi]}?"
            queries = (point_query(name, table.x_labels[xi]),)
        return question, queries, Reduce.IDENTITY, ()
    si = rng.choice(rows)
    xi = rng.randrange(len(table.x_labels))
    target = table.cells[si][xi]
    name = table.series[si].name
    question = f"In which {word} is the value of {name} equal to {target.raw}?"
    return question, (group_query(name),), Reduce.ARG_MATCH, (target,)


def _gen_structural(table: ChartTable, rng: random.Random):
    if rng.random() < 0.5:
        return "How many legend labels are there?", (), Reduce.COUNT_SERIES, ()
    return "How many x-axis labels are there?", (), Reduce.COUNT_X_LABELS, ()


def _two_distinct(rng: random.Random, n: int) -> tuple[int, int]:
    first = rng.randrange(n)
    second = rng.randrange(n - 1)
    if second >= first:
        second += 1
    return first, second


def _gen_arithmetic(table: ChartTable, rng: random.Random):
    single = len(table.series) == 1
    _, words = _x_word(table)
    if single:
        if len(table.x_labels) < 2 or not _numeric_row(table, 0):
            raise SkippedTemplate("arithmetic needs two numeric cells")
        kind = rng.choice(["difference", "sum", "average"])
        if kind == "average":
            name = table.series[0].name
            question = f"What is the average value of {name} across all {words}?"
            return question, (group_query(name),), Reduce.AVERAGE, ()
        xa, xb = _two_distinct(rng, len(table.x_labels))
        if kind == "difference" and table.cells[0][xa].number < table.cells[0][xb].number:
            xa, xb = xb, xa
        la, lb = table.x_labels[xa], table.x_labels[xb]
        if kind == "difference":
            question = f"By how many points does the value in {la} surpass the value in {lb}?"
            return question, (point_query(la), point_query(lb)), Reduce.DIFFERENCE, ()
        question = f"What is the sum of the values in {la} and {lb}?"
        return question, (point_query(la), point_query(lb)), Reduce.SUM, ()
    rows = _numeric_rows(table)
    if len(rows) < 2:
        raise SkippedTemplate("arithmetic needs two numeric series")
    kind = rng.choice(["difference", "sum", "average"])
    ia, ib = _two_distinct(rng, len(rows))
    sa, sb = rows[ia], rows[ib]
    xi = rng.randrange(len(table.x_labels))
    if kind == "difference" and table.cells[sa][xi].number < table.cells[sb][xi].number:
        sa, sb = sb, sa
    na, nb = table.series[sa].name, table.series[sb].name
    x = table.x_labels[xi]
    queries = (point_query(na, x), point_query(nb, x))
    if kind == "difference":
        return f"By how many points does {na} surpass {nb} in {x}?", queries, Reduce.DIFFERENCE, ()
    if kind == "sum":
        return f"What is the sum of the values of {na} and {nb} in {x}?", queries, Reduce.SUM, ()
    return f"What is the average of the values of {na} and {nb} in {x}?", queries, Reduce.AVERAGE, ()


def _gen_compound(table: ChartTable, rng: random.Random):
    rows = _numeric_rows(table)
    if not rows:
        raise SkippedTemplate("compound needs a numeric series")
    _, words = _x_word(table)
    si = rng.choice(rows)
    threshold = table.cells[si][rng.randrange(len(table.x_labels))]
    greater = rng.random() < 0.5
    relation = "greater than" if greater else "below"
    reduce = Reduce.COUNT_GREATER if greater else Reduce.COUNT_LESS
    if len(table.series) == 1:
        question = f"In how many {words}, is the value of the bar {relation} {threshold.raw}?"
        return question, (group_query(None),), reduce, (threshold,)
    name = table.series[si].name
    question = f"In how many {words}, is the value of {name} {relation} {threshold.raw}?"
    return question, (group_query(name),), reduce, (threshold,)


def _gen_comparison(table: ChartTable, rng: random.Random):
    single = len(table.series) == 1
    rows = _numeric_rows(table)
    kinds = []
    if rows and len(table.x_labels) >= 2:
        kinds.extend(["ratio", "greater"])
    if single and len(table.x_labels) >= 3 and _numeric_row(table, 0):
        kinds.append("two_smallest")
    if not single and len(rows) >= 2:
        kinds.append("greater_series")
    if not kinds:
        raise SkippedTemplate("comparison needs two numeric cells")
    kind = rng.choice(kinds)
    if kind == "two_smallest":
        question = "Is the sum of the two smallest segments greater than the largest segment?"
        return question, (group_query(None),), Reduce.SUM_TWO_SMALLEST_VS_LARGEST, ()
    if kind == "greater_series":
        ia, ib = _two_distinct(rng, len(rows))
        sa, sb = rows[ia], rows[ib]
        x = table.x_labels[rng.randrange(len(table.x_labels))]
        na, nb = table.series[sa].name, table.series[sb].name
        question = f"Is the value of {na} in {x} greater than the value of {nb} in {x}?"
        return question, (point_query(na, x), point_query(nb, x)), Reduce.COMPARE_YES_NO, ()
    si = rng.choice(rows)
    for _ in range(20):
        xa, xb = _two_distinct(rng, len(table.x_labels))
        if kind != "ratio" or table.cells[si][xb].number != 0:
            break
    else:
        raise SkippedTemplate("no nonzero denominator available")
    la, lb = table.x_labels[xa], table.x_labels[xb]
    if single:
        queries = (point_query(la), point_query(lb))
        if kind == "ratio":
            question = f"What is the ratio of the value in {la} to that in {lb}?"
            return question, queries, Reduce.RATIO, ()
        question = f"Is the value in {la} greater than the value in {lb}?"
        return question, queries, Reduce.COMPARE_YES_NO, ()
    name = table.series[si].name
    queries = (point_query(name, la), point_query(name, lb))
    if kind == "ratio":
        question = f"What is the ratio of the value of {name} in {la} to that in {lb}?"
        return question, queries, Reduce.RATIO, ()
    question = f"Is the value of {name} in {la} greater than the value of {name} in {lb}?"
    return question, (point_query(name, la), point_query(name, lb)), Reduce.COMPARE_YES_NO, ()


def _gen_min_max(table: ChartTable, rng: random.Random):
    rows = _numeric_rows(table)
    if not rows:
        raise SkippedTemplate("min-max needs a numeric series")
    word, words = _x_word(table)
    si = rng.choice(rows)
    name = table.series[si].name
    kinds = ["min", "max", "argmin", "argmax"]
    if len(table.x_labels) >= 2:
        kinds.append("second_highest")
    kind = rng.choice(kinds)
    queries = (group_query(name),)
    if kind == "min":
        return (f"Across all {words}, what is the minimum value of {name}?",
                queries, Reduce.MIN, ())
    if kind == "max":
        return (f"Across all {words}, what is the maximum value of {name}?",
                queries, Reduce.MAX, ())
    if kind == "argmin":
        return (f"In which {word} is the value of {name} the lowest?",
                queries, Reduce.ARGMIN, ())
    if kind == "argmax":
        return (f"In which {word} is the value of {name} the highest?",
                queries, Reduce.ARGMAX, ())
    return (f"Which {word} has the second highest value of {name}?",
            queries, Reduce.SECOND_HIGHEST, ())


_GENERATORS = {
    TemplateType.DATA_RETRIEVAL: _gen_data_retrieval,
    TemplateType.STRUCTURAL: _gen_structural,
    TemplateType.ARITHMETIC: _gen_arithmetic,
    TemplateType.COMPOUND: _gen_compound,
    TemplateType.COMPARISON: _gen_comparison,
    TemplateType.MIN_MAX: _gen_min_max,
}


def gen_questions(
    table: ChartTable,
    template_type: TemplateType,
    seed: int,
    n: int = 1,
    describe_first: bool = True,
) -> list[tuple[QAInstance, QuestionPlan]]:
    """Instantiate template questions over a table, deterministic under seed.

    Gold answers come from compute_gold's brute force, not from the plan's
    eventual execution.  Raises SkippedTemplate when the table cannot host
    the template (too small, non-numeric).
    """
    rng = random.Random(stable_seed(seed, template_type.value, table.source_id))
    generate = _GENERATORS[template_type]
    out: list[tuple[QAInstance, QuestionPlan]] = []
    for _ in range(n):
        question, queries, reduce, args = generate(table, rng)
        plan = QuestionPlan(
            template_type=template_type,
            queries=_with_describe(queries, describe_first),
            reduce=reduce,
            reduce_args=tuple(args),
        )
        gold = compute_gold(table, plan)
        out.append((QAInstance(question, gold.answer, table.source_id, template_type), plan))
    return out


# ---------------------------------------------------------------------------
# Reasoner backend: replays decompose/deduce through the episode loop.
# ---------------------------------------------------------------------------

def _align_entity(name: Optional[str], pool: Sequence[str]) -> Optional[str]:
    if name is None:
        return None
    want = normalize_name(name)
    for candidate in pool:
        if normalize_name(candidate) == want:
            return candidate
    best, best_score = None, 0.0
    for candidate in pool:
        score = edit_similarity(name, candidate)
        if score > best_score:
            best, best_score = candidate, score
    if best is not None and best_score >= 0.8:
        return best
    return name


class SymbolicReasoner:
    """Deterministic reasoner backend over the template grammar.

    Stateless across calls: each completion re-derives its position from the
    prompt, emits the next planned query (with entity spellings aligned to
    the figure description once it is available), and finally deduces the
    concluding sentence from the spliced reader answers.
    """

    def __init__(self, describe_first: bool = True):
        self.describe_first = describe_first

    def complete(
        self,
        prompt: str,
        stop_markers: Sequence[str],
        temperature: float,
        max_tokens: int,
    ) -> str:
        from .protocol import parse_reader_answer

        question = _last_question(prompt)
        if question is None:
            return UNKNOWN_CONCLUSION
        try:
            plan = decompose(question, describe_first=self.describe_first)
        except NotTemplated:
            return UNKNOWN_CONCLUSION
        lines = _lines_after_answer_marker(prompt)
        answers = [parse_reader_answer(line) for line in lines[1::2]]
        index = len(lines) // 2
        if index < len(plan.queries):
            return format_query(self._grounded(plan.queries[index], answers))
        text, _ = deduce(plan, answers)
        return text

    def _grounded(self, query: AtomicQuery, answers: Sequence[ReaderAnswer]) -> AtomicQuery:
        description = next((a for a in answers if a.kind is AnswerKind.DESCRIPTION), None)
        if query.op is QueryOp.DESCRIBE or description is None:
            return query
        series = list(description.series_names)
        pool = series + list(description.x_labels)
        if query.op is QueryOp.EXTRACT_POINT:
            return point_query(
                _align_entity(query.entity, pool) or "",
                _align_entity(query.by, pool),
            )
        if query.entity is None:
            # Name the only series explicitly, as the annotated traces do.
            if len(series) == 1:
                return group_query(series[0])
            return query
        return group_query(_align_entity(query.entity, pool))


def _last_question(prompt: str) -> Optional[str]:
    marker = prompt.rfind("\nQ: ")
    if marker < 0:
        if prompt.startswith("Q: "):
            marker = -1
        else:
            return None
    start = marker + 4
    end = prompt.find("\n", start)
    return prompt[start:] if end < 0 else prompt[start:end]


def _lines_after_answer_marker(prompt: str) -> list[str]:
    marker = prompt.rfind("\nA: ")
    if marker < 0:
        return []
    text = prompt[marker + 4:]
    return [line for line in text.split("\n") if line]
