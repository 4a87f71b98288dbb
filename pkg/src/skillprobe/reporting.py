"""Aggregate verdicts into the two headline analyses.

Per guideline: compliance counts and rates over the whole evaluated sample
(not-applicable and inconclusive skills stay in the denominator, so the
rates are whole-sample percentages; a strict rate over only
the decided skills is carried alongside for transparency).  Per category:
the mean number of guidelines complied with and the mean support rate of
each feature group.  Rates are exact rationals internally and render to
three decimals (or one-decimal percent in markdown).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .evaluator import SkillEvaluation
from .ingestion import Roster
from .model import (
    FeatureGroup,
    GuidelineId,
    SkillCategory,
    ValidationError,
    Verdict,
)


@dataclass(frozen=True)
class GuidelineStats:
    compliant: int
    non_compliant: int
    not_applicable: int
    inconclusive: int
    rate: Fraction
    strict_rate: Fraction | None

    @property
    def total(self) -> int:
        return self.compliant + self.non_compliant + self.not_applicable + self.inconclusive


@dataclass(frozen=True)
class CategoryStats:
    skill_count: int
    avg_guidelines_complied: Fraction
    feature_group_rates: dict[FeatureGroup, Fraction]


@dataclass(frozen=True)
class ComplianceReport:
    per_guideline: dict[GuidelineId, GuidelineStats]
    guideline_ranking: tuple[GuidelineId, ...]
    per_category: dict[SkillCategory, CategoryStats]
    category_ranking: tuple[SkillCategory, ...]
    total_skills: int

    def __post_init__(self) -> None:
        for guideline, stats in self.per_guideline.items():
            if stats.total != self.total_skills:
                raise ValidationError(
                    f"{guideline.value}: verdict counts sum to {stats.total}, "
                    f"expected {self.total_skills}"
                )
            if not 0 <= stats.rate <= 1:
                raise ValidationError(f"{guideline.value}: rate outside [0, 1]")


def compliance_rate(evaluations: Sequence[SkillEvaluation], guideline: GuidelineId) -> Fraction:
    """Compliant count over all evaluated skills."""
    if not evaluations:
        raise ValidationError("compliance_rate needs at least one evaluation")
    compliant = sum(
        1 for e in evaluations if e.verdicts[guideline].verdict is Verdict.COMPLIANT
    )
    return Fraction(compliant, len(evaluations))


def _guideline_stats(
    evaluations: Sequence[SkillEvaluation], guideline: GuidelineId
) -> GuidelineStats:
    tally = {v: 0 for v in Verdict}
    for evaluation in evaluations:
        tally[evaluation.verdicts[guideline].verdict] += 1
    decided = tally[Verdict.COMPLIANT] + tally[Verdict.NON_COMPLIANT]
    return GuidelineStats(
        compliant=tally[Verdict.COMPLIANT],
        non_compliant=tally[Verdict.NON_COMPLIANT],
        not_applicable=tally[Verdict.NOT_APPLICABLE],
        inconclusive=tally[Verdict.INCONCLUSIVE],
        rate=Fraction(tally[Verdict.COMPLIANT], len(evaluations)),
        strict_rate=Fraction(tally[Verdict.COMPLIANT], decided) if decided else None,
    )


def rank_guidelines(per_guideline: dict[GuidelineId, GuidelineStats]) -> tuple[GuidelineId, ...]:
    """Descending by rate; ties broken by ascending guideline number."""
    return tuple(
        sorted(per_guideline, key=lambda g: (-per_guideline[g].rate, g.number))
    )


def category_summary(
    evaluations: Sequence[SkillEvaluation], roster: Roster
) -> tuple[dict[SkillCategory, CategoryStats], tuple[SkillCategory, ...]]:
    """Per-category compliance averages and the resulting ranking."""
    categories = {s.id: s.category for s in roster.skills}
    missing = [e.skill_id for e in evaluations if e.skill_id not in categories]
    if missing:
        raise ValidationError(f"evaluated skills missing from roster: {', '.join(missing)}")

    by_category: dict[SkillCategory, list[SkillEvaluation]] = {}
    for evaluation in evaluations:
        by_category.setdefault(categories[evaluation.skill_id], []).append(evaluation)

    stats: dict[SkillCategory, CategoryStats] = {}
    for category, members in by_category.items():
        n = len(members)
        avg = Fraction(sum(e.compliant_count() for e in members), n)
        group_rates: dict[FeatureGroup, Fraction] = {}
        for group in FeatureGroup:
            guidelines = [g for g in GuidelineId if g.feature_group is group]
            per_guideline = [
                Fraction(
                    sum(
                        1
                        for e in members
                        if e.verdicts[g].verdict is Verdict.COMPLIANT
                    ),
                    n,
                )
                for g in guidelines
            ]
            group_rates[group] = sum(per_guideline, Fraction(0)) / len(per_guideline)
        stats[category] = CategoryStats(
            skill_count=n,
            avg_guidelines_complied=avg,
            feature_group_rates=group_rates,
        )

    ranking = tuple(
        sorted(
            stats,
            key=lambda c: (-stats[c].avg_guidelines_complied, c.value),
        )
    )
    return stats, ranking


def build_report(evaluations: Sequence[SkillEvaluation], roster: Roster) -> ComplianceReport:
    if not evaluations:
        raise ValidationError("cannot build a report from zero evaluations")
    per_guideline = {g: _guideline_stats(evaluations, g) for g in GuidelineId}
    per_category, category_ranking = category_summary(evaluations, roster)
    return ComplianceReport(
        per_guideline=per_guideline,
        guideline_ranking=rank_guidelines(per_guideline),
        per_category=per_category,
        category_ranking=category_ranking,
        total_skills=len(evaluations),
    )


# ---------------------------------------------------------------------------
# Emitters
# ---------------------------------------------------------------------------


def _round3(value: Fraction | None) -> float | None:
    return None if value is None else round(float(value), 3)


def _pct(value: Fraction) -> str:
    return f"{float(value) * 100:.1f}%"


def emit_report(report: ComplianceReport, format: str) -> bytes:
    if format == "json":
        return _emit_json(report)
    if format == "csv":
        return _emit_csv(report)
    if format == "markdown":
        return _emit_markdown(report)
    raise ValidationError(f"unsupported report format: {format}")


def _emit_json(report: ComplianceReport) -> bytes:
    payload = {
        "total_skills": report.total_skills,
        "per_guideline": {
            g.value: {
                "compliant_count": stats.compliant,
                "non_compliant_count": stats.non_compliant,
                "not_applicable_count": stats.not_applicable,
                "inconclusive_count": stats.inconclusive,
                "rate": _round3(stats.rate),
                "strict_rate": _round3(stats.strict_rate),
            }
            for g, stats in ((g, report.per_guideline[g]) for g in GuidelineId)
        },
        "guideline_ranking": [g.value for g in report.guideline_ranking],
        "per_category": {
            c.value: {
                "skill_count": stats.skill_count,
                "avg_guidelines_complied": _round3(stats.avg_guidelines_complied),
                "feature_group_rates": {
                    group.value: _round3(stats.feature_group_rates[group])
                    for group in FeatureGroup
                },
            }
            for c, stats in ((c, report.per_category[c]) for c in report.category_ranking)
        },
        "category_ranking": [c.value for c in report.category_ranking],
    }
    return (json.dumps(payload, indent=2, sort_keys=False) + "\n").encode("utf-8")


def _emit_csv(report: ComplianceReport) -> bytes:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "guideline",
            "compliant",
            "non_compliant",
            "not_applicable",
            "inconclusive",
            "rate",
            "strict_rate",
        ]
    )
    for g in report.guideline_ranking:
        stats = report.per_guideline[g]
        writer.writerow(
            [
                g.value,
                stats.compliant,
                stats.non_compliant,
                stats.not_applicable,
                stats.inconclusive,
                f"{float(stats.rate):.3f}",
                "" if stats.strict_rate is None else f"{float(stats.strict_rate):.3f}",
            ]
        )
    writer.writerow([])
    writer.writerow(
        ["category", "skills", "avg_guidelines_complied"]
        + [group.value for group in FeatureGroup]
    )
    for category in report.category_ranking:
        stats = report.per_category[category]
        writer.writerow(
            [
                category.value,
                stats.skill_count,
                f"{float(stats.avg_guidelines_complied):.3f}",
            ]
            + [f"{float(stats.feature_group_rates[g]):.3f}" for g in FeatureGroup]
        )
    return out.getvalue().encode("utf-8")


def _emit_markdown(report: ComplianceReport) -> bytes:
    lines = [
        f"# Compliance report ({report.total_skills} skills)",
        "",
        "## Compliance rate by guideline",
        "",
        "| rank | guideline | compliant | rate | strict rate |",
        "| --- | --- | --- | --- | --- |",
    ]
    for rank, g in enumerate(report.guideline_ranking, 1):
        stats = report.per_guideline[g]
        strict = "-" if stats.strict_rate is None else _pct(stats.strict_rate)
        lines.append(
            f"| {rank} | {g.value} | {stats.compliant}/{report.total_skills} "
            f"| {_pct(stats.rate)} | {strict} |"
        )
    lines += [
        "",
        "## Feature-group support by category",
        "",
        "| rank | category | skills | avg guidelines | basic commands | variety "
        "| error handling | memorizing |",
        "| --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for rank, category in enumerate(report.category_ranking, 1):
        stats = report.per_category[category]
        rates = stats.feature_group_rates
        lines.append(
            f"| {rank} | {category.value} | {stats.skill_count} "
            f"| {float(stats.avg_guidelines_complied):.2f} "
            f"| {_pct(rates[FeatureGroup.BASIC_COMMANDS])} "
            f"| {_pct(rates[FeatureGroup.VARIETY])} "
            f"| {_pct(rates[FeatureGroup.ERROR_HANDLING])} "
            f"| {_pct(rates[FeatureGroup.MEMORIZING])} |"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")
