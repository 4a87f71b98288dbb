from __future__ import annotations

import csv

import pytest

from skillprobe.model import Role, SkillCategory, SkillDescriptor, Utterance

CATEGORIES = list(SkillCategory)


def make_skill(i: int = 0, category: SkillCategory | None = None, **overrides) -> SkillDescriptor:
    fields = dict(
        id=f"s{i:03d}",
        display_name=f"Skill {i}",
        invocation_name=f"test skill {i}",
        category=category or CATEGORIES[i % len(CATEGORIES)],
        subcategory=None,
        review_count=1000 - i,
        avg_rating=4.0,
    )
    fields.update(overrides)
    return SkillDescriptor(**fields)


def make_skills(n: int) -> list[SkillDescriptor]:
    return [make_skill(i) for i in range(n)]


def crawler_says(text: str, ts: int = 0) -> Utterance:
    return Utterance(role=Role.CRAWLER, text=text, timestamp=ts)


def skill_says(text: str, ts: int = 0) -> Utterance:
    return Utterance(role=Role.SKILL, text=text, confidence=1.0, timestamp=ts)


def write_roster_csv(path, skills: list[SkillDescriptor]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "id",
                "display_name",
                "invocation_name",
                "category",
                "subcategory",
                "review_count",
                "avg_rating",
                "excluded_reason",
            ]
        )
        for s in skills:
            writer.writerow(
                [
                    s.id,
                    s.display_name,
                    s.invocation_name,
                    s.category.value,
                    s.subcategory or "",
                    s.review_count,
                    "" if s.avg_rating is None else s.avg_rating,
                    s.excluded_reason or "",
                ]
            )


@pytest.fixture
def ten_skills() -> list[SkillDescriptor]:
    return make_skills(10)
