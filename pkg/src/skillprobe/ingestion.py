"""Roster loading and sample selection.

Rosters are flat files (CSV or a JSON array) of skill rows.  ``select_top``
picks the review sample: per category, take the k most-reviewed skills
while spreading slots across subcategories.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .model import SkillCategory, SkillDescriptor, ValidationError

CSV_COLUMNS = (
    "id",
    "display_name",
    "invocation_name",
    "category",
    "subcategory",
    "review_count",
    "avg_rating",
    "excluded_reason",
)


@dataclass(frozen=True)
class Roster:
    skills: tuple[SkillDescriptor, ...]
    source: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for skill in self.skills:
            if skill.id in seen:
                raise ValidationError(f"duplicate skill id in roster: {skill.id}")
            seen.add(skill.id)

    @property
    def active(self) -> tuple[SkillDescriptor, ...]:
        """Rows not marked excluded; the crawlable population."""
        return tuple(s for s in self.skills if not s.excluded_reason)


def load_roster(path: str | Path, format: str | None = None) -> Roster:
    """Read a roster file.  ``format`` is "csv" or "json"; inferred from the
    file suffix when omitted.  Raises ValidationError with the offending row
    number and field on bad input."""
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower() or "csv"
    if format == "csv":
        skills = _load_csv(path)
    elif format == "json":
        skills = _load_json(path)
    else:
        raise ValidationError(f"unsupported roster format: {format}")
    return Roster(skills=tuple(skills), source=str(path))


def _load_csv(path: Path) -> list[SkillDescriptor]:
    skills = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = [c for c in CSV_COLUMNS[:6] if c not in reader.fieldnames]
        if missing:
            raise ValidationError(f"{path}: missing roster columns: {', '.join(missing)}")
        for row_num, row in enumerate(reader, 2):
            skills.append(_parse_row(row, f"{path}:{row_num}"))
    return skills


def _load_json(path: Path) -> list[SkillDescriptor]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    if data == []:
        return []
    if not isinstance(data, list):
        raise ValidationError(f"{path}: roster JSON must be an array of rows")
    return [_parse_row(row, f"{path}[{i}]") for i, row in enumerate(data)]


def _parse_row(row: dict, where: str) -> SkillDescriptor:
    try:
        raw_count = row.get("review_count", 0)
        count = int(raw_count) if raw_count not in (None, "") else 0
        if count < 0:
            raise ValidationError("review_count must be non-negative")
        return SkillDescriptor(
            id=str(row.get("id", "")).strip(),
            display_name=str(row.get("display_name", "")).strip(),
            invocation_name=str(row.get("invocation_name", "")).strip(),
            category=SkillCategory.parse(str(row.get("category", "")).strip()),
            subcategory=(row.get("subcategory") or "").strip() or None,
            review_count=count,
            avg_rating=(
                None
                if row.get("avg_rating") in (None, "")
                else float(row["avg_rating"])
            ),
            excluded_reason=(row.get("excluded_reason") or "").strip() or None,
        )
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def select_top(roster: Roster, k: int) -> Roster:
    """Pick up to k skills per category by review count, balancing slots
    across subcategories.

    Each of the m subcategories gets floor(k/m) slots, with the k mod m
    leftover slots going to subcategories in descending order of their top
    skill's review count.  Slots a subcategory cannot fill roll over to the
    next subcategories in that same order.  Within a subcategory, selection
    is by descending review_count, ties broken by ascending id.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")

    selected: list[SkillDescriptor] = []
    for category in SkillCategory:
        members = [s for s in roster.skills if s.category is category]
        if not members:
            continue
        selected.extend(_select_category(members, k))
    return Roster(skills=tuple(selected), source=roster.source)


def _by_reviews(skills: list[SkillDescriptor]) -> list[SkillDescriptor]:
    return sorted(skills, key=lambda s: (-s.review_count, s.id))


def _select_category(members: list[SkillDescriptor], k: int) -> list[SkillDescriptor]:
    groups: dict[str | None, list[SkillDescriptor]] = {}
    for skill in members:
        groups.setdefault(skill.subcategory, []).append(skill)
    ranked_groups = [_by_reviews(g) for g in groups.values()]
    # Share priority: descending top-skill review count, then its id.
    ranked_groups.sort(key=lambda g: (-g[0].review_count, g[0].id))

    m = len(ranked_groups)
    base, extra = divmod(k, m)
    shares = [base + (1 if i < extra else 0) for i in range(m)]

    taken = [min(share, len(g)) for share, g in zip(shares, ranked_groups)]
    leftover = k - sum(taken)
    while leftover > 0:
        progressed = False
        for i, group in enumerate(ranked_groups):
            spare = len(group) - taken[i]
            if spare > 0:
                grab = min(spare, leftover)
                taken[i] += grab
                leftover -= grab
                progressed = True
                if leftover == 0:
                    break
        if not progressed:
            break

    picked: list[SkillDescriptor] = []
    for count, group in zip(taken, ranked_groups):
        picked.extend(group[:count])
    return picked
