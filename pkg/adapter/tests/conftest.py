from __future__ import annotations

import subprocess
import sys

# The harness under test is reached only through its public surfaces: the
# skillprobe CLI, its file formats, and the wire protocol.
PYTHON = sys.executable


def run_cli(*args: str, timeout: int = 120) -> subprocess.CompletedProcess:
    return subprocess.run(
        [PYTHON, "-m", *[str(a) for a in args]],
        capture_output=True,
        text=True,
        timeout=timeout,
    )


ROSTER_HEADER = (
    "id,display_name,invocation_name,category,subcategory,review_count,avg_rating,excluded_reason\n"
)

CATEGORIES = [
    "daily_activities",
    "entertainment",
    "education_reference",
    "health_fitness",
    "travel_transportation",
    "games_trivia_accessories",
    "food_drink",
    "shopping_finance",
    "communication_social",
    "kids",
]


def write_roster(path, n: int) -> None:
    rows = [ROSTER_HEADER]
    for i in range(n):
        rows.append(
            f"s{i:03d},Skill {i},test skill {i},{CATEGORIES[i % 10]},,{1000 - i},4.0,\n"
        )
    path.write_text("".join(rows))
