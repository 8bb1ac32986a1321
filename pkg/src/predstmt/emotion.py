"""Lexicon-based emotion tagging and per-coin aggregation.

Documents are tagged with grouped emotion categories by matching lexicon
terms and phrases against preprocessed tokens (longest phrase first,
non-overlapping, left to right). Aggregation reports, for every coin and
direction label, the percentage of documents tagged with each category.
Categories co-occur freely, so row percentages need not sum to 100.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Mapping

from .corpus import Coin, DataError, Dataset, Document, Task2Label
from .preprocess import DEFAULT_CLEAN, CleanConfig, preprocess


class EmotionCategory(Enum):
    DELIGHT_JOY = "delight_joy"
    ENTHUSIASM_EAGERNESS = "enthusiasm_eagerness"
    DELIGHT_PLEASANTNESS = "delight_pleasantness"
    GRIEF_SADNESS = "grief_sadness"
    FEAR_ANXIETY = "fear_anxiety"
    RAGE_ANGER = "rage_anger"


#: Fixed rendering order and display titles for report columns.
CATEGORY_TITLES: dict[EmotionCategory, str] = {
    EmotionCategory.DELIGHT_JOY: "Delight and Joy",
    EmotionCategory.ENTHUSIASM_EAGERNESS: "Enthusiasm and Eagerness",
    EmotionCategory.DELIGHT_PLEASANTNESS: "Delight and Pleasantness",
    EmotionCategory.GRIEF_SADNESS: "Grief and Sadness",
    EmotionCategory.FEAR_ANXIETY: "Fear and Anxiety",
    EmotionCategory.RAGE_ANGER: "Rage and Anger",
}

_DIRECTION_ROW_NAMES = {
    Task2Label.INCREMENTAL: "Incremental",
    Task2Label.DECREMENTAL: "Decremental",
    Task2Label.NEUTRAL: "Neutral",
}


@dataclass(frozen=True)
class EmotionLexicon:
    """Validated term table plus base-emotion grouping.

    phrase_entries maps token tuples (terms split on whitespace, case
    folded) to (base emotion, weight) pairs; every base emotion appearing
    in an entry has a grouping into one of the six categories.
    """

    phrase_entries: Mapping[tuple[str, ...], tuple[tuple[str, float], ...]]
    grouping: Mapping[str, EmotionCategory]
    max_phrase_len: int


def _reject_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise DataError(f"duplicate key {key!r} in lexicon file")
        seen.add(key)
    return dict(pairs)


def load_lexicon(path: str | Path) -> EmotionLexicon:
    """Load and validate a JSON lexicon of {"entries": ..., "grouping": ...}.

    Every entry value is a list of [base emotion, weight] pairs with
    weights in [0, 1]. Duplicate terms (including terms equal after case
    folding) and base emotions without a grouping are rejected.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"), object_pairs_hook=_reject_duplicate_keys)
    except OSError as exc:
        raise DataError(f"cannot read lexicon {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"lexicon {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(raw, dict) or set(raw) != {"entries", "grouping"}:
        raise DataError(f"lexicon {path} must contain exactly 'entries' and 'grouping'")

    grouping_raw = raw["grouping"]
    if not isinstance(grouping_raw, dict):
        raise DataError("lexicon 'grouping' must be an object")
    grouping: dict[str, EmotionCategory] = {}
    for emotion, category in grouping_raw.items():
        try:
            grouping[emotion.casefold()] = EmotionCategory(category)
        except ValueError:
            raise DataError(
                f"base emotion {emotion!r} grouped into unknown category {category!r}"
            ) from None

    entries_raw = raw["entries"]
    if not isinstance(entries_raw, dict):
        raise DataError("lexicon 'entries' must be an object")
    phrase_entries: dict[tuple[str, ...], tuple[tuple[str, float], ...]] = {}
    max_len = 0
    for term, rows in entries_raw.items():
        key = tuple(term.casefold().split())
        if not key:
            raise DataError("lexicon entry term must be non-empty")
        if key in phrase_entries:
            raise DataError(f"duplicate lexicon term {term!r} after case folding")
        if not isinstance(rows, list) or not rows:
            raise DataError(f"lexicon entry {term!r} must list [emotion, weight] pairs")
        pairs = []
        for row in rows:
            if (not isinstance(row, list) or len(row) != 2
                    or not isinstance(row[0], str)
                    or not isinstance(row[1], (int, float)) or isinstance(row[1], bool)):
                raise DataError(f"lexicon entry {term!r} has a malformed [emotion, weight] row")
            emotion = row[0].casefold()
            weight = float(row[1])
            if not 0.0 <= weight <= 1.0:
                raise DataError(f"lexicon entry {term!r}: weight {weight} outside [0, 1]")
            if emotion not in grouping:
                raise DataError(
                    f"lexicon entry {term!r} references ungrouped base emotion {row[0]!r}"
                )
            pairs.append((emotion, weight))
        phrase_entries[key] = tuple(pairs)
        max_len = max(max_len, len(key))
    return EmotionLexicon(
        phrase_entries=phrase_entries, grouping=grouping, max_phrase_len=max_len
    )


def bundled_lexicon_path() -> Path:
    from importlib import resources

    return Path(str(resources.files("predstmt.data").joinpath("emotion_lexicon.json")))


def tag_document(doc: Document, lex: EmotionLexicon, threshold: float = 0.0,
                 clean_cfg: CleanConfig = DEFAULT_CLEAN) -> set[EmotionCategory]:
    """Emotion categories whose matched weight exceeds the threshold.

    Tokens come from the standard preprocessing pipeline; phrases match
    longest-first without overlap. No matches yield the empty set.
    """
    tokens = preprocess(doc.text, clean_cfg)
    found: set[EmotionCategory] = set()
    i = 0
    n = len(tokens)
    while i < n:
        matched_len = 0
        for length in range(min(lex.max_phrase_len, n - i), 0, -1):
            entry = lex.phrase_entries.get(tuple(tokens[i:i + length]))
            if entry is not None:
                for emotion, weight in entry:
                    if weight > threshold:
                        found.add(lex.grouping[emotion])
                matched_len = length
                break
        i += matched_len if matched_len else 1
    return found


@dataclass(frozen=True)
class EmotionProfile:
    """Per-category document percentages for one (coin, label) cell."""

    percentages: Mapping[EmotionCategory, float]
    cell_count: int


@dataclass(frozen=True)
class EmotionReport:
    profiles: Mapping[tuple[Coin, Task2Label], EmotionProfile]

    def to_dict(self) -> dict:
        out: dict = {}
        for (coin, label), profile in self.profiles.items():
            cell = out.setdefault(coin.value, {})
            cell[str(int(label))] = {
                **{cat.value: profile.percentages[cat] for cat in EmotionCategory},
                "cell_count": profile.cell_count,
            }
        return out


def _round2(count: int, total: int) -> float:
    pct = (Decimal(count) * 100) / Decimal(total)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def aggregate(dataset: Dataset, lex: EmotionLexicon, threshold: float = 0.0,
              clean_cfg: CleanConfig = DEFAULT_CLEAN) -> EmotionReport:
    """Tag every coin-bearing, direction-labeled document and aggregate.

    percentage(category) = 100 * tagged / cell size, rounded half-up to
    two decimals. Cells with no documents are absent from the report.
    """
    cells: dict[tuple[Coin, Task2Label], dict] = {}
    for doc in dataset:
        if doc.coin is None or doc.task2 is None:
            continue
        cell = cells.setdefault(
            (doc.coin, doc.task2),
            {"n": 0, "tagged": {cat: 0 for cat in EmotionCategory}},
        )
        cell["n"] += 1
        for category in tag_document(doc, lex, threshold, clean_cfg):
            cell["tagged"][category] += 1
    profiles = {
        key: EmotionProfile(
            percentages={
                cat: _round2(cell["tagged"][cat], cell["n"]) for cat in EmotionCategory
            },
            cell_count=cell["n"],
        )
        for key, cell in cells.items()
    }
    return EmotionReport(profiles=profiles)


def render_markdown(report: EmotionReport) -> str:
    """Markdown table in fixed coin and label order; zero cells show an en dash."""
    titles = [CATEGORY_TITLES[cat] for cat in EmotionCategory]
    lines = [
        "| Coin | Label | " + " | ".join(titles) + " |",
        "| --- | --- | " + " | ".join("---" for _ in titles) + " |",
    ]
    for coin in Coin:
        for label in Task2Label:
            profile = report.profiles.get((coin, label))
            if profile is None:
                continue
            cells = []
            for cat in EmotionCategory:
                pct = profile.percentages[cat]
                cells.append("–" if pct == 0 else f"{pct:.2f}")
            lines.append(
                f"| {coin.value} | {_DIRECTION_ROW_NAMES[label]} | " + " | ".join(cells) + " |"
            )
    return "\n".join(lines)
