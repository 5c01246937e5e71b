"""Manual spot-check of emitted triples.

A seeded sample is presented one item at a time; the assessor labels each
with one of five categories covering whether the relevance and the
non-relevance assertions held up, or whether the query was too vague to
tell. Strict accuracy counts only fully-correct items; lenient accuracy
also forgives underspecified queries (they rarely damage training - the
negative passage is still not relevant to them).
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence

CATEGORIES = (
    "both_correct",
    "relevance_wrong",
    "nonrelevance_wrong",
    "both_wrong",
    "underspecified",
)
_KEY_TO_CATEGORY = {str(i + 1): c for i, c in enumerate(CATEGORIES)}


@dataclass
class AssessmentRecord:
    triple_id: str
    category: str
    note: str = ""

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")


@dataclass
class AssessmentReport:
    total: int
    counts: dict[str, int]
    strict_accuracy: float | None
    lenient_accuracy: float | None

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "counts": self.counts,
            "strict_accuracy": self.strict_accuracy,
            "lenient_accuracy": self.lenient_accuracy,
        }


def aggregate(records: Sequence[AssessmentRecord]) -> AssessmentReport:
    counts = {c: 0 for c in CATEGORIES}
    for r in records:
        counts[r.category] += 1
    total = len(records)
    if total == 0:
        return AssessmentReport(0, counts, None, None)
    strict = counts["both_correct"] / total
    lenient = (counts["both_correct"] + counts["underspecified"]) / total
    return AssessmentReport(total, counts, strict, lenient)


def load_session(path: str | Path) -> list[AssessmentRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            out.append(AssessmentRecord(rec["triple_id"], rec["category"], rec.get("note", "")))
    return out


def sample_triples(
    triples: Sequence[dict], sample_size: int, rng_seed: int
) -> list[dict]:
    rng = random.Random(rng_seed)
    k = min(sample_size, len(triples))
    return rng.sample(list(triples), k) if k else []


def run_session(
    triples: Sequence[dict],
    passages: Mapping[str, str],
    sample_size: int,
    rng_seed: int,
    session_path: str | Path,
    in_stream: IO[str],
    out_stream: IO[str],
) -> AssessmentReport:
    """Interactive labeling loop; resumable.

    Each label is appended to the session file immediately, so an
    interrupted session picks up where it left off. Enter 1-5 to label,
    's' to skip, 'q' to stop and report.
    """
    session_path = Path(session_path)
    records = load_session(session_path)
    seen = {r.triple_id for r in records}
    sample = sample_triples(triples, sample_size, rng_seed)
    todo = [t for t in sample if t["triple_id"] not in seen]
    menu = "  ".join(f"[{k}] {c}" for k, c in _KEY_TO_CATEGORY.items())
    with session_path.open("a", encoding="utf-8") as session:
        for i, t in enumerate(todo, 1):
            out_stream.write(f"\n--- {i}/{len(todo)}  {t['triple_id']} ---\n")
            out_stream.write(f"query:    {t['query']}\n")
            out_stream.write(f"positive: {passages.get(t['positive_id'], '?')}\n")
            out_stream.write(f"negative: {passages.get(t['negative_id'], '?')}\n")
            out_stream.write(f"{menu}  [s]kip  [q]uit\n> ")
            out_stream.flush()
            line = in_stream.readline()
            if not line:
                break
            choice = line.strip().lower()
            if choice == "q":
                break
            if choice == "s" or choice not in _KEY_TO_CATEGORY:
                continue
            rec = AssessmentRecord(t["triple_id"], _KEY_TO_CATEGORY[choice])
            records.append(rec)
            session.write(json.dumps(rec.__dict__, ensure_ascii=False) + "\n")
            session.flush()
    report = aggregate(records)
    out_stream.write(format_report(report))
    return report


def format_report(report: AssessmentReport) -> str:
    lines = [f"\nassessed: {report.total}"]
    for c in CATEGORIES:
        lines.append(f"  {c}: {report.counts.get(c, 0)}")
    if report.strict_accuracy is None:
        lines.append("accuracy: n/a (nothing assessed)")
    else:
        lines.append(f"strict accuracy:  {report.strict_accuracy:.1%}")
        lines.append(f"lenient accuracy: {report.lenient_accuracy:.1%}")
    return "\n".join(lines) + "\n"
