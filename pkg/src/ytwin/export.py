"""Analysis datasets exported from a finished store as CSV files."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .db import PlatformStore
from .errors import EmptyStore
from .models import ContentKind

logger = logging.getLogger(__name__)

ACTIVITY_METRICS = (
    "posts",
    "comments",
    "news",
    "shares",
    "hashtags",
    "mentions_made",
    "mentions_received",
)


def ccdf(values: Sequence[int]) -> list[tuple[int, float]]:
    """``(x, fraction of values >= x)`` for every distinct observed ``x``."""
    if len(values) == 0:
        return []
    data = np.sort(np.asarray(values, dtype=np.int64))
    xs = np.unique(data)
    below = np.searchsorted(data, xs, side="left")
    fractions = (len(data) - below) / len(data)
    return [(int(x), float(f)) for x, f in zip(xs, fractions)]


def _number(value: Any) -> Any:
    return format(value, ".12g") if isinstance(value, float) else value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_number(v) for v in row])
    return path


def agent_activity(store: PlatformStore) -> list[dict[str, Any]]:
    rows = {
        name: {"agent": name, **{m: 0 for m in ACTIVITY_METRICS}}
        for name in store.agent_names()
    }
    by_kind = {
        ContentKind.POST.value: "posts",
        ContentKind.COMMENT.value: "comments",
        ContentKind.NEWS.value: "news",
        ContentKind.SHARE.value: "shares",
    }
    for r in store.query(
        "SELECT author, kind, COUNT(*) AS n FROM post GROUP BY author, kind"
    ):
        rows[r["author"]][by_kind[r["kind"]]] = r["n"]
    for r in store.query(
        "SELECT p.author, COUNT(DISTINCT h.tag) AS n FROM hashtags h "
        "JOIN post p ON p.id = h.content_id GROUP BY p.author"
    ):
        rows[r["author"]]["hashtags"] = r["n"]
    for r in store.query(
        "SELECT p.author, COUNT(*) AS n FROM mentions m "
        "JOIN post p ON p.id = m.content_id GROUP BY p.author"
    ):
        rows[r["author"]]["mentions_made"] = r["n"]
    for r in store.query("SELECT agent, COUNT(*) AS n FROM mentions GROUP BY agent"):
        rows[r["agent"]]["mentions_received"] = r["n"]
    return [rows[name] for name in sorted(rows)]


def reaction_series(store: PlatformStore) -> list[tuple[int, int, int]]:
    counts = {
        (r["round"], r["value"]): r["n"]
        for r in store.query(
            "SELECT round, value, COUNT(*) AS n FROM reactions GROUP BY round, value"
        )
    }
    rounds = store.query("SELECT round FROM rounds ORDER BY round")
    series = []
    for r in rounds:
        rnd = r["round"]
        series.append(
            (rnd, counts.get((rnd, "LIKE"), 0), counts.get((rnd, "DISLIKE"), 0))
        )
    return series


def thread_lengths(store: PlatformStore) -> list[tuple[int, int]]:
    rows = store.query(
        """
        SELECT r.id AS root, COUNT(c.id) AS comments
        FROM post r
        LEFT JOIN post c ON c.thread_root = r.id AND c.kind = ?
        WHERE r.thread_root = r.id
        GROUP BY r.id
        ORDER BY r.id
        """,
        (ContentKind.COMMENT.value,),
    )
    return [(r["root"], r["comments"]) for r in rows]


def impression_counts(store: PlatformStore) -> list[tuple[int, int]]:
    rows = store.query(
        """
        SELECT p.id AS content, COUNT(i.call_id) AS impressions
        FROM post p LEFT JOIN impressions i ON i.content_id = p.id
        GROUP BY p.id ORDER BY p.id
        """
    )
    return [(r["content"], r["impressions"]) for r in rows]


def frequency(store: PlatformStore, table: str, column: str) -> list[tuple[str, int]]:
    rows = store.query(
        f"SELECT {column} AS label, COUNT(*) AS n FROM {table} "
        f"GROUP BY {column} ORDER BY n DESC, {column} ASC"
    )
    return [(r["label"], r["n"]) for r in rows]


def export_analysis(store: PlatformStore, out_dir: str | Path) -> list[Path]:
    """Write the analysis datasets of ``store`` into ``out_dir``.

    Output depends only on the store content, so identical runs export
    byte-identical files.
    """
    if not store.agent_names():
        raise EmptyStore("the store holds no agents")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    activity = agent_activity(store)
    threads = thread_lengths(store)
    impressions = impression_counts(store)
    files = [
        write_csv(
            out / "agent_activity.csv",
            ("agent", *ACTIVITY_METRICS),
            ([row["agent"], *(row[m] for m in ACTIVITY_METRICS)] for row in activity),
        ),
        write_csv(
            out / "activity_ccdf.csv",
            ("metric", "x", "ccdf"),
            (
                (metric, x, f)
                for metric in ACTIVITY_METRICS
                for x, f in ccdf([row[metric] for row in activity])
            ),
        ),
        write_csv(
            out / "reactions_timeseries.csv",
            ("round", "likes", "dislikes"),
            reaction_series(store),
        ),
        write_csv(
            out / "hashtags.csv",
            ("hashtag", "count"),
            frequency(store, "hashtags", "tag"),
        ),
        write_csv(
            out / "emotions.csv",
            ("emotion", "count"),
            frequency(store, "emotions", "emotion"),
        ),
        write_csv(out / "thread_lengths.csv", ("root", "comments"), threads),
        write_csv(
            out / "thread_length_ccdf.csv",
            ("comments", "ccdf"),
            ccdf([n for _, n in threads]),
        ),
        write_csv(out / "impressions.csv", ("content", "impressions"), impressions),
        write_csv(
            out / "impressions_ccdf.csv",
            ("impressions", "ccdf"),
            ccdf([n for _, n in impressions]),
        ),
    ]
    manifests = out / "manifests.json"
    manifests.write_text(
        json.dumps(store.manifests(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    files.append(manifests)
    logger.info("Exported %d files to %s", len(files), out)
    return files
