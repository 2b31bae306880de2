"""RSS/Atom ingestion and the annotated feed catalog.

Feeds are read from local fixture files when a fixture directory is given,
otherwise fetched over HTTP. Parsing and deduplication happen server-side in
``ingest_feed``; clients only ship the raw document.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import feedparser
import httpx

from .errors import InvalidRecipe, UnparseableFeed, YTwinError
from .models import Article, Website

if TYPE_CHECKING:
    from .db import PlatformStore

logger = logging.getLogger(__name__)

DEFAULT_CATALOG = "feeds.jsonl"


@dataclass(frozen=True)
class FeedItem:
    title: str
    summary: str
    link: str


@dataclass
class IngestResult:
    website: Website
    new_ids: list[int] = field(default_factory=list)
    duplicates: int = 0
    skipped: int = 0


def slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def default_catalog_path() -> Path:
    return Path(str(resources.files("ytwin").joinpath("data", DEFAULT_CATALOG)))


def load_catalog(path: Optional[str | Path] = None) -> list[Website]:
    """One JSON record per line: ``{name, rss_url, leaning, category}``."""
    path = Path(path) if path else default_catalog_path()
    if not path.exists():
        raise InvalidRecipe(f"feed catalog not found: {path}")
    websites = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            record = json.loads(line)
            websites.append(
                Website(
                    id=0,
                    name=str(record["name"]),
                    rss_url=str(record["rss_url"]),
                    leaning=str(record.get("leaning") or "UNKNOWN"),
                    category=str(record.get("category") or "politics"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise InvalidRecipe(f"{path}:{lineno}: bad catalog record: {e}") from e
    return websites


def fixture_path(from_dir: str | Path, website: Website) -> Path:
    return Path(from_dir) / f"{slug(website.name)}.xml"


def fetch_feed(
    url: str, http: Optional[httpx.Client] = None, timeout: float = 20.0
) -> str:
    if http is not None:
        response = http.get(url, timeout=timeout, follow_redirects=True)
        response.raise_for_status()
        return response.text
    with httpx.Client(timeout=timeout, follow_redirects=True) as client:
        response = client.get(url)
        response.raise_for_status()
        return response.text


def read_feed(
    website: Website,
    from_dir: Optional[str | Path] = None,
    http: Optional[httpx.Client] = None,
) -> str:
    if from_dir is not None:
        return fixture_path(from_dir, website).read_text(encoding="utf-8")
    return fetch_feed(website.rss_url, http)


def parse_feed(document: str) -> tuple[list[FeedItem], int]:
    """Items with a link, plus the number of items skipped for lacking one."""
    parsed = feedparser.parse(document.encode("utf-8"))
    if not parsed.get("version"):
        reason = parsed.get("bozo_exception") or "not an RSS or Atom document"
        raise UnparseableFeed(str(reason))

    items: list[FeedItem] = []
    skipped = 0
    seen: set[str] = set()
    for entry in parsed.entries or []:
        link = str(entry.get("link") or "").strip()
        if not link:
            skipped += 1
            continue
        if link in seen:
            continue
        seen.add(link)
        title = str(entry.get("title") or link).strip()
        summary = str(entry.get("summary") or entry.get("description") or "").strip()
        items.append(FeedItem(title=title, summary=summary, link=link))
    return items, skipped


def ingest_feed(store: PlatformStore, website: Website, document: str) -> IngestResult:
    """Parse ``document`` and store the articles not yet known for ``website``."""
    items, skipped = parse_feed(document)
    stored = store.upsert_website(
        website.name, website.rss_url, website.leaning, website.category
    )
    result = IngestResult(website=stored, skipped=skipped)
    for item in items:
        article_id = store.add_article(stored.id, item.title, item.summary, item.link)
        if article_id is None:
            result.duplicates += 1
        else:
            result.new_ids.append(article_id)
    if skipped:
        logger.debug("Skipped %d items without a link in %s", skipped, website.name)
    return result


def _matches(
    website: Website, category: Optional[str], leaning: Optional[str]
) -> bool:
    if category and website.category.lower() != category.lower():
        return False
    if leaning and website.leaning.lower() != leaning.lower():
        return False
    return True


def pick_article(
    pool: Sequence[tuple[Article, Website]],
    day_start: int,
    category: Optional[str] = None,
    leaning: Optional[str] = None,
    seed: int = 0,
) -> Optional[Article]:
    """Seeded pick honoring preferences, relaxing to wider pools when empty.

    Tiers: today's articles matching the preferences, today's articles, any
    article matching the preferences, any article.
    """
    if not pool:
        return None
    ordered = sorted(pool, key=lambda pair: pair[0].id)
    today = [p for p in ordered if p[0].fetched_round >= day_start]
    tiers = (
        [p for p in today if _matches(p[1], category, leaning)],
        today,
        [p for p in ordered if _matches(p[1], category, leaning)],
        ordered,
    )
    for tier in tiers:
        if tier:
            return random.Random(seed).choice(tier)[0]
    return None


def ingest_catalog(
    websites: Sequence[Website],
    ingest: Callable[[Website, str], IngestResult],
    from_dir: Optional[str | Path] = None,
    http: Optional[httpx.Client] = None,
) -> list[IngestResult]:
    """Read every feed of the catalog and hand it to ``ingest``.

    Feeds that cannot be read or parsed are logged and skipped.
    """
    results = []
    for website in websites:
        try:
            document = read_feed(website, from_dir, http)
        except (OSError, httpx.HTTPError) as e:
            logger.warning("Cannot read feed %s: %s", website.name, e)
            continue
        try:
            results.append(ingest(website, document))
        except YTwinError as e:
            logger.warning("Cannot ingest feed %s: %s", website.name, e)
    new = sum(len(r.new_ids) for r in results)
    logger.info("Ingested %d new articles from %d feeds", new, len(results))
    return results
