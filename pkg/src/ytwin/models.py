"""Domain types shared by the platform server, the simulation client and exports."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, NamedTuple, Optional

from .errors import InvalidEmotion, InvalidProfile, KindFieldMismatch

_MENTION_RE = re.compile(r"(?<!\w)@(\w+)")
_HASHTAG_RE = re.compile(r"(?<!\w)#(\w+)")

TRAITS = ("oe", "co", "ex", "ag", "ne")

# GoEmotions labels, neutral excluded.
GOEMOTIONS = (
    "admiration",
    "amusement",
    "anger",
    "annoyance",
    "approval",
    "caring",
    "confusion",
    "curiosity",
    "desire",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "excitement",
    "fear",
    "gratitude",
    "grief",
    "joy",
    "love",
    "nervousness",
    "optimism",
    "pride",
    "realization",
    "relief",
    "remorse",
    "sadness",
    "surprise",
)


class ContentKind(str, Enum):
    POST = "POST"
    COMMENT = "COMMENT"
    NEWS = "NEWS"
    SHARE = "SHARE"


ROOT_KINDS = frozenset({ContentKind.POST, ContentKind.NEWS, ContentKind.SHARE})


class ReactionValue(str, Enum):
    LIKE = "LIKE"
    DISLIKE = "DISLIKE"


class FollowAction(str, Enum):
    FOLLOW = "FOLLOW"
    UNFOLLOW = "UNFOLLOW"


class TimelineMode(str, Enum):
    READ = "READ"
    COMMENT = "COMMENT"
    REPLY = "REPLY"
    SEARCH = "SEARCH"


class ActionKind(str, Enum):
    NEWS = "NEWS"
    POST = "POST"
    COMMENT = "COMMENT"
    REPLY = "REPLY"
    SHARE = "SHARE"
    READ = "READ"
    SEARCH = "SEARCH"
    FOLLOW = "FOLLOW"
    NONE = "NONE"


HOURLY_MENU = (
    ActionKind.NEWS,
    ActionKind.POST,
    ActionKind.COMMENT,
    ActionKind.REPLY,
    ActionKind.SHARE,
    ActionKind.READ,
    ActionKind.SEARCH,
    ActionKind.NONE,
)
DAILY_MENU = (ActionKind.FOLLOW, ActionKind.NONE)


@dataclass(frozen=True)
class IntRange:
    min: int
    max: int

    def __contains__(self, value: object) -> bool:
        return isinstance(value, int) and self.min <= value <= self.max


@dataclass(frozen=True)
class BigFive:
    """Five dichotomous traits; True is the high pole."""

    oe: bool
    co: bool
    ex: bool
    ag: bool
    ne: bool

    def as_tuple(self) -> tuple[bool, bool, bool, bool, bool]:
        return (self.oe, self.co, self.ex, self.ag, self.ne)


@dataclass(frozen=True)
class AgentProfile:
    """One simulated user."""

    name: str
    owner: str
    llm_model: str
    age: int
    languages: tuple[str, ...]
    education_level: str
    political_leaning: str
    nationality: str
    interests: tuple[str, ...]
    big_five: BigFive
    content_recommender: dict[str, Any]
    follow_recommender: dict[str, Any]
    round_actions: IntRange
    joined_round: int = 0
    news_category: Optional[str] = None
    news_leaning: Optional[str] = None

    @property
    def language(self) -> str:
        return self.languages[0] if self.languages else "english"


@dataclass(frozen=True)
class ProfileBounds:
    """Recipe ranges a registered profile must respect."""

    age: IntRange = IntRange(0, 200)
    n_interests: IntRange = IntRange(1, 1000)


@dataclass(frozen=True)
class Content:
    id: int
    author: str
    kind: ContentKind
    text: str
    thread_root: int
    round: int
    parent: Optional[int] = None
    article: Optional[int] = None
    shared_from: Optional[int] = None
    shared_via: Optional[int] = None
    mentions: tuple[str, ...] = ()
    hashtags: tuple[str, ...] = ()
    emotions: tuple[str, ...] = ()


@dataclass(frozen=True)
class Reaction:
    agent: str
    content: int
    value: ReactionValue
    round: int


@dataclass(frozen=True)
class FollowEdge:
    follower: str
    followee: str
    action: FollowAction
    round: int


@dataclass(frozen=True)
class RoundClock:
    day: int
    slot: int
    round: int

    @classmethod
    def from_round(cls, round: int, slots: int) -> RoundClock:
        return cls(day=round // slots, slot=round % slots, round=round)

    def advanced(self, slots: int) -> RoundClock:
        return RoundClock.from_round(self.round + 1, slots)


@dataclass(frozen=True)
class EmotionTaxonomy:
    labels: tuple[str, ...] = GOEMOTIONS

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def unknown(self, labels: Iterable[str]) -> list[str]:
        return [label for label in labels if label not in self.labels]


@dataclass(frozen=True)
class Website:
    id: int
    name: str
    rss_url: str
    leaning: str = "UNKNOWN"
    category: str = "politics"


@dataclass(frozen=True)
class Article:
    id: int
    website: int
    title: str
    summary: str
    link: str
    fetched_round: int


class Annotations(NamedTuple):
    mentions: list[str]
    hashtags: list[str]


def _dedup(items: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def extract_annotations(text: str, known_agents: Iterable[str]) -> Annotations:
    """Mentions of registered agents and lowercased hashtags, in text order."""
    known = set(known_agents)
    mentions = _dedup(m for m in _MENTION_RE.findall(text or "") if m in known)
    hashtags = _dedup(h.lower() for h in _HASHTAG_RE.findall(text or ""))
    return Annotations(mentions=mentions, hashtags=hashtags)


def mention_tokens(text: str) -> list[str]:
    return _dedup(_MENTION_RE.findall(text or ""))


def validate_profile(profile: AgentProfile, bounds: ProfileBounds) -> None:
    if not profile.name or not profile.name.strip():
        raise InvalidProfile("name must be a non-empty string")
    if profile.age not in bounds.age:
        raise InvalidProfile(
            f"age {profile.age} outside [{bounds.age.min}, {bounds.age.max}]"
        )
    n = len(profile.interests)
    if n == 0 or n not in bounds.n_interests:
        raise InvalidProfile(
            f"{n} interests outside "
            f"[{max(bounds.n_interests.min, 1)}, {bounds.n_interests.max}]"
        )
    if profile.round_actions.min > profile.round_actions.max:
        raise InvalidProfile("round_actions.min exceeds round_actions.max")
    if len(profile.big_five.as_tuple()) != len(TRAITS):
        raise InvalidProfile("big_five must hold exactly five flags")


def check_content_fields(
    kind: ContentKind,
    parent: Optional[int],
    article: Optional[int],
    shared_from: Optional[int],
) -> None:
    """Kind-specific field rules of Content."""
    if kind is ContentKind.COMMENT:
        if parent is None:
            raise KindFieldMismatch("COMMENT requires a parent")
        if article is not None or shared_from is not None:
            raise KindFieldMismatch("COMMENT cannot carry article or shared_from")
        return
    if parent is not None:
        raise KindFieldMismatch(f"{kind.value} cannot have a parent")
    if kind is ContentKind.POST and (article is not None or shared_from is not None):
        raise KindFieldMismatch("POST cannot carry article or shared_from")
    if kind is ContentKind.NEWS:
        if article is None:
            raise KindFieldMismatch("NEWS requires an article")
        if shared_from is not None:
            raise KindFieldMismatch("NEWS cannot carry shared_from")
    if kind is ContentKind.SHARE and shared_from is None:
        raise KindFieldMismatch("SHARE requires shared_from")


def check_content(
    content: Content,
    taxonomy: EmotionTaxonomy,
    known_agents: Optional[Iterable[str]] = None,
) -> None:
    """Invariants of a stored content; mentions are checked when agents are known."""
    known = set(known_agents) if known_agents is not None else None
    check_content_fields(
        content.kind, content.parent, content.article, content.shared_from
    )
    is_root = content.thread_root == content.id
    if content.kind in ROOT_KINDS and not is_root:
        raise KindFieldMismatch(f"{content.kind.value} {content.id} is not a root")
    if content.kind is ContentKind.COMMENT and is_root:
        raise KindFieldMismatch(f"COMMENT {content.id} cannot be its own root")
    if content.kind is ContentKind.SHARE and content.article is None:
        raise KindFieldMismatch(f"SHARE {content.id} carries no article")
    expected = extract_annotations(content.text, known or ())
    if set(expected.hashtags) != set(content.hashtags):
        raise KindFieldMismatch(f"hashtags of {content.id} do not match its text")
    if known is not None and set(expected.mentions) != set(content.mentions):
        raise KindFieldMismatch(f"mentions of {content.id} do not match its text")
    unknown = taxonomy.unknown(content.emotions)
    if unknown:
        raise InvalidEmotion(f"not in the emotion taxonomy: {', '.join(unknown)}")


def fold_follow_events(events: Iterable[FollowEdge]) -> dict[str, set[str]]:
    """Replay a follow log into followee sets."""
    latest: dict[tuple[str, str], FollowAction] = {}
    for event in events:
        latest[(event.follower, event.followee)] = event.action
    graph: dict[str, set[str]] = {}
    for (follower, followee), action in latest.items():
        if action is FollowAction.FOLLOW:
            graph.setdefault(follower, set()).add(followee)
    return graph
