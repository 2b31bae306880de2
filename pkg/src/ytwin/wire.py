"""JSON encoding/decoding of domain types for the REST protocol and exports."""

from dataclasses import fields, is_dataclass
from enum import Enum
from typing import Any, Optional

from .errors import InvalidRequest
from .models import (
    AgentProfile,
    Article,
    BigFive,
    Content,
    ContentKind,
    FollowAction,
    FollowEdge,
    IntRange,
    RoundClock,
    Website,
)


def to_wire(value: Any) -> Any:
    """Dataclasses to dicts, enums to their value, tuples to lists."""
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_wire(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [to_wire(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_wire(v) for k, v in value.items()}
    return value


def _require(data: dict, key: str) -> Any:
    if key not in data:
        raise InvalidRequest(f"missing field: {key}")
    return data[key]


def _optional_int(value: Any) -> Optional[int]:
    return None if value is None else int(value)


def decode_profile(data: dict[str, Any]) -> AgentProfile:
    try:
        big_five = data.get("big_five") or {}
        round_actions = data.get("round_actions") or {"min": 1, "max": 1}
        return AgentProfile(
            name=str(_require(data, "name")),
            owner=str(data.get("owner", "")),
            llm_model=str(data.get("llm_model", "mock")),
            age=int(_require(data, "age")),
            languages=tuple(data.get("languages") or ()),
            education_level=str(data.get("education_level", "")),
            political_leaning=str(data.get("political_leaning", "")),
            nationality=str(data.get("nationality", "")),
            interests=tuple(data.get("interests") or ()),
            big_five=BigFive(
                oe=bool(big_five.get("oe", False)),
                co=bool(big_five.get("co", False)),
                ex=bool(big_five.get("ex", False)),
                ag=bool(big_five.get("ag", False)),
                ne=bool(big_five.get("ne", False)),
            ),
            content_recommender=dict(data.get("content_recommender") or {}),
            follow_recommender=dict(data.get("follow_recommender") or {}),
            round_actions=IntRange(
                int(round_actions["min"]), int(round_actions["max"])
            ),
            joined_round=int(data.get("joined_round", 0)),
            news_category=data.get("news_category"),
            news_leaning=data.get("news_leaning"),
        )
    except (TypeError, ValueError, KeyError) as e:
        raise InvalidRequest(f"malformed profile: {e}") from e


def decode_content(data: dict[str, Any]) -> Content:
    return Content(
        id=int(data["id"]),
        author=str(data["author"]),
        kind=ContentKind(data["kind"]),
        text=str(data.get("text", "")),
        thread_root=int(data["thread_root"]),
        round=int(data["round"]),
        parent=_optional_int(data.get("parent")),
        article=_optional_int(data.get("article")),
        shared_from=_optional_int(data.get("shared_from")),
        shared_via=_optional_int(data.get("shared_via")),
        mentions=tuple(data.get("mentions") or ()),
        hashtags=tuple(data.get("hashtags") or ()),
        emotions=tuple(data.get("emotions") or ()),
    )


def decode_clock(data: dict[str, Any]) -> RoundClock:
    return RoundClock(
        day=int(data["day"]), slot=int(data["slot"]), round=int(data["round"])
    )


def decode_website(data: dict[str, Any]) -> Website:
    return Website(
        id=int(data.get("id", 0)),
        name=str(data["name"]),
        rss_url=str(data["rss_url"]),
        leaning=str(data.get("leaning") or "UNKNOWN"),
        category=str(data.get("category") or "politics"),
    )


def decode_article(data: dict[str, Any]) -> Article:
    return Article(
        id=int(data["id"]),
        website=int(data["website"]),
        title=str(data.get("title", "")),
        summary=str(data.get("summary", "")),
        link=str(data["link"]),
        fetched_round=int(data["fetched_round"]),
    )


def decode_follow_edge(data: dict[str, Any]) -> FollowEdge:
    return FollowEdge(
        follower=str(data["follower"]),
        followee=str(data["followee"]),
        action=FollowAction(data["action"]),
        round=int(data["round"]),
    )
