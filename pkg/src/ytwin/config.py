"""Simulation recipe and environment settings."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .errors import InvalidRecipe, YTwinError
from .models import GOEMOTIONS, TRAITS, IntRange
from .recsys import ContentRecommender, FollowRecommender

# Circadian stand-in: quiet 02:00-06:00, peaks at 13:00 and 21:00.
DEFAULT_HOURLY_ACTIVITY = (
    0.08, 0.06, 0.04, 0.03, 0.03, 0.03, 0.04, 0.06,
    0.08, 0.10, 0.11, 0.12, 0.13, 0.14, 0.12, 0.11,
    0.10, 0.11, 0.12, 0.14, 0.16, 0.17, 0.14, 0.11,
)  # fmt: skip

# (high, low) wording of each trait in the role-play pre-prompt.
DEFAULT_BIG_FIVE = {
    "oe": ("inventive/curious", "consistent/cautious"),
    "co": ("efficient/organized", "extravagant/careless"),
    "ex": ("outgoing/energetic", "solitary/reserved"),
    "ag": ("friendly/compassionate", "critical/judgmental"),
    "ne": ("sensitive/nervous", "resilient/confident"),
}

DEFAULT_CONTENT_RECOMMENDER = {"name": "ReverseChronoFollowersPopularity", "k": 10}
DEFAULT_FOLLOW_RECOMMENDER = {"name": "PreferentialAttachment", "k": 10}


def get_api_key(recipe_value: Optional[str] = None) -> Optional[str]:
    """LLM API key; ``"NULL"`` in the recipe means unauthenticated."""
    env_key = os.environ.get("YTWIN_LLM_API_KEY")
    if env_key:
        return env_key
    if not recipe_value or recipe_value.upper() == "NULL":
        return None
    return recipe_value


def get_api_url(recipe_value: str) -> str:
    return os.environ.get("YTWIN_API_URL", recipe_value)


def get_db_path(default: str = "ytwin.db") -> str:
    return os.environ.get("YTWIN_DB", default)


def get_log_level(default: str = "INFO") -> str:
    return os.environ.get("YTWIN_LOG_LEVEL", default).upper()


def _range(data: Mapping[str, Any], key: str, default: tuple[int, int]) -> IntRange:
    raw = data.get(key) or {"min": default[0], "max": default[1]}
    return IntRange(int(raw["min"]), int(raw["max"]))


def _recommenders(value: Any, default: dict[str, Any]) -> tuple[dict[str, Any], ...]:
    if value is None:
        return (dict(default),)
    if isinstance(value, dict):
        return (dict(value),)
    return tuple(dict(v) for v in value)


def _labels(value: Any, default: tuple[str, ...]) -> tuple[str, ...]:
    if not value:
        return default
    if isinstance(value, dict):
        return tuple(value)
    return tuple(value)


@dataclass(frozen=True)
class ServersConfig:
    llm: str = "http://127.0.0.1:11434/v1"
    llm_api_key: str = "NULL"
    api: str = "http://127.0.0.1:5000/"


@dataclass(frozen=True)
class SimulationConfig:
    name: str = "experiment_name"
    client: str = "YClientBase"
    days: int = 1
    slots: int = 24
    starting_agents: int = 10
    new_agents_per_iteration: int = 0
    hourly_activity: dict[int, float] = field(default_factory=dict)
    expected_clients: int = 1
    daily_follow_scope: str = "all"

    def activity(self, slot: int) -> float:
        return self.hourly_activity[slot]


@dataclass(frozen=True)
class AgentsConfig:
    education_levels: tuple[str, ...] = ("high school", "bachelor", "master")
    languages: tuple[str, ...] = ("english",)
    max_length_thread_reading: int = 5
    reading_from_follower_ratio: float = 0.6
    political_leanings: tuple[str, ...] = ("Democrat", "Republican", "Independent")
    age: IntRange = IntRange(18, 80)
    round_actions: IntRange = IntRange(1, 3)
    nationalities: tuple[str, ...] = ("American",)
    probability_of_daily_follow: float = 0.1
    llm_agents: tuple[str, ...] = ("mock",)
    n_interests: IntRange = IntRange(4, 10)
    interests: tuple[str, ...] = ()
    big_five: dict[str, tuple[str, str]] = field(
        default_factory=lambda: dict(DEFAULT_BIG_FIVE)
    )
    content_recommender: tuple[dict[str, Any], ...] = (DEFAULT_CONTENT_RECOMMENDER,)
    follow_recommender: tuple[dict[str, Any], ...] = (DEFAULT_FOLLOW_RECOMMENDER,)
    news_categories: tuple[str, ...] = ()
    news_leanings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PostsConfig:
    visibility_rounds: int = 36
    emotions: tuple[str, ...] = GOEMOTIONS
    popularity: str = "net"


@dataclass(frozen=True)
class NewsConfig:
    catalog: Optional[str] = None
    from_dir: Optional[str] = None


@dataclass(frozen=True)
class LlmOptions:
    """Sampling extras and transport knobs for agent LLM calls."""

    temperature: Optional[float] = None
    top_p: Optional[float] = None
    max_tokens: Optional[int] = None
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5
    max_concurrency: int = 4


@dataclass(frozen=True)
class Recipe:
    servers: ServersConfig
    simulation: SimulationConfig
    agents: AgentsConfig
    posts: PostsConfig
    news: NewsConfig = NewsConfig()
    llm: LlmOptions = LlmOptions()
    seed: int = 0
    raw: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(
        cls, data: Mapping[str, Any], base_dir: Optional[Path] = None
    ) -> Recipe:
        try:
            recipe = cls._parse(data, base_dir)
        except YTwinError:
            raise
        except (TypeError, ValueError, KeyError, AttributeError) as e:
            raise InvalidRecipe(f"malformed recipe: {e}") from e
        recipe.validate()
        return recipe

    @classmethod
    def _parse(cls, data: Mapping[str, Any], base_dir: Optional[Path]) -> Recipe:
        servers = dict(data.get("servers") or {})
        sim = dict(data.get("simulation") or {})
        agents = dict(data.get("agents") or {})
        posts = dict(data.get("posts") or {})
        news = dict(data.get("news") or {})
        llm = dict(data.get("llm") or {})

        slots = int(sim.get("slots", 24))
        raw_activity = sim.get("hourly_activity")
        if raw_activity:
            hourly = {int(k): float(v) for k, v in dict(raw_activity).items()}
        else:
            hourly = {
                s: DEFAULT_HOURLY_ACTIVITY[s * len(DEFAULT_HOURLY_ACTIVITY) // slots]
                for s in range(slots)
            }

        big_five = dict(DEFAULT_BIG_FIVE)
        for trait, labels in dict(agents.get("big_five") or {}).items():
            high, low = labels
            big_five[trait] = (str(high), str(low))

        def resolve(path: Optional[str]) -> Optional[str]:
            if not path or base_dir is None or Path(path).is_absolute():
                return path
            return str(base_dir / path)

        defaults = AgentsConfig()
        return cls(
            servers=ServersConfig(
                llm=str(servers.get("llm", ServersConfig.llm)),
                llm_api_key=str(servers.get("llm_api_key", "NULL")),
                api=str(servers.get("api", ServersConfig.api)),
            ),
            simulation=SimulationConfig(
                name=str(sim.get("name", "experiment_name")),
                client=str(sim.get("client", "YClientBase")),
                days=int(sim.get("days", 1)),
                slots=slots,
                starting_agents=int(sim.get("starting_agents", 10)),
                new_agents_per_iteration=int(sim.get("new_agents_per_iteration", 0)),
                hourly_activity=hourly,
                expected_clients=int(sim.get("expected_clients", 1)),
                daily_follow_scope=str(sim.get("daily_follow_scope", "all")),
            ),
            agents=AgentsConfig(
                education_levels=tuple(
                    agents.get("education_levels", defaults.education_levels)
                ),
                languages=tuple(agents.get("languages", defaults.languages)),
                max_length_thread_reading=int(
                    agents.get("max_length_thread_reading", 5)
                ),
                reading_from_follower_ratio=float(
                    agents.get(
                        "reading_from_follower_ratio",
                        agents.get("reading_from_followee_ratio", 0.6),
                    )
                ),
                political_leanings=tuple(
                    agents.get("political_leanings", defaults.political_leanings)
                ),
                age=_range(agents, "age", (18, 80)),
                round_actions=_range(agents, "round_actions", (1, 3)),
                nationalities=tuple(
                    agents.get("nationalities", defaults.nationalities)
                ),
                probability_of_daily_follow=float(
                    agents.get("probability_of_daily_follow", 0.1)
                ),
                llm_agents=tuple(agents.get("llm_agents", defaults.llm_agents)),
                n_interests=_range(agents, "n_interests", (4, 10)),
                interests=tuple(agents.get("interests", ())),
                big_five=big_five,
                content_recommender=_recommenders(
                    agents.get("content_recommender"), DEFAULT_CONTENT_RECOMMENDER
                ),
                follow_recommender=_recommenders(
                    agents.get("follow_recommender"), DEFAULT_FOLLOW_RECOMMENDER
                ),
                news_categories=tuple(agents.get("news_categories", ())),
                news_leanings=tuple(agents.get("news_leanings", ())),
            ),
            posts=PostsConfig(
                visibility_rounds=int(posts.get("visibility_rounds", 36)),
                emotions=_labels(posts.get("emotions"), GOEMOTIONS),
                popularity=str(posts.get("popularity", "net")),
            ),
            news=NewsConfig(
                catalog=resolve(news.get("catalog")),
                from_dir=resolve(news.get("from_dir")),
            ),
            llm=LlmOptions(
                temperature=llm.get("temperature"),
                top_p=llm.get("top_p"),
                max_tokens=llm.get("max_tokens"),
                timeout=float(llm.get("timeout", 30.0)),
                max_retries=int(llm.get("max_retries", 3)),
                backoff=float(llm.get("backoff", 0.5)),
                max_concurrency=int(llm.get("max_concurrency", 4)),
            ),
            seed=int(data.get("seed", 0)),
            raw=json.loads(json.dumps(data)),
        )

    def validate(self) -> None:
        sim, agents, posts = self.simulation, self.agents, self.posts
        if sim.days < 1:
            raise InvalidRecipe("simulation.days must be >= 1")
        if sim.slots < 1:
            raise InvalidRecipe("simulation.slots must be >= 1")
        if sim.starting_agents < 1:
            raise InvalidRecipe("simulation.starting_agents must be >= 1")
        if sim.new_agents_per_iteration < 0:
            raise InvalidRecipe("simulation.new_agents_per_iteration must be >= 0")
        if sim.expected_clients < 1:
            raise InvalidRecipe("simulation.expected_clients must be >= 1")
        if sim.daily_follow_scope not in ("all", "active"):
            raise InvalidRecipe("simulation.daily_follow_scope must be all|active")
        for slot in range(sim.slots):
            if slot not in sim.hourly_activity:
                raise InvalidRecipe(f"simulation.hourly_activity misses slot {slot}")
            if not 0.0 <= sim.hourly_activity[slot] <= 1.0:
                raise InvalidRecipe(f"simulation.hourly_activity[{slot}] not in [0,1]")

        for name in ("age", "round_actions", "n_interests"):
            bounds: IntRange = getattr(agents, name)
            if bounds.min > bounds.max:
                raise InvalidRecipe(f"agents.{name}: min > max")
        if agents.round_actions.min < 0:
            raise InvalidRecipe("agents.round_actions.min must be >= 0")
        if agents.n_interests.min < 1:
            raise InvalidRecipe("agents.n_interests.min must be >= 1")
        if len(agents.interests) < agents.n_interests.min:
            raise InvalidRecipe(
                f"agents.interests has {len(agents.interests)} topics, "
                f"fewer than n_interests.min={agents.n_interests.min}"
            )
        for name in (
            "education_levels",
            "languages",
            "political_leanings",
            "nationalities",
            "llm_agents",
        ):
            if not getattr(agents, name):
                raise InvalidRecipe(f"agents.{name} must not be empty")
        for name in ("reading_from_follower_ratio", "probability_of_daily_follow"):
            if not 0.0 <= getattr(agents, name) <= 1.0:
                raise InvalidRecipe(f"agents.{name} must be in [0, 1]")
        if agents.max_length_thread_reading < 1:
            raise InvalidRecipe("agents.max_length_thread_reading must be >= 1")
        if set(agents.big_five) != set(TRAITS):
            raise InvalidRecipe(f"agents.big_five must describe exactly {TRAITS}")
        try:
            for params in agents.content_recommender:
                ContentRecommender.from_params(params)
            for params in agents.follow_recommender:
                FollowRecommender.from_params(params)
        except YTwinError as e:
            raise InvalidRecipe(f"agents recommender: {e.detail}") from e

        if posts.visibility_rounds < 0:
            raise InvalidRecipe("posts.visibility_rounds must be >= 0")
        if not posts.emotions:
            raise InvalidRecipe("posts.emotions must not be empty")
        if posts.popularity not in ("net", "engagement"):
            raise InvalidRecipe("posts.popularity must be net|engagement")

    def recipe_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def server_settings(self) -> dict[str, Any]:
        """Settings the platform server needs to enforce the recipe."""
        return {
            "simulation": self.simulation.name,
            "slots": self.simulation.slots,
            "visibility_rounds": self.posts.visibility_rounds,
            "emotions": list(self.posts.emotions),
            "age": {"min": self.agents.age.min, "max": self.agents.age.max},
            "n_interests": {
                "min": self.agents.n_interests.min,
                "max": self.agents.n_interests.max,
            },
            "popularity": self.posts.popularity,
        }


def load_recipe(path: str | Path) -> Recipe:
    path = Path(path)
    if not path.exists():
        raise InvalidRecipe(f"recipe not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidRecipe(f"recipe is not valid JSON: {e}") from e
    return Recipe.from_dict(data, base_dir=path.parent)
