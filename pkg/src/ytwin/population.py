"""Synthetic agent population sampled from a recipe."""

from __future__ import annotations

import random
from typing import Any, Iterable, Optional

from .config import Recipe
from .models import AgentProfile, BigFive
from .seeding import derive_seed, rng

FIRST_NAMES = (
    "ada", "alba", "amir", "anna", "bruno", "carla", "chen", "dario", "elena",
    "emil", "fatima", "felix", "giulia", "hana", "ivan", "jonas", "kai", "lara",
    "leo", "lucia", "marco", "maya", "nadia", "nico", "olga", "omar", "paula",
    "pietro", "rosa", "sami", "sara", "teo", "uma", "vera", "yuki", "zoe",
)  # fmt: skip
LAST_NAMES = (
    "bianchi", "costa", "dubois", "esposito", "fischer", "garcia", "haas",
    "ito", "jensen", "kowalski", "lombardi", "moreau", "novak", "oliveira",
    "petrov", "quinn", "rossi", "silva", "tanaka", "urban", "vidal", "weber",
    "xu", "yilmaz", "zanetti",
)  # fmt: skip


def synthetic_name(draw: random.Random, taken: Optional[set[str]] = None) -> str:
    """``first_last_<4 hex>``, redrawn until it is not in ``taken``."""
    taken = taken if taken is not None else set()
    while True:
        name = (
            f"{draw.choice(FIRST_NAMES)}_{draw.choice(LAST_NAMES)}_"
            f"{draw.getrandbits(16):04x}"
        )
        if name not in taken:
            return name


def _recommender(
    options: Iterable[dict[str, Any]], draw: random.Random, seed: int
) -> dict[str, Any]:
    params = dict(draw.choice(list(options)))
    params.setdefault("seed", seed)
    return params


def sample_profile(
    recipe: Recipe,
    name: str,
    draw: random.Random,
    joined_round: int = 0,
    owner: str = "",
) -> AgentProfile:
    agents = recipe.agents
    n_max = min(agents.n_interests.max, len(agents.interests))
    n_interests = draw.randint(min(agents.n_interests.min, n_max), n_max)

    content = _recommender(
        agents.content_recommender, draw, derive_seed(recipe.seed, name, "content")
    )
    if str(content.get("name", "")).startswith("ReverseChronoFollowers"):
        content.setdefault(
            "non_follower_fraction", round(1.0 - agents.reading_from_follower_ratio, 6)
        )
    follow = _recommender(
        agents.follow_recommender, draw, derive_seed(recipe.seed, name, "follow")
    )

    return AgentProfile(
        name=name,
        owner=owner,
        llm_model=draw.choice(agents.llm_agents),
        age=draw.randint(agents.age.min, agents.age.max),
        languages=(draw.choice(agents.languages),),
        education_level=draw.choice(agents.education_levels),
        political_leaning=draw.choice(agents.political_leanings),
        nationality=draw.choice(agents.nationalities),
        interests=tuple(draw.sample(list(agents.interests), n_interests)),
        big_five=BigFive(*(draw.random() < 0.5 for _ in range(5))),
        content_recommender=content,
        follow_recommender=follow,
        round_actions=agents.round_actions,
        joined_round=joined_round,
        news_category=(
            draw.choice(agents.news_categories) if agents.news_categories else None
        ),
        news_leaning=(
            draw.choice(agents.news_leanings) if agents.news_leanings else None
        ),
    )


def generate_population(
    recipe: Recipe,
    n: int,
    joined_round: int = 0,
    owner: str = "",
    taken: Optional[set[str]] = None,
) -> list[AgentProfile]:
    """``n`` seeded profiles with unique names.

    The stream is keyed on the recipe seed, ``owner`` and ``joined_round``, so
    two clients or two growth days never draw the same sequence. Names in
    ``taken`` are avoided and the new ones are added to it.
    """
    taken = taken if taken is not None else set()
    draw = rng(recipe.seed, "population", owner, joined_round)
    profiles = []
    for _ in range(n):
        name = synthetic_name(draw, taken)
        taken.add(name)
        profiles.append(sample_profile(recipe, name, draw, joined_round, owner))
    return profiles
