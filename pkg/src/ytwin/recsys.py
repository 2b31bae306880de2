"""Content and follow recommender systems.

Content rankers order visibility-filtered candidates for an agent's
timeline; follow scorers are classic unsupervised link-prediction indices
computed on the undirected projection of the follow graph.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import AbstractSet, Any, Iterable, Mapping, Optional, Sequence

import networkx as nx

from .errors import EmptyPool, InvalidRequest, UnknownRecommender
from .models import Content

CONTENT_RECOMMENDERS = (
    "Random",
    "ReverseChrono",
    "ReverseChronoPopularity",
    "ReverseChronoFollowers",
    "ReverseChronoFollowersPopularity",
)
FOLLOW_RECOMMENDERS = (
    "Random",
    "CommonNeighbours",
    "Jaccard",
    "AdamicAdar",
    "PreferentialAttachment",
)


def _variant_of(params: Mapping[str, Any]) -> str:
    return str(params.get("name") or params.get("variant") or "")


def _k_of(params: Mapping[str, Any], default: int) -> int:
    k = int(params.get("k", default))
    if k < 1:
        raise InvalidRequest(f"k must be >= 1, got {k}")
    return k


def _fraction(value: Any, name: str) -> float:
    f = float(value)
    if not 0.0 <= f <= 1.0:
        raise InvalidRequest(f"{name} must be in [0, 1], got {f}")
    return f


@dataclass(frozen=True)
class ContentRecommender:
    variant: str = "ReverseChrono"
    k: int = 10
    non_follower_fraction: float = 0.0
    seed: int = 0

    @classmethod
    def from_params(cls, params: Mapping[str, Any]) -> ContentRecommender:
        variant = _variant_of(params)
        if variant not in CONTENT_RECOMMENDERS:
            raise UnknownRecommender(f"unknown content recommender: {variant!r}")
        return cls(
            variant=variant,
            k=_k_of(params, 10),
            non_follower_fraction=_fraction(
                params.get("non_follower_fraction", 0.0), "non_follower_fraction"
            ),
            seed=int(params.get("seed", 0)),
        )

    @property
    def uses_followers(self) -> bool:
        return self.variant.startswith("ReverseChronoFollowers")

    @property
    def uses_popularity(self) -> bool:
        return self.variant.endswith("Popularity")


@dataclass(frozen=True)
class FollowRecommender:
    variant: str = "Random"
    k: int = 10
    leaning_bias: float = 0.0
    seed: int = 0

    @classmethod
    def from_params(cls, params: Mapping[str, Any]) -> FollowRecommender:
        variant = _variant_of(params)
        if variant not in FOLLOW_RECOMMENDERS:
            raise UnknownRecommender(f"unknown follow recommender: {variant!r}")
        return cls(
            variant=variant,
            k=_k_of(params, 10),
            leaning_bias=_fraction(params.get("leaning_bias", 0.0), "leaning_bias"),
            seed=int(params.get("seed", 0)),
        )


@dataclass(frozen=True)
class Suggestion:
    name: str
    score: float
    probability: float


def _sort_key(
    recommender: ContentRecommender, popularity: Mapping[int, int]
) -> Any:
    if recommender.uses_popularity:
        return lambda c: (popularity.get(c.id, 0), c.round, c.id)
    return lambda c: (c.round, c.id)


def rank_content(
    candidates: Sequence[Content],
    followees: AbstractSet[str],
    agent: str,
    recommender: ContentRecommender,
    popularity: Optional[Mapping[int, int]] = None,
) -> list[int]:
    """Pick up to k content ids for ``agent`` out of ``candidates``."""
    popularity = popularity or {}
    pool = [c for c in candidates if c.author != agent]
    k = recommender.k

    if recommender.variant == "Random":
        pool.sort(key=lambda c: c.id)
        rng = random.Random(recommender.seed)
        return [c.id for c in rng.sample(pool, min(k, len(pool)))]

    key = _sort_key(recommender, popularity)
    if not recommender.uses_followers:
        return [c.id for c in sorted(pool, key=key, reverse=True)[:k]]

    followed = sorted(
        (c for c in pool if c.author in followees), key=key, reverse=True
    )
    others = sorted(
        (c for c in pool if c.author not in followees), key=key, reverse=True
    )

    n_others = math.floor(k * recommender.non_follower_fraction + 1e-9)
    n_followed = k - n_others
    # a short pool hands its unused slots to the other one
    if len(followed) < n_followed:
        n_others += n_followed - len(followed)
        n_followed = len(followed)
    elif len(others) < n_others:
        n_followed += n_others - len(others)
        n_others = len(others)

    picked = followed[:n_followed] + others[:n_others]
    return [c.id for c in sorted(picked, key=key, reverse=True)]


def build_graph_view(
    agents: Iterable[str], followees: Mapping[str, Iterable[str]]
) -> nx.Graph:
    """Undirected projection of the follow graph: Γ(a) = followers ∪ followees."""
    graph = nx.Graph()
    graph.add_nodes_from(agents)
    for follower, targets in followees.items():
        for followee in targets:
            if follower != followee:
                graph.add_edge(follower, followee)
    return graph


def score_follow(graph: nx.Graph, a: str, b: str, variant: str) -> float:
    if variant not in FOLLOW_RECOMMENDERS:
        raise UnknownRecommender(f"unknown follow recommender: {variant!r}")
    if variant == "Random" or a not in graph or b not in graph:
        return 0.0
    if variant == "PreferentialAttachment":
        return float(graph.degree(a) * graph.degree(b))
    if variant == "Jaccard":
        (_, _, value), = nx.jaccard_coefficient(graph, [(a, b)])
        return float(value)

    shared = list(nx.common_neighbors(graph, a, b))
    if variant == "CommonNeighbours":
        return float(len(shared))
    # AdamicAdar; 1/ln(1) is singular
    return sum(
        1.0 / math.log(graph.degree(z)) for z in shared if graph.degree(z) > 1
    )


def _normalize(weights: list[float]) -> list[float]:
    total = sum(weights)
    if total <= 0:
        return [1.0 / len(weights)] * len(weights)
    return [w / total for w in weights]


def shortlist_follow(
    graph: nx.Graph,
    agent: str,
    recommender: FollowRecommender,
    followees: AbstractSet[str] = frozenset(),
    leanings: Optional[Mapping[str, str]] = None,
) -> list[Suggestion]:
    """Top-k candidates with selection probabilities."""
    pool = sorted(n for n in graph.nodes if n != agent and n not in followees)
    if not pool:
        raise EmptyPool(f"no follow candidates for {agent}")

    if recommender.variant == "Random":
        rng = random.Random(recommender.seed)
        names = rng.sample(pool, min(recommender.k, len(pool)))
        scored = [(name, 0.0) for name in names]
    else:
        scores = [
            (name, score_follow(graph, agent, name, recommender.variant))
            for name in pool
        ]
        scores.sort(key=lambda item: (-item[1], item[0]))
        scored = scores[: recommender.k]

    probabilities = _normalize([score for _, score in scored])
    if recommender.leaning_bias > 0 and leanings:
        own = leanings.get(agent)
        probabilities = _normalize(
            [
                p * (1.0 + recommender.leaning_bias)
                if own is not None and leanings.get(name) == own
                else p
                for (name, _), p in zip(scored, probabilities)
            ]
        )
    return [
        Suggestion(name=name, score=score, probability=p)
        for (name, score), p in zip(scored, probabilities)
    ]


def pick_suggestion(suggestions: Sequence[Suggestion], rng: random.Random) -> str:
    """Biased random selection over a shortlist."""
    if not suggestions:
        raise EmptyPool("empty shortlist")
    names = [s.name for s in suggestions]
    weights = [s.probability for s in suggestions]
    return rng.choices(names, weights=weights, k=1)[0]
