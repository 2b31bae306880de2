"""In-memory follow-graph growth, for comparing follow recommenders.

No platform server is involved: agents decide FOLLOW/NONE through the mock
model, take a shortlist from ``shortlist_follow`` and follow the biased
pick, round after round.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np

from .errors import EmptyPool, UnknownRecommender
from .llm import ChatRequest, MockLLM, parse_choice
from .prompts import select_action_prompt
from .recsys import (
    FOLLOW_RECOMMENDERS,
    FollowRecommender,
    pick_suggestion,
    shortlist_follow,
)
from .seeding import derive_seed, rng

logger = logging.getLogger(__name__)

_MENU = ["FOLLOW", "NONE"]
_SYSTEM = "You are a social media user deciding whether to follow someone."


def gini(values: Sequence[float]) -> float:
    """Gini coefficient of non-negative values; 0 for an empty or all-zero input."""
    data = np.sort(np.asarray(values, dtype=np.float64))
    n = len(data)
    if n == 0 or data.sum() == 0:
        return 0.0
    ranks = np.arange(1, n + 1)
    return float((2.0 * np.sum(ranks * data)) / (n * data.sum()) - (n + 1.0) / n)


@dataclass(frozen=True)
class GrowthResult:
    variant: str
    seed: int
    follows: int
    in_degrees: dict[str, int]

    @property
    def gini(self) -> float:
        return gini(list(self.in_degrees.values()))


def grow_follow_graph(
    variant: str,
    seed: int,
    n_agents: int = 500,
    rounds: int = 200,
    k: int = 10,
    activity: float = 0.05,
) -> GrowthResult:
    """Grow a follow graph from ``n_agents`` isolated agents.

    Each round ``int(n_agents * activity)`` seeded agents are asked for
    FOLLOW or NONE; a FOLLOW adds one edge towards the biased pick of the
    shortlist scored on the undirected projection.
    """
    if variant not in FOLLOW_RECOMMENDERS:
        raise UnknownRecommender(f"unknown follow recommender: {variant!r}")
    names = [f"agent_{i:04d}" for i in range(n_agents)]
    follows = nx.DiGraph()
    follows.add_nodes_from(names)
    view = nx.Graph()
    view.add_nodes_from(names)
    mock = MockLLM(seed)
    prompt = select_action_prompt(_MENU)
    edges = 0

    for round in range(rounds):
        draw = rng(seed, "growth", variant, round)
        for name in draw.sample(names, int(n_agents * activity)):
            request = ChatRequest(
                system=_SYSTEM,
                user=prompt,
                seed=derive_seed(seed, name, round),
                round=round,
            )
            if parse_choice(mock.complete(request).text, _MENU) != "FOLLOW":
                continue
            recommender = FollowRecommender(
                variant=variant, k=k, seed=derive_seed(seed, name, round, "follow")
            )
            try:
                shortlist = shortlist_follow(
                    view, name, recommender, set(follows.successors(name))
                )
            except EmptyPool:
                continue
            target = pick_suggestion(shortlist, draw)
            follows.add_edge(name, target)
            view.add_edge(name, target)
            edges += 1

    result = GrowthResult(
        variant=variant,
        seed=seed,
        follows=edges,
        in_degrees={name: follows.in_degree(name) for name in names},
    )
    logger.info(
        "%s seed %d: %d follows, gini %.3f", variant, seed, edges, result.gini
    )
    return result
