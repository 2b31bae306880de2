import copy
from pathlib import Path
from typing import Any, Callable, Iterator

import pytest
from starlette.testclient import TestClient

from ytwin.client import PlatformClient
from ytwin.config import Recipe
from ytwin.db import PlatformStore
from ytwin.llm import LlmGateway, MockLLM
from ytwin.models import AgentProfile, BigFive, IntRange
from ytwin.server import create_server
from ytwin.simulation import RunManifest, Simulation

FIXTURES = Path(__file__).parent / "fixtures"
FEEDS = FIXTURES / "feeds"

BASE_RECIPE: dict[str, Any] = {
    "servers": {"llm": "http://127.0.0.1:11434/v1", "api": "http://testserver/"},
    "simulation": {
        "name": "test_sim",
        "days": 1,
        "slots": 4,
        "starting_agents": 6,
        "new_agents_per_iteration": 0,
        "hourly_activity": {"0": 0.5, "1": 0.5, "2": 0.5, "3": 0.5},
    },
    "agents": {
        "interests": ["climate", "sports", "music", "economy", "health", "tech"],
        "n_interests": {"min": 1, "max": 3},
        "round_actions": {"min": 1, "max": 2},
        "llm_agents": ["mock"],
        "probability_of_daily_follow": 0.5,
        "content_recommender": [{"name": "ReverseChronoFollowersPopularity", "k": 5}],
        "follow_recommender": [{"name": "PreferentialAttachment", "k": 5}],
    },
    "posts": {"visibility_rounds": 36},
    "news": {"catalog": str(FEEDS / "catalog.jsonl"), "from_dir": str(FEEDS)},
    "seed": 7,
}


def recipe_dict(**sections: dict[str, Any]) -> dict[str, Any]:
    """The base test recipe with ``sections`` merged over its top-level blocks."""
    data = copy.deepcopy(BASE_RECIPE)
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    return data


def make_profile(name: str, **overrides: Any) -> AgentProfile:
    fields: dict[str, Any] = dict(
        name=name,
        owner="client-0",
        llm_model="mock",
        age=30,
        languages=("english",),
        education_level="bachelor",
        political_leaning="Independent",
        nationality="American",
        interests=("climate", "sports"),
        big_five=BigFive(True, True, True, True, True),
        content_recommender={"name": "ReverseChrono", "k": 10},
        follow_recommender={"name": "Random", "k": 5},
        round_actions=IntRange(1, 1),
    )
    fields.update(overrides)
    return AgentProfile(**fields)


def simulate(
    recipe: Recipe, store: PlatformStore, client_id: str = "client-0", **options: Any
) -> RunManifest:
    """Play ``recipe`` to its last round on ``store`` under the mock model."""
    app = create_server(store).http_app()
    with PlatformClient(
        "http://testserver", client_id, http=TestClient(app)
    ) as platform, LlmGateway(
        "http://127.0.0.1:1/v1", mock=MockLLM(recipe.seed), force_mock=True
    ) as llm:
        return Simulation(recipe, platform, llm, poll_interval=0.01, **options).run()


@pytest.fixture
def recipe() -> Recipe:
    return Recipe.from_dict(recipe_dict())


@pytest.fixture
def make_recipe() -> Callable[..., Recipe]:
    return lambda **sections: Recipe.from_dict(recipe_dict(**sections))


@pytest.fixture
def store() -> Iterator[PlatformStore]:
    s = PlatformStore(":memory:")
    yield s
    s.close()


@pytest.fixture
def http(store: PlatformStore) -> TestClient:
    return TestClient(create_server(store).http_app())


@pytest.fixture
def platform(http: TestClient) -> PlatformClient:
    return PlatformClient("http://testserver", "client-0", http=http)


@pytest.fixture
def connect(store: PlatformStore) -> Callable[[str], PlatformClient]:
    """A fresh client with its own HTTP session on the shared store."""
    app = create_server(store).http_app()
    return lambda client_id: PlatformClient(
        "http://testserver", client_id, http=TestClient(app)
    )


@pytest.fixture
def mock_gateway() -> Iterator[LlmGateway]:
    gateway = LlmGateway("http://127.0.0.1:1/v1", mock=MockLLM(7), force_mock=True)
    yield gateway
    gateway.close()


@pytest.fixture
def agents(store: PlatformStore) -> list[str]:
    names = ["a1", "a2", "a3", "a4"]
    for name in names:
        store.register_agent(make_profile(name))
    return names
