"""The client-side simulation loop.

One ``Simulation`` drives the agents owned by one client through every round
of the recipe. Clients meet only at the server clock: each marks a round
done with ``/slot_done`` and the orchestrator ticks the clock with
``/advance_slot`` once every registered client is done.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from tenacity import (
    RetryError,
    Retrying,
    retry_if_exception_type,
    retry_if_result,
    stop_after_delay,
    wait_fixed,
)

from .agents import Agent
from .client import PlatformClient
from .config import Recipe, get_api_key, get_api_url
from .db import ORCHESTRATOR
from .errors import BarrierPending, ClockDesync, DuplicateName
from .llm import LlmGateway, MockLLM
from .models import AgentProfile, RoundClock
from .news import ingest_catalog, load_catalog
from .population import generate_population, synthetic_name
from .seeding import rng

logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """What one client did during a run. Holds no wall-clock data."""

    simulation: str
    recipe_hash: str
    seed: int
    client_id: str
    role: str
    start_round: int = 0
    end_round: int = 0
    agents: int = 0
    observed_rounds: list[int] = field(default_factory=list)
    activations: list[list[int]] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        return path


def starting_share(recipe: Recipe, role: str) -> int:
    """Agents a client creates at start; the orchestrator takes the remainder."""
    total = recipe.simulation.starting_agents
    clients = recipe.simulation.expected_clients
    share = total // clients
    if role == ORCHESTRATOR:
        return total - share * (clients - 1)
    return share


class Simulation:
    def __init__(
        self,
        recipe: Recipe,
        platform: PlatformClient,
        llm: LlmGateway,
        role: str = ORCHESTRATOR,
        resume: bool = False,
        poll_interval: float = 0.05,
        barrier_timeout: float = 600.0,
    ):
        self.recipe = recipe
        self.platform = platform
        self.llm = llm
        self.role = role
        self.resume = resume
        self.poll_interval = poll_interval
        self.barrier_timeout = barrier_timeout
        self.agents: list[Agent] = []
        self.end_round = recipe.simulation.days * recipe.simulation.slots
        self._last: Optional[RoundClock] = None
        self._active_today: set[str] = set()
        self._counters: Counter[str] = Counter()
        self.manifest = RunManifest(
            simulation=recipe.simulation.name,
            recipe_hash=recipe.recipe_hash(),
            seed=recipe.seed,
            client_id=platform.client_id,
            role=role,
        )

    @property
    def client_id(self) -> str:
        return self.platform.client_id

    @property
    def is_orchestrator(self) -> bool:
        return self.role == ORCHESTRATOR

    # -- population -------------------------------------------------------------

    def _adopt(self, profile: AgentProfile) -> None:
        self.agents.append(Agent(profile, self.platform, self.llm, self.recipe))

    def _register(self, profiles: list[AgentProfile], round: int) -> int:
        taken = {a.name for a in self.agents}
        added = 0
        for profile in profiles:
            while True:
                try:
                    self.platform.register_agent(profile)
                    break
                except DuplicateName:
                    taken.add(profile.name)
                    draw = rng(self.recipe.seed, "rename", profile.name, round)
                    profile = dataclasses.replace(
                        profile, name=synthetic_name(draw, taken)
                    )
            taken.add(profile.name)
            self._adopt(dataclasses.replace(profile, joined_round=round))
            added += 1
        return added

    def populate(self, clock: RoundClock) -> None:
        """Create this client's starting agents, or reload them on resume."""
        if self.resume:
            for profile in self.platform.agents(owner=self.client_id):
                self._adopt(profile)
            if self.agents:
                logger.info(
                    "%s resumed %d agents at round %d",
                    self.client_id,
                    len(self.agents),
                    clock.round,
                )
                return
        n = starting_share(self.recipe, self.role)
        profiles = generate_population(
            self.recipe, n, joined_round=clock.round, owner=self.client_id
        )
        self._register(profiles, clock.round)
        logger.info("%s registered %d agents", self.client_id, len(self.agents))

    def grow(self, clock: RoundClock) -> int:
        n = self.recipe.simulation.new_agents_per_iteration
        if not self.is_orchestrator or n == 0:
            return 0
        profiles = generate_population(
            self.recipe,
            n,
            joined_round=clock.round,
            owner=self.client_id,
            taken={a.name for a in self.agents},
        )
        added = self._register(profiles, clock.round)
        self._counters["agents_added"] += added
        return added

    # -- news -------------------------------------------------------------------

    def ingest_news(self) -> int:
        news = self.recipe.news
        if not self.is_orchestrator or not (news.catalog or news.from_dir):
            return 0
        results = ingest_catalog(
            load_catalog(news.catalog), self.platform.ingest_feed, news.from_dir
        )
        new = sum(len(r.new_ids) for r in results)
        self._counters["articles_ingested"] += new
        return new

    # -- clock ------------------------------------------------------------------

    def _observe(self, clock: RoundClock) -> RoundClock:
        if self._last is not None and clock.round < self._last.round:
            raise ClockDesync(
                f"clock went back from round {self._last.round} to {clock.round}"
            )
        return clock

    def _sync(self) -> RoundClock:
        """The round to play next; workers wait for the orchestrator's tick."""
        if self.is_orchestrator or self._last is None:
            return self._observe(self.platform.current_slot())
        last = self._last.round
        retrying = Retrying(
            retry=retry_if_result(lambda c: c.round <= last),
            wait=wait_fixed(self.poll_interval),
            stop=stop_after_delay(self.barrier_timeout),
        )
        try:
            clock = retrying(self.platform.current_slot)
        except RetryError as e:
            raise BarrierPending(
                f"{self.client_id}: clock stuck at round {last}"
            ) from e
        return self._observe(clock)

    def _finish(self, clock: RoundClock) -> None:
        self.platform.slot_done(
            clock.round, finished=clock.round == self.end_round - 1
        )
        if not self.is_orchestrator:
            return
        retrying = Retrying(
            retry=retry_if_exception_type(BarrierPending),
            wait=wait_fixed(self.poll_interval),
            stop=stop_after_delay(self.barrier_timeout),
            reraise=True,
        )
        retrying(self.platform.advance_slot)

    # -- rounds -----------------------------------------------------------------

    def activate(self, clock: RoundClock) -> list[Agent]:
        fraction = self.recipe.simulation.activity(clock.slot)
        expected_active = int(len(self.agents) * fraction)
        draw = rng(self.recipe.seed, "activation", self.client_id, clock.round)
        active = draw.sample(self.agents, expected_active)
        self.manifest.activations.append(
            [clock.round, len(self.agents), len(active)]
        )
        return active

    def daily_follow(self, clock: RoundClock) -> None:
        p = self.recipe.agents.probability_of_daily_follow
        scope = self.recipe.simulation.daily_follow_scope
        for agent in list(self.agents):
            if scope == "active" and agent.name not in self._active_today:
                continue
            draw = rng(self.recipe.seed, agent.name, clock.round, "daily_follow")
            if draw.random() < p:
                agent.daily(clock.round)

    def play_round(self, clock: RoundClock) -> None:
        if clock.slot == 0:
            self._active_today.clear()
            self.ingest_news()
        active = self.activate(clock)
        for agent in active:
            self._active_today.add(agent.name)
            actions = agent.act(clock.round)
            logger.debug("round %d: %s did %s", clock.round, agent.name, actions)
        self._counters["activations"] += len(active)
        if clock.slot == self.recipe.simulation.slots - 1:
            self.daily_follow(clock)
            added = self.grow(clock)
            logger.info(
                "%s finished day %d: %d agents (+%d)",
                self.client_id,
                clock.day,
                len(self.agents),
                added,
            )

    def run(self) -> RunManifest:
        """Play every remaining round of the recipe."""
        self.platform.register_client(
            self.role,
            self.recipe.server_settings(),
            self.recipe.simulation.expected_clients,
        )
        clock = self._sync()
        self.manifest.start_round = clock.round
        self.populate(clock)
        while clock.round < self.end_round:
            self.manifest.observed_rounds.append(clock.round)
            self._last = clock
            self.play_round(clock)
            self._finish(clock)
            clock = self._sync()
        self._last = clock
        return self._close(clock)

    def _close(self, clock: RoundClock) -> RunManifest:
        counters: Counter[str] = Counter(self._counters)
        for agent in self.agents:
            counters.update(agent.stats)
        self.manifest.end_round = clock.round
        self.manifest.agents = len(self.agents)
        self.manifest.counters = dict(sorted(counters.items()))
        self.platform.save_manifest(
            self.recipe.simulation.name, self.manifest.to_dict()
        )
        logger.info(
            "%s done at round %d with %d agents",
            self.client_id,
            clock.round,
            len(self.agents),
        )
        return self.manifest


def build_gateway(recipe: Recipe, mock_llm: bool = False) -> LlmGateway:
    return LlmGateway(
        base_url=recipe.servers.llm,
        api_key=get_api_key(recipe.servers.llm_api_key),
        options=recipe.llm,
        mock=MockLLM(recipe.seed),
        force_mock=mock_llm,
    )


def run_simulation(
    recipe: Recipe,
    client_id: str = "client-0",
    role: str = ORCHESTRATOR,
    resume: bool = False,
    mock_llm: bool = False,
    platform: Optional[PlatformClient] = None,
    llm: Optional[LlmGateway] = None,
) -> RunManifest:
    """Run ``recipe`` against the platform server named in it."""
    recipe.validate()
    owns_platform = platform is None
    owns_llm = llm is None
    platform = platform or PlatformClient(get_api_url(recipe.servers.api), client_id)
    llm = llm or build_gateway(recipe, mock_llm)
    try:
        return Simulation(recipe, platform, llm, role=role, resume=resume).run()
    finally:
        if owns_llm:
            llm.close()
        if owns_platform:
            platform.close()
