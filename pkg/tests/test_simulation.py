from concurrent.futures import ThreadPoolExecutor

import pytest

from ytwin.db import ORCHESTRATOR, WORKER, PlatformStore
from ytwin.errors import BarrierPending
from ytwin.simulation import Simulation, run_simulation, starting_share

from conftest import simulate


def test_small_run(recipe, store):
    manifest = simulate(recipe, store)

    assert manifest.start_round == 0
    assert manifest.end_round == 4
    assert store.current_clock().round == 4
    assert manifest.observed_rounds == [0, 1, 2, 3]
    assert manifest.activations == [[r, 6, 3] for r in range(4)]
    assert manifest.agents == 6
    assert manifest.counters["activations"] == 12
    assert manifest.counters["articles_ingested"] == 5
    assert manifest.recipe_hash == recipe.recipe_hash()
    assert store.audit() == []
    assert store.manifests() == [manifest.to_dict()]


def test_agents_join_at_the_end_of_each_day(make_recipe, store):
    recipe = make_recipe(simulation={"days": 2, "new_agents_per_iteration": 2})
    manifest = simulate(recipe, store)

    assert manifest.end_round == 8
    assert manifest.agents == 10
    assert manifest.counters["agents_added"] == 4
    assert [a[1] for a in manifest.activations] == [6] * 4 + [8] * 4
    joined = sorted(p.joined_round for p in store.list_agents())
    assert joined == [0] * 6 + [3, 3, 7, 7]


def test_runs_are_reproducible(recipe):
    def contents(store: PlatformStore):
        return store.query(
            "SELECT author, kind, text, parent, round FROM post ORDER BY id"
        )

    with PlatformStore() as first, PlatformStore() as second:
        simulate(recipe, first)
        simulate(recipe, second)
        assert contents(first) == contents(second)
        assert first.reactions() == second.reactions()
        assert first.follow_events() == second.follow_events()
        assert first.manifests() == second.manifests()


def test_resume_reloads_owned_agents(make_recipe, store):
    simulate(make_recipe(), store)
    before = sorted(store.agent_names())

    manifest = simulate(make_recipe(simulation={"days": 2}), store, resume=True)
    assert manifest.start_round == 4
    assert manifest.observed_rounds == [4, 5, 6, 7]
    assert manifest.agents == 6
    assert sorted(store.agent_names()) == before
    assert store.current_clock().round == 8


def test_finished_run_does_nothing(recipe, store):
    simulate(recipe, store)
    manifest = simulate(recipe, store, resume=True)
    assert manifest.observed_rounds == []
    assert manifest.end_round == 4


def test_starting_share(make_recipe):
    recipe = make_recipe(simulation={"starting_agents": 7, "expected_clients": 3})
    assert starting_share(recipe, ORCHESTRATOR) == 3
    assert starting_share(recipe, WORKER) == 2


def test_two_clients_share_the_clock(make_recipe, store, connect):
    recipe = make_recipe(simulation={"expected_clients": 2})

    def play(client_id: str, role: str):
        platform = connect(client_id)
        return run_simulation(
            recipe,
            client_id=client_id,
            role=role,
            mock_llm=True,
            platform=platform,
        )

    with ThreadPoolExecutor(max_workers=2) as pool:
        worker = pool.submit(play, "w1", WORKER)
        orchestrator = pool.submit(play, "orch", ORCHESTRATOR)
        manifests = [orchestrator.result(timeout=120), worker.result(timeout=120)]

    for manifest in manifests:
        assert manifest.observed_rounds == [0, 1, 2, 3]
        assert manifest.end_round == 4
        assert manifest.agents == 3
    assert len(store.list_agents(owner="w1")) == 3
    assert len(store.list_agents(owner="orch")) == 3
    assert manifests[1].counters.get("articles_ingested", 0) == 0
    assert store.audit() == []


def test_worker_gives_up_without_an_orchestrator(make_recipe, connect, mock_gateway):
    recipe = make_recipe(simulation={"expected_clients": 2})
    simulation = Simulation(
        recipe,
        connect("lonely"),
        mock_gateway,
        role=WORKER,
        poll_interval=0.01,
        barrier_timeout=0.2,
    )
    with pytest.raises(BarrierPending):
        simulation.run()
    assert simulation.manifest.observed_rounds == [0]
