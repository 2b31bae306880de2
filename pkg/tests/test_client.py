import httpx
import pytest

from ytwin.client import PlatformClient
from ytwin.errors import (
    BarrierPending,
    DuplicateName,
    KindFieldMismatch,
    ServerUnreachable,
    UnknownAgent,
    YTwinError,
)
from ytwin.models import (
    ContentKind,
    FollowAction,
    FollowEdge,
    ReactionValue,
    Website,
)

from conftest import FEEDS, make_profile


def test_profile_survives_the_wire(platform):
    profile = make_profile("kim_s", news_category="politics", news_leaning="LEFT")
    platform.register_agent(profile)
    (stored,) = platform.agents(owner="client-0")
    assert stored == profile


def test_server_errors_are_raised_as_their_class(platform):
    platform.register_agent(make_profile("kim_s"))
    with pytest.raises(DuplicateName):
        platform.register_agent(make_profile("kim_s"))
    with pytest.raises(UnknownAgent):
        platform.followees("ghost")


def test_conversation_round_trip(platform):
    for name in ("a1", "a2"):
        platform.register_agent(make_profile(name))
    root = platform.publish("a1", ContentKind.POST, "Energy #solar")
    reply = platform.publish("a2", ContentKind.COMMENT, "@a1 yes", parent=root.id)
    platform.react("a2", root.id, ReactionValue.LIKE)
    edge = platform.follow("a2", "a1", FollowAction.FOLLOW)

    assert edge == FollowEdge("a2", "a1", FollowAction.FOLLOW, 0)
    assert platform.followees("a2") == {"a1"}
    assert [c.id for c in platform.thread(reply.id)] == [root.id, reply.id]
    assert platform.content(reply.id).mentions == ("a1",)
    timeline = platform.read("a2", {"name": "ReverseChronoFollowers"}, 5)
    assert [c.id for c in timeline] == [root.id]
    with pytest.raises(KindFieldMismatch):
        platform.publish("a2", ContentKind.SHARE, "x", shared_from=reply.id)


def test_follow_suggestions(platform):
    for name in ("a1", "a2", "a3"):
        platform.register_agent(make_profile(name))
    platform.follow("a1", "a2", FollowAction.FOLLOW)
    suggestions = platform.follow_suggestions("a1", {"name": "Random"}, 5)
    assert [s.name for s in suggestions] == ["a3"]
    assert suggestions[0].probability == 1.0


def test_news_through_the_client(platform):
    website = Website(
        id=0,
        name="Daily Planet",
        rss_url="https://dailyplanet.example/rss.xml",
        leaning="LEFT",
        category="politics",
    )
    document = (FEEDS / "daily_planet.xml").read_text(encoding="utf-8")
    result = platform.ingest_feed(website, document)
    assert len(result.new_ids) == 3
    assert result.skipped == 1
    assert platform.ingest_feed(website, document).new_ids == []

    article = platform.pick_article("politics", "LEFT", seed=3)
    assert article is not None
    assert platform.article(article.id) == article


def test_pick_article_without_articles(platform):
    assert platform.pick_article(seed=1) is None


def test_barrier_pending_reaches_the_orchestrator(connect):
    orchestrator = connect("orch")
    worker = connect("w1")
    orchestrator.register_client("orchestrator", {"slots": 4}, expected_clients=2)
    worker.register_client("worker")
    orchestrator.slot_done(0)
    with pytest.raises(BarrierPending):
        orchestrator.advance_slot()
    worker.slot_done(0)
    assert orchestrator.advance_slot().round == 1
    assert worker.current_slot().round == 1


def test_manifest_and_audit(platform, store):
    platform.save_manifest("sim", {"client_id": "client-0", "agents": 0})
    assert store.manifests() == [{"client_id": "client-0", "agents": 0}]
    assert platform.audit() == []
    assert platform.status()["counts"]["user_mgmt"] == 0


def test_unreachable_server_after_retries():
    attempts = []

    def refuse(request: httpx.Request) -> httpx.Response:
        attempts.append(request.url.path)
        raise httpx.ConnectError("connection refused", request=request)

    http = httpx.Client(
        base_url="http://platform.invalid", transport=httpx.MockTransport(refuse)
    )
    client = PlatformClient("http://platform.invalid", "c", http=http)
    with pytest.raises(ServerUnreachable):
        client.current_slot()
    assert attempts == ["/current_slot"] * 3


def test_unknown_error_codes_keep_the_status():
    def teapot(request: httpx.Request) -> httpx.Response:
        return httpx.Response(418, json={"error": "Teapot", "detail": "short"})

    http = httpx.Client(base_url="http://p", transport=httpx.MockTransport(teapot))
    client = PlatformClient("http://p", "c", http=http)
    with pytest.raises(YTwinError) as info:
        client.status()
    assert info.value.status == 418
    assert "Teapot" in str(info.value)
