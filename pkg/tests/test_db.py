import random

import pytest

from ytwin.db import ORCHESTRATOR, WORKER, PlatformStore
from ytwin.errors import (
    BarrierPending,
    ClockDesync,
    DanglingReference,
    DuplicateName,
    InvalidEmotion,
    InvalidProfile,
    InvalidRequest,
    KindFieldMismatch,
    SelfFollow,
    SettingsMismatch,
    UnauthorizedAdvance,
    UnknownAuthor,
    UnknownClient,
    UnknownContent,
)
from ytwin.models import (
    ContentKind,
    FollowAction,
    ReactionValue,
    TimelineMode,
    fold_follow_events,
)

from conftest import make_profile

REVERSE_CHRONO = {"name": "ReverseChrono"}


def advance_to(store: PlatformStore, round: int) -> None:
    if not store.clients():
        store.register_client("orch", ORCHESTRATOR)
    while store.current_clock().round < round:
        store.advance_slot("orch")


def add_news(store: PlatformStore, author: str, link: str = "https://n.example/1"):
    site = store.upsert_website("Daily", "https://n.example/rss", "LEFT", "politics")
    article = store.add_article(site.id, "Title", "Summary", link)
    return store.publish(author, ContentKind.NEWS, "read this", article=article)


# -- agents ---------------------------------------------------------------------


def test_register_agent_at_round_zero(store):
    assert store.register_agent(make_profile("kim_s")) == "kim_s"
    assert store.get_agent("kim_s").joined_round == 0


def test_register_agent_twice(store):
    store.register_agent(make_profile("kim_s"))
    with pytest.raises(DuplicateName):
        store.register_agent(make_profile("kim_s"))


def test_register_agent_outside_recipe_bounds(store):
    store.configure({"n_interests": {"min": 4, "max": 10}})
    with pytest.raises(InvalidProfile):
        store.register_agent(make_profile("kim_s", interests=()))
    with pytest.raises(InvalidProfile):
        store.register_agent(make_profile("kim_s", interests=("a", "b")))


def test_joined_round_is_the_server_clock(store):
    advance_to(store, 5)
    store.register_agent(make_profile("late", joined_round=0))
    assert store.get_agent("late").joined_round == 5


def test_list_agents_by_owner(store):
    store.register_agent(make_profile("a", owner="c1"))
    store.register_agent(make_profile("b", owner="c2"))
    store.register_agent(make_profile("c", owner="c1"))
    assert [p.name for p in store.list_agents("c1")] == ["a", "c"]
    assert len(store.list_agents()) == 3


# -- contents -------------------------------------------------------------------


def test_publish_post_and_comment(store, agents):
    post = store.publish("a1", ContentKind.POST, "Renewables now! #renewableenergy")
    assert post.id == 1
    assert post.thread_root == 1
    assert post.hashtags == ("renewableenergy",)

    comment = store.publish("a2", ContentKind.COMMENT, "@a1 disagree", parent=1)
    assert comment.id == 2
    assert comment.thread_root == 1
    assert comment.mentions == ("a1",)

    nested = store.publish("a3", ContentKind.COMMENT, "me too", parent=2)
    assert nested.thread_root == 1
    assert store.get_content(2) == comment


def test_publish_unknown_author(store):
    with pytest.raises(UnknownAuthor):
        store.publish("nobody", ContentKind.POST, "hello")


def test_publish_dangling_parent(store, agents):
    with pytest.raises(DanglingReference):
        store.publish("a1", ContentKind.COMMENT, "hm", parent=42)


def test_publish_invalid_emotion(store, agents):
    with pytest.raises(InvalidEmotion):
        store.publish("a1", ContentKind.POST, "hi", emotions=["smug"])


def test_share_of_a_comment(store, agents):
    store.publish("a1", ContentKind.POST, "root")
    comment = store.publish("a2", ContentKind.COMMENT, "reply", parent=1)
    with pytest.raises(KindFieldMismatch):
        store.publish("a3", ContentKind.SHARE, "must read", shared_from=comment.id)


def test_share_of_news_is_a_new_root(store, agents):
    news = add_news(store, "a1")
    share = store.publish("a2", ContentKind.SHARE, "look", shared_from=news.id)
    assert share.thread_root == share.id
    assert share.shared_from == news.id
    assert share.shared_via == news.id
    assert share.article == news.article


def test_share_of_share_keeps_the_original_news(store, agents):
    news = add_news(store, "a1")
    first = store.publish("a2", ContentKind.SHARE, "look", shared_from=news.id)
    second = store.publish("a3", ContentKind.SHARE, "again", shared_from=first.id)
    assert second.shared_from == news.id
    assert second.shared_via == first.id


def test_same_article_can_be_posted_twice(store, agents):
    first = add_news(store, "a1")
    second = store.publish("a2", ContentKind.NEWS, "mine", article=first.article)
    assert second.article == first.article
    assert second.id != first.id


def test_thread_is_trimmed_to_the_last_messages(store, agents):
    store.publish("a1", ContentKind.POST, "m1")
    for i in range(2, 9):
        store.publish(agents[i % 4], ContentKind.COMMENT, f"m{i}", parent=i - 1)
    thread = store.thread(8, max_length=5)
    assert [c.text for c in thread] == ["m4", "m5", "m6", "m7", "m8"]
    assert [c.text for c in store.thread(8)][0] == "m1"
    with pytest.raises(UnknownContent):
        store.thread(99)


# -- reactions ------------------------------------------------------------------


def test_react_is_an_upsert(store, agents):
    store.publish("a2", ContentKind.POST, "hi")
    store.react("a1", 1, ReactionValue.LIKE)
    store.react("a1", 1, ReactionValue.DISLIKE)
    reactions = store.reactions(1)
    assert len(reactions) == 1
    assert reactions[0].value is ReactionValue.DISLIKE


def test_react_unknown_content(store, agents):
    with pytest.raises(UnknownContent):
        store.react("a1", 99, ReactionValue.LIKE)


def test_net_popularity(store, agents):
    store.register_agent(make_profile("a5"))
    store.publish("a5", ContentKind.POST, "vote")
    for name in ("a1", "a2", "a3"):
        store.react(name, 1, ReactionValue.LIKE)
    store.react("a4", 1, ReactionValue.DISLIKE)
    assert store.popularity(1) == 2


def test_engagement_popularity(store, agents):
    store.configure({"popularity": "engagement"})
    store.publish("a4", ContentKind.POST, "vote")
    store.react("a1", 1, ReactionValue.LIKE)
    store.react("a2", 1, ReactionValue.DISLIKE)
    assert store.popularity(1) == 2


# -- follows --------------------------------------------------------------------


def test_follow_then_unfollow(store, agents):
    store.set_follow("a1", "a2", FollowAction.FOLLOW)
    store.set_follow("a1", "a2", FollowAction.UNFOLLOW)
    assert "a2" not in store.followees("a1")
    assert len(store.follow_events()) == 2


def test_self_follow(store, agents):
    with pytest.raises(SelfFollow):
        store.set_follow("a1", "a1", FollowAction.FOLLOW)


def test_follow_twice_is_stored_once(store, agents):
    store.set_follow("a1", "a2", FollowAction.FOLLOW)
    store.set_follow("a1", "a2", FollowAction.FOLLOW)
    assert store.followees("a1") == {"a2"}


@pytest.mark.parametrize("seed", range(5))
def test_follow_log_folds_into_the_followee_table(store, agents, seed):
    rng = random.Random(seed)
    for _ in range(60):
        follower, followee = rng.sample(agents, 2)
        store.set_follow(follower, followee, rng.choice(list(FollowAction)))
        if rng.random() < 0.2:
            advance_to(store, store.current_clock().round + 1)
    assert fold_follow_events(store.follow_events()) == store.followee_map()


# -- timelines ------------------------------------------------------------------


def test_visibility_window(store, agents):
    advance_to(store, 103)
    old = store.publish("a2", ContentKind.POST, "old")
    advance_to(store, 104)
    fresh = store.publish("a2", ContentKind.POST, "fresh")
    advance_to(store, 140)
    ids = [c.id for c in store.timeline("a1", REVERSE_CHRONO, 10)]
    assert old.id not in ids
    assert fresh.id in ids


def test_timeline_excludes_own_content(store, agents):
    store.publish("a1", ContentKind.POST, "mine")
    theirs = store.publish("a2", ContentKind.POST, "theirs")
    assert [c.id for c in store.timeline("a1", REVERSE_CHRONO, 10)] == [theirs.id]


def test_reply_mode_without_mentions(store, agents):
    store.publish("a2", ContentKind.POST, "no mentions")
    assert store.timeline("a1", REVERSE_CHRONO, 10, TimelineMode.REPLY) == []


def test_reply_mode_finds_the_mention(store, agents):
    store.publish("a2", ContentKind.POST, "hello all")
    mention = store.publish("a3", ContentKind.POST, "@a1 what do you think?")
    ids = [c.id for c in store.timeline("a1", REVERSE_CHRONO, 10, TimelineMode.REPLY)]
    assert ids == [mention.id]


def test_answered_mentions_leave_reply_mode(store, agents):
    mention = store.publish("a3", ContentKind.POST, "@a1 what do you think?")
    store.publish("a1", ContentKind.COMMENT, "not much", parent=mention.id)
    assert store.timeline("a1", REVERSE_CHRONO, 10, TimelineMode.REPLY) == []


def test_search_mode_shares_a_hashtag(store, agents):
    store.publish("a1", ContentKind.POST, "I care about #climate")
    match = store.publish("a2", ContentKind.POST, "#Climate strike today")
    store.publish("a3", ContentKind.POST, "#football tonight")
    contents = store.timeline("a1", REVERSE_CHRONO, 10, TimelineMode.SEARCH)
    assert [c.id for c in contents] == [match.id]
    assert "climate" in contents[0].hashtags


def test_timeline_calls_are_logged_as_impressions(store, agents):
    store.set_follow("a1", "a2", FollowAction.FOLLOW)
    store.publish("a2", ContentKind.POST, "followed")
    store.publish("a3", ContentKind.POST, "stranger")
    store.timeline("a1", REVERSE_CHRONO, 10)
    (entry,) = store.timeline_log()
    assert entry["agent"] == "a1"
    assert entry["followee_visible"] == 1
    assert entry["followee_returned"] == 1
    assert len(store.query("SELECT * FROM impressions")) == 2


def test_follow_candidates_empty_when_everyone_is_followed(store):
    store.register_agent(make_profile("a"))
    store.register_agent(make_profile("b"))
    store.set_follow("a", "b", FollowAction.FOLLOW)
    assert store.follow_candidates("a", {"name": "Random"}, 5) == []


# -- clock and clients ----------------------------------------------------------


def test_advance_requires_the_orchestrator(store):
    store.register_client("orch", ORCHESTRATOR)
    store.register_client("w1", WORKER)
    with pytest.raises(UnauthorizedAdvance):
        store.advance_slot("w1")
    with pytest.raises(UnknownClient):
        store.advance_slot("ghost")


def test_barrier_waits_for_workers(store):
    store.register_client("orch", ORCHESTRATOR, expected_clients=2)
    with pytest.raises(BarrierPending):
        store.advance_slot("orch")
    store.register_client("w1", WORKER)
    store.slot_done("orch", 0)
    with pytest.raises(BarrierPending):
        store.advance_slot("orch")
    store.slot_done("w1", 0)
    assert store.advance_slot("orch").round == 1
    with pytest.raises(BarrierPending):
        store.advance_slot("orch")


def test_finished_clients_no_longer_block(store):
    store.register_client("orch", ORCHESTRATOR, expected_clients=2)
    store.register_client("w1", WORKER)
    store.slot_done("w1", 0, finished=True)
    store.advance_slot("orch")
    assert store.advance_slot("orch").round == 2


def test_slot_done_for_another_round(store):
    store.register_client("orch", ORCHESTRATOR)
    with pytest.raises(ClockDesync):
        store.slot_done("orch", 3)


def test_concurrent_reads_see_the_same_clock(store):
    assert store.current_clock() == store.current_clock()


def test_settings_cannot_change_mid_run(store):
    store.configure({"slots": 24, "visibility_rounds": 36})
    store.configure({"slots": 24})
    with pytest.raises(SettingsMismatch):
        store.configure({"visibility_rounds": 12})


def test_second_orchestrator_is_refused(store):
    store.register_client("orch", ORCHESTRATOR)
    store.register_client("orch", ORCHESTRATOR)
    with pytest.raises(InvalidRequest, match="orchestrator already registered"):
        store.register_client("other", ORCHESTRATOR)


# -- audit ----------------------------------------------------------------------


def test_audit_of_a_consistent_store(store, agents):
    news = add_news(store, "a1")
    store.publish("a2", ContentKind.SHARE, "look #news", shared_from=news.id)
    store.publish("a3", ContentKind.COMMENT, "@a1 ok", parent=news.id)
    store.react("a4", news.id, ReactionValue.LIKE)
    store.set_follow("a4", "a1", FollowAction.FOLLOW)
    assert store.audit() == []


def test_audit_reports_tampered_hashtags(store, agents):
    store.publish("a1", ContentKind.POST, "#climate")
    with store._conn:
        store._conn.execute("DELETE FROM hashtags")
    assert store.audit() == ["content.1: hashtags of 1 do not match its text"]


def test_audit_ignores_agents_registered_after_the_mention(store, agents):
    store.publish("a1", ContentKind.POST, "hello @kim_s #climate")
    store.register_agent(make_profile("kim_s"))
    later = store.publish("a2", ContentKind.POST, "hi @kim_s")
    assert store.get_content(1).mentions == ()
    assert later.mentions == ("kim_s",)
    assert store.audit() == []


def test_audit_reports_a_dropped_mention(store, agents):
    store.publish("a1", ContentKind.POST, "@a2 look")
    with store._conn:
        store._conn.execute("DELETE FROM mentions")
    assert store.audit() == ["content.1: mentions of 1 do not match its text"]


def test_store_survives_reopening(tmp_path):
    path = tmp_path / "platform.db"
    with PlatformStore(path) as first:
        first.register_agent(make_profile("kim_s"))
        first.publish("kim_s", ContentKind.POST, "persisted #state")
    with PlatformStore(path) as second:
        assert second.agent_names() == ["kim_s"]
        assert second.get_content(1).hashtags == ("state",)
