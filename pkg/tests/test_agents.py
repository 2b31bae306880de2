import json
from typing import Callable

import httpx
import pytest

from ytwin.agents import Agent
from ytwin.config import LlmOptions
from ytwin.llm import LlmGateway
from ytwin.models import (
    ActionKind,
    ContentKind,
    FollowAction,
    IntRange,
    ReactionValue,
)
from ytwin.prompts import TemplateKind, section, template_kind

from conftest import make_profile

Replies = dict[TemplateKind, str]


class Scripted:
    """Chat endpoint answering each action template with a fixed reply."""

    def __init__(self, replies: Replies):
        self.replies = replies
        self.prompts: list[str] = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        user = json.loads(request.content)["messages"][1]["content"]
        self.prompts.append(user)
        text = self.replies.get(template_kind(user), "NONE")
        return httpx.Response(
            200, json={"choices": [{"message": {"content": text}}], "model": "s"}
        )

    def of(self, kind: TemplateKind) -> list[str]:
        return [p for p in self.prompts if template_kind(p) is kind]


@pytest.fixture
def scripted_agent(store, platform, recipe) -> Callable[..., tuple[Agent, Scripted]]:
    gateways = []

    def build(name: str = "me", replies: Replies | None = None, **profile):
        script = Scripted(replies or {})
        gateway = LlmGateway(
            "http://llm.test/v1",
            options=LlmOptions(max_retries=0),
            http=httpx.Client(transport=httpx.MockTransport(script)),
        )
        gateways.append(gateway)
        agent_profile = make_profile(name, llm_model="scripted", **profile)
        store.register_agent(agent_profile)
        return Agent(agent_profile, platform, gateway, recipe), script

    yield build
    for gateway in gateways:
        gateway.close()


@pytest.fixture
def mock_agent(store, platform, recipe, mock_gateway) -> Callable[..., Agent]:
    def build(name: str = "me", **profile) -> Agent:
        agent_profile = make_profile(name, **profile)
        store.register_agent(agent_profile)
        return Agent(agent_profile, platform, mock_gateway, recipe)

    return build


def other(store, name: str = "bob") -> str:
    store.register_agent(make_profile(name))
    return name


# -- selection ------------------------------------------------------------------


def test_mock_selection_is_deterministic(mock_agent):
    agent = mock_agent()
    menu = [ActionKind.POST, ActionKind.NONE]
    picks = [agent.select_action(menu, round) for round in range(20)]
    assert set(picks) <= set(menu)

    replay = Agent(agent.profile, agent.platform, agent.llm, agent.recipe)
    assert [replay.select_action(menu, round) for round in range(20)] == picks


def test_lenient_selection(scripted_agent):
    agent, _ = scripted_agent(replies={TemplateKind.SELECT: "I choose: post!"})
    assert agent.select_action([ActionKind.POST, ActionKind.NONE], 0) is ActionKind.POST


def test_gibberish_selects_nothing(scripted_agent):
    agent, _ = scripted_agent(replies={TemplateKind.SELECT: "blorp"})
    menu = [ActionKind.POST, ActionKind.READ]
    assert agent.select_action(menu, 0) is ActionKind.NONE
    assert agent.stats["unparsed_choices"] == 1


def test_action_count_within_bounds(mock_agent):
    agent = mock_agent(round_actions=IntRange(2, 4))
    counts = {agent.n_actions(round) for round in range(50)}
    assert counts <= {2, 3, 4}
    assert len(counts) > 1
    assert 2 <= len(agent.act(0)) <= 4


# -- reading --------------------------------------------------------------------


def test_read_of_an_empty_timeline(scripted_agent, store):
    agent, script = scripted_agent(replies={TemplateKind.REACTION: "YES"})
    assert agent.do_read(0) is None
    assert store.reactions() == []
    assert script.prompts == []


def test_like_triggers_the_follow_prompt(scripted_agent, store):
    agent, script = scripted_agent(
        replies={TemplateKind.REACTION: "YES", TemplateKind.FOLLOW: "Yes"}
    )
    bob = other(store)
    post = store.publish(bob, ContentKind.POST, "Great game last night!")

    assert agent.do_read(0) == (ReactionValue.LIKE, FollowAction.FOLLOW)
    (reaction,) = store.reactions(post.id)
    assert reaction.value is ReactionValue.LIKE
    assert store.followees("me") == {bob}
    assert "follow bob" in script.of(TemplateKind.FOLLOW)[0]


def test_dislike_of_a_followee_can_unfollow(scripted_agent, store):
    agent, script = scripted_agent(
        replies={TemplateKind.REACTION: "NO", TemplateKind.FOLLOW: "YES"}
    )
    bob = other(store)
    store.set_follow("me", bob, FollowAction.FOLLOW)
    store.publish(bob, ContentKind.POST, "Pineapple belongs on pizza")

    assert agent.do_read(0) == (ReactionValue.DISLIKE, FollowAction.UNFOLLOW)
    assert store.followees("me") == set()
    assert "unfollow bob" in script.of(TemplateKind.FOLLOW)[0]


def test_dislike_of_a_stranger_changes_nothing(scripted_agent, store):
    agent, script = scripted_agent(
        replies={TemplateKind.REACTION: "NO", TemplateKind.FOLLOW: "YES"}
    )
    store.publish(other(store), ContentKind.POST, "meh")
    assert agent.do_read(0) == (ReactionValue.DISLIKE, None)
    assert "unfollow bob" in script.of(TemplateKind.FOLLOW)[0]
    assert store.follow_events() == []


def test_like_of_a_followee_asks_but_keeps_the_edge(scripted_agent, store):
    agent, script = scripted_agent(
        replies={TemplateKind.REACTION: "YES", TemplateKind.FOLLOW: "YES"}
    )
    bob = other(store)
    store.set_follow("me", bob, FollowAction.FOLLOW)
    store.publish(bob, ContentKind.POST, "Another great game")
    assert agent.do_read(0) == (ReactionValue.LIKE, None)
    assert len(script.of(TemplateKind.FOLLOW)) == 1
    assert len(store.follow_events()) == 1
    assert store.followees("me") == {bob}


def test_neutral_leaves_no_reaction(scripted_agent, store):
    agent, script = scripted_agent(replies={TemplateKind.REACTION: "NEUTRAL"})
    store.publish(other(store), ContentKind.POST, "fine")
    assert agent.do_read(0) == (None, None)
    assert store.reactions() == []
    assert script.of(TemplateKind.FOLLOW) == []


def test_read_skips_own_content(scripted_agent, store):
    agent, _ = scripted_agent(replies={TemplateKind.REACTION: "YES"})
    store.publish("me", ContentKind.POST, "my own words")
    assert agent.do_read(0) is None


# -- writing --------------------------------------------------------------------


def test_post_under_the_mock(mock_agent, store):
    agent = mock_agent(interests=("climate",))
    content = store.get_content(agent.do_post(0))
    assert content.kind is ContentKind.POST
    assert content.author == "me"
    assert 0 < len(content.text) <= 200
    assert 1 <= len(content.emotions) <= 3
    assert store.audit() == []


def test_long_generations_are_truncated(scripted_agent, store):
    agent, _ = scripted_agent(
        replies={TemplateKind.POST: "blah " * 50, TemplateKind.EMOTIONS: "joy"}
    )
    content = store.get_content(agent.do_post(0))
    assert len(content.text) <= 200
    assert content.text.endswith("blah")
    assert content.emotions == ("joy",)


def test_comment_reads_the_last_messages(scripted_agent, store):
    agent, script = scripted_agent(
        replies={TemplateKind.COMMENT: "agreed"},
        content_recommender={"name": "ReverseChrono", "k": 1},
    )
    bob = other(store)
    parent = store.publish(bob, ContentKind.POST, "m1").id
    for i in range(2, 9):
        parent = store.publish(bob, ContentKind.COMMENT, f"m{i}", parent=parent).id

    comment = store.get_content(agent.do_comment(0))
    assert comment.parent == parent
    assert comment.thread_root == 1
    lines = section(script.of(TemplateKind.COMMENT)[0], "CONVERSATION")
    assert lines == [f"bob: m{i}" for i in range(4, 9)]


def test_reply_lands_in_the_mentioning_thread(scripted_agent, store):
    agent, _ = scripted_agent(replies={TemplateKind.COMMENT: "thanks"})
    bob = other(store)
    store.publish(bob, ContentKind.POST, "unrelated")
    mention = store.publish(bob, ContentKind.POST, "@me what do you think?")

    reply = store.get_content(agent.do_reply(0))
    assert reply.parent == mention.id
    assert reply.kind is ContentKind.COMMENT


def test_search_finds_a_shared_hashtag(scripted_agent, store):
    agent, _ = scripted_agent(replies={TemplateKind.COMMENT: "same here"})
    bob = other(store)
    store.publish("me", ContentKind.POST, "worried about #climate")
    match = store.publish(bob, ContentKind.POST, "#Climate march today")
    store.publish(bob, ContentKind.POST, "#football tonight")

    reply = store.get_content(agent.do_search(0))
    assert reply.parent == match.id
    assert "climate" in store.get_content(reply.parent).hashtags


def test_search_without_hashtags_does_nothing(scripted_agent, store):
    agent, _ = scripted_agent()
    store.publish(other(store), ContentKind.POST, "#climate")
    assert agent.do_search(0) is None


def test_news_and_share(mock_agent, store):
    site = store.upsert_website("Daily", "https://d.example/rss", "LEFT", "politics")
    article = store.add_article(site.id, "Title", "Summary", "https://d.example/1")
    reader = mock_agent("reader")
    sharer = mock_agent("sharer")

    news = store.get_content(reader.do_news(0))
    assert news.kind is ContentKind.NEWS
    assert news.article == article

    share = store.get_content(sharer.do_share(0))
    assert share.shared_from == news.id
    assert share.thread_root == share.id
    assert share.article == article
    assert store.audit() == []


def test_news_without_articles(mock_agent):
    assert mock_agent().do_news(0) is None


def test_news_follows_the_leaning_preference(mock_agent, store):
    left = store.upsert_website("L", "https://l.example/rss", "LEFT", "politics")
    right = store.upsert_website("R", "https://r.example/rss", "RIGHT", "politics")
    store.add_article(right.id, "R1", "", "https://r.example/1")
    wanted = store.add_article(left.id, "L1", "", "https://l.example/1")
    store.add_article(right.id, "R2", "", "https://r.example/2")
    agent = mock_agent(news_leaning="LEFT")
    for round in range(10):
        assert store.get_content(agent.do_news(round)).article == wanted


def test_follow_single_candidate(mock_agent, store):
    agent = mock_agent()
    bob = other(store)
    edge = agent.do_follow(0)
    assert (edge.follower, edge.followee) == ("me", bob)
    assert edge.action is FollowAction.FOLLOW
    assert edge.round == 0
    assert store.followees("me") == {bob}
    assert agent.do_follow(1) is None


def test_daily_follow_phase(scripted_agent, store):
    agent, _ = scripted_agent(replies={TemplateKind.SELECT: "FOLLOW"})
    bob = other(store)
    assert agent.daily(0) is ActionKind.FOLLOW
    assert store.followees("me") == {bob}


def test_unreachable_model_skips_actions(store, platform, recipe):
    def refuse(request: httpx.Request) -> httpx.Response:
        raise httpx.ConnectError("down", request=request)

    gateway = LlmGateway(
        "http://llm.test/v1",
        options=LlmOptions(max_retries=0),
        http=httpx.Client(transport=httpx.MockTransport(refuse)),
    )
    profile = make_profile("me", llm_model="remote", round_actions=IntRange(2, 2))
    store.register_agent(profile)
    agent = Agent(profile, platform, gateway, recipe)
    assert agent.act(0) == []
    assert agent.stats["failed_actions"] == 2
