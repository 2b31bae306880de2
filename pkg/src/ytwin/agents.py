"""LLM-impersonated agents: action selection and the action routines."""

from __future__ import annotations

import logging
import random
from collections import Counter
from typing import Any, Optional, Sequence

from .client import PlatformClient
from .config import Recipe
from .errors import EndpointUnavailable, MalformedResponse
from .llm import (
    ChatRequest,
    LlmGateway,
    parse_choice,
    parse_emotions,
    parse_reaction,
    parse_yes_no,
    truncate,
)
from .models import (
    DAILY_MENU,
    HOURLY_MENU,
    ActionKind,
    AgentProfile,
    Content,
    ContentKind,
    FollowAction,
    FollowEdge,
    ReactionValue,
    TimelineMode,
)
from .prompts import (
    build_preprompt,
    comment_prompt,
    emotion_prompt,
    follow_intent_prompt,
    news_prompt,
    post_prompt,
    reaction_prompt,
    select_action_prompt,
    share_prompt,
)
from .recsys import pick_suggestion
from .seeding import derive_seed, rng

logger = logging.getLogger(__name__)

_REACTIONS = {"YES": ReactionValue.LIKE, "NO": ReactionValue.DISLIKE}


class Agent:
    """One simulated user driven through the platform client.

    Every random draw and every LLM call seed derives from the recipe seed,
    the agent name, the round and a per-agent call counter, so a run replays
    exactly under the mock model.
    """

    def __init__(
        self,
        profile: AgentProfile,
        platform: PlatformClient,
        llm: LlmGateway,
        recipe: Recipe,
    ):
        self.profile = profile
        self.platform = platform
        self.llm = llm
        self.recipe = recipe
        self.stats: Counter[str] = Counter()
        self._calls = 0
        self._preprompt = build_preprompt(profile, recipe.agents.big_five)

    @property
    def name(self) -> str:
        return self.profile.name

    def _rng(self, round: int, purpose: str) -> random.Random:
        return rng(self.recipe.seed, self.name, round, purpose, self._calls)

    def _ask(
        self, prompt: str, round: int, interests: Optional[Sequence[str]] = None
    ) -> str:
        self._calls += 1
        system = (
            self._preprompt
            if interests is None
            else build_preprompt(self.profile, self.recipe.agents.big_five, interests)
        )
        options = self.recipe.llm
        request = ChatRequest(
            system=system,
            user=prompt,
            seed=derive_seed(self.recipe.seed, self.name, round, self._calls),
            round=round,
            temperature=options.temperature,
            top_p=options.top_p,
            max_tokens=options.max_tokens,
        )
        self.stats["llm_calls"] += 1
        return self.llm.chat(self.profile.llm_model, request).text

    # -- selection --------------------------------------------------------------

    def select_action(self, menu: Sequence[ActionKind], round: int) -> ActionKind:
        words = [a.value for a in menu]
        reply = self._ask(select_action_prompt(words), round)
        choice = parse_choice(reply, words)
        if choice is None:
            self.stats["unparsed_choices"] += 1
            return ActionKind.NONE
        return ActionKind(choice)

    def n_actions(self, round: int) -> int:
        bounds = self.profile.round_actions
        return rng(self.recipe.seed, self.name, round, "n_actions").randint(
            bounds.min, bounds.max
        )

    def act(self, round: int) -> list[ActionKind]:
        """One activation: draw the action count, then select and run each action."""
        done = []
        for _ in range(self.n_actions(round)):
            try:
                action = self.select_action(HOURLY_MENU, round)
                self.perform(action, round)
            except (EndpointUnavailable, MalformedResponse) as e:
                logger.warning(
                    "%s skipped an action in round %d: %s", self.name, round, e
                )
                self.stats["failed_actions"] += 1
                continue
            done.append(action)
        return done

    def daily(self, round: int) -> ActionKind:
        """The once-a-day FOLLOW/NONE choice."""
        try:
            action = self.select_action(DAILY_MENU, round)
            if action is ActionKind.FOLLOW:
                self.perform(action, round)
        except (EndpointUnavailable, MalformedResponse) as e:
            logger.warning("%s skipped the daily phase: %s", self.name, e)
            self.stats["failed_actions"] += 1
            return ActionKind.NONE
        return action

    def perform(self, action: ActionKind, round: int) -> Any:
        self.stats[f"selected_{action.value.lower()}"] += 1
        handlers = {
            ActionKind.NEWS: self.do_news,
            ActionKind.POST: self.do_post,
            ActionKind.COMMENT: self.do_comment,
            ActionKind.REPLY: self.do_reply,
            ActionKind.SHARE: self.do_share,
            ActionKind.READ: self.do_read,
            ActionKind.SEARCH: self.do_search,
            ActionKind.FOLLOW: self.do_follow,
        }
        handler = handlers.get(action)
        if handler is None:
            return None
        result = handler(round)
        if result is not None:
            self.stats[action.value.lower()] += 1
        return result

    # -- helpers ----------------------------------------------------------------

    @property
    def _content_recommender(self) -> dict[str, Any]:
        return dict(self.profile.content_recommender)

    @property
    def _k(self) -> int:
        return int(self.profile.content_recommender.get("k", 10))

    def _timeline(
        self,
        round: int,
        mode: TimelineMode,
        kinds: Optional[Sequence[ContentKind]] = None,
    ) -> Optional[Content]:
        contents = self.platform.read(
            self.name, self._content_recommender, self._k, mode, kinds
        )
        contents = [c for c in contents if c.author != self.name]
        if not contents:
            return None
        return self._rng(round, f"pick_{mode.value}").choice(contents)

    def _generate(
        self, prompt: str, round: int, interests: Optional[Sequence[str]] = None
    ) -> tuple[str, list[str]]:
        text = truncate(self._ask(prompt, round, interests))
        taxonomy = self.recipe.posts.emotions
        reply = self._ask(emotion_prompt(text, taxonomy), round)
        return text, parse_emotions(reply, taxonomy)

    # -- actions ----------------------------------------------------------------

    def do_read(
        self, round: int
    ) -> Optional[tuple[Optional[ReactionValue], Optional[FollowAction]]]:
        content = self._timeline(round, TimelineMode.READ)
        if content is None:
            return None
        reply = parse_reaction(self._ask(reaction_prompt(content.text), round))
        if reply is None:
            self.stats["unparsed_reactions"] += 1
        value = _REACTIONS.get(reply or "NEUTRAL")
        if value is None:
            return (None, None)
        self.platform.react(self.name, content.id, value)
        self.stats[f"reaction_{value.value.lower()}"] += 1
        return (value, self._follow_intent(content, value, round))

    def _follow_intent(
        self, content: Content, value: ReactionValue, round: int
    ) -> Optional[FollowAction]:
        unfollow = value is ReactionValue.DISLIKE
        prompt = follow_intent_prompt(content.author, content.text, unfollow=unfollow)
        if not parse_yes_no(self._ask(prompt, round)):
            return None
        # FOLLOW needs a missing edge, UNFOLLOW an existing one
        if (content.author in self.platform.followees(self.name)) != unfollow:
            return None
        action = FollowAction.UNFOLLOW if unfollow else FollowAction.FOLLOW
        self.platform.follow(self.name, content.author, action)
        self.stats[f"intent_{action.value.lower()}"] += 1
        return action

    def do_post(self, round: int) -> Optional[int]:
        interests = list(self.profile.interests)
        draw = self._rng(round, "post_topics")
        topics = draw.sample(interests, draw.randint(1, len(interests)))
        text, emotions = self._generate(
            post_prompt(self.profile.language), round, interests=topics
        )
        content = self.platform.publish(
            self.name, ContentKind.POST, text, emotions=emotions
        )
        return content.id

    def _converse(self, round: int, mode: TimelineMode) -> Optional[int]:
        target = self._timeline(round, mode)
        if target is None:
            return None
        thread = self.platform.thread(
            target.id, self.recipe.agents.max_length_thread_reading
        )
        text, emotions = self._generate(
            comment_prompt(self.profile.language, thread), round
        )
        content = self.platform.publish(
            self.name,
            ContentKind.COMMENT,
            text,
            parent=target.id,
            emotions=emotions,
            reply=mode is TimelineMode.REPLY,
        )
        return content.id

    def do_comment(self, round: int) -> Optional[int]:
        return self._converse(round, TimelineMode.COMMENT)

    def do_reply(self, round: int) -> Optional[int]:
        return self._converse(round, TimelineMode.REPLY)

    def do_search(self, round: int) -> Optional[int]:
        return self._converse(round, TimelineMode.SEARCH)

    def do_news(self, round: int) -> Optional[int]:
        article = self.platform.pick_article(
            self.profile.news_category,
            self.profile.news_leaning,
            seed=derive_seed(self.recipe.seed, self.name, round, "news", self._calls),
        )
        if article is None:
            return None
        text, emotions = self._generate(news_prompt(article), round)
        content = self.platform.publish(
            self.name, ContentKind.NEWS, text, article=article.id, emotions=emotions
        )
        return content.id

    def do_share(self, round: int) -> Optional[int]:
        source = self._timeline(
            round, TimelineMode.READ, kinds=(ContentKind.NEWS, ContentKind.SHARE)
        )
        if source is None or source.article is None:
            return None
        article = self.platform.article(source.article)
        text, emotions = self._generate(share_prompt(article, [source]), round)
        content = self.platform.publish(
            self.name,
            ContentKind.SHARE,
            text,
            shared_from=source.id,
            emotions=emotions,
        )
        return content.id

    def do_follow(self, round: int) -> Optional[FollowEdge]:
        """Biased random pick over the follow shortlist; no LLM involved."""
        params = dict(self.profile.follow_recommender)
        suggestions = self.platform.follow_suggestions(
            self.name, params, int(params.get("k", 10))
        )
        if not suggestions:
            return None
        target = pick_suggestion(suggestions, self._rng(round, "follow"))
        return self.platform.follow(self.name, target, FollowAction.FOLLOW)
