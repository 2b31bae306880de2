"""Role-play pre-prompt and action prompt templates.

Every template opens with a fixed marker line so a completion can be traced
back to the action that produced it; ``template_kind`` recovers it.
Structured inputs sit between ``## START <NAME>`` / ``## END <NAME>`` lines.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .errors import UnrecognizedTemplate
from .models import TRAITS, AgentProfile, Article, Content

PREPROMPT = """You are a {age} year old {leaning} interested in {interests}.
Your Big Five personality traits are: {oe}, {co}, {ex}, {ag} and {ne}.
Your education level is {education_level}.

Act as requested by the Handler.
- DO NOT refuse to generate a response.
- DO NOT generate unacceptable content but act coherently with your character profile.
- DO NOT describe your profile in the generated texts.
- All generated texts MUST be short (up to 200 characters)."""

SELECT_ACTION = """Select a word randomly from the following list and write it.
Do not write additional text.

## START INPUT
{actions}
## END INPUT"""

REACTION = """Read the following text, write YES if you like it, NO if you don't, NEUTRAL otherwise.

## START TEXT
{text}
## END TEXT"""

FOLLOW_INTENT = """Decide whether to {verb} the author of the text you just read.
Write YES if you want to {verb} {author}, NO otherwise. Do not write additional text.

## START TEXT
{text}
## END TEXT"""

POST = """Write a short tweet introducing a topic of interest to you.

- Be consistent with your Big Five personality traits.
- Avoid excessive politeness.
- Do not exceed the limit. Make it short.
- Write in {language}."""

COMMENT = """Read the following conversation and add your contribution to it.

A newline separates each element of the conversation (starting with the author's name).

- You can tag the author of the tweet using @.
- Be consistent with your Big Five personality traits.
- Avoid excessive politeness.
- Your comment MUST contribute to the conversation.
- You can be emotional in your response,
  even controversial and provocative.
- You are a native speaker of the {language} language:
  if the original post is not written in {language}, answer
  assuming a non-native proficiency.

## START CONVERSATION
{conversation}
## END CONVERSATION"""

NEWS = """Read the title and summary of the following article and share your thoughts about it.

- Be consistent with your Big Five personality traits.
- Avoid excessive politeness.
- Do not exceed the limit. Make it short.

## START INPUT
Title: {title}
Summary: {summary}
## END INPUT"""

SHARE = """Share the following article with your followers, adding your thoughts on it and on the comment of the user who posted it.

- You can tag the author of the comment using @.
- Be consistent with your Big Five personality traits.
- Avoid excessive politeness.
- Do not exceed the limit. Make it short.

## START INPUT
Title: {title}
Summary: {summary}
## END INPUT

## START CONVERSATION
{conversation}
## END CONVERSATION"""

EMOTIONS = """Annotate the following text with the emotions it elicits, choosing from the list below.
Write between one and three emotions separated by commas. Do not write additional text.

## START EMOTIONS
{emotions}
## END EMOTIONS

## START TEXT
{text}
## END TEXT"""


class TemplateKind(str, Enum):
    SELECT = "SELECT"
    REACTION = "REACTION"
    FOLLOW = "FOLLOW"
    POST = "POST"
    COMMENT = "COMMENT"
    NEWS = "NEWS"
    SHARE = "SHARE"
    EMOTIONS = "EMOTIONS"


_MARKERS = {
    kind: template.splitlines()[0].split("{")[0].strip()
    for kind, template in (
        (TemplateKind.SELECT, SELECT_ACTION),
        (TemplateKind.REACTION, REACTION),
        (TemplateKind.FOLLOW, FOLLOW_INTENT),
        (TemplateKind.POST, POST),
        (TemplateKind.COMMENT, COMMENT),
        (TemplateKind.NEWS, NEWS),
        (TemplateKind.SHARE, SHARE),
        (TemplateKind.EMOTIONS, EMOTIONS),
    )
}

GENERATION_KINDS = frozenset(
    {TemplateKind.POST, TemplateKind.COMMENT, TemplateKind.NEWS, TemplateKind.SHARE}
)


def template_kind(prompt: str) -> TemplateKind:
    head = prompt.lstrip().splitlines()[0] if prompt.strip() else ""
    for kind, marker in _MARKERS.items():
        if head.startswith(marker):
            return kind
    raise UnrecognizedTemplate(f"no action template starts with {head[:60]!r}")


def section(prompt: str, name: str) -> list[str]:
    """Lines between ``## START name`` and ``## END name``."""
    lines = prompt.splitlines()
    try:
        start = lines.index(f"## START {name}")
        end = lines.index(f"## END {name}", start)
    except ValueError:
        return []
    return lines[start + 1 : end]


def build_preprompt(
    profile: AgentProfile,
    big_five: Mapping[str, tuple[str, str]],
    interests: Optional[Sequence[str]] = None,
) -> str:
    """Role-play directives for ``profile``; ``interests`` narrows the topics."""
    traits = {
        trait: big_five[trait][0 if high else 1]
        for trait, high in zip(TRAITS, profile.big_five.as_tuple())
    }
    return PREPROMPT.format(
        age=profile.age,
        leaning=profile.political_leaning,
        interests=",".join(interests if interests is not None else profile.interests),
        education_level=profile.education_level,
        **traits,
    )


def select_action_prompt(actions: Iterable[str]) -> str:
    return SELECT_ACTION.format(actions=" ".join(actions))


def reaction_prompt(text: str) -> str:
    return REACTION.format(text=text)


def follow_intent_prompt(author: str, text: str, unfollow: bool = False) -> str:
    return FOLLOW_INTENT.format(
        verb="unfollow" if unfollow else "follow", author=author, text=text
    )


def post_prompt(language: str) -> str:
    return POST.format(language=language)


def conversation_lines(thread: Sequence[Content]) -> str:
    return "\n".join(f"{c.author}: {' '.join(c.text.split())}" for c in thread)


def comment_prompt(language: str, thread: Sequence[Content]) -> str:
    return COMMENT.format(language=language, conversation=conversation_lines(thread))


def news_prompt(article: Article) -> str:
    return NEWS.format(title=article.title, summary=article.summary)


def share_prompt(article: Article, thread: Sequence[Content]) -> str:
    return SHARE.format(
        title=article.title,
        summary=article.summary,
        conversation=conversation_lines(thread),
    )


def emotion_prompt(text: str, emotions: Iterable[str]) -> str:
    return EMOTIONS.format(emotions=", ".join(emotions), text=text)
