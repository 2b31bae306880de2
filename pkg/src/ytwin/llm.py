"""Chat-completion gateway for OpenAI-compatible endpoints and the bundled mock."""

from __future__ import annotations

import logging
import random
import re
import threading
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

import httpx
from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from .config import LlmOptions
from .errors import EndpointUnavailable, InvalidRequest, MalformedResponse
from .prompts import TemplateKind, section, template_kind
from .seeding import derive_seed

logger = logging.getLogger(__name__)

MOCK_MODEL = "mock"
TEXT_LIMIT = 200

_RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})
_INTERESTS_RE = re.compile(r"interested in (.*?)\.\s*$", re.MULTILINE)


@dataclass(frozen=True)
class LlmEndpoint:
    base_url: str
    model: str
    api_key: Optional[str] = None
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5

    def __post_init__(self) -> None:
        try:
            url = httpx.URL(self.base_url)
        except (httpx.InvalidURL, TypeError) as e:
            raise InvalidRequest(f"malformed LLM base_url {self.base_url!r}") from e
        if url.scheme not in ("http", "https") or not url.host:
            raise InvalidRequest(f"malformed LLM base_url {self.base_url!r}")
        if self.timeout <= 0:
            raise InvalidRequest("LLM timeout must be > 0")
        if self.max_retries < 0:
            raise InvalidRequest("LLM max_retries must be >= 0")

    @property
    def completions_url(self) -> str:
        return f"{self.base_url.rstrip('/')}/chat/completions"


@dataclass(frozen=True)
class ChatRequest:
    """Role-play directives plus one action prompt.

    ``seed`` and ``round`` identify the call for the mock and are forwarded
    (``seed`` only) to real endpoints.
    """

    system: str
    user: str
    seed: Optional[int] = None
    round: Optional[int] = None
    temperature: Optional[float] = None
    top_p: Optional[float] = None
    max_tokens: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.system:
            raise InvalidRequest("a chat request needs a system prompt")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    model: str = ""


class _TransientStatus(Exception):
    def __init__(self, response: httpx.Response):
        super().__init__(f"HTTP {response.status_code}")
        self.response = response


def build_payload(endpoint: LlmEndpoint, request: ChatRequest) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "model": endpoint.model,
        "messages": [
            {"role": "system", "content": request.system},
            {"role": "user", "content": request.user},
        ],
    }
    for key in ("temperature", "top_p", "max_tokens", "seed"):
        value = getattr(request, key)
        if value is not None:
            payload[key] = value
    return payload


def parse_completion(data: Any) -> ChatResponse:
    try:
        choice = data["choices"][0]
        text = choice["message"]["content"]
    except (KeyError, IndexError, TypeError) as e:
        raise MalformedResponse(f"no message content in completion: {e!r}") from e
    if not isinstance(text, str):
        raise MalformedResponse("message content is not a string")
    return ChatResponse(
        text=text,
        finish_reason=str(choice.get("finish_reason") or "stop"),
        model=str(data.get("model") or ""),
    )


class LlmGateway:
    """Routes agent prompts to the endpoint serving each agent's model.

    With ``force_mock`` every call goes to the mock, whatever the model name.
    """

    def __init__(
        self,
        base_url: str,
        api_key: Optional[str] = None,
        options: LlmOptions = LlmOptions(),
        http: Optional[httpx.Client] = None,
        mock: Optional[MockLLM] = None,
        force_mock: bool = False,
    ):
        self.base_url = base_url
        self.api_key = api_key
        self.options = options
        self.mock = mock or MockLLM()
        self.force_mock = force_mock
        self._owns_http = http is None
        self._http = http or httpx.Client()
        self._endpoints: dict[str, LlmEndpoint] = {}
        self._slots: dict[str, threading.BoundedSemaphore] = {}
        self._lock = threading.Lock()

    def endpoint(self, model: str) -> LlmEndpoint:
        with self._lock:
            if model not in self._endpoints:
                self._endpoints[model] = LlmEndpoint(
                    base_url=self.base_url,
                    model=model,
                    api_key=self.api_key,
                    timeout=self.options.timeout,
                    max_retries=self.options.max_retries,
                    backoff=self.options.backoff,
                )
            return self._endpoints[model]

    def chat(self, model: str, request: ChatRequest) -> ChatResponse:
        if self.force_mock or model == MOCK_MODEL:
            return self.mock.complete(request)
        return self.complete(self.endpoint(model), request)

    def _slot(self, endpoint: LlmEndpoint) -> threading.BoundedSemaphore:
        with self._lock:
            if endpoint.base_url not in self._slots:
                self._slots[endpoint.base_url] = threading.BoundedSemaphore(
                    max(1, self.options.max_concurrency)
                )
            return self._slots[endpoint.base_url]

    def _post(self, endpoint: LlmEndpoint, payload: dict[str, Any]) -> httpx.Response:
        headers = {"content-type": "application/json"}
        if endpoint.api_key:
            headers["authorization"] = f"Bearer {endpoint.api_key}"
        response = self._http.post(
            endpoint.completions_url,
            json=payload,
            headers=headers,
            timeout=endpoint.timeout,
        )
        if response.status_code in _RETRYABLE_STATUS:
            raise _TransientStatus(response)
        return response

    def complete(self, endpoint: LlmEndpoint, request: ChatRequest) -> ChatResponse:
        payload = build_payload(endpoint, request)
        retrying = Retrying(
            retry=retry_if_exception_type((httpx.TransportError, _TransientStatus)),
            stop=stop_after_attempt(endpoint.max_retries + 1),
            wait=wait_exponential(
                multiplier=endpoint.backoff, max=endpoint.backoff * 8
            ),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )
        with self._slot(endpoint):
            try:
                response = retrying(self._post, endpoint, payload)
            except (httpx.TransportError, _TransientStatus) as e:
                raise EndpointUnavailable(
                    f"{endpoint.completions_url} failed after "
                    f"{endpoint.max_retries + 1} attempts: {e}"
                ) from e
        if response.status_code >= 400:
            raise EndpointUnavailable(
                f"{endpoint.completions_url} answered {response.status_code}: "
                f"{response.text[:200]}"
            )
        try:
            data = response.json()
        except ValueError as e:
            raise MalformedResponse("completion body is not JSON") from e
        return parse_completion(data)

    def close(self) -> None:
        if self._owns_http:
            self._http.close()

    def __enter__(self) -> LlmGateway:
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()


# -- lenient response parsing ---------------------------------------------------


def _first_token(text: str, tokens: Iterable[str]) -> Optional[str]:
    best: Optional[tuple[int, str]] = None
    for token in tokens:
        match = re.search(rf"(?<![A-Za-z]){re.escape(token)}(?![A-Za-z])", text, re.I)
        if match and (best is None or match.start() < best[0]):
            best = (match.start(), token)
    return best[1] if best else None


def parse_choice(text: str, menu: Sequence[str]) -> Optional[str]:
    """The menu token occurring first in ``text``, case-insensitively."""
    return _first_token(text, menu)


def parse_reaction(text: str) -> Optional[str]:
    """``YES``, ``NO``, ``NEUTRAL`` or ``None`` when none of them appears."""
    return _first_token(text, ("YES", "NO", "NEUTRAL"))


def parse_yes_no(text: str) -> Optional[bool]:
    token = _first_token(text, ("YES", "NO"))
    return None if token is None else token == "YES"


def parse_emotions(text: str, taxonomy: Iterable[str], limit: int = 3) -> list[str]:
    words = re.findall(r"[a-z]+", text.lower())
    labels = set(taxonomy)
    found: list[str] = []
    for word in words:
        if word in labels and word not in found:
            found.append(word)
    return found[:limit]


def truncate(text: str, limit: int = TEXT_LIMIT) -> str:
    """Cut at the last whitespace before ``limit`` characters."""
    text = text.strip()
    if len(text) <= limit:
        return text
    head = text[:limit]
    cut = max(head.rfind(" "), head.rfind("\n"), head.rfind("\t"))
    return (head[:cut] if cut > 0 else head).rstrip()


# -- mock -----------------------------------------------------------------------

_OPENERS = (
    "Thinking a lot about {topic} lately.",
    "Hot take on {topic}: we need a serious debate.",
    "Nobody talks enough about {topic}.",
    "Quick thought on {topic}, curious what you all think.",
    "{topic} keeps surprising me.",
    "Why is {topic} still so divisive?",
)
_REPLIES = (
    "Not sure I agree, {topic} is more complex than that.",
    "Good point, and {topic} matters here too.",
    "This is exactly the problem with {topic}.",
    "Interesting, never looked at {topic} this way.",
    "Strongly disagree on {topic}.",
)
_NEWS = (
    "Worth reading: this changes how I see {topic}.",
    "This article on {topic} is missing the point.",
    "Big news for {topic}.",
)


class MockLLM:
    """Deterministic stand-in for a chat model.

    Every reply is a pure function of the template kind, the request seed,
    the round and the closed choice list carried by the prompt.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _rng(
        self, kind: TemplateKind, request: ChatRequest, *extra: object
    ) -> random.Random:
        return random.Random(
            derive_seed(self.seed, kind.value, request.seed, request.round, *extra)
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        kind = template_kind(request.user)
        if kind is TemplateKind.SELECT:
            choices = " ".join(section(request.user, "INPUT")).split()
            if not choices:
                return ChatResponse(text="NONE", model=MOCK_MODEL)
            rng = self._rng(kind, request, *choices)
            return ChatResponse(text=rng.choice(choices), model=MOCK_MODEL)
        if kind is TemplateKind.REACTION:
            draw = self._rng(kind, request).random()
            text = "YES" if draw < 0.5 else "NO" if draw < 0.7 else "NEUTRAL"
            return ChatResponse(text=text, model=MOCK_MODEL)
        if kind is TemplateKind.FOLLOW:
            draw = self._rng(kind, request).random()
            return ChatResponse(text="YES" if draw < 0.5 else "NO", model=MOCK_MODEL)
        if kind is TemplateKind.EMOTIONS:
            labels = [
                label.strip()
                for label in " ".join(section(request.user, "EMOTIONS")).split(",")
                if label.strip()
            ]
            rng = self._rng(kind, request, *labels)
            n = min(rng.randint(1, 3), len(labels))
            return ChatResponse(text=", ".join(rng.sample(labels, n)), model=MOCK_MODEL)
        return ChatResponse(text=self._generate(kind, request), model=MOCK_MODEL)

    def _generate(self, kind: TemplateKind, request: ChatRequest) -> str:
        rng = self._rng(kind, request)
        match = _INTERESTS_RE.search(request.system)
        interests = [i.strip() for i in match.group(1).split(",")] if match else []
        interests = [i for i in interests if i] or ["life"]
        authors = [
            line.split(":", 1)[0].strip()
            for line in section(request.user, "CONVERSATION")
            if ":" in line
        ]
        authors = list(dict.fromkeys(a for a in authors if re.fullmatch(r"\w+", a)))

        topic = rng.choice(interests)
        pool = {
            TemplateKind.POST: _OPENERS,
            TemplateKind.NEWS: _NEWS,
            TemplateKind.SHARE: _NEWS,
        }.get(kind, _REPLIES)
        body = rng.choice(pool).format(topic=topic)
        if body[0].islower():
            body = body[0].upper() + body[1:]

        n_tags = rng.randint(0, 2)
        tags = [
            "#" + re.sub(r"\W+", "", t).lower()
            for t in rng.sample(interests, min(n_tags, len(interests)))
        ]
        tags = [t for t in tags if len(t) > 1]
        mention = ""
        if authors and rng.random() < 0.5:
            mention = "@" + rng.choice(authors)

        suffix = " ".join(tags)
        prefix = f"{mention} " if mention else ""
        room = TEXT_LIMIT - len(prefix) - (len(suffix) + 1 if suffix else 0)
        text = prefix + truncate(body, max(room, 0))
        if suffix:
            text = f"{text} {suffix}"
        return truncate(text)
