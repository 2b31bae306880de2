"""REST client for the platform server."""

from __future__ import annotations

import logging
from typing import Any, Iterable, Optional

import httpx
from tenacity import (
    retry,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from .errors import ServerUnreachable, error_from_payload
from .models import (
    AgentProfile,
    Article,
    Content,
    ContentKind,
    FollowAction,
    FollowEdge,
    ReactionValue,
    RoundClock,
    TimelineMode,
    Website,
)
from .news import IngestResult
from .recsys import Suggestion
from .wire import (
    decode_article,
    decode_clock,
    decode_content,
    decode_follow_edge,
    decode_profile,
    decode_website,
    to_wire,
)

logger = logging.getLogger(__name__)

_PUBLISH_PATHS = {
    ContentKind.POST: "/post",
    ContentKind.COMMENT: "/comment",
    ContentKind.NEWS: "/news",
    ContentKind.SHARE: "/share",
}


class PlatformClient:
    """One simulation client's connection to the platform server.

    ``http`` may be any ``httpx.Client`` (tests pass Starlette's TestClient);
    otherwise one is created against ``base_url``.
    """

    def __init__(
        self,
        base_url: str,
        client_id: str,
        http: Optional[httpx.Client] = None,
        timeout: float = 30.0,
        connect_retries: int = 3,
    ):
        self.base_url = base_url.rstrip("/")
        self.client_id = client_id
        self.connect_retries = max(1, connect_retries)
        self._owns_http = http is None
        self._client = http or httpx.Client(base_url=self.base_url, timeout=timeout)

    def _send(self, method: str, path: str, **kwargs: Any) -> httpx.Response:
        @retry(
            retry=retry_if_exception_type(httpx.TransportError),
            stop=stop_after_attempt(self.connect_retries),
            wait=wait_exponential(multiplier=0.2, max=2.0),
            reraise=True,
        )
        def attempt() -> httpx.Response:
            return self._client.request(method, path, **kwargs)

        try:
            return attempt()
        except httpx.TransportError as e:
            raise ServerUnreachable(f"{method} {self.base_url}{path}: {e}") from e

    def _make_request(
        self,
        method: str,
        path: str,
        body: Optional[dict[str, Any]] = None,
        **params: Any,
    ) -> Any:
        kwargs: dict[str, Any] = {}
        if body is not None:
            kwargs["json"] = to_wire(body)
        query = {k: v for k, v in params.items() if v is not None}
        if query:
            kwargs["params"] = query
        response = self._send(method, path, **kwargs)
        if response.status_code >= 400:
            try:
                payload = response.json()
            except ValueError:
                payload = {"detail": response.text[:200]}
            raise error_from_payload(payload, response.status_code)
        return response.json()

    # -- clock and clients ------------------------------------------------------

    def register_client(
        self,
        role: str = "worker",
        settings: Optional[dict[str, Any]] = None,
        expected_clients: int = 1,
    ) -> RoundClock:
        data = self._make_request(
            "POST",
            "/register_client",
            {
                "client_id": self.client_id,
                "role": role,
                "settings": settings,
                "expected_clients": expected_clients,
            },
        )
        return decode_clock(data["clock"])

    def current_slot(self) -> RoundClock:
        return decode_clock(self._make_request("GET", "/current_slot"))

    def advance_slot(self) -> RoundClock:
        data = self._make_request(
            "POST", "/advance_slot", {"client_id": self.client_id}
        )
        return decode_clock(data)

    def slot_done(self, round: int, finished: bool = False) -> None:
        self._make_request(
            "POST",
            "/slot_done",
            {"client_id": self.client_id, "round": round, "finished": finished},
        )

    # -- agents -----------------------------------------------------------------

    def register_agent(self, profile: AgentProfile) -> str:
        data = self._make_request("POST", "/register_agent", {"profile": profile})
        return str(data["name"])

    def agents(self, owner: Optional[str] = None) -> list[AgentProfile]:
        data = self._make_request("GET", "/agents", owner=owner)
        return [decode_profile(p) for p in data["agents"]]

    def followees(self, agent: str) -> set[str]:
        return set(self._make_request("GET", "/followees", agent=agent)["followees"])

    # -- contents ---------------------------------------------------------------

    def publish(
        self,
        author: str,
        kind: ContentKind,
        text: str,
        parent: Optional[int] = None,
        article: Optional[int] = None,
        shared_from: Optional[int] = None,
        emotions: Iterable[str] = (),
        reply: bool = False,
    ) -> Content:
        path = "/reply" if reply else _PUBLISH_PATHS[ContentKind(kind)]
        data = self._make_request(
            "POST",
            path,
            {
                "author": author,
                "text": text,
                "parent": parent,
                "article": article,
                "shared_from": shared_from,
                "emotions": list(emotions),
            },
        )
        return decode_content(data)

    def react(self, agent: str, content: int, value: ReactionValue) -> None:
        self._make_request(
            "POST",
            "/reaction",
            {"agent": agent, "content": content, "value": ReactionValue(value)},
        )

    def content(self, content_id: int) -> Content:
        return decode_content(self._make_request("GET", "/content", id=content_id))

    def thread(
        self, content_id: int, max_length: Optional[int] = None
    ) -> list[Content]:
        data = self._make_request(
            "GET", "/thread", content=content_id, max_length=max_length
        )
        return [decode_content(c) for c in data["thread"]]

    # -- recommendations and follows -------------------------------------------

    def read(
        self,
        agent: str,
        recommender: dict[str, Any],
        k: int,
        mode: TimelineMode = TimelineMode.READ,
        kinds: Optional[Iterable[ContentKind]] = None,
    ) -> list[Content]:
        data = self._make_request(
            "POST",
            "/read",
            {
                "agent": agent,
                "recommender": recommender,
                "k": k,
                "mode": TimelineMode(mode),
                "kinds": list(kinds) if kinds else None,
            },
        )
        return [decode_content(c) for c in data["contents"]]

    def follow_suggestions(
        self, agent: str, recommender: dict[str, Any], k: int
    ) -> list[Suggestion]:
        data = self._make_request(
            "POST",
            "/follow_suggestions",
            {"agent": agent, "recommender": recommender, "k": k},
        )
        return [
            Suggestion(
                name=s["name"],
                score=float(s["score"]),
                probability=float(s["probability"]),
            )
            for s in data["suggestions"]
        ]

    def follow(
        self, follower: str, followee: str, action: FollowAction
    ) -> FollowEdge:
        data = self._make_request(
            "POST",
            "/follow",
            {
                "follower": follower,
                "followee": followee,
                "action": FollowAction(action),
            },
        )
        return decode_follow_edge(data)

    # -- news -------------------------------------------------------------------

    def ingest_feed(self, website: Website, document: str) -> IngestResult:
        data = self._make_request(
            "POST", "/ingest_feed", {"website": website, "document": document}
        )
        return IngestResult(
            website=decode_website(data["website"]),
            new_ids=[int(i) for i in data["new_ids"]],
            duplicates=int(data["duplicates"]),
            skipped=int(data["skipped"]),
        )

    def article(self, article_id: int) -> Article:
        return decode_article(self._make_request("GET", "/article", id=article_id))

    def pick_article(
        self,
        category: Optional[str] = None,
        leaning: Optional[str] = None,
        seed: int = 0,
    ) -> Optional[Article]:
        data = self._make_request(
            "POST",
            "/pick_article",
            {"category": category, "leaning": leaning, "seed": seed},
        )
        return decode_article(data["article"]) if data["article"] else None

    # -- bookkeeping ------------------------------------------------------------

    def audit(self) -> list[str]:
        return list(self._make_request("GET", "/audit")["violations"])

    def save_manifest(self, simulation: str, manifest: dict[str, Any]) -> None:
        self._make_request(
            "POST",
            "/manifest",
            {
                "client_id": self.client_id,
                "simulation": simulation,
                "manifest": manifest,
            },
        )

    def status(self) -> dict[str, Any]:
        return dict(self._make_request("GET", "/status"))

    def close(self) -> None:
        if self._owns_http:
            self._client.close()

    def __enter__(self) -> PlatformClient:
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()
