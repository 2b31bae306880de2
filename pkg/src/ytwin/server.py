"""Platform server: REST primitives over a PlatformStore, plus an MCP status surface."""

from __future__ import annotations

import functools
import json
import logging
from typing import Any, Awaitable, Callable, Optional

from fastmcp import FastMCP
from starlette.concurrency import run_in_threadpool
from starlette.requests import Request
from starlette.responses import JSONResponse

from .db import ORCHESTRATOR, WORKER, PlatformStore
from .errors import InvalidRequest, YTwinError
from .models import ContentKind, FollowAction, ReactionValue, TimelineMode
from .news import ingest_feed, pick_article
from .wire import decode_profile, decode_website, to_wire

logger = logging.getLogger(__name__)

Handler = Callable[[dict[str, Any]], Any]


def _int(payload: dict[str, Any], key: str, default: Optional[int] = None) -> int:
    value = payload.get(key, default)
    if value is None:
        raise InvalidRequest(f"missing field: {key}")
    try:
        return int(value)
    except (TypeError, ValueError) as e:
        raise InvalidRequest(f"{key} must be an integer") from e


def _opt_int(payload: dict[str, Any], key: str) -> Optional[int]:
    return None if payload.get(key) is None else _int(payload, key)


def _str(payload: dict[str, Any], key: str) -> str:
    value = payload.get(key)
    if value is None or value == "":
        raise InvalidRequest(f"missing field: {key}")
    return str(value)


async def _payload(request: Request) -> dict[str, Any]:
    if request.method == "GET":
        return dict(request.query_params)
    body = await request.body()
    if not body:
        return {}
    try:
        data = json.loads(body)
    except json.JSONDecodeError as e:
        raise InvalidRequest(f"body is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise InvalidRequest("body must be a JSON object")
    return data


def _endpoint(handler: Handler) -> Callable[[Request], Awaitable[JSONResponse]]:
    """Adapt a sync ``payload -> result`` function to a Starlette route.

    Handlers run in the threadpool; the store serializes its own writes.
    """

    @functools.wraps(handler)
    async def route(request: Request) -> JSONResponse:
        try:
            payload = await _payload(request)
            result = await run_in_threadpool(handler, payload)
        except YTwinError as e:
            logger.debug("%s %s -> %s: %s", request.method, request.url.path, e.code, e)
            return JSONResponse(e.to_payload(), status_code=e.status)
        except (KeyError, TypeError, ValueError) as e:
            err = InvalidRequest(str(e))
            return JSONResponse(err.to_payload(), status_code=err.status)
        return JSONResponse(to_wire(result))

    return route


def create_server(store: PlatformStore) -> FastMCP:
    mcp = FastMCP(
        "YTwin Platform",
        instructions="Read-only views over a running social platform simulation.",
    )

    def route(path: str, methods: list[str]) -> Callable[[Handler], Handler]:
        def register(handler: Handler) -> Handler:
            mcp.custom_route(path, methods=methods)(_endpoint(handler))
            return handler

        return register

    # -- clock and clients ------------------------------------------------------

    @route("/register_client", ["POST"])
    def register_client(p: dict[str, Any]) -> Any:
        role = str(p.get("role") or WORKER)
        clock = store.register_client(
            _str(p, "client_id"),
            role=role,
            settings=p.get("settings") or None,
            expected_clients=_int(p, "expected_clients", 1),
        )
        return {"clock": clock, "role": role}

    @route("/current_slot", ["GET"])
    def current_slot(p: dict[str, Any]) -> Any:
        return store.current_clock()

    @route("/advance_slot", ["POST"])
    def advance_slot(p: dict[str, Any]) -> Any:
        return store.advance_slot(_str(p, "client_id"))

    @route("/slot_done", ["POST"])
    def slot_done(p: dict[str, Any]) -> Any:
        store.slot_done(
            _str(p, "client_id"), _int(p, "round"), bool(p.get("finished", False))
        )
        return {"ok": True}

    # -- agents -----------------------------------------------------------------

    @route("/register_agent", ["POST"])
    def register_agent(p: dict[str, Any]) -> Any:
        profile = p.get("profile")
        if not isinstance(profile, dict):
            raise InvalidRequest("missing field: profile")
        return {"name": store.register_agent(decode_profile(profile))}

    @route("/agents", ["GET"])
    def agents(p: dict[str, Any]) -> Any:
        return {"agents": store.list_agents(p.get("owner") or None)}

    @route("/followees", ["GET"])
    def followees(p: dict[str, Any]) -> Any:
        agent = _str(p, "agent")
        store.require_agent(agent)
        return {"followees": sorted(store.followees(agent))}

    # -- contents ---------------------------------------------------------------

    def publish(kind: ContentKind, p: dict[str, Any]) -> Any:
        return store.publish(
            _str(p, "author"),
            kind,
            str(p.get("text", "")),
            parent=_opt_int(p, "parent"),
            article=_opt_int(p, "article"),
            shared_from=_opt_int(p, "shared_from"),
            emotions=p.get("emotions") or (),
        )

    for path, kind in (
        ("/post", ContentKind.POST),
        ("/comment", ContentKind.COMMENT),
        ("/reply", ContentKind.COMMENT),
        ("/news", ContentKind.NEWS),
        ("/share", ContentKind.SHARE),
    ):
        route(path, ["POST"])(functools.partial(publish, kind))

    @route("/reaction", ["POST"])
    def reaction(p: dict[str, Any]) -> Any:
        return store.react(
            _str(p, "agent"), _int(p, "content"), ReactionValue(_str(p, "value"))
        )

    @route("/content", ["GET"])
    def content(p: dict[str, Any]) -> Any:
        return store.get_content(_int(p, "id"))

    @route("/thread", ["GET"])
    def thread(p: dict[str, Any]) -> Any:
        return {"thread": store.thread(_int(p, "content"), _opt_int(p, "max_length"))}

    # -- recommendations and follows -------------------------------------------

    @route("/read", ["POST"])
    def read(p: dict[str, Any]) -> Any:
        contents = store.timeline(
            _str(p, "agent"),
            dict(p.get("recommender") or {}),
            _int(p, "k", 10),
            TimelineMode(str(p.get("mode") or "READ")),
            kinds=p.get("kinds") or None,
        )
        return {"ids": [c.id for c in contents], "contents": contents}

    @route("/follow_suggestions", ["POST"])
    def follow_suggestions(p: dict[str, Any]) -> Any:
        suggestions = store.follow_candidates(
            _str(p, "agent"), dict(p.get("recommender") or {}), _int(p, "k", 10)
        )
        return {"suggestions": suggestions}

    @route("/follow", ["POST"])
    def follow(p: dict[str, Any]) -> Any:
        return store.set_follow(
            _str(p, "follower"),
            _str(p, "followee"),
            FollowAction(str(p.get("action") or "FOLLOW")),
        )

    # -- news -------------------------------------------------------------------

    @route("/ingest_feed", ["POST"])
    def ingest(p: dict[str, Any]) -> Any:
        website = p.get("website")
        if not isinstance(website, dict):
            raise InvalidRequest("missing field: website")
        return ingest_feed(store, decode_website(website), _str(p, "document"))

    @route("/article", ["GET"])
    def article(p: dict[str, Any]) -> Any:
        return store.get_article(_int(p, "id"))

    @route("/pick_article", ["POST"])
    def pick(p: dict[str, Any]) -> Any:
        clock = store.current_clock()
        article = pick_article(
            store.articles(),
            day_start=clock.day * store.slots,
            category=p.get("category") or None,
            leaning=p.get("leaning") or None,
            seed=_int(p, "seed", 0),
        )
        return {"article": article}

    # -- bookkeeping ------------------------------------------------------------

    @route("/audit", ["GET"])
    def audit(p: dict[str, Any]) -> Any:
        return {"violations": store.audit()}

    @route("/manifest", ["POST"])
    def manifest(p: dict[str, Any]) -> Any:
        body = p.get("manifest")
        if not isinstance(body, dict):
            raise InvalidRequest("missing field: manifest")
        store.save_manifest(_str(p, "client_id"), _str(p, "simulation"), body)
        return {"ok": True}

    @route("/status", ["GET"])
    def status(p: dict[str, Any]) -> Any:
        return {
            "clock": store.current_clock(),
            "counts": store.counts(),
            "clients": store.clients(),
        }

    # -- MCP surface ------------------------------------------------------------

    @mcp.resource("ytwin://status")
    def get_status() -> str:
        try:
            return format_status(store)
        except Exception as e:
            return f"Status error: {e}"

    @mcp.tool
    def platform_status() -> str:
        """Clock, registered clients and table sizes of the running simulation."""
        try:
            return format_status(store)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool
    def agent_summary(name: str) -> str:
        """Profile, followees and activity counts of one agent.

        Args:
            name: Registered agent name.
        """
        try:
            return format_agent(store, name)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool
    def thread_summary(content_id: int, max_length: int = 10) -> str:
        """The conversation ending at a content, root first.

        Args:
            content_id: Id of the last content of the conversation.
            max_length: Number of trailing messages to show.
        """
        try:
            lines = [
                f"[{c.id}] {c.author} ({c.kind.value}, round {c.round}): {c.text}"
                for c in store.thread(content_id, max_length)
            ]
            return "\n".join(lines)
        except Exception as e:
            return f"Error: {e}"

    return mcp


def format_status(store: PlatformStore) -> str:
    clock = store.current_clock()
    counts = store.counts()
    clients = store.clients()
    orchestrators = [c["client_id"] for c in clients if c["role"] == ORCHESTRATOR]
    return (
        "YTwin Platform\n"
        f"- Simulation: {store.settings.get('simulation') or 'unconfigured'}\n"
        f"- Clock: day {clock.day}, slot {clock.slot} (round {clock.round})\n"
        f"- Clients: {len(clients)} (orchestrator: "
        f"{orchestrators[0] if orchestrators else 'none'})\n"
        f"- Agents: {counts['user_mgmt']}\n"
        f"- Contents: {counts['post']}\n"
        f"- Reactions: {counts['reactions']}\n"
        f"- Follow events: {counts['follow']}\n"
        f"- Articles: {counts['articles']}\n"
    )


def format_agent(store: PlatformStore, name: str) -> str:
    profile = store.get_agent(name)
    followees = sorted(store.followees(name))
    return (
        f"## {profile.name}\n"
        f"{profile.age} year old {profile.political_leaning}, "
        f"{profile.education_level}, {profile.nationality}\n"
        f"Interests: {', '.join(profile.interests)}\n"
        f"Owner: {profile.owner} | LLM: {profile.llm_model} | "
        f"joined round {profile.joined_round}\n"
        f"Follows {len(followees)}: {', '.join(followees) or '-'}\n"
    )


def serve(db_path: str, host: str = "127.0.0.1", port: int = 5000) -> None:
    """Run the platform server over HTTP until interrupted."""
    store = PlatformStore(db_path)
    logger.info("Serving %s on http://%s:%d", db_path, host, port)
    try:
        create_server(store).run(transport="http", host=host, port=port)
    finally:
        store.close()
