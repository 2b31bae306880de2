"""SQLite store backing the platform server.

Tables mirror the platform's data model: ``user_mgmt`` for profiles,
``post`` with its ``mentions``/``hashtags``/``emotions``/``reactions``
satellites, ``websites``/``articles`` for news, the append-only ``follow``
log with its materialized ``followees`` adjacency, and ``rounds`` for the
clock. Bookkeeping tables hold client registrations, settings, the timeline
log with impressions, and persisted run manifests.
"""

from __future__ import annotations

import json
import logging
import sqlite3
import threading
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Optional

from .errors import (
    BarrierPending,
    ClockDesync,
    DanglingReference,
    DuplicateName,
    EmptyPool,
    InvalidEmotion,
    InvalidRequest,
    KindFieldMismatch,
    SelfFollow,
    SettingsMismatch,
    UnauthorizedAdvance,
    UnknownAgent,
    UnknownAuthor,
    UnknownClient,
    UnknownContent,
    YTwinError,
)
from .models import (
    GOEMOTIONS,
    AgentProfile,
    Article,
    Content,
    ContentKind,
    EmotionTaxonomy,
    FollowAction,
    FollowEdge,
    IntRange,
    ProfileBounds,
    Reaction,
    ReactionValue,
    RoundClock,
    TimelineMode,
    Website,
    check_content,
    check_content_fields,
    extract_annotations,
    validate_profile,
)
from .recsys import (
    ContentRecommender,
    FollowRecommender,
    Suggestion,
    build_graph_view,
    rank_content,
    shortlist_follow,
)
from .seeding import derive_seed
from .wire import decode_profile, to_wire

logger = logging.getLogger(__name__)

SCHEMA = """
CREATE TABLE IF NOT EXISTS user_mgmt (
    name TEXT PRIMARY KEY,
    owner TEXT NOT NULL,
    political_leaning TEXT NOT NULL,
    joined_round INTEGER NOT NULL,
    profile TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_user_owner ON user_mgmt(owner);

CREATE TABLE IF NOT EXISTS websites (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    name TEXT NOT NULL,
    rss_url TEXT NOT NULL UNIQUE,
    leaning TEXT NOT NULL,
    category TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS articles (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    website_id INTEGER NOT NULL REFERENCES websites(id),
    title TEXT NOT NULL,
    summary TEXT NOT NULL,
    link TEXT NOT NULL,
    fetched_round INTEGER NOT NULL,
    UNIQUE (website_id, link)
);

CREATE TABLE IF NOT EXISTS post (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    author TEXT NOT NULL REFERENCES user_mgmt(name),
    kind TEXT NOT NULL,
    text TEXT NOT NULL,
    thread_root INTEGER REFERENCES post(id),
    parent INTEGER REFERENCES post(id),
    article_id INTEGER REFERENCES articles(id),
    shared_from INTEGER REFERENCES post(id),
    shared_via INTEGER REFERENCES post(id),
    round INTEGER NOT NULL,
    -- user_mgmt rowid high-water mark when published; mentions resolve against it
    agents_seen INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS idx_post_round ON post(round);
CREATE INDEX IF NOT EXISTS idx_post_author ON post(author);
CREATE INDEX IF NOT EXISTS idx_post_root ON post(thread_root);

CREATE TABLE IF NOT EXISTS mentions (
    content_id INTEGER NOT NULL REFERENCES post(id),
    agent TEXT NOT NULL REFERENCES user_mgmt(name),
    round INTEGER NOT NULL,
    PRIMARY KEY (content_id, agent)
);
CREATE INDEX IF NOT EXISTS idx_mentions_agent ON mentions(agent, round);

CREATE TABLE IF NOT EXISTS hashtags (
    content_id INTEGER NOT NULL REFERENCES post(id),
    tag TEXT NOT NULL,
    PRIMARY KEY (content_id, tag)
);
CREATE INDEX IF NOT EXISTS idx_hashtags_tag ON hashtags(tag);

CREATE TABLE IF NOT EXISTS emotions (
    content_id INTEGER NOT NULL REFERENCES post(id),
    emotion TEXT NOT NULL,
    PRIMARY KEY (content_id, emotion)
);

CREATE TABLE IF NOT EXISTS reactions (
    agent TEXT NOT NULL REFERENCES user_mgmt(name),
    content_id INTEGER NOT NULL REFERENCES post(id),
    value TEXT NOT NULL,
    round INTEGER NOT NULL,
    PRIMARY KEY (agent, content_id)
);
CREATE INDEX IF NOT EXISTS idx_reactions_content ON reactions(content_id);

CREATE TABLE IF NOT EXISTS follow (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    follower TEXT NOT NULL REFERENCES user_mgmt(name),
    followee TEXT NOT NULL REFERENCES user_mgmt(name),
    action TEXT NOT NULL,
    round INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS followees (
    follower TEXT NOT NULL,
    followee TEXT NOT NULL,
    PRIMARY KEY (follower, followee)
);

CREATE TABLE IF NOT EXISTS rounds (
    round INTEGER PRIMARY KEY,
    day INTEGER NOT NULL,
    slot INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS clients (
    client_id TEXT PRIMARY KEY,
    simulation TEXT NOT NULL,
    role TEXT NOT NULL,
    registered_round INTEGER NOT NULL,
    done_round INTEGER NOT NULL,
    finished INTEGER NOT NULL DEFAULT 0
);

CREATE TABLE IF NOT EXISTS settings (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS timeline_log (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    round INTEGER NOT NULL,
    agent TEXT NOT NULL,
    mode TEXT NOT NULL,
    recommender TEXT NOT NULL,
    k INTEGER NOT NULL,
    followee_visible INTEGER NOT NULL,
    followee_returned INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS impressions (
    call_id INTEGER NOT NULL REFERENCES timeline_log(id),
    content_id INTEGER NOT NULL REFERENCES post(id),
    position INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_impressions_content ON impressions(content_id);

CREATE TABLE IF NOT EXISTS run_manifests (
    client_id TEXT NOT NULL,
    simulation TEXT NOT NULL,
    payload TEXT NOT NULL,
    PRIMARY KEY (client_id, simulation)
);
"""

DEFAULT_SETTINGS: dict[str, Any] = {
    "simulation": "",
    "slots": 24,
    "visibility_rounds": 36,
    "emotions": list(GOEMOTIONS),
    "age": {"min": 0, "max": 200},
    "n_interests": {"min": 1, "max": 1000},
    "popularity": "net",
}

ORCHESTRATOR = "orchestrator"
WORKER = "worker"


def _placeholders(n: int) -> str:
    return ",".join("?" * n)


class PlatformStore:
    """All platform state behind one connection; mutations are serialized."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA foreign_keys = ON")
        if self.path != ":memory:":
            self._conn.execute("PRAGMA journal_mode = WAL")
        with self._conn:
            self._conn.executescript(SCHEMA)
            self._conn.execute(
                "INSERT OR IGNORE INTO rounds(round, day, slot) VALUES (0, 0, 0)"
            )
        self._names: set[str] = {
            row["name"] for row in self._conn.execute("SELECT name FROM user_mgmt")
        }
        self._settings: Optional[dict[str, Any]] = None

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self) -> PlatformStore:
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()

    def _query(self, sql: str, params: Sequence[Any] = ()) -> list[sqlite3.Row]:
        with self._lock:
            return self._conn.execute(sql, params).fetchall()

    def query(self, sql: str, params: Sequence[Any] = ()) -> list[dict[str, Any]]:
        """Rows of a read-only query as dicts, for exports and audits."""
        return [dict(row) for row in self._query(sql, params)]

    # -- settings and clients -------------------------------------------------

    @property
    def settings(self) -> dict[str, Any]:
        if self._settings is None:
            rows = self._query("SELECT key, value FROM settings")
            merged = dict(DEFAULT_SETTINGS)
            merged.update({row["key"]: json.loads(row["value"]) for row in rows})
            self._settings = merged
        return self._settings

    @property
    def slots(self) -> int:
        return int(self.settings["slots"])

    @property
    def taxonomy(self) -> EmotionTaxonomy:
        return EmotionTaxonomy(tuple(self.settings["emotions"]))

    @property
    def bounds(self) -> ProfileBounds:
        age, n = self.settings["age"], self.settings["n_interests"]
        return ProfileBounds(
            age=IntRange(int(age["min"]), int(age["max"])),
            n_interests=IntRange(int(n["min"]), int(n["max"])),
        )

    def configure(self, settings: dict[str, Any]) -> None:
        """Store simulation settings; a second, different configuration is refused."""
        with self._lock:
            stored = {
                row["key"]: json.loads(row["value"])
                for row in self._conn.execute("SELECT key, value FROM settings")
            }
            if stored:
                conflicts = sorted(
                    key
                    for key, value in settings.items()
                    if key in stored and stored[key] != to_wire(value)
                )
                if conflicts:
                    raise SettingsMismatch(
                        f"settings differ from the stored ones: {', '.join(conflicts)}"
                    )
            with self._conn:
                self._conn.executemany(
                    "INSERT OR REPLACE INTO settings(key, value) VALUES (?, ?)",
                    [(k, json.dumps(to_wire(v))) for k, v in settings.items()],
                )
            self._settings = None

    def register_client(
        self,
        client_id: str,
        role: str = WORKER,
        settings: Optional[dict[str, Any]] = None,
        expected_clients: int = 1,
    ) -> RoundClock:
        if role not in (ORCHESTRATOR, WORKER):
            raise InvalidRequest(f"unknown client role: {role!r}")
        if not client_id:
            raise InvalidRequest("client_id must not be empty")
        with self._lock:
            if settings:
                self.configure(settings)
            if role == ORCHESTRATOR:
                rows = self._conn.execute(
                    "SELECT client_id FROM clients WHERE role = ? AND client_id != ?",
                    (ORCHESTRATOR, client_id),
                ).fetchall()
                if rows:
                    raise InvalidRequest(
                        f"orchestrator already registered: {rows[0]['client_id']}"
                    )
                self.configure({"expected_clients": expected_clients})
            clock = self.current_clock()
            with self._conn:
                self._conn.execute(
                    """
                    INSERT INTO clients(client_id, simulation, role,
                                        registered_round, done_round)
                    VALUES (?, ?, ?, ?, ?)
                    ON CONFLICT(client_id) DO UPDATE SET role = excluded.role,
                                                         finished = 0
                    """,
                    (
                        client_id,
                        str(self.settings.get("simulation", "")),
                        role,
                        clock.round,
                        clock.round - 1,
                    ),
                )
        logger.info(
            "Registered client %s as %s at round %d", client_id, role, clock.round
        )
        return clock

    def _client(self, client_id: str) -> sqlite3.Row:
        rows = self._query("SELECT * FROM clients WHERE client_id = ?", (client_id,))
        if not rows:
            raise UnknownClient(f"client not registered: {client_id}")
        return rows[0]

    def clients(self) -> list[dict[str, Any]]:
        rows = self._query("SELECT * FROM clients ORDER BY client_id")
        return [dict(row) for row in rows]

    # -- clock ------------------------------------------------------------------

    def current_clock(self) -> RoundClock:
        rows = self._query("SELECT MAX(round) AS r FROM rounds")
        return RoundClock.from_round(int(rows[0]["r"] or 0), self.slots)

    def slot_done(self, client_id: str, round: int, finished: bool = False) -> None:
        with self._lock:
            self._client(client_id)
            current = self.current_clock().round
            if round != current:
                raise ClockDesync(
                    f"{client_id} finished round {round} but the clock is at {current}"
                )
            with self._conn:
                self._conn.execute(
                    "UPDATE clients SET done_round = ?, finished = ? "
                    "WHERE client_id = ?",
                    (round, int(finished), client_id),
                )

    def advance_slot(self, client_id: str) -> RoundClock:
        """Tick the clock once every registered client finished the current round."""
        with self._lock:
            client = self._client(client_id)
            if client["role"] != ORCHESTRATOR:
                raise UnauthorizedAdvance(f"{client_id} is not the orchestrator")
            clock = self.current_clock()
            expected = int(self.settings.get("expected_clients", 1))
            clients = self._conn.execute(
                "SELECT client_id, done_round, finished FROM clients"
            ).fetchall()
            if len(clients) < expected:
                raise BarrierPending(
                    f"{len(clients)} of {expected} clients registered"
                )
            pending = [
                row["client_id"]
                for row in clients
                if row["client_id"] != client_id
                and not row["finished"]
                and row["done_round"] < clock.round
            ]
            if pending:
                raise BarrierPending(f"waiting for {', '.join(pending)}")
            nxt = clock.advanced(self.slots)
            with self._conn:
                self._conn.execute(
                    "INSERT INTO rounds(round, day, slot) VALUES (?, ?, ?)",
                    (nxt.round, nxt.day, nxt.slot),
                )
                self._conn.execute(
                    "UPDATE clients SET done_round = ? WHERE client_id = ?",
                    (clock.round, client_id),
                )
            return nxt

    # -- agents -----------------------------------------------------------------

    def register_agent(self, profile: AgentProfile) -> str:
        validate_profile(profile, self.bounds)
        with self._lock:
            if profile.name in self._names:
                raise DuplicateName(f"agent already registered: {profile.name}")
            clock = self.current_clock()
            record = to_wire(profile)
            record["joined_round"] = clock.round
            with self._conn:
                self._conn.execute(
                    """
                    INSERT INTO user_mgmt(name, owner, political_leaning,
                                          joined_round, profile)
                    VALUES (?, ?, ?, ?, ?)
                    """,
                    (
                        profile.name,
                        profile.owner,
                        profile.political_leaning,
                        clock.round,
                        json.dumps(record, sort_keys=True),
                    ),
                )
            self._names.add(profile.name)
        return profile.name

    def has_agent(self, name: str) -> bool:
        return name in self._names

    def require_agent(self, name: str) -> None:
        if name not in self._names:
            raise UnknownAgent(f"unknown agent: {name}")

    def get_agent(self, name: str) -> AgentProfile:
        rows = self._query("SELECT profile FROM user_mgmt WHERE name = ?", (name,))
        if not rows:
            raise UnknownAgent(f"unknown agent: {name}")
        return decode_profile(json.loads(rows[0]["profile"]))

    def list_agents(self, owner: Optional[str] = None) -> list[AgentProfile]:
        if owner is None:
            rows = self._query("SELECT profile FROM user_mgmt ORDER BY rowid")
        else:
            rows = self._query(
                "SELECT profile FROM user_mgmt WHERE owner = ? ORDER BY rowid", (owner,)
            )
        return [decode_profile(json.loads(row["profile"])) for row in rows]

    def agent_names(self) -> list[str]:
        return sorted(self._names)

    def leanings(self) -> dict[str, str]:
        rows = self._query("SELECT name, political_leaning FROM user_mgmt")
        return {row["name"]: row["political_leaning"] for row in rows}

    # -- contents ---------------------------------------------------------------

    def _row(self, content_id: int) -> sqlite3.Row:
        rows = self._query("SELECT * FROM post WHERE id = ?", (content_id,))
        if not rows:
            raise DanglingReference(f"no content {content_id}")
        return rows[0]

    def publish(
        self,
        author: str,
        kind: ContentKind | str,
        text: str,
        parent: Optional[int] = None,
        article: Optional[int] = None,
        shared_from: Optional[int] = None,
        emotions: Iterable[str] = (),
    ) -> Content:
        kind = ContentKind(kind)
        emotions = list(dict.fromkeys(emotions))
        if author not in self._names:
            raise UnknownAuthor(f"unknown author: {author}")
        check_content_fields(kind, parent, article, shared_from)
        unknown = self.taxonomy.unknown(emotions)
        if unknown:
            raise InvalidEmotion(f"not in the emotion taxonomy: {', '.join(unknown)}")

        with self._lock:
            thread_root: Optional[int] = None
            shared_via: Optional[int] = None
            if kind is ContentKind.COMMENT:
                assert parent is not None
                thread_root = int(self._row(parent)["thread_root"])
            elif kind is ContentKind.NEWS:
                assert article is not None
                self.get_article(article)
            elif kind is ContentKind.SHARE:
                assert shared_from is not None
                source = self._row(shared_from)
                if source["kind"] not in (
                    ContentKind.NEWS.value,
                    ContentKind.SHARE.value,
                ):
                    raise KindFieldMismatch(
                        f"shares target NEWS or SHARE, content {shared_from} is "
                        f"{source['kind']}"
                    )
                if article is not None and article != source["article_id"]:
                    raise KindFieldMismatch("article differs from the shared news")
                shared_via = int(source["id"])
                if source["kind"] == ContentKind.NEWS.value:
                    shared_from = int(source["id"])
                else:
                    shared_from = int(source["shared_from"])
                article = int(source["article_id"])

            clock = self.current_clock()
            mentions, hashtags = extract_annotations(text, self._names)
            with self._conn:
                cursor = self._conn.execute(
                    """
                    INSERT INTO post(author, kind, text, thread_root, parent,
                                     article_id, shared_from, shared_via, round,
                                     agents_seen)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?,
                            (SELECT COALESCE(MAX(rowid), 0) FROM user_mgmt))
                    """,
                    (
                        author,
                        kind.value,
                        text,
                        thread_root,
                        parent,
                        article,
                        shared_from,
                        shared_via,
                        clock.round,
                    ),
                )
                content_id = int(cursor.lastrowid or 0)
                if thread_root is None:
                    thread_root = content_id
                    self._conn.execute(
                        "UPDATE post SET thread_root = ? WHERE id = ?",
                        (content_id, content_id),
                    )
                self._conn.executemany(
                    "INSERT INTO mentions(content_id, agent, round) VALUES (?, ?, ?)",
                    [(content_id, m, clock.round) for m in mentions],
                )
                self._conn.executemany(
                    "INSERT INTO hashtags(content_id, tag) VALUES (?, ?)",
                    [(content_id, h) for h in hashtags],
                )
                self._conn.executemany(
                    "INSERT INTO emotions(content_id, emotion) VALUES (?, ?)",
                    [(content_id, e) for e in emotions],
                )

        return Content(
            id=content_id,
            author=author,
            kind=kind,
            text=text,
            thread_root=thread_root,
            round=clock.round,
            parent=parent,
            article=article,
            shared_from=shared_from,
            shared_via=shared_via,
            mentions=tuple(mentions),
            hashtags=tuple(hashtags),
            emotions=tuple(emotions),
        )

    def get_content(self, content_id: int) -> Content:
        contents = self.get_contents([content_id])
        if not contents:
            raise UnknownContent(f"unknown content: {content_id}")
        return contents[0]

    def get_contents(self, ids: Sequence[int]) -> list[Content]:
        """Full contents in the order of ``ids``; unknown ids are skipped."""
        if not ids:
            return []
        marks = _placeholders(len(ids))
        with self._lock:
            rows = {
                row["id"]: row
                for row in self._conn.execute(
                    f"SELECT * FROM post WHERE id IN ({marks})", list(ids)
                )
            }
            extras: dict[str, dict[int, list[str]]] = {}
            for table, column in (
                ("mentions", "agent"),
                ("hashtags", "tag"),
                ("emotions", "emotion"),
            ):
                bucket: dict[int, list[str]] = {}
                for row in self._conn.execute(
                    f"SELECT content_id, {column} AS v FROM {table} "
                    f"WHERE content_id IN ({marks}) ORDER BY rowid",
                    list(ids),
                ):
                    bucket.setdefault(row["content_id"], []).append(row["v"])
                extras[table] = bucket
        out = []
        for cid in ids:
            row = rows.get(cid)
            if row is None:
                continue
            out.append(
                Content(
                    id=row["id"],
                    author=row["author"],
                    kind=ContentKind(row["kind"]),
                    text=row["text"],
                    thread_root=row["thread_root"],
                    round=row["round"],
                    parent=row["parent"],
                    article=row["article_id"],
                    shared_from=row["shared_from"],
                    shared_via=row["shared_via"],
                    mentions=tuple(extras["mentions"].get(cid, ())),
                    hashtags=tuple(extras["hashtags"].get(cid, ())),
                    emotions=tuple(extras["emotions"].get(cid, ())),
                )
            )
        return out

    def thread(
        self, content_id: int, max_length: Optional[int] = None
    ) -> list[Content]:
        """Root-to-leaf path ending at ``content_id``, trimmed to the last entries."""
        path: list[int] = []
        current: Optional[int] = content_id
        while current is not None:
            rows = self._query("SELECT parent FROM post WHERE id = ?", (current,))
            if not rows:
                raise UnknownContent(f"unknown content: {current}")
            path.append(current)
            current = rows[0]["parent"]
        path.reverse()
        if max_length is not None:
            path = path[-max_length:] if max_length > 0 else []
        return self.get_contents(path)

    # -- reactions --------------------------------------------------------------

    def react(
        self, agent: str, content_id: int, value: ReactionValue | str
    ) -> Reaction:
        value = ReactionValue(value)
        self.require_agent(agent)
        with self._lock:
            if not self._query("SELECT 1 FROM post WHERE id = ?", (content_id,)):
                raise UnknownContent(f"unknown content: {content_id}")
            clock = self.current_clock()
            with self._conn:
                self._conn.execute(
                    """
                    INSERT INTO reactions(agent, content_id, value, round)
                    VALUES (?, ?, ?, ?)
                    ON CONFLICT(agent, content_id)
                    DO UPDATE SET value = excluded.value, round = excluded.round
                    """,
                    (agent, content_id, value.value, clock.round),
                )
        return Reaction(agent=agent, content=content_id, value=value, round=clock.round)

    def reactions(self, content_id: Optional[int] = None) -> list[Reaction]:
        sql = "SELECT * FROM reactions"
        params: tuple[Any, ...] = ()
        if content_id is not None:
            sql += " WHERE content_id = ?"
            params = (content_id,)
        return [
            Reaction(
                agent=row["agent"],
                content=row["content_id"],
                value=ReactionValue(row["value"]),
                round=row["round"],
            )
            for row in self._query(sql + " ORDER BY rowid", params)
        ]

    def _popularity_sql(self) -> str:
        if self.settings.get("popularity") == "engagement":
            return "COUNT(r.value)"
        return (
            "COALESCE(SUM(CASE r.value WHEN 'LIKE' THEN 1 "
            "WHEN 'DISLIKE' THEN -1 ELSE 0 END), 0)"
        )

    def popularity(self, content_id: int) -> int:
        rows = self._query(
            f"SELECT {self._popularity_sql()} AS score FROM reactions r "
            "WHERE r.content_id = ?",
            (content_id,),
        )
        return int(rows[0]["score"] or 0)

    # -- follow graph -----------------------------------------------------------

    def set_follow(
        self, follower: str, followee: str, action: FollowAction | str
    ) -> FollowEdge:
        action = FollowAction(action)
        if follower == followee:
            raise SelfFollow(f"{follower} cannot follow itself")
        self.require_agent(follower)
        self.require_agent(followee)
        with self._lock:
            clock = self.current_clock()
            with self._conn:
                self._conn.execute(
                    "INSERT INTO follow(follower, followee, action, round) "
                    "VALUES (?, ?, ?, ?)",
                    (follower, followee, action.value, clock.round),
                )
                if action is FollowAction.FOLLOW:
                    self._conn.execute(
                        "INSERT OR IGNORE INTO followees(follower, followee) "
                        "VALUES (?, ?)",
                        (follower, followee),
                    )
                else:
                    self._conn.execute(
                        "DELETE FROM followees WHERE follower = ? AND followee = ?",
                        (follower, followee),
                    )
        return FollowEdge(
            follower=follower, followee=followee, action=action, round=clock.round
        )

    def followees(self, agent: str) -> set[str]:
        rows = self._query(
            "SELECT followee FROM followees WHERE follower = ?", (agent,)
        )
        return {row["followee"] for row in rows}

    def followee_map(self) -> dict[str, set[str]]:
        graph: dict[str, set[str]] = {}
        for row in self._query("SELECT follower, followee FROM followees"):
            graph.setdefault(row["follower"], set()).add(row["followee"])
        return graph

    def follow_events(self) -> list[FollowEdge]:
        return [
            FollowEdge(
                follower=row["follower"],
                followee=row["followee"],
                action=FollowAction(row["action"]),
                round=row["round"],
            )
            for row in self._query("SELECT * FROM follow ORDER BY id")
        ]

    # -- recommendations --------------------------------------------------------

    def timeline(
        self,
        agent: str,
        recommender: dict[str, Any],
        k: int,
        mode: TimelineMode | str = TimelineMode.READ,
        kinds: Optional[Iterable[ContentKind | str]] = None,
    ) -> list[Content]:
        """Recommended contents for ``agent``; every call is logged as impressions."""
        mode = TimelineMode(mode)
        self.require_agent(agent)
        rec = ContentRecommender.from_params({**recommender, "k": k})
        with self._lock:
            clock = self.current_clock()
            window = clock.round - int(self.settings["visibility_rounds"])
            sql = [
                f"SELECT p.id, p.author, p.kind, p.round, p.thread_root, "
                f"{self._popularity_sql()} AS score "
                "FROM post p LEFT JOIN reactions r ON r.content_id = p.id "
                "WHERE p.round >= ? AND p.author != ?"
            ]
            params: list[Any] = [window, agent]
            if kinds:
                kind_values = [ContentKind(k).value for k in kinds]
                sql.append(f"AND p.kind IN ({_placeholders(len(kind_values))})")
                params.extend(kind_values)
            if mode is TimelineMode.REPLY:
                # pending mentions: not yet answered by the mentioned agent
                sql.append(
                    "AND p.id IN (SELECT content_id FROM mentions WHERE agent = ?) "
                    "AND NOT EXISTS (SELECT 1 FROM post a "
                    "WHERE a.parent = p.id AND a.author = ?)"
                )
                params.extend([agent, agent])
            elif mode is TimelineMode.SEARCH:
                tags = [
                    row["tag"]
                    for row in self._conn.execute(
                        "SELECT DISTINCT h.tag FROM hashtags h "
                        "JOIN post p ON p.id = h.content_id "
                        "WHERE p.author = ? AND p.round >= ?",
                        (agent, window),
                    )
                ]
                if not tags:
                    self._log_timeline(clock.round, agent, mode, rec, 0, [], set())
                    return []
                sql.append(
                    "AND p.id IN (SELECT content_id FROM hashtags "
                    f"WHERE tag IN ({_placeholders(len(tags))}))"
                )
                params.extend(tags)
            sql.append("GROUP BY p.id")
            rows = self._conn.execute(" ".join(sql), params).fetchall()

            candidates = [
                Content(
                    id=row["id"],
                    author=row["author"],
                    kind=ContentKind(row["kind"]),
                    text="",
                    thread_root=row["thread_root"],
                    round=row["round"],
                )
                for row in rows
            ]
            popularity = {row["id"]: int(row["score"]) for row in rows}
            followees = self.followees(agent)
            call_no = self._conn.execute(
                "SELECT COUNT(*) AS n FROM timeline_log WHERE agent = ? AND round = ?",
                (agent, clock.round),
            ).fetchone()["n"]
            seeded = ContentRecommender(
                variant=rec.variant,
                k=rec.k,
                non_follower_fraction=rec.non_follower_fraction,
                seed=derive_seed(rec.seed, agent, clock.round, mode.value, call_no),
            )
            ids = rank_content(candidates, followees, agent, seeded, popularity)
            followed_ids = {c.id for c in candidates if c.author in followees}
            self._log_timeline(
                clock.round, agent, mode, rec, len(followed_ids), ids, followed_ids
            )
            return self.get_contents(ids)

    def _log_timeline(
        self,
        round: int,
        agent: str,
        mode: TimelineMode,
        rec: ContentRecommender,
        visible_followed: int,
        ids: list[int],
        followed_ids: set[int],
    ) -> None:
        with self._conn:
            cursor = self._conn.execute(
                """
                INSERT INTO timeline_log(round, agent, mode, recommender, k,
                                         followee_visible, followee_returned)
                VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    round,
                    agent,
                    mode.value,
                    rec.variant,
                    rec.k,
                    visible_followed,
                    sum(1 for i in ids if i in followed_ids),
                ),
            )
            self._conn.executemany(
                "INSERT INTO impressions(call_id, content_id, position) "
                "VALUES (?, ?, ?)",
                [(cursor.lastrowid, cid, pos) for pos, cid in enumerate(ids)],
            )

    def timeline_log(self) -> list[dict[str, Any]]:
        rows = self._query("SELECT * FROM timeline_log ORDER BY id")
        return [dict(row) for row in rows]

    def follow_candidates(
        self, agent: str, recommender: dict[str, Any], k: int
    ) -> list[Suggestion]:
        self.require_agent(agent)
        rec = FollowRecommender.from_params({**recommender, "k": k})
        with self._lock:
            clock = self.current_clock()
            seeded = FollowRecommender(
                variant=rec.variant,
                k=rec.k,
                leaning_bias=rec.leaning_bias,
                seed=derive_seed(rec.seed, agent, clock.round, "follow"),
            )
            followee_map = self.followee_map()
            graph = build_graph_view(self._names, followee_map)
            try:
                return shortlist_follow(
                    graph,
                    agent,
                    seeded,
                    followee_map.get(agent, set()),
                    self.leanings(),
                )
            except EmptyPool:
                return []

    # -- news -------------------------------------------------------------------

    def upsert_website(
        self,
        name: str,
        rss_url: str,
        leaning: str = "UNKNOWN",
        category: str = "politics",
    ) -> Website:
        with self._lock:
            with self._conn:
                self._conn.execute(
                    """
                    INSERT INTO websites(name, rss_url, leaning, category)
                    VALUES (?, ?, ?, ?)
                    ON CONFLICT(rss_url) DO UPDATE SET name = excluded.name,
                        leaning = excluded.leaning, category = excluded.category
                    """,
                    (name, rss_url, leaning or "UNKNOWN", category or "politics"),
                )
            row = self._conn.execute(
                "SELECT * FROM websites WHERE rss_url = ?", (rss_url,)
            ).fetchone()
        return self._website(row)

    @staticmethod
    def _website(row: sqlite3.Row) -> Website:
        return Website(
            id=row["id"],
            name=row["name"],
            rss_url=row["rss_url"],
            leaning=row["leaning"],
            category=row["category"],
        )

    @staticmethod
    def _article(row: sqlite3.Row) -> Article:
        return Article(
            id=row["id"],
            website=row["website_id"],
            title=row["title"],
            summary=row["summary"],
            link=row["link"],
            fetched_round=row["fetched_round"],
        )

    def get_website(self, website_id: int) -> Website:
        rows = self._query("SELECT * FROM websites WHERE id = ?", (website_id,))
        if not rows:
            raise DanglingReference(f"no website {website_id}")
        return self._website(rows[0])

    def add_article(
        self, website_id: int, title: str, summary: str, link: str
    ) -> Optional[int]:
        """Insert an article; ``None`` when (website, link) is already stored."""
        with self._lock:
            self.get_website(website_id)
            clock = self.current_clock()
            with self._conn:
                cursor = self._conn.execute(
                    """
                    INSERT OR IGNORE INTO articles(website_id, title, summary, link,
                                                   fetched_round)
                    VALUES (?, ?, ?, ?, ?)
                    """,
                    (website_id, title, summary, link, clock.round),
                )
            if cursor.rowcount == 0:
                return None
            return int(cursor.lastrowid or 0)

    def get_article(self, article_id: int) -> Article:
        rows = self._query("SELECT * FROM articles WHERE id = ?", (article_id,))
        if not rows:
            raise DanglingReference(f"no article {article_id}")
        return self._article(rows[0])

    def articles(
        self, since_round: Optional[int] = None
    ) -> list[tuple[Article, Website]]:
        sql = (
            "SELECT a.*, w.id AS w_id, w.name AS w_name, w.rss_url AS w_rss_url, "
            "w.leaning AS w_leaning, w.category AS w_category "
            "FROM articles a JOIN websites w ON w.id = a.website_id"
        )
        params: tuple[Any, ...] = ()
        if since_round is not None:
            sql += " WHERE a.fetched_round >= ?"
            params = (since_round,)
        out = []
        for row in self._query(sql + " ORDER BY a.id", params):
            website = Website(
                id=row["w_id"],
                name=row["w_name"],
                rss_url=row["w_rss_url"],
                leaning=row["w_leaning"],
                category=row["w_category"],
            )
            out.append((self._article(row), website))
        return out

    # -- audit and manifests ----------------------------------------------------

    def audit(self) -> list[str]:
        """Referential and content invariant violations; empty means consistent."""
        checks = {
            "post.author": "SELECT p.id FROM post p LEFT JOIN user_mgmt u "
            "ON u.name = p.author WHERE u.name IS NULL",
            "post.parent": "SELECT p.id FROM post p LEFT JOIN post q "
            "ON q.id = p.parent "
            "WHERE p.parent IS NOT NULL AND q.id IS NULL",
            "post.thread_root": "SELECT p.id FROM post p LEFT JOIN post q "
            "ON q.id = p.thread_root WHERE q.id IS NULL",
            "post.comment_root": "SELECT p.id FROM post p JOIN post q "
            "ON q.id = p.parent "
            "WHERE p.thread_root != q.thread_root",
            "post.article": "SELECT p.id FROM post p LEFT JOIN articles a "
            "ON a.id = p.article_id WHERE p.article_id IS NOT NULL AND a.id IS NULL",
            "post.shared_from": "SELECT p.id FROM post p LEFT JOIN post q "
            "ON q.id = p.shared_from WHERE p.shared_from IS NOT NULL "
            "AND (q.id IS NULL OR q.kind != 'NEWS')",
            "articles.website": "SELECT a.id FROM articles a LEFT JOIN websites w "
            "ON w.id = a.website_id WHERE w.id IS NULL",
            "follow.follower": "SELECT f.id FROM follow f LEFT JOIN user_mgmt u "
            "ON u.name = f.follower WHERE u.name IS NULL",
            "follow.followee": "SELECT f.id FROM follow f LEFT JOIN user_mgmt u "
            "ON u.name = f.followee WHERE u.name IS NULL",
            "reactions.content": "SELECT r.content_id FROM reactions r "
            "LEFT JOIN post p "
            "ON p.id = r.content_id WHERE p.id IS NULL",
            "reactions.agent": "SELECT r.content_id FROM reactions r "
            "LEFT JOIN user_mgmt u "
            "ON u.name = r.agent WHERE u.name IS NULL",
            "mentions.agent": "SELECT m.content_id FROM mentions m "
            "LEFT JOIN user_mgmt u "
            "ON u.name = m.agent WHERE u.name IS NULL",
        }
        problems = []
        for label, sql in checks.items():
            for row in self._query(sql):
                problems.append(f"{label}: {row[0]}")
        seen = {
            int(row["id"]): int(row["agents_seen"])
            for row in self._query("SELECT id, agents_seen FROM post ORDER BY id")
        }
        registry = [
            (int(row["seq"]), row["name"])
            for row in self._query(
                "SELECT rowid AS seq, name FROM user_mgmt ORDER BY seq"
            )
        ]
        known_at: dict[int, set[str]] = {}
        ids = list(seen)
        for start in range(0, len(ids), 500):
            for content in self.get_contents(ids[start : start + 500]):
                mark = seen[content.id]
                if mark not in known_at:
                    known_at[mark] = {name for rowid, name in registry if rowid <= mark}
                try:
                    check_content(content, self.taxonomy, known_at[mark])
                except YTwinError as e:
                    problems.append(f"content.{content.id}: {e.detail}")
        return problems

    def save_manifest(self, client_id: str, simulation: str, payload: dict) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT OR REPLACE INTO run_manifests(client_id, simulation, payload) "
                "VALUES (?, ?, ?)",
                (client_id, simulation, json.dumps(payload, sort_keys=True)),
            )

    def manifests(self) -> list[dict[str, Any]]:
        rows = self._query(
            "SELECT payload FROM run_manifests ORDER BY simulation, client_id"
        )
        return [json.loads(row["payload"]) for row in rows]

    def counts(self) -> dict[str, int]:
        out = {}
        for table in ("user_mgmt", "post", "reactions", "follow", "articles"):
            out[table] = int(self._query(f"SELECT COUNT(*) FROM {table}")[0][0])
        return out
