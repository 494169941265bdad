"""Global simulation state: agents, whiteboards, gossip tokens, configurations.

Whiteboards come in three classes: NW (no storage at all), CW (control
data: traversal tables, link records, timer machinery) and FW (CW plus a
gossip store).  Class rules are enforced structurally: NW boards reject
every write, CW boards reject gossip-store writes.

A :class:`Configuration` is a value; cloning is cheap and two
configurations compare equal iff their :func:`state_key` tuples are
equal.  ``state_key`` deliberately excludes the round counter so exact
cycle detection can use it directly as a dictionary key.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .topology import PortLabeledGraph

NW = "NW"
CW = "CW"
FW = "FW"
BOARD_CLASSES = (NW, CW, FW)

# associative table defaults: a missing t_table row reads as True, a
# missing link row reads as None (the paper's "bottom")
T_TABLE_DEFAULT = True
LINK_DEFAULT = None

PROGRAM_DFT = "dft_kminus1"
PROGRAM_FW_DFT = "fw_async_dft"
PROGRAM_PATH_ENUM = "anon_path_enum"
PROGRAMS = (PROGRAM_DFT, PROGRAM_FW_DFT, PROGRAM_PATH_ENUM)


class ModelError(ValueError):
    pass


class BoardClassError(ModelError):
    """A write was attempted that the board's class forbids."""


class Token(NamedTuple):
    """One piece of gossip.  Opaque to protocol code; merged by set union."""

    origin: str
    payload: str


@dataclass(slots=True)
class Agent:
    """One mobile agent.  ``ident`` is None for anonymous agents."""

    ident: int | None
    pos: int
    t_bit: bool = False
    known: set[Token] = field(default_factory=set)
    program: str = PROGRAM_DFT
    regs: dict[str, Any] = field(default_factory=dict)
    arrival_port: int = 0
    last_move_accepted: bool = True

    def clone(self) -> "Agent":
        return Agent(
            ident=self.ident,
            pos=self.pos,
            t_bit=self.t_bit,
            known=set(self.known),
            program=self.program,
            regs=copy.deepcopy(self.regs),
            arrival_port=self.arrival_port,
            last_move_accepted=self.last_move_accepted,
        )


@dataclass(slots=True)
class Whiteboard:
    cls: str = CW
    t_table: dict[int, bool] = field(default_factory=dict)
    in_link: dict[int, int] = field(default_factory=dict)
    out_link: dict[int, int] = field(default_factory=dict)
    min_id: int = 0
    wait_t: int = 0
    waiting: set[int] = field(default_factory=set)
    timer: int = 0
    store: set[Token] = field(default_factory=set)

    def clone(self) -> "Whiteboard":
        return Whiteboard(
            cls=self.cls,
            t_table=dict(self.t_table),
            in_link=dict(self.in_link),
            out_link=dict(self.out_link),
            min_id=self.min_id,
            wait_t=self.wait_t,
            waiting=set(self.waiting),
            timer=self.timer,
            store=set(self.store),
        )


_TABLES = {
    "t_table": T_TABLE_DEFAULT,
    "in_link": LINK_DEFAULT,
    "out_link": LINK_DEFAULT,
}


def assoc_put(board: Whiteboard, table: str, ident: int, value) -> None:
    """Store (ident, value), keeping at most one row per id.

    Storing the table's default value removes the row (the default is
    "considered to be stored" whenever no row is present).
    """
    if board.cls == NW:
        raise BoardClassError("NW whiteboards reject all writes")
    default = _TABLES[table]
    mapping: dict = getattr(board, table)
    if value == default:
        mapping.pop(ident, None)
    else:
        mapping[ident] = value


def assoc_get(board: Whiteboard, table: str, ident: int):
    """Read a row; a missing row reads as the table's default."""
    default = _TABLES[table]
    return getattr(board, table).get(ident, default)


def store_put(board: Whiteboard, tokens: set[Token]) -> None:
    if board.cls != FW:
        raise BoardClassError("gossip store requires an FW whiteboard")
    board.store |= tokens


@dataclass(slots=True)
class Configuration:
    """Graph + all agents + all whiteboards + run parameters."""

    graph: PortLabeledGraph
    agents: list[Agent]
    boards: list[Whiteboard]
    round: int = 0
    timer_cap: int = 0
    max_id: int = 0
    l_max: int = 0
    genuine: dict[int, Token] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.agents)

    def clone(self) -> "Configuration":
        return Configuration(
            graph=self.graph,
            agents=[a.clone() for a in self.agents],
            boards=[b.clone() for b in self.boards],
            round=self.round,
            timer_cap=self.timer_cap,
            max_id=self.max_id,
            l_max=self.l_max,
            genuine=dict(self.genuine),
        )


def default_timer_cap(graph: PortLabeledGraph) -> int:
    # must exceed the mover's worst steady revisit gap at any node, which
    # on non-tree graphs runs to several traversal lengths; anything lower
    # lets the saturating timer force spurious releases forever
    return 16 * graph.edge_count + 1


def clean_board(cls: str, max_id: int) -> Whiteboard:
    if cls not in BOARD_CLASSES:
        raise ModelError(f"unknown board class {cls!r}")
    if cls == NW:
        return Whiteboard(cls=NW)
    return Whiteboard(cls=cls, min_id=max_id)


def make_configuration(
    graph: PortLabeledGraph,
    agents: list[Agent],
    board_class: str,
    *,
    timer_cap: int | None = None,
    max_id: int | None = None,
    l_max: int | None = None,
) -> Configuration:
    """Clean configuration: default boards, one genuine token per agent."""
    idents = [a.ident for a in agents if a.ident is not None]
    if len(set(idents)) != len(idents):
        raise ModelError("named agents must have pairwise-distinct ids")
    if max_id is None:
        max_id = max(idents, default=0) + 1
    cfg = Configuration(
        graph=graph,
        agents=agents,
        boards=[clean_board(board_class, max_id) for _ in range(graph.node_count)],
        timer_cap=timer_cap if timer_cap is not None else default_timer_cap(graph),
        max_id=max_id,
        l_max=l_max if l_max is not None else graph.node_count,
    )
    for idx, agent in enumerate(agents):
        token = Token(origin=f"agent{idx}", payload=f"gossip-{idx}")
        cfg.genuine[idx] = token
        agent.known.add(token)
    return cfg


def merge_gossip(cfg: Configuration, node: int) -> None:
    """Union the known sets of all agents at ``node`` (plus the FW store)."""
    here = [a for a in cfg.agents if a.pos == node]
    if not here:
        return
    board = cfg.boards[node]
    union: set[Token] = set()
    for a in here:
        union |= a.known
    if board.cls == FW:
        union |= board.store
        board.store = set(union)
    for a in here:
        if len(a.known) != len(union):
            a.known = set(union)
        elif a.known != union:  # pragma: no cover - same size, different content
            a.known = set(union)


def _token_key(tok: Token) -> tuple[str, str]:
    return (tok.origin, tok.payload)


def _agent_key(a: Agent) -> tuple:
    return (
        a.ident,
        a.pos,
        a.t_bit,
        tuple(sorted(a.known)),
        a.program,
        tuple(sorted((k, _freeze(v)) for k, v in a.regs.items())),
        a.arrival_port,
        a.last_move_accepted,
    )


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _board_key(b: Whiteboard) -> tuple:
    if b.cls == NW:
        return (NW,)
    key = (
        b.cls,
        tuple(sorted(b.t_table.items())),
        tuple(sorted(b.in_link.items())),
        tuple(sorted(b.out_link.items())),
        b.min_id,
        b.wait_t,
        tuple(sorted(b.waiting)),
        b.timer,
    )
    if b.cls == FW:
        key += (tuple(sorted(b.store)),)
    return key


def state_key(cfg: Configuration) -> tuple:
    """Exact hashable encoding of the configuration, round counter excluded.

    Agents are listed in hidden-index order; use :func:`snapshot_hash` for
    the canonicalized digest that identifies configurations up to
    permutation of indistinguishable anonymous agents.
    """
    return (
        tuple(_agent_key(a) for a in cfg.agents),
        tuple(_board_key(b) for b in cfg.boards),
    )


def snapshot_hash(cfg: Configuration) -> str:
    """Stable digest over graph, agents and boards.

    Anonymous agents are sorted by their full serialized state first, so
    swapping two indistinguishable agents does not change the digest.
    """
    named = [_agent_key(a) for a in cfg.agents if a.ident is not None]
    anon = sorted(_agent_key(a) for a in cfg.agents if a.ident is None)
    payload = repr((
        cfg.graph.adjacency,
        tuple(named),
        tuple(anon),
        tuple(_board_key(b) for b in cfg.boards),
    ))
    return hashlib.sha256(payload.encode()).hexdigest()


def config_to_json(cfg: Configuration) -> str:
    """Snapshot as JSON text with stable key ordering."""

    def board_obj(b: Whiteboard) -> dict:
        if b.cls == NW:
            return {"class": NW}
        obj = {
            "class": b.cls,
            "t_table": {str(k): v for k, v in sorted(b.t_table.items())},
            "in_link": {str(k): v for k, v in sorted(b.in_link.items())},
            "out_link": {str(k): v for k, v in sorted(b.out_link.items())},
            "min_id": b.min_id,
            "wait_t": b.wait_t,
            "waiting": sorted(b.waiting),
            "timer": b.timer,
        }
        if b.cls == FW:
            obj["store"] = sorted([list(t) for t in b.store])
        return obj

    doc = {
        "round": cfg.round,
        "timer_cap": cfg.timer_cap,
        "max_id": cfg.max_id,
        "agents": [
            {
                "ident": a.ident,
                "pos": a.pos,
                "t_bit": a.t_bit,
                "known": sorted([list(t) for t in a.known]),
                "program": a.program,
                "regs": {k: a.regs[k] for k in sorted(a.regs)},
                "arrival_port": a.arrival_port,
            }
            for a in cfg.agents
        ],
        "boards": [board_obj(b) for b in cfg.boards],
    }
    return json.dumps(doc, sort_keys=True)
