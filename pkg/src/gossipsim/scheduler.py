"""Drive configurations forward: synchronous rounds and asynchronous stepping.

A synchronous round runs, in order: gossip merges and agent activations
per node (nodes ascending, co-located agents ascending by id), the
per-node timeout check, duplex conflict resolution, simultaneous
application of the accepted moves, post-move gossip merges, and finally
the timer tick.  The whole round is deterministic.

Asynchronous policies activate one agent at a time (no duplex conflicts
can arise) and never tick timers: the timer protocol is proven for the
synchronous model only, so timer-dependent protocols are rejected under
async scheduling unless explicitly forced.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import (
    CW,
    FW,
    Configuration,
    ModelError,
    PROGRAM_DFT,
    PROGRAM_FW_DFT,
    PROGRAM_PATH_ENUM,
    merge_gossip,
)
from .protocol_dft import MoveIntent, StepMeta, dft_agent_step, timeout_check_and_execute
from .protocol_suite import anon_path_enum_step, fw_dft_step

SYNC = "sync"
ASYNC_RANDOM_FAIR = "async_random_fair"
ASYNC_ROUND_ROBIN = "async_round_robin"
ASYNC_SCRIPTED = "async_scripted"

HALF = "half"
FULL = "full"

DEFAULT_FAIRNESS_WINDOW = 16

_STEP_FNS = {
    PROGRAM_DFT: dft_agent_step,
    PROGRAM_FW_DFT: fw_dft_step,
    PROGRAM_PATH_ENUM: anon_path_enum_step,
}


class SchedulerError(ModelError):
    pass


@dataclass(frozen=True, slots=True)
class SchedulePolicy:
    kind: str = SYNC
    seed: int = 0
    script: tuple[int, ...] = ()
    fairness_window: int = DEFAULT_FAIRNESS_WINDOW


@dataclass(frozen=True, slots=True)
class MoveRecord:
    agent: int
    frm: int
    via: int
    to: int
    accepted: bool
    kind: str | None
    branch: str | None
    flipped: bool


@dataclass(slots=True)
class StepRecord:
    step: int
    acting: tuple[int, ...]
    moves: list[MoveRecord] = field(default_factory=list)
    merges: tuple[int, ...] = ()
    releases: tuple[tuple[int, int], ...] = ()  # (node, released agent idx)
    colocated: tuple[int, ...] = ()  # nodes holding >= 2 agents after moves
    joined_waiting: tuple[int, ...] = ()
    resets: tuple[int, ...] = ()
    wraps: tuple[int, ...] = ()


@dataclass(slots=True)
class Trace:
    records: list[StepRecord]
    status: str  # "met" | "truncated"
    stop_step: int | None = None

    def __len__(self) -> int:
        return len(self.records)


def _agent_order_key(cfg: Configuration, idx: int):
    ident = cfg.agents[idx].ident
    return (0, ident) if ident is not None else (1, idx)


def _positions_by_node(cfg: Configuration) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for idx, agent in enumerate(cfg.agents):
        groups.setdefault(agent.pos, []).append(idx)
    for node in groups:
        groups[node].sort(key=lambda i: _agent_order_key(cfg, i))
    return groups


def resolve_duplex(
    cfg: Configuration,
    intents: list[tuple[MoveIntent, StepMeta]],
    duplex: str,
) -> list[bool]:
    """Decide which move intents go through.

    Full duplex accepts everything (opposite crossings swap without
    meeting).  Half duplex accepts, per edge with opposing intents, only
    the direction containing the smallest agent id; same-direction
    intents on one edge are all accepted.
    """
    accepted = [True] * len(intents)
    if duplex == FULL:
        return accepted
    if duplex != HALF:
        raise SchedulerError(f"unknown duplex mode {duplex!r}")
    by_edge: dict[tuple, list[int]] = {}
    darts = []
    for n, (intent, _) in enumerate(intents):
        to, b = cfg.graph.neighbor(intent.frm, intent.via)
        dart = (intent.frm, intent.via)
        edge = min(dart, (to, b))
        by_edge.setdefault(edge, []).append(n)
        darts.append(dart)
    for edge, members in by_edge.items():
        dirs = {darts[n] for n in members}
        if len(dirs) < 2:
            continue
        winner = min(members, key=lambda n: _agent_order_key(cfg, intents[n][0].agent))
        win_dart = darts[winner]
        for n in members:
            if darts[n] != win_dart:
                accepted[n] = False
    return accepted


def _apply_moves(
    cfg: Configuration,
    intents: list[tuple[MoveIntent, StepMeta]],
    accepted: list[bool],
) -> list[MoveRecord]:
    records = []
    for (intent, meta), ok in zip(intents, accepted):
        to, b = cfg.graph.neighbor(intent.frm, intent.via)
        agent = cfg.agents[intent.agent]
        if ok:
            agent.pos = to
            agent.arrival_port = b
            agent.last_move_accepted = True
        else:
            agent.last_move_accepted = False
        records.append(
            MoveRecord(
                agent=intent.agent,
                frm=intent.frm,
                via=intent.via,
                to=to,
                accepted=ok,
                kind=meta.kind,
                branch=meta.branch,
                flipped=meta.flipped,
            )
        )
    return records


def _tick_timers(cfg: Configuration) -> None:
    cap = cfg.timer_cap
    for board in cfg.boards:
        if board.cls in (CW, FW) and board.timer < cap:
            board.timer += 1


def sync_round(cfg: Configuration, duplex: str = HALF, *, frozen: bool = False) -> StepRecord:
    """Advance one synchronous lock-step round in place.

    ``frozen`` suppresses all agent activity (the all-stop hypothetical of
    the mirror witness); merges and timer ticks still happen.
    """
    rec = StepRecord(step=cfg.round, acting=())
    intents: list[tuple[MoveIntent, StepMeta]] = []
    stays: list[tuple[MoveIntent, StepMeta]] = []
    acting: list[int] = []
    if not frozen:
        groups = _positions_by_node(cfg)
        merged = []
        for node in sorted(groups):
            merge_gossip(cfg, node)
            merged.append(node)
            for idx in groups[node]:
                step_fn = _STEP_FNS[cfg.agents[idx].program]
                intent, meta = step_fn(cfg, idx)
                acting.append(idx)
                (stays if intent.stay else intents).append((intent, meta))
        if any(a.program == PROGRAM_DFT for a in cfg.agents):
            releases = []
            for node in range(cfg.graph.node_count):
                for intent, meta in timeout_check_and_execute(cfg, node):
                    releases.append((node, intent.agent))
                    intents.append((intent, meta))
            rec.releases = tuple(releases)
        rec.merges = tuple(merged)
        accepted = resolve_duplex(cfg, intents, duplex)
        rec.moves = _apply_moves(cfg, intents, accepted)
        rec.joined_waiting = tuple(i.agent for i, m in stays if m.joined_waiting)
        rec.resets = tuple(i.agent for i, m in stays if m.reset)
        rec.wraps = tuple(i.agent for i, m in stays if m.wrapped)
    rec.acting = tuple(acting)
    groups_after = _positions_by_node(cfg)
    colocated = []
    for node, members in groups_after.items():
        if len(members) >= 2:
            merge_gossip(cfg, node)
            colocated.append(node)
    rec.colocated = tuple(sorted(colocated))
    _tick_timers(cfg)
    cfg.round += 1
    return rec


class _AsyncState:
    """Selection bookkeeping for asynchronous policies."""

    def __init__(self, policy: SchedulePolicy, k: int):
        self.policy = policy
        self.k = k
        self.rng = random.Random(policy.seed)
        self.ages = [0] * k
        self.rr = 0
        self.cursor = 0

    def select(self) -> int:
        kind = self.policy.kind
        if kind == ASYNC_ROUND_ROBIN:
            idx = self.rr
            self.rr = (self.rr + 1) % self.k
        elif kind == ASYNC_SCRIPTED:
            if self.cursor >= len(self.policy.script):
                raise SchedulerError("script exhausted")
            idx = self.policy.script[self.cursor]
            self.cursor += 1
            if not 0 <= idx < self.k:
                raise SchedulerError(f"script selects nonexistent agent {idx}")
        elif kind == ASYNC_RANDOM_FAIR:
            bound = self.k * self.policy.fairness_window
            overdue = [i for i in range(self.k) if self.ages[i] + 1 >= bound]
            if overdue:
                idx = max(overdue, key=lambda i: self.ages[i])
            else:
                idx = self.rng.randrange(self.k)
        else:
            raise SchedulerError(f"unknown async policy {kind!r}")
        for i in range(self.k):
            self.ages[i] += 1
        self.ages[idx] = 0
        assert self.ages[idx] < self.k * self.policy.fairness_window
        return idx


def async_step(cfg: Configuration, state: _AsyncState) -> StepRecord:
    """Activate one agent chosen by the policy; timers do not advance."""
    idx = state.select()
    rec = StepRecord(step=cfg.round, acting=(idx,))
    agent = cfg.agents[idx]
    merge_gossip(cfg, agent.pos)
    merged = [agent.pos]
    step_fn = _STEP_FNS[agent.program]
    intent, meta = step_fn(cfg, idx)
    if not intent.stay:
        rec.moves = _apply_moves(cfg, [(intent, meta)], [True])
        merge_gossip(cfg, agent.pos)
        merged.append(agent.pos)
    else:
        rec.joined_waiting = (idx,) if meta.joined_waiting else ()
        rec.resets = (idx,) if meta.reset else ()
        rec.wraps = (idx,) if meta.wrapped else ()
    rec.merges = tuple(merged)
    groups = _positions_by_node(cfg)
    rec.colocated = tuple(sorted(n for n, mem in groups.items() if len(mem) >= 2))
    cfg.round += 1
    return rec


def check_async_legality(cfg: Configuration, policy: SchedulePolicy, unsafe_async: bool) -> None:
    if policy.kind == SYNC:
        return
    if not unsafe_async and any(a.program == PROGRAM_DFT for a in cfg.agents):
        raise SchedulerError(
            "dft_kminus1 depends on synchronous timers; pass unsafe_async to force"
        )


def run(
    cfg: Configuration,
    policy: SchedulePolicy,
    duplex: str = HALF,
    stop=None,
    max_steps: int = 10_000,
    *,
    frozen: bool = False,
    unsafe_async: bool = False,
    observer=None,
) -> Trace:
    """Iterate rounds/steps until the stop predicate holds or the budget ends.

    Mutates ``cfg`` in place; clone first if the start state matters.
    ``observer(cfg, record)`` runs after every step, for monitoring.
    """
    check_async_legality(cfg, policy, unsafe_async)
    state = None if policy.kind == SYNC else _AsyncState(policy, cfg.k)
    records: list[StepRecord] = []
    if stop is not None and stop(cfg):
        return Trace(records, "met", stop_step=0)
    for step in range(max_steps):
        if policy.kind == SYNC:
            records.append(sync_round(cfg, duplex, frozen=frozen))
        else:
            records.append(async_step(cfg, state))
        if observer is not None:
            observer(cfg, records[-1])
        if stop is not None and stop(cfg):
            return Trace(records, "met", stop_step=step + 1)
    return Trace(records, "truncated")
