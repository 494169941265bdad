"""Self-stabilization testing machinery.

Four concerns live here: fuzzing structurally valid but semantically
arbitrary initial configurations, exact quiescence detection by finding
the cycle the deterministic synchronous system must enter, auditing
per-traversal move bounds from traces, and the two executable
impossibility witnesses (mirrored network, symmetric ring).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import (
    CW,
    FW,
    NW,
    Agent,
    Configuration,
    ModelError,
    PROGRAM_DFT,
    PROGRAM_PATH_ENUM,
    Token,
    Whiteboard,
    assoc_put,
    clean_board,
    make_configuration,
    state_key,
)
from .protocol_suite import fresh_cursor_regs
from .scheduler import HALF, SchedulePolicy, StepRecord, SYNC, run, sync_round
from .topology import PortLabeledGraph, build_ring, mirror_join

UNIFORM = "uniform"
CLUSTERED = "clustered"
ADVERSARIAL = "adversarial"

CYCLE = "cycle"
BUDGET = "budget"


class HarnessError(ModelError):
    pass


@dataclass(frozen=True, slots=True)
class FuzzSpec:
    """Knobs for arbitrary-initial-configuration generation.

    All rates are probabilities in [0, 1]; zero everywhere (and
    ``randomize_timers=False``, ``random_t_bit=False``) yields a clean
    configuration.
    """

    id_low: int = 1
    id_high: int = 99
    fake_id_rate: float = 0.3
    table_garbage_rate: float = 0.2
    waiting_garbage_rate: float = 0.2
    randomize_timers: bool = True
    random_t_bit: bool = True
    garbage_token_rate: float = 0.2
    store_garbage_rate: float = 0.2
    placement: str = UNIFORM
    adversarial_nodes: tuple[int, ...] = ()


CLEAN_SPEC = FuzzSpec(
    fake_id_rate=0.0,
    table_garbage_rate=0.0,
    waiting_garbage_rate=0.0,
    randomize_timers=False,
    random_t_bit=False,
    garbage_token_rate=0.0,
    store_garbage_rate=0.0,
)


def fuzz_config(
    graph: PortLabeledGraph,
    k: int,
    spec: FuzzSpec,
    seed: int,
    *,
    board_class: str = CW,
    program: str = PROGRAM_DFT,
    timer_cap: int | None = None,
    l_max: int | None = None,
) -> Configuration:
    """Deterministic function of (graph, k, spec, seed).

    Structural invariants always hold (distinct live ids, one row per id,
    ports in range where the protocol reads them as ports); everything
    else is fair game.
    """
    rng = random.Random(f"{seed}:{spec.id_low}:{spec.id_high}:{k}")
    n = graph.node_count
    anonymous = program == PROGRAM_PATH_ENUM
    domain = range(spec.id_low, spec.id_high + 1)
    if not anonymous:
        if len(domain) < k:
            raise HarnessError("id domain smaller than k")
        idents = sorted(rng.sample(domain, k))
    else:
        idents = [None] * k

    if spec.placement == UNIFORM:
        positions = [rng.randrange(n) for _ in range(k)]
    elif spec.placement == CLUSTERED:
        home = rng.randrange(n)
        positions = [home] * k
    elif spec.placement == ADVERSARIAL:
        if len(spec.adversarial_nodes) != k:
            raise HarnessError("adversarial placement needs exactly k nodes")
        positions = list(spec.adversarial_nodes)
    else:
        raise HarnessError(f"unknown placement {spec.placement!r}")

    agents = []
    for j in range(k):
        agent = Agent(
            ident=idents[j],
            pos=positions[j],
            t_bit=rng.random() < 0.5 if spec.random_t_bit else False,
            program=program,
            arrival_port=rng.randrange(graph.degree(positions[j])),
        )
        if program == PROGRAM_PATH_ENUM:
            if rng.random() < spec.table_garbage_rate:
                # corrupt cursor; the walker resets it on first activation
                agent.regs = {"len": rng.randint(-3, 99), "labels": "junk"}
            else:
                agent.regs = fresh_cursor_regs()
        else:
            # arbitrary internal state: a stale parked flag must be shed
            if rng.random() < spec.table_garbage_rate:
                agent.regs["parked"] = True
            if rng.random() < spec.table_garbage_rate:
                agent.regs["bounced"] = True
        agents.append(agent)

    cfg = make_configuration(
        graph,
        agents,
        board_class,
        timer_cap=timer_cap,
        max_id=spec.id_high + 1 if not anonymous else None,
        l_max=l_max,
    )

    for j, agent in enumerate(cfg.agents):
        if rng.random() < spec.garbage_token_rate:
            agent.known.add(Token(f"ghost{rng.randrange(1000)}", "junk"))

    if board_class == NW:
        return cfg

    live = [i for i in idents if i is not None]
    fake_pool = [i for i in rng.sample(domain, min(len(domain), k + 3)) if i not in live]
    cap = cfg.timer_cap
    for v in range(n):
        board = cfg.boards[v]
        deg = graph.degree(v)
        if rng.random() < spec.fake_id_rate:
            board.min_id = rng.choice(list(domain))
        if spec.randomize_timers:
            board.timer = rng.randint(0, cap)
            board.wait_t = rng.randint(0, cap)
        if rng.random() < spec.waiting_garbage_rate:
            board.waiting.update(rng.sample(domain, rng.randint(1, 2)))
        for i in live + fake_pool:
            if rng.random() < spec.table_garbage_rate:
                assoc_put(board, "t_table", i, rng.random() < 0.5)
            if rng.random() < spec.table_garbage_rate:
                assoc_put(board, "in_link", i, rng.choice([None] + list(range(deg))))
            if rng.random() < spec.table_garbage_rate:
                assoc_put(board, "out_link", i, rng.choice([None] + list(range(deg))))
        if board.cls == FW and rng.random() < spec.store_garbage_rate:
            board.store.add(Token(f"ghost{rng.randrange(1000)}", "stale"))
    return cfg


def gossip_complete(cfg: Configuration) -> bool:
    """True iff every agent knows every agent's genuine token (garbage ignored)."""
    genuine = set(cfg.genuine.values())
    return all(genuine <= agent.known for agent in cfg.agents)


def default_cycle_budget(cfg: Configuration) -> int:
    return min(cfg.graph.node_count * max(cfg.timer_cap, 1) * 4**cfg.k, 200_000)


@dataclass(slots=True)
class CycleReport:
    """Exact eventual behavior of a deterministic synchronous run.

    ``prefix_len`` rounds lead into a cycle of ``period`` rounds that the
    system then repeats forever; all "forever" judgments below are decided
    on that cycle.
    """

    status: str
    prefix_len: int
    period: int
    quiescent: tuple[int, ...]
    mover_visits: dict[int, frozenset[int]]
    gossip_step: int | None
    releases_in_cycle: int
    colocations_in_cycle: int
    flip_steps: dict[int, tuple[int, ...]]
    records: list[StepRecord] = field(default_factory=list)

    @property
    def movers(self) -> tuple[int, ...]:
        q = set(self.quiescent)
        return tuple(i for i in self.mover_visits if i not in q)


def detect_cycle(
    cfg: Configuration,
    duplex: str = HALF,
    *,
    budget: int | None = None,
    frozen: bool = False,
) -> CycleReport:
    """Run synchronous rounds until an exact state repeat.

    States are compared by full structural equality (the round counter
    excluded), so the returned (prefix, period) pair is exact, not a hash
    coincidence.  ``cfg`` is mutated; clone first to keep the start state.
    """
    work = cfg
    limit = budget if budget is not None else default_cycle_budget(cfg)
    seen: dict[tuple, int] = {}
    positions: list[tuple[int, ...]] = []
    records: list[StepRecord] = []
    gossip_step: int | None = None
    step = 0
    while True:
        key = state_key(work)
        if key in seen:
            prefix = seen[key]
            period = step - prefix
            break
        seen[key] = step
        positions.append(tuple(a.pos for a in work.agents))
        if gossip_step is None and gossip_complete(work):
            gossip_step = step
        if step >= limit:
            return CycleReport(
                status=BUDGET,
                prefix_len=step,
                period=0,
                quiescent=(),
                mover_visits={},
                gossip_step=gossip_step,
                releases_in_cycle=0,
                colocations_in_cycle=0,
                flip_steps={},
                records=records,
            )
        records.append(sync_round(work, duplex, frozen=frozen))
        step += 1

    cycle_positions = positions[prefix : prefix + period]
    k = work.k
    quiescent = tuple(
        i for i in range(k) if len({p[i] for p in cycle_positions}) == 1
    )
    mover_visits = {
        i: frozenset(p[i] for p in cycle_positions) for i in range(k)
    }
    cycle_records = records[prefix : prefix + period]
    flip_steps: dict[int, list[int]] = {i: [] for i in range(k)}
    for rec in records:
        for mv in rec.moves:
            if mv.flipped and mv.accepted:
                flip_steps[mv.agent].append(rec.step)
    return CycleReport(
        status=CYCLE,
        prefix_len=prefix,
        period=period,
        quiescent=quiescent,
        mover_visits=mover_visits,
        gossip_step=gossip_step,
        releases_in_cycle=sum(len(r.releases) for r in cycle_records),
        colocations_in_cycle=sum(len(r.colocated) for r in cycle_records),
        flip_steps={i: tuple(v) for i, v in flip_steps.items()},
        records=records,
    )


@dataclass(slots=True)
class MoveBoundsReport:
    segments_checked: int
    fwd_max: int
    back_max: int
    violations: list[tuple[int, int, int, int]]  # (agent, segment, fwd, back)

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_move_bounds(
    records: list[StepRecord],
    graph: PortLabeledGraph,
    *,
    fwd_bound: int | None = None,
    back_bound: int | None = None,
) -> MoveBoundsReport:
    """Check per-traversal move counts against the stated bounds.

    A segment is the span between two consecutive traversal-bit flips of
    one agent; the first and last segment of each agent are truncated by
    the trace boundaries and therefore skipped.  Only accepted moves
    count (a rejected intent moves nobody).
    """
    m = graph.edge_count
    n = graph.node_count
    f_limit = fwd_bound if fwd_bound is not None else m
    b_limit = back_bound if back_bound is not None else n
    # per agent: list of closed segments plus the open one
    segments: dict[int, list[list[int]]] = {}
    for rec in records:
        for mv in rec.moves:
            if not mv.accepted:
                continue
            segs = segments.setdefault(mv.agent, [[0, 0]])
            if mv.flipped:
                segs.append([0, 0])
            cur = segs[-1]
            if mv.kind == "forward":
                cur[0] += 1
            elif mv.kind == "backtrack":
                cur[1] += 1
    checked = 0
    fwd_max = 0
    back_max = 0
    violations: list[tuple[int, int, int, int]] = []
    for agent, segs in segments.items():
        # segs[0] started before the trace, segs[-1] never closed
        for s_idx, (fwd, back) in enumerate(segs[1:-1], start=1):
            checked += 1
            fwd_max = max(fwd_max, fwd)
            back_max = max(back_max, back)
            if fwd > f_limit or back > b_limit:
                violations.append((agent, s_idx, fwd, back))
    return MoveBoundsReport(checked, fwd_max, back_max, violations)


@dataclass(slots=True)
class MirrorReport:
    join_node: int
    converged_prefix: int
    frozen_status: str
    frozen_period: int
    cross_exchanged: bool
    control_gossip_step: int | None

    @property
    def ok(self) -> bool:
        return (
            self.frozen_status == CYCLE
            and not self.cross_exchanged
            and self.control_gossip_step is not None
        )


def _translate_board(board: Whiteboard, offset: int, max_live: int) -> Whiteboard:
    """Mirror a whiteboard into the second copy: live-id rows move to the
    offset id range so each mirrored agent sees its own marks."""
    out = board.clone()
    out.t_table = {i + offset if i <= max_live else i: v for i, v in board.t_table.items()}
    out.in_link = {i + offset if i <= max_live else i: v for i, v in board.in_link.items()}
    out.out_link = {i + offset if i <= max_live else i: v for i, v in board.out_link.items()}
    out.waiting = {i + offset if i <= max_live else i for i in board.waiting}
    if board.min_id <= max_live:
        out.min_id = board.min_id + offset
    return out


def witness_mirror(
    graph: PortLabeledGraph, k: int, seed: int = 0, *, budget: int | None = None
) -> MirrorReport:
    """Indistinguishability demonstration on a mirrored network.

    Converge k agents on the base graph, join the graph with its mirror
    image at an agent-free node, and mirror all agent and board state
    into the second copy (ids offset, gossip fresh).  With every agent
    frozen the doubled system cycles while the two groups' genuine
    tokens stay on their own sides; the unfrozen control run from the
    identical start completes gossip.
    """
    n = graph.node_count
    if not 1 <= k < n:
        raise HarnessError("mirror witness needs 1 <= k < n")
    rng = random.Random(seed)
    nodes = rng.sample(range(n), k)
    agents = [Agent(ident=j + 1, pos=nodes[j]) for j in range(k)]
    base = make_configuration(graph, agents, CW)
    report = detect_cycle(base, HALF)
    if report.status != CYCLE:
        raise HarnessError("base system failed to converge")

    occupied = {a.pos for a in base.agents}
    free = [v for v in range(n) if v not in occupied]
    if not free:
        raise HarnessError("no agent-free node to join at")
    w = free[0]
    mg = mirror_join(graph, w)

    offset = k
    b_index = {}
    counter = n
    for v in range(n):
        if v != w:
            b_index[v] = counter
            counter += 1

    boards = [base.boards[v].clone() for v in range(n)]
    boards.extend(
        _translate_board(base.boards[v], offset, k) for v in range(n) if v != w
    )
    joined_agents = [a.clone() for a in base.agents]
    for a in base.agents:
        twin = a.clone()
        twin.ident = a.ident + offset
        twin.pos = b_index[a.pos]
        joined_agents.append(twin)
    joined = Configuration(
        graph=mg,
        agents=joined_agents,
        boards=boards,
        timer_cap=base.timer_cap,
        max_id=base.max_id + offset,
        l_max=mg.node_count,
    )
    for idx, agent in enumerate(joined.agents):
        token = Token(origin=f"agent{idx}", payload=f"gossip-{idx}")
        joined.genuine[idx] = token
        agent.known = {token}

    control = joined.clone()

    frozen_report = detect_cycle(joined, HALF, budget=budget, frozen=True)
    a_tokens = {joined.genuine[i] for i in range(k)}
    b_tokens = {joined.genuine[i] for i in range(k, 2 * k)}
    cross = any(agent.known & b_tokens for agent in joined.agents[:k]) or any(
        agent.known & a_tokens for agent in joined.agents[k:]
    )

    limit = budget if budget is not None else default_cycle_budget(control)
    trace = run(control, SchedulePolicy(kind=SYNC), HALF, stop=gossip_complete, max_steps=limit)
    gossip_step = trace.stop_step if trace.status == "met" else None

    return MirrorReport(
        join_node=w,
        converged_prefix=report.prefix_len,
        frozen_status=frozen_report.status,
        frozen_period=frozen_report.period,
        cross_exchanged=cross,
        control_gossip_step=gossip_step,
    )


@dataclass(slots=True)
class SymmetryReport:
    prefix_len: int
    period: int
    status: str
    meetings: int
    gossip_ever_complete: bool

    @property
    def ok(self) -> bool:
        return self.status == CYCLE and self.meetings == 0 and not self.gossip_ever_complete


def witness_symmetry(
    n: int, k: int, board_class: str, *, budget: int | None = None
) -> SymmetryReport:
    """Symmetric-ring demonstration: k identical anonymous agents placed
    at regular spacing run the walk enumerator in lock step, so they never
    meet and gossip never completes.

    Restricted to rings (the construction needs a regular graph).
    """
    if k < 1 or n % k != 0:
        raise HarnessError(f"{k} does not divide {n}")
    g = build_ring(n)
    agents = [
        Agent(
            ident=None,
            pos=j * (n // k),
            program=PROGRAM_PATH_ENUM,
            regs=fresh_cursor_regs(),
        )
        for j in range(k)
    ]
    cfg = make_configuration(g, agents, board_class, l_max=n)
    report = detect_cycle(cfg, HALF, budget=budget)
    meetings = sum(len(rec.colocated) for rec in report.records)
    return SymmetryReport(
        prefix_len=report.prefix_len,
        period=report.period,
        status=report.status,
        meetings=meetings,
        gossip_ever_complete=report.gossip_step is not None and k > 1,
    )
