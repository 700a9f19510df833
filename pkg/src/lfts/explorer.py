"""Bounded exhaustive exploration, seeded simulation and trace replay.

A system is a set of actors, each owning one operation and the argument
tuples it may call it with, plus an optional error injector.  Exploration
is breadth-first over every enabled actor step and every fault the
injector's scope permits, deduplicating states, so the first violation
found comes with a shortest witness.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import ConfigError, PreconditionError, ReplayMismatchError, ScheduleMismatchError
from .injector import (
    Fault,
    FaultClass,
    FaultScope,
    InjectionSchedule,
    apply_fault,
    fabricate,
    filter_with_fault,
    iter_fault_successors,
    planned,
)
from .kernel import (
    DEFAULT_CAP,
    Args,
    Operation,
    Outcome,
    Predicate,
    State,
    StateSchema,
    StateUpdate,
    Status,
    StepResult,
    Verdict,
    evaluate_rely,
    render,
    step_operation,
)
from .trace import EI_ACTOR, Event, Trace, parse_trace


@dataclass(frozen=True)
class Actor:
    id: str
    op: Operation
    # None: every argument tuple from the operation's declared domains.
    args: tuple[Args, ...] | None = None

    def arg_tuples(self) -> Sequence[Args]:
        return self.op.arg_tuples() if self.args is None else self.args


@dataclass(frozen=True)
class SystemConfig:
    schema: StateSchema
    initial: State
    actors: tuple[Actor, ...]
    ei: tuple[FaultScope, InjectionSchedule] | None = None
    invariants: tuple[Predicate, ...] = ()
    depth: int = 12
    cap: int = DEFAULT_CAP

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ConfigError("depth must be non-negative")
        if self.cap < 1:
            raise ConfigError("cap must be at least 1")
        ids = [a.id for a in self.actors]
        if len(set(ids)) != len(ids):
            raise ConfigError("actor ids must be unique")
        if EI_ACTOR in ids:
            raise ConfigError(f"actor id {EI_ACTOR!r} is reserved for the error injector")
        if self.initial.schema is not self.schema:
            raise ConfigError("initial state does not belong to the schema")
        for actor in self.actors:
            if actor.args is not None:
                object.__setattr__(actor, "args", tuple(actor.op.check_args(a) for a in actor.args))
        if self.ei is not None:
            scope, sched = self.ei
            sched.validate(scope, self.schema)
        object.__setattr__(self, "_by_id", {a.id: a for a in self.actors})

    def actor(self, actor_id: str) -> Actor:
        try:
            return self._by_id[actor_id]
        except KeyError:
            raise ConfigError(f"unknown actor {actor_id!r}") from None

    @property
    def scope(self) -> FaultScope | None:
        return self.ei[0] if self.ei else None

    @property
    def schedule(self) -> InjectionSchedule:
        return self.ei[1] if self.ei else InjectionSchedule.empty()

    def parse_trace(self, text: str) -> Trace:
        def parse_args(actor_id: str, op: str, fields: Sequence[str]) -> Args:
            if actor_id == EI_ACTOR:
                if fields:
                    raise ConfigError("injector events carry no arguments")
                return ()
            params = self.actor(actor_id).op.params
            if len(fields) != len(params):
                raise ConfigError(f"{op} takes {len(params)} arguments, got {len(fields)}")
            out = []
            for (name, domain), text_value in zip(params, fields):
                match = [v for v in domain if render(v) == text_value]
                if not match:
                    raise ConfigError(f"{op}: {text_value!r} is not a valid {name}")
                out.append(match[0])
            return tuple(out)

        return parse_trace(text, self.schema, parse_args)


@dataclass
class ExploreStats:
    states_visited: int = 0
    max_depth: int = 0
    transitions: int = 0
    blocked: int = 0
    layer_selections: Counter = field(default_factory=Counter)
    faults: Counter = field(default_factory=Counter)

    def selections(self, layer: int) -> int:
        """Number of steps that fired through ``layer`` of a layered operation."""
        return sum(n for (_, l), n in self.layer_selections.items() if l == layer)


@dataclass(frozen=True)
class _Step:
    """An event without its position in a trace."""

    actor: str
    op: str
    args: Args
    layer: int | None
    outcome: Outcome
    update: StateUpdate

    def at(self, step: int) -> Event:
        return Event(step, self.actor, self.op, self.args, self.layer, self.outcome, self.update)


def _ei_step(fault: Fault) -> _Step:
    return _Step(EI_ACTOR, fault.fault_class.value, (), None, Outcome.APPLIED, StateUpdate.of(fault.assignment))


def _try_step(op: Operation, state: State, args: Args) -> StepResult | None:
    try:
        return step_operation(op, state, args)
    except PreconditionError:
        return None


def _expand(cfg: SystemConfig, state: State) -> tuple[list[tuple[State, tuple[_Step, ...]]], ExploreStats]:
    local = ExploreStats()
    out: list[tuple[State, tuple[_Step, ...]]] = []
    scope = cfg.scope
    filters = scope is not None and bool(scope.classes & {FaultClass.LOST, FaultClass.DUPLICATED})
    for actor in cfg.actors:
        for args in actor.arg_tuples():
            res = _try_step(actor.op, state, args)
            if res is None:
                continue
            if res.blocked:
                local.blocked += 1
                continue
            if res.layer is not None:
                local.layer_selections[(actor.op.name, res.layer)] += 1
            base = _Step(actor.id, actor.op.name, args, res.layer, res.outcome, res.update)
            if res.state != state:
                out.append((res.state, (base,)))
            if filters:
                for filtered, fault in iter_fault_successors(scope, res.update):
                    nxt = state.apply(filtered)
                    if nxt != state:
                        local.faults[fault.fault_class.value] += 1
                        step = _Step(actor.id, actor.op.name, args, res.layer, res.outcome, filtered)
                        out.append((nxt, (step, _ei_step(fault))))
    if scope is not None and FaultClass.FAKE in scope.classes:
        for name, value in scope.permitted_assignments(cfg.schema):
            if state[name] != value:
                fault = Fault(FaultClass.FAKE, (name, value))
                local.faults[FaultClass.FAKE.value] += 1
                out.append((state.apply(StateUpdate.of((name, value))), (_ei_step(fault),)))
    return out, local


def _first_failing(cfg: SystemConfig, state: State) -> Predicate | None:
    for inv in cfg.invariants:
        if not evaluate_rely(inv, state):
            return inv
    return None


def _witness(parents: dict[State, Any], state: State) -> Trace:
    chunks = []
    while parents[state] is not None:
        prev, steps = parents[state]
        chunks.append(steps)
        state = prev
    steps = [s for chunk in reversed(chunks) for s in chunk]
    return Trace(tuple(s.at(i) for i, s in enumerate(steps)))


def explore(cfg: SystemConfig, workers: int = 1) -> Verdict:
    """Breadth-first search of every interleaving up to ``cfg.depth`` steps.

    Frontier levels may be expanded by several worker threads; results are
    merged in frontier order, so the verdict and witness do not depend on
    ``workers``.
    """
    stats = ExploreStats(states_visited=1)
    parents: dict[State, Any] = {cfg.initial: None}

    def done(status: Status, witness: Trace | None = None, inv: Predicate | None = None) -> Verdict:
        stats.states_visited = len(parents)
        violations = (f"invariant {inv.name} fails",) if inv else ()
        return Verdict(status, witness, violations, stats, inv.name if inv else None)

    bad = _first_failing(cfg, cfg.initial)
    if bad is not None:
        return done(Status.VIOLATED, Trace(), bad)

    frontier = [cfg.initial]
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for depth in range(1, cfg.depth + 1):
            if pool is None:
                expansions = map(lambda s: _expand(cfg, s), frontier)
            else:
                expansions = pool.map(lambda s: _expand(cfg, s), frontier)
            nxt_frontier = []
            for state, (succs, local) in zip(frontier, expansions):
                stats.blocked += local.blocked
                stats.layer_selections.update(local.layer_selections)
                stats.faults.update(local.faults)
                for nxt, steps in succs:
                    stats.transitions += 1
                    if nxt in parents:
                        continue
                    parents[nxt] = (state, steps)
                    stats.max_depth = depth
                    if len(parents) > cfg.cap:
                        return done(Status.CAP_EXCEEDED)
                    bad = _first_failing(cfg, nxt)
                    if bad is not None:
                        return done(Status.VIOLATED, _witness(parents, nxt), bad)
                    nxt_frontier.append(nxt)
            if not nxt_frontier:
                break
            frontier = nxt_frontier
    finally:
        if pool is not None:
            pool.shutdown()
    return done(Status.HOLDS)


ScheduleItem = Union[str, tuple[str, Args]]


def simulate(cfg: SystemConfig, schedule: Sequence[ScheduleItem] | int, steps: int | None = None) -> Trace:
    """Run one execution.

    ``schedule`` is either an explicit sequence of actor ids (or
    ``(actor id, args)`` pairs) or an integer seed for a random fair
    schedule: each step picks uniformly among actors with an enabled step,
    then uniformly among that actor's enabled argument tuples.  A seeded run
    stops early once no enabled step changes the state.

    ``steps`` bounds ticks; an injected fake takes a tick of its own.  An
    explicit schedule by default runs until it is used up (with a guard of
    ten ticks per item against an injector that fakes every tick).
    """
    scope, sched = cfg.scope, cfg.schedule
    explicit = not isinstance(schedule, int)
    if steps is not None:
        limit = steps
    else:
        limit = 10 * len(schedule) + 10 if explicit else cfg.depth
    rng = None if explicit else random.Random(schedule)
    queue = list(schedule) if explicit else []
    state = cfg.initial
    events: list[Event] = []
    termination = "steps"

    def emit(s: _Step) -> None:
        events.append(s.at(len(events)))

    for tick in range(limit + 1):
        if explicit and not queue:
            termination = "schedule"
            break
        if tick == limit:
            break
        if planned(sched, scope, tick) is FaultClass.FAKE:
            update, fault = fabricate(sched, scope, tick, state)
            if fault is not None:
                emit(_ei_step(fault))
                state = state.apply(update)
            continue
        if explicit:
            actor, args, res = _explicit_step(cfg, state, queue.pop(0))
        else:
            picked = _fair_step(cfg, state, rng)
            if isinstance(picked, str):
                termination = picked
                break
            actor, args, res = picked
        update, fault = res.update, None
        if not res.blocked:
            update, fault = filter_with_fault(sched, scope, tick, res.update)
        emit(_Step(actor.id, actor.op.name, args, res.layer, res.outcome, update))
        if fault is not None:
            emit(_ei_step(fault))
        state = state.apply(update)
    return Trace(tuple(events), termination)


def _explicit_step(cfg: SystemConfig, state: State, item: ScheduleItem) -> tuple[Actor, Args, StepResult]:
    if isinstance(item, str):
        actor = cfg.actor(item)
        fallback = None
        first_error = None
        for args in actor.arg_tuples():
            try:
                res = step_operation(actor.op, state, args)
            except PreconditionError as exc:
                first_error = first_error or exc
                continue
            if not res.blocked:
                return actor, args, res
            fallback = fallback or (args, res)
        if fallback is None:
            raise first_error or ConfigError(f"actor {item} has no argument tuples")
        return actor, fallback[0], fallback[1]
    actor_id, args = item
    actor = cfg.actor(actor_id)
    args = actor.op.check_args(args)
    return actor, args, step_operation(actor.op, state, args)


def _fair_step(cfg: SystemConfig, state: State, rng: random.Random) -> tuple[Actor, Args, StepResult] | str:
    enabled = []
    for actor in cfg.actors:
        options = []
        for args in actor.arg_tuples():
            res = _try_step(actor.op, state, args)
            if res is not None and not res.blocked:
                options.append((args, res))
        if options:
            enabled.append((actor, options))
    if not enabled:
        return "deadlock"
    if all(res.state == state for _, options in enabled for _, res in options):
        return "quiescent"
    actor, options = rng.choice(enabled)
    args, res = rng.choice(options)
    return actor, args, res


def replay(cfg: SystemConfig, trace: Trace) -> State:
    """Re-execute ``trace`` from the initial state, checking every recorded
    outcome, layer and update against recomputation."""
    events = list(trace)
    for i, ev in enumerate(events):
        if ev.step != i:
            raise ReplayMismatchError(ev.step, f"expected step index {i}")
    state = cfg.initial
    i = 0
    while i < len(events):
        ev = events[i]
        if ev.is_ei:
            if ev.op != FaultClass.FAKE.value:
                raise ReplayMismatchError(ev.step, f"{ev.op} event does not follow an operation step")
            if len(ev.update) != 1:
                raise ReplayMismatchError(ev.step, "a fake event writes exactly one assignment")
            state = state.apply(ev.update)
            i += 1
            continue
        try:
            actor = cfg.actor(ev.actor)
        except ConfigError as exc:
            raise ReplayMismatchError(ev.step, str(exc)) from None
        if actor.op.name != ev.op:
            raise ReplayMismatchError(ev.step, f"actor {actor.id} runs {actor.op.name}, trace says {ev.op}")
        try:
            res = step_operation(actor.op, state, ev.args)
        except PreconditionError as exc:
            raise ReplayMismatchError(ev.step, f"precondition fails on recomputation: {exc}") from None
        update = res.update
        follower = events[i + 1] if i + 1 < len(events) else None
        consumed = 1
        if follower is not None and follower.is_ei and follower.op != FaultClass.FAKE.value:
            if res.blocked or len(follower.update) != 1:
                raise ReplayMismatchError(follower.step, "malformed filter event")
            try:
                update = apply_fault(update, Fault(FaultClass(follower.op), follower.update.assignments[0]))
            except (ValueError, ScheduleMismatchError) as exc:
                raise ReplayMismatchError(follower.step, str(exc)) from None
            consumed = 2
        if res.outcome is not ev.outcome:
            raise ReplayMismatchError(ev.step, f"recorded {ev.outcome.value}, recomputed {res.outcome.value}")
        if res.layer != ev.layer:
            raise ReplayMismatchError(ev.step, f"recorded layer {ev.layer}, recomputed {res.layer}")
        if update != ev.update:
            raise ReplayMismatchError(ev.step, f"recorded update [{ev.update}], recomputed [{update}]")
        state = state.apply(update)
        i += consumed
    return state


def verdict_to_json(verdict: Verdict, witness: bool = True) -> str:
    stats = verdict.stats or ExploreStats()
    doc: dict[str, Any] = {
        "status": verdict.status.value,
        "statesVisited": stats.states_visited,
        "maxDepth": stats.max_depth,
    }
    if verdict.invariant is not None:
        doc["invariant"] = verdict.invariant
    if witness and verdict.witness is not None:
        doc["witness"] = verdict.witness.to_json()
    return json.dumps(doc, indent=2, ensure_ascii=False)
