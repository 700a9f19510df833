"""Route-based train control: topology, global state and the five
operations (plus the layered, fault-tolerant route reservation).

State variables are named after the functions they tabulate:
``status(b)``, ``occupant(b)``, ``availability(r)``, ``route(t)`` and
``direction(p)``.  A ``None`` route is the null route; a ``None``
occupant means no train is recorded on the block.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import (
    AlreadyAssignedError,
    AlreadyEnteredError,
    ConfigError,
    NoNextBlockError,
    NotLastBlockError,
    NotOnBlockError,
    UnassignedError,
)
from .kernel import (
    Layer,
    LayeredOperation,
    Predicate,
    RGOperation,
    State,
    StateSchema,
    StateUpdate,
    Status,
    StepResult,
    Verdict,
    step_operation,
)

FREE, OCCUPIED = "free", "occupied"
AVAILABLE, RESERVED, MAINTENANCE = "available", "reserved", "maintenance"
DIRECTED, DIVERTED = "directed", "diverted"

BLOCK_STATUS = (FREE, OCCUPIED)
AVAILABILITY = (AVAILABLE, RESERVED, MAINTENANCE)
DIRECTIONS = (DIRECTED, DIVERTED)


def status_var(b: str) -> str:
    return f"status({b})"


def occupant_var(b: str) -> str:
    return f"occupant({b})"


def availability_var(r: str) -> str:
    return f"availability({r})"


def route_var(t: str) -> str:
    return f"route({t})"


def direction_var(p: str) -> str:
    return f"direction({p})"


@dataclass(frozen=True)
class Topology:
    """Static network: blocks, the points they host and the routes over them.

    ``points`` maps a block to the points attached to it; a well-formed
    network has at most one per block.
    """

    blocks: tuple[str, ...]
    points: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    routes: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    orientations: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    @property
    def point_names(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for b in self.blocks:
            for p in self.points.get(b, ()):
                seen.setdefault(p, None)
        return tuple(seen)

    def points_on(self, r: str) -> tuple[str, ...]:
        return tuple(p for b in self.routes[r] for p in self.points.get(b, ()))

    def first(self, r: str) -> str:
        return self.routes[r][0]

    def last(self, r: str) -> str:
        return self.routes[r][-1]

    def next_block(self, r: str, b: str) -> str | None:
        """Successor of ``b`` along route ``r``; ``None`` at the last block."""
        seq = self.routes[r]
        i = seq.index(b)
        return seq[i + 1] if i + 1 < len(seq) else None


def validate_topology(topo: Topology) -> Verdict:
    problems: list[str] = []
    blocks = set(topo.blocks)
    if len(blocks) != len(topo.blocks):
        dupes = sorted({b for b in topo.blocks if topo.blocks.count(b) > 1})
        problems.append(f"blocks: duplicated block ids {', '.join(dupes)}")

    hosts: dict[str, list[str]] = {}
    for b, pts in topo.points.items():
        if b not in blocks:
            problems.append(f"points[{b}]: unknown block")
        if len(pts) > 1:
            problems.append(f"points[{b}]: block hosts {len(pts)} points ({', '.join(pts)}), at most one allowed")
        for p in pts:
            hosts.setdefault(p, []).append(b)
    for p, bs in hosts.items():
        if len(bs) > 1:
            problems.append(f"point {p}: attached to several blocks ({', '.join(bs)})")

    for r, seq in topo.routes.items():
        unknown = [b for b in seq if b not in blocks]
        if unknown:
            problems.append(f"route {r}: unknown blocks {', '.join(unknown)}")
        if len(seq) < 2:
            problems.append(f"route {r}: has {len(seq)} block(s); needs at least 2 so that first(r) ≠ last(r)")
        if len(set(seq)) != len(seq):
            dupes = sorted({b for b in seq if seq.count(b) > 1})
            problems.append(f"route {r}: block(s) {', '.join(dupes)} appear more than once")
        hosted = {p for b in seq for p in topo.points.get(b, ())}
        given = topo.orientations.get(r)
        if given is None:
            if hosted:
                problems.append(f"orientations[{r}]: missing; route hosts points {', '.join(sorted(hosted))}")
            continue
        missing = hosted - set(given)
        extra = set(given) - hosted
        if missing:
            problems.append(f"orientations[{r}]: no orientation for points {', '.join(sorted(missing))}")
        if extra:
            problems.append(f"orientations[{r}]: points {', '.join(sorted(extra))} are not on the route")
        for p, d in given.items():
            if d not in DIRECTIONS:
                problems.append(f"orientations[{r}][{p}]: {d!r} is not directed/diverted")
    for r in topo.orientations:
        if r not in topo.routes:
            problems.append(f"orientations[{r}]: unknown route")

    if problems:
        return Verdict(Status.VIOLATED, violations=tuple(problems))
    return Verdict(Status.HOLDS)


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def topology_from_dict(doc: Mapping[str, Any]) -> tuple[Topology, tuple[str, ...], dict[str, Any]]:
    """Decode a network document into (topology, trains, initial overrides).

    Shape errors raise ConfigError; network rule violations are left for
    :func:`validate_topology`.
    """
    _expect(isinstance(doc, Mapping), "topology document must be a JSON object")
    blocks = doc.get("blocks")
    _expect(isinstance(blocks, list) and all(isinstance(b, str) for b in blocks), "'blocks' must be an array of strings")
    points_raw = doc.get("points", {})
    _expect(isinstance(points_raw, Mapping), "'points' must be an object")
    points: dict[str, tuple[str, ...]] = {}
    for b, p in points_raw.items():
        if isinstance(p, str):
            points[b] = (p,)
        else:
            _expect(isinstance(p, list) and all(isinstance(x, str) for x in p), f"points[{b}] must be a point name")
            points[b] = tuple(p)
    routes_raw = doc.get("routes", {})
    _expect(isinstance(routes_raw, Mapping), "'routes' must be an object")
    routes = {}
    for r, seq in routes_raw.items():
        _expect(isinstance(seq, list) and all(isinstance(b, str) for b in seq), f"routes[{r}] must be an array of block names")
        routes[r] = tuple(seq)
    orient_raw = doc.get("orientations", {})
    _expect(isinstance(orient_raw, Mapping), "'orientations' must be an object")
    orientations = {}
    for r, m in orient_raw.items():
        _expect(isinstance(m, Mapping), f"orientations[{r}] must be an object")
        orientations[r] = dict(m)
    trains = doc.get("trains", [])
    _expect(isinstance(trains, list) and all(isinstance(t, str) for t in trains), "'trains' must be an array of strings")
    initial = doc.get("initial", {})
    _expect(isinstance(initial, Mapping), "'initial' must be an object")
    topo = Topology(tuple(blocks), points, routes, orientations)
    return topo, tuple(trains), dict(initial)


def load_topology(path: str | Path) -> tuple[Topology, tuple[str, ...], dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return topology_from_dict(doc)


class TrainSystem:
    """A topology plus a finite set of trains, compiled to kernel operations.

    With ``keeps_first_free`` the reservation marks its blocks only through
    the route's availability and leaves their status free, so the train can
    enter; block freedom for a new reservation then also excludes blocks of
    routes already reserved.
    """

    def __init__(
        self,
        topology: Topology,
        trains: Sequence[str],
        *,
        keeps_first_free: bool = False,
        initial: Mapping[str, Mapping[str, Any]] | None = None,
    ) -> None:
        verdict = validate_topology(topology)
        if not verdict.holds:
            raise ConfigError("invalid topology: " + "; ".join(verdict.violations))
        if not trains:
            raise ConfigError("a train system needs at least one train")
        if len(set(trains)) != len(trains):
            raise ConfigError("train ids must be unique")
        self.topology = topology
        self.trains = tuple(trains)
        self.keeps_first_free = keeps_first_free
        topo = topology
        self.blocks = topo.blocks
        self.routes = tuple(topo.routes)
        self.points = topo.point_names
        self._route_blocks = {r: tuple(seq) for r, seq in topo.routes.items()}
        self._route_points = {r: topo.points_on(r) for r in self.routes}
        self._routes_through = {b: tuple(r for r in self.routes if b in topo.routes[r]) for b in self.blocks}

        self.schema = StateSchema(
            [(status_var(b), BLOCK_STATUS) for b in self.blocks]
            + [(occupant_var(b), (None, *self.trains)) for b in self.blocks]
            + [(availability_var(r), AVAILABILITY) for r in self.routes]
            + [(route_var(t), (None, *self.routes)) for t in self.trains]
            + [(direction_var(p), DIRECTIONS) for p in self.points]
        )
        ix = self.schema.index
        self._status = {b: ix(status_var(b)) for b in self.blocks}
        self._occupant = {b: ix(occupant_var(b)) for b in self.blocks}
        self._avail = {r: ix(availability_var(r)) for r in self.routes}
        self._route = {t: ix(route_var(t)) for t in self.trains}
        self.initial = self.initial_state(initial)
        self._build_operations()

    # -- state access ------------------------------------------------------

    def status(self, s: State, b: str) -> str:
        return s.values[self._status[b]]

    def occupant(self, s: State, b: str) -> str | None:
        return s.values[self._occupant[b]]

    def availability(self, s: State, r: str) -> str:
        return s.values[self._avail[r]]

    def route_of(self, s: State, t: str) -> str | None:
        return s.values[self._route[t]]

    def direction(self, s: State, p: str) -> str:
        return s[direction_var(p)]

    def blocks_of(self, s: State, t: str) -> list[str]:
        """Blocks currently recorded as occupied by train ``t``."""
        return [b for b in self.blocks if s.values[self._occupant[b]] == t]

    def initial_state(self, overrides: Mapping[str, Mapping[str, Any]] | None = None) -> State:
        bindings: dict[str, Any] = {}
        for b in self.blocks:
            bindings[status_var(b)] = FREE
            bindings[occupant_var(b)] = None
        for r in self.routes:
            bindings[availability_var(r)] = AVAILABLE
        for t in self.trains:
            bindings[route_var(t)] = None
        for p in self.points:
            bindings[direction_var(p)] = DIRECTED
        makers = {
            "status": status_var,
            "occupant": occupant_var,
            "availability": availability_var,
            "route": route_var,
            "direction": direction_var,
        }
        for kind, table in (overrides or {}).items():
            if kind not in makers:
                raise ConfigError(f"initial: unknown component {kind!r}")
            if not isinstance(table, Mapping):
                raise ConfigError(f"initial[{kind}] must be an object")
            for key, value in table.items():
                name = makers[kind](key)
                if name not in self.schema:
                    raise ConfigError(f"initial[{kind}]: unknown id {key!r}")
                bindings[name] = value
        try:
            return self.schema.make(bindings)
        except Exception as exc:
            raise ConfigError(f"initial: {exc}") from exc

    def state(self, **components: Mapping[str, Any]) -> State:
        """Initial state with the given components overridden (test helper)."""
        return self.initial_state(components)

    # -- predicates --------------------------------------------------------

    def _block_free(self, s: State, b: str) -> bool:
        if s.values[self._status[b]] != FREE:
            return False
        if self.keeps_first_free:
            return not any(s.values[self._avail[r]] == RESERVED for r in self._routes_through[b])
        return True

    def _reserve_rely(self, s: State, args: tuple) -> bool:
        _, r = args
        return self.availability(s, r) == AVAILABLE and all(self._block_free(s, b) for b in self._route_blocks[r])

    def _reserve_weak_rely(self, s: State, args: tuple) -> bool:
        _, r = args
        return self.availability(s, r) == AVAILABLE

    def _freeing_rely(self, s: State, args: tuple) -> bool:
        r = self.route_of(s, args[0])
        return r is not None and all(self.status(s, b) == FREE for b in self._route_blocks[r])

    def _enter_rely(self, s: State, args: tuple) -> bool:
        r = self.route_of(s, args[0])
        if r is None:
            return False
        return self.availability(s, r) == RESERVED and self.status(s, self.topology.first(r)) == FREE

    def _moving_rely(self, s: State, args: tuple) -> bool:
        t, b = args
        r = self.route_of(s, t)
        if r is None or self.availability(s, r) != RESERVED or b not in self._route_blocks[r]:
            return False
        nxt = self.topology.next_block(r, b)
        return nxt is not None and self.status(s, nxt) == FREE

    def _exit_rely(self, s: State, args: tuple) -> bool:
        t, b = args
        r = self.route_of(s, t)
        if r is None or self.availability(s, r) != RESERVED or b not in self._route_blocks[r]:
            return False
        return self.topology.next_block(r, b) is None

    def _maintenance_rely(self, s: State, args: tuple) -> bool:
        return self.availability(s, args[0]) == MAINTENANCE

    # -- guarantees --------------------------------------------------------

    def _reserve_body(self, s: State, args: tuple) -> StateUpdate:
        t, r = args
        out: list[tuple[str, Any]] = [(availability_var(r), RESERVED)]
        if not self.keeps_first_free:
            out += [(status_var(b), OCCUPIED) for b in self._route_blocks[r]]
        out.append((route_var(t), r))
        orient = self.topology.orientations.get(r, {})
        out += [(direction_var(p), orient[p]) for p in self._route_points[r]]
        return StateUpdate(tuple(out))

    def _quarantine_body(self, s: State, args: tuple) -> StateUpdate:
        t, r = args
        out: list[tuple[str, Any]] = [(availability_var(r), MAINTENANCE)]
        out += [(status_var(b), OCCUPIED) for b in self._route_blocks[r]]
        out.append((route_var(t), None))
        return StateUpdate(tuple(out))

    def _freeing_body(self, s: State, args: tuple) -> StateUpdate:
        t = args[0]
        return StateUpdate.of((availability_var(self.route_of(s, t)), AVAILABLE), (route_var(t), None))

    def _enter_body(self, s: State, args: tuple) -> StateUpdate:
        t = args[0]
        first = self.topology.first(self.route_of(s, t))
        return StateUpdate.of((status_var(first), OCCUPIED), (occupant_var(first), t))

    def _moving_body(self, s: State, args: tuple) -> StateUpdate:
        t, b = args
        nxt = self.topology.next_block(self.route_of(s, t), b)
        return StateUpdate.of(
            (status_var(b), FREE),
            (occupant_var(b), None),
            (status_var(nxt), OCCUPIED),
            (occupant_var(nxt), t),
        )

    def _exit_body(self, s: State, args: tuple) -> StateUpdate:
        r = self.route_of(s, args[0])
        out: list[tuple[str, Any]] = []
        for b in self._route_blocks[r]:
            out += [(status_var(b), FREE), (occupant_var(b), None)]
        return StateUpdate(tuple(out))

    def _clear_body(self, s: State, args: tuple) -> StateUpdate:
        r = args[0]
        out: list[tuple[str, Any]] = [(availability_var(r), AVAILABLE)]
        out += [(status_var(b), FREE) for b in self._route_blocks[r] if self.occupant(s, b) is None]
        return StateUpdate(tuple(out))

    # -- engine guards -----------------------------------------------------

    def _assigned(self, s: State, t: str) -> str:
        r = self.route_of(s, t)
        if r is None:
            raise UnassignedError(f"train {t} has no reserved route")
        return r

    def _pre_reserve(self, s: State, args: tuple) -> None:
        t = args[0]
        if self.route_of(s, t) is not None:
            raise AlreadyAssignedError(f"train {t} already holds route {self.route_of(s, t)}")

    def _pre_freeing(self, s: State, args: tuple) -> None:
        self._assigned(s, args[0])

    def _pre_enter(self, s: State, args: tuple) -> None:
        t = args[0]
        self._assigned(s, t)
        if self.blocks_of(s, t):
            raise AlreadyEnteredError(f"train {t} is already on the track")

    def _pre_on_route(self, s: State, args: tuple, at_last: bool) -> None:
        t, b = args
        r = self._assigned(s, t)
        if b not in self._route_blocks[r]:
            return  # the rely's membership conjunct blocks the step
        is_last = self.topology.next_block(r, b) is None
        if at_last and not is_last:
            raise NotLastBlockError(f"{b} is not the last block of {r}")
        if not at_last and is_last:
            raise NoNextBlockError(f"{b} is the last block of {r}; use exit_route")
        if self.occupant(s, b) != t:
            raise NotOnBlockError(f"train {t} is not on block {b}")

    def _build_operations(self) -> None:
        T = ("t", self.trains)
        R = ("r", self.routes)
        B = ("b", self.blocks)
        self.route_reserving = RGOperation(
            "route_reserving", (T, R), Predicate("reserve", self._reserve_rely), self._reserve_body, self._pre_reserve
        )
        self.layered_route_reserving = LayeredOperation(
            "layered_route_reserving",
            (T, R),
            (
                Layer(Predicate("reserve", self._reserve_rely), self._reserve_body),
                Layer(Predicate("reserve≈", self._reserve_weak_rely), self._quarantine_body),
            ),
            self._pre_reserve,
        )
        self.route_freeing = RGOperation(
            "route_freeing", (T,), Predicate("freeing", self._freeing_rely), self._freeing_body, self._pre_freeing
        )
        self.enter_route = RGOperation(
            "enter_route", (T,), Predicate("enter", self._enter_rely), self._enter_body, self._pre_enter
        )
        self.moving_on_route = RGOperation(
            "moving_on_route",
            (T, B),
            Predicate("moving", self._moving_rely),
            self._moving_body,
            lambda s, a: self._pre_on_route(s, a, at_last=False),
        )
        self.exit_route = RGOperation(
            "exit_route",
            (T, B),
            Predicate("exit", self._exit_rely),
            self._exit_body,
            lambda s, a: self._pre_on_route(s, a, at_last=True),
        )
        self.clear_maintenance = RGOperation(
            "clear_maintenance", (R,), Predicate("maintenance", self._maintenance_rely), self._clear_body
        )
        self.operations = {
            op.name: op
            for op in (
                self.route_reserving,
                self.layered_route_reserving,
                self.route_freeing,
                self.enter_route,
                self.moving_on_route,
                self.exit_route,
                self.clear_maintenance,
            )
        }

    # -- convenience wrappers ---------------------------------------------

    def reserve(self, s: State, t: str, r: str) -> StepResult:
        return step_operation(self.route_reserving, s, (t, r))

    def reserve_layered(self, s: State, t: str, r: str) -> StepResult:
        return step_operation(self.layered_route_reserving, s, (t, r))

    def free(self, s: State, t: str) -> StepResult:
        return step_operation(self.route_freeing, s, (t,))

    def enter(self, s: State, t: str) -> StepResult:
        return step_operation(self.enter_route, s, (t,))

    def move(self, s: State, t: str, b: str) -> StepResult:
        return step_operation(self.moving_on_route, s, (t, b))

    def exit(self, s: State, t: str, b: str) -> StepResult:
        return step_operation(self.exit_route, s, (t, b))

    # -- safety ------------------------------------------------------------

    def check_safety(self, s: State) -> Verdict:
        problems: list[str] = []
        values = s.values
        held: dict[str, list[int]] = {}
        for b in self.blocks:
            t = values[self._occupant[b]]
            if t is None:
                continue
            if values[self._status[b]] != OCCUPIED:
                problems.append(f"block {b}: occupied by {t} but status is free")
            r = values[self._route[t]]
            if r is None or b not in self._route_blocks[r]:
                problems.append(f"train {t}: on block {b} outside its assigned route")
                continue
            held.setdefault(t, []).append(self._route_blocks[r].index(b))
        for t, idx in held.items():
            idx.sort()
            if idx[-1] - idx[0] + 1 != len(idx):
                r = values[self._route[t]]
                segment = ",".join(self._route_blocks[r][i] for i in idx)
                problems.append(f"train {t}: occupied blocks {segment} are not contiguous on {r}")
        if problems:
            return Verdict(Status.VIOLATED, violations=tuple(problems), invariant="safety")
        return Verdict(Status.HOLDS, invariant="safety")

    @property
    def safety(self) -> Predicate:
        return Predicate("safety", lambda s, _a: self.check_safety(s).holds)


def check_safety(system: TrainSystem, state: State) -> Verdict:
    return system.check_safety(state)
