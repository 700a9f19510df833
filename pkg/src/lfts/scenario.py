"""Turn topology, scenario and injection documents into a runnable system.

A scenario document (JSON object) may contain:

``trains``
    train ids (default: the topology's ``trains``);
``routes``
    train id -> routes that train may reserve (default: every route);
``reservationKeepsFirstFree``
    select the two-phase reservation reading (default false);
``layered``
    use the layered route reservation (default true);
``operations``
    operation names each train runs (default: the five train operations);
``invariants``
    invariant names: ``safety`` and/or ``reserved-disjoint`` (default ``["safety"]``);
``initial``
    state overrides, merged over the topology's ``initial``;
``schedule``
    explicit step list for simulation, items ``[train, op, *args]``;
    ``["admin", "clear_maintenance", route]`` lifts a maintenance quarantine.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .explorer import Actor, SystemConfig
from .injector import FaultScope, InjectionSchedule, injection_from_dict
from .kernel import DEFAULT_CAP, Args, Predicate, State
from .train import RESERVED, TrainSystem, topology_from_dict

TRAIN_OPERATIONS = ("route_reserving", "route_freeing", "enter_route", "moving_on_route", "exit_route")
ADMIN = "admin"


def actor_id(train: str, op: str) -> str:
    return f"{train}.{op}"


def resolve_input(name: str | Path) -> Path:
    """A path on disk, else a file shipped in the package's data directory
    (``figure1``, ``scenarios/disjoint``, ``injection/lost_free``...).

    ``examples/figure1.json`` falls back to the shipped file by its base name.
    """
    path = Path(name)
    if path.exists():
        return path
    data = resources.files("lfts") / "data"
    for candidate in (str(name), f"{name}.json", path.name):
        shipped = data / candidate
        if shipped.is_file():
            return Path(str(shipped))
    raise FileNotFoundError(f"no such file: {name}")


class InputParseError(ConfigError):
    """A JSON input file is not well formed."""


def read_json(name: str | Path) -> Any:
    path = resolve_input(name)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def reserved_disjoint(system: TrainSystem) -> Predicate:
    """No block belongs to two routes that are both reserved."""

    def check(s: State, _args: Args) -> bool:
        seen: set[str] = set()
        for r in system.routes:
            if system.availability(s, r) != RESERVED:
                continue
            blocks = system.topology.routes[r]
            if seen.intersection(blocks):
                return False
            seen.update(blocks)
        return True

    return Predicate("reserved-disjoint", check)


@dataclass
class Scenario:
    system: TrainSystem
    train_routes: dict[str, tuple[str, ...]]
    operations: tuple[str, ...]
    layered: bool
    invariants: tuple[str, ...]
    schedule: list[list[str]] | None

    def invariant_predicates(self) -> tuple[Predicate, ...]:
        makers = {"safety": lambda: self.system.safety, "reserved-disjoint": lambda: reserved_disjoint(self.system)}
        out = []
        for name in self.invariants:
            if name not in makers:
                raise ConfigError(f"unknown invariant {name!r}; known: {', '.join(makers)}")
            out.append(makers[name]())
        return tuple(out)

    def actors(self, layered: bool | None = None, admin: bool = False) -> tuple[Actor, ...]:
        layered = self.layered if layered is None else layered
        sys_ = self.system
        actors = []
        for t in sys_.trains:
            routes = self.train_routes[t]
            blocks = tuple(dict.fromkeys(b for r in routes for b in sys_.topology.routes[r]))
            for name in self.operations:
                if name == "route_reserving":
                    op = sys_.layered_route_reserving if layered else sys_.route_reserving
                    args = tuple((t, r) for r in routes)
                elif name in ("route_freeing", "enter_route"):
                    op, args = sys_.operations[name], ((t,),)
                elif name in ("moving_on_route", "exit_route"):
                    op, args = sys_.operations[name], tuple((t, b) for b in blocks)
                else:
                    raise ConfigError(f"unknown train operation {name!r}")
                actors.append(Actor(actor_id(t, name), op, args))
        if admin:
            actors.append(Actor(actor_id(ADMIN, "clear_maintenance"), sys_.clear_maintenance))
        return tuple(actors)

    def config(
        self,
        *,
        layered: bool | None = None,
        ei: tuple[FaultScope, InjectionSchedule] | None = None,
        depth: int = 12,
        cap: int = DEFAULT_CAP,
        admin: bool = False,
    ) -> SystemConfig:
        return SystemConfig(
            self.system.schema,
            self.system.initial,
            self.actors(layered, admin),
            ei,
            self.invariant_predicates(),
            depth,
            cap,
        )

    def explicit_schedule(self) -> list[tuple[str, Args]]:
        if self.schedule is None:
            raise ConfigError("scenario has no explicit schedule")
        items = []
        for i, entry in enumerate(self.schedule):
            if not isinstance(entry, list) or len(entry) < 2 or not all(isinstance(x, str) for x in entry):
                raise ConfigError(f"schedule[{i}] must be [actor, op, args...]")
            who, op, *rest = entry
            if who == ADMIN:
                items.append((actor_id(ADMIN, op), tuple(rest)))
            else:
                items.append((actor_id(who, op), (who, *rest)))
        return items


def scenario_from_dicts(topology_doc: Mapping[str, Any], scenario_doc: Mapping[str, Any] | None = None) -> Scenario:
    topology, topo_trains, topo_initial = topology_from_dict(topology_doc)
    doc = dict(scenario_doc or {})
    trains = tuple(doc.get("trains", topo_trains))
    initial = {**topo_initial, **doc.get("initial", {})}
    system = TrainSystem(
        topology,
        trains,
        keeps_first_free=bool(doc.get("reservationKeepsFirstFree", False)),
        initial=initial,
    )
    restrict = doc.get("routes", {})
    if not isinstance(restrict, Mapping):
        raise ConfigError("'routes' must map trains to route lists")
    train_routes = {}
    for t in trains:
        routes = tuple(restrict.get(t, system.routes))
        unknown = [r for r in routes if r not in topology.routes]
        if unknown:
            raise ConfigError(f"routes[{t}]: unknown routes {', '.join(unknown)}")
        train_routes[t] = routes
    for t in restrict:
        if t not in trains:
            raise ConfigError(f"routes: unknown train {t!r}")
    operations = tuple(doc.get("operations", TRAIN_OPERATIONS))
    invariants = tuple(doc.get("invariants", ["safety"]))
    schedule = doc.get("schedule")
    return Scenario(system, train_routes, operations, bool(doc.get("layered", True)), invariants, schedule)


def load_scenario(
    topology: str | Path, scenario: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> Scenario:
    doc = read_json(scenario) if scenario is not None else {}
    if not isinstance(doc, Mapping):
        raise ConfigError("scenario document must be a JSON object")
    return scenario_from_dicts(read_json(topology), {**doc, **(overrides or {})})


def load_injection(path: str | Path) -> tuple[FaultScope, InjectionSchedule]:
    return injection_from_dict(read_json(path))
