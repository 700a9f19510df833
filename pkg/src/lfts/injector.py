"""Error injector: erroneous environment interference bounded by a scope.

Faults act on the state updates produced by operation guarantees:

* lost - one targeted assignment is removed from the update;
* duplicated - one targeted assignment is written a second time;
* fake - a fabricated assignment is applied as a step of its own.

The :class:`FaultScope` is the injector's guarantee: the variables (and
optionally values) it may touch and the fault classes it may use.  At most
one fault fires per step.
"""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import Enum
from fnmatch import fnmatchcase
from fractions import Fraction
from typing import Any

from .errors import ConfigError, ScheduleMismatchError, ScopeViolationError
from .kernel import Assignment, State, StateSchema, StateUpdate, Status, Verdict, render
from .trace import Trace


class FaultClass(Enum):
    LOST = "lost"
    DUPLICATED = "duplicated"
    FAKE = "fake"


def _split_pattern(pattern: str) -> tuple[str, str | None]:
    name, sep, value = pattern.partition(":=")
    return name, (value if sep else None)


@dataclass(frozen=True)
class FaultScope:
    """Patterns are ``var-glob`` or ``var-glob:=value-glob``, e.g.
    ``status(*)`` or ``status(*):=free``."""

    variables: tuple[str, ...]
    classes: frozenset[FaultClass]

    def __post_init__(self) -> None:
        if not self.variables or not self.classes:
            raise ConfigError("an enabled fault scope needs at least one variable pattern and one class")

    def permits(self, name: str, value: Any) -> bool:
        text = render(value)
        for pattern in self.variables:
            var_glob, value_glob = _split_pattern(pattern)
            if fnmatchcase(name, var_glob) and (value_glob is None or fnmatchcase(text, value_glob)):
                return True
        return False

    def allows(self, fault_class: FaultClass) -> bool:
        return fault_class in self.classes

    def validate(self, schema: StateSchema) -> None:
        for pattern in self.variables:
            var_glob, _ = _split_pattern(pattern)
            if not any(fnmatchcase(n, var_glob) for n in schema.names):
                raise ConfigError(f"scope pattern {pattern!r} matches no state variable")

    def permitted_assignments(self, schema: StateSchema) -> list[Assignment]:
        return [(n, v) for n, domain in schema.variables for v in domain if self.permits(n, v)]


class Mode(Enum):
    SCRIPTED = "scripted"
    RANDOM = "random"


@dataclass(frozen=True)
class ScriptedFault:
    """A fault planned for one step.

    ``target`` selects an assignment, ``var`` or ``var:=value``; a fake
    fault needs a value, given inline or as ``value``.
    """

    step: int
    fault_class: FaultClass
    target: str
    value: str | None = None

    @property
    def variable(self) -> str:
        return _split_pattern(self.target)[0]

    @property
    def value_text(self) -> str | None:
        inline = _split_pattern(self.target)[1]
        return inline if inline is not None else self.value

    def matches(self, assignment: Assignment) -> bool:
        name, value = assignment
        wanted = self.value_text
        return name == self.variable and (wanted is None or render(value) == wanted)


@dataclass(frozen=True)
class InjectionSchedule:
    mode: Mode
    script: tuple[ScriptedFault, ...] = ()
    seed: int = 0
    probability: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        steps = [f.step for f in self.script]
        if steps != sorted(steps):
            raise ConfigError("scripted faults must be sorted by step")
        if len(set(steps)) != len(steps):
            raise ConfigError("at most one fault may be scripted per step")
        if any(s < 0 for s in steps):
            raise ConfigError("scripted steps must be non-negative")
        if not 0 <= self.probability <= 1:
            raise ConfigError(f"fault probability {self.probability} is outside [0, 1]")
        for f in self.script:
            if f.fault_class is FaultClass.FAKE and f.value_text is None:
                raise ConfigError(f"fake fault at step {f.step} needs a value")

    @classmethod
    def empty(cls) -> InjectionSchedule:
        return cls(Mode.SCRIPTED)

    def validate(self, scope: FaultScope, schema: StateSchema) -> None:
        """Every scripted fault must lie within the scope."""
        scope.validate(schema)
        for f in self.script:
            if not scope.allows(f.fault_class):
                raise ConfigError(f"step {f.step}: class {f.fault_class.value} is outside the scope")
            if f.variable not in schema:
                raise ConfigError(f"step {f.step}: unknown variable {f.variable!r}")
            values = schema.domain(f.variable)
            if f.value_text is not None:
                try:
                    values = (schema.parse_value(f.variable, f.value_text),)
                except Exception as exc:
                    raise ConfigError(f"step {f.step}: {exc}") from exc
            if not any(scope.permits(f.variable, v) for v in values):
                raise ConfigError(f"step {f.step}: target {f.target!r} is outside the scope")


@dataclass(frozen=True)
class Fault:
    fault_class: FaultClass
    assignment: Assignment


def _rng(sched: InjectionSchedule, step: int) -> random.Random:
    # Per-step stream: the draw at a step is a function of (seed, step) only.
    return random.Random(f"{sched.seed}:{step}")


def _random_draw(sched: InjectionSchedule, scope: FaultScope, step: int) -> tuple[FaultClass | None, random.Random]:
    rng = _rng(sched, step)
    if sched.probability == 0 or rng.random() >= sched.probability:
        return None, rng
    return rng.choice(sorted(scope.classes, key=lambda c: c.value)), rng


def planned(sched: InjectionSchedule, scope: FaultScope | None, step: int) -> FaultClass | None:
    """The fault class due at ``step``, if any."""
    if scope is None:
        return None
    if sched.mode is Mode.SCRIPTED:
        entry = _scripted(sched, step)
        return entry.fault_class if entry else None
    return _random_draw(sched, scope, step)[0]


def _scripted(sched: InjectionSchedule, step: int) -> ScriptedFault | None:
    return next((f for f in sched.script if f.step == step), None)


def apply_fault(update: StateUpdate, fault: Fault) -> StateUpdate:
    """Re-apply a recorded lost/duplicated fault to a recomputed update."""
    for i, a in enumerate(update):
        if a == fault.assignment:
            if fault.fault_class is FaultClass.LOST:
                return update.without(i)
            if fault.fault_class is FaultClass.DUPLICATED:
                return update.duplicating(i)
    raise ScheduleMismatchError(f"{fault.fault_class.value} target {render_assignment(fault.assignment)} not in update")


def render_assignment(a: Assignment) -> str:
    return f"{a[0]}:={render(a[1])}"


def filter_with_fault(
    sched: InjectionSchedule, scope: FaultScope | None, step: int, update: StateUpdate
) -> tuple[StateUpdate, Fault | None]:
    cls = planned(sched, scope, step)
    if cls not in (FaultClass.LOST, FaultClass.DUPLICATED):
        return update, None
    if sched.mode is Mode.SCRIPTED:
        entry = _scripted(sched, step)
        idx = next((i for i, a in enumerate(update) if entry.matches(a)), None)
        if idx is None:
            raise ScheduleMismatchError(f"step {step}: {cls.value} target {entry.target!r} matches nothing in [{update}]")
    else:
        candidates = [i for i, (n, v) in enumerate(update) if scope.permits(n, v)]
        if not candidates:
            return update, None
        idx = _random_draw(sched, scope, step)[1].choice(candidates)
    assignment = update.assignments[idx]
    if not scope.permits(*assignment):
        raise ScopeViolationError(f"{cls.value} on {render_assignment(assignment)} is outside the scope")
    filtered = update.without(idx) if cls is FaultClass.LOST else update.duplicating(idx)
    return filtered, Fault(cls, assignment)


def filter_update(
    sched: InjectionSchedule, scope: FaultScope | None, step: int, update: StateUpdate
) -> StateUpdate:
    """The update as the environment lets it through at ``step``."""
    return filter_with_fault(sched, scope, step, update)[0]


def fabricate(
    sched: InjectionSchedule, scope: FaultScope | None, step: int, state: State
) -> tuple[StateUpdate, Fault | None]:
    if planned(sched, scope, step) is not FaultClass.FAKE:
        return StateUpdate(), None
    schema = state.schema
    if sched.mode is Mode.SCRIPTED:
        entry = _scripted(sched, step)
        assignment = (entry.variable, schema.parse_value(entry.variable, entry.value_text))
    else:
        pairs = scope.permitted_assignments(schema)
        if not pairs:
            return StateUpdate(), None
        assignment = _random_draw(sched, scope, step)[1].choice(pairs)
    if not scope.allows(FaultClass.FAKE) or not scope.permits(*assignment):
        raise ScopeViolationError(f"fabricated {render_assignment(assignment)} is outside the scope")
    return StateUpdate.of(assignment), Fault(FaultClass.FAKE, assignment)


def ei_step(sched: InjectionSchedule, scope: FaultScope | None, step: int, state: State) -> StateUpdate:
    """The fabricated update the injector applies at ``step`` (empty if none)."""
    return fabricate(sched, scope, step, state)[0]


def check_ei_respects_guarantee(sched: InjectionSchedule, scope: FaultScope, trace: Trace) -> Verdict:
    """Audit a finished trace: every injector event must stay within scope."""
    problems: list[str] = []
    script = list(sched.script) if sched.mode is Mode.SCRIPTED else None
    for ev in trace:
        if not ev.is_ei:
            continue
        try:
            cls = FaultClass(ev.op)
        except ValueError:
            problems.append(f"event {ev.step}: unknown fault class {ev.op!r}")
            continue
        if not scope.allows(cls):
            problems.append(f"event {ev.step}: class {cls.value} is not permitted by the scope")
        if not ev.update:
            problems.append(f"event {ev.step}: injector event touches no assignment")
        for a in ev.update:
            if not scope.permits(*a):
                problems.append(f"event {ev.step}: {render_assignment(a)} is outside the scope")
            if script is not None and not any(f.fault_class is cls and f.matches(a) for f in script):
                problems.append(f"event {ev.step}: {cls.value} {render_assignment(a)} was not scheduled")
    if problems:
        return Verdict(Status.VIOLATED, violations=tuple(problems))
    return Verdict(Status.HOLDS)


def scope_from_dict(doc: Mapping[str, Any]) -> FaultScope:
    variables = doc.get("variables")
    classes = doc.get("classes")
    if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
        raise ConfigError("scope.variables must be an array of patterns")
    if not isinstance(classes, list):
        raise ConfigError("scope.classes must be an array")
    try:
        parsed = frozenset(FaultClass(c) for c in classes)
    except ValueError as exc:
        raise ConfigError(f"scope.classes: {exc}") from exc
    return FaultScope(tuple(variables), parsed)


def injection_from_dict(doc: Mapping[str, Any]) -> tuple[FaultScope, InjectionSchedule]:
    """Decode an injection config document."""
    if not isinstance(doc, Mapping):
        raise ConfigError("injection config must be a JSON object")
    if "scope" not in doc:
        raise ConfigError("injection config needs a 'scope'")
    scope = scope_from_dict(doc["scope"])
    mode_text = doc.get("mode", "scripted")
    try:
        mode = Mode(mode_text)
    except ValueError:
        raise ConfigError(f"mode must be 'scripted' or 'random', got {mode_text!r}") from None
    script = []
    for i, entry in enumerate(doc.get("script", [])):
        if not isinstance(entry, Mapping) or not {"step", "class", "target"} <= set(entry):
            raise ConfigError(f"script[{i}] needs step, class and target")
        try:
            cls = FaultClass(entry["class"])
        except ValueError:
            raise ConfigError(f"script[{i}]: unknown class {entry['class']!r}") from None
        value = entry.get("value")
        script.append(ScriptedFault(int(entry["step"]), cls, str(entry["target"]), None if value is None else str(value)))
    rnd = doc.get("random", {})
    try:
        probability = Fraction(str(rnd.get("probability", 0)))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"random.probability: {exc}") from exc
    sched = InjectionSchedule(mode, tuple(script), int(rnd.get("seed", 0)), probability)
    return scope, sched


def iter_fault_successors(
    scope: FaultScope, update: StateUpdate
) -> Iterable[tuple[StateUpdate, Fault]]:
    """Every single lost/duplicated fault the scope permits on ``update``."""
    for i, a in enumerate(update):
        if not scope.permits(*a):
            continue
        if FaultClass.LOST in scope.classes:
            yield update.without(i), Fault(FaultClass.LOST, a)
        if FaultClass.DUPLICATED in scope.classes:
            yield update.duplicating(i), Fault(FaultClass.DUPLICATED, a)
