"""Rely/guarantee operation semantics over finite-domain global state.

A :class:`StateSchema` fixes the shared variables and their finite domains.
Operations read a :class:`State` and, when their rely holds, emit a
:class:`StateUpdate` (an ordered list of assignments) that is applied
atomically.  Keeping updates as data lets the error injector drop,
duplicate or fabricate individual assignments.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

from .errors import ArityError, DomainError, ExplosionError, PreconditionError, SchemaError

DEFAULT_CAP = 10**6

Assignment = tuple[str, Any]
Args = tuple[Any, ...]


def render(value: Any) -> str:
    """Text form of a domain value; ``None`` is the null route/train."""
    return "null" if value is None else str(value)


class StateSchema:
    """Named variables, each with a non-empty finite domain."""

    __slots__ = ("variables", "names", "_index", "_domains", "_members")

    def __init__(self, variables: Iterable[tuple[str, Iterable[Any]]]) -> None:
        variables = tuple((name, tuple(domain)) for name, domain in variables)
        names = [name for name, _ in variables]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate variable names: {', '.join(dupes)}")
        for name, domain in variables:
            if not domain:
                raise SchemaError(f"variable {name!r} has an empty domain")
        self.variables = variables
        self.names = tuple(names)
        self._index = {name: i for i, name in enumerate(names)}
        self._domains = dict(variables)
        self._members = {name: frozenset(domain) for name, domain in variables}

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.names)

    def __repr__(self) -> str:
        return f"StateSchema({len(self.names)} variables, {self.size} states)"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def domain(self, name: str) -> tuple[Any, ...]:
        self.index(name)
        return self._domains[name]

    def admits(self, name: str, value: Any) -> bool:
        return value in self._members[name]

    @property
    def size(self) -> int:
        return math.prod(len(d) for _, d in self.variables)

    def make(self, bindings: Mapping[str, Any]) -> State:
        """Build a validated state from a total binding map."""
        extra = set(bindings) - set(self.names)
        if extra:
            raise SchemaError(f"unknown variables: {', '.join(sorted(extra))}")
        missing = [n for n in self.names if n not in bindings]
        if missing:
            raise SchemaError(f"state is not total, missing: {', '.join(missing)}")
        for name in self.names:
            if not self.admits(name, bindings[name]):
                raise DomainError(f"{name}={bindings[name]!r} outside its domain")
        return State(self, tuple(bindings[n] for n in self.names))

    def states(self) -> Iterator[State]:
        """Every state of the schema, in lexicographic domain order."""
        for values in itertools.product(*(d for _, d in self.variables)):
            yield State(self, values)

    def parse_value(self, name: str, text: str) -> Any:
        for value in self.domain(name):
            if render(value) == text:
                return value
        raise DomainError(f"{text!r} is not in the domain of {name}")


class State:
    """An immutable, total valuation of a schema's variables."""

    __slots__ = ("schema", "values", "_hash")

    def __init__(self, schema: StateSchema, values: tuple[Any, ...]) -> None:
        self.schema = schema
        self.values = values
        self._hash = hash(values)

    def __getitem__(self, name: str) -> Any:
        return self.values[self.schema.index(name)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return self.schema is other.schema and self.values == other.values

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{n}={render(v)}" for n, v in zip(self.schema.names, self.values))
        return f"State({body})"

    def as_dict(self) -> dict[str, Any]:
        return dict(zip(self.schema.names, self.values))

    def apply(self, update: StateUpdate) -> State:
        """Apply assignments left to right; later writes win."""
        if not update.assignments:
            return self
        values = list(self.values)
        schema = self.schema
        for name, value in update.assignments:
            if name not in schema:
                raise SchemaError(f"update writes unknown variable {name!r}")
            if not schema.admits(name, value):
                raise SchemaError(f"update writes {name}:={render(value)} outside its domain")
            values[schema.index(name)] = value
        return State(schema, tuple(values))

    def diff(self, other: State) -> dict[str, tuple[Any, Any]]:
        """Variables whose value differs, mapped to (self, other) values."""
        return {
            n: (a, b)
            for n, a, b in zip(self.schema.names, self.values, other.values)
            if a != b
        }


@dataclass(frozen=True)
class StateUpdate:
    assignments: tuple[Assignment, ...] = ()

    @classmethod
    def of(cls, *assignments: Assignment) -> StateUpdate:
        return cls(tuple(assignments))

    def __iter__(self) -> Iterator[Assignment]:
        return iter(self.assignments)

    def __len__(self) -> int:
        return len(self.assignments)

    def __bool__(self) -> bool:
        return bool(self.assignments)

    def __str__(self) -> str:
        return ";".join(f"{n}:={render(v)}" for n, v in self.assignments)

    def then(self, other: StateUpdate) -> StateUpdate:
        return StateUpdate(self.assignments + other.assignments)

    def without(self, index: int) -> StateUpdate:
        return StateUpdate(self.assignments[:index] + self.assignments[index + 1 :])

    def duplicating(self, index: int) -> StateUpdate:
        a = self.assignments
        return StateUpdate(a[: index + 1] + (a[index],) + a[index + 1 :])

    @classmethod
    def parse(cls, text: str, schema: StateSchema) -> StateUpdate:
        if not text:
            return cls()
        out = []
        for part in text.split(";"):
            name, sep, value = part.partition(":=")
            if not sep:
                raise SchemaError(f"malformed assignment {part!r}")
            out.append((name, schema.parse_value(name, value)))
        return cls(tuple(out))


class Arity(Enum):
    ONE = 1
    TWO = 2


@dataclass(frozen=True)
class Predicate:
    """A decidable condition over one state or a (before, after) pair.

    One-state functions are called as ``fn(state, args)``; two-state ones as
    ``fn(before, after, args)``.
    """

    name: str
    fn: Callable[..., bool]
    arity: Arity = Arity.ONE

    def __call__(self, before: State, after: State | None = None, args: Args = ()) -> bool:
        return evaluate_rely(self, before, after, args)


TRUE = Predicate("true", lambda s, a: True)
FALSE = Predicate("false", lambda s, a: False)


def evaluate_rely(pred: Predicate, before: State, after: State | None = None, args: Args = ()) -> bool:
    """Truth value of ``pred``.

    A one-state predicate given a transition is read as a stable assumption:
    if it held before the step it must still hold after it.
    """
    if not isinstance(before, State) or (after is not None and not isinstance(after, State)):
        raise SchemaError("predicates are evaluated on State values")
    if after is not None and after.schema is not before.schema:
        raise SchemaError("before and after states use different schemas")
    if pred.arity is Arity.TWO:
        if after is None:
            raise ArityError(f"two-state predicate {pred.name!r} needs a before and an after state")
        return bool(pred.fn(before, after, args))
    if after is None:
        return bool(pred.fn(before, args))
    return (not pred.fn(before, args)) or bool(pred.fn(after, args))


Guarantee = Callable[[State, Args], StateUpdate]
Precondition = Callable[[State, Args], None]


def _check_args(name: str, params: Sequence[tuple[str, tuple[Any, ...]]], args: Args) -> Args:
    args = tuple(args)
    if len(args) != len(params):
        raise DomainError(f"{name} takes {len(params)} arguments, got {len(args)}")
    for (pname, domain), value in zip(params, args):
        if value not in domain:
            raise DomainError(f"{name}: {pname}={value!r} outside its domain")
    return args


@dataclass(frozen=True)
class RGOperation:
    name: str
    params: tuple[tuple[str, tuple[Any, ...]], ...]
    rely: Predicate
    guarantee: Guarantee
    # Engine-level guard checked before the rely; raises a PreconditionError.
    precondition: Precondition | None = None

    def arg_tuples(self) -> list[Args]:
        return list(itertools.product(*(d for _, d in self.params)))

    def check_args(self, args: Args) -> Args:
        return _check_args(self.name, self.params, args)


@dataclass(frozen=True)
class Layer:
    rely: Predicate
    guarantee: Guarantee


@dataclass(frozen=True)
class LayeredOperation:
    """Ordered (rely, guarantee) layers; layer 0 is normal behaviour."""

    name: str
    params: tuple[tuple[str, tuple[Any, ...]], ...]
    layers: tuple[Layer, ...]
    precondition: Precondition | None = None

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError(f"layered operation {self.name!r} needs at least one layer")

    def arg_tuples(self) -> list[Args]:
        return list(itertools.product(*(d for _, d in self.params)))

    def check_args(self, args: Args) -> Args:
        return _check_args(self.name, self.params, args)


Operation = Union[RGOperation, LayeredOperation]


class Outcome(Enum):
    APPLIED = "Applied"
    BLOCKED = "Blocked"
    NOOP = "NoOp"


@dataclass(frozen=True)
class StepResult:
    outcome: Outcome
    state: State
    update: StateUpdate = StateUpdate()
    layer: int | None = None

    @property
    def blocked(self) -> bool:
        return self.outcome is Outcome.BLOCKED


def _rely_holds(rely: Predicate, state: State, args: Args, before: State | None) -> bool:
    # A two-state rely gates on the interference observed since `before`;
    # without history that is the identity transition.
    if rely.arity is Arity.TWO:
        return evaluate_rely(rely, before if before is not None else state, state, args)
    return evaluate_rely(rely, state, None, args)


def select_layer(lop: LayeredOperation, state: State, args: Args, before: State | None = None) -> int | None:
    """Index of the first layer whose rely holds, or ``None`` (no layer)."""
    args = lop.check_args(args)
    for i, layer in enumerate(lop.layers):
        if _rely_holds(layer.rely, state, args, before):
            return i
    return None


def step_operation(op: Operation, state: State, args: Args = (), before: State | None = None) -> StepResult:
    """Run one atomic step of ``op``.

    A failed rely (or, for layered operations, no applicable layer) yields a
    Blocked result carrying the untouched input state.
    """
    args = op.check_args(args)
    if op.precondition is not None:
        op.precondition(state, args)
    if isinstance(op, LayeredOperation):
        layer = select_layer(op, state, args, before)
        if layer is None:
            return StepResult(Outcome.BLOCKED, state)
        guarantee = op.layers[layer].guarantee
    else:
        layer = None
        if not _rely_holds(op.rely, state, args, before):
            return StepResult(Outcome.BLOCKED, state)
        guarantee = op.guarantee
    update = guarantee(state, args)
    if not update:
        return StepResult(Outcome.NOOP, state, update, layer)
    return StepResult(Outcome.APPLIED, state.apply(update), update, layer)


class Status(Enum):
    HOLDS = "Holds"
    VIOLATED = "Violated"
    CAP_EXCEEDED = "CapExceeded"


@dataclass(frozen=True)
class Verdict:
    status: Status
    witness: Any = None
    violations: tuple[str, ...] = ()
    stats: Any = None
    invariant: str | None = None

    @property
    def holds(self) -> bool:
        return self.status is Status.HOLDS

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class LayerWitness:
    state: State
    args: Args
    stronger: int
    weaker: int


@dataclass(frozen=True)
class CompatibilityWitness:
    producer: str
    consumer: str
    before: State
    after: State
    args: Args
    consumer_args: Args = field(default=())


def _applicable(op: Operation, state: State, args: Args) -> bool:
    if op.precondition is None:
        return True
    try:
        op.precondition(state, args)
    except PreconditionError:
        return False
    return True


def check_layer_weakening(
    lop: LayeredOperation,
    schema: StateSchema,
    argspace: Sequence[Args] | None = None,
    cap: int = DEFAULT_CAP,
) -> Verdict:
    """Check that each layer's rely implies every later layer's rely.

    States where the operation's precondition fails are skipped: the
    operation can never fire there.
    """
    argspace = lop.arg_tuples() if argspace is None else [lop.check_args(a) for a in argspace]
    size = schema.size * len(argspace)
    if size > cap:
        raise ExplosionError(size, cap)
    n = len(lop.layers)
    checked = 0
    for state in schema.states():
        for args in argspace:
            if not _applicable(lop, state, args):
                continue
            checked += 1
            truth = [_rely_holds(layer.rely, state, args, None) for layer in lop.layers]
            for i in range(n):
                if not truth[i]:
                    continue
                for j in range(i + 1, n):
                    if not truth[j]:
                        return Verdict(
                            Status.VIOLATED,
                            LayerWitness(state, args, i, j),
                            (f"layer {i} rely holds but layer {j} rely does not",),
                            stats={"checked": checked},
                        )
    return Verdict(Status.HOLDS, stats={"checked": checked})


def check_rg_compatibility(
    ops: Sequence[RGOperation], schema: StateSchema, cap: int = DEFAULT_CAP
) -> Verdict:
    """Check that every transition one operation can make satisfies the
    rely of every other operation."""
    if schema.size > cap:
        raise ExplosionError(schema.size, cap)
    transitions = 0
    for i, producer in enumerate(ops):
        for state in schema.states():
            for args in producer.arg_tuples():
                if not _applicable(producer, state, args):
                    continue
                if not _rely_holds(producer.rely, state, args, None):
                    continue
                after = state.apply(producer.guarantee(state, args))
                transitions += 1
                for j, consumer in enumerate(ops):
                    if i == j:
                        continue
                    for cargs in consumer.arg_tuples():
                        if not evaluate_rely(consumer.rely, state, after, cargs):
                            return Verdict(
                                Status.VIOLATED,
                                CompatibilityWitness(producer.name, consumer.name, state, after, args, cargs),
                                (f"{producer.name} step {state!r} -> {after!r} breaks the rely of {consumer.name}",),
                                stats={"transitions": transitions},
                            )
    return Verdict(Status.HOLDS, stats={"transitions": transitions})
