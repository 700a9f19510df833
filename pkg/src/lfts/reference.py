"""Two small reference systems: min of a set (pre/post) and the
two-process GCD computation (rely/guarantee)."""

from __future__ import annotations

from collections.abc import Iterable
from math import gcd
from typing import NamedTuple

from .errors import DomainError, PreconditionError
from .kernel import Arity, Predicate, RGOperation, State, StateSchema, StateUpdate


def min_pre(s: frozenset[int] | set[int]) -> bool:
    """P(S): S is non-empty."""
    return len(s) > 0


def min_post(s: frozenset[int] | set[int], r: int) -> bool:
    """Q(S, r): r is a member of S no greater than any member."""
    return r in s and all(r <= e for e in s)


def find_min(s: Iterable[int]) -> int:
    s = frozenset(s)
    if not min_pre(s):
        raise PreconditionError("P(S): S ≠ ∅")
    if any(not isinstance(e, int) or e < 0 for e in s):
        raise DomainError("find_min is defined on natural numbers")
    return min(s)


# Unbarred names are the state before a step, barred ones the state after.

def _r1(before: State, after: State, _args: tuple) -> bool:
    a, b = before["a"], before["b"]
    a_, b_ = after["a"], after["b"]
    return a == a_ and (a < b or b == b_) and gcd(a, b) == gcd(a_, b_)


def _g1(before: State, after: State, _args: tuple) -> bool:
    a, b = before["a"], before["b"]
    a_, b_ = after["a"], after["b"]
    return b == b_ and (a > b or a == a_) and gcd(a, b) == gcd(a_, b_)


R1 = Predicate("R1", _r1, Arity.TWO)
G1 = Predicate("G1", _g1, Arity.TWO)
R2 = Predicate("R2", _g1, Arity.TWO)  # R2 = G1
G2 = Predicate("G2", _r1, Arity.TWO)  # G2 = R1


def _p1_body(state: State, _args: tuple) -> StateUpdate:
    a, b = state["a"], state["b"]
    if a != b and a > b:
        return StateUpdate.of(("a", a - b))
    return StateUpdate()


def _p2_body(state: State, _args: tuple) -> StateUpdate:
    a, b = state["a"], state["b"]
    if a != b and b > a:
        return StateUpdate.of(("b", b - a))
    return StateUpdate()


class GcdSystem(NamedTuple):
    schema: StateSchema
    initial: State
    ops: tuple[RGOperation, RGOperation]


def build_gcd_system(a0: int, b0: int, bound: int | None = None) -> GcdSystem:
    """P1 decrements ``a``, P2 decrements ``b``; both loop until a = b.

    Values range over 1..bound (default max(a0, b0)), which is closed under
    both decrements.
    """
    if a0 < 1 or b0 < 1:
        raise DomainError("GCD inputs must be positive naturals")
    bound = max(a0, b0) if bound is None else bound
    if bound < max(a0, b0):
        raise DomainError(f"bound {bound} is below the initial values")
    values = tuple(range(1, bound + 1))
    schema = StateSchema([("a", values), ("b", values)])
    initial = schema.make({"a": a0, "b": b0})
    p1 = RGOperation("P1", (), R1, _p1_body)
    p2 = RGOperation("P2", (), R2, _p2_body)
    return GcdSystem(schema, initial, (p1, p2))
