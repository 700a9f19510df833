"""Independent oracles for the engine tests.

Random toy systems are described by plain data (``ToySpec``); the naive
enumerator interprets that data directly, so it shares no stepping code
with the explorer.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from lfts import Actor, Predicate, RGOperation, StateSchema, StateUpdate, SystemConfig
from lfts.injector import FaultClass, FaultScope, InjectionSchedule


def euclid(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


@dataclass(frozen=True)
class ToyOp:
    # Enabled when var[guard_var] != guard_value; each write sets
    # var[target] := (var[source] + arg + offset) mod size.
    guard_var: int
    guard_value: int
    writes: tuple[tuple[int, int, int], ...]
    args: tuple[int, ...]


@dataclass(frozen=True)
class ToySpec:
    sizes: tuple[int, ...]
    ops: tuple[ToyOp, ...]
    bad: tuple[tuple[int, int], ...]  # invariant: not all var[i] == v
    lost_vars: tuple[int, ...]
    fake_vars: tuple[int, ...]
    depth: int
    init: tuple[int, ...]

    def names(self) -> list[str]:
        return [f"v{i}" for i in range(len(self.sizes))]

    def successors(self, values: tuple[int, ...]) -> list[tuple[int, ...]]:
        out = []
        for op in self.ops:
            if values[op.guard_var] == op.guard_value:
                continue
            for arg in op.args:
                writes = [(t, (values[s] + arg + off) % self.sizes[t]) for t, s, off in op.writes]
                out.append(_assign(values, writes))
                for i, (t, _) in enumerate(writes):
                    if t in self.lost_vars:
                        out.append(_assign(values, writes[:i] + writes[i + 1 :]))
        for t in self.fake_vars:
            for v in range(self.sizes[t]):
                out.append(_assign(values, [(t, v)]))
        return out

    def violates(self, values: tuple[int, ...]) -> bool:
        return all(values[i] == v for i, v in self.bad)

    def initial(self) -> tuple[int, ...]:
        return self.init


def _assign(values: tuple[int, ...], writes) -> tuple[int, ...]:
    out = list(values)
    for t, v in writes:
        out[t] = v
    return tuple(out)


def naive_shortest_violation(spec: ToySpec) -> int | None:
    """Depth-first over every path (no deduplication); the smallest depth
    at which a violating state appears, or None within ``spec.depth``."""
    best: list[int | None] = [None]

    def walk(values: tuple[int, ...], depth: int) -> None:
        if spec.violates(values):
            if best[0] is None or depth < best[0]:
                best[0] = depth
            return
        if depth == spec.depth or (best[0] is not None and depth >= best[0]):
            return
        for nxt in spec.successors(values):
            walk(nxt, depth + 1)

    walk(spec.initial(), 0)
    return best[0]


def naive_reachable(spec: ToySpec) -> set[tuple[int, ...]]:
    seen = {spec.initial()}
    frontier = [spec.initial()]
    for _ in range(spec.depth):
        frontier = [n for s in frontier for n in spec.successors(s)]
        seen.update(frontier)
    return seen


def random_spec(rng: random.Random) -> ToySpec:
    n = rng.randint(2, 3)
    sizes = tuple(rng.randint(2, 4) for _ in range(n))
    ops = []
    for _ in range(rng.randint(1, 3)):
        gv = rng.randrange(n)
        writes = tuple(
            (rng.randrange(n), rng.randrange(n), rng.randint(0, 3)) for _ in range(rng.randint(1, 2))
        )
        ops.append(ToyOp(gv, rng.randrange(sizes[gv]), writes, tuple(sorted(rng.sample(range(3), rng.randint(1, 2))))))
    bad = tuple((i, rng.randrange(sizes[i])) for i in sorted(rng.sample(range(n), rng.randint(1, n))))
    lost = tuple(i for i in range(n) if rng.random() < 0.3)
    fake = tuple(i for i in range(n) if rng.random() < 0.15)
    init = tuple(rng.randrange(k) for k in sizes)
    return ToySpec(sizes, tuple(ops), bad, lost, fake, rng.randint(2, 5), init)


def spec_config(spec: ToySpec) -> SystemConfig:
    """The same toy system, built on the engine."""
    names = spec.names()
    schema = StateSchema([(name, range(size)) for name, size in zip(names, spec.sizes)])
    actors = []
    for k, op in enumerate(spec.ops):

        def rely(s, _a, op=op):
            return s[names[op.guard_var]] != op.guard_value

        def body(s, a, op=op):
            return StateUpdate(
                tuple(
                    (names[t], (s[names[src]] + a[0] + off) % spec.sizes[t]) for t, src, off in op.writes
                )
            )

        rg = RGOperation(f"op{k}", (("x", op.args),), Predicate(f"g{k}", rely), body)
        actors.append(Actor(f"a{k}", rg))
    ei = None
    classes = set()
    if spec.lost_vars:
        classes.add(FaultClass.LOST)
    if spec.fake_vars:
        classes.add(FaultClass.FAKE)
    if classes:
        # One scope covers both classes, so only patterns used by both are safe.
        if spec.lost_vars and spec.fake_vars and set(spec.lost_vars) != set(spec.fake_vars):
            return None
        patterns = [names[i] for i in (spec.lost_vars or spec.fake_vars)]
        ei = (FaultScope(tuple(patterns), frozenset(classes)), InjectionSchedule.empty())

    def ok(s, _a):
        return not all(s[names[i]] == v for i, v in spec.bad)

    return SystemConfig(
        schema,
        schema.make(dict(zip(names, spec.init))),
        tuple(actors),
        ei,
        (Predicate("toy", ok),),
        spec.depth,
    )


def random_specs(seed: int, count: int) -> list[tuple[ToySpec, SystemConfig]]:
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        spec = random_spec(rng)
        # Skip degenerate draws: already bad at the start, or nearly stuck.
        if spec.violates(spec.initial()) or len(naive_reachable(spec)) < 4:
            continue
        cfg = spec_config(spec)
        if cfg is not None:
            out.append((spec, cfg))
    return out
