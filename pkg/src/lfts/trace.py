"""Run traces and their line-oriented text encoding.

One event per line, tab separated::

    step  actor  op  args(comma-separated)  layer(or -)  outcome  update(var:=value;...)

Error-injector events use the actor ``EI`` and the fault class as the
operation name.  A ``lost``/``duplicated`` event annotates the actor event
just before it (whose update column already shows the filtered effect); a
``fake`` event's update is applied on its own.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from typing import Any

from .errors import ConfigError
from .kernel import Args, Outcome, StateSchema, StateUpdate, render

EI_ACTOR = "EI"


@dataclass(frozen=True)
class Event:
    step: int
    actor: str
    op: str
    args: Args
    layer: int | None
    outcome: Outcome
    update: StateUpdate

    @property
    def is_ei(self) -> bool:
        return self.actor == EI_ACTOR

    def to_line(self) -> str:
        return "\t".join(
            (
                str(self.step),
                self.actor,
                self.op,
                ",".join(render(a) for a in self.args),
                "-" if self.layer is None else str(self.layer),
                self.outcome.value,
                str(self.update),
            )
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "actor": self.actor,
            "op": self.op,
            "args": [render(a) for a in self.args],
            "layer": self.layer,
            "outcome": self.outcome.value,
            "update": [{"var": n, "value": render(v)} for n, v in self.update],
        }


@dataclass(frozen=True)
class Trace:
    events: tuple[Event, ...] = ()
    # Why the run stopped: "steps", "quiescent", "deadlock", "schedule" or "" for witnesses.
    termination: str = ""

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def to_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    def to_json(self) -> list[dict[str, Any]]:
        return [e.to_json() for e in self.events]


ArgParser = Callable[[str, str, Sequence[str]], Args]


def parse_trace(text: str, schema: StateSchema, parse_args: ArgParser) -> Trace:
    """Decode the text form.  ``parse_args(actor, op, fields)`` maps the
    comma-separated argument fields back to domain values."""
    events = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 7:
            raise ConfigError(f"trace line {lineno}: expected 7 tab-separated fields, got {len(cols)}")
        step, actor, op, args, layer, outcome, update = cols
        try:
            events.append(
                Event(
                    int(step),
                    actor,
                    op,
                    parse_args(actor, op, args.split(",") if args else []),
                    None if layer == "-" else int(layer),
                    Outcome(outcome),
                    StateUpdate.parse(update, schema),
                )
            )
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"trace line {lineno}: {exc}") from exc
    return Trace(tuple(events))
