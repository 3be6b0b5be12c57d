"""Scenario steps and session events."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from consert.model import Loc, Tri


@dataclass(frozen=True)
class Join:
    system_id: str

    def __str__(self) -> str:
        return f"join {self.system_id}"


@dataclass(frozen=True)
class Leave:
    system_id: str

    def __str__(self) -> str:
        return f"leave {self.system_id}"


@dataclass(frozen=True)
class Bind:
    consumer: str
    slot: str
    provider: str
    service_type: str

    def __str__(self) -> str:
        return f"bind {self.consumer}.{self.slot} -> {self.provider}.{self.service_type}"


@dataclass(frozen=True)
class SetRte:
    system_id: str
    label: str
    value: Tri

    def __str__(self) -> str:
        return f"set-rte {self.system_id}.{self.label} {self.value}"


Event = Union[Join, Leave, Bind, SetRte]


@dataclass(frozen=True)
class Expect:
    """Check on the latest result; ``order=None`` expects no guarantee."""

    system_id: str
    service_type: str
    order: Optional[int]

    def __str__(self) -> str:
        tail = "none" if self.order is None else f"order {self.order}"
        return f"expect {self.system_id}.{self.service_type} {tail}"


@dataclass(frozen=True)
class LoggedEvent:
    seq: int
    event: Event

    def __str__(self) -> str:
        return f"{self.seq} {self.event}"


@dataclass(frozen=True)
class Load:
    path: str
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Root:
    system_id: str
    service_type: str
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Step:
    """One ``event`` line of a scenario: a session event or an expectation."""

    action: Union[Join, Leave, Bind, SetRte, Expect]
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Scenario:
    name: str
    steps: tuple[Union[Load, Root, Step], ...] = ()
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
