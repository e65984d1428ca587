"""State-machine substrate: variables with declared domains, fairness-annotated
nondeterministic processes, bounded-window message channels, and canonical
state identity.

A model is a finite set of named variables plus a list of processes. Each
process maps a state to a finite set of successor states; the union over
processes, taken in declared process order, is the transition relation.
Terminal states are absorbing: once the terminal predicate holds, no process
produces successors.

States are stored as plain tuples of values in declared variable order. That
keeps successor generation and deduplication cheap; `SystemState` wraps a
tuple with name-based access for callers that want it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Sequence

Value = Any  # ints, bools, None, strings, or nested tuples of these


class DomainError(ValueError):
    """A state assigns a value outside its variable's declared domain."""


class ChannelError(ValueError):
    """A channel operation violated its window precondition."""


class ModelError(ValueError):
    """A model definition is internally inconsistent."""


# --- channels ---------------------------------------------------------------
#
# A channel is an immutable tuple used as a FIFO queue with a bounded delivery
# window: `take` may remove any of the first min(eta, len) elements, where
# index 1 is the oldest undelivered element. Enumerating every legal index is
# the sole source of message-reordering nondeterminism in models built on
# this kernel.


def channel_push(queue: tuple, item: Value) -> tuple:
    """Append one element at the tail."""
    return queue + (item,)


def channel_take(queue: tuple, i: int, eta: int) -> tuple[Value, tuple]:
    """Remove and return the i-th element (1-based) within the delivery window.

    The window is 1..min(eta, len(queue)); i outside it is a precondition
    violation, as is taking from an empty channel.
    """
    if not queue:
        raise ChannelError("take from an empty channel")
    window = min(eta, len(queue))
    if not 1 <= i <= window:
        raise ChannelError(f"index {i} outside delivery window 1..{window}")
    return queue[i - 1], queue[: i - 1] + queue[i:]


# --- processes and models ----------------------------------------------------


class Fairness(Enum):
    """Scheduling assumption attached to one process.

    UF: no assumption. WF: if continuously enabled, eventually taken.
    SF: if enabled infinitely often, eventually taken.
    """

    UF = "UF"
    WF = "WF"
    SF = "SF"


@dataclass(frozen=True)
class VarSpec:
    """One declared variable: a name, a domain membership check, and a
    human-readable domain description used in error messages."""

    name: str
    check: Callable[[Value], bool]
    describe: str = ""


@dataclass(frozen=True)
class ProcessDef:
    """One process: a name, a fairness class, and a step function.

    `step` takes a raw value tuple and returns a duplicate-free sequence of
    successor value tuples, in a fixed enumeration order that defines the
    canonical successor order for this process. An empty sequence means the
    process is disabled in that state.
    """

    name: str
    fairness: Fairness
    step: Callable[[tuple], Sequence[tuple]]


class SystemState:
    """A full variable assignment. Equality and hashing consider only the
    values, in declared variable order; that is the sole identity notion."""

    __slots__ = ("vals", "_model")

    def __init__(self, model: "Model", vals: tuple):
        self.vals = vals
        self._model = model

    def __getitem__(self, name: str) -> Value:
        return self.vals[self._model.index_of(name)]

    @property
    def assignment(self) -> dict[str, Value]:
        return dict(zip(self._model.var_names, self.vals))

    def replace(self, **changes: Value) -> "SystemState":
        vals = list(self.vals)
        for name, value in changes.items():
            vals[self._model.index_of(name)] = value
        return SystemState(self._model, tuple(vals))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SystemState) and self.vals == other.vals

    def __hash__(self) -> int:
        return hash(self.vals)

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={v!r}" for n, v in zip(self._model.var_names, self.vals))
        return f"SystemState({inner})"


class Model:
    """A finite-state model: declared variables, initial states, processes in
    a fixed order, and an absorbing terminal predicate."""

    def __init__(
        self,
        variables: Sequence[VarSpec],
        initial: Iterable[tuple],
        processes: Sequence[ProcessDef],
        terminal: Callable[[tuple], bool] = lambda vals: False,
        name: str = "model",
    ):
        self.variables = tuple(variables)
        self.var_names = tuple(v.name for v in self.variables)
        if len(set(self.var_names)) != len(self.var_names):
            raise ModelError("duplicate variable names")
        self._index = {n: i for i, n in enumerate(self.var_names)}
        self.processes = tuple(processes)
        names = [p.name for p in self.processes]
        if len(set(names)) != len(names):
            raise ModelError("duplicate process names")
        self.terminal_raw = terminal
        self.name = name

        # Initial states are a set; duplicates in the input collapse.
        seen: dict[tuple, None] = {}
        for vals in initial:
            vals = tuple(vals)
            if len(vals) != len(self.variables):
                raise ModelError(
                    f"initial state has {len(vals)} values for {len(self.variables)} variables"
                )
            self.validate(vals)
            seen.setdefault(vals, None)
        if not seen:
            raise ModelError("a model needs at least one initial state")
        self.initial = tuple(seen)

    # -- lookups --

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown variable {name!r}") from None

    def fairness_map(self) -> dict[str, Fairness]:
        return {p.name: p.fairness for p in self.processes}

    # -- state construction --

    def state(self, vals: tuple) -> SystemState:
        return SystemState(self, tuple(vals))

    def initial_state(self, k: int = 0) -> SystemState:
        return self.state(self.initial[k])

    # -- validation --

    def validate(self, vals: tuple) -> None:
        for spec, value in zip(self.variables, vals):
            if not spec.check(value):
                hint = f" ({spec.describe})" if spec.describe else ""
                raise DomainError(f"variable {spec.name!r} holds {value!r} outside its domain{hint}")

    def validate_changed(self, old: tuple, new: tuple) -> None:
        # Unchanged slots were validated when `old` was admitted; only new
        # writes need checking. Identity comparison gives false positives on
        # equal-but-rebuilt values, which merely re-validates.
        for spec, before, after in zip(self.variables, old, new):
            if after is not before and not spec.check(after):
                hint = f" ({spec.describe})" if spec.describe else ""
                raise DomainError(f"variable {spec.name!r} holds {after!r} outside its domain{hint}")

    # -- transitions --

    def terminal(self, state: SystemState | tuple) -> bool:
        vals = state.vals if isinstance(state, SystemState) else state
        return self.terminal_raw(vals)

    def raw_successors(self, vals: tuple) -> list[tuple[int, tuple]]:
        """All (process index, successor tuple) pairs, process order first,
        each process's canonical successor order second. Terminal states are
        absorbing and yield nothing."""
        if self.terminal_raw(vals):
            return []
        out: list[tuple[int, tuple]] = []
        for k, proc in enumerate(self.processes):
            for nv in proc.step(vals):
                out.append((k, nv))
        return out

    def successors(self, state: SystemState) -> list[tuple[str, SystemState]]:
        """Public successor enumeration; validates every produced state."""
        out = []
        for k, nv in self.raw_successors(state.vals):
            self.validate_changed(state.vals, nv)
            out.append((self.processes[k].name, SystemState(self, nv)))
        return out

    def enabled(self, state: SystemState) -> list[str]:
        return sorted({name for name, _ in self.successors(state)},
                      key=[p.name for p in self.processes].index)


# --- canonical identity -------------------------------------------------------

_DIGEST_BYTES = 16  # 128 bits; collisions negligible at 1e8 states


def canonical_digest(state: SystemState | tuple) -> bytes:
    """Stable fixed-width digest of a state's values.

    Built from the repr of the value tuple, which is injective over the
    kernel's value vocabulary (ints, bools, None, strings, nested tuples),
    so two states collide only through the hash itself. Stable across runs,
    platforms, and worker counts.
    """
    vals = state.vals if isinstance(state, SystemState) else state
    return hashlib.sha256(repr(vals).encode()).digest()[:_DIGEST_BYTES]


def digest_hex(state: SystemState | tuple) -> str:
    return canonical_digest(state).hex()
