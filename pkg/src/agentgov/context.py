"""Runtime signals and registries with snapshot isolation.

Predicates, machine constraints, and deliberators never read live state:
they read an immutable :class:`RuntimeContext` snapshot, so one loop
execution sees a single consistent view of the world.
"""

from __future__ import annotations

import threading
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Union

Scalar = Union[bool, int, float, str]

_SCALAR_TYPES = (bool, int, float, str)


def is_scalar(value: object) -> bool:
    return isinstance(value, _SCALAR_TYPES)


@dataclass(frozen=True)
class RuntimeContext:
    """Immutable view of runtime signals and registries.

    signals: flat key/value map of boolean, numeric, or string signals.
    registries: named sets of string members (e.g. verified suppliers).
    snapshot_id: opaque token identifying the snapshot a loop run pinned.
    """

    signals: Mapping[str, Scalar]
    registries: Mapping[str, frozenset[str]]
    snapshot_id: str

    @classmethod
    def empty(cls, snapshot_id: str = "ctx-empty") -> "RuntimeContext":
        return cls(signals=MappingProxyType({}), registries=MappingProxyType({}), snapshot_id=snapshot_id)

    @classmethod
    def of(
        cls,
        signals: Mapping[str, Scalar] | None = None,
        registries: Mapping[str, Iterable[str]] | None = None,
        snapshot_id: str = "ctx-adhoc",
    ) -> "RuntimeContext":
        """Build a snapshot directly; convenience for tests and library use."""
        return cls(
            signals=MappingProxyType(dict(signals or {})),
            registries=MappingProxyType({k: frozenset(v) for k, v in (registries or {}).items()}),
            snapshot_id=snapshot_id,
        )

    def to_dict(self) -> dict:
        return {
            "signals": dict(self.signals),
            "registries": {k: sorted(v) for k, v in self.registries.items()},
            "snapshot_id": self.snapshot_id,
        }


class LiveContext:
    """Mutable context state: single writer, wait-free snapshot reads.

    Mutations are operator actions; when a ``recorder`` is wired, every
    mutation emits an audit event describing who changed what.
    """

    def __init__(
        self,
        signals: Mapping[str, Scalar] | None = None,
        registries: Mapping[str, Iterable[str]] | None = None,
        recorder: Callable[[str, str, dict], None] | None = None,
    ) -> None:
        self._lock = threading.Lock()
        self._signals: dict[str, Scalar] = dict(signals or {})
        self._registries: dict[str, set[str]] = {k: set(v) for k, v in (registries or {}).items()}
        self._snapshots = 0
        self._recorder = recorder

    def set_recorder(self, recorder: Callable[[str, str, dict], None] | None) -> None:
        self._recorder = recorder

    def snapshot(self) -> RuntimeContext:
        """Immutable copy of the current committed state."""
        with self._lock:
            self._snapshots += 1
            return RuntimeContext(
                signals=MappingProxyType(dict(self._signals)),
                registries=MappingProxyType({k: frozenset(v) for k, v in self._registries.items()}),
                snapshot_id=f"ctx-{self._snapshots:08d}",
            )

    def set_signal(self, key: str, value: Scalar, actor: str = "operator") -> None:
        if not key:
            raise ValueError("signal key must be non-empty")
        if not is_scalar(value):
            raise ValueError(f"signal {key!r} must be boolean, number, or string, got {type(value).__name__}")
        with self._lock:
            self._signals[key] = value
        self._record("context_signal", actor, {"key": key, "value": value})

    def update_registry(self, name: str, members: Iterable[str], actor: str = "operator") -> None:
        if not name:
            raise ValueError("registry name must be non-empty")
        members = {str(m) for m in members}
        with self._lock:
            self._registries[name] = set(members)
        self._record("context_registry", actor, {"name": name, "members": sorted(members)})

    def state(self) -> dict:
        with self._lock:
            return {
                "signals": dict(self._signals),
                "registries": {k: sorted(v) for k, v in self._registries.items()},
            }

    def _record(self, kind: str, actor: str, detail: dict) -> None:
        if self._recorder is not None:
            self._recorder(kind, actor, detail)
