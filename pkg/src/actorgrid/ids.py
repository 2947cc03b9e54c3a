"""Actor identity.

An actor is addressed by (kind, local_id). The pair is globally unique and
stable across deactivation and reactivation; every deterministic tie-break in
the system sorts on it.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class ActorId:
    kind: str
    local_id: str

    def __str__(self) -> str:
        return f"{self.kind}/{self.local_id}"

    @classmethod
    def parse(cls, text: str) -> "ActorId":
        kind, sep, local_id = text.partition("/")
        if not sep or not kind or not local_id:
            raise ValueError(f"not an actor id: {text!r}")
        return cls(kind, local_id)


# Reserved source for envelopes injected by the physical world / harness.
# Never spawned; excluded from the message trace and from placement.
EXTERNAL = ActorId("external", "world")
