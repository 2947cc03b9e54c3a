"""Exception hierarchy shared by all subsystems.

Every error the public API can raise is a subclass of :class:`ActorGridError`,
so callers can catch one base type at the CLI boundary and map it to an exit
code.
"""

from __future__ import annotations


class ActorGridError(Exception):
    """Base class for all errors raised by this package."""


# --- actor runtime ---------------------------------------------------------

class DuplicateId(ActorGridError):
    """An actor with the same (kind, local_id) already exists."""


class UnknownKind(ActorGridError):
    """No behavior table is registered for the requested entity kind."""


class UnknownActor(ActorGridError):
    """The referenced actor was never spawned."""


class UnhandledMessage(ActorGridError):
    """The target actor's behavior table has no handler for the payload type."""


class PersistenceFailure(ActorGridError):
    """Writing a snapshot to the persistent store failed."""


class CorruptSnapshot(ActorGridError):
    """A persisted snapshot failed its checksum on read."""


class ClockRegression(ActorGridError):
    """An operation observed a virtual time earlier than its last update."""


# --- context store ---------------------------------------------------------

class MissingUnit(ActorGridError):
    """A numeric measurement was stored without a unit tag."""


class ScopeDenied(ActorGridError):
    """The reader's application tag is outside the record's relevance scope."""


class NotFound(ActorGridError):
    """No context record exists for the requested key at the requested time."""


class EmptySegment(ActorGridError):
    """A time-series operation was applied to a segment with no samples."""


# --- graph registry --------------------------------------------------------

class OverlappingValidity(ActorGridError):
    """A new edge interval would overlap an existing one for the same triple."""


class NoOpenEdge(ActorGridError):
    """end_edge was called but no open edge exists for the triple."""


class InvalidInterval(ActorGridError):
    """An edge interval would be empty or inverted (valid_to <= valid_from)."""


class MissingGeo(ActorGridError):
    """Distance ranking was requested for a node without geo attributes."""


# --- placement -------------------------------------------------------------

class InfeasibleBalance(ActorGridError):
    """No assignment can satisfy the requested balance tolerance."""


class UncoveredNode(ActorGridError):
    """An assignment does not cover every node of the graph view."""


class TooLarge(ActorGridError):
    """The exhaustive partition oracle was asked for more than 12 nodes."""


# --- propagation -----------------------------------------------------------

class NoStateChange(ActorGridError):
    """A topology change was requested that matches the current state."""


class InsufficientRetention(ActorGridError):
    """Meter-level data needed for re-aggregation was deleted or downsampled."""


class AllExcluded(ActorGridError):
    """Every sample for some hour of day falls inside a command interval."""


# --- simulation harness ----------------------------------------------------

class InvalidSpec(ActorGridError):
    """The grid specification is structurally invalid."""


class UnknownScenario(ActorGridError):
    """The requested scenario name is not one of the four drift scenarios."""


class ResolutionTooCoarse(ActorGridError):
    """A weather series is too coarse to drive hourly consumption synthesis."""


class UnknownActorInTrace(ActorGridError):
    """A message trace references an actor missing from the assignment."""
