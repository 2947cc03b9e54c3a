from __future__ import annotations

from dataclasses import dataclass

import pytest

from actorgrid.clock import VirtualClock
from actorgrid.context import ContextStore
from actorgrid.graph import GraphRegistry
from actorgrid.ids import ActorId
from actorgrid.runtime import ActorRuntime, BehaviorTable


@dataclass(frozen=True)
class SetState:
    key: str
    value: object


@dataclass(frozen=True)
class LogArrival:
    tag: str = ""


@dataclass(frozen=True)
class Forward:
    dst: ActorId
    payload: object


def _on_set(ctx, msg: SetState):
    ctx.set_state(msg.key, msg.value)


def _on_log(ctx, msg: LogArrival):
    entry = (str(ctx.envelope.src), ctx.envelope.seq, msg.tag)
    ctx.set_state("log", ctx.state.get("log", ()) + (entry,))


def _on_forward(ctx, msg: Forward):
    ctx.send(msg.dst, msg.payload)


CELL_TABLE = BehaviorTable(
    "cell", {SetState: _on_set, LogArrival: _on_log, Forward: _on_forward}
)


@pytest.fixture
def clock():
    return VirtualClock()


@pytest.fixture
def store(clock):
    return ContextStore(clock)


@pytest.fixture
def graph():
    return GraphRegistry()


@pytest.fixture
def plain_runtime():
    runtime = ActorRuntime()
    runtime.register_behavior(CELL_TABLE)
    return runtime


def make_view(edges, n=None, kind="node"):
    """Build a GraphView by hand: edges are (i, j[, weight]) over integer nodes."""
    from actorgrid.graph import EdgeView, GraphView

    def node(i):
        return ActorId(kind, f"n{i:03d}")

    max_node = max([max(i, j) for i, j, *_ in edges], default=-1)
    count = n if n is not None else max_node + 1
    nodes = tuple(node(i) for i in range(count))
    edge_views = tuple(
        EdgeView(node(i), node(j), "link", float(w[0]) if w else 1.0)
        for i, j, *w in edges
    )
    return GraphView(
        at=0,
        nodes=nodes,
        kinds={nd: kind for nd in nodes},
        attrs={nd: {} for nd in nodes},
        edges=edge_views,
    )
