from __future__ import annotations

import math
import random
from collections import defaultdict

import pytest

from actorgrid.errors import (
    InvalidInterval,
    NoOpenEdge,
    OverlappingValidity,
    UnknownActor,
)
from actorgrid.graph import dump_text, haversine_km, load_text
from actorgrid.ids import ActorId


def sub(i):
    return ActorId("substation", f"s-{i:02d}")


def meter(i):
    return ActorId("meter", f"m-{i:03d}")


@pytest.fixture
def small(graph):
    for i in range(2):
        graph.add_node(sub(i), "substation")
    for i in range(6):
        graph.add_node(meter(i), "meter")
    return graph


def test_add_edge_open_validity(small):
    edge = small.add_edge(sub(0), meter(1), "feeds", 1.0, 10)
    assert edge.valid_to is None
    assert edge.valid_at(10)
    assert not edge.valid_at(9)


def test_duplicate_open_edge_rejected(small):
    small.add_edge(sub(0), meter(1), "feeds", 1.0, 10)
    with pytest.raises(OverlappingValidity):
        small.add_edge(sub(0), meter(1), "feeds", 1.0, 20)


def test_half_open_interval_boundaries(small):
    small.add_edge(sub(0), meter(1), "feeds", 1.0, 10)
    small.end_edge(sub(0), meter(1), "feeds", 50)
    assert small.neighbors(sub(0), "feeds", 49) == [meter(1)]
    assert small.neighbors(sub(0), "feeds", 50) == []
    assert small.neighbors(sub(0), "feeds", 10) == [meter(1)]


def test_end_twice_raises(small):
    small.add_edge(sub(0), meter(1), "feeds", 1.0, 10)
    small.end_edge(sub(0), meter(1), "feeds", 50)
    with pytest.raises(NoOpenEdge):
        small.end_edge(sub(0), meter(1), "feeds", 60)


def test_invalid_interval_rejected(small):
    small.add_edge(sub(0), meter(1), "feeds", 1.0, 10)
    with pytest.raises(InvalidInterval):
        small.end_edge(sub(0), meter(1), "feeds", 10)


def test_reopened_edge_must_not_overlap_history(small):
    small.add_edge(sub(0), meter(1), "feeds", 1.0, 10)
    small.end_edge(sub(0), meter(1), "feeds", 50)
    with pytest.raises(OverlappingValidity):
        small.add_edge(sub(0), meter(1), "feeds", 1.0, 30)
    small.add_edge(sub(0), meter(1), "feeds", 1.0, 50)  # touching is fine


def test_neighbors_before_any_edge_is_empty(small):
    assert small.neighbors(sub(0), "feeds", 5) == []


def test_neighbors_unknown_actor(small):
    with pytest.raises(UnknownActor):
        small.neighbors(ActorId("meter", "nope"), "feeds", 0)


def test_toggle_five_times_yields_five_closed_intervals(small):
    t = 0
    for _ in range(5):
        small.add_edge(sub(0), meter(0), "feeds", 1.0, t)
        small.end_edge(sub(0), meter(0), "feeds", t + 10)
        t += 20
    edges = [e for e in small._out[(sub(0), "feeds")] if e.dst == meter(0)]
    assert len(edges) == 5
    assert all(e.valid_to == e.valid_from + 10 for e in edges)
    # replay of the event log reproduces the same intervals
    replayed = _replay_intervals(small.events, "feeds")[(sub(0), meter(0))]
    assert replayed == [(e.valid_from, e.valid_to) for e in edges]


def _replay_intervals(events, edge_type):
    intervals = defaultdict(list)
    for event in events:
        if event[0] == "add_edge" and event[4] == edge_type:
            _, t, src, dst, _ty, _w = event
            intervals[(ActorId.parse(src), ActorId.parse(dst))].append([t, None])
        elif event[0] == "end_edge" and event[4] == edge_type:
            _, t, src, dst, _ty = event
            for span in reversed(intervals[(ActorId.parse(src), ActorId.parse(dst))]):
                if span[1] is None:
                    span[1] = t
                    break
    return {k: [tuple(s) for s in v] for k, v in intervals.items()}


def test_random_edges_neighbors_match_linear_scan_oracle(graph):
    rng = random.Random(42)
    nodes = [ActorId("node", f"n-{i:02d}") for i in range(10)]
    for n in nodes:
        graph.add_node(n, "node")
    edges = []
    for _ in range(50):
        src, dst = rng.sample(nodes, 2)
        type_ = rng.choice(["feeds", "nearby"])
        start = rng.randrange(0, 80)
        end = start + rng.randrange(5, 40)
        try:
            graph.add_edge(src, dst, type_, 1.0, start)
            graph.end_edge(src, dst, type_, end)
            edges.append((src, dst, type_, start, end))
        except OverlappingValidity:
            continue
    for _ in range(20):
        node = rng.choice(nodes)
        at = rng.randrange(0, 130)
        type_ = rng.choice(["feeds", "nearby"])
        oracle = sorted(
            dst
            for src, dst, ty, start, end in edges
            if src == node and ty == type_ and start <= at < end
        )
        assert graph.neighbors(node, type_, at) == oracle


def _bfs_oracle(edges, origin, at):
    adjacency = defaultdict(set)
    for src, dst, start, end in edges:
        if start <= at and (end is None or at < end):
            adjacency[src].add(dst)
    seen = {origin}
    stack = [origin]
    while stack:
        for nxt in adjacency[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return frozenset(seen)


def test_traverse_disconnected_versus_tie_switch(small):
    for i in range(3):
        small.add_edge(sub(0), meter(i), "feeds", 1.0, 0)
        small.add_edge(sub(1), meter(i + 3), "feeds", 1.0, 0)
    assert small.traverse(sub(0), 5, edge_types=("feeds",)) == frozenset(
        {sub(0), meter(0), meter(1), meter(2)}
    )
    # close a tie at t=10: meters 3..5 move under substation 0
    for i in range(3, 6):
        small.end_edge(sub(1), meter(i), "feeds", 10)
        small.add_edge(sub(0), meter(i), "feeds", 1.0, 10)
    at_10 = small.traverse(sub(0), 10, edge_types=("feeds",))
    at_9 = small.traverse(sub(0), 9, edge_types=("feeds",))
    assert meter(3) in at_10 and meter(3) not in at_9
    assert small.traverse(sub(1), 10, edge_types=("feeds",)) == frozenset({sub(1)})


def test_traverse_matches_bfs_oracle_on_random_topology(graph):
    rng = random.Random(7)
    nodes = [ActorId("node", f"n-{i:02d}") for i in range(12)]
    for n in nodes:
        graph.add_node(n, "node")
    edges = []
    for _ in range(60):
        src, dst = rng.sample(nodes, 2)
        start = rng.randrange(0, 50)
        end = start + rng.randrange(5, 30)
        try:
            graph.add_edge(src, dst, "link", 1.0, start)
            graph.end_edge(src, dst, "link", end)
            edges.append((src, dst, start, end))
        except OverlappingValidity:
            continue
    for _ in range(10):
        origin = rng.choice(nodes)
        at = rng.randrange(0, 90)
        assert graph.traverse(origin, at, edge_types=("link",)) == _bfs_oracle(
            edges, origin, at
        )


# -- service discovery -----------------------------------------------------------


def _station(graph, i, lat, lon, period_hours):
    node = ActorId("weather-station", f"ws-{i:02d}")
    graph.add_node(
        node, "weather-station", {"geo": (lat, lon), "sampling_period": period_hours * 3_600_000_000_000}
    )
    return node


def test_find_service_picks_nearest(graph):
    origin = ActorId("substation", "s-00")
    graph.add_node(origin, "substation", {"geo": (60.0, 10.0)})
    near = _station(graph, 0, 60.027, 10.0, 1)  # ~3 km
    _far = _station(graph, 1, 60.045, 10.0, 1)  # ~5 km
    assert graph.find_service(origin, "weather-station", None, 0) == near


def test_find_service_prefers_predicate_over_distance(graph):
    origin = ActorId("substation", "s-00")
    graph.add_node(origin, "substation", {"geo": (60.0, 10.0)})
    _daily_near = _station(graph, 0, 60.027, 10.0, 24)  # 3 km but daily
    hourly_far = _station(graph, 1, 60.045, 10.0, 1)  # 5 km, hourly

    def hourly(attrs):
        return attrs["sampling_period"] <= 3_600_000_000_000

    assert graph.find_service(origin, "weather-station", hourly, 0) == hourly_far


def test_find_service_random_stations_match_linear_scan(graph):
    rng = random.Random(3)
    stations = []
    for i in range(20):
        lat, lon = 59.0 + rng.random() * 2, 9.0 + rng.random() * 2
        stations.append((_station(graph, i, lat, lon, 1), (lat, lon)))
    origins = []
    for i in range(10):
        origin = ActorId("substation", f"s-{i:02d}")
        geo = (59.0 + rng.random() * 2, 9.0 + rng.random() * 2)
        graph.add_node(origin, "substation", {"geo": geo})
        origins.append((origin, geo))
    for origin, geo in origins:
        oracle = min(
            (( _haversine(geo, s_geo), node) for node, s_geo in stations),
        )[1]
        assert graph.find_service(origin, "weather-station", None, 0) == oracle


def _haversine(a, b):
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    h = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * 6371.0 * math.asin(math.sqrt(h))


def test_haversine_known_distance():
    oslo = (59.9139, 10.7522)
    bergen = (60.3913, 5.3221)
    assert abs(haversine_km(oslo, bergen) - 305) < 10


def test_find_service_distance_tie_breaks_on_smallest_id(graph):
    origin = ActorId("substation", "s-00")
    graph.add_node(origin, "substation", {"geo": (60.0, 10.0)})
    second = _station(graph, 5, 60.03, 10.0, 1)
    first = _station(graph, 2, 60.03, 10.0, 1)  # same spot, smaller id
    assert graph.find_service(origin, "weather-station", None, 0) == first
    assert first < second


def test_interval_soundness_over_random_mutation_sequences(graph):
    # after any sequence of adds/ends (invalid ones rejected), no triple has
    # overlapping validity intervals
    rng = random.Random(29)
    nodes = [ActorId("node", f"n-{i:02d}") for i in range(6)]
    for n in nodes:
        graph.add_node(n, "node")
    for _ in range(400):
        src, dst = rng.sample(nodes, 2)
        if rng.random() < 0.6:
            try:
                graph.add_edge(src, dst, "link", 1.0, rng.randrange(0, 300))
            except OverlappingValidity:
                pass
        else:
            try:
                graph.end_edge(src, dst, "link", rng.randrange(1, 320))
            except (NoOpenEdge, InvalidInterval):
                pass
    spans = defaultdict(list)
    for (src, _type), edges in graph._out.items():
        for e in edges:
            spans[(e.src, e.dst, e.type)].append((e.valid_from, e.valid_to))
    for triple, intervals in spans.items():
        intervals.sort()
        for (s1, e1), (s2, _e2) in zip(intervals, intervals[1:]):
            assert e1 is not None and e1 <= s2, f"overlap on {triple}: {intervals}"


def test_find_service_excludes_nodes_created_later(graph):
    origin = ActorId("substation", "s-00")
    graph.add_node(origin, "substation", {"geo": (60.0, 10.0)})
    _early = _station(graph, 0, 60.1, 10.0, 1)
    late = ActorId("weather-station", "ws-99")
    graph.add_node(late, "weather-station", {"geo": (60.01, 10.0), "sampling_period": 1}, at=500)
    assert graph.find_service(origin, "weather-station", None, 499) == _early
    assert graph.find_service(origin, "weather-station", None, 500) == late


# -- subscriptions ------------------------------------------------------------------


def test_subscribe_idempotent(small):
    small.subscribe(sub(0), meter(0), "consumption")
    small.subscribe(sub(0), meter(0), "consumption")
    assert small.subscribers_of(meter(0), "consumption") == [sub(0)]


def test_subscribers_sorted_and_pattern_matched(small):
    small.subscribe(meter(2), sub(0), "switch_*")
    small.subscribe(meter(1), sub(0), "switch_state")
    assert small.subscribers_of(sub(0), "switch_state") == [meter(1), meter(2)]
    assert small.subscribers_of(sub(0), "other_key") == []


def test_100_random_subscriptions_match_filter_oracle(graph):
    rng = random.Random(11)
    nodes = [ActorId("node", f"n-{i:02d}") for i in range(12)]
    for n in nodes:
        graph.add_node(n, "node")
    keys = ["a", "b", "c"]
    subs = set()
    for _ in range(100):
        subscriber, publisher = rng.sample(nodes, 2)
        key = rng.choice(keys)
        graph.subscribe(subscriber, publisher, key)
        subs.add((subscriber, publisher, key))
    for publisher in nodes:
        for key in keys:
            oracle = sorted(s for s, p, k in subs if p == publisher and k == key)
            assert graph.subscribers_of(publisher, key) == oracle


def test_unsubscribe_removes(small):
    small.subscribe(sub(0), meter(0), "k")
    small.unsubscribe(sub(0), meter(0), "k")
    assert small.subscribers_of(meter(0), "k") == []


# -- snapshots ---------------------------------------------------------------------


def test_snapshot_before_mutations_has_nodes_only(small):
    view = small.snapshot_at(0)
    assert len(view.nodes) == 8
    assert view.edges == ()


def test_snapshot_immutable_after_mutation(small):
    small.add_edge(sub(0), meter(0), "feeds", 1.0, 0)
    view = small.snapshot_at(5)
    edges_before = view.edges
    small.end_edge(sub(0), meter(0), "feeds", 10)
    small.add_edge(sub(1), meter(0), "feeds", 1.0, 10)
    assert view.edges == edges_before
    assert len(small.snapshot_at(5).edges) == 1


def test_snapshot_matches_event_log_replay_at_random_times(graph):
    rng = random.Random(13)
    nodes = [ActorId("node", f"n-{i:02d}") for i in range(8)]
    for n in nodes:
        graph.add_node(n, "node")
    for _ in range(80):
        src, dst = rng.sample(nodes, 2)
        start = rng.randrange(0, 60)
        try:
            graph.add_edge(src, dst, "link", 1.0, start)
            if rng.random() < 0.7:
                graph.end_edge(src, dst, "link", start + rng.randrange(1, 25))
        except OverlappingValidity:
            continue
    for _ in range(25):
        t = rng.randrange(0, 100)
        view = graph.snapshot_at(t)
        replayed = _replay_intervals(graph.events, "link")
        oracle = sorted(
            (src, dst)
            for (src, dst), spans in replayed.items()
            for start, end in spans
            if start <= t and (end is None or t < end)
        )
        assert sorted((e.src, e.dst) for e in view.edges) == oracle


def test_schema_flexibility_new_kind_mid_test(small):
    small.add_edge(sub(0), meter(0), "feeds", 1.0, 0)
    before = small.neighbors(sub(0), "feeds", 5)
    charger = ActorId("ev-charger", "ev-01")
    small.add_node(charger, "ev-charger", {"geo": (60.0, 10.0)}, at=3)
    small.add_edge(charger, meter(0), "draws_from", 2.0, 3)
    # existing records and queries are untouched by the new kind and tag
    assert small.neighbors(sub(0), "feeds", 5) == before
    assert small.neighbors(charger, "draws_from", 3) == [meter(0)]
    view = small.snapshot_at(5)
    assert charger in view.nodes


def test_ingestion_roundtrip(small):
    small.add_edge(sub(0), meter(0), "feeds", 1.5, 0)
    small.subscribe(sub(0), meter(0), "k")  # subscriptions are not part of the file
    text = dump_text(small)
    loaded = load_text(text)
    assert sorted(loaded._nodes) == sorted(small._nodes)
    assert loaded.neighbors(sub(0), "feeds", 0) == [meter(0)]
    assert dump_text(loaded) == text


def test_set_attr_is_temporal_in_snapshots(small):
    small.set_attr(meter(0), "firmware", "v2", 100)
    assert "firmware" not in small.snapshot_at(99).attrs[meter(0)]
    assert small.snapshot_at(100).attrs[meter(0)]["firmware"] == "v2"


def test_mutation_log_persists_in_shared_record_format(tmp_path):
    import pickle

    from actorgrid.graph import GraphRegistry
    from actorgrid.recordio import RecordLog

    path = tmp_path / "graph.log"
    registry = GraphRegistry(log=RecordLog(str(path)))
    registry.add_node(sub(0), "substation")
    registry.add_node(meter(0), "meter")
    registry.add_edge(sub(0), meter(0), "feeds", 1.0, 5)
    registry.end_edge(sub(0), meter(0), "feeds", 9)
    registry.log.close()
    replayed = [pickle.loads(p) for _, p in RecordLog.open_existing(str(path)).replay()]
    assert replayed == registry.events
