import math
from dataclasses import replace

import pytest

import guidesim as g
from guidesim.engine import Simulation, _dominant_od
from guidesim.errors import ScenarioError, ValidationError

HEADER = "link_id,from_node,to_node,length,t0,capacity,alpha,beta"


def _single_link_net(t0=5):
    return g.load_network(HEADER + f"\n1,1,2,5.0,{t0},100,0,4\n")


def _basic_cfg(net, **overrides):
    defaults = dict(
        network=net,
        demand=[g.DemandEntry(1, 2, rate=0.5, guided_fraction=1.0, window=(0, 10**9))],
        kernel=g.NaturalSpaceTime(cx=2, ct=3),
        steps=100,
        warmup=10,
        seed=1,
    )
    defaults.update(overrides)
    return g.ScenarioConfig(**defaults)


# -- config validation -------------------------------------------------------


def test_steps_must_exceed_warmup(parallel_net):
    with pytest.raises(ScenarioError, match="steps.*warmup"):
        _basic_cfg(parallel_net, steps=10, warmup=10)


def test_seed_bounds(parallel_net):
    with pytest.raises(ScenarioError):
        _basic_cfg(parallel_net, seed=-1)


def test_emission_config():
    assert g.EmissionConfig.from_frequency(0.2).period == 5
    assert g.EmissionConfig.from_frequency(5.0).period == 1
    with pytest.raises(ValidationError):
        g.EmissionConfig(period=0)
    with pytest.raises(ValidationError):
        g.EmissionConfig.from_frequency(0.0)


# -- basic trips --------------------------------------------------------------


def test_single_trip_duration():
    net = _single_link_net(t0=5)
    cfg = _basic_cfg(net, demand=[g.DemandEntry(1, 2, rate=0.1, window=(0, 10))],
                     steps=40, warmup=0)
    metrics, ts = g.run(cfg)
    # accumulator reaches 1.0 at step 9; the lone trip takes exactly t0
    assert len(ts.trips) == 1
    step, duration, od = ts.trips[0]
    assert duration == 5
    assert od == (1, 2)
    assert metrics.att == 5.0
    assert metrics.completed == 1


def test_chain_trip_is_sum_of_link_times(chain_net):
    # transfers at intermediate nodes are seamless: decide and advance in
    # the same step
    cfg = _basic_cfg(chain_net,
                     demand=[g.DemandEntry(1, 3, rate=0.1, window=(0, 10))],
                     steps=40, warmup=0)
    _, ts = g.run(cfg)
    assert [t[1] for t in ts.trips] == [3 + 4]


def test_fractional_accumulator_rate():
    net = _single_link_net()
    cfg = _basic_cfg(net, demand=[g.DemandEntry(1, 2, rate=0.25, window=(0, 400))],
                     steps=400, warmup=0)
    _, ts = g.run(cfg)
    assert ts.spawned == 100


def test_guided_fraction_accumulator(parallel_net):
    cfg = _basic_cfg(parallel_net,
                     demand=[g.DemandEntry(1, 2, rate=1.0, guided_fraction=0.5,
                                           window=(0, 100))],
                     steps=100, warmup=0)
    sim = Simulation(cfg)
    sim.run()
    # exactly half the spawned travelers carry a perceived-cost table
    assert sim.spawned == 100


def test_zero_rate_demand(parallel_net):
    cfg = _basic_cfg(parallel_net,
                     demand=[g.DemandEntry(1, 2, rate=0.0)], steps=50, warmup=0)
    metrics, ts = g.run(cfg)
    assert metrics.completed == 0
    assert math.isnan(metrics.att)
    assert metrics.convergence_time is None
    assert ts.active_items == [0] * 50  # nothing changes, nothing is emitted


def test_unreachable_od_dropped():
    net = g.load_network(HEADER + "\n1,1,2,1.0,1,10,0.15,4\n#nodes\n9\n")
    cfg = _basic_cfg(net, demand=[
        g.DemandEntry(1, 9, rate=1.0),
        g.DemandEntry(1, 2, rate=0.5),
    ])
    sim = Simulation(cfg)
    assert len(sim.dropped_entries) == 1
    assert sim.dropped_entries[0].dest == 9
    metrics, _ = sim.run()
    assert metrics.completed > 0


# -- conservation and determinism ---------------------------------------------


def test_vehicle_conservation(two_route_cfg):
    cfg = replace(two_route_cfg, steps=250, warmup=50)
    _, ts = g.run(cfg)
    completed = failed = 0
    trips = iter(sorted(ts.trips))
    failures = iter(sorted(ts.failures))
    next_trip = next(trips, None)
    next_failure = next(failures, None)
    for i, step in enumerate(ts.steps):
        while next_trip is not None and next_trip[0] <= step:
            completed += 1
            next_trip = next(trips, None)
        while next_failure is not None and next_failure[0] <= step:
            failed += 1
            next_failure = next(failures, None)
        assert ts.spawned_cum[i] == completed + failed + ts.in_flight[i]


def test_run_deterministic(two_route_cfg):
    cfg = replace(two_route_cfg, steps=200, warmup=50)
    _, ts1 = g.run(cfg)
    _, ts2 = g.run(cfg)
    assert ts1.att_window == ts2.att_window
    assert ts1.route_split == ts2.route_split
    assert ts1.volumes == ts2.volumes
    assert ts1.trips == ts2.trips


def test_seed_changes_selection_draws(two_route_cfg):
    cfg_a = replace(two_route_cfg, steps=200, warmup=50, seed=1)
    cfg_b = replace(two_route_cfg, steps=200, warmup=50, seed=2)
    _, ts_a = g.run(cfg_a)
    _, ts_b = g.run(cfg_b)
    assert ts_a.route_split != ts_b.route_split


# -- static assignment (no information) ---------------------------------------


def test_zero_kernel_no_switching(two_route_cfg):
    cfg = replace(two_route_cfg, kernel=g.Zero(), steps=300, warmup=50)
    metrics, ts = g.run(cfg)
    series = ts.route_split[(1, 3)]
    assert g.count_direction_flips(series[50:]) == 0
    assert metrics.oscillation_index == 0.0
    assert all(v == 1.0 for v in series if not math.isnan(v))


def test_zero_kernel_unguided_volumes_stationary():
    net = g.load_network(
        HEADER + "\n1,1,2,12.0,12,100,0,4\n2,2,3,4.0,4,5,0,4\n3,2,3,4.0,4,5,0,4\n"
    )
    cfg = g.ScenarioConfig(
        network=net,
        demand=[g.DemandEntry(1, 3, rate=1.0, guided_fraction=0.0,
                              window=(0, 10**9))],
        kernel=g.Zero(), steps=300, warmup=0, seed=3,
    )
    _, ts = g.run(cfg)
    tail = [[ts.volumes[lid][i] for lid in ts.link_ids] for i in range(250, 300)]
    assert all(row == tail[0] for row in tail)


def test_information_helps_over_static(two_route_cfg):
    cfg = replace(two_route_cfg, steps=300, warmup=50)
    static = []
    informed = []
    for seed in range(10):
        m0, _ = g.run(replace(cfg, kernel=g.Zero(), seed=seed))
        m1, _ = g.run(replace(cfg, kernel=g.NaturalSpaceTime(cx=4, ct=4), seed=seed))
        static.append(m0.att)
        informed.append(m1.att)
    assert sum(static) / 10 >= sum(informed) / 10


# -- emission ------------------------------------------------------------------


def test_emission_suppressed_when_unchanged(parallel_net):
    cfg = _basic_cfg(parallel_net, demand=[g.DemandEntry(1, 2, rate=0.0)])
    sim = Simulation(cfg)
    for t in range(20):
        sim._emit(t)
    assert sim.items == []


def test_emission_on_change_and_periodic(parallel_net):
    cfg = _basic_cfg(
        parallel_net,
        emission=g.EmissionConfig(period=10, change_threshold=100.0),
    )
    sim = Simulation(cfg)
    sim.occupancy[1] = 30  # push link 1 far above free flow
    sim._emit(3)  # off-cadence, change below the huge threshold
    assert sim.items == []
    sim._emit(10)  # periodic slot
    assert len(sim.items) == 1
    assert sim.items[0].link == 1
    assert sim.items[0].origin_node == parallel_net.links[1].from_node
    assert sim.items[0].new_cost == g.link_travel_time(parallel_net.links[1], 30)
    sim._emit(20)  # unchanged since last emission: suppressed
    assert len(sim.items) == 1


def test_emission_immediate_on_big_change(parallel_net):
    cfg = _basic_cfg(
        parallel_net,
        emission=g.EmissionConfig(period=1000, change_threshold=0.2),
    )
    sim = Simulation(cfg)
    sim.occupancy[1] = 30
    sim._emit(3)  # relative change far above 0.2 triggers immediately
    assert len(sim.items) == 1


# -- metrics -------------------------------------------------------------------


def _series_ts(split):
    ts = g.TimeSeries(od_pairs=[(1, 2)], link_ids=[1])
    ts.steps = list(range(len(split)))
    ts.att_window = [10.0] * len(split)
    ts.route_split[(1, 2)] = split
    ts.volumes[1] = [0] * len(split)
    ts.active_items = [0] * len(split)
    ts.trips = [(s, 10, (1, 2)) for s in range(len(split))]
    return ts


def test_count_direction_flips():
    assert g.count_direction_flips([0.5] * 10) == 0
    alternating = [0.0, 1.0] * 100
    assert g.count_direction_flips(alternating) == 199
    assert g.count_direction_flips([0.1, 0.2, 0.3, 0.4]) == 1
    assert g.count_direction_flips([math.nan, math.nan, 0.4, 0.4]) == 0
    assert g.count_direction_flips([]) == 0


def test_oscillation_index_alternating_series():
    split = [0.0, 1.0] * 100  # 200 post-warmup steps, flip every step
    metrics = g.compute_metrics(_series_ts(split), warmup=0)
    assert metrics.oscillation_index == pytest.approx(99.5)


def test_convergence_time_constant_series():
    ts = _series_ts([0.5] * 200)
    metrics = g.compute_metrics(ts, warmup=30, conv_window=50, conv_cv=0.05)
    assert metrics.convergence_time == 30


def test_convergence_none_when_noisy():
    ts = _series_ts([0.5] * 200)
    ts.att_window = [10.0 if i % 2 else 30.0 for i in range(200)]
    metrics = g.compute_metrics(ts, warmup=0, conv_window=50, conv_cv=0.05)
    assert metrics.convergence_time is None


def test_metrics_empty_run():
    ts = g.TimeSeries(od_pairs=[(1, 2)], link_ids=[1])
    ts.steps = list(range(10))
    ts.att_window = [math.nan] * 10
    ts.route_split[(1, 2)] = [math.nan] * 10
    ts.volumes[1] = [0] * 10
    ts.active_items = [0] * 10
    metrics = g.compute_metrics(ts, warmup=0)
    assert math.isnan(metrics.att)
    assert metrics.convergence_time is None
    assert metrics.completed == 0


def test_dominant_od_most_completions():
    ts = g.TimeSeries(od_pairs=[(1, 2), (1, 3)], link_ids=[1])
    ts.trips = [(5, 4, (1, 3))] * 3 + [(5, 4, (1, 2))] * 2
    assert _dominant_od(ts, warmup=0) == (1, 3)
    # ties break towards the smallest pair
    ts.trips = [(5, 4, (1, 3))] * 2 + [(5, 4, (1, 2))] * 2
    assert _dominant_od(ts, warmup=0) == (1, 2)


def test_att_only_counts_post_warmup():
    ts = _series_ts([0.5] * 100)
    ts.trips = [(10, 100, (1, 2)), (60, 20, (1, 2))]
    metrics = g.compute_metrics(ts, warmup=50)
    assert metrics.att == 20.0
    assert metrics.completed == 1


# -- mode accounting -----------------------------------------------------------


def test_prescriptive_computes_more_routes(two_route_cfg):
    base = replace(two_route_cfg, steps=200, warmup=50)
    desc, _ = g.run(replace(base, mode=g.Mode.DESCRIPTIVE))
    presc, _ = g.run(replace(base, mode=g.Mode.PRESCRIPTIVE))
    assert presc.routes_computed > desc.routes_computed
    assert desc.att == presc.att
    assert desc.oscillation_index == presc.oscillation_index


def test_descriptive_blocked_gate_computes_nothing(two_route_cfg):
    cfg = replace(two_route_cfg, steps=200, warmup=50,
                  selection=g.SelectionModel(bias=-1000.0))
    metrics, _ = g.run(cfg)
    # all travelers are guided: with the gate closed, nothing is computed
    assert metrics.routes_computed == 0


def test_mode_outcomes_identical_seed_for_seed(two_route_cfg):
    base = replace(two_route_cfg, steps=200, warmup=50,
                   strategy=g.EquilibriumFeedback(gain=0.6))
    for seed in (1, 5):
        d, ts_d = g.run(replace(base, mode=g.Mode.DESCRIPTIVE, seed=seed))
        p, ts_p = g.run(replace(base, mode=g.Mode.PRESCRIPTIVE, seed=seed))
        assert ts_d.trips == ts_p.trips
        assert ts_d.route_split == ts_p.route_split


def test_pretrip_only_no_enroute_switching(two_route_cfg):
    cfg = replace(two_route_cfg, steps=200, warmup=50, pretrip_only=True)
    metrics, ts = g.run(cfg)
    # choices happen only at the origin, where knowledge is still static:
    # every traveler keeps the reference route
    series = [v for v in ts.route_split[(1, 3)] if not math.isnan(v)]
    assert all(v == 1.0 for v in series)
