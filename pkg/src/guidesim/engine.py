"""Discrete-time simulation engine.

One run executes a fixed number of integer steps over an immutable
network.  Each step proceeds in a strict phase order:

1. demand generation -- deterministic fractional-accumulator arrivals
   (an entry spawns a traveler whenever its accumulated rate reaches 1);
   the guided flag is assigned by a second accumulator so the guided
   share is exact, not sampled.
2. route decisions -- every traveler standing at a node runs its
   decision logic (see behavior module).
3. movement -- travelers at nodes enter the next link of their route,
   locking in the link's travel time at the volume seen on entry
   (mesoscopic convention); then every traveler on a link advances one
   step.  Reaching the end of the final link completes the trip.
4. information emission -- each link whose realized travel time differs
   from the last emitted value emits an information item on the periodic
   cadence, or immediately when the relative change exceeds the
   threshold.  Unchanged costs are never re-emitted.
5. learning -- all live items update all guided travelers' perceived
   costs (see learning module).
6. recording -- one time-series row per step.

Conventions: travel times are whole steps, locked at link entry.  A
traveler that reaches an intermediate node during movement decides at
the start of the following step and advances onto the next link within
that same step, so transfers cost no extra time.  The random seed
governs only the selection-gate draws; arrivals and tie-breaking are
deterministic.
"""

from __future__ import annotations

import math
import sys
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import behavior, csvio, kernels, learning
from .behavior import Agent, Mode, ReactionStrategy, SelectionContext, SelectionModel
from .errors import ScenarioError, UnreachableError, ValidationError
from .network import DemandEntry, Network, link_travel_time, load_network, shortest_path


@dataclass(frozen=True)
class EmissionConfig:
    """When links publish their realized travel times.

    period is the regular publication cadence in steps (the reciprocal of
    the upgrade frequency); change_threshold triggers an immediate,
    off-cadence emission when the relative change is larger.
    """

    period: int = 1
    change_threshold: float = 0.2

    def __post_init__(self):
        if self.period < 1:
            raise ValidationError("EmissionConfig: period must be >= 1")
        if self.change_threshold < 0:
            raise ValidationError("EmissionConfig: change_threshold must be >= 0")

    @classmethod
    def from_frequency(cls, f: float, change_threshold: float = 0.2) -> "EmissionConfig":
        """Build from an upgrade frequency in emissions per step per link."""
        if f <= 0:
            raise ValidationError("emission frequency must be > 0")
        return cls(period=max(1, round(1.0 / f)), change_threshold=change_threshold)


@dataclass
class ScenarioConfig:
    """Everything a run needs.  ``network`` may be a file path or a loaded
    Network; ``max_age=None`` derives the item lifetime cap from the kernel."""

    network: str | Network
    demand: list[DemandEntry]
    kernel: kernels.KernelSpec
    steps: int
    warmup: int = 0
    seed: int = 0
    selection: SelectionModel = field(default_factory=SelectionModel)
    strategy: ReactionStrategy = field(default_factory=behavior.MinPerceivedCost)
    mode: Mode = Mode.DESCRIPTIVE
    emission: EmissionConfig = field(default_factory=EmissionConfig)
    pretrip_only: bool = False
    expire_epsilon: float = 1e-4
    max_age: Optional[int] = None
    x_serv: float = 1.0
    x_user: float = 0.5
    att_window: int = 20
    conv_window: int = 50
    conv_cv: float = 0.05

    def __post_init__(self):
        if self.warmup < 0 or self.steps <= self.warmup:
            raise ScenarioError(
                f"steps must exceed warmup >= 0 (steps={self.steps}, warmup={self.warmup})"
            )
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must fit in 64 bits")
        if self.att_window < 1 or self.conv_window < 1:
            raise ScenarioError("att_window and conv_window must be >= 1")
        if not self.demand:
            raise ScenarioError("at least one demand entry is required")


@dataclass
class Metrics:
    """Performance measures of one run, excluding the warmup window."""

    att: float
    convergence_time: Optional[int]
    oscillation_index: float
    completed: int
    failed: int
    routes_computed: int


@dataclass
class TimeSeries:
    """Per-step observables plus the trip log the metrics derive from."""

    od_pairs: list[tuple[int, int]]
    link_ids: list[int]
    steps: list[int] = field(default_factory=list)
    att_window: list[float] = field(default_factory=list)
    route_split: dict[tuple[int, int], list[float]] = field(default_factory=dict)
    volumes: dict[int, list[int]] = field(default_factory=dict)
    active_items: list[int] = field(default_factory=list)
    # trip log: (completion step, duration, od); failures: (step, od)
    trips: list[tuple[int, int, tuple[int, int]]] = field(default_factory=list)
    failures: list[tuple[int, tuple[int, int]]] = field(default_factory=list)
    spawned: int = 0
    routes_computed: int = 0
    in_flight: list[int] = field(default_factory=list)
    spawned_cum: list[int] = field(default_factory=list)

    def __post_init__(self):
        for od in self.od_pairs:
            self.route_split.setdefault(od, [])
        for lid in self.link_ids:
            self.volumes.setdefault(lid, [])


class Simulation:
    """Mutable state of one run; create fresh per run."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.net = (
            cfg.network
            if isinstance(cfg.network, Network)
            else load_network(_read_text(cfg.network))
        )
        self.kernel = cfg.kernel
        self.learning_cfg = learning.LearningConfig(
            expire_epsilon=cfg.expire_epsilon,
            max_age=cfg.max_age
            if cfg.max_age is not None
            else learning.default_max_age(cfg.kernel),
        )
        self.freeflow = {lid: float(c) for lid, c in self.net.free_flow_costs().items()}

        # Drop demand entries whose OD is unreachable even at free flow.
        self.demand: list[DemandEntry] = []
        self.static_routes: dict[tuple[int, int], list[int]] = {}
        self.dropped_entries: list[DemandEntry] = []
        for entry in cfg.demand:
            od = (entry.origin, entry.dest)
            if od not in self.static_routes:
                try:
                    self.static_routes[od] = shortest_path(
                        self.net, self.freeflow, entry.origin, entry.dest
                    )
                except UnreachableError:
                    self.dropped_entries.append(entry)
                    print(
                        f"guidesim: demand entry {entry.origin}->{entry.dest} "
                        "is unreachable at free flow; dropped",
                        file=sys.stderr,
                    )
                    continue
            self.demand.append(entry)
        self.od_pairs = sorted({(e.origin, e.dest) for e in self.demand})
        # Route split is measured at the OD's first real choice point: the
        # share of the OD's vehicles on the reference (static) route's link
        # out of all its vehicles leaving that node.  Counts are maintained
        # incrementally at link entry/exit.
        self.choice_point: dict[tuple[int, int], tuple[int, int] | None] = {}
        self._split_watch: dict[tuple[int, int], tuple[frozenset[int], int]] = {}
        self._split_counts: dict[tuple[int, int], list[int]] = {}
        for od in self.od_pairs:
            self.choice_point[od] = None
            node = od[0]
            for lid in self.static_routes[od]:
                if len(self.net.outgoing(node)) > 1:
                    self.choice_point[od] = (node, lid)
                    watched = frozenset(l.id for l in self.net.outgoing(node))
                    self._split_watch[od] = (watched, lid)
                    self._split_counts[od] = [0, 0]
                    break
                node = self.net.links[lid].to_node

        self.agents: list[Agent] = []
        self._rngs: dict[int, np.random.Generator] = {}
        self._spawn_acc = [0.0] * len(self.demand)
        self._guided_acc = [0.0] * len(self.demand)
        self._next_agent_id = 0
        self._next_item_id = 0
        self.items: list[learning.InfoItem] = []
        self.occupancy: dict[int, int] = {lid: 0 for lid in sorted(self.net.links)}
        self.last_emitted: dict[int, int] = {
            lid: link_travel_time(link, 0) for lid, link in sorted(self.net.links.items())
        }
        self._recent_trips: deque[tuple[int, int]] = deque()
        self._last_split: dict[tuple[int, int], float] = {
            od: math.nan for od in self.od_pairs
        }
        self.spawned = 0
        self.completed = 0
        self.failed = 0
        self.routes_computed = 0
        self.ts = TimeSeries(od_pairs=self.od_pairs, link_ids=sorted(self.net.links))

    # -- phases ---------------------------------------------------------

    def _spawn(self, t: int) -> None:
        for i, entry in enumerate(self.demand):
            start, end = entry.window
            if not start <= t < end:
                continue
            self._spawn_acc[i] += entry.rate
            while self._spawn_acc[i] >= 1.0 - 1e-12:
                self._spawn_acc[i] -= 1.0
                self._guided_acc[i] += entry.guided_fraction
                guided = self._guided_acc[i] >= 1.0 - 1e-12
                if guided:
                    self._guided_acc[i] -= 1.0
                agent_id = self._next_agent_id
                self._next_agent_id += 1
                agent = Agent(
                    id=agent_id,
                    origin=entry.origin,
                    dest=entry.dest,
                    depart_step=t,
                    guided=guided,
                    node=entry.origin,
                    perceived=learning.initial_costs(self.net) if guided else None,
                    trip_start=t,
                )
                self.agents.append(agent)
                self._rngs[agent_id] = np.random.default_rng([self.cfg.seed, agent_id])
                self.spawned += 1

    def _decide(self, t: int) -> None:
        cfg = self.cfg
        ctx = SelectionContext(cfg.x_serv, self._congestion_level(), cfg.x_user)
        failed: list[Agent] = []
        for agent in self.agents:
            if agent.link is not None or agent.node == agent.dest:
                continue
            fresh = not agent.route
            if fresh:
                if agent.guided:
                    # static knowledge: the cached free-flow route
                    agent.route = deque(self.static_routes[(agent.origin, agent.dest)])
                else:
                    agent.route = deque(
                        shortest_path(self.net, self.freeflow, agent.node, agent.dest)
                    )
                    self.routes_computed += 1
            if agent.guided and (fresh or not cfg.pretrip_only):
                try:
                    decision = behavior.choose_route(
                        agent,
                        self.net,
                        cfg.strategy,
                        ctx,
                        cfg.selection,
                        self._rngs[agent.id],
                        mode=cfg.mode,
                    )
                except UnreachableError:
                    failed.append(agent)
                    continue
                self.routes_computed += decision.computed
                if decision.route is not None:
                    agent.route = deque(decision.route)
        for agent in failed:
            self._remove_failed(agent, t)

    def _move(self, t: int) -> None:
        # entries first: agents standing at a node step onto their next link
        for agent in self.agents:
            if agent.link is None and agent.route:
                lid = agent.route.popleft()
                link = self.net.links[lid]
                travel = link_travel_time(link, self.occupancy[lid])
                self.occupancy[lid] += 1
                agent.link = lid
                agent.remaining = travel
                self._split_adjust(agent, lid, +1)
        # then everyone on a link advances one step
        done: list[Agent] = []
        for agent in self.agents:
            if agent.link is None:
                continue
            agent.remaining -= 1
            if agent.remaining <= 0:
                link = self.net.links[agent.link]
                self.occupancy[agent.link] -= 1
                self._split_adjust(agent, agent.link, -1)
                agent.link = None
                agent.node = link.to_node
                if agent.node == agent.dest:
                    agent.trip_end = t + 1
                    done.append(agent)
        for agent in done:
            duration = agent.trip_end - agent.trip_start
            self.ts.trips.append((t, duration, (agent.origin, agent.dest)))
            self._recent_trips.append((t, duration))
            self.completed += 1
            self._drop(agent)

    def _emit(self, t: int) -> None:
        cfg = self.cfg.emission
        for lid in self.ts.link_ids:
            link = self.net.links[lid]
            realized = link_travel_time(link, self.occupancy[lid])
            last = self.last_emitted[lid]
            if realized == last:
                continue
            periodic_due = t % cfg.period == 0
            big_change = abs(realized - last) / last > cfg.change_threshold
            if periodic_due or big_change:
                self.items.append(
                    learning.InfoItem(
                        id=self._next_item_id,
                        link=lid,
                        new_cost=realized,
                        origin_node=link.from_node,
                        birth_step=t,
                    )
                )
                self._next_item_id += 1
                self.last_emitted[lid] = realized

    def _learn(self, t: int) -> None:
        self.items = learning.step_learning(
            self.agents, self.items, self.kernel, t, self.net, self.learning_cfg
        )

    def _record(self, t: int) -> None:
        ts = self.ts
        ts.steps.append(t)
        window = self.cfg.att_window
        while self._recent_trips and self._recent_trips[0][0] <= t - window:
            self._recent_trips.popleft()
        if self._recent_trips:
            ts.att_window.append(
                sum(d for _, d in self._recent_trips) / len(self._recent_trips)
            )
        else:
            ts.att_window.append(math.nan)
        for od in self.od_pairs:
            if self.choice_point[od] is None:
                # single-path OD: the whole flow is the reference route
                self._last_split[od] = 1.0
            else:
                total, on_ref = self._split_counts[od]
                if total > 0:
                    self._last_split[od] = on_ref / total
            ts.route_split[od].append(self._last_split[od])
        for lid in ts.link_ids:
            ts.volumes[lid].append(self.occupancy[lid])
        ts.active_items.append(len(self.items))
        ts.in_flight.append(len(self.agents))
        ts.spawned_cum.append(self.spawned)

    # -- helpers --------------------------------------------------------

    def _split_adjust(self, agent: Agent, lid: int, delta: int) -> None:
        watch = self._split_watch.get((agent.origin, agent.dest))
        if watch is not None and lid in watch[0]:
            counts = self._split_counts[(agent.origin, agent.dest)]
            counts[0] += delta
            if lid == watch[1]:
                counts[1] += delta

    def _congestion_level(self) -> float:
        levels = [
            self.occupancy[lid] / self.net.links[lid].capacity
            for lid in self.ts.link_ids
        ]
        return min(1.0, max(0.0, sum(levels) / len(levels)))

    def _remove_failed(self, agent: Agent, t: int) -> None:
        self.ts.failures.append((t, (agent.origin, agent.dest)))
        self.failed += 1
        self._drop(agent)

    def _drop(self, agent: Agent) -> None:
        self.agents.remove(agent)
        self._rngs.pop(agent.id, None)

    def run(self) -> tuple[Metrics, TimeSeries]:
        for t in range(self.cfg.steps):
            self._spawn(t)
            self._decide(t)
            self._move(t)
            self._emit(t)
            self._learn(t)
            self._record(t)
        self.ts.spawned = self.spawned
        self.ts.routes_computed = self.routes_computed
        metrics = compute_metrics(
            self.ts,
            self.cfg.warmup,
            conv_window=self.cfg.conv_window,
            conv_cv=self.cfg.conv_cv,
        )
        metrics.routes_computed = self.routes_computed
        return metrics, self.ts


def run(cfg: ScenarioConfig) -> tuple[Metrics, TimeSeries]:
    """Execute one scenario; deterministic given (cfg, seed)."""
    return Simulation(cfg).run()


def count_direction_flips(series: list[float]) -> int:
    """Direction reversals of a series' first difference.

    The first movement counts as a flip, every later movement counts when
    it reverses the previous movement's direction; NaN gaps contribute
    nothing.  A constant series has zero flips; a series alternating every
    step has one flip per step after the first.
    """
    flips = 0
    last_sign = 0
    prev = math.nan
    for value in series:
        if not (math.isnan(value) or math.isnan(prev)):
            diff = value - prev
            sign = (diff > 0) - (diff < 0)
            if sign != 0:
                if sign != last_sign:
                    flips += 1
                last_sign = sign
        prev = value
    return flips


def compute_metrics(
    ts: TimeSeries,
    warmup: int,
    conv_window: int = 50,
    conv_cv: float = 0.05,
) -> Metrics:
    """Reduce a time series to the run's performance measures.

    att averages trips completing at or after the warmup step (NaN when
    none).  Convergence is the first step s >= warmup whose following
    conv_window att values have a coefficient of variation below conv_cv.
    The oscillation index counts route-split direction flips for the
    dominant OD, normalized per 100 steps.
    """
    post = [d for (s, d, _) in ts.trips if s >= warmup]
    att = sum(post) / len(post) if post else math.nan
    completed = len(post)
    failed = sum(1 for (s, _) in ts.failures if s >= warmup)

    convergence: Optional[int] = None
    values = ts.att_window
    for s in range(warmup, len(values) - conv_window + 1):
        window = values[s : s + conv_window]
        if any(math.isnan(v) for v in window):
            continue
        mean = sum(window) / conv_window
        var = sum((v - mean) ** 2 for v in window) / conv_window
        if mean > 0 and math.sqrt(var) / mean < conv_cv:
            convergence = s
            break

    oscillation = 0.0
    dominant = _dominant_od(ts, warmup)
    if dominant is not None:
        series = ts.route_split[dominant][warmup:]
        if series:
            oscillation = count_direction_flips(series) / len(series) * 100.0

    return Metrics(
        att=att,
        convergence_time=convergence,
        oscillation_index=oscillation,
        completed=completed,
        failed=failed,
        routes_computed=ts.routes_computed,
    )


def _dominant_od(ts: TimeSeries, warmup: int) -> Optional[tuple[int, int]]:
    if not ts.od_pairs:
        return None
    counts = {od: 0 for od in ts.od_pairs}
    for s, _, od in ts.trips:
        if s >= warmup and od in counts:
            counts[od] += 1
    # most completed trips, ties to the smallest pair
    return min(counts, key=lambda od: (-counts[od], od))


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def write_metrics_csv(metrics: Metrics, path) -> None:
    """One-row summary: att,convergence_time,oscillation_index,completed,
    failed,routes_computed (att ``nan`` and convergence ``none`` when
    undefined)."""
    csvio.write_csv(
        path,
        ["att", "convergence_time", "oscillation_index", "completed", "failed",
         "routes_computed"],
        [[
            metrics.att,
            "none" if metrics.convergence_time is None else metrics.convergence_time,
            metrics.oscillation_index,
            metrics.completed,
            metrics.failed,
            metrics.routes_computed,
        ]],
    )


def write_timeseries_csv(ts: TimeSeries, path) -> None:
    """Per-step rows: step, windowed ATT, per-OD route splits, per-link
    volumes, live information items."""
    header = (
        ["step", "att_window"]
        + [f"route_split_{o}_{d}" for o, d in ts.od_pairs]
        + [f"vol_{lid}" for lid in ts.link_ids]
        + ["active_items"]
    )
    rows = []
    for i, step in enumerate(ts.steps):
        row = [step, ts.att_window[i]]
        row += [ts.route_split[od][i] for od in ts.od_pairs]
        row += [ts.volumes[lid][i] for lid in ts.link_ids]
        row.append(ts.active_items[i])
        rows.append(row)
    csvio.write_csv(path, header, rows)
