"""Distributive learning of link travel costs.

Each traveler carries a personal table of perceived link costs.  When a
piece of information about a link's new cost is active, every traveler
blends it into their table with a weight given by the propagation kernel
at their current distance from the information's origin and the
information's age: perceived = perceived * (1 - p) + new_cost * p.

An active item re-applies its (decaying) weight every step it survives,
so its cumulative effect on a traveler tracks the time-integral of the
kernel.  Items are retired once they are older than max_age or their
weight at the origin falls below expire_epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Protocol

from . import kernels
from .errors import ValidationError
from .network import Network, graph_distance

PerceivedCosts = dict[int, float]


@dataclass(frozen=True)
class InfoItem:
    """One piece of traffic information: a link's new cost, born at a node."""

    id: int
    link: int
    new_cost: int
    origin_node: int
    birth_step: int

    def __post_init__(self):
        if self.new_cost < 1:
            raise ValidationError("InfoItem: new_cost must be >= 1")
        if self.birth_step < 0:
            raise ValidationError("InfoItem: birth_step must be >= 0")


@dataclass(frozen=True)
class LearningConfig:
    """Bounds on the active-item set."""

    expire_epsilon: float = 1e-4
    max_age: int = 50

    def __post_init__(self):
        if not 0 < self.expire_epsilon < 1:
            raise ValidationError("LearningConfig: expire_epsilon must be in (0,1)")
        if self.max_age < 1:
            raise ValidationError("LearningConfig: max_age must be >= 1")


def default_max_age(k: kernels.KernelSpec) -> int:
    """Ten characteristic lifetimes of the kernel, at least 1 step."""
    scale = getattr(k, "ct", None) or getattr(k, "dt", None) or 0.1
    return max(1, math.ceil(10 * scale))


def initial_costs(net: Network) -> PerceivedCosts:
    """Fresh perceived-cost table: free-flow times (static knowledge)."""
    return {lid: float(c) for lid, c in net.free_flow_costs().items()}


def apply_update(
    perceived: PerceivedCosts, link: int, new_cost: float, p: float
) -> PerceivedCosts:
    """Blend one link's new cost into a table with weight p; returns the table."""
    if link not in perceived:
        raise ValidationError(f"unknown link {link} in perceived-cost table")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"update weight must be in [0,1], got {p}")
    perceived[link] = perceived[link] * (1.0 - p) + new_cost * p
    return perceived


def compute_weight(
    k: kernels.KernelSpec,
    item: InfoItem,
    agent_position: int,
    now: int,
    net: Network,
) -> float:
    """Kernel weight of an item for an observer at a node, at step `now`."""
    if now < item.birth_step:
        raise ValidationError("item cannot influence anyone before its birth step")
    x = graph_distance(net, item.origin_node, agent_position)
    return kernels.evaluate(k, x, now - item.birth_step)


class Learner(Protocol):
    """What step_learning needs from an agent: a node and a cost table."""

    node: int
    perceived: PerceivedCosts | None


def step_learning(
    agents: Iterable[Learner],
    items: list[InfoItem],
    k: kernels.KernelSpec,
    now: int,
    net: Network,
    cfg: LearningConfig,
) -> list[InfoItem]:
    """Apply all live items to all agents' tables; return the survivors.

    Items apply in (birth_step, id) order so newer information about the
    same link dominates after a full pass.  Items already expired (too
    old, or weight at the origin below expire_epsilon) apply nothing.
    """
    items = sorted(items, key=lambda it: (it.birth_step, it.id))
    live: list[InfoItem] = []
    for item in items:
        age = now - item.birth_step
        if age > cfg.max_age:
            continue
        if kernels.evaluate(k, 0.0, age) < cfg.expire_epsilon:
            continue
        live.append(item)
    if not live:
        return live

    # Weights depend on the agent only through its node, so cache per
    # (item, node) pair; agent populations share a handful of nodes.
    weights: dict[tuple[int, int], float] = {}
    for agent in agents:
        table = agent.perceived
        if table is None:
            continue
        node = agent.node
        for item in live:
            key = (item.id, node)
            p = weights.get(key)
            if p is None:
                p = compute_weight(k, item, node, now, net)
                weights[key] = p
            if p > 0.0:
                table[item.link] = table[item.link] * (1.0 - p) + item.new_cost * p
    return live
