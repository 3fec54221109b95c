"""Traveler decision making: the selection gate and routing reactions.

Guided travelers pass a probabilistic selection gate before information
affects their routing.  The gate probability is a logistic in three
bounded context features (service quality, congestion level, compliance
propensity).  Reactions are either rerouting to the cheapest perceived
path or an equilibrium-style switch towards a better alternative.

Two service orderings exist.  In descriptive mode the traveler evaluates
the gate first and only computes a route when it passes; in prescriptive
mode the system client computes the route first and the gate decides
adoption.  Outcomes are identical seed-for-seed; only the number of
routes computed differs.  To keep that parity exact, each decision
consumes exactly one uniform variate: the gate compares it against the
selection probability, and the equilibrium switch re-uses the
conditionally uniform remainder u / p_sel.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

from .errors import UnreachableError, ValidationError
from .learning import PerceivedCosts
from .network import Network, shortest_path


@dataclass(frozen=True)
class SelectionContext:
    """Bounded features feeding the selection gate."""

    x_serv: float
    x_tra: float
    x_user: float

    def __post_init__(self):
        for name in ("x_serv", "x_tra", "x_user"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"SelectionContext: {name} must be in [0,1]")


@dataclass(frozen=True)
class SelectionModel:
    """Logistic gate: p = 1 / (1 + exp(-(bias + w . x)))."""

    bias: float = 0.0
    w_serv: float = 1.0
    w_tra: float = 1.0
    w_user: float = 1.0


def selection_probability(m: SelectionModel, ctx: SelectionContext) -> float:
    z = m.bias + m.w_serv * ctx.x_serv + m.w_tra * ctx.x_tra + m.w_user * ctx.x_user
    # numerically stable logistic; saturates cleanly to 0.0 / 1.0
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class MinPerceivedCost:
    """Reroute to the cheapest path under the traveler's perceived costs."""


@dataclass(frozen=True)
class EquilibriumFeedback:
    """Switch towards the best alternative with a relative-gap probability.

    Switch probability is gain * max(0, (K_cur - K_alt) / K_cur), zero at
    cost equality (the equilibrium indication).
    """

    gain: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.gain <= 1.0:
            raise ValidationError("EquilibriumFeedback: gain must be in (0,1]")


ReactionStrategy = MinPerceivedCost | EquilibriumFeedback


class Mode(enum.Enum):
    DESCRIPTIVE = "descriptive"
    PRESCRIPTIVE = "prescriptive"


def gate_precedes_reaction(mode: Mode) -> bool:
    """Evaluation-order contract: does the gate short-circuit the routing?

    Descriptive routing evaluates the traveler's selection gate before any
    route is computed; prescriptive routing computes the advice first and
    gates only its adoption.  The chosen routes are identical for the same
    random stream; only the computation accounting differs.
    """
    return mode is Mode.DESCRIPTIVE


@dataclass
class Agent:
    """One traveler.

    ``node`` is the last node reached (the upstream node while traversing
    a link); ``link``/``remaining`` are set while on a link.  ``route``
    holds the links not yet entered.  Unguided agents have no perceived
    table and follow their departure-time static route.
    """

    id: int
    origin: int
    dest: int
    depart_step: int
    guided: bool
    node: int
    perceived: PerceivedCosts | None = None
    link: int | None = None
    remaining: int = 0
    route: deque[int] = field(default_factory=deque)
    trip_start: int = 0
    trip_end: int | None = None

    @property
    def position(self) -> int | tuple[int, int]:
        """Node id at a node, (link id, remaining steps) on a link."""
        if self.link is None:
            return self.node
        return (self.link, self.remaining)

    @property
    def at_node(self) -> bool:
        return self.link is None


@dataclass(frozen=True)
class RouteDecision:
    """Outcome of one decision: the adopted route (None keeps the current
    one) and how many routes were computed along the way."""

    route: list[int] | None
    computed: int


def _route_cost(perceived: PerceivedCosts, route) -> float:
    return sum(perceived[lid] for lid in route)


def _react(
    agent: Agent,
    net: Network,
    strategy: ReactionStrategy,
    sub_variate: float,
) -> tuple[list[int] | None, int]:
    """Compute the strategy's advised route; may raise UnreachableError."""
    perceived = agent.perceived
    if isinstance(strategy, MinPerceivedCost):
        return shortest_path(net, perceived, agent.node, agent.dest), 1
    # EquilibriumFeedback: compare the current plan against the cheapest
    # alternative that avoids the next planned link.
    current = list(agent.route)
    if not current:
        return shortest_path(net, perceived, agent.node, agent.dest), 1
    try:
        alternative = shortest_path(
            net, perceived, agent.node, agent.dest, exclude_link=current[0]
        )
    except UnreachableError:
        return None, 1
    k_cur = _route_cost(perceived, current)
    k_alt = _route_cost(perceived, alternative)
    switch_p = strategy.gain * max(0.0, (k_cur - k_alt) / k_cur)
    if sub_variate < switch_p:
        return alternative, 1
    return None, 1


def choose_route(
    agent: Agent,
    net: Network,
    strategy: ReactionStrategy,
    ctx: SelectionContext,
    m: SelectionModel,
    rng,
    mode: Mode = Mode.DESCRIPTIVE,
) -> RouteDecision:
    """Run one guided decision at a node.

    Draws exactly one uniform variate from the agent's stream regardless
    of mode or gate outcome, so descriptive and prescriptive runs stay in
    lockstep on the same seed.  Unguided agents never react; the engine
    assigns their static route at departure.
    """
    if not agent.at_node:
        raise ValidationError("route decisions happen at nodes only")
    if not agent.guided:
        return RouteDecision(None, 0)
    p_sel = selection_probability(m, ctx)
    u = rng.random()
    gate = u < p_sel
    if gate_precedes_reaction(mode) and not gate:
        return RouteDecision(None, 0)
    sub_variate = u / p_sel if p_sel > 0.0 else u
    advised, computed = _react(agent, net, strategy, sub_variate)
    if not gate:
        return RouteDecision(None, computed)
    return RouteDecision(advised, computed)
