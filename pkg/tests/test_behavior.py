from collections import deque

import numpy as np
import pytest

import guidesim as g
from guidesim.behavior import RouteDecision
from guidesim.errors import ValidationError

CTX = g.SelectionContext(x_serv=1.0, x_tra=0.5, x_user=0.5)


# -- selection gate ---------------------------------------------------------


def test_logistic_at_zero():
    m = g.SelectionModel(bias=0.0, w_serv=0.0, w_tra=0.0, w_user=0.0)
    assert g.selection_probability(m, CTX) == 0.5


def test_logistic_saturation():
    m = g.SelectionModel(bias=-20.0, w_serv=0.0, w_tra=0.0, w_user=0.0)
    assert g.selection_probability(m, CTX) < 1e-8
    forced = g.SelectionModel(bias=1000.0)
    assert g.selection_probability(forced, CTX) == 1.0
    blocked = g.SelectionModel(bias=-1000.0)
    assert g.selection_probability(blocked, CTX) == 0.0


def test_logistic_monotone_in_user_feature():
    m = g.SelectionModel(bias=0.3, w_serv=0.5, w_tra=-0.7, w_user=2.0)
    for x_serv in (0.0, 0.5, 1.0):
        for x_tra in (0.0, 0.5, 1.0):
            previous = -1.0
            for x_user in np.linspace(0.0, 1.0, 11):
                p = g.selection_probability(
                    m, g.SelectionContext(x_serv, x_tra, float(x_user))
                )
                assert p > previous
                previous = p


def test_logistic_open_interval():
    for bias in (-30.0, -1.0, 0.0, 4.0, 30.0):
        p = g.selection_probability(g.SelectionModel(bias=bias), CTX)
        assert 0.0 < p < 1.0


def test_context_bounds():
    with pytest.raises(ValidationError):
        g.SelectionContext(x_serv=1.5, x_tra=0.0, x_user=0.0)


def test_gain_bounds():
    with pytest.raises(ValidationError):
        g.EquilibriumFeedback(gain=0.0)
    with pytest.raises(ValidationError):
        g.EquilibriumFeedback(gain=1.5)


# -- choose_route -----------------------------------------------------------


def _agent(net, guided=True, node=1, dest=2, route=()):
    return g.Agent(
        id=0,
        origin=1,
        dest=dest,
        depart_step=0,
        guided=guided,
        node=node,
        perceived=g.initial_costs(net) if guided else None,
        route=deque(route),
    )


FORCE = g.SelectionModel(bias=1000.0)
BLOCK = g.SelectionModel(bias=-1000.0)


def test_unguided_never_reacts(parallel_net):
    agent = _agent(parallel_net, guided=False)
    decision = g.choose_route(
        agent, parallel_net, g.MinPerceivedCost(), CTX, FORCE,
        np.random.default_rng(0),
    )
    assert decision == RouteDecision(None, 0)


def test_min_perceived_cost_picks_cheaper(parallel_net):
    agent = _agent(parallel_net, route=[1])
    agent.perceived[2] = 2.0  # link 2 now looks cheaper
    decision = g.choose_route(
        agent, parallel_net, g.MinPerceivedCost(), CTX, FORCE,
        np.random.default_rng(0),
    )
    assert decision.route == [2]
    assert decision.computed == 1


def test_decision_requires_node(parallel_net):
    agent = _agent(parallel_net)
    agent.link = 1
    with pytest.raises(ValidationError):
        g.choose_route(agent, parallel_net, g.MinPerceivedCost(), CTX, FORCE,
                       np.random.default_rng(0))


def test_equilibrium_feedback_no_switch_at_equality(parallel_net):
    strategy = g.EquilibriumFeedback(gain=1.0)
    rng = np.random.default_rng(123)
    switches = 0
    for _ in range(10_000):
        agent = _agent(parallel_net, route=[1])
        decision = g.choose_route(
            agent, parallel_net, strategy, CTX, FORCE, rng
        )
        if decision.route is not None:
            switches += 1
    assert switches == 0


def test_equilibrium_feedback_switch_rate_tracks_gap(parallel_net):
    strategy = g.EquilibriumFeedback(gain=0.8)

    def rate(cur, alt, n=20_000):
        rng = np.random.default_rng(7)
        switched = 0
        for _ in range(n):
            agent = _agent(parallel_net, route=[1])
            agent.perceived[1] = cur
            agent.perceived[2] = alt
            decision = g.choose_route(agent, parallel_net, strategy, CTX, FORCE, rng)
            if decision.route == [2]:
                switched += 1
        return switched / n

    small = rate(10.0, 9.0)   # expected 0.8 * 0.1 = 0.08
    large = rate(10.0, 5.0)   # expected 0.8 * 0.5 = 0.40
    assert small == pytest.approx(0.08, abs=0.01)
    assert large == pytest.approx(0.40, abs=0.02)
    assert small < large


def test_equilibrium_feedback_keeps_route_without_alternative(chain_net):
    # excluding the only outgoing link leaves no alternative: keep course
    agent = _agent(chain_net, dest=3, route=[1, 2])
    decision = g.choose_route(
        agent, chain_net, g.EquilibriumFeedback(gain=1.0), CTX, FORCE,
        np.random.default_rng(0),
    )
    assert decision.route is None
    assert decision.computed == 1


def test_perfect_information_matches_true_shortest(parallel_net):
    # when perceived costs equal true instantaneous costs the chosen route
    # is the true shortest path
    rng = np.random.default_rng(5)
    for _ in range(50):
        true_costs = {1: float(rng.integers(1, 20)), 2: float(rng.integers(1, 20))}
        agent = _agent(parallel_net, route=[1])
        agent.perceived.update(true_costs)
        decision = g.choose_route(
            agent, parallel_net, g.MinPerceivedCost(), CTX, FORCE, rng
        )
        assert decision.route == g.shortest_path(parallel_net, true_costs, 1, 2)


# -- descriptive vs prescriptive ---------------------------------------------


def test_ordering_contract():
    assert g.gate_precedes_reaction(g.Mode.DESCRIPTIVE)
    assert not g.gate_precedes_reaction(g.Mode.PRESCRIPTIVE)


def test_descriptive_gate_short_circuits(parallel_net):
    agent = _agent(parallel_net, route=[1])
    decision = g.choose_route(
        agent, parallel_net, g.MinPerceivedCost(), CTX, BLOCK,
        np.random.default_rng(0), mode=g.Mode.DESCRIPTIVE,
    )
    assert decision == RouteDecision(None, 0)


def test_prescriptive_computes_but_never_adopts(parallel_net):
    agent = _agent(parallel_net, route=[1])
    agent.perceived[2] = 1.0
    decision = g.choose_route(
        agent, parallel_net, g.MinPerceivedCost(), CTX, BLOCK,
        np.random.default_rng(0), mode=g.Mode.PRESCRIPTIVE,
    )
    assert decision.route is None
    assert decision.computed == 1


@pytest.mark.parametrize(
    "strategy", [g.MinPerceivedCost(), g.EquilibriumFeedback(gain=0.7)]
)
def test_mode_parity_seed_for_seed(parallel_net, strategy):
    """Identical adopted routes and stream state across modes, per seed."""
    model = g.SelectionModel(bias=0.0)
    for seed in range(40):
        outcomes = {}
        followups = {}
        for mode in (g.Mode.DESCRIPTIVE, g.Mode.PRESCRIPTIVE):
            rng = np.random.default_rng(seed)
            agent = _agent(parallel_net, route=[1])
            agent.perceived[1] = 9.0
            agent.perceived[2] = 6.0
            decision = g.choose_route(
                agent, parallel_net, strategy, CTX, model, rng, mode=mode
            )
            outcomes[mode] = decision.route
            followups[mode] = rng.random()  # stream must stay in lockstep
        assert outcomes[g.Mode.DESCRIPTIVE] == outcomes[g.Mode.PRESCRIPTIVE]
        assert followups[g.Mode.DESCRIPTIVE] == followups[g.Mode.PRESCRIPTIVE]


def test_mode_parity_with_forced_gate(parallel_net):
    for seed in (0, 1, 2):
        routes = []
        for mode in (g.Mode.DESCRIPTIVE, g.Mode.PRESCRIPTIVE):
            rng = np.random.default_rng(seed)
            agent = _agent(parallel_net, route=[1])
            agent.perceived[2] = 3.0
            decision = g.choose_route(
                agent, parallel_net, g.MinPerceivedCost(), CTX, FORCE, rng,
                mode=mode,
            )
            routes.append(decision.route)
        assert routes[0] == routes[1] == [2]
