import random

import pytest
from hypothesis import given, strategies as st

from d2dsim.selection import (DirectOption, LinkCostInput, Mode, OffloadOption,
                              brute_force_select, expected_transmissions, link_cost,
                              required_rbs, retransmission_factor, select_path)


def _geometric_mean(p, n, seed):
    # independent of numpy: count Bernoulli trials until the first success
    rng = random.Random(seed)
    total = 0
    for _ in range(n):
        tries = 1
        while rng.random() >= p:
            tries += 1
        total += tries
    return total / n


def test_expected_transmissions_certain():
    assert expected_transmissions(1.0) == 1.0


@pytest.mark.parametrize("p", [0.5, 0.25])
def test_expected_transmissions_vs_monte_carlo(p):
    mc = _geometric_mean(p, 100_000, seed=1)
    assert expected_transmissions(p) == pytest.approx(mc, rel=0.02)


def test_expected_transmissions_domain():
    with pytest.raises(ValueError):
        expected_transmissions(0.0)


def test_retransmission_factor_modes():
    assert retransmission_factor(0.2) == pytest.approx(1.25)
    assert retransmission_factor(0.2, literal=True) == pytest.approx(5.0)


@pytest.mark.parametrize("k, p, c, cost", [(10, 0.5, 1, 20.0), (1, 1.0, 1, 1.0), (6, 0.8, 2, 15.0)])
def test_link_cost_examples(k, p, c, cost):
    assert link_cost(LinkCostInput(k, p, c)) == pytest.approx(cost)


@pytest.mark.parametrize("bits, rbs", [(6720, 10), (1, 1), (0, 0), (673, 2)])
def test_required_rbs(bits, rbs):
    assert required_rbs(bits, 672) == rbs


def test_select_offload_when_direct_below_threshold():
    d = select_path(DirectOption(30.0, 8.0), [OffloadOption(4, 12.0, 8.0, 20.0, 14.0)], 10.0)
    assert (d.mode, d.offloader_id, d.total_cost) == (Mode.OFFLOAD, 4, 20.0)
    assert d.x_vector == (0, 1)


def test_select_tie_goes_direct():
    d = select_path(DirectOption(5.0, 15.0), [OffloadOption(2, 2.0, 3.0, 20.0, 20.0)], 10.0)
    assert (d.mode, d.total_cost) == (Mode.DIRECT, 5.0)


def test_select_tie_between_offloaders_lowest_id():
    cands = [OffloadOption(9, 1.0, 1.0, 20, 20), OffloadOption(3, 1.5, 0.5, 20, 20)]
    assert select_path(None, cands, 10.0).offloader_id == 3


def test_select_infeasible():
    d = select_path(None, [], 10.0)
    assert d.mode is Mode.INFEASIBLE and d.x_vector == (0,)


def _random_instance(rng, m):
    # small integer costs make ties common
    direct = None
    if rng.random() < 0.8:
        direct = DirectOption(float(rng.randint(1, 12)), rng.uniform(0, 20))
    ids = rng.sample(range(50), m)
    cands = [OffloadOption(j, float(rng.randint(1, 6)), float(rng.randint(1, 6)),
                           rng.uniform(0, 25), rng.uniform(0, 25)) for j in ids]
    return direct, cands


def test_oracle_equivalence_seeded():
    rng = random.Random(2024)
    for _ in range(2000):
        direct, cands = _random_instance(rng, rng.randint(0, 6))
        a = select_path(direct, cands, 10.0)
        b = brute_force_select(direct, cands, 10.0)
        assert (a.mode, a.offloader_id, a.total_cost, a.x_vector) == \
               (b.mode, b.offloader_id, b.total_cost, b.x_vector)


options = st.builds(
    OffloadOption, st.integers(0, 30), st.integers(1, 8).map(float),
    st.integers(1, 8).map(float), st.floats(0, 25), st.floats(0, 25))
directs = st.none() | st.builds(DirectOption, st.integers(1, 16).map(float), st.floats(0, 25))
unique_cands = st.lists(options, max_size=6, unique_by=lambda c: c.offloader_id)


@given(directs, unique_cands)
def test_decision_shape(direct, cands):
    d = select_path(direct, cands, 10.0)
    assert len(d.x_vector) == len(cands) + 1
    assert sum(d.x_vector) <= 1
    assert (sum(d.x_vector) == 0) == (d.mode is Mode.INFEASIBLE)


@given(directs, unique_cands, st.sampled_from([0.5, 2.0, 7.0]))
def test_uniform_cost_scaling_keeps_choice(direct, cands, s):
    scaled_d = None if direct is None else DirectOption(direct.cost * s, direct.snr_db)
    scaled_c = [OffloadOption(c.offloader_id, c.c_ij_cost * s, c.c_je_cost * s, c.snr_ij_db,
                              c.snr_je_db) for c in cands]
    a = select_path(direct, cands, 10.0)
    b = select_path(scaled_d, scaled_c, 10.0)
    assert (a.mode, a.offloader_id) == (b.mode, b.offloader_id)
    assert b.total_cost == pytest.approx(a.total_cost * s)


@given(directs, unique_cands)
def test_removing_unchosen_candidate_keeps_choice(direct, cands):
    a = select_path(direct, cands, 10.0)
    for c in cands:
        if c.offloader_id == a.offloader_id:
            continue
        rest = [x for x in cands if x is not c]
        b = select_path(direct, rest, 10.0)
        assert (b.mode, b.offloader_id, b.total_cost) == (a.mode, a.offloader_id, a.total_cost)


@given(directs, unique_cands)
def test_removing_chosen_never_lowers_cost(direct, cands):
    a = select_path(direct, cands, 10.0)
    if a.mode is not Mode.OFFLOAD:
        return
    rest = [x for x in cands if x.offloader_id != a.offloader_id]
    b = select_path(direct, rest, 10.0)
    assert b.mode is Mode.INFEASIBLE or b.total_cost >= a.total_cost


@given(st.integers(1, 20), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_cost_monotone_in_success(k, p1, p2):
    lo, hi = sorted((p1, p2))
    assert link_cost(LinkCostInput(k, hi)) <= link_cost(LinkCostInput(k, lo))


def test_floor_only_rule():
    # equal failure rates on every link: two legs always cost twice one leg
    r = retransmission_factor(0.01)
    d = select_path(DirectOption(5 * r, 30.0), [OffloadOption(1, 5 * r, 5 * r, 30, 30)], 10.0)
    assert d.mode is Mode.DIRECT
