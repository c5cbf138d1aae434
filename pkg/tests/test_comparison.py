import math

import numpy as np
import pytest

from critprod import comparison, dynamics, models

FAM = models.hopping_family(models.uniform(0.7, 1.5))
TWO_POINT = models.dirac_family(models.two_point(1.0, 0.5, -1.0))


def _th(flavor="asymptotic", eps=1e-8, fam=FAM):
    return comparison.thresholds(fam, eps, flavor=flavor)


def test_literal_thresholds_follow_the_constructive_formulas():
    eps = 1e-8
    th = _th("literal", eps)
    c = models.constants(FAM)
    two_c0 = 2.0 * c.c0
    d = dynamics.delta_of(eps)
    assert abs(th.y_hat_minus - math.log(c.c1 * eps / 2.0) / two_c0) < 1e-12
    assert abs(th.y_hat_plus
               - math.log(2.0 * math.exp(two_c0) / (c.c1 * eps)) / two_c0) < 1e-12
    big_c = 8.0 * math.exp(3.0 * c.c0) * c.c2 / c.c0
    assert abs(th.y_tilde_minus
               - math.log(big_c * eps / d ** 2) / two_c0) < 1e-12
    assert abs(th.y_tilde_c - th.y_tilde_minus - (1.0 + d * d)) < 1e-12
    # literal levels approach -1/(2 c0 delta): the offset is O(delta) small
    assert abs(two_c0 * d * th.y_hat_minus + 1.0) <= 10.0 * d


def test_asymptotic_thresholds_are_symmetric():
    th = _th("asymptotic")
    half = 1.0 / (2.0 * th.c0 * th.delta)
    assert th.y_hat_minus == -half and th.y_hat_plus == half
    assert th.y_tilde_minus == -half and th.y_tilde_plus == half
    assert abs(th.y_tilde_c - (-half + 1.0 + th.delta ** 2)) < 1e-12
    want = math.log(1.0 + math.exp(-2.0 * th.c0)) / (2.0 * th.c0)
    assert abs(th.y_hat_c - th.y_hat_minus - want) < 1e-12


def test_confined_thresholds_use_the_confinement_constant():
    fam = models.ising_family(models.uniform(-0.2, 0.2))
    th = comparison.thresholds(fam, 1e-8, flavor="literal")
    assert th.confined
    c = models.constants(fam)
    assert abs(th.y_hat_minus
               - math.log(c.c1pp * 1e-8 / 2.0) / (2.0 * c.c0)) < 1e-12
    # hopping treated as confined would use a different wall than rotating
    th_r = comparison.thresholds(FAM, 1e-8, flavor="literal")
    assert not th_r.confined


def test_faster_walk_branches():
    th = _th()
    d2 = th.delta ** 2
    s = comparison.start_state("faster", th)
    assert s.y == th.y_tilde_c and not s.armed
    # interior move carries the +delta^2 drift
    s1 = comparison.faster_step(s, 0.5)
    assert abs(s1.y - (s.y + 0.5 + d2)) < 1e-15
    # at or below the wall the walk restarts
    import dataclasses
    low = dataclasses.replace(s, y=th.y_tilde_minus - 0.1)
    assert comparison.faster_step(low, 0.7).y == th.y_tilde_c
    # odd parity climbs with the opposite sign of w
    odd = dataclasses.replace(s, parity=1)
    s2 = comparison.faster_step(odd, 0.5)
    assert abs(s2.y - (s.y - 0.5 + d2)) < 1e-15


def test_faster_walk_arming_and_absorption():
    th = _th()
    d2 = th.delta ** 2
    import dataclasses
    s = comparison.start_state("faster", th)
    near = dataclasses.replace(s, y=-0.3)
    armed = comparison.faster_step(near, 0.5)
    assert armed.armed
    assert abs(armed.o - (-0.3 + 0.5 + d2)) < 1e-15
    # a deep fall disarms (down past target - (1 + d2) + o)
    deep = comparison.faster_step(dataclasses.replace(armed, y=0.1), -1.0)
    assert not deep.armed
    # absorption at the shifted top, and o freezes
    o = armed.o
    top = dataclasses.replace(armed, y=th.y_tilde_plus - (1.0 + d2) + o + 1e-9)
    done = comparison.faster_step(top, 0.2)
    assert done.absorbed and done.o == o
    # once absorbed the walk stays put
    assert comparison.faster_step(done, 5.0).absorbed


def test_slower_walk_branches():
    th = _th()
    d2 = th.delta ** 2
    import dataclasses
    s = comparison.start_state("slower", th)
    # the start sits on the wall, so the first move is the restart
    s1 = comparison.slower_step(s, 0.4)
    assert s1.y == th.y_hat_c
    # interior drift is -delta^2
    s2 = comparison.slower_step(s1, 0.4)
    assert abs(s2.y - (s1.y + 0.4 - d2)) < 1e-15
    # arming needs to clear target + 1
    near = dataclasses.replace(s1, y=0.9)
    armed = comparison.slower_step(near, 0.3)
    assert armed.armed
    assert abs(armed.o - (0.9 + 0.3 - d2 - 1.0)) < 1e-15
    # disarm at target + o
    back = comparison.slower_step(dataclasses.replace(armed, y=0.5), -0.4)
    assert not back.armed
    # absorption at the hat top shifted by o
    o = armed.o
    top = dataclasses.replace(armed, y=th.y_hat_plus + o + 1e-9)
    assert comparison.slower_step(top, 0.1).absorbed


def test_confined_slower_absorbs_at_the_tilde_top():
    fam = models.ising_family(models.uniform(-0.2, 0.2))
    th = comparison.thresholds(fam, 1e-8, flavor="literal")
    assert th.slower_absorb == th.y_tilde_plus
    th_r = comparison.thresholds(FAM, 1e-8, flavor="literal")
    assert th_r.slower_absorb == th_r.y_hat_plus


def test_occupancy_flag_tracks_armed_and_alive():
    th = _th()
    s = comparison.start_state("faster", th)
    assert s.occupancy_flag == 0
    import dataclasses
    armed = dataclasses.replace(s, o=0.2)
    assert armed.occupancy_flag == 1
    dead = dataclasses.replace(armed, y=math.inf)
    assert dead.occupancy_flag == 0


def test_overshoot_register_stays_in_range():
    """While armed, o is a genuine overshoot: nonnegative and no larger
    than one jump plus the drift."""
    th = comparison.thresholds(TWO_POINT, 1e-10, flavor="asymptotic")
    d2 = th.delta ** 2
    rng = np.random.default_rng(14)
    for variant in ("faster", "slower"):
        s = comparison.start_state(variant, th)
        for _ in range(5000):
            if s.absorbed:
                s = comparison.start_state(variant, s.th)
            s = comparison.step(s, float(rng.choice([-1.0, 1.0])))
            if s.armed and not s.absorbed:
                assert -1e-12 <= s.o <= 1.0 + d2 + 1e-12


def test_renewal_statistics_land_near_their_limits():
    eps = 1e-12
    for variant in ("faster", "slower"):
        rs = comparison.renewal_estimates(variant, TWO_POINT, eps, 300,
                                          seed=21, flavor="asymptotic")
        assert rs.t.size == 300
        assert np.all(rs.t > 0)
        # occupancy of [target, top] scaled by delta^2 E approaches 1/4
        assert 0.1 < rs.occupancy_product < 0.45
        # absorption rate approaches delta^2 E
        assert 0.5 < rs.rate_product < 2.0
    assert abs(rs.occupancy_limit - 0.25) < 1e-12


def test_sandwich_run_rotating_has_no_violations():
    rep = comparison.coupled_sandwich_run(FAM, 1e-8, 50_000, seed=31)
    assert rep.n_passages > 5
    assert rep.violations == 0
    assert not rep.confined


def test_sandwich_run_confined_has_no_violations():
    fam = models.ising_family(models.uniform(-0.2, 0.2))
    rep = comparison.coupled_sandwich_run(fam, 1e-8, 50_000, seed=32)
    assert rep.n_passages > 5
    assert rep.violations == 0
    assert rep.confined


def test_target_level_conversion():
    th = _th()
    assert comparison.target_z_to_y(0.0, th) == 0.0
    want = 0.5 / (2.0 * th.c0 * th.delta)
    assert abs(comparison.target_z_to_y(0.5, th) - want) < 1e-12


def test_toy_chain_matrix_and_stationary_vector():
    p2 = comparison.toy_chain_matrix(2)
    assert np.allclose(p2, [[0.5, 1.0], [0.5, 0.0]], atol=1e-15)
    for n in (2, 3, 7, 50, 200):
        p = comparison.toy_chain_matrix(n)
        assert np.allclose(p.sum(axis=0), 1.0, atol=1e-14)
        assert comparison.toy_chain_residual(n) < 1e-12
        v = comparison.toy_chain_stationary(n)
        ratio = v / v[-1]
        assert np.allclose(ratio, np.arange(n, 0, -1), atol=1e-12)
    with pytest.raises(ValueError):
        comparison.toy_chain_matrix(1)
