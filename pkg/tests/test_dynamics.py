import math

import numpy as np
import pytest

from critprod import dynamics, mat2, models

FAM = models.hopping_family(models.uniform(0.7, 1.5))

# 1 / log(1/eps) for the eps values the experiments use
DELTA_KNOWN = {
    1e-6: 0.072382413650541971,
    1e-8: 0.054286810237906478,
    1e-12: 0.036191206825270986,
    1e-19: 0.022857604310697465,
}


def test_delta_frozen_values_and_domain():
    for eps, d in DELTA_KNOWN.items():
        assert abs(dynamics.delta_of(eps) - d) < 1e-16
    for bad in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            dynamics.delta_of(bad)


def test_theta_x_coordinate_examples():
    assert abs(dynamics.theta_to_x(math.pi / 2.0)) < 1e-15
    assert mat2.is_inf(dynamics.theta_to_x(0.0))
    # x = -cot(theta): theta = pi/4 gives -1
    assert abs(dynamics.theta_to_x(math.pi / 4.0) + 1.0) < 1e-15


def test_theta_x_roundtrip():
    rng = np.random.default_rng(1)
    for theta in rng.uniform(1e-3, math.pi - 1e-3, size=200):
        x = dynamics.theta_to_x(theta)
        back = dynamics.x_to_theta(x)
        assert abs(back - theta) < 1e-12


def test_log_coordinate_conventions():
    c0 = 0.7
    y, nu = dynamics.x_to_ynu(0.0, c0)
    assert y == -math.inf and nu == 1
    y, nu = dynamics.x_to_ynu(mat2.INF, c0)
    assert y == math.inf and nu == 1
    # sign convention: the sign of x rides along as nu, and y carries
    # sgn(x) * log|x|
    y, nu = dynamics.x_to_ynu(-2.0, c0)
    assert nu == -1 and abs(y + math.log(2.0) / (2 * c0)) < 1e-15
    assert abs(dynamics.ynu_to_x(y, nu, c0) + 2.0) < 1e-14


def test_z_coordinate_roundtrip():
    eps = 1e-8
    rng = np.random.default_rng(3)
    for z in rng.uniform(-1.2, 1.2, size=100):
        for nu in (1, -1):
            x = dynamics.znu_to_x(z, nu, eps)
            z2, nu2 = dynamics.x_to_znu(x, eps)
            assert nu2 == nu
            assert abs(z2 - z) < 1e-12


def test_step_x_matches_projective_action():
    """The half-line picture and the circle picture are the same dynamics."""
    rng = np.random.default_rng(11)
    eps = 1e-9
    draws = models.sample_draws(FAM, rng, 10_000)
    theta = 3.0 * math.pi / 4.0
    x = dynamics.theta_to_x(theta)
    for i in range(10_000):
        rec = models.draw_record(FAM, draws, i, eps)
        t = models.assemble_transfer(rec, eps)
        theta = mat2.act_projective(t, theta)
        x = dynamics.step_x(x, t)
        x_ref = dynamics.theta_to_x(theta)
        z1, n1 = dynamics.x_to_znu(x, eps)
        z2, n2 = dynamics.x_to_znu(x_ref, eps)
        assert n1 == n2
        assert abs(z1 - z2) < 1e-6


def test_step_znu_tracks_step_x():
    rng = np.random.default_rng(13)
    eps = 1e-8
    draws = models.sample_draws(FAM, rng, 500)
    pt = dynamics.FiberPoint(z=0.1, nu=1)
    x = dynamics.znu_to_x(0.1, 1, eps)
    for i in range(500):
        rec = models.draw_record(FAM, draws, i, eps)
        t = models.assemble_transfer(rec, eps)
        pt = dynamics.step_znu(pt, t, eps)
        x = dynamics.step_x(x, t)
        z, nu = dynamics.x_to_znu(x, eps)
        assert pt.nu == nu and abs(pt.z - z) < 1e-9


def test_step_from_infinity_is_finite():
    rng = np.random.default_rng(17)
    t, _ = models.sample_matrix(FAM, 1e-6, rng)
    x = dynamics.step_x(mat2.INF, t)
    assert not mat2.is_inf(x)


def test_remainder_is_bounded_in_the_interior():
    # the drift correction stays O(1) uniformly for |z| <= 2/3
    c = models.constants(FAM)
    bound = 7.0 * c.c2 * math.exp(2.0 * c.c0) + 0.1
    rng = np.random.default_rng(10)
    eps = 1e-6
    draws = models.sample_draws(FAM, rng, 2000)
    zs = rng.uniform(-2.0 / 3.0, 2.0 / 3.0, size=2000)
    for i in range(2000):
        rec = models.draw_record(FAM, draws, i, eps)
        r = dynamics.remainder_r(zs[i], rec, eps)
        assert abs(r) <= bound


def test_single_step_log_expansion_bound():
    """One step moves log|x| by 2 log d plus an error controlled by
    eps * (|x| + 1/|x|)."""
    c = models.constants(FAM)
    rng = np.random.default_rng(23)
    eps = 1e-6
    draws = models.sample_draws(FAM, rng, 2000)
    for i in range(2000):
        rec = models.draw_record(FAM, draws, i, eps)
        t = models.assemble_transfer(rec, eps)
        u = rng.uniform(math.log(100.0 * eps), math.log(0.01 / eps))
        x = math.exp(u)
        x2 = dynamics.step_x(x, t)
        assert x2 > 0.0
        d = rec["kappa"] * (1.0 + eps * rec["c"])
        err = abs(math.log(x2) - math.log(x) - 2.0 * math.log(d))
        assert err <= 8.0 * c.c2 * math.exp(2.0 * c.c0) * eps * (x + 1.0 / x)


def test_no_sign_change_away_from_the_edges():
    """Crossings only happen near 0 or near the pole: the wide middle of
    either half line maps back into the same half line."""
    c = models.constants(FAM)
    eps = 1e-6
    x_lo = c.c1 * eps / 2.0 * (1.0 + math.exp(-2.0 * c.c0))
    # the pole of the fractional-linear step sits above
    # exp(-2 C0) / (C2 eps); stay a factor 2 below it
    safe_hi = math.exp(-2.0 * c.c0) / (2.0 * c.c2 * eps)
    rng = np.random.default_rng(29)
    draws = models.sample_draws(FAM, rng, 100_000)
    us = rng.uniform(math.log(x_lo), math.log(safe_hi), size=100_000)
    m11, m12, m21, m22, _ = models.direction_entries(FAM, draws, eps)
    xs = np.exp(us)
    x2 = (m11 * xs + m12) / (m21 * xs + m22)
    assert np.all(x2 > 0.0)
    # the negative side crossing zone is wider: the numerator root sits at
    # |x| up to C2 e^{2 C0} eps, so the safe band starts above that
    neg_lo = 2.0 * c.c2 * math.exp(2.0 * c.c0) * eps
    usn = rng.uniform(math.log(neg_lo), math.log(safe_hi), size=100_000)
    xsn = np.exp(usn)
    x2n = (m11 * (-xsn) + m12) / (m21 * (-xsn) + m22)
    assert np.all(x2n < 0.0)


def test_boundary_crossings_land_in_the_entry_window():
    """Entry points sit near z = -1: never deeper inside than an O(delta)
    margin (a hard one-step bound), and overshoots past -1 stay modest."""
    c = models.constants(FAM)
    eps = 1e-10
    st = dynamics.run_orbit(FAM, eps, 10_000_000, seed=4, burn_in=100_000)
    z_all = np.concatenate([p.z for p in st.passages])
    assert z_all.size > 1000
    assert np.all(np.isfinite(z_all))
    d = st.delta
    inner_cap = -1.0 + d * (2.0 * c.c0
                            + math.log(2.0 * (c.c1 + c.c2) / c.c1) + 1.0)
    assert z_all.max() <= inner_cap
    assert z_all.min() >= -2.0
    for p in st.passages:
        s = np.asarray(p.sign)
        assert np.all(s[1:] != s[:-1])


def test_confined_family_never_crosses():
    fam = models.ising_family(models.uniform(-0.2, 0.2))
    st = dynamics.run_orbit(fam, 1e-6, 1_000_000, seed=6, burn_in=10_000)
    assert st.n_boundaries == 0
    assert st.hist_plus.sum() == 0
    assert st.overflow["lo_plus"] == 0 and st.overflow["hi_plus"] == 0
    assert st.inf_count == 0
    assert sum(st.measure_counts()) == st.n_steps


def test_histogram_accounts_for_every_step():
    st = dynamics.run_orbit(FAM, 1e-8, 200_000, seed=12, burn_in=5_000)
    assert sum(st.measure_counts()) == st.n_steps


def test_runs_are_deterministic():
    a = dynamics.run_orbit(FAM, 1e-8, 100_000, seed=42, burn_in=2_000)
    b = dynamics.run_orbit(FAM, 1e-8, 100_000, seed=42, burn_in=2_000)
    assert a.log_sum == b.log_sum
    assert np.array_equal(a.hist_plus, b.hist_plus)
    assert np.array_equal(a.hist_minus, b.hist_minus)
    assert a.n_boundaries == b.n_boundaries
    za = np.concatenate([p.z for p in a.passages])
    zb = np.concatenate([p.z for p in b.passages])
    assert np.array_equal(za, zb)


def test_worker_split_preserves_totals():
    a = dynamics.run_orbit(FAM, 1e-8, 400_000, seed=9, burn_in=2_000,
                           workers=4)
    assert a.n_steps == 400_000
    assert sum(a.measure_counts()) == 400_000
    b = dynamics.run_orbit(FAM, 1e-8, 400_000, seed=9, burn_in=2_000,
                           workers=1)
    tol = 5.0 * math.hypot(a.gamma_stderr, b.gamma_stderr)
    assert abs(a.gamma_hat - b.gamma_hat) <= tol


def test_rng_streams_are_purpose_separated():
    a = dynamics.stream(0, 0, dynamics.PURPOSE_ORBIT).random(4)
    b = dynamics.stream(0, 0, dynamics.PURPOSE_RENEWAL).random(4)
    c = dynamics.stream(0, 1, dynamics.PURPOSE_ORBIT).random(4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_eps_zero_refused_by_measure_run_but_not_birkhoff():
    with pytest.raises(ValueError):
        dynamics.run_orbit(FAM, 0.0, 1000, seed=0)
    gamma, se = dynamics.birkhoff_only(FAM, 0.0, 200_000, seed=0,
                                       burn_in=5_000)
    assert abs(gamma) < 5.0 * se + 1e-4
