"""Free-energy cocycle of the fiber dynamics and the measure formula.

The one-step expansion cocycle, averaged over the disorder, reduces on the
fiber coordinate z to

    f(z) = E[ logcosh(z L + 2 log kappa) - logcosh(z L) ],  L = log(1/eps),

a strictly positive even bump that decays like eps^(2|z|).  Adding the
corrector g(z) = logcosh(h(z) L) + log 2 with a capped-parabola profile h
turns it into F(z) = f(z) + g(z) - E[g(z')] whose average against the
invariant fiber measure gives twice the Lyapunov exponent, same as the
average of f itself.  On the far zone the corrector terms cancel exactly
and F equals f.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, models

LOG2 = math.log(2.0)
DEFAULT_CAP = 2.0 / 3.0


def logcosh(u):
    """log(cosh(u)), stable for large arguments."""
    au = abs(u)
    return au + math.log1p(math.exp(-2.0 * au)) - LOG2


def logcosh_vec(u):
    au = np.abs(u)
    return au + np.log1p(np.exp(-2.0 * au)) - LOG2


def _sech2_half(u):
    """1 / (cosh(2u) + 1) = 1 / (2 cosh^2 u), stable for all u."""
    e = math.exp(-2.0 * abs(u))
    return 2.0 * e / (1.0 + e) ** 2


def _log_kappa_pairs(fam):
    """Sign-symmetric pairing of the log kappa quadrature.

    Returns (amps, weights) with amps > 0 such that expectations of even
    pair sums phi(lk) + phi(-lk) reduce to sum_k weights[k] * pair(amps[k]).
    Exact for the shipped families, whose log kappa laws are symmetric when
    balanced; raises if the law fails to pair up.
    """
    lk, w = models.log_kappa_quadrature(fam)
    order = np.argsort(lk)
    lk = lk[order]
    w = w[order]
    pos = lk > 0
    neg = lk < 0
    a_pos, w_pos = lk[pos], w[pos]
    a_neg, w_neg = -lk[neg][::-1], w[neg][::-1]
    if len(a_pos) != len(a_neg):
        raise ValueError("log kappa law is not sign-symmetric")
    if not (np.allclose(a_pos, a_neg, rtol=1e-12, atol=1e-14)
            and np.allclose(w_pos, w_neg, rtol=1e-12, atol=1e-14)):
        raise ValueError("log kappa law is not sign-symmetric")
    return a_pos, w_pos


def f_eps(z, fam, eps):
    """Disorder average of the one-step logcosh increment at fiber point z.

    Evaluated through the paired form
        sum_k W_k log1p(2 sinh(2 lk_k)^2 / (2 cosh^2(z L)))
    which is a sum of nonnegative terms, so positivity survives rounding
    even where f is of order eps^2.  z may be +-inf (f = 0 there).
    """
    if math.isinf(z):
        return 0.0
    L = math.log(1.0 / eps)
    u = z * L
    amps, wts = _log_kappa_pairs(fam)
    r = _sech2_half(u)
    total = 0.0
    for a, wt in zip(amps, wts):
        s = math.sinh(2.0 * a)
        total += wt * math.log1p(2.0 * s * s * r)
    return total


def f_eps_prime(z, fam, eps):
    """Analytic derivative of f, L * E[tanh(zL + 2 lk) - tanh(zL)]."""
    if math.isinf(z):
        return 0.0
    L = math.log(1.0 / eps)
    u = z * L
    lk, w = models.log_kappa_quadrature(fam)
    acc = 0.0
    for a, wt in zip(lk, w):
        acc += wt * (math.tanh(u + 2.0 * a) - math.tanh(u))
    return L * acc


def h_fn(z, cap=DEFAULT_CAP):
    """Capped parabola profile: odd, slope one at zero, flat +-cap/2 tails."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    if math.isinf(z):
        return math.copysign(cap / 2.0, z)
    if abs(z) >= cap:
        return math.copysign(cap / 2.0, z)
    return z - math.copysign(z * z, z) / (2.0 * cap)


def h_fn_vec(z, cap=DEFAULT_CAP):
    az = np.abs(z)
    azc = np.minimum(az, cap)
    out = np.where(az >= cap, cap / 2.0, azc - azc * azc / (2.0 * cap))
    return np.sign(z) * out


def g_eps(z, eps, cap=DEFAULT_CAP):
    """Corrector potential logcosh(h(z) L) + log 2; finite at infinity."""
    L = math.log(1.0 / eps)
    return logcosh(h_fn(z, cap) * L) + LOG2


def g_eps_vec(z, eps, cap=DEFAULT_CAP):
    L = math.log(1.0 / eps)
    return logcosh_vec(h_fn_vec(z, cap) * L) + LOG2


def step_z_samples(z, fam, eps, rng, samples):
    """Fiber coordinates after one exact orbit step from (z, nu = +).

    z = +inf starts at the shared point at infinity, z = -inf at x = 0.
    """
    L = math.log(1.0 / eps)
    delta = 1.0 / L
    draws = models.sample_draws(fam, rng, samples)
    m11, m12, m21, m22, _ = models.direction_entries(fam, draws, eps)
    if math.isinf(z):
        q1, q2 = (m11, m21) if z > 0 else (m12, m22)
    else:
        x = math.exp(z * L)
        q1 = m11 * x + m12
        q2 = m21 * x + m22
    with np.errstate(divide="ignore"):
        lq1 = np.log(np.abs(q1))
        lq2 = np.log(np.abs(q2))
    lx = lq1 - lq2
    pos = q1 * q2 > 0.0
    return np.where(pos, delta * lx, -delta * lx)


def F_eps(z, fam, eps, cap=DEFAULT_CAP, samples=20000, seed=0, rng=None):
    """Corrected cocycle average F(z) = f(z) + g(z) - E[g(z')].

    The expectation runs over one exact orbit step from (z, nu = +), by
    Monte Carlo with `samples` draws.  Returns (value, mc_stderr).
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples for a stable average")
    if rng is None:
        rng = dynamics.stream(seed, 0, dynamics.PURPOSE_COCYCLE)
    z1 = step_z_samples(z, fam, eps, rng, samples)
    gz1 = g_eps_vec(z1, eps, cap)
    mean_g = float(gz1.mean())
    se = float(gz1.std(ddof=1) / math.sqrt(samples))
    return f_eps(z, fam, eps) + g_eps(z, eps, cap) - mean_g, se


@dataclass(frozen=True)
class IntervalDecomposition:
    """Partition of the fiber line into center, bulk, edge band and far zone.

    center: |z| <= r0 with r0 = delta log(1/delta), where the measure has
            its corner and f its bump;
    bulk:   r0 < |z| < cap - band, the plateau of F;
    edge:   |z| within band of the cap, where the corrector profile bends;
    far:    beyond, including infinity, where F = f up to rounding.
    """

    r0: float
    band_lo: float
    band_hi: float
    cap: float
    eps: float

    def classify(self, z):
        if math.isinf(z):
            return "far"
        az = abs(z)
        if az <= self.r0:
            return "center"
        if az < self.band_lo:
            return "bulk"
        if az <= self.band_hi:
            return "edge"
        return "far"


def interval_decomposition(fam, eps, cap=DEFAULT_CAP):
    cns = models.constants(fam)
    delta = dynamics.delta_of(eps)
    r0 = delta * math.log(1.0 / delta)
    band = delta * (2.0 * cns.c0
                    + 2.0 * cns.c2 * math.exp(2.0 * cns.c0) * eps ** (1.0 - cap))
    if cap - band <= r0:
        raise ValueError("eps too large: the plateau region is empty")
    return IntervalDecomposition(r0=r0, band_lo=cap - band, band_hi=cap + band,
                                 cap=cap, eps=eps)


def plateau_value(fam, eps, cap=DEFAULT_CAP):
    """Height 2 delta E[(log kappa)^2] / cap of F on the bulk zone."""
    delta = dynamics.delta_of(eps)
    return 2.0 * delta / cap * models.expected_log_kappa_sq(fam)


@dataclass
class MeasureFormulaReport:
    """Lyapunov exponent through the invariant measure, three ways."""

    eps: float
    cap: float
    gamma_birkhoff: float
    gamma_birkhoff_stderr: float
    gamma_f: float
    gamma_f_stderr: float
    gamma_F: float
    gamma_F_stderr: float
    avg_f: float
    avg_F: float
    region_mass: dict
    region_mean_F: dict
    n_steps: int

    @property
    def bookkeeping_total(self):
        return sum(self.region_mass[k] * self.region_mean_F[k]
                   for k in self.region_mass if self.region_mean_F[k] is not None)


def lyapunov_via_measure(fam, eps, n, seed, cap=DEFAULT_CAP, samples=20000,
                         burn_in=dynamics.DEFAULT_BURN):
    """Estimate the exponent as half the measure average of f and of F.

    Runs one orbit, accumulates the Birkhoff sums and the orbit average of
    the binned f along the way, then computes F on the occupied bins by
    Monte Carlo and averages it against the empirical measure.  Region
    masses and mean F per region of the interval decomposition come along
    for the bookkeeping identity.
    """
    centers_edges = np.linspace(-dynamics.DEFAULT_ZMAX, dynamics.DEFAULT_ZMAX,
                                dynamics.DEFAULT_BINS + 1)
    centers = 0.5 * (centers_edges[:-1] + centers_edges[1:])
    fgrid = np.array([f_eps(c, fam, eps) for c in centers])

    st = dynamics.run_orbit(fam, eps, n, seed, burn_in=burn_in, fgrid=fgrid)
    n_steps = st.n_steps
    avg_f = float(st.f_sum / n_steps)
    f_means = st.batch_f / st.batch_steps
    se_f = float(np.std(f_means, ddof=1) / math.sqrt(len(f_means)))

    counts = st.hist_plus + st.hist_minus
    occupied = np.nonzero(counts)[0]
    rng = dynamics.stream(seed, 0, dynamics.PURPOSE_COCYCLE)
    # one shared draw block, reused across bins
    draws = models.sample_draws(fam, rng, samples)
    m11, m12, m21, m22, _ = models.direction_entries(fam, draws, eps)
    L = math.log(1.0 / eps)
    delta = 1.0 / L

    F_bin = np.zeros(len(centers))
    se_bin = np.zeros(len(centers))
    for k in occupied:
        z = centers[k]
        x = math.exp(z * L)
        q1 = m11 * x + m12
        q2 = m21 * x + m22
        with np.errstate(divide="ignore"):
            lx = np.log(np.abs(q1)) - np.log(np.abs(q2))
        z1 = np.where(q1 * q2 > 0.0, delta * lx, -delta * lx)
        gz1 = g_eps_vec(z1, eps, cap)
        F_bin[k] = fgrid[k] + g_eps(z, eps, cap) - float(gz1.mean())
        se_bin[k] = float(gz1.std(ddof=1) / math.sqrt(samples))

    mass = counts / n_steps
    avg_F = float(np.dot(mass, F_bin))
    # shared draws make the per-bin errors correlated; bound by the sum
    se_F_mc = float(np.dot(mass, se_bin))
    se_F = math.sqrt(se_f ** 2 + se_F_mc ** 2)

    dec = interval_decomposition(fam, eps, cap)
    region_mass = {r: 0.0 for r in ("center", "bulk", "edge", "far")}
    region_fsum = {r: 0.0 for r in region_mass}
    for k in occupied:
        r = dec.classify(centers[k])
        region_mass[r] += mass[k]
        region_fsum[r] += mass[k] * F_bin[k]
    # overflow and infinity feed the far zone where F is below rounding
    far_extra = (sum(st.overflow.values()) + st.inf_count) / n_steps
    region_mass["far"] += far_extra
    region_mean = {r: (region_fsum[r] / region_mass[r]
                       if region_mass[r] > 0 else None)
                   for r in region_mass}

    return MeasureFormulaReport(
        eps=eps, cap=cap,
        gamma_birkhoff=st.gamma_hat, gamma_birkhoff_stderr=st.gamma_stderr,
        gamma_f=0.5 * avg_f, gamma_f_stderr=0.5 * se_f,
        gamma_F=0.5 * avg_F, gamma_F_stderr=0.5 * se_F,
        avg_f=avg_f, avg_F=avg_F,
        region_mass=region_mass, region_mean_F=region_mean,
        n_steps=n_steps)


def cocycle_grid(fam, eps, zgrid, cap=DEFAULT_CAP, samples=20000, seed=0):
    """Rows (z, f(z), F(z), F_stderr) over a grid of fiber points."""
    rng = dynamics.stream(seed, 0, dynamics.PURPOSE_COCYCLE)
    rows = []
    for z in zgrid:
        val, se = F_eps(z, fam, eps, cap=cap, samples=samples, rng=rng)
        rows.append((float(z), f_eps(z, fam, eps), val, se))
    return rows
