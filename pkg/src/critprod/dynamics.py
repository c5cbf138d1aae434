"""Projective orbit dynamics in the angle, line and fiber pictures.

Coordinates.  A direction theta in [0, pi) maps to the line coordinate
x = -cot(theta).  Near the critical point the useful variable is the pair
(y, nu) with nu = sign(x) (sign(0) := +1) and y = sign(x) log|x| / (2 c0),
or its eps-rescaled version z = 2 c0 delta y = delta sign(x) log|x| where
delta = 1 / log(1/eps).  On the scale of z the invariant mass concentrates
on [-1, 1].

The orbit map is x' = M x (fractional-linear) with M = Q D, equivalently
x' = -T(-x) through the physical transfer matrix.  Passages are maximal
stretches of constant sign of x; their boundaries are the renewal skeleton
of the measure.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import models
from ._kernels import (F_DELTA, F_LOGSUM, F_P1, F_P2, F_TARGET, F_ZMAX,
                       I_BATCH, I_CAP, I_CURS, I_INF, I_MEASURE, I_NPASS,
                       I_OF_HI_M, I_OF_HI_P, I_OF_LO_M, I_OF_LO_P, I_POS,
                       I_STEPS, burn_block, orbit_block)
from .mat2 import INF, MIRROR, mobius

DEFAULT_BINS = 400
DEFAULT_ZMAX = 1.25
DEFAULT_BURN = 100_000
N_BATCHES = 100
BLOCK = 1 << 20

# stream tags keeping the draw sequences of different purposes disjoint
PURPOSE_ORBIT = 1
PURPOSE_RENEWAL = 2
PURPOSE_COCYCLE = 3


def stream(seed, worker=0, purpose=PURPOSE_ORBIT):
    """Counter-based generator for (seed, worker, purpose)."""
    key = (int(seed) << 64) + (int(worker) << 32) + int(purpose)
    return np.random.Generator(np.random.Philox(key=key))


def theta_to_x(theta):
    if theta == 0.0:
        return INF
    return -math.cos(theta) / math.sin(theta)


def x_to_theta(x):
    if math.isinf(x):
        return 0.0
    return math.atan2(1.0, -x) % math.pi


def sign_of(x):
    return -1 if x < 0 else 1


def x_to_ynu(x, c0):
    """Split x into the fiber sign nu and the slow coordinate y.

    x = 0 and the point at infinity sit at y = -inf and y = +inf on the
    positive fiber.
    """
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    if x == 0.0:
        return -math.inf, 1
    if math.isinf(x):
        return math.inf, 1
    nu = sign_of(x)
    return nu * math.log(abs(x)) / (2.0 * c0), nu


def ynu_to_x(y, nu, c0):
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    if math.isinf(y):
        return 0.0 if (y < 0) else INF
    return nu * math.exp(2.0 * c0 * nu * y)


def delta_of(eps):
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    return 1.0 / math.log(1.0 / eps)


def y_to_z(y, eps, c0):
    return 2.0 * c0 * delta_of(eps) * y


def z_to_y(z, eps, c0):
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    return z / (2.0 * c0 * delta_of(eps))


def znu_to_x(z, nu, eps):
    """x = nu * eps^(-nu z)."""
    if math.isinf(z):
        return 0.0 if (z < 0) else INF
    return nu * math.exp(nu * z * math.log(1.0 / eps))


def x_to_znu(x, eps):
    delta = delta_of(eps)
    if x == 0.0:
        return -math.inf, 1
    if math.isinf(x):
        return math.inf, 1
    nu = sign_of(x)
    return delta * nu * math.log(abs(x)), nu


def step_x(x, transfer):
    """One orbit step on the line; transfer is the physical matrix T.

    Computed through the mirror conjugate M = J T J; the equivalent route
    -T(-x) agrees to rounding.
    """
    m = MIRROR @ transfer @ MIRROR
    return mobius(m, x)


@dataclass(frozen=True)
class FiberPoint:
    z: float
    nu: int


def step_znu(point, transfer, eps):
    """One orbit step in the (z, nu) picture, routed through x."""
    x = znu_to_x(point.z, point.nu, eps)
    x1 = step_x(x, transfer)
    z1, nu1 = x_to_znu(x1, eps)
    return FiberPoint(z1, nu1)


def two_step_theta(theta, record, eps):
    """Angle update by the matrix rebuilt from a draw record."""
    t = models.assemble_transfer(record, eps)
    c, s = math.cos(theta), math.sin(theta)
    v1 = t[0, 0] * c + t[0, 1] * s
    v2 = t[1, 0] * c + t[1, 1] * s
    return math.atan2(v2, v1) % math.pi


def remainder_r(z, record, eps):
    """Rescaled deviation of one z-step from the pure translation.

    For a start on the positive fiber the step is
    z' = z + delta log kappa^2 + r / log(1/eps) and this returns
    r * eps^(|z| - 1), which stays bounded by a constant of the family on
    |z| <= 1.  If the step leaves the positive half line (eps too large for
    the linearization) a ValueError is raised.
    """
    L = math.log(1.0 / eps)
    delta = 1.0 / L
    x = math.exp(z * L)
    t = models.assemble_transfer(record, eps)
    x1 = step_x(x, t)
    if not (x1 > 0.0) or math.isinf(x1):
        raise ValueError("step left the positive half line, eps too large")
    z1 = delta * math.log(x1)
    r = L * (z1 - z - delta * math.log(record["kappa"] ** 2))
    return r * eps ** (abs(z) - 1.0)


@dataclass
class PassageLog:
    """Boundary records of one worker's orbit.

    n[k] is the recorded-step index at which the k-th boundary was crossed,
    sign[k] the sign of x just after, z[k] the fiber coordinate there, and
    s[k] the occupancy count of [target_z, 1] over the completed passage
    ending at boundary k+1 (the final, unfinished passage has no count).
    """

    n: np.ndarray
    sign: np.ndarray
    z: np.ndarray
    s: np.ndarray
    worker: int = 0


@dataclass
class OrbitStats:
    eps: float
    delta: float
    n_steps: int
    burn_in: int
    target_z: float
    bin_edges: np.ndarray
    hist_plus: np.ndarray
    hist_minus: np.ndarray
    overflow: dict
    inf_count: int
    log_sum: float
    batch_sums: np.ndarray
    batch_steps: int
    f_sum: float
    batch_f: np.ndarray
    passages: list
    n_boundaries: int
    final_p: tuple
    seed: int
    workers: int

    @property
    def gamma_hat(self):
        return self.log_sum / self.n_steps

    @property
    def gamma_stderr(self):
        means = self.batch_sums / self.batch_steps
        n = len(means)
        return float(np.std(means, ddof=1) / math.sqrt(n))

    def measure_counts(self):
        return (int(self.hist_plus.sum()), int(self.hist_minus.sum()),
                sum(self.overflow.values()), self.inf_count)


def _worker_orbit(fam, eps, n, seed, worker, burn_in, target_z, bins, zmax,
                  n_batches, theta0, measure, cap, fgrid):
    rng = stream(seed, worker, PURPOSE_ORBIT)
    delta = delta_of(eps) if eps > 0 else 0.0

    fstate = np.zeros(6)
    # p = J e_theta so that x = p1 / p2 = -cot(theta)
    fstate[F_P1] = math.cos(theta0)
    fstate[F_P2] = -math.sin(theta0)
    fstate[F_DELTA] = delta
    fstate[F_ZMAX] = zmax
    fstate[F_TARGET] = target_z

    istate = np.zeros(12, dtype=np.int64)
    x0 = fstate[F_P1] / fstate[F_P2] if fstate[F_P2] != 0 else math.inf
    istate[I_POS] = 1 if x0 > 0 else 0
    istate[I_CAP] = cap
    istate[I_BATCH] = max(1, n // n_batches)
    istate[I_MEASURE] = 1 if measure else 0

    hist_p = np.zeros(bins, dtype=np.int64)
    hist_m = np.zeros(bins, dtype=np.int64)
    batch = np.zeros(n_batches)
    batch_f = np.zeros(n_batches)
    if fgrid is None:
        fgrid = np.zeros(bins)
    pass_n = np.zeros(cap, dtype=np.int64)
    pass_sign = np.zeros(cap, dtype=np.int64)
    pass_z = np.zeros(cap)
    pass_s = np.zeros(cap, dtype=np.int64)

    left = burn_in
    while left > 0:
        b = min(left, BLOCK)
        draws = models.sample_draws(fam, rng, b)
        m11, m12, m21, m22, _ = models.direction_entries(fam, draws, eps)
        burn_block(m11, m12, m21, m22, fstate)
        left -= b
    # re-derive the sign after burn-in
    istate[I_POS] = 1 if fstate[F_P1] * fstate[F_P2] > 0 else 0

    left = n
    while left > 0:
        b = min(left, BLOCK)
        draws = models.sample_draws(fam, rng, b)
        m11, m12, m21, m22, _ = models.direction_entries(fam, draws, eps)
        orbit_block(m11, m12, m21, m22, fstate, istate, hist_p, hist_m,
                    batch, pass_n, pass_sign, pass_z, pass_s, fgrid, batch_f)
        left -= b

    k = min(int(istate[I_NPASS]), cap)
    log = PassageLog(n=pass_n[:k].copy(), sign=pass_sign[:k].copy(),
                     z=pass_z[:k].copy(), s=pass_s[:max(0, k - 1)].copy(),
                     worker=worker)
    return fstate, istate, hist_p, hist_m, batch, batch_f, log


def run_orbit(fam, eps, n, seed, burn_in=DEFAULT_BURN, target_z=0.0,
              workers=1, bins=DEFAULT_BINS, zmax=DEFAULT_ZMAX,
              theta0=math.pi / 4, fgrid=None, _measure=True):
    """Simulate the projective orbit and collect fiber statistics.

    Returns an OrbitStats with per-fiber z histograms, overflow and
    infinity counters, Birkhoff sums with batch means, and the passage log.
    Deterministic in (seed, workers): each worker runs its own counter
    -based stream and the accumulators merge by summation.
    """
    if eps == 0.0:
        raise ValueError("eps must be positive here; the eps = 0 critical "
                         "point has no fiber coordinate")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    n = int(n)
    if n <= 0:
        raise ValueError("need a positive number of steps")
    delta = delta_of(eps)
    e2 = models.expected_log_kappa_sq(fam)
    # generous capacity for the expected number of boundaries
    cap = int(3.0 * n * delta * delta * max(e2, 1e-4)) + 1000

    per = [n // workers + (1 if w < n % workers else 0) for w in range(workers)]
    nb = max(1, N_BATCHES // workers)

    hist_p = np.zeros(bins, dtype=np.int64)
    hist_m = np.zeros(bins, dtype=np.int64)
    batches = []
    batches_f = []
    logs = []
    log_sum = 0.0
    overflow = {"lo_plus": 0, "hi_plus": 0, "lo_minus": 0, "hi_minus": 0}
    inf_count = 0
    boundaries = 0
    final_p = (0.0, 0.0)
    batch_steps = None

    for w in range(workers):
        if per[w] == 0:
            continue
        fstate, istate, hp, hm, batch, batch_f, log = _worker_orbit(
            fam, eps, per[w], seed, w, burn_in, target_z, bins, zmax, nb,
            theta0, _measure, cap, fgrid)
        hist_p += hp
        hist_m += hm
        batches.append(batch)
        batches_f.append(batch_f)
        logs.append(log)
        log_sum += fstate[F_LOGSUM]
        overflow["lo_plus"] += int(istate[I_OF_LO_P])
        overflow["hi_plus"] += int(istate[I_OF_HI_P])
        overflow["lo_minus"] += int(istate[I_OF_LO_M])
        overflow["hi_minus"] += int(istate[I_OF_HI_M])
        inf_count += int(istate[I_INF])
        boundaries += int(istate[I_NPASS])
        final_p = (fstate[F_P1], fstate[F_P2])
        if batch_steps is None:
            batch_steps = int(istate[I_BATCH])

    edges = np.linspace(-zmax, zmax, bins + 1)
    batch_f_all = np.concatenate(batches_f)
    return OrbitStats(eps=eps, delta=delta, n_steps=n, burn_in=burn_in,
                      target_z=target_z, bin_edges=edges, hist_plus=hist_p,
                      hist_minus=hist_m, overflow=overflow,
                      inf_count=inf_count, log_sum=log_sum,
                      batch_sums=np.concatenate(batches),
                      batch_steps=batch_steps,
                      f_sum=float(batch_f_all.sum()), batch_f=batch_f_all,
                      passages=logs,
                      n_boundaries=boundaries, final_p=final_p, seed=seed,
                      workers=workers)


def birkhoff_only(fam, eps, n, seed, burn_in=DEFAULT_BURN, workers=1):
    """Birkhoff log-growth sums without fiber bookkeeping; allows eps = 0."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    n = int(n)
    per = [n // workers + (1 if w < n % workers else 0) for w in range(workers)]
    nb = max(1, N_BATCHES // workers)
    log_sum = 0.0
    batches = []
    batch_steps = None
    for w in range(workers):
        if per[w] == 0:
            continue
        rng = stream(seed, w, PURPOSE_ORBIT)
        fstate = np.zeros(6)
        fstate[F_P1] = math.cos(math.pi / 4)
        fstate[F_P2] = -math.sin(math.pi / 4)
        fstate[F_ZMAX] = DEFAULT_ZMAX
        istate = np.zeros(12, dtype=np.int64)
        istate[I_CAP] = 8
        istate[I_BATCH] = max(1, per[w] // nb)
        istate[I_MEASURE] = 0
        batch = np.zeros(nb)
        hist_p = np.zeros(1, dtype=np.int64)
        hist_m = np.zeros(1, dtype=np.int64)
        pn = np.zeros(8, dtype=np.int64)
        ps = np.zeros(8, dtype=np.int64)
        pz = np.zeros(8)
        pc = np.zeros(8, dtype=np.int64)
        left = burn_in
        while left > 0:
            b = min(left, BLOCK)
            draws = models.sample_draws(fam, rng, b)
            m11, m12, m21, m22, _ = models.direction_entries(fam, draws, eps)
            burn_block(m11, m12, m21, m22, fstate)
            left -= b
        istate[I_POS] = 1 if fstate[F_P1] * fstate[F_P2] > 0 else 0
        fg = np.zeros(1)
        bf = np.zeros(nb)
        left = per[w]
        while left > 0:
            b = min(left, BLOCK)
            draws = models.sample_draws(fam, rng, b)
            m11, m12, m21, m22, _ = models.direction_entries(fam, draws, eps)
            orbit_block(m11, m12, m21, m22, fstate, istate, hist_p, hist_m,
                        batch, pn, ps, pz, pc, fg, bf)
            left -= b
        log_sum += fstate[F_LOGSUM]
        batches.append(batch)
        if batch_steps is None:
            batch_steps = int(istate[I_BATCH])
    batch_sums = np.concatenate(batches)
    means = batch_sums / batch_steps
    stderr = float(np.std(means, ddof=1) / math.sqrt(len(means)))
    return log_sum / n, stderr
