"""Dominating renewal processes and the coupled sandwich check.

During one passage of the orbit between sign changes, the slow coordinate
y = sign(x) log|x| / (2 c0) climbs from -1-ish to +1-ish (in units of
1 / (2 c0 delta)) driven by increments (-1)^k w with w = log(kappa) / c0.
Two auxiliary walks bound it from either side:

* the faster walk drifts up by delta^2 each step, restarts at a higher
  level when it falls below its wall, and absorbs earlier,
* the slower walk drifts down by delta^2, restarts lower, and absorbs
  later.

Both carry an overshoot register o that freezes the crossing excess of a
target level; the counter S adds up the armed steps and estimates the
occupancy of [target, top] over one passage, T is the absorption time.
Confined families couple through the reflected coordinate -y with passage
boundaries at interval exits instead of sign changes.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import dynamics, models
from ._kernels import renewal_passage

INF = math.inf


@dataclass(frozen=True)
class Thresholds:
    """Restart, wall and absorption levels of both walks, in y units."""

    y_hat_minus: float
    y_hat_c: float
    y_hat_plus: float
    y_tilde_minus: float
    y_tilde_c: float
    y_tilde_plus: float
    delta: float
    c0: float
    flavor: str
    confined: bool

    @property
    def slower_absorb(self):
        # the confined slower walk absorbs at the faster top level
        return self.y_tilde_plus if self.confined else self.y_hat_plus


def thresholds(fam, eps, flavor="literal", confined=None):
    """Threshold levels for a family at eps.

    flavor "literal" uses the constructive constants of the family (these
    carry O(delta log delta) offsets that vanish slowly); "asymptotic" uses
    the idealized levels +-1 / (2 c0 delta) that the literal ones approach,
    which is what the renewal statistics are compared against.
    """
    cns = models.constants(fam)
    delta = dynamics.delta_of(eps)
    c0 = cns.c0
    if confined is None:
        confined = cns.type_class == "confined"
    c1 = cns.c1pp if confined else cns.c1
    if c1 <= 0:
        raise ValueError("family has no positive rotation (or confinement) "
                         "constant for this coupling")
    two_c0 = 2.0 * c0
    if flavor == "literal":
        x_hat_minus = c1 * eps / 2.0
        x_hat_c = x_hat_minus * (1.0 + math.exp(-two_c0))
        x_hat_plus = 2.0 * math.exp(two_c0) / (c1 * eps)
        big_c = 8.0 * math.exp(3.0 * c0) * cns.c2 / c0
        x_tilde_minus = big_c * eps / (delta * delta)
        x_tilde_plus = delta * delta / (big_c * eps)
        x_tilde_c = math.exp(two_c0 * (1.0 + delta * delta)) * x_tilde_minus
        return Thresholds(
            y_hat_minus=math.log(x_hat_minus) / two_c0,
            y_hat_c=math.log(x_hat_c) / two_c0,
            y_hat_plus=math.log(x_hat_plus) / two_c0,
            y_tilde_minus=math.log(x_tilde_minus) / two_c0,
            y_tilde_c=math.log(x_tilde_c) / two_c0,
            y_tilde_plus=math.log(x_tilde_plus) / two_c0,
            delta=delta, c0=c0, flavor=flavor, confined=confined)
    if flavor != "asymptotic":
        raise ValueError("flavor must be literal or asymptotic")
    half = 1.0 / (two_c0 * delta)
    d2 = delta * delta
    return Thresholds(
        y_hat_minus=-half,
        y_hat_c=-half + math.log(1.0 + math.exp(-two_c0)) / two_c0,
        y_hat_plus=half,
        y_tilde_minus=-half,
        y_tilde_c=-half + 1.0 + d2,
        y_tilde_plus=half,
        delta=delta, c0=c0, flavor=flavor, confined=confined)


@dataclass(frozen=True)
class CompState:
    """One step of a dominating walk.

    variant is "faster", "slower" or "slower_confined"; parity is the
    passage index mod 2 (even passages climb with +w); o is the overshoot
    register, equal to the sentinel 1 + delta^2 (faster) or 1 - delta^2
    (slower) while disarmed.
    """

    y: float
    o: float
    variant: str
    parity: int
    th: Thresholds
    target_y: float

    @property
    def sentinel(self):
        d2 = self.th.delta ** 2
        return 1.0 + d2 if self.variant == "faster" else 1.0 - d2

    @property
    def armed(self):
        return self.o != self.sentinel

    @property
    def absorbed(self):
        return math.isinf(self.y)

    @property
    def occupancy_flag(self):
        return 1 if (self.armed and not self.absorbed) else 0


def start_state(variant, th, parity=0, target_y=0.0):
    d2 = th.delta ** 2
    if variant == "faster":
        return CompState(y=th.y_tilde_c, o=1.0 + d2, variant=variant,
                         parity=parity, th=th, target_y=target_y)
    if variant in ("slower", "slower_confined"):
        return CompState(y=th.y_hat_minus, o=1.0 - d2, variant=variant,
                         parity=parity, th=th, target_y=target_y)
    raise ValueError("unknown variant %r" % (variant,))


def faster_step(state, w):
    """One transition of the dominating (faster) walk."""
    if state.variant != "faster":
        raise ValueError("state is not a faster walk")
    th = state.th
    d2 = th.delta ** 2
    sent = 1.0 + d2
    sign = 1.0 if state.parity % 2 == 0 else -1.0
    y, o = state.y, state.o
    if math.isinf(y):
        y1 = INF
    elif y <= th.y_tilde_minus:
        y1 = th.y_tilde_c
    elif y >= th.y_tilde_plus - sent + o:
        y1 = INF
    else:
        y1 = y + sign * w + d2
    if math.isinf(y1):
        o1 = o
    elif y1 >= state.target_y and o == sent:
        o1 = y1 - state.target_y
    elif y1 <= state.target_y - sent + o and o != sent:
        o1 = sent
    else:
        o1 = o
    return replace(state, y=y1, o=o1)


def slower_step(state, w):
    """One transition of the dominated (slower) walk."""
    if state.variant not in ("slower", "slower_confined"):
        raise ValueError("state is not a slower walk")
    th = state.th
    d2 = th.delta ** 2
    sent = 1.0 - d2
    sign = 1.0 if state.parity % 2 == 0 else -1.0
    absorb = th.y_tilde_plus if state.variant == "slower_confined" else th.y_hat_plus
    y, o = state.y, state.o
    if math.isinf(y):
        y1 = INF
    elif y <= th.y_hat_minus:
        y1 = th.y_hat_c
    elif y >= absorb + o:
        y1 = INF
    else:
        y1 = y + sign * w - d2
    if math.isinf(y1):
        o1 = o
    elif y1 >= state.target_y + 1.0 and o == sent:
        o1 = y1 - state.target_y - 1.0
    elif y1 <= state.target_y + o and o != sent:
        o1 = sent
    else:
        o1 = o
    return replace(state, y=y1, o=o1)


def step(state, w):
    if state.variant == "faster":
        return faster_step(state, w)
    return slower_step(state, w)


@dataclass
class RenewalStats:
    """Absorption times and occupancy counts of simulated passages."""

    variant: str
    eps: float
    delta: float
    target_z: float
    t: np.ndarray
    s: np.ndarray
    e_log_kappa_sq: float

    @property
    def mean_t(self):
        return float(self.t.mean())

    @property
    def mean_s(self):
        return float(self.s.mean())

    @property
    def stderr_t(self):
        return float(self.t.std(ddof=1) / math.sqrt(len(self.t)))

    @property
    def stderr_s(self):
        return float(self.s.std(ddof=1) / math.sqrt(len(self.s)))

    @property
    def occupancy_product(self):
        """mean(S) * delta^2 * E[(log kappa)^2]; tends to ((1-z)/2)^2."""
        return self.mean_s * self.delta ** 2 * self.e_log_kappa_sq

    @property
    def rate_product(self):
        """delta^2 * E[(log kappa)^2] * mean(T); tends to 1."""
        return self.delta ** 2 * self.e_log_kappa_sq * self.mean_t

    @property
    def occupancy_limit(self):
        return ((1.0 - self.target_z) / 2.0) ** 2


def renewal_estimates(variant, fam, eps, passages, seed, target_z=0.0,
                      flavor="asymptotic", parity=0, confined=None):
    """Simulate i.i.d. passages of one dominating walk.

    Draws w = log(kappa) / c0 from the family, runs `passages` independent
    walks to absorption and returns their T and S samples.  The defaults
    use the asymptotic threshold levels; pass flavor="literal" for the
    constructive ones (their offsets shift the statistics at moderate eps).
    """
    if passages < 1:
        raise ValueError("need at least one passage")
    th = thresholds(fam, eps, flavor=flavor, confined=confined)
    cns = models.constants(fam)
    d2 = th.delta ** 2
    sign = 1.0 if parity % 2 == 0 else -1.0
    if variant == "faster":
        wall, restart = th.y_tilde_minus, th.y_tilde_c
        absorb_base, sent = th.y_tilde_plus, 1.0 + d2
        absorb_shift, drift = -sent, d2
        arm_level, disarm_shift = 0.0 + target_z_to_y(target_z, th), -sent
        y0 = th.y_tilde_c
    elif variant in ("slower", "slower_confined"):
        wall, restart = th.y_hat_minus, th.y_hat_c
        sent = 1.0 - d2
        absorb_base = th.y_tilde_plus if variant == "slower_confined" else th.y_hat_plus
        absorb_shift, drift = 0.0, -d2
        arm_level = target_z_to_y(target_z, th) + 1.0
        disarm_shift = -1.0
        y0 = th.y_hat_minus
    else:
        raise ValueError("unknown variant %r" % (variant,))

    rng = dynamics.stream(seed, 0, dynamics.PURPOSE_RENEWAL)
    c0 = cns.c0
    t_out = np.empty(passages, dtype=np.int64)
    s_out = np.empty(passages, dtype=np.int64)
    buf = np.empty(0)
    cursor = 0
    chunk = 1 << 16
    for k in range(passages):
        y, o, n, s = y0, sent, 1, 0
        while True:
            if cursor >= len(buf):
                draws = models.sample_draws(fam, rng, chunk)
                _, _, _, _, lk = models.direction_entries(fam, draws, eps)
                buf = lk / c0
                cursor = 0
            done, y, o, n, s, used = renewal_passage(
                buf, cursor, y, o, n, s, wall, restart, absorb_base,
                absorb_shift, sent, drift, sign, arm_level, disarm_shift)
            cursor += used
            if done:
                break
        t_out[k] = n
        s_out[k] = s
    return RenewalStats(variant=variant, eps=eps, delta=th.delta,
                        target_z=target_z, t=t_out, s=s_out,
                        e_log_kappa_sq=models.expected_log_kappa_sq(fam))


def target_z_to_y(target_z, th):
    """Convert a z-level target to y units of the walk."""
    return target_z / (2.0 * th.c0 * th.delta)


@dataclass
class SandwichReport:
    """Outcome of running both walks against the true orbit."""

    n_steps: int
    n_passages: int
    slower_violations: int
    faster_violations: int
    exit_violations: int
    eps: float
    confined: bool

    @property
    def violations(self):
        return (self.slower_violations + self.faster_violations
                + self.exit_violations)


def coupled_sandwich_run(fam, eps, n, seed, target_z=0.0, tol=1e-9):
    """Drive the orbit and both dominating walks on the same draws.

    Checks, at every interior step of every completed passage, that the
    slower walk sits below the (parity-reflected) slow coordinate of the
    orbit and the faster walk above it, and that the faster walk has
    absorbed by the step that ends the passage.  Returns a SandwichReport
    with violation counts; the construction is sound iff they are zero.

    tol guards the comparisons against float noise, far below the
    delta-scale margins of the bounds.
    """
    cns = models.constants(fam)
    confined = cns.type_class == "confined"
    if cns.type_class == "unbalanced":
        raise ValueError("unbalanced family")
    if cns.type_class == "other":
        raise ValueError("family is neither rotating nor confined")
    th = thresholds(fam, eps, flavor="literal", confined=confined)
    c0 = cns.c0
    two_c0 = 2.0 * c0
    d2 = th.delta ** 2
    target_y = target_z_to_y(target_z, th)

    rng = dynamics.stream(seed, 0, dynamics.PURPOSE_ORBIT)
    theta0 = math.pi / 4
    p1, p2 = math.cos(theta0), -math.sin(theta0)  # x starts at -1

    slow = None
    fast = None
    parity = 0
    started = False
    pending = False
    last_side = 0 if confined else -1
    n_pass = 0
    v_slow = v_fast = v_exit = 0
    svariant = "slower_confined" if confined else "slower"

    block = 1 << 16
    done = 0
    while done < n:
        b = min(block, n - done)
        draws = models.sample_draws(fam, rng, b)
        m11, m12, m21, m22, lk = models.direction_entries(fam, draws, eps)
        for i in range(b):
            q1 = m11[i] * p1 + m12[i] * p2
            q2 = m21[i] * p1 + m22[i] * p2
            r = math.sqrt(q1 * q1 + q2 * q2)
            p1, p2 = q1 / r, q2 / r
            w = lk[i] / c0

            if started:
                # the walks consume the draw that moved the orbit, except
                # right after a boundary where they sit at their start
                if pending:
                    pending = False
                else:
                    slow = slower_step(slow, w)
                    fast = faster_step(fast, w)

            if p2 == 0.0:
                ay = INF
                pos = False
            else:
                lx = math.log(abs(p1)) - math.log(abs(p2))
                pos = p1 * p2 > 0.0
                ay = lx / two_c0

            if confined:
                ybar = ay  # log|x| / (2 c0); x < 0 throughout
                outside = (ybar < th.y_tilde_minus or ybar > th.y_tilde_plus)
                side = -1 if ybar < th.y_tilde_minus else 1
                boundary = outside and (last_side == 0 or side != last_side)
                y_cmp = ybar if parity % 2 == 0 else -ybar
            else:
                side = 1 if pos else -1
                boundary = side != last_side
                y_cmp = ay if pos else -ay

            if boundary:
                if started:
                    # the faster walk must be absorbed exactly now
                    if not fast.absorbed:
                        v_exit += 1
                    n_pass += 1
                last_side = side
                if confined:
                    parity = 0 if side < 0 else 1
                else:
                    parity = 0 if side > 0 else 1
                slow = start_state(svariant, th, parity, target_y)
                fast = start_state("faster", th, parity, target_y)
                pending = True
                started = True
            elif started and not math.isinf(y_cmp):
                # an early-absorbed slower walk counts as a violation
                # (inf > y); an absorbed faster walk dominates trivially
                if slow.y > y_cmp + tol:
                    v_slow += 1
                if fast.y < y_cmp - tol:
                    v_fast += 1
        done += b

    return SandwichReport(n_steps=n, n_passages=n_pass,
                          slower_violations=v_slow,
                          faster_violations=v_fast,
                          exit_violations=v_exit, eps=eps,
                          confined=confined)


def toy_chain_matrix(n):
    """Column-stochastic matrix of the level walk used in the state count.

    From level j the walk moves down or up with probability one half;
    level 1 reflects the down move onto itself and the top level wraps its
    up move to 1.  The vector (n, n-1, ..., 1) is exactly stationary.
    """
    if n < 2:
        raise ValueError("need at least two levels")
    p = np.zeros((n, n))
    for j in range(1, n + 1):
        down = j - 1 if j > 1 else 1
        up = j + 1 if j < n else 1
        p[down - 1, j - 1] += 0.5
        p[up - 1, j - 1] += 0.5
    return p


def toy_chain_stationary(n):
    return np.arange(n, 0, -1, dtype=float)


def toy_chain_residual(n):
    """Max-norm residual of P v = v for the exact stationary vector."""
    p = toy_chain_matrix(n)
    v = toy_chain_stationary(n)
    return float(np.max(np.abs(p @ v - v)))
