"""Matrix families close to a balanced hyperbolic critical point.

A family produces i.i.d. random 2x2 matrices of the normal form

    T = J Q D J,   J = diag(1, -1),
    D = diag(d, 1/d),  d = kappa (1 + eps c),
    Q = 1 - eps a R - eps b S + eps^2 A,

where R is the quarter-turn generator [[0,-1],[1,0]], S is the swap
[[0,1],[1,0]], kappa > 0 is the local expansion rate and (a, b, c, A) are
bounded coefficients.  The direction dynamics is driven by M = Q D; the
physical transfer matrix T differs from M by flipping the signs of the
off-diagonal entries.

Concrete families:

* ``hopping_family``:  products of nearest-neighbour hopping transfer
  matrices over two-site cells, kappa = t_even / t_odd.
* ``dirac_family``:    random expansion conjugated with a small rotation.
* ``ising_family``:    transfer matrices of the random-field chain at
  inverse strength eps = exp(-2 J_coupling), kappa = exp(field).
* ``generic_family``:  independently drawn (kappa, a, b, c), A = 0.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .mat2 import MIRROR

BALANCE_TOL = 1e-10
GAUSS_NODES = 64

# grid used for numeric essential suprema of eps-dependent remainders
_EPS_GRID = np.linspace(1e-6, 0.9, 512)


@dataclass(frozen=True)
class BoundedDistribution:
    """Compactly supported scalar law used for every random coefficient.

    kind is one of "uniform", "two_point", "discrete", "constant",
    "log_ratio_uniform".  The last one is the law of log(u2/u1) for two
    independent U[lo, hi] draws; it shows up as the log expansion rate of
    the hopping family.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        k = self.kind
        p = self.params
        if k == "uniform":
            if not (p["lo"] < p["hi"]):
                raise ValueError("uniform needs lo < hi")
        elif k == "two_point":
            if not (0.0 < p["p1"] < 1.0):
                raise ValueError("two_point needs p1 in (0, 1)")
        elif k == "discrete":
            w = np.asarray(p["weights"], dtype=float)
            if w.min() < 0 or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("discrete weights must be a probability vector")
            if len(w) != len(p["values"]):
                raise ValueError("values and weights must have equal length")
        elif k == "constant":
            pass
        elif k == "log_ratio_uniform":
            if not (0.0 < p["lo"] < p["hi"]):
                raise ValueError("log_ratio_uniform needs 0 < lo < hi")
        else:
            raise ValueError("unknown distribution kind %r" % (k,))

    def sample(self, rng, n):
        k, p = self.kind, self.params
        if k == "uniform":
            return rng.uniform(p["lo"], p["hi"], n)
        if k == "two_point":
            u = rng.random(n)
            return np.where(u < p["p1"], p["v1"], p["v2"])
        if k == "discrete":
            idx = rng.choice(len(p["values"]), size=n, p=np.asarray(p["weights"], dtype=float))
            return np.asarray(p["values"], dtype=float)[idx]
        if k == "constant":
            return np.full(n, float(p["v"]))
        # log_ratio_uniform
        u1 = rng.uniform(p["lo"], p["hi"], n)
        u2 = rng.uniform(p["lo"], p["hi"], n)
        return np.log(u2) - np.log(u1)

    def support(self):
        k, p = self.kind, self.params
        if k == "uniform":
            return p["lo"], p["hi"]
        if k == "two_point":
            return min(p["v1"], p["v2"]), max(p["v1"], p["v2"])
        if k == "discrete":
            v = np.asarray(p["values"], dtype=float)
            return float(v.min()), float(v.max())
        if k == "constant":
            return float(p["v"]), float(p["v"])
        r = math.log(p["hi"]) - math.log(p["lo"])
        return -r, r

    def quadrature(self, n=GAUSS_NODES):
        """Nodes and weights integrating smooth functions against the law.

        Exact for the atomic kinds; Gauss-Legendre otherwise.
        """
        k, p = self.kind, self.params
        if k == "uniform":
            x, w = np.polynomial.legendre.leggauss(n)
            lo, hi = p["lo"], p["hi"]
            return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * w
        if k == "two_point":
            return (np.array([p["v1"], p["v2"]]),
                    np.array([p["p1"], 1.0 - p["p1"]]))
        if k == "discrete":
            return (np.asarray(p["values"], dtype=float),
                    np.asarray(p["weights"], dtype=float))
        if k == "constant":
            return np.array([float(p["v"])]), np.array([1.0])
        # log(u2/u1): tensor rule over both uniform draws
        x, w = np.polynomial.legendre.leggauss(n)
        lo, hi = p["lo"], p["hi"]
        u = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        lu = np.log(u)
        nodes = (lu[None, :] - lu[:, None]).ravel()
        ww = np.outer(w, w).ravel() * 0.25
        return nodes, ww

    def mean(self):
        x, w = self.quadrature()
        return float(np.dot(w, x))


def uniform(lo, hi):
    return BoundedDistribution("uniform", {"lo": lo, "hi": hi})


def two_point(v1, p1, v2):
    return BoundedDistribution("two_point", {"v1": float(v1), "p1": float(p1), "v2": float(v2)})


def constant(v):
    return BoundedDistribution("constant", {"v": float(v)})


def discrete(values, weights):
    return BoundedDistribution("discrete", {"values": list(map(float, values)),
                                            "weights": list(map(float, weights))})


def log_ratio_uniform(lo, hi):
    """Law of log(u2/u1) with u1, u2 independent uniform on [lo, hi].

    This is the log-ratio seen by a chain whose expansion rate is built
    from two independent uniform amplitudes; it is symmetric, so any
    family driven by it is balanced.
    """
    return BoundedDistribution("log_ratio_uniform", {"lo": float(lo), "hi": float(hi)})


@dataclass(frozen=True)
class HypothesisConstants:
    """Structure constants of a family near the critical point.

    c0:    essential sup of |log kappa|
    c1:    essential inf of a - |b|      (> 0 means rotating type)
    c1pp:  larger of ess inf(b - |a|), ess inf(-b - |a|)
           (> 0 means confined type, either orientation)
    c2:    essential sup of |a| + |b| + |c|
    c3:    sup over draws and eps of the norm of the second-order remainder A
    type_class: "rotating", "confined", "unbalanced" or "other"
    """

    c0: float
    c1: float
    c1pp: float
    c2: float
    c3: float
    type_class: str


@dataclass(frozen=True)
class CriticalFamily:
    label: str
    draws: dict

    def __repr__(self):
        return "CriticalFamily(%s)" % (self.label,)


def _check_main_hypothesis(fam, allow_unbalanced, allow_degenerate):
    lk, w = log_kappa_quadrature(fam)
    m = float(np.dot(w, lk))
    if not allow_degenerate:
        if not np.any(lk[w > 0] > BALANCE_TOL) or not np.any(lk[w > 0] < -BALANCE_TOL):
            raise ValueError(
                "degenerate expansion rate: log kappa must take both signs "
                "with positive probability")
    if abs(m) > BALANCE_TOL and not allow_unbalanced:
        raise ValueError(
            "unbalanced family: E[log kappa] != 0 (got %.3e)" % (m,))
    return fam


def hopping_family(t_dist, allow_unbalanced=False):
    """Two-site cells of a hopping chain with i.i.d. positive amplitudes.

    One cell consumes an (odd, even) amplitude pair (t1, t2); the local
    expansion rate is kappa = t2 / t1 and the small parameter eps is the
    energy in units of the even amplitude.
    """
    lo, hi = t_dist.support()
    if lo <= 0:
        raise ValueError("hopping amplitudes must be positive")
    fam = CriticalFamily("hopping", {"t": t_dist})
    return _check_main_hypothesis(fam, allow_unbalanced, False)


def dirac_family(w_dist, allow_unbalanced=False):
    """Random expansion diag(e^w, e^-w) composed with a rotation by eps."""
    fam = CriticalFamily("dirac", {"w": w_dist})
    return _check_main_hypothesis(fam, allow_unbalanced, False)


def ising_family(h_dist, allow_unbalanced=False, allow_degenerate=False):
    """Random-field chain transfer matrices, eps = exp(-2 coupling)."""
    fam = CriticalFamily("ising", {"h": h_dist})
    return _check_main_hypothesis(fam, allow_unbalanced, allow_degenerate)


def generic_family(kappa_dist, a_dist, b_dist, c_dist, allow_unbalanced=False):
    """Independent (kappa, a, b, c) draws with no second-order remainder."""
    lo, hi = kappa_dist.support()
    if lo <= 0:
        raise ValueError("kappa must be positive")
    fam = CriticalFamily("generic", {"kappa": kappa_dist, "a": a_dist,
                                     "b": b_dist, "c": c_dist})
    return _check_main_hypothesis(fam, allow_unbalanced, False)


def sample_draws(fam, rng, n):
    """Raw scalar draws for n steps, as a dict of arrays."""
    if fam.label == "hopping":
        t = fam.draws["t"]
        return {"t_odd": t.sample(rng, n), "t_even": t.sample(rng, n)}
    if fam.label == "dirac":
        return {"w": fam.draws["w"].sample(rng, n)}
    if fam.label == "ising":
        return {"h": fam.draws["h"].sample(rng, n)}
    return {k: d.sample(rng, n) for k, d in fam.draws.items()}


def log_kappa_quadrature(fam, n=GAUSS_NODES):
    """Nodes and weights for expectations over log kappa."""
    if fam.label == "hopping":
        t = fam.draws["t"]
        x, w = t.quadrature(n)
        lx = np.log(x)
        nodes = (lx[None, :] - lx[:, None]).ravel()
        wt = np.outer(w, w).ravel()
        return nodes, wt
    if fam.label == "dirac":
        return fam.draws["w"].quadrature(n)
    if fam.label == "ising":
        return fam.draws["h"].quadrature(n)
    x, w = fam.draws["kappa"].quadrature(n)
    return np.log(x), w


def expected_log_kappa_sq(fam):
    """E[(log kappa)^2], by quadrature."""
    lk, w = log_kappa_quadrature(fam)
    return float(np.dot(w, lk * lk))


def _dirac_a_entries(eps):
    """Second-order remainder entries of the rotation family.

    A = (Rot(-eps) - 1 + eps R) / eps^2 with R the quarter-turn generator;
    series near zero to dodge cancellation.
    """
    if abs(eps) < 1e-2:
        e2 = eps * eps
        diag = -0.5 + e2 / 24.0 - e2 * e2 / 720.0
        off = -eps / 6.0 + eps * e2 / 120.0
    else:
        diag = (math.cos(eps) - 1.0) / (eps * eps)
        off = (math.sin(eps) - eps) / (eps * eps)
    return diag, off  # A11 = A22 = diag, A12 = off, A21 = -off


def _ising_a_scale(eps):
    """((1 - eps^2)^(-1/2) - 1) / eps^2, the remainder scale of the chain."""
    if abs(eps) >= 1.0:
        raise ValueError("ising requires |eps| < 1")
    if abs(eps) < 1e-2:
        x = eps * eps
        return 0.5 + x * (0.375 + x * (0.3125 + x * (35.0 / 128.0)))
    return (1.0 / math.sqrt(1.0 - eps * eps) - 1.0) / (eps * eps)


def draw_record(fam, draws, i, eps):
    """Normal-form coefficients (kappa, a, b, c, A) of draw i."""
    if fam.label == "hopping":
        t1 = float(draws["t_odd"][i])
        t2 = float(draws["t_even"][i])
        i2 = t2 ** -2
        rec = {"t_odd": t1, "t_even": t2,
               "kappa": t2 / t1,
               "a": (i2 + 1.0) / 2.0, "b": (i2 - 1.0) / 2.0, "c": 0.0,
               "A": np.array([[-i2, 0.0], [0.0, 0.0]])}
        return rec
    if fam.label == "dirac":
        w = float(draws["w"][i])
        diag, off = _dirac_a_entries(eps)
        return {"w": w, "kappa": math.exp(w), "a": 1.0, "b": 0.0, "c": 0.0,
                "A": np.array([[diag, off], [-off, diag]])}
    if fam.label == "ising":
        h = float(draws["h"][i])
        s = _ising_a_scale(eps)
        return {"h": h, "kappa": math.exp(h), "a": 0.0, "b": 1.0, "c": 0.0,
                "A": s * np.array([[1.0, -eps], [-eps, 1.0]])}
    return {"kappa": float(draws["kappa"][i]), "a": float(draws["a"][i]),
            "b": float(draws["b"][i]), "c": float(draws["c"][i]),
            "A": np.zeros((2, 2))}


def assemble_transfer(record, eps):
    """Transfer matrix T = J Q D J from normal-form coefficients.

    Deterministic in the record, so a stored record reproduces the matrix
    bit for bit.
    """
    kappa = record["kappa"]
    a, b, c = record["a"], record["b"], record["c"]
    A = record["A"]
    d = kappa * (1.0 + eps * c)
    if d <= 0:
        raise ValueError("expansion factor must stay positive")
    q11 = 1.0 + eps * eps * A[0, 0]
    q12 = eps * (a - b) + eps * eps * A[0, 1]
    q21 = -eps * (a + b) + eps * eps * A[1, 0]
    q22 = 1.0 + eps * eps * A[1, 1]
    return np.array([[q11 * d, -q12 / d], [-q21 * d, q22 / d]])


def direction_matrix(record, eps):
    """M = Q D, the matrix driving the direction dynamics (x picture)."""
    t = assemble_transfer(record, eps)
    return MIRROR @ t @ MIRROR


def sample_matrix(fam, eps, rng):
    """One random transfer matrix plus the record that rebuilds it.

    eps = 0 is allowed and gives the critical point itself, diag(kappa,
    1/kappa); negative eps is refused.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    draws = sample_draws(fam, rng, 1)
    rec = draw_record(fam, draws, 0, eps)
    return assemble_transfer(rec, eps), rec


def direction_entries(fam, draws, eps):
    """Vectorized entries of M = Q D plus log kappa, one row per draw.

    Returns (m11, m12, m21, m22, log_kappa) as float64 arrays.  These feed
    the compiled orbit kernels; the scalar route through draw_record agrees
    with them to rounding.
    """
    if fam.label == "hopping":
        t1 = draws["t_odd"]
        t2 = draws["t_even"]
        d = t2 / t1
        i2 = t2 ** -2
        m11 = (1.0 - eps * eps * i2) * d
        m12 = np.full_like(d, eps) / d
        m21 = -eps * i2 * d
        m22 = 1.0 / d
        lk = np.log(t2) - np.log(t1)
        return m11, m12, m21, m22, lk
    if fam.label == "dirac":
        w = draws["w"]
        d = np.exp(w)
        ce, se = math.cos(eps), math.sin(eps)
        m11 = ce * d
        m12 = se / d
        m21 = -se * d
        m22 = ce / d
        return m11, m12, m21, m22, w.copy()
    if fam.label == "ising":
        h = draws["h"]
        d = np.exp(h)
        s = 1.0 / math.sqrt(1.0 - eps * eps) if abs(eps) < 1.0 else math.nan
        if not math.isfinite(s):
            raise ValueError("ising requires |eps| < 1")
        m11 = s * d
        m12 = -s * eps / d
        m21 = -s * eps * d
        m22 = s / d
        return m11, m12, m21, m22, h.copy()
    kappa = draws["kappa"]
    a = draws["a"]
    b = draws["b"]
    c = draws["c"]
    d = kappa * (1.0 + eps * c)
    m11 = d.copy()
    m12 = eps * (a - b) / d
    m21 = -eps * (a + b) * d
    m22 = 1.0 / d
    return m11, m12, m21, m22, np.log(kappa)


def _support_abs_max(dist):
    lo, hi = dist.support()
    return max(abs(lo), abs(hi))


def constants(fam):
    """Hypothesis constants and type classification of a family."""
    lk, w = log_kappa_quadrature(fam)
    mean_lk = float(np.dot(w, lk))
    if fam.label == "hopping":
        lo, hi = fam.draws["t"].support()
        c0 = math.log(hi) - math.log(lo)
    elif fam.label == "dirac":
        c0 = _support_abs_max(fam.draws["w"])
    elif fam.label == "ising":
        c0 = _support_abs_max(fam.draws["h"])
    else:
        lo, hi = fam.draws["kappa"].support()
        c0 = max(abs(math.log(lo)), abs(math.log(hi)))

    if fam.label == "hopping":
        lo, hi = fam.draws["t"].support()
        # pointwise in the even amplitude: a - |b| = min(1, t^-2),
        # b - |a| = -1 and -b - |a| = -t^-2, |a| + |b| = max(1, t^-2)
        c1 = min(1.0, hi ** -2)
        c1pp = max(-1.0, -(lo ** -2))
        c2 = max(lo ** -2, 1.0)
        c3 = lo ** -2
    elif fam.label == "dirac":
        c1 = 1.0
        c1pp = -1.0
        c2 = 1.0
        diag_off = [_dirac_a_entries(e) for e in _EPS_GRID]
        c3 = max(math.hypot(d, o) for d, o in diag_off)
    elif fam.label == "ising":
        c1 = -1.0
        c1pp = 1.0
        c2 = 1.0
        # norm of A is scale * (1 + eps); diverges as eps -> 1, reported on
        # the working range |eps| <= 0.9
        c3 = max(_ising_a_scale(e) * (1.0 + e) for e in _EPS_GRID)
    else:
        a_lo, a_hi = fam.draws["a"].support()
        b_lo, b_hi = fam.draws["b"].support()
        amax = max(abs(a_lo), abs(a_hi))
        bmax = max(abs(b_lo), abs(b_hi))
        cmax = _support_abs_max(fam.draws["c"])
        c1 = a_lo - bmax
        c1pp = max(b_lo - amax, -b_hi - amax)
        c2 = amax + bmax + cmax
        c3 = 0.0

    if abs(mean_lk) > BALANCE_TOL:
        cls = "unbalanced"
    elif c1 > 0:
        cls = "rotating"
    elif c1pp > 0:
        cls = "confined"
    else:
        cls = "other"
    return HypothesisConstants(c0=c0, c1=c1, c1pp=c1pp, c2=c2, c3=c3,
                               type_class=cls)


def hopping_transfer(t1, t2, eps):
    """Physical two-site transfer matrix of the hopping chain.

    Equals minus the normal form J Q D J; at eps = 0 it is
    -diag(t2/t1, t1/t2).
    """
    if t1 <= 0 or t2 <= 0:
        raise ValueError("amplitudes must be positive")
    m2 = np.array([[-eps / t2, -t2], [1.0 / t2, 0.0]])
    m1 = np.array([[-eps / t1, -t1], [1.0 / t1, 0.0]])
    return m2 @ m1


def dirac_transfer(w, eps):
    """Rotation by eps applied after the expansion diag(e^w, e^-w)."""
    ce, se = math.cos(eps), math.sin(eps)
    rot = np.array([[ce, -se], [se, ce]])
    return rot @ np.diag([math.exp(w), math.exp(-w)])


def ising_transfer(h, coupling):
    """One-site transfer matrix of the random-field chain.

    Normalized to determinant one; eps = exp(-2 coupling).
    """
    if coupling <= 0:
        raise ValueError("coupling must be positive")
    eps = math.exp(-2.0 * coupling)
    scale = 1.0 / math.sqrt(1.0 - eps * eps)
    eh = math.exp(h)
    return scale * np.array([[eh, eps / eh], [eps * eh, 1.0 / eh]])
