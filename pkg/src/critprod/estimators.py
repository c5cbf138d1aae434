"""Estimators built on the orbit statistics.

Covers the Lyapunov exponent (Birkhoff, asymptotic law, slope fits), the
empirical fiber measure with its limiting references, the pullback to the
angle variable, the integrated density of states of the hopping chain and
the free energy of the random-field chain.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, models


@dataclass
class LyapunovEstimate:
    value: float
    stderr: float
    eps: float
    n_steps: int


def lyapunov_birkhoff(fam, eps, n, seed, burn_in=dynamics.DEFAULT_BURN,
                      workers=1):
    """Birkhoff estimate of the top Lyapunov exponent.

    eps = 0 runs the critical point itself (no fiber bookkeeping); any
    balanced family then gives a value compatible with zero, an unbalanced
    one gives |E[log kappa]|.
    """
    if eps == 0.0:
        g, se = dynamics.birkhoff_only(fam, eps, n, seed, burn_in, workers)
        return LyapunovEstimate(g, se, eps, int(n))
    st = dynamics.run_orbit(fam, eps, n, seed, burn_in=burn_in,
                            workers=workers)
    return LyapunovEstimate(st.gamma_hat, st.gamma_stderr, eps, int(n))


def lyapunov_asymptotic(fam, eps):
    """Leading-order exponent E[(log kappa)^2] / log(1/eps).

    Only meaningful for balanced families; unbalanced input is refused.
    """
    cns = models.constants(fam)
    if cns.type_class == "unbalanced":
        raise ValueError("unbalanced family: E[log kappa] != 0, the "
                         "critical scaling law does not apply")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    return models.expected_log_kappa_sq(fam) / math.log(1.0 / eps)


def lyapunov_fit(points):
    """Least-squares line through (1/log(1/eps), gamma_hat) pairs.

    points: iterable of (eps, gamma_hat).  Returns (slope, intercept, r2).
    Needs at least three points spanning two decades of eps.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    eps_vals = np.array([p[0] for p in pts], dtype=float)
    g = np.array([p[1] for p in pts], dtype=float)
    if np.any(eps_vals <= 0) or np.any(eps_vals >= 1):
        raise ValueError("eps values must lie in (0, 1)")
    if eps_vals.max() / eps_vals.min() < 100.0:
        raise ValueError("points must span at least two decades of eps")
    x = 1.0 / np.log(1.0 / eps_vals)
    if np.ptp(x) <= 0:
        raise ValueError("degenerate abscissae")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, g, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    ss_tot = float(np.sum((g - g.mean()) ** 2))
    ss_res = float(np.sum((A @ coef - g) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, r2


@dataclass
class EmpiricalMeasure:
    """Per-fiber mass fractions of the z histogram of an orbit."""

    edges: np.ndarray
    mass_plus: np.ndarray
    mass_minus: np.ndarray
    overflow: dict
    inf_mass: float
    n_samples: int
    eps: float

    @classmethod
    def from_orbit(cls, st):
        tot = float(st.n_steps)
        return cls(edges=st.bin_edges.copy(),
                   mass_plus=st.hist_plus / tot,
                   mass_minus=st.hist_minus / tot,
                   overflow={k: v / tot for k, v in st.overflow.items()},
                   inf_mass=st.inf_count / tot,
                   n_samples=st.n_steps,
                   eps=st.eps)

    def fiber_mass(self, nu, z1, z2):
        """Mass of [z1, z2] on one fiber, by bin overlap."""
        m = self.mass_plus if nu > 0 else self.mass_minus
        e = self.edges
        w = e[1] - e[0]
        a = np.maximum(e[:-1], z1)
        b = np.minimum(e[1:], z2)
        frac = np.clip(b - a, 0.0, None) / w
        return float(np.dot(frac, m))

    def symmetric_interval_mass(self, c):
        """Both-fiber mass of [-c, c]."""
        return (self.fiber_mass(1, -c, c) + self.fiber_mass(-1, -c, c))

    def overflow_mass(self):
        return float(sum(self.overflow.values()) + self.inf_mass)


def triangular_reference(z1, z2, nu=1):
    """Limiting per-fiber mass of [z1, z2] for rotating families.

    The density on each fiber is (1 - z) / 4 on [-1, 1]; both fibers carry
    the same profile, total mass one.
    """
    if not (-1.0 <= z1 <= z2 <= 1.0):
        raise ValueError("interval must sit inside [-1, 1]")
    return 0.25 * ((z2 - z1) - 0.5 * (z2 * z2 - z1 * z1))


def uniform_reference(z1, z2, nu=-1):
    """Limiting per-fiber mass for confined families.

    All mass sits on the negative fiber, uniformly on [-1, 1] with density
    one half; the positive fiber is empty.
    """
    if not (-1.0 <= z1 <= z2 <= 1.0):
        raise ValueError("interval must sit inside [-1, 1]")
    if nu > 0:
        return 0.0
    return 0.5 * (z2 - z1)


def _ref_cdf(edges, kind, nu):
    z = edges
    if kind == "triangular":
        # each fiber carries mass 1/2 with density (1 - z) / 4
        return 0.25 * ((z + 1.0) - 0.5 * (z * z - 1.0))
    if kind == "uniform":
        # all mass on the negative fiber, density 1/2
        if nu > 0:
            return np.zeros_like(z)
        return 0.5 * (z + 1.0)
    raise ValueError("unknown reference %r" % (kind,))


def measure_distance(emp, ref):
    """Distance of an empirical fiber measure from a limiting reference.

    ref is "triangular" or "uniform".  Returns (ks, l1).  CDFs are absolute
    per fiber: the empirical CDF of a fiber ends at that fiber's mass and
    the reference CDF at the limiting fiber mass (1/2 per fiber for the
    triangular profile, 1 on the negative fiber for the uniform one), so a
    lopsided fiber split shows up in ks rather than being normalized away.
    ks is the largest per-fiber sup deviation on [-1, 1]; for the uniform
    reference the positive fiber is excluded from ks (an all-zero target
    makes sup = mass, which is its own criterion) but its mass still counts
    toward l1, the binned L1 distance summed over fibers.  Overflow mass is
    part of neither number; read it off emp.overflow_mass().
    """
    e = emp.edges
    inside = (e[:-1] >= -1.0 - 1e-12) & (e[1:] <= 1.0 + 1e-12)
    edges_in = np.concatenate([e[:-1][inside], [e[1:][inside][-1]]])
    ks_vals = []
    l1 = 0.0
    for nu, mass in ((1, emp.mass_plus), (-1, emp.mass_minus)):
        m_in = mass[inside]
        cdf = np.concatenate([[0.0], np.cumsum(m_in)])
        refc = _ref_cdf(edges_in, ref, nu)
        if not (ref == "uniform" and nu > 0):
            ks_vals.append(float(np.max(np.abs(cdf - refc))))
        l1 += float(np.sum(np.abs(m_in - np.diff(refc))))
    return max(ks_vals), l1


def pullback_theta_density(emp, eps=None):
    """Push the fiber histogram back to the angle variable.

    Returns (theta_edges, density) over (0, pi), ordered by angle.  The
    negative fiber fills (0, pi/2), the positive fiber (pi/2, pi); bin
    masses are preserved exactly, so the densities integrate to the binned
    mass of the histogram.
    """
    if eps is None:
        eps = emp.eps
    L = math.log(1.0 / eps)
    z = emp.edges
    thetas = []
    dens = []
    for nu, mass in ((-1, emp.mass_minus), (1, emp.mass_plus)):
        x_edges = nu * np.exp(nu * z * L)
        th = np.mod(np.arctan2(1.0, -x_edges), math.pi)
        for i in range(len(mass)):
            t1, t2 = th[i], th[i + 1]
            lo, hi = min(t1, t2), max(t1, t2)
            if hi - lo <= 0:
                continue
            thetas.append((lo, hi))
            dens.append(mass[i] / (hi - lo))
    order = np.argsort([t[0] for t in thetas])
    intervals = [thetas[i] for i in order]
    density = np.array([dens[i] for i in order])
    edges = np.array([iv[0] for iv in intervals] + [intervals[-1][1]])
    return edges, density


def ids_estimate(fam, eps, n, seed, burn_in=dynamics.DEFAULT_BURN):
    """Integrated density of states near the band center, per site.

    Counts projective passages of the orbit: one full turn of the direction
    is two sign changes of x, one state of the chain, and one matrix covers
    two sites.  The estimate is therefore (boundary rate) / 4.
    """
    cns = models.constants(fam)
    if cns.type_class == "confined":
        raise ValueError("confined family: the direction never completes "
                         "turns, the state count does not apply")
    st = dynamics.run_orbit(fam, eps, n, seed, burn_in=burn_in)
    rate = st.n_boundaries / st.n_steps
    return 0.25 * rate


def ising_free_energy(h_dist, coupling, n, seed, burn_in=dynamics.DEFAULT_BURN):
    """Quenched free energy of the random-field chain per site.

    Splits into the deterministic bond term log(2 sinh(2 coupling)) / 2 and
    the Lyapunov exponent of the normalized transfer matrices at
    eps = exp(-2 coupling).  A field distribution concentrated at zero is
    allowed here (clean chain) even though it is degenerate for the
    critical analysis.
    """
    if coupling <= 0:
        raise ValueError("coupling must be positive")
    eps = math.exp(-2.0 * coupling)
    fam = models.ising_family(h_dist, allow_degenerate=True)
    det_part = 0.5 * math.log(math.exp(2.0 * coupling) - math.exp(-2.0 * coupling))
    lo, hi = h_dist.support()
    if lo == 0.0 and hi == 0.0:
        # clean chain: the top eigenvalue is explicit
        gamma = math.log(1.0 + eps) - 0.5 * math.log(1.0 - eps * eps)
        return det_part + gamma, 0.0
    est = lyapunov_birkhoff(fam, eps, n, seed, burn_in=burn_in)
    return det_part + est.value, est.stderr
