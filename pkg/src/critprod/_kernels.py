"""Hot loops for orbit simulation, compiled with numba when available.

The direction state is carried as a unit vector p = (p1, p2) with
x = p1 / p2; the fiber coordinate is z = delta * sign(x) * log|x|.  Scalar
state lives in two small arrays so the kernels can be resumed across draw
blocks:

float state F:  0 p1, 1 p2, 2 delta, 3 zmax, 4 target_z, 5 log_sum
int   state I:  0 recorded steps, 1 sign of previous x (1 positive),
                2 completed boundary count, 3 record capacity,
                4 occupancy of the running passage, 5 infinity hits,
                6..9 overflow counts (lo+, hi+, lo-, hi-),
                10 batch size, 11 measure flag
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

F_P1, F_P2, F_DELTA, F_ZMAX, F_TARGET, F_LOGSUM = 0, 1, 2, 3, 4, 5
I_STEPS, I_POS, I_NPASS, I_CAP, I_CURS, I_INF = 0, 1, 2, 3, 4, 5
I_OF_LO_P, I_OF_HI_P, I_OF_LO_M, I_OF_HI_M = 6, 7, 8, 9
I_BATCH, I_MEASURE = 10, 11


@njit(cache=True)
def burn_block(m11, m12, m21, m22, fstate):
    p1 = fstate[F_P1]
    p2 = fstate[F_P2]
    for i in range(m11.shape[0]):
        q1 = m11[i] * p1 + m12[i] * p2
        q2 = m21[i] * p1 + m22[i] * p2
        r = math.sqrt(q1 * q1 + q2 * q2)
        p1 = q1 / r
        p2 = q2 / r
    fstate[F_P1] = p1
    fstate[F_P2] = p2


@njit(cache=True)
def orbit_block(m11, m12, m21, m22, fstate, istate, hist_p, hist_m,
                batch, pass_n, pass_sign, pass_z, pass_s, fgrid, batch_f):
    p1 = fstate[F_P1]
    p2 = fstate[F_P2]
    delta = fstate[F_DELTA]
    zmax = fstate[F_ZMAX]
    target = fstate[F_TARGET]
    logsum = fstate[F_LOGSUM]
    steps = istate[I_STEPS]
    pos_prev = istate[I_POS]
    npass = istate[I_NPASS]
    cap = istate[I_CAP]
    cur_s = istate[I_CURS]
    bsize = istate[I_BATCH]
    measure = istate[I_MEASURE]
    nbatch = batch.shape[0]
    inv_bin = hist_p.shape[0] / (2.0 * zmax)

    for i in range(m11.shape[0]):
        q1 = m11[i] * p1 + m12[i] * p2
        q2 = m21[i] * p1 + m22[i] * p2
        r = math.sqrt(q1 * q1 + q2 * q2)
        lg = math.log(r)
        p1 = q1 / r
        p2 = q2 / r

        logsum += lg
        bi = steps // bsize
        if bi >= nbatch:
            bi = nbatch - 1
        batch[bi] += lg

        pos = 1 if p1 * p2 > 0.0 else 0

        have_z = 0
        z = 0.0
        if measure == 1:
            if p2 == 0.0:
                istate[I_INF] += 1
            elif p1 == 0.0:
                istate[I_OF_LO_P] += 1
            else:
                lx = math.log(abs(p1)) - math.log(abs(p2))
                if pos == 1:
                    z = delta * lx
                    have_z = 1
                    if z < -zmax:
                        istate[I_OF_LO_P] += 1
                    elif z > zmax:
                        istate[I_OF_HI_P] += 1
                    else:
                        k = int((z + zmax) * inv_bin)
                        if k >= hist_p.shape[0]:
                            k = hist_p.shape[0] - 1
                        hist_p[k] += 1
                        batch_f[bi] += fgrid[k]
                else:
                    z = -delta * lx
                    have_z = 1
                    if z < -zmax:
                        istate[I_OF_LO_M] += 1
                    elif z > zmax:
                        istate[I_OF_HI_M] += 1
                    else:
                        k = int((z + zmax) * inv_bin)
                        if k >= hist_m.shape[0]:
                            k = hist_m.shape[0] - 1
                        hist_m[k] += 1
                        batch_f[bi] += fgrid[k]

        if pos != pos_prev:
            if npass < cap:
                pass_n[npass] = steps
                pass_sign[npass] = 1 if pos == 1 else -1
                if have_z == 1:
                    pass_z[npass] = z
                elif p2 == 0.0:
                    pass_z[npass] = math.inf
                else:
                    pass_z[npass] = -math.inf
            if npass >= 1 and npass - 1 < cap:
                pass_s[npass - 1] = cur_s
            npass += 1
            cur_s = 0

        if have_z == 1 and z >= target and z <= 1.0:
            cur_s += 1

        steps += 1
        pos_prev = pos

    fstate[F_P1] = p1
    fstate[F_P2] = p2
    fstate[F_LOGSUM] = logsum
    istate[I_STEPS] = steps
    istate[I_POS] = pos_prev
    istate[I_NPASS] = npass
    istate[I_CURS] = cur_s


@njit(cache=True)
def renewal_passage(w, start, ystart, ostart, nstart, sstart, wall, restart,
                    absorb_base, absorb_shift, sentinel, drift, sign,
                    arm_level, disarm_shift):
    """Advance one renewal passage, consuming draws w[start:].

    Returns (done, y, o, n, s, used).  done = 1 when the walk absorbed; the
    caller refills the draw buffer and continues otherwise.  The counter s
    tallies indices with the overshoot armed, the passage length is the
    final n.
    """
    y = ystart
    o = ostart
    n = nstart
    s = sstart
    i = start
    limit = w.shape[0]
    while True:
        if math.isinf(y):
            return 1, y, o, n, s, i - start
        if i >= limit:
            return 0, y, o, n, s, i - start
        if o != sentinel:
            s += 1
        if y <= wall:
            y1 = restart
        elif y >= absorb_base + absorb_shift + o:
            y1 = math.inf
        else:
            y1 = y + sign * w[i] + drift
        i += 1
        if not math.isinf(y1):
            if y1 >= arm_level and o == sentinel:
                o = y1 - arm_level
            elif y1 <= arm_level + disarm_shift + o and o != sentinel:
                o = sentinel
        y = y1
        n += 1
