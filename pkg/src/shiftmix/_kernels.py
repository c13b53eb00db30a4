"""Forward-pass candidate scan for the adaptive spline learner.

For every admissible (parent basis, variable) pair the scan evaluates the
residual-sum-of-squares reduction obtained by adding

* the linear term ``parent * x`` (one column), and
* the reflected hinge pair ``parent * max(0, x - t)``, ``parent * max(0, t - x)``
  at every candidate knot ``t`` (two columns, or one when a side is empty).

The reduction is computed against an orthonormal basis ``Q`` of the current
model and its residual ``r``, using prefix sums over ``x`` sorted ascending so
all knots of one (parent, variable) pair cost a single pass over the rows.

Both implementations return ``(reduction, parent, var, kind, knot, sides)``
with ``kind`` 0 for linear and 1 for hinge and ``sides`` a bitmask
(1 = plus side, 2 = minus side).  ``parent == -1`` means nothing admissible.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

LINEAR = 0
HINGE = 1
# reductions closer than this (relative) count as ties; ties keep the earlier
# candidate so both backends agree despite different summation order
TIE = 1e-9


def _pair_reduction(d_p, d_m, cross, b_p, b_m, cc_p, cc_m, tol, single_only):
    """Best reduction from a hinge pair given the projected Gram entries."""
    ok_p = cc_p > 0.0 and d_p > tol * cc_p
    ok_m = cc_m > 0.0 and d_m > tol * cc_m
    red_p = b_p * b_p / d_p if ok_p else -1.0
    red_m = b_m * b_m / d_m if ok_m else -1.0
    if ok_p and ok_m and not single_only:
        det = d_p * d_m - cross * cross
        if det > tol * d_p * d_m:
            return (d_m * b_p * b_p - 2.0 * cross * b_p * b_m + d_p * b_m * b_m) / det, 3
    if red_p >= red_m * (1.0 - TIE):
        return red_p, (1 if ok_p else 0)
    return red_m, 2


_pair_reduction_nb = njit(cache=True, nogil=True)(_pair_reduction)


@njit(cache=True, nogil=True)
def scan_numba(xc, order, knot_pos, knot_val, n_knots, B, parent_ok, var_ok,
               Q, r, single_only, tol):
    n, m = Q.shape
    p = xc.shape[1]
    G = knot_pos.shape[1]
    best = 0.0
    bj = -1
    bv = -1
    bkind = -1
    bg = -1
    bsides = 0
    pre_pxq = np.zeros((G, m))
    pre_pq = np.zeros((G, m))
    pre_s = np.zeros((G, 5))
    acc_pxq = np.zeros(m)
    acc_pq = np.zeros(m)
    for j in range(B.shape[1]):
        if not parent_ok[j]:
            continue
        for v in range(p):
            if not var_ok[j, v]:
                continue
            for k in range(m):
                acc_pxq[k] = 0.0
                acc_pq[k] = 0.0
            s_pxr = 0.0
            s_pr = 0.0
            s_p2x2 = 0.0
            s_p2x = 0.0
            s_p2 = 0.0
            ng = n_knots[v]
            i = 0
            for g in range(ng + 1):
                stop = knot_pos[v, g] if g < ng else n
                while i < stop:
                    idx = order[i, v]
                    pv = B[idx, j]
                    if pv != 0.0:
                        px = pv * xc[idx, v]
                        for k in range(m):
                            qk = Q[idx, k]
                            acc_pxq[k] += px * qk
                            acc_pq[k] += pv * qk
                        rv = r[idx]
                        s_pxr += px * rv
                        s_pr += pv * rv
                        s_p2x2 += px * px
                        s_p2x += pv * px
                        s_p2 += pv * pv
                    i += 1
                if g < ng:
                    for k in range(m):
                        pre_pxq[g, k] = acc_pxq[k]
                        pre_pq[g, k] = acc_pq[k]
                    pre_s[g, 0] = s_pxr
                    pre_s[g, 1] = s_pr
                    pre_s[g, 2] = s_p2x2
                    pre_s[g, 3] = s_p2x
                    pre_s[g, 4] = s_p2

            # linear term parent * x
            qq = 0.0
            for k in range(m):
                qq += acc_pxq[k] * acc_pxq[k]
            d = s_p2x2 - qq
            if s_p2x2 > 0.0 and d > tol * s_p2x2:
                red = s_pxr * s_pxr / d
                if red > best * (1.0 + TIE):
                    best, bj, bv, bkind, bg, bsides = red, j, v, 0, -1, 1

            for g in range(ng):
                t = knot_val[v, g]
                # minus side: rows with x <= t, column p * (t - x)
                cr_m = t * pre_s[g, 1] - pre_s[g, 0]
                cc_m = t * t * pre_s[g, 4] - 2.0 * t * pre_s[g, 3] + pre_s[g, 2]
                # plus side: rows with x > t, column p * (x - t)
                cr_p = (s_pxr - pre_s[g, 0]) - t * (s_pr - pre_s[g, 1])
                cc_p = ((s_p2x2 - pre_s[g, 2]) - 2.0 * t * (s_p2x - pre_s[g, 3])
                        + t * t * (s_p2 - pre_s[g, 4]))
                qp2 = 0.0
                qm2 = 0.0
                qpm = 0.0
                for k in range(m):
                    qm = t * pre_pq[g, k] - pre_pxq[g, k]
                    qp = (acc_pxq[k] - pre_pxq[g, k]) - t * (acc_pq[k] - pre_pq[g, k])
                    qp2 += qp * qp
                    qm2 += qm * qm
                    qpm += qp * qm
                red, sides = _pair_reduction_nb(cc_p - qp2, cc_m - qm2, -qpm, cr_p, cr_m,
                                                cc_p, cc_m, tol, single_only)
                if sides != 0 and red > best * (1.0 + TIE):
                    best, bj, bv, bkind, bg, bsides = red, j, v, 1, g, sides
    return best, bj, bv, bkind, bg, bsides


def scan_numpy(xc, order, knot_pos, knot_val, n_knots, B, parent_ok, var_ok,
               Q, r, single_only, tol):
    n, m = Q.shape
    p = xc.shape[1]
    best, bj, bv, bkind, bg, bsides = 0.0, -1, -1, -1, -1, 0
    for j in range(B.shape[1]):
        if not parent_ok[j]:
            continue
        for v in range(p):
            if not var_ok[j, v]:
                continue
            o = order[:, v]
            ps = B[o, j]
            xs = xc[o, v]
            px = ps * xs
            qs = Q[o]
            rs = r[o]
            # prefix sums with a leading zero row; row i = sum over first i sorted rows
            cols = np.column_stack([px * rs, ps * rs, px * px, ps * px, ps * ps])
            cum_s = np.vstack([np.zeros((1, 5)), np.cumsum(cols, axis=0)])
            cum_pxq = np.vstack([np.zeros((1, m)), np.cumsum(px[:, None] * qs, axis=0)])
            cum_pq = np.vstack([np.zeros((1, m)), np.cumsum(ps[:, None] * qs, axis=0)])
            tot_s, tot_pxq, tot_pq = cum_s[n], cum_pxq[n], cum_pq[n]
            s_pxr, s_pr, s_p2x2, s_p2x, s_p2 = tot_s

            d = s_p2x2 - tot_pxq @ tot_pxq
            if s_p2x2 > 0.0 and d > tol * s_p2x2:
                red = s_pxr * s_pxr / d
                if red > best * (1.0 + TIE):
                    best, bj, bv, bkind, bg, bsides = red, j, v, LINEAR, -1, 1

            ng = n_knots[v]
            if ng == 0:
                continue
            pos = knot_pos[v, :ng]
            t = knot_val[v, :ng]
            pre = cum_s[pos]
            pxq, pq = cum_pxq[pos], cum_pq[pos]
            cr_m = t * pre[:, 1] - pre[:, 0]
            cc_m = t * t * pre[:, 4] - 2.0 * t * pre[:, 3] + pre[:, 2]
            cr_p = (s_pxr - pre[:, 0]) - t * (s_pr - pre[:, 1])
            cc_p = (s_p2x2 - pre[:, 2]) - 2.0 * t * (s_p2x - pre[:, 3]) + t * t * (s_p2 - pre[:, 4])
            qm = t[:, None] * pq - pxq
            qp = (tot_pxq - pxq) - t[:, None] * (tot_pq - pq)
            d_p = cc_p - np.einsum("gk,gk->g", qp, qp)
            d_m = cc_m - np.einsum("gk,gk->g", qm, qm)
            cross = -np.einsum("gk,gk->g", qp, qm)
            for g in range(ng):
                red, sides = _pair_reduction(d_p[g], d_m[g], cross[g], cr_p[g], cr_m[g],
                                             cc_p[g], cc_m[g], tol, single_only)
                if sides != 0 and red > best * (1.0 + TIE):
                    best, bj, bv, bkind, bg, bsides = red, j, v, HINGE, g, sides
    return best, bj, bv, bkind, bg, bsides


scan = scan_numba if HAVE_NUMBA else scan_numpy
