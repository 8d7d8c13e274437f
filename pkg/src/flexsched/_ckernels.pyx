# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same signatures and arithmetic order as ``_pykernels``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

cdef double TIE_RTOL = 1e-12


cdef inline bint _frac(double v, double eps) noexcept nogil:
    return v > eps and v < 1.0 - eps


# cycle cancellation -------------------------------------------------------------


cdef class _Graph:
    """Per-pair doubly linked edge lists; edge id ``k * T + t`` for local job k."""

    cdef Py_ssize_t T, nJ
    cdef long[::1] root, head, tail, cnt, e_next, e_prev
    cdef char[::1] active

    def __init__(self, Py_ssize_t T, Py_ssize_t nJ):
        self.T = T
        self.nJ = nJ
        self.root = np.full(nJ, -1, dtype=np.int_)
        self.head = np.full(T * T, -1, dtype=np.int_)
        self.tail = np.full(T * T, -1, dtype=np.int_)
        self.cnt = np.zeros(T * T, dtype=np.int_)
        self.e_next = np.full(nJ * T, -1, dtype=np.int_)
        self.e_prev = np.full(nJ * T, -1, dtype=np.int_)
        self.active = np.zeros(nJ * T, dtype=np.int8)

    cdef inline Py_ssize_t pair(self, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
        if a < b:
            return a * self.T + b
        return b * self.T + a

    cdef void link(self, Py_ssize_t e) noexcept nogil:
        cdef Py_ssize_t g = self.pair(self.root[e // self.T], e % self.T)
        self.e_prev[e] = self.tail[g]
        self.e_next[e] = -1
        if self.tail[g] >= 0:
            self.e_next[self.tail[g]] = e
        else:
            self.head[g] = e
        self.tail[g] = e
        self.cnt[g] += 1
        self.active[e] = 1

    cdef void unlink(self, Py_ssize_t e) noexcept nogil:
        cdef Py_ssize_t g = self.pair(self.root[e // self.T], e % self.T)
        cdef long p = self.e_prev[e]
        cdef long n = self.e_next[e]
        if p >= 0:
            self.e_next[p] = n
        else:
            self.head[g] = n
        if n >= 0:
            self.e_prev[n] = p
        else:
            self.tail[g] = p
        self.cnt[g] -= 1
        self.active[e] = 0

    cdef void set_job(self, Py_ssize_t k, double[::1] row, double eps) noexcept nogil:
        cdef Py_ssize_t T = self.T, t, base = k * T
        cdef long first = -1
        cdef int n = 0
        if self.root[k] >= 0:
            for t in range(T):
                if self.active[base + t]:
                    self.unlink(base + t)
        for t in range(T):
            if _frac(row[t], eps):
                n += 1
                if first < 0:
                    first = t
        if n < 2:
            self.root[k] = -1
            return
        self.root[k] = first
        for t in range(first + 1, T):
            if _frac(row[t], eps):
                self.link(base + t)


cdef Py_ssize_t _find_cycle(_Graph g, long[::1] state, long[::1] parent, long[::1] pedge,
                            long[::1] nxt, long[::1] stack, long[::1] cyc_a, long[::1] cyc_b,
                            long[::1] cyc_e) noexcept nogil:
    """Writes traversals into ``cyc_*``; returns their count, 0 if acyclic."""
    cdef Py_ssize_t T = g.T, s, v, w, sp, gi, n, x
    cdef long e
    cdef bint has
    for v in range(T):
        state[v] = 0
    for s in range(T):
        if state[s]:
            continue
        has = False
        for w in range(T):
            if w != s and g.cnt[g.pair(s, w)] > 0:
                has = True
                break
        if not has:
            continue
        state[s] = 1
        parent[s] = -1
        pedge[s] = -1
        nxt[s] = 0
        sp = 0
        stack[0] = s
        while sp >= 0:
            v = stack[sp]
            w = nxt[v]
            while w < T:
                if w != v and state[w] == 0 and g.cnt[g.pair(v, w)] > 0:
                    break
                w += 1
            if w < T:
                nxt[v] = w + 1
                parent[w] = v
                pedge[w] = g.head[g.pair(v, w)]
                state[w] = 1
                nxt[w] = 0
                sp += 1
                stack[sp] = w
                continue
            nxt[v] = T
            for w in range(T):
                if w == v or state[w] != 1:
                    continue
                gi = g.pair(v, w)
                if g.cnt[gi] == 0:
                    continue
                e = g.head[gi]
                if w == parent[v]:
                    if e == pedge[v]:
                        e = g.e_next[e]
                    if e < 0:
                        continue
                # path w -> ... -> v along tree edges, written backwards
                n = 0
                x = v
                while x != w:
                    n += 1
                    x = parent[x]
                x = v
                for gi in range(n - 1, -1, -1):
                    cyc_a[gi] = parent[x]
                    cyc_b[gi] = x
                    cyc_e[gi] = pedge[x]
                    x = parent[x]
                cyc_a[n] = v
                cyc_b[n] = w
                cyc_e[n] = e
                return n + 1
            state[v] = 2
            sp -= 1
    return 0


def rect_adjust(double[:, ::1] S, const cnp.int64_t[::1] rows, const double[::1] power,
                double eps, long max_iter=-1):
    """Cycle-cancelling adjustment for jobs ``rows`` sharing one duration.

    Returns the number of cycles cancelled.
    """
    cdef Py_ssize_t T = S.shape[1], nJ = rows.shape[0]
    cdef Py_ssize_t k, t, tp, i, m, q, ncyc, nent, j
    cdef long n = 0
    if nJ == 0 or T == 0:
        return 0
    cdef _Graph g = _Graph(T, nJ)
    cdef long[::1] state = np.zeros(T, dtype=np.int_)
    cdef long[::1] parent = np.zeros(T, dtype=np.int_)
    cdef long[::1] pedge = np.zeros(T, dtype=np.int_)
    cdef long[::1] nxt = np.zeros(T, dtype=np.int_)
    cdef long[::1] stack = np.zeros(T + 1, dtype=np.int_)
    cdef long[::1] cyc_a = np.zeros(T + 1, dtype=np.int_)
    cdef long[::1] cyc_b = np.zeros(T + 1, dtype=np.int_)
    cdef long[::1] cyc_e = np.zeros(T + 1, dtype=np.int_)
    cdef long[::1] ent_k = np.zeros(2 * T + 2, dtype=np.int_)
    cdef long[::1] ent_t = np.zeros(2 * T + 2, dtype=np.int_)
    cdef long[::1] ent_m = np.zeros(2 * T + 2, dtype=np.int_)
    cdef double[::1] ratio = np.zeros(2 * T + 2)
    cdef char[::1] changed = np.zeros(nJ, dtype=np.int8)
    cdef long[::1] order = np.zeros(nJ, dtype=np.int_)
    cdef long[::1] bstart = np.zeros(T + 1, dtype=np.int_)
    cdef double s, p, shift, lim, v
    cdef long kk, tt, mm
    cdef int nf

    with nogil:
        # roots, then edges inserted in (root, t, job) order
        for k in range(nJ):
            j = rows[k]
            nf = 0
            for t in range(T):
                if _frac(S[j, t], eps):
                    nf += 1
                    if nf == 1:
                        g.root[k] = t
            if nf < 2:
                g.root[k] = -1
            else:
                bstart[g.root[k] + 1] += 1
        for t in range(T):
            bstart[t + 1] += bstart[t]
        for k in range(nJ):
            if g.root[k] >= 0:
                order[bstart[g.root[k]]] = k
                bstart[g.root[k]] += 1
        for t in range(T - 1, 0, -1):
            bstart[t] = bstart[t - 1]
        bstart[0] = 0
        for tp in range(T):
            for t in range(T):
                if t == tp:
                    continue
                for i in range(bstart[tp], bstart[tp + 1]):
                    k = order[i]
                    if _frac(S[rows[k], t], eps):
                        g.link(k * T + t)

        while max_iter < 0 or n < max_iter:
            ncyc = _find_cycle(g, state, parent, pedge, nxt, stack, cyc_a, cyc_b, cyc_e)
            if ncyc == 0:
                break
            # net multiplicity per touched entry
            nent = 0
            for i in range(ncyc):
                kk = cyc_e[i] // T
                for q in range(2):
                    tt = cyc_a[i] if q == 0 else cyc_b[i]
                    mm = -1 if q == 0 else 1
                    for m in range(nent):
                        if ent_k[m] == kk and ent_t[m] == tt:
                            ent_m[m] += mm
                            break
                    else:
                        ent_k[nent] = kk
                        ent_t[nent] = tt
                        ent_m[nent] = mm
                        nent += 1
            shift = INFINITY
            for m in range(nent):
                if ent_m[m] == 0:
                    continue
                s = S[rows[ent_k[m]], ent_t[m]]
                p = power[rows[ent_k[m]]]
                if ent_m[m] > 0:
                    ratio[m] = (1.0 - s) * p / fabs(<double>ent_m[m])
                else:
                    ratio[m] = s * p / fabs(<double>ent_m[m])
                if ratio[m] < shift:
                    shift = ratio[m]
            lim = shift * (1.0 + TIE_RTOL)
            for m in range(nent):
                if ent_m[m] == 0:
                    continue
                j = rows[ent_k[m]]
                tt = ent_t[m]
                if ratio[m] <= lim:
                    S[j, tt] = 1.0 if ent_m[m] > 0 else 0.0
                else:
                    S[j, tt] += ent_m[m] * shift / power[j]
                v = S[j, tt]
                if v <= eps or v >= 1.0 - eps:
                    changed[ent_k[m]] = 1
            for k in range(nJ):
                if changed[k]:
                    changed[k] = 0
                    g.set_job(k, S[rows[k]], eps)
            n += 1
    return n


# null vectors and the pair loop ------------------------------------------------------


cdef void _null_vector(double[:, ::1] A, Py_ssize_t m, Py_ssize_t n, double tol,
                       long[::1] pivots, double[::1] direction) noexcept nogil:
    cdef Py_ssize_t row = 0, col, r, c, p, npiv = 0, free
    cdef double scale = 0.0, thresh, best, f, piv, top
    for r in range(m):
        for c in range(n):
            if fabs(A[r, c]) > scale:
                scale = fabs(A[r, c])
    thresh = tol * (scale if scale > 1.0 else 1.0)
    for col in range(n):
        if row == m:
            break
        p = row
        best = fabs(A[row, col])
        for r in range(row + 1, m):
            if fabs(A[r, col]) > best:
                best = fabs(A[r, col])
                p = r
        if best <= thresh:
            continue
        if p != row:
            for c in range(n):
                f = A[row, c]
                A[row, c] = A[p, c]
                A[p, c] = f
        piv = A[row, col]
        for c in range(n):
            A[row, c] = A[row, c] / piv
        for r in range(m):
            if r != row and A[r, col] != 0.0:
                f = A[r, col]
                for c in range(n):
                    A[r, c] -= f * A[row, c]
        pivots[npiv] = col
        npiv += 1
        row += 1
    free = 0
    for c in range(n):
        free = c
        for r in range(npiv):
            if pivots[r] == c:
                free = -1
                break
        if free >= 0:
            break
    for c in range(n):
        direction[c] = 0.0
    direction[free] = 1.0
    for r in range(npiv):
        direction[pivots[r]] = -A[r, free]
    top = 0.0
    for c in range(n):
        if fabs(direction[c]) > top:
            top = fabs(direction[c])
    for c in range(n):
        direction[c] = direction[c] / top
    for c in range(n):
        if fabs(direction[c]) > 1e-14:
            if direction[c] < 0:
                for r in range(n):
                    direction[r] = -direction[r]
            break


def null_vector(A, double tol=1e-12):
    """Non-zero ``direction`` with ``A @ direction = 0``; unit max-norm, first non-zero entry positive."""
    cdef double[:, ::1] M = np.array(A, dtype=float, order="C")
    cdef Py_ssize_t m = M.shape[0], n = M.shape[1]
    direction = np.zeros(n)
    _null_vector(M, m, n, tol, np.zeros(n + 1, dtype=np.int_), direction)
    return direction


def realistic_adjust(double[:, ::1] S, const double[:, ::1] shapes, double eps,
                     long max_iter=-1, trace=None):
    """Null-space adjustment over slot pairs for arbitrary load shapes.

    Returns the update count; appends ``(t, u, jobs, direction, shift)`` to ``trace``.
    """
    cdef Py_ssize_t J = S.shape[0], T = S.shape[1], dmax = shapes.shape[1]
    cdef Py_ssize_t D = dmax + 1, t, u, j, k, i, i2, jj, ng, nc = 0, keep
    cdef long n = 0
    cdef char[:, ::1] frac = np.zeros((J, T), dtype=np.int8)
    cdef long[::1] cand = np.zeros(J, dtype=np.int_)
    cdef long[::1] group = np.zeros(D, dtype=np.int_)
    cdef long[::1] pivots = np.zeros(D + 1, dtype=np.int_)
    cdef double[:, ::1] A = np.zeros((dmax, D))
    cdef double[::1] direction = np.zeros(D)
    cdef double[::1] ratios = np.zeros(D)
    cdef double x, shift, lim, a, b, r1, r2
    cdef int cnt
    cdef bint record = trace is not None

    for j in range(J):
        cnt = 0
        for t in range(T):
            frac[j, t] = _frac(S[j, t], eps)
            cnt += frac[j, t]
        if cnt >= 2:
            cand[nc] = j
            nc += 1

    for t in range(T):
        for u in range(t + 1, T):
            ng = 0
            for i in range(nc):
                j = cand[i]
                if not (frac[j, t] and frac[j, u]):
                    continue
                group[ng] = j
                ng += 1
                if ng < D:
                    continue
                if 0 <= max_iter <= n:
                    return n
                for k in range(D):
                    for i2 in range(dmax):
                        A[i2, k] = shapes[group[k], i2]
                _null_vector(A, dmax, D, 1e-12, pivots, direction)
                shift = INFINITY
                for k in range(D):
                    jj = group[k]
                    x = direction[k]
                    if x > 0:
                        r1 = (1.0 - S[jj, t]) / x
                        r2 = S[jj, u] / x
                    elif x < 0:
                        r1 = S[jj, t] / -x
                        r2 = (1.0 - S[jj, u]) / -x
                    else:
                        r1 = INFINITY
                        r2 = INFINITY
                    ratios[k] = r1 if r1 < r2 else r2
                    if ratios[k] < shift:
                        shift = ratios[k]
                lim = shift * (1.0 + TIE_RTOL)
                for k in range(D):
                    jj = group[k]
                    x = direction[k]
                    if x == 0.0:
                        continue
                    a = S[jj, t] + x * shift
                    b = S[jj, u] - x * shift
                    if x > 0:
                        if (1.0 - S[jj, t]) / x <= lim:
                            a = 1.0
                        if S[jj, u] / x <= lim:
                            b = 0.0
                    else:
                        if S[jj, t] / -x <= lim:
                            a = 0.0
                        if (1.0 - S[jj, u]) / -x <= lim:
                            b = 1.0
                    S[jj, t] = a
                    S[jj, u] = b
                    frac[jj, t] = _frac(a, eps)
                    frac[jj, u] = _frac(b, eps)
                if record:
                    trace.append((t, u, tuple(int(group[k]) for k in range(D)),
                                  np.asarray(direction).copy(), float(shift)))
                n += 1
                keep = 0
                for k in range(D):
                    jj = group[k]
                    if frac[jj, t] and frac[jj, u]:
                        group[keep] = jj
                        keep += 1
                ng = keep
    return n


# exhaustive oracle ---------------------------------------------------------------------


cdef struct _Ctx:
    Py_ssize_t J, T, K, dmax
    int kind
    const long* order
    const double* shapes
    const long* dur
    const long* first
    const long* last
    const double* target
    const double* slope
    const double* pa
    const double* pb
    const double* xstar
    const double* rem
    double* load
    long* cur
    long* best_starts
    double best
    double tol
    long nodes


cdef inline double _phi(_Ctx* c, Py_ssize_t t, double x) noexcept nogil:
    cdef double v, m
    cdef Py_ssize_t k
    if c.kind == 0:
        return (x - c.target[t]) * (x - c.target[t])
    if c.kind == 1:
        return c.slope[t] * x
    if c.kind == 2:
        m = c.pa[t * c.K] * x + c.pb[t * c.K]
        for k in range(1, c.K):
            v = c.pa[t * c.K + k] * x + c.pb[t * c.K + k]
            if v > m:
                m = v
        return m
    return x * x


cdef inline double _cutoff(_Ctx* c) noexcept nogil:
    cdef double a = fabs(c.best)
    return c.best - c.tol * (a if a > 1.0 else 1.0)


cdef void _visit(_Ctx* c, Py_ssize_t k) noexcept nogil:
    cdef long j = c.order[k]
    cdef long d = c.dur[j]
    cdef long st
    cdef Py_ssize_t i, t
    cdef double total, x, lo
    for st in range(c.first[j], c.last[j] + 1):
        c.nodes += 1
        for i in range(d):
            c.load[st + i] += c.shapes[j * c.dmax + i]
        c.cur[j] = st
        if k + 1 == c.J:
            total = 0.0
            for t in range(c.T):
                total += _phi(c, t, c.load[t])
            if total < _cutoff(c):
                c.best = total
                for i in range(c.J):
                    c.best_starts[i] = c.cur[i]
        else:
            total = 0.0
            for t in range(c.T):
                lo = c.load[t]
                x = c.xstar[t]
                if x < lo:
                    x = lo
                if x > lo + c.rem[(k + 1) * c.T + t]:
                    x = lo + c.rem[(k + 1) * c.T + t]
                total += _phi(c, t, x)
            if total < _cutoff(c):
                _visit(c, k + 1)
        for i in range(d):
            c.load[st + i] -= c.shapes[j * c.dmax + i]


def brute_force(order, shapes, dur, first, last, Py_ssize_t T, int kind, target, slope, pa, pb,
                xstar, double best_cost, best_starts, double tol=1e-12):
    """Depth-first enumeration of start tuples with interval lower bounds.

    Returns ``(cost, starts, nodes)``; see the pure-Python twin.
    """
    cdef Py_ssize_t J = len(order), k, st
    rem_np = np.zeros((J + 1, T))
    for k in range(J - 1, -1, -1):
        j = order[k]
        contrib = np.zeros(T)
        for st in range(first[j], last[j] + 1):
            seg = shapes[j, : dur[j]]
            np.maximum(contrib[st : st + dur[j]], seg, out=contrib[st : st + dur[j]])
        rem_np[k] = rem_np[k + 1] + contrib
    cdef long[::1] o = np.array(order, dtype=np.int_, order="C")
    cdef double[:, ::1] sh = np.array(shapes, dtype=float, order="C")
    cdef long[::1] du = np.array(dur, dtype=np.int_, order="C")
    cdef long[::1] fi = np.array(first, dtype=np.int_, order="C")
    cdef long[::1] la = np.array(last, dtype=np.int_, order="C")
    cdef double[::1] tg = np.array(target, dtype=float, order="C")
    cdef double[::1] sl = np.array(slope, dtype=float, order="C")
    cdef double[:, ::1] a2 = np.array(np.atleast_2d(pa), dtype=float, order="C")
    cdef double[:, ::1] b2 = np.array(np.atleast_2d(pb), dtype=float, order="C")
    cdef double[::1] xs = np.array(xstar, dtype=float, order="C")
    cdef double[:, ::1] rem = rem_np
    cdef double[::1] load = np.zeros(T)
    cdef long[::1] cur = np.zeros(sh.shape[0] + 1, dtype=np.int_)
    cdef long[::1] bs = np.zeros(sh.shape[0] + 1, dtype=np.int_)
    for k in range(len(best_starts)):
        bs[k] = best_starts[k]
    cdef _Ctx c
    c.J = J
    c.T = T
    c.K = a2.shape[1]
    c.dmax = sh.shape[1]
    c.kind = kind
    c.order = &o[0] if J else NULL
    c.shapes = &sh[0, 0]
    c.dur = &du[0] if du.shape[0] else NULL
    c.first = &fi[0] if fi.shape[0] else NULL
    c.last = &la[0] if la.shape[0] else NULL
    c.target = &tg[0]
    c.slope = &sl[0]
    c.pa = &a2[0, 0]
    c.pb = &b2[0, 0]
    c.xstar = &xs[0]
    c.rem = &rem[0, 0]
    c.load = &load[0]
    c.cur = &cur[0]
    c.best_starts = &bs[0]
    c.best = best_cost
    c.tol = tol
    c.nodes = 0
    if J:
        with nogil:
            _visit(&c, 0)
    return c.best, np.asarray(bs[: sh.shape[0]], dtype=np.int64).copy(), int(c.nodes)
