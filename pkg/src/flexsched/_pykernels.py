"""Pure-Python kernels. Reference implementation and fallback for ``_ckernels``.

All indices are 0-based. Schedules are modified in place.
"""

from __future__ import annotations

import numpy as np

# Entries whose step ratio is within this relative distance of the optimal
# step are taken to hit their bound together.
TIE_RTOL = 1e-12


# duration multigraph ----------------------------------------------------------


class DurationMultigraph:
    """Multigraph on time slots with one star of edges per fractional job.

    For job ``j`` with fractional columns ``t0 < t1 < ...`` the edges are
    ``(t0, tk, j)`` for ``k >= 1``. Parallel edges between a node pair are kept
    in insertion order, which is the ``(t', t, j)`` order for edges added by
    :meth:`from_schedule`.
    """

    def __init__(self, T: int, duration: int = 0):
        self.T = T
        self.duration = duration
        self.nbrs = [dict() for _ in range(T)]  # v -> {w: {edge: None}}
        self.stars = {}  # j -> (root, [t, ...])

    @classmethod
    def from_schedule(cls, S, rows, eps, duration=0):
        g = cls(S.shape[1], duration)
        edges = []
        for j in rows:
            cols = np.flatnonzero((S[j] > eps) & (S[j] < 1.0 - eps)).tolist()
            if len(cols) >= 2:
                g.stars[j] = (cols[0], cols[1:])
                edges.extend((cols[0], t, j) for t in cols[1:])
        edges.sort()
        for e in edges:
            g._link(e)
        return g

    def _link(self, e):
        a, b, _ = e
        grp = self.nbrs[a].get(b)
        if grp is None:
            grp = {}
            self.nbrs[a][b] = grp
            self.nbrs[b][a] = grp
        grp[e] = None

    def _unlink(self, e):
        a, b, _ = e
        grp = self.nbrs[a][b]
        del grp[e]
        if not grp:
            del self.nbrs[a][b]
            del self.nbrs[b][a]

    def set_job(self, j, cols):
        """Replace job ``j``'s star by the one for fractional columns ``cols``."""
        old = self.stars.pop(j, None)
        if old is not None:
            root, leaves = old
            for t in leaves:
                self._unlink((root, t, j))
        if len(cols) >= 2:
            self.stars[j] = (cols[0], list(cols[1:]))
            for t in cols[1:]:
                self._link((cols[0], t, j))

    def add_edge(self, tp, t, j):
        """Add a single edge; the job's star index is extended accordingly."""
        root, leaves = self.stars.get(j, (tp, []))
        if root != tp:
            raise ValueError(f"job {j} is rooted at {root}, not {tp}")
        leaves.append(t)
        self.stars[j] = (root, leaves)
        self._link((tp, t, j))

    def edges(self):
        out = []
        for j, (root, leaves) in self.stars.items():
            out.extend((root, t, j) for t in leaves)
        return sorted(out)

    @property
    def n_edges(self):
        return sum(len(leaves) for _, leaves in self.stars.values())


def find_cycle(g: DurationMultigraph):
    """Depth-first search for a cycle, starting from the lowest node.

    Unvisited neighbours are explored first (lowest index first); a back edge
    is taken only once a node has no unvisited neighbour. Returns the cycle as
    a list of ``(a, b, edge)`` traversals ``a -> b`` forming a closed walk, or
    ``None`` if the graph is a forest.
    """
    T = g.T
    nbrs = g.nbrs
    state = [0] * T
    parent = [-1] * T
    pedge = [None] * T
    for s in range(T):
        if state[s] or not nbrs[s]:
            continue
        state[s] = 1
        stack = [s]
        iters = {s: iter(sorted(nbrs[s]))}
        while stack:
            v = stack[-1]
            for w in iters[v]:
                if state[w] == 0:
                    e = next(iter(nbrs[v][w]))
                    parent[w], pedge[w], state[w] = v, e, 1
                    stack.append(w)
                    iters[w] = iter(sorted(nbrs[w]))
                    break
            else:
                for w in sorted(nbrs[v]):
                    if state[w] != 1:
                        continue
                    grp = nbrs[v][w]
                    if w != parent[v]:
                        e = next(iter(grp))
                    else:
                        e = next((k for k in grp if k != pedge[v]), None)
                        if e is None:
                            continue
                    path = [v]
                    while path[-1] != w:
                        path.append(parent[path[-1]])
                    path.reverse()
                    cyc = [(path[i], path[i + 1], pedge[path[i + 1]]) for i in range(len(path) - 1)]
                    cyc.append((v, w, e))
                    return cyc
                state[v] = 2
                stack.pop()
    return None


def cancel_cycle(S, cycle, power, eps):
    """Shift mass around ``cycle`` by the largest admissible step.

    Traversing edge ``(t', t, j)`` as ``a -> b`` lowers ``s_j(a)`` and raises
    ``s_j(b)`` by ``shift / p_j``. The step is limited by the net change of
    each entry. Returns ``(shift, rows)`` where ``rows`` lists the jobs that
    lost a fractional entry.
    """
    mult = {}
    for a, b, (_, _, j) in cycle:
        mult[(j, a)] = mult.get((j, a), 0) - 1
        mult[(j, b)] = mult.get((j, b), 0) + 1
    entries = [(j, t, k) for (j, t), k in mult.items() if k != 0]
    ratios = []
    for j, t, k in entries:
        s = S[j, t]
        ratios.append(((1.0 - s) if k > 0 else s) * power[j] / abs(k))
    shift = min(ratios)
    lim = shift * (1.0 + TIE_RTOL)
    changed = set()
    for (j, t, k), r in zip(entries, ratios):
        if r <= lim:
            S[j, t] = 1.0 if k > 0 else 0.0
        else:
            S[j, t] += k * shift / power[j]
        v = S[j, t]
        if v <= eps or v >= 1.0 - eps:
            changed.add(j)
    return shift, sorted(changed)


def rect_adjust(S, rows, power, eps, max_iter=-1):
    """Cycle-cancelling adjustment for jobs ``rows`` sharing one duration.

    Returns the number of cycles cancelled.
    """
    g = DurationMultigraph.from_schedule(S, rows, eps)
    n = 0
    while max_iter < 0 or n < max_iter:
        cyc = find_cycle(g)
        if cyc is None:
            break
        _, changed = cancel_cycle(S, cyc, power, eps)
        for j in changed:
            g.set_job(j, np.flatnonzero((S[j] > eps) & (S[j] < 1.0 - eps)).tolist())
        n += 1
    return n


# null vectors and the pair loop --------------------------------------------------


def null_vector(A, tol=1e-12):
    """Non-zero ``direction`` with ``A @ direction = 0`` for a matrix with more columns than rank.

    Gauss-Jordan elimination with partial pivoting; the first free column gets
    weight one. Output is scaled to unit max-norm with its first non-zero entry
    positive.
    """
    A = np.array(A, dtype=float)
    m, n = A.shape
    scale = np.max(np.abs(A)) if A.size else 0.0
    thresh = tol * max(scale, 1.0)
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        p = row + int(np.argmax(np.abs(A[row:, col])))
        if abs(A[p, col]) <= thresh:
            continue
        if p != row:
            A[[row, p]] = A[[p, row]]
        A[row] /= A[row, col]
        for r in range(m):
            if r != row and A[r, col] != 0.0:
                A[r] -= A[r, col] * A[row]
        pivots.append(col)
        row += 1
    free = next(c for c in range(n) if c not in pivots)
    direction = np.zeros(n)
    direction[free] = 1.0
    for r, c in enumerate(pivots):
        direction[c] = -A[r, free]
    direction /= np.max(np.abs(direction))
    nz = np.flatnonzero(np.abs(direction) > 1e-14)
    if direction[nz[0]] < 0:
        direction = -direction
    return direction


def realistic_adjust(S, shapes, eps, max_iter=-1, trace=None):
    """Null-space adjustment over slot pairs for arbitrary load shapes.

    Visits pairs ``(t, u)``, ``t < u``, in lexicographic order and sweeps the
    jobs once per pair, collecting jobs fractional at both slots. Whenever
    ``dmax + 1`` are collected, their mass is shifted between the two slots
    along a null vector of their shape matrix. Records ``(t, u, jobs, direction,
    shift)`` per update in ``trace`` when given. Returns the update count.
    """
    J, T = S.shape
    dmax = shapes.shape[1]
    D = dmax + 1
    frac = (S > eps) & (S < 1.0 - eps)
    cand = [j for j in range(J) if np.count_nonzero(frac[j]) >= 2]
    n = 0
    for t in range(T):
        for u in range(t + 1, T):
            group = []
            for j in cand:
                if not (frac[j, t] and frac[j, u]):
                    continue
                group.append(j)
                if len(group) < D:
                    continue
                if 0 <= max_iter <= n:
                    return n
                direction = null_vector(shapes[group].T)
                ratios = []
                for k, jj in enumerate(group):
                    x = direction[k]
                    if x > 0:
                        ratios.append(min((1.0 - S[jj, t]) / x, S[jj, u] / x))
                    elif x < 0:
                        ratios.append(min(S[jj, t] / -x, (1.0 - S[jj, u]) / -x))
                    else:
                        ratios.append(np.inf)
                shift = min(ratios)
                lim = shift * (1.0 + TIE_RTOL)
                for k, jj in enumerate(group):
                    x = direction[k]
                    if x == 0.0:
                        continue
                    a = S[jj, t] + x * shift
                    b = S[jj, u] - x * shift
                    # snap whichever side reached its bound
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
                    frac[jj, t] = eps < a < 1.0 - eps
                    frac[jj, u] = eps < b < 1.0 - eps
                if trace is not None:
                    trace.append((t, u, tuple(group), direction.copy(), float(shift)))
                n += 1
                group = [jj for jj in group if frac[jj, t] and frac[jj, u]]
    return n


# exhaustive oracle ----------------------------------------------------------------


def slot_cost(kind, t, x, target, slope, pa, pb):
    if kind == 0:
        return (x - target[t]) ** 2
    if kind == 1:
        return slope[t] * x
    if kind == 2:
        return max(pa[t, k] * x + pb[t, k] for k in range(pa.shape[1]))
    return x * x


def brute_force(order, shapes, dur, first, last, T, kind, target, slope, pa, pb,
                xstar, best_cost, best_starts, tol=1e-12):
    """Depth-first enumeration of start tuples with interval lower bounds.

    ``order`` fixes the branching sequence. ``best_cost``/``best_starts`` seed
    the incumbent (0-based starts indexed by job). The bound at a node is
    ``sum_t min phi_t`` over ``[L(t), L(t) + R(t)]`` where ``R`` is the largest
    load the unplaced jobs could still add at ``t``. Returns
    ``(cost, starts, nodes)``.
    """
    J = len(order)
    rem = np.zeros((J + 1, T))
    for k in range(J - 1, -1, -1):
        j = order[k]
        contrib = np.zeros(T)
        for st in range(first[j], last[j] + 1):
            seg = shapes[j, : dur[j]]
            np.maximum(contrib[st : st + dur[j]], seg, out=contrib[st : st + dur[j]])
        rem[k] = rem[k + 1] + contrib
    rem = rem.tolist()
    shp = [shapes[j, : dur[j]].tolist() for j in range(shapes.shape[0])]
    load = [0.0] * T
    cur = [0] * shapes.shape[0]
    best = [float(best_cost), list(best_starts)]
    nodes = 0
    xs = xstar.tolist()

    def bound(k):
        total = 0.0
        r = rem[k]
        for t in range(T):
            lo = load[t]
            x = min(max(xs[t], lo), lo + r[t])
            total += slot_cost(kind, t, x, target, slope, pa, pb)
        return total

    def visit(k):
        nonlocal nodes
        j = order[k]
        seg = shp[j]
        for st in range(first[j], last[j] + 1):
            nodes += 1
            for i, v in enumerate(seg):
                load[st + i] += v
            cur[j] = st
            if k + 1 == J:
                c = sum(slot_cost(kind, t, load[t], target, slope, pa, pb) for t in range(T))
                if c < best[0] - tol * max(1.0, abs(best[0])):
                    best[0] = c
                    best[1] = list(cur)
            elif bound(k + 1) < best[0] - tol * max(1.0, abs(best[0])):
                visit(k + 1)
            for i, v in enumerate(seg):
                load[st + i] -= v

    if J:
        visit(0)
    return best[0], np.asarray(best[1], dtype=np.int64), nodes
