"""Independent slow-path oracles shared by the unit and acceptance tests.

Nothing here touches the engine's solvers: transport values come from
exhaustive enumeration of basic feasible solutions, so agreement with the
engine is a genuine two-route check.  A compiled twin of the enumerator
keeps the 5x5 acceptance instances affordable; both routes are identical
algorithms and the unit tests pin them against each other.
"""

import os
from itertools import combinations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = os.environ.get("BLOBFLOW_NO_JIT", "") != "1"
except ImportError:
    HAVE_NUMBA = False


def _tree_flow(tree, a, b):
    """Unique flow on a spanning tree by leaf stripping; may be negative."""
    n, m = len(a), len(b)
    adj = {k: [] for k in range(n + m)}
    for idx, (i, j) in enumerate(tree):
        adj[i].append((n + j, idx))
        adj[n + j].append((i, idx))
    resid = np.concatenate([a, b]).astype(float)
    deg = np.array([len(adj[k]) for k in range(n + m)])
    removed = [False] * len(tree)
    flows = np.zeros(len(tree))
    leaves = [k for k in range(n + m) if deg[k] == 1]
    for _ in range(len(tree)):
        x = leaves.pop()
        y, idx = next((y, idx) for y, idx in adj[x] if not removed[idx])
        f = resid[x]
        flows[idx] = f
        resid[x] = 0.0
        resid[y] -= f
        removed[idx] = True
        deg[x] -= 1
        deg[y] -= 1
        if deg[y] == 1:
            leaves.append(y)
    return flows


def _bruteforce_py(a, b, C):
    n, m = C.shape
    arcs = [(i, j) for i in range(n) for j in range(m)]
    best = np.inf
    for tree in combinations(arcs, n + m - 1):
        parent = list(range(n + m))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        spanning = True
        for i, j in tree:
            ri, rj = find(i), find(n + j)
            if ri == rj:
                spanning = False
                break
            parent[rj] = ri
        if not spanning:
            continue
        flows = _tree_flow(tree, a, b)
        if np.any(flows < -1e-11):
            continue
        cost = sum(f * C[i, j] for f, (i, j) in zip(flows, tree))
        best = min(best, cost)
    return best


if HAVE_NUMBA:

    @njit(cache=True)
    def _uf_find(parent, x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    @njit(cache=True)
    def _bruteforce_jit(a, b, C):
        n, m = C.shape
        T = n + m
        k = T - 1
        na = n * m
        idx = np.empty(k, np.int64)
        for t in range(k):
            idx[t] = t
        parent = np.empty(T, np.int64)
        deg = np.empty(T, np.int64)
        resid = np.empty(T, np.float64)
        used = np.empty(k, np.bool_)
        best = np.inf
        while True:
            spanning = True
            for v in range(T):
                parent[v] = v
            for t in range(k):
                arc = idx[t]
                ri = _uf_find(parent, arc // m)
                rj = _uf_find(parent, n + arc % m)
                if ri == rj:
                    spanning = False
                    break
                parent[rj] = ri
            if spanning:
                # leaf-strip the unique tree flow, track feasibility and cost
                for v in range(n):
                    resid[v] = a[v]
                for v in range(m):
                    resid[n + v] = b[v]
                for t in range(k):
                    used[t] = False
                cost = 0.0
                feasible = True
                for _ in range(k):
                    for v in range(T):
                        deg[v] = 0
                    for t in range(k):
                        if not used[t]:
                            deg[idx[t] // m] += 1
                            deg[n + idx[t] % m] += 1
                    leaf = -1
                    for v in range(T):
                        if deg[v] == 1:
                            leaf = v
                            break
                    pick = -1
                    for t in range(k):
                        if used[t]:
                            continue
                        arc = idx[t]
                        if arc // m == leaf or n + arc % m == leaf:
                            pick = t
                            break
                    arc = idx[pick]
                    i = arc // m
                    j = arc % m
                    other = n + j if i == leaf else i
                    f = resid[leaf]
                    if f < -1e-11:
                        feasible = False
                        break
                    cost += f * C[i, j]
                    resid[leaf] = 0.0
                    resid[other] -= f
                    used[pick] = True
                if feasible and cost < best:
                    best = cost
            t = k - 1
            while t >= 0 and idx[t] == na - k + t:
                t -= 1
            if t < 0:
                break
            idx[t] += 1
            for u in range(t + 1, k):
                idx[u] = idx[u - 1] + 1
        return best


def transport_value_bruteforce(a, b, C):
    """Optimal transport cost by enumerating all spanning-tree bases.

    Every vertex of the transportation polytope is the flow of a spanning
    tree of the complete bipartite graph; minimizing over the feasible
    trees is exact.  Exponential, keep n + m small (<= ~10).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    if HAVE_NUMBA:
        best = float(_bruteforce_jit(a, b, C))
    else:
        best = float(_bruteforce_py(a, b, C))
    if not np.isfinite(best):
        raise ValueError("no feasible basis found (unbalanced marginals?)")
    return best
