"""Exact solver for the discrete transportation problem.

min Σ_ij C[i,j] f[i,j]  s.t.  Σ_j f[i,j] = a[i],  Σ_i f[i,j] = b[j],  f ≥ 0

Primal transportation simplex on the bipartite spanning-tree basis.  The
initial basis comes from a row-greedy rule (each row fills its supply into
the cheapest still-open columns); every assignment either saturates its
column or finishes its row, which makes the arc set acyclic, and any
degenerate shortfall is repaired by zero-flow arcs joining forest
components.  Entering arcs are found by block pricing over column blocks;
a full sweep with no candidate proves optimality.  After the solve both
halves of optimality are re-verified from scratch: the reduced-cost
certificate min_ij (C - u_i - v_j) >= -tol and the primal marginal
residuals of the tree flow, so a bookkeeping bug cannot silently return
a wrong value.

Costs are arbitrary (the metrics layer passes squared Euclidean
distances).  Intended scale: a few thousand atoms per side.
"""

from __future__ import annotations

import numpy as np

__all__ = ["solve_transport", "TransportResult", "TransportError"]

_PRICE_TOL = 1e-11
_CERT_TOL = 1e-9
_COL_BLOCK = 64


class TransportError(RuntimeError):
    pass


class TransportResult:
    def __init__(self, value, u, v, n_pivots):
        self.value = value
        self.u = u
        self.v = v
        self.n_pivots = n_pivots


def _row_greedy_basis(a, b, C):
    """Initial basic arcs: rows in order, cheapest open columns first.

    Every arc either saturates its column or finishes its row, and a row's
    only non-saturating arc is its last, so no two rows can share two
    columns: the arc set is a forest.  Float dust left once every column
    has closed is merged into the row's last arc rather than opening a new
    one, which would risk closing a cycle.
    """
    n, m = C.shape
    rb = b.astype(float).copy()
    arcs = []
    for i in range(n):
        ra = float(a[i])
        last = -1
        for j in np.argsort(C[i], kind="stable"):
            if ra <= 0.0:
                break
            cap = float(rb[j])
            if cap <= 0.0:
                continue
            f = ra if ra < cap else cap
            arcs.append([i, int(j), f])
            rb[j] = cap - f
            ra -= f
            last = len(arcs) - 1
        if ra > 0.0 and last >= 0:
            arcs[last][2] += ra
    return [(i, j, f) for i, j, f in arcs]


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[ry] = rx
        return True


def _complete_forest(arcs, n, m):
    """Add zero-flow arcs until the arc set spans all n+m nodes as a tree."""
    uf = _UnionFind(n + m)
    for i, j, _ in arcs:
        uf.union(i, n + j)
    comp_rows = {}
    comp_cols = {}
    for i in range(n):
        comp_rows.setdefault(uf.find(i), i)
    for j in range(m):
        comp_cols.setdefault(uf.find(n + j), j)
    root_comp = uf.find(0)
    for comp in sorted(set(comp_rows) | set(comp_cols)):
        if uf.find(comp) == uf.find(root_comp):
            continue
        # Join with a degenerate arc; every component has a row and a col.
        if comp in comp_rows:
            i, j = comp_rows[comp], comp_cols[root_comp]
        else:
            i, j = comp_rows[root_comp], comp_cols[comp]
        arcs.append((i, j, 0.0))
        uf.union(i, n + j)
    return arcs


def solve_transport(a, b, C, max_pivots=None) -> TransportResult:
    """Solve the balanced transportation problem to proven optimality."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    n, m = C.shape
    if a.shape != (n,) or b.shape != (m,):
        raise TransportError("marginal sizes do not match the cost matrix")
    if np.any(a <= 0) or np.any(b <= 0):
        raise TransportError("marginals must be strictly positive")
    total = float(a.sum())
    if abs(total - float(b.sum())) > 1e-9 * max(total, 1.0):
        raise TransportError("unbalanced problem: total supply != total demand")
    if max_pivots is None:
        max_pivots = 200 * (n + m) + 10000

    arcs = _complete_forest(_row_greedy_basis(a, b, C), n, m)
    T = n + m
    if len(arcs) != T - 1:
        raise TransportError("initial basis is not a spanning tree")

    # Tree arrays: node ids are rows 0..n-1, cols n..n+m-1.  flow[x] and the
    # basis arc live on the edge from x to parent[x].
    parent = np.full(T, -1, dtype=np.int64)
    depth = np.zeros(T, dtype=np.int64)
    flow = np.zeros(T, dtype=float)
    children = [[] for _ in range(T)]
    adj = [[] for _ in range(T)]
    for i, j, f in arcs:
        adj[i].append((n + j, f))
        adj[n + j].append((i, f))
    u = np.zeros(n)
    v = np.zeros(m)
    stack = [0]
    seen = np.zeros(T, dtype=bool)
    seen[0] = True
    while stack:
        x = stack.pop()
        for y, f in adj[x]:
            if seen[y]:
                continue
            seen[y] = True
            parent[y] = x
            depth[y] = depth[x] + 1
            flow[y] = f
            children[x].append(y)
            if y >= n:
                v[y - n] = C[x, y - n] - u[x]
            else:
                u[y] = C[y, parent[y] - n] - v[parent[y] - n]
            stack.append(y)
    if not seen.all():
        raise TransportError("initial basis does not span all nodes")

    enter_tol = _PRICE_TOL * (1.0 + float(np.abs(C).max()))
    n_blocks = (m + _COL_BLOCK - 1) // _COL_BLOCK
    block = 0

    def find_entering():
        nonlocal block
        for _ in range(n_blocks):
            lo = block * _COL_BLOCK
            hi = min(lo + _COL_BLOCK, m)
            R = C[:, lo:hi] - u[:, None] - v[None, lo:hi]
            flat = int(np.argmin(R))
            i, dj = divmod(flat, hi - lo)
            if R[i, dj] < -enter_tol:
                return i, lo + dj
            block = (block + 1) % n_blocks
        return None

    pivots = 0
    while True:
        entering = find_entering()
        if entering is None:
            break
        pivots += 1
        if pivots > max_pivots:
            raise TransportError(f"pivot cap exceeded ({max_pivots}); solve abandoned")
        ei, ej = entering
        na, nb = ei, n + ej

        # Tree path between the arc endpoints, walked leaf-to-LCA.
        pa, pb = [], []
        x, y = na, nb
        while depth[x] > depth[y]:
            pa.append(x)
            x = parent[x]
        while depth[y] > depth[x]:
            pb.append(y)
            y = parent[y]
        while x != y:
            pa.append(x)
            pb.append(y)
            x = parent[x]
            y = parent[y]

        # Signs alternate around the cycle; the first tree arc out of either
        # endpoint loses what the entering arc gains.
        theta = np.inf
        leave = -1
        leave_in_pa = False
        for path, flag in ((pa, True), (pb, False)):
            s = -1
            for node in path:
                if s < 0 and flow[node] < theta:
                    theta = flow[node]
                    leave = node
                    leave_in_pa = flag
                s = -s
        if not np.isfinite(theta):
            raise TransportError("unbounded cycle; basis corrupted")
        for path in (pa, pb):
            s = -1
            for node in path:
                flow[node] += s * theta
                s = -s
        flow[leave] = 0.0

        # Re-hang the subtree cut off by the leaving arc under the entering
        # arc, re-rooting it at the entering endpoint inside that subtree.
        new_root = na if leave_in_pa else nb
        attach = nb if leave_in_pa else na
        chain = [new_root]
        while chain[-1] != leave:
            chain.append(parent[chain[-1]])
        prev = attach
        carry = theta
        for node in chain:
            old_parent = parent[node]
            old_flow = flow[node]
            children[old_parent].remove(node)
            parent[node] = prev
            children[prev].append(node)
            flow[node] = carry
            carry = old_flow
            prev = node

        # Shift duals on the re-hung subtree so the entering arc prices to 0.
        delta = C[ei, ej] - u[ei] - v[ej]
        if new_root >= n:
            delta = -delta
        stack = [new_root]
        while stack:
            x = stack.pop()
            depth[x] = depth[parent[x]] + 1
            if x < n:
                u[x] += delta
            else:
                v[x - n] -= delta
            stack.extend(children[x])

    # Certificate: recompute reduced costs from scratch with the final duals.
    cert_tol = _CERT_TOL * (1.0 + float(np.abs(C).max()))
    worst = 0.0
    for lo in range(0, m, 512):
        hi = min(lo + 512, m)
        R = C[:, lo:hi] - u[:, None] - v[None, lo:hi]
        worst = min(worst, float(R.min()))
    if worst < -cert_tol:
        raise TransportError(f"optimality certificate failed: min reduced cost {worst:.3e}")
    if flow.min() < -1e-9 * max(total, 1.0):
        raise TransportError("negative basic flow; solve corrupted")

    value = 0.0
    row_sum = np.zeros(n)
    col_sum = np.zeros(m)
    for x in range(T):
        p = parent[x]
        if p < 0:
            continue
        i, j = (x, p - n) if x < n else (p, x - n)
        value += flow[x] * C[i, j]
        row_sum[i] += flow[x]
        col_sum[j] += flow[x]
    feas = max(float(np.abs(row_sum - a).max()), float(np.abs(col_sum - b).max()))
    if feas > 1e-9 * max(total, 1.0):
        raise TransportError(f"primal feasibility residual {feas:.3e}")
    return TransportResult(float(value), u, v, pivots)
