"""Feasibility of height data: increment bounds, shortest paths, polytopes.

An edge whose potential is finite exactly on [lo, hi] constrains the
increment phi(head) - phi(base) to that interval.  Shortest-path distances
in the induced arc-weighted digraph decide which partial height functions
extend to finite-energy configurations and which slopes are achievable on
tori; enumerating torus cycles yields the allowed-slope polytope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import Infeasible, NegativeCycle, StateSpaceTooLarge
from .heights import HeightConfig, TorusInfo
from .lattice import (
    AXIS_VECTORS,
    Edge,
    Vertex,
    add,
    dot,
    edges_within,
    round_slope,
    sub,
)
from .potential import INF, PeriodicPotential

Arc = tuple[Vertex, Vertex]


@dataclass(frozen=True)
class IncrementBounds:
    """Directed bounds for one edge: up = d(base, head), down = d(head, base)."""

    up: float
    down: float


def increment_bounds(pot: PeriodicPotential, edge: Edge) -> IncrementBounds:
    """Endpoints of the finite-support interval of the edge's potential.

    ``up`` is the largest allowed increment along the edge, ``down`` minus
    the smallest; either may be +inf.
    """
    lo, hi = pot.edge_potential(edge).support()
    return IncrementBounds(up=hi, down=-lo)


# ---------------------------------------------------------------------------
# Arc-weighted digraphs and Bellman-Ford


@dataclass
class FeasibilityGraph:
    """Directed increment-bound graph with lazily computed distances."""

    vertices: list[Vertex]
    adjacency: dict[Vertex, list[tuple[Vertex, float]]]
    _distance_cache: dict[Vertex, dict[Vertex, float]] = field(default_factory=dict)

    @staticmethod
    def from_arcs(arcs: Mapping[Arc, float]) -> "FeasibilityGraph":
        vertices = sorted({v for arc in arcs for v in arc})
        adjacency: dict[Vertex, list[tuple[Vertex, float]]] = {v: [] for v in vertices}
        for (x, y), w in sorted(arcs.items()):
            adjacency[x].append((y, w))
        return FeasibilityGraph(vertices, adjacency)

    @staticmethod
    def from_potential(pot: PeriodicPotential, region: Iterable[Vertex]) -> "FeasibilityGraph":
        """Arcs for every edge with both endpoints in the region."""
        region = set(region)
        arcs: dict[Arc, float] = {}
        for edge in edges_within(region):
            base, axis = edge
            head = add(base, AXIS_VECTORS[axis])
            b = increment_bounds(pot, edge)
            arcs[(base, head)] = b.up
            arcs[(head, base)] = b.down
        return FeasibilityGraph.from_arcs(arcs)

    @staticmethod
    def from_torus(pot: PeriodicPotential, n: int, slope) -> "FeasibilityGraph":
        """Arcs on the n-torus for the homology class of the given slope.

        Wrap edges absorb the holonomy shift n*u'_i, so distances refer to
        the quasi-periodic lift phi(v + n e_i) = phi(v) + n u'_i.
        """
        info = torus_info(pot, n, slope)
        h = info.holonomy()
        vertices = [(i, j) for i in range(n) for j in range(n)]
        arcs: dict[Arc, float] = {}
        for x in vertices:
            for axis in (0, 1):
                lo, hi = pot.edge_potential((x, axis)).support()
                raw_head = add(x, AXIS_VECTORS[axis])
                head = info.wrap(raw_head)
                delta = h[axis] if raw_head != head else 0
                up = hi - delta
                down = delta - lo
                # parallel arcs can coincide on small tori; keep the tighter bound
                a1, a2 = (x, head), (head, x)
                arcs[a1] = min(arcs.get(a1, INF), up)
                arcs[a2] = min(arcs.get(a2, INF), down)
        g = FeasibilityGraph.from_arcs(arcs)
        g.vertices = vertices  # keep all torus vertices even if isolated
        for v in vertices:
            g.adjacency.setdefault(v, [])
        return g

    def distances_from(self, source: Vertex) -> dict[Vertex, float]:
        if source not in self._distance_cache:
            dist, _, cycle = _bellman_ford(self.vertices, self.adjacency, {source: 0.0})
            if cycle is not None:
                raise NegativeCycle(*cycle)
            self._distance_cache[source] = dist
        return self._distance_cache[source]

    def negative_cycle(self):
        """A witness negative cycle (vertex list, weight) or None."""
        init = {v: 0 for v in self.vertices}  # virtual super-source
        _, _, cycle = _bellman_ford(self.vertices, self.adjacency, init)
        return cycle


def _bellman_ford(vertices, adjacency, init):
    """Relaxation from the initialized vertices.

    Returns (dist, pred, cycle) where cycle is (canonical vertex list
    closing on its start, total weight) when a negative cycle is reachable,
    else None.
    """
    dist = {v: INF for v in vertices}
    pred: dict[Vertex, Vertex | None] = {v: None for v in vertices}
    for v, d in init.items():
        dist[v] = d
    n = len(vertices)
    for rounds in range(n):
        changed = False
        for x in vertices:
            dx = dist[x]
            if dx == INF:
                continue
            for y, w in adjacency[x]:
                if w == INF:
                    continue
                cand = dx + w
                if cand < dist[y]:
                    dist[y] = cand
                    pred[y] = x
                    changed = True
        if not changed:
            return dist, pred, None
    # a relaxation on round n witnesses a negative cycle; trace it via pred
    for x in vertices:
        if dist[x] == INF:
            continue
        for y, w in adjacency[x]:
            if w != INF and dist[x] + w < dist[y]:
                pred[y] = x
                return dist, pred, _trace_cycle(pred, y, adjacency, n)
    return dist, pred, None


def _trace_cycle(pred, start, adjacency, n):
    # walk back n steps to guarantee landing on the cycle itself
    v = start
    for _ in range(n):
        v = pred[v]
    cycle = [v]
    w = pred[v]
    while w != v:
        cycle.append(w)
        w = pred[w]
    cycle.reverse()  # pred-walk runs against arc direction
    # canonicalize: start at the lexicographically smallest vertex
    k = cycle.index(min(cycle))
    cycle = cycle[k:] + cycle[:k]
    cycle.append(cycle[0])
    weight = 0
    for a, b in zip(cycle, cycle[1:]):
        weight += min(w for y, w in adjacency[a] if y == b)
    return cycle, weight


def shortest_distances(graph: FeasibilityGraph, sources: Iterable[Vertex]) -> dict[Vertex, dict[Vertex, float]]:
    """D(source, .) for each source; raises NegativeCycle with a witness."""
    cycle = graph.negative_cycle()
    if cycle is not None:
        raise NegativeCycle(*cycle)
    return {s: graph.distances_from(s) for s in sources}


def distances_csv(distances: dict) -> list[str]:
    """CSV rows for a distance table from shortest_distances."""
    rows = ["source_x,source_y,target_x,target_y,distance"]
    for s in sorted(distances):
        for t in sorted(distances[s]):
            rows.append(f"{s[0]},{s[1]},{t[0]},{t[1]},{distances[s][t]}")
    return rows


# ---------------------------------------------------------------------------
# Boundary extension


def extend_boundary(graph: FeasibilityGraph, partial: Mapping[Vertex, float]) -> HeightConfig:
    """Pointwise-maximal finite-energy extension of the partial heights.

    Raises Infeasible((x, y)) when D(x, y) < phi(y) - phi(x) for pinned
    x, y, and propagates NegativeCycle from the distance computation.
    """
    if not partial:
        raise ValueError("partial assignment must be nonempty")
    pinned = sorted(partial)
    dists = shortest_distances(graph, pinned)
    for x, y in itertools.permutations(pinned, 2):
        if dists[x][y] < partial[y] - partial[x]:
            raise Infeasible((x, y))
    values = {}
    for v in graph.vertices:
        best = min(partial[x] + dists[x][v] for x in pinned)
        if best == INF:
            raise Infeasible(v)  # disconnected from every pinned vertex
        values[v] = best
    ref = pinned[0]
    return HeightConfig(values, reference=ref)


def extend_boundary_min(graph: FeasibilityGraph, partial: Mapping[Vertex, float]) -> HeightConfig:
    """Pointwise-minimal extension: sup over pinned x of phi(x) - D(v, x)."""
    if not partial:
        raise ValueError("partial assignment must be nonempty")
    pinned = sorted(partial)
    dists = shortest_distances(graph, pinned)
    # D(v, x) = distance from v to x; compute by reversing arcs
    reversed_adj: dict[Vertex, list[tuple[Vertex, float]]] = {v: [] for v in graph.vertices}
    for x, outs in graph.adjacency.items():
        for y, w in outs:
            reversed_adj[y].append((x, w))
    rgraph = FeasibilityGraph(graph.vertices, reversed_adj)
    rdists = {x: rgraph.distances_from(x) for x in pinned}
    for x, y in itertools.permutations(pinned, 2):
        if dists[x][y] < partial[y] - partial[x]:
            raise Infeasible((x, y))
    values = {}
    for v in graph.vertices:
        best = max(partial[x] - rdists[x][v] for x in pinned)
        values[v] = best
    return HeightConfig(values, reference=pinned[0])


# ---------------------------------------------------------------------------
# Torus slope feasibility


def torus_info(pot: PeriodicPotential, n: int, slope) -> TorusInfo:
    """Validate torus side and round the slope for the discrete domain."""
    lat = pot.lattice
    if lat.reduce((n, 0)) != (0, 0) or lat.reduce((0, n)) != (0, 0):
        raise ValueError(f"torus side {n} is not a multiple of the period")
    if pot.discrete:
        u = round_slope(slope, n)
    else:
        u = (
            Fraction(slope[0]).limit_denominator(10**9),
            Fraction(slope[1]).limit_denominator(10**9),
        )
    return TorusInfo(n=n, slope=u)


def torus_slope_feasible(pot: PeriodicPotential, n: int, slope) -> bool:
    """True iff slope-class configurations of finite energy exist on T_n."""
    graph = FeasibilityGraph.from_torus(pot, n, slope)
    return graph.negative_cycle() is None


# ---------------------------------------------------------------------------
# Allowed-slope polytope


@dataclass(frozen=True)
class Halfspace:
    normal: tuple[int, int]
    offset: Fraction | float
    cycle: tuple[Vertex, ...]

    def holds(self, u, strict: bool = False) -> bool:
        s = self.normal[0] * u[0] + self.normal[1] * u[1]
        if isinstance(self.offset, Fraction):  # discrete mode: exact rationals
            return s < self.offset if strict else s <= self.offset
        tol = 1e-9
        return s < self.offset - tol if strict else s <= self.offset + tol


@dataclass(frozen=True)
class SlopePolytope:
    """Intersection of halfspaces (u, s_i) <= d_i from torus cycles."""

    halfspaces: tuple[Halfspace, ...]
    feasible: bool = True  # False when a null-homotopic negative cycle exists
    truncated: bool = False  # a cycle at the enumeration length bound was binding

    def contains(self, u, strict: bool = False) -> bool:
        if not self.feasible:
            return False
        return all(h.holds(u, strict) for h in self.halfspaces)

    def canonical(self) -> tuple[tuple[int, int, Fraction | float], ...]:
        return tuple(sorted((h.normal[0], h.normal[1], h.offset) for h in self.halfspaces))

    def csv_rows(self) -> list[str]:
        rows = ["n1,n2,offset,cycle"]
        for h in sorted(self.halfspaces, key=lambda h: h.normal):
            cyc = " ".join(f"({v[0]} {v[1]})" for v in h.cycle)
            rows.append(f"{h.normal[0]},{h.normal[1]},{h.offset},{cyc}")
        return rows


def _fundamental_torus_steps(pot: PeriodicPotential):
    """Per-vertex directed steps on Z^2 / L with exact weights."""
    lat = pot.lattice
    verts = sorted(lat.fundamental_domain())
    steps: dict[Vertex, list[tuple[Vertex, Vertex, object]]] = {v: [] for v in verts}
    exact = pot.discrete
    for v in verts:
        for axis in (0, 1):
            e = AXIS_VECTORS[axis]
            lo, hi = pot.edge_potential((v, axis)).support()
            back = sub(v, e)
            lo2, hi2 = pot.edge_potential((lat.reduce(back), axis)).support()
            for disp, w in (((e), hi), ((-e[0], -e[1]), -lo2)):
                if w == INF:
                    continue
                if exact:
                    w = Fraction(w) if w == int(w) else Fraction(w).limit_denominator(10**9)
                steps[v].append((lat.reduce(add(v, disp)), disp, w))
    return verts, steps


def allowed_slope_polytope(pot: PeriodicPotential, cycle_length_bound: int | None = None) -> SlopePolytope:
    """Polytope of slopes from non-self-intersecting fundamental-torus cycles.

    Cycles up to the length bound are enumerated; larger bounds can only
    shrink the polytope, and ``truncated`` flags a binding cycle at the
    bound exactly.
    """
    lat = pot.lattice
    if cycle_length_bound is None:
        cycle_length_bound = 4 * lat.diameter()
    verts, steps = _fundamental_torus_steps(pot)
    best: dict[tuple[int, int], tuple[object, tuple[Vertex, ...], int]] = {}
    feasible = True
    witness_path: list[Vertex] = []

    def record(disp: Vertex, weight, path: tuple[Vertex, ...], length: int):
        nonlocal feasible
        if disp == (0, 0):
            if weight < 0:
                feasible = False
            return
        g = math.gcd(abs(disp[0]), abs(disp[1]))
        normal = (disp[0] // g, disp[1] // g)
        offset = weight / g if not isinstance(weight, Fraction) else weight / g
        cur = best.get(normal)
        if cur is None or offset < cur[0]:
            best[normal] = (offset, path, length)

    def dfs(start: Vertex, v: Vertex, disp: Vertex, weight, path: tuple[Vertex, ...], visited: frozenset):
        if len(path) > cycle_length_bound:
            return
        for nxt, step_disp, w in steps[v]:
            nd = add(disp, step_disp)
            nw = weight + w
            if nxt == start:
                record(nd, nw, path, len(path))
            if len(path) < cycle_length_bound and nxt not in visited and nxt > start:
                dfs(start, nxt, nd, nw, path + (nxt,), visited | {nxt})

    for start in verts:
        dfs(start, start, (0, 0), Fraction(0) if pot.discrete else 0.0, (start,), frozenset([start]))

    halfspaces = [
        Halfspace(normal=n, offset=off, cycle=path + (path[0],))
        for n, (off, path, _) in sorted(best.items())
    ]
    kept = _prune_redundant(halfspaces)
    truncated = any(
        best[h.normal][2] == cycle_length_bound for h in kept if h.normal in best
    )
    return SlopePolytope(halfspaces=tuple(kept), feasible=feasible, truncated=truncated)


def _prune_redundant(halfspaces: list[Halfspace]) -> list[Halfspace]:
    """Drop halfspaces implied by the others (exact 2D reasoning)."""
    kept = list(halfspaces)
    changed = True
    while changed:
        changed = False
        for i, h in enumerate(kept):
            others = kept[:i] + kept[i + 1 :]
            m = _max_objective([o for o in others], h.normal)
            if m is not None and m <= h.offset:
                kept.pop(i)
                changed = True
                break
    return kept


def _max_objective(halfspaces: list[Halfspace], objective: tuple[int, int]):
    """Exact max of objective . u over the intersection; None means +inf."""
    if not halfspaces:
        return None
    n = objective
    # unbounded iff a recession direction d has N d <= 0 and n . d > 0
    candidates = [n, (-n[0], -n[1])]
    for h in halfspaces:
        a, b = h.normal
        candidates += [(-b, a), (b, -a), (-a, -b)]
    for d in candidates:
        if dot(n, d) > 0 and all(dot(h.normal, d) <= 0 for h in halfspaces):
            return None
    best = None
    for h1, h2 in itertools.combinations(halfspaces, 2):
        det = h1.normal[0] * h2.normal[1] - h1.normal[1] * h2.normal[0]
        if det == 0:
            continue
        ux = Fraction(h1.offset * h2.normal[1] - h2.offset * h1.normal[1], det)
        uy = Fraction(h1.normal[0] * h2.offset - h2.normal[0] * h1.offset, det)
        if all(dot(h.normal, (ux, uy)) <= h.offset for h in halfspaces):
            val = dot(n, (ux, uy))
            if best is None or val > best:
                best = val
    if best is None:
        # no vertex: a single active constraint line; optimum on its boundary
        for h in halfspaces:
            a, b = h.normal
            # maximize n . u on the line a ux + b uy = offset if n || normal
            if a * n[1] == b * n[0] and (a * n[0] + b * n[1]) > 0:
                scale = Fraction(n[0], a) if a else Fraction(n[1], b)
                val = h.offset * scale
                if best is None or val < best:
                    best = val
    return best


# ---------------------------------------------------------------------------
# Exact enumeration and ground states


def _region_value_windows(pot, region, boundary):
    """Per-vertex [lo, hi] windows containing all finite-energy configs."""
    universe = set(region) | set(boundary)
    graph = FeasibilityGraph.from_potential(pot, universe)
    top = extend_boundary(graph, boundary)
    bot = extend_boundary_min(graph, boundary)
    return {v: (bot.values[v], top.values[v]) for v in region}


def enumerate_region_configs(pot, region, boundary, node_budget: int = 10_000_000):
    """Yield (values, energy) over all finite-energy interior configs.

    ``values`` maps interior vertices to heights; the energy sums every edge
    meeting the region, with boundary heights fixed.
    """
    region = sorted(region)
    boundary = dict(boundary)
    if not pot.discrete or not pot.is_lipschitz():
        raise StateSpaceTooLarge("exact enumeration needs a discrete Lipschitz potential")
    windows = _region_value_windows(pot, set(region), boundary)
    known = dict(boundary)
    order = _propagation_order(region, set(boundary))
    budget = [node_budget]
    yield from _dfs_region(pot, order, 0, known, 0.0, windows, budget)


def _propagation_order(region, anchors):
    """Order interior vertices so each touches an earlier or boundary vertex."""
    remaining = set(region)
    order = []
    frontier = set(anchors)
    while remaining:
        nxt = sorted(
            v for v in remaining if any(w in frontier for w in _nbrs(v))
        )
        if not nxt:  # disconnected piece; take the smallest vertex
            nxt = [min(remaining)]
        v = nxt[0]
        order.append(v)
        remaining.remove(v)
        frontier.add(v)
    return order


def _nbrs(v):
    return ((v[0] + 1, v[1]), (v[0] - 1, v[1]), (v[0], v[1] + 1), (v[0], v[1] - 1))


def _dfs_region(pot, order, idx, known, energy, windows, budget):
    if idx == len(order):
        yield dict((v, known[v]) for v in order), energy
        return
    v = order[idx]
    lo, hi = windows[v]
    lo, hi = int(lo), int(hi)
    for a in range(lo, hi + 1):
        budget[0] -= 1
        if budget[0] < 0:
            raise StateSpaceTooLarge("enumeration node budget exhausted")
        de = _local_energy(pot, v, a, known)
        if de == INF:
            continue
        known[v] = a
        yield from _dfs_region(pot, order, idx + 1, known, energy + de, windows, budget)
        del known[v]


def _local_energy(pot, v, a, known) -> float:
    """Energy of edges from v to already-assigned vertices."""
    total = 0.0
    for axis in (0, 1):
        head = add(v, AXIS_VECTORS[axis])
        if head in known:
            e = pot.edge_energy((v, axis), known[head] - a)
            if e == INF:
                return INF
            total += e
        base = sub(v, AXIS_VECTORS[axis])
        if base in known:
            e = pot.edge_energy((base, axis), a - known[base])
            if e == INF:
                return INF
            total += e
    return total


def enumerate_torus_configs(pot, n: int, slope, node_budget: int = 10_000_000):
    """Yield (values, energy) over the slope homology class on the n-torus.

    ``values`` maps fundamental-domain vertices to heights pinned at the
    origin; the energy sums all 2 n^2 torus edges.
    """
    info = torus_info(pot, n, slope)
    graph = FeasibilityGraph.from_torus(pot, n, slope)
    cyc = graph.negative_cycle()
    if cyc is not None:
        raise Infeasible(f"slope {slope} on the {n}-torus")
    x0 = (0, 0)
    dist_from = graph.distances_from(x0)
    radj: dict[Vertex, list[tuple[Vertex, float]]] = {v: [] for v in graph.vertices}
    for x, outs in graph.adjacency.items():
        for y, w in outs:
            radj[y].append((x, w))
    dist_to, _, _ = _bellman_ford(graph.vertices, radj, {x0: 0.0})
    windows = {v: (-dist_to[v], dist_from[v]) for v in graph.vertices}
    h = info.holonomy()
    order = [v for v in sorted(graph.vertices) if v != x0]
    known = {x0: 0}
    base_energy = 0.0
    for axis in (0, 1):  # n = 1 leaves only self-loops, handled upfront
        if info.wrap(add(x0, AXIS_VECTORS[axis])) == x0:
            e = pot.edge_energy((x0, axis), h[axis])
            if e == INF:
                return
            base_energy += e
    budget = [node_budget]
    yield from _dfs_torus(pot, info, h, order, 0, known, base_energy, windows, budget)


def _torus_local_energy(pot, info, h, v, a, known) -> float:
    total = 0.0
    for axis in (0, 1):
        raw = add(v, AXIS_VECTORS[axis])
        head = info.wrap(raw)
        delta = h[axis] if raw != head else 0
        if head == v:
            # n = 1 self-loop: increment is forced to the holonomy itself
            e = pot.edge_energy((v, axis), delta)
            if e == INF:
                return INF
            total += e
            continue
        if head in known:
            e = pot.edge_energy((v, axis), known[head] + delta - a)
            if e == INF:
                return INF
            total += e
        raw_b = sub(v, AXIS_VECTORS[axis])
        base = info.wrap(raw_b)
        delta_b = h[axis] if raw_b != base else 0
        if base in known:
            # for n = 2 the same neighbor sits on both sides through
            # distinct parallel edges; both must be counted
            e = pot.edge_energy((base, axis), a - (known[base] - delta_b))
            if e == INF:
                return INF
            total += e
    return total


def _dfs_torus(pot, info, h, order, idx, known, energy, windows, budget):
    if idx == len(order):
        yield dict(known), energy
        return
    v = order[idx]
    lo, hi = windows[v]
    for a in range(int(math.ceil(lo)), int(math.floor(hi)) + 1):
        budget[0] -= 1
        if budget[0] < 0:
            raise StateSpaceTooLarge("enumeration node budget exhausted")
        de = _torus_local_energy(pot, info, h, v, a, known)
        if de == INF:
            continue
        known[v] = a
        yield from _dfs_torus(pot, info, h, order, idx + 1, known, energy + de, windows, budget)
        del known[v]


def ground_state_energy(pot: PeriodicPotential, n: int, slope, node_budget: int = 10_000_000):
    """Exact chi(u) = min energy over the slope class, with one minimizer.

    Branch-and-bound: partial energies are monotone because normalized edge
    potentials are nonnegative, so any partial sum at or above the best
    known total can be cut; candidate heights are tried greedily.
    """
    if not pot.discrete or not pot.is_lipschitz():
        raise StateSpaceTooLarge("ground-state search needs a discrete Lipschitz potential")
    info = torus_info(pot, n, slope)
    graph = FeasibilityGraph.from_torus(pot, n, slope)
    if graph.negative_cycle() is not None:
        raise Infeasible(f"slope {slope} on the {n}-torus")
    x0 = (0, 0)
    dist_from = graph.distances_from(x0)
    radj: dict[Vertex, list[tuple[Vertex, float]]] = {v: [] for v in graph.vertices}
    for x, outs in graph.adjacency.items():
        for y, w in outs:
            radj[y].append((x, w))
    dist_to, _, _ = _bellman_ford(graph.vertices, radj, {x0: 0.0})
    windows = {v: (-dist_to[v], dist_from[v]) for v in graph.vertices}
    h = info.holonomy()
    order = [v for v in sorted(graph.vertices) if v != x0]
    known = {x0: 0}
    base_energy = 0.0
    for axis in (0, 1):
        if info.wrap(add(x0, AXIS_VECTORS[axis])) == x0:
            e = pot.edge_energy((x0, axis), h[axis])
            if e == INF:
                raise Infeasible(f"slope {slope} on the {n}-torus")
            base_energy += e
    best = [INF, None]
    budget = [node_budget]

    def search(idx, energy):
        if idx == len(order):
            if energy < best[0]:
                best[0] = energy
                best[1] = dict(known)
            return
        v = order[idx]
        lo, hi = windows[v]
        candidates = []
        for a in range(int(math.ceil(lo)), int(math.floor(hi)) + 1):
            budget[0] -= 1
            if budget[0] < 0:
                raise StateSpaceTooLarge("ground-state node budget exhausted")
            de = _torus_local_energy(pot, info, h, v, a, known)
            if de < INF and energy + de < best[0]:
                candidates.append((de, a))
        candidates.sort()
        for de, a in candidates:
            if energy + de >= best[0]:
                break
            known[v] = a
            search(idx + 1, energy + de)
            del known[v]

    search(0, base_energy)
    if best[1] is None:
        raise Infeasible(f"slope {slope} on the {n}-torus")
    return best[0], HeightConfig(best[1], reference=x0, torus=info)
