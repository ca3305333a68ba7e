"""Theory-facing measurements: partition functions, surface tension,
empirical gradient statistics, variance profiles, FKG and log-concavity.

Exact methods (class sums, transfer matrices) return rigorously computed
values with zero stderr; the thermodynamic-integration estimator carries
batch-mean error bars.  Verdict-style checks run on exhaustively
enumerable fixtures and report violations rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    BoxExceedsSupport,
    InsufficientBudget,
    NotIncreasing,
    SlopeMismatch,
    StateSpaceTooLarge,
)
from .feasibility import (
    enumerate_region_configs,
    enumerate_torus_configs,
    torus_info,
    torus_slope_feasible,
)
from .heights import HeightConfig
from .lattice import AXIS_VECTORS, Sublattice, Vertex, add, edges_meeting
from .potential import INF, PeriodicPotential, TablePotential
from .rng import RngStream
from .sampler import checkerboard_order, heat_bath_sweep

EXACT_SUM = "ExactSum"
TRANSFER_MATRIX = "TransferMatrix"
THERMODYNAMIC_INTEGRATION = "ThermodynamicIntegration"


# ---------------------------------------------------------------------------
# Exact log partition functions


def _logsumexp(values) -> float:
    values = [v for v in values if v > -INF]
    if not values:
        return -INF
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


def log_partition_exact(
    pot: PeriodicPotential,
    *,
    torus: int | None = None,
    slope=None,
    region=None,
    boundary=None,
    method: str = EXACT_SUM,
    node_budget: int = 10_000_000,
) -> float:
    """log Z over a torus slope class or a finite region with boundary.

    Values refer to the potential as originally defined: normalization
    offsets subtracted at construction are added back here.  An infeasible
    class reports -inf rather than raising.
    """
    if torus is not None:
        if method == TRANSFER_MATRIX:
            log_z = _transfer_matrix_log_z(pot, torus, slope, weighted=True)
        else:
            terms = []
            try:
                for _, energy in enumerate_torus_configs(pot, torus, slope, node_budget):
                    terms.append(-energy)
            except Exception as exc:
                from .errors import Infeasible

                if isinstance(exc, Infeasible):
                    return -INF
                raise
            log_z = _logsumexp(terms)
        per_class_edges = torus * torus // pot.lattice.index
        raw_offset = sum(pot.offsets.values()) * per_class_edges
        return log_z - raw_offset if log_z > -INF else -INF
    if method == TRANSFER_MATRIX:
        raise ValueError("transfer-matrix mode applies to torus classes")
    terms = []
    if pot.is_lipschitz():
        for _, energy in enumerate_region_configs(pot, region, boundary, node_budget):
            terms.append(-energy)
    else:
        terms = _unbounded_region_terms(pot, region, boundary)
    log_z = _logsumexp(terms)
    if log_z == -INF:
        return -INF
    offset = sum(pot.edge_offset(e) for e in edges_meeting(region))
    return log_z - offset


def _unbounded_region_terms(pot, region, boundary, radius: int = 45):
    """Direct summation with superlinear-tail truncation; tiny regions only.

    The window keeps terms down to relative weight exp(-radius), far below
    double precision at the default.
    """
    import itertools

    region = sorted(region)
    if len(region) > 2:
        raise StateSpaceTooLarge("unbounded supports allow at most 2 free sites")
    lo = int(min(boundary.values())) - radius
    hi = int(max(boundary.values())) + radius
    terms = []
    for combo in itertools.product(range(lo, hi + 1), repeat=len(region)):
        e = _region_energy(pot, region, boundary, dict(zip(region, combo)))
        if e < INF:
            terms.append(-e)
    return terms


def _region_energy(pot, region, boundary, assignment):
    values = dict(boundary)
    values.update(assignment)
    total = 0.0
    for e in edges_meeting(set(region)):
        base, axis = e
        head = add(base, AXIS_VECTORS[axis])
        if base in values and head in values:
            en = pot.edge_energy(e, values[head] - values[base])
            if en == INF:
                return INF
            total += en
    return total


def _enumerate_states(pot, region, boundary, radius: int = 45):
    """(values, energy) pairs; unbounded supports fall back to a direct
    tail-truncated window scan on very small regions."""
    import itertools

    if pot.is_lipschitz():
        yield from enumerate_region_configs(pot, region, boundary)
        return
    region = sorted(region)
    if len(region) > 2:
        raise StateSpaceTooLarge("unbounded supports allow at most 2 free sites")
    lo = int(min(boundary.values())) - radius
    hi = int(max(boundary.values())) + radius
    for combo in itertools.product(range(lo, hi + 1), repeat=len(region)):
        assignment = dict(zip(region, combo))
        e = _region_energy(pot, region, boundary, assignment)
        if e < INF:
            yield assignment, e


# ---------------------------------------------------------------------------
# Transfer matrix over torus columns


def _transfer_matrix_log_z(pot, n, slope, weighted=True):
    """Column-to-column product over profile states with anchored offsets."""
    info = torus_info(pot, n, slope)
    h = info.holonomy()
    if not pot.is_lipschitz() or not pot.discrete:
        raise StateSpaceTooLarge("transfer matrix needs a discrete Lipschitz potential")

    # vertical support bounds per column position (class of edge ((c, j), e2))
    def vert_support(c, j):
        return pot.edge_potential(((c, j), 1)).support()

    def horiz_support(c, j):
        return pot.edge_potential(((c, j), 0)).support()

    def column_profiles(c):
        """Profiles d[0..n-1] with d[0] = 0 whose vertical edges are finite."""

        def profile_energy(prof):
            total = 0.0
            for j in range(n - 1):
                total += pot.edge_energy(((c, j), 1), prof[j + 1] - prof[j])
            return total

        out = []

        def rec(prefix):
            j = len(prefix)
            if j == n:
                # wrap edge (c, n-1) -> (c, 0): increment h2 - prefix[-1]
                e = pot.edge_energy(((c, n - 1), 1), h[1] - prefix[-1])
                if e < INF:
                    out.append((tuple(prefix), profile_energy(prefix) + e))
                return
            if j == 0:
                rec((0,))
                return
            lo, hi = vert_support(c, j - 1)
            for inc in range(int(lo), int(hi) + 1):
                rec(prefix + (prefix[-1] + inc,))

        rec(())
        return out

    # anchor windows from the feasibility distances
    from .feasibility import FeasibilityGraph, _bellman_ford

    graph = FeasibilityGraph.from_torus(pot, n, slope)
    if graph.negative_cycle() is not None:
        return -INF
    dist_from = graph.distances_from((0, 0))
    radj = {v: [] for v in graph.vertices}
    for x, outs in graph.adjacency.items():
        for y, w in outs:
            radj[y].append((x, w))
    dist_to, _, _ = _bellman_ford(graph.vertices, radj, {(0, 0): 0.0})
    anchor_window = {
        c: range(
            int(-dist_to[(c, 0)]), int(dist_from[(c, 0)]) + 1
        )
        for c in range(n)
    }

    profiles = {c: column_profiles(c) for c in range(n)}

    def hor_weight(c, prof_a, anchor_a, prof_b, anchor_b, wrap):
        total = 0.0
        hol = h[0] if wrap else 0
        for j in range(n):
            inc = (anchor_b + prof_b[j] + hol) - (anchor_a + prof_a[j])
            e = pot.edge_energy(((c, j), 0), inc)
            if e == INF:
                return INF
            total += e
        return total

    z = 0.0
    for prof0, e0 in profiles[0]:
        # states: (profile index, anchor); anchor of column 0 pinned to 0
        layer = {(prof0, 0): math.exp(-e0)}
        for c in range(1, n):
            nxt: dict = {}
            for (pa, aa), w in layer.items():
                for pb, eb in profiles[c]:
                    for ab in anchor_window[c]:
                        he = hor_weight(c - 1, pa, aa, pb, ab, wrap=False)
                        if he == INF:
                            continue
                        key = (pb, ab)
                        nxt[key] = nxt.get(key, 0.0) + w * math.exp(-(eb + he))
            layer = nxt
        # close the loop back to column 0 with the holonomy wrap
        for (pa, aa), w in layer.items():
            he = hor_weight(n - 1, pa, aa, prof0, 0, wrap=True)
            if he < INF:
                z += w * math.exp(-he)
    return math.log(z) if z > 0 else -INF


# ---------------------------------------------------------------------------
# Surface tension estimates


@dataclass(frozen=True)
class SigmaEstimate:
    slope: tuple
    n: int
    value: float
    method: str
    stderr: float = 0.0

    def to_record(self, seed=None) -> dict:
        return {
            "observable": "sigma",
            "inputs": {"slope": [str(s) for s in self.slope], "n": self.n},
            "value": self.value,
            "stderr": self.stderr,
            "method": self.method,
            "seed": seed,
        }


def sigma_estimate(
    pot: PeriodicPotential,
    slope,
    n: int,
    method: str = EXACT_SUM,
    budget: int = 2048,
    rng: RngStream | None = None,
    tolerance: float | None = None,
) -> SigmaEstimate:
    """Surface tension at a slope from the n-torus: -log Z / n^2.

    Exact methods report stderr 0; thermodynamic integration runs
    fixed-class MCMC over a Chebyshev beta grid with batch-mean errors.
    """
    info = torus_info(pot, n, slope)
    if not torus_slope_feasible(pot, n, slope):
        return SigmaEstimate(info.slope, n, INF, method, 0.0)
    volume = n * n
    if method in (EXACT_SUM, TRANSFER_MATRIX):
        log_z = log_partition_exact(pot, torus=n, slope=slope, method=method)
        value = INF if log_z == -INF else -log_z / volume
        return SigmaEstimate(info.slope, n, value, method, 0.0)
    if method != THERMODYNAMIC_INTEGRATION:
        raise ValueError(f"unknown sigma method {method!r}")
    integral, int_err = _ti_energy_integral(pot, n, slope, budget, rng)
    log_n0 = _transfer_matrix_log_z(_flatten_potential(pot), n, slope)
    raw_offset = sum(pot.offsets.values()) * (volume // pot.lattice.index)
    log_z = log_n0 - integral - raw_offset
    value = -log_z / volume
    stderr = int_err / volume
    if tolerance is not None and stderr > tolerance:
        raise InsufficientBudget(f"stderr {stderr} exceeds tolerance {tolerance}")
    return SigmaEstimate(info.slope, n, value, THERMODYNAMIC_INTEGRATION, stderr)


def _flatten_potential(pot) -> PeriodicPotential:
    """All finite energies to 0: the beta = 0 reference model."""
    classes = {}
    for cls, p in pot.class_potentials.items():
        lo, hi = p.support()
        classes[cls] = TablePotential.from_dict(
            {k: 0.0 for k in range(int(lo), int(hi) + 1) if p(k) < INF}
        )
    return PeriodicPotential.build(pot.domain, pot.lattice, classes)


def _scale_potential(pot, beta: float) -> PeriodicPotential:
    """beta * V on the same Lipschitz supports."""
    classes = {}
    for cls, p in pot.class_potentials.items():
        lo, hi = p.support()
        classes[cls] = TablePotential.from_dict(
            {k: beta * p(k) for k in range(int(lo), int(hi) + 1) if p(k) < INF}
        )
    return PeriodicPotential.build(pot.domain, pot.lattice, classes)


def _chebyshev_grid(points: int = 21):
    return sorted(0.5 * (1.0 - math.cos(math.pi * k / (points - 1))) for k in range(points))


def _torus_energy(pot, config) -> float:
    info = config.torus
    total = 0.0
    for v in config.values:
        for axis in (0, 1):
            total += pot.edge_energy((v, axis), config.increment(v, axis))
    return total


def _ti_energy_integral(pot, n, slope, budget, rng, batches: int = 32):
    """Integral of the mean energy over beta in [0, 1], with stderr."""
    from .feasibility import ground_state_energy

    if rng is None:
        rng = RngStream(0, 0)
    grid = _chebyshev_grid()
    burn = max(8, budget // 4)
    per_batch = max(1, budget // batches)
    means, errs = [], []
    counter = 0
    _, init = ground_state_energy(pot, n, slope)
    order = checkerboard_order([v for v in init.values if v != init.reference])
    for bi, beta in enumerate(grid):
        scaled = _scale_potential(pot, beta)
        config = init.copy()
        for t in range(burn):
            config = heat_bath_sweep(scaled, config, order=order, rng=rng.at(counter))
            counter += 1
        batch_means = []
        for b in range(batches):
            acc = 0.0
            for t in range(per_batch):
                config = heat_bath_sweep(scaled, config, order=order, rng=rng.at(counter))
                counter += 1
                acc += _torus_energy(pot, config)
            batch_means.append(acc / per_batch)
        m = float(np.mean(batch_means))
        s = float(np.std(batch_means, ddof=1) / math.sqrt(batches))
        means.append(m)
        errs.append(s)
    integral = 0.0
    var = 0.0
    for i in range(len(grid) - 1):
        w = 0.5 * (grid[i + 1] - grid[i])
        integral += w * (means[i] + means[i + 1])
        var += (w * errs[i]) ** 2 + (w * errs[i + 1]) ** 2
    return integral, math.sqrt(var)


# ---------------------------------------------------------------------------
# Convexity margins


@dataclass(frozen=True)
class MarginReport:
    margin: float
    stderr: float
    verdict: str  # PASS or INCONCLUSIVE

    def to_record(self, seed=None) -> dict:
        return {
            "observable": "convexity_margin",
            "inputs": {},
            "value": self.margin,
            "stderr": self.stderr,
            "method": "midpoint",
            "verdict": self.verdict,
            "seed": seed,
        }


def convexity_margin(e1: SigmaEstimate, e2: SigmaEstimate, mid: SigmaEstimate) -> MarginReport:
    """Midpoint convexity margin (sigma(u1) + sigma(u2))/2 - sigma(mid).

    PASS only when the margin clears three combined standard errors; noise
    alone never produces FAIL.
    """
    if e1.n != mid.n or e2.n != mid.n or e1.method != mid.method or e2.method != mid.method:
        raise SlopeMismatch("estimates must share n and method")
    for k in (0, 1):
        lhs = Fraction(e1.slope[k]) + Fraction(e2.slope[k])
        if lhs != 2 * Fraction(mid.slope[k]):
            raise SlopeMismatch(f"slopes are not a midpoint triple in component {k}")
    margin = 0.5 * (e1.value + e2.value) - mid.value
    stderr = math.sqrt(0.25 * e1.stderr**2 + 0.25 * e2.stderr**2 + mid.stderr**2)
    verdict = "PASS" if margin > 3 * stderr else "INCONCLUSIVE"
    return MarginReport(margin=margin, stderr=stderr, verdict=verdict)


# ---------------------------------------------------------------------------
# Empirical gradient measures


@dataclass(frozen=True)
class EmpiricalGradientMeasure:
    offsets: tuple[Vertex, ...]
    counts: dict
    total: int

    def frequencies(self) -> dict:
        return {p: c / self.total for p, c in sorted(self.counts.items())}


DEFAULT_PATTERN = ((1, 0), (0, 1), (-1, 0), (0, -1))


def empirical_gradient_measure(
    samples, lattice: Sublattice, offsets=DEFAULT_PATTERN
) -> EmpiricalGradientMeasure:
    """Frequencies of local increment patterns over lattice translates."""
    counts: dict = {}
    total = 0
    offsets = tuple(tuple(o) for o in offsets)
    for config in samples:
        base_points = _lattice_points(config, lattice, offsets)
        for x in base_points:
            pattern = tuple(config.height(add(x, o)) - config.height(x) for o in offsets)
            counts[pattern] = counts.get(pattern, 0) + 1
            total += 1
    return EmpiricalGradientMeasure(offsets=offsets, counts=counts, total=total)


def _lattice_points(config: HeightConfig, lattice: Sublattice, offsets=DEFAULT_PATTERN):
    if config.torus is not None:
        return sorted(v for v in config.values if lattice.reduce(v) == (0, 0))
    verts = set(config.values)
    return [
        v
        for v in sorted(verts)
        if lattice.reduce(v) == (0, 0) and all(add(v, o) in verts for o in offsets)
    ]


# ---------------------------------------------------------------------------
# Variance profiles


@dataclass(frozen=True)
class VarianceProfile:
    distances: tuple[int, ...]
    variances: tuple[float, ...]
    stderrs: tuple[float, ...]
    c_hat: float
    verdict: str  # PASS or FAIL against Var(j) <= j*C + 3 sigma
    roughness_ratio: float | None

    def csv_rows(self):
        rows = ["distance,variance,stderr"]
        for j, v, s in zip(self.distances, self.variances, self.stderrs):
            rows.append(f"{j},{v},{s}")
        return rows


def variance_profile(
    pot: PeriodicPotential,
    n: int,
    slope,
    distances,
    trials: int,
    rng: RngStream,
    thin: int = 2,
    burn_in: int = 64,
    batches: int = 16,
) -> VarianceProfile:
    """Sampled Var(phi(x + j e1) - phi(x)) with the j*C bound verdict.

    C-hat is the largest sampled single-increment variance over unit edges;
    the verdict checks every requested distance at three standard errors.
    """
    from .feasibility import ground_state_energy

    distances = tuple(sorted(distances))
    if max(distances) >= n:
        raise ValueError("distances must fit inside the torus")
    _, config = ground_state_energy(pot, n, slope)
    order = checkerboard_order([v for v in config.values if v != config.reference])
    counter = 0
    for _ in range(burn_in):
        config = heat_bath_sweep(pot, config, order=order, rng=rng.at(counter))
        counter += 1
    samples_d: dict[int, list] = {j: [] for j in distances}
    samples_unit: dict[int, list] = {0: [], 1: []}
    for s in range(trials):
        for _ in range(thin):
            config = heat_bath_sweep(pot, config, order=order, rng=rng.at(counter))
            counter += 1
        for j in distances:
            diffs = [
                config.height((x[0] + j, x[1])) - config.height(x)
                for x in config.values
            ]
            samples_d[j].append(diffs)
        for axis in (0, 1):
            incs = [config.increment(x, axis) for x in config.values]
            samples_unit[axis].append(incs)
    variances, stderrs = [], []
    for j in distances:
        v, s = _batched_variance(samples_d[j], batches)
        variances.append(v)
        stderrs.append(s)
    c_hat = max(_batched_variance(samples_unit[axis], batches)[0] for axis in (0, 1))
    ok = all(
        v <= j * c_hat + 3 * s for j, v, s in zip(distances, variances, stderrs)
    )
    ratio = None
    if 16 in distances and 2 in distances:
        v16 = variances[distances.index(16)]
        v2 = variances[distances.index(2)]
        ratio = v16 / v2 if v2 > 0 else INF
    return VarianceProfile(
        distances=distances,
        variances=tuple(variances),
        stderrs=tuple(stderrs),
        c_hat=c_hat,
        verdict="PASS" if ok else "FAIL",
        roughness_ratio=ratio,
    )


def _batched_variance(rows, batches):
    """Ensemble variance of pooled observations with batch-mean stderr."""
    arr = np.asarray(rows, dtype=float)  # samples x sites
    grand_mean = arr.mean()
    per_sample = ((arr - grand_mean) ** 2).mean(axis=1)
    bsize = max(1, len(per_sample) // batches)
    bm = [
        per_sample[i * bsize : (i + 1) * bsize].mean()
        for i in range(len(per_sample) // bsize)
    ]
    v = float(np.mean(bm))
    s = float(np.std(bm, ddof=1) / math.sqrt(len(bm))) if len(bm) > 1 else 0.0
    return v, s


# ---------------------------------------------------------------------------
# Height offsets


def height_offset_estimate(config: HeightConfig, box_halfwidths) -> list[float]:
    """Box averages of the surface around the reference vertex.

    Heights are taken as carried by the config (the additive constant is
    exactly what the estimator measures).
    """
    ref = config.reference
    out = []
    for k in box_halfwidths:
        pts = [
            (ref[0] + dx, ref[1] + dy)
            for dx in range(-k, k + 1)
            for dy in range(-k, k + 1)
        ]
        if config.torus is None and any(p not in config.values for p in pts):
            raise BoxExceedsSupport(f"box of halfwidth {k} leaves the support")
        out.append(sum(config.height(p) for p in pts) / len(pts))
    return out


# ---------------------------------------------------------------------------
# FKG / MTP2 and log-concavity verdicts


@dataclass(frozen=True)
class FkgReport:
    mtp2_ok: bool
    mtp2_violation: tuple | None
    correlation: float
    correlation_ok: bool

    @property
    def verdict(self) -> str:
        return "PASS" if (self.mtp2_ok and self.correlation_ok) else "FAIL"


def fkg_check(pot, region, boundary, event_a, event_b) -> FkgReport:
    """Exact FKG correlation of increasing events plus exhaustive MTP2.

    Events are predicates on the interior assignment; both are verified
    increasing by exhaustive pairwise comparison first.
    """
    region = sorted(region)
    states = []
    energies = []
    for values, energy in _enumerate_states(pot, region, boundary):
        states.append(values)
        energies.append(energy)
    for name, ev in (("A", event_a), ("B", event_b)):
        for s in states:
            for t in states:
                if all(s[v] <= t[v] for v in region) and ev(s) > ev(t):
                    raise NotIncreasing(f"event {name} decreases from {s} to {t}")
    weights = [math.exp(-e) for e in energies]
    total = sum(weights)
    probs = [w / total for w in weights]
    mtp2_ok, violation = _mtp2_check(pot, region, boundary, states, energies)
    pa = sum(p for s, p in zip(states, probs) if event_a(s))
    pb = sum(p for s, p in zip(states, probs) if event_b(s))
    pab = sum(p for s, p in zip(states, probs) if event_a(s) and event_b(s))
    corr = pab - pa * pb
    return FkgReport(
        mtp2_ok=mtp2_ok,
        mtp2_violation=violation,
        correlation=corr,
        correlation_ok=corr >= -1e-12,
    )


def _mtp2_check(pot, region, boundary, states, energies):
    """Energy submodularity over all state pairs (weight MTP2)."""
    index = {tuple(sorted(s.items())): i for i, s in enumerate(states)}
    for i, s in enumerate(states):
        for j, t in enumerate(states):
            if j < i:
                continue
            lo = {v: min(s[v], t[v]) for v in s}
            hi = {v: max(s[v], t[v]) for v in s}
            ki = index.get(tuple(sorted(lo.items())))
            kj = index.get(tuple(sorted(hi.items())))
            if ki is None or kj is None:
                return False, (s, t)  # min/max escaped the finite-energy set
            if energies[i] + energies[j] < energies[ki] + energies[kj] - 1e-12:
                return False, (s, t)
    return True, None


@dataclass(frozen=True)
class LogConcavityReport:
    support: tuple[int, ...]
    log_masses: tuple[float, ...]
    ok: bool
    violation: int | None

    @property
    def verdict(self) -> str:
        return "PASS" if self.ok else "FAIL"


def log_concavity_check(pot, region, boundary, x0) -> LogConcavityReport:
    """Exact marginal law at x0 and the f(a)^2 >= f(a+1) f(a-1) check.

    When every feasible configuration has equal energy the comparison runs
    on exact integer counts; otherwise in log space.
    """
    region = sorted(region)
    by_height: dict[int, list[float]] = {}
    for values, energy in _enumerate_states(pot, region, boundary):
        by_height.setdefault(values[x0], []).append(energy)
    support = sorted(by_height)
    all_energies = [e for es in by_height.values() for e in es]
    if all(e == all_energies[0] for e in all_energies):
        counts = {a: len(by_height[a]) for a in support}
        ok, violation = True, None
        for a in support:
            lhs = counts.get(a, 0) ** 2
            rhs = counts.get(a + 1, 0) * counts.get(a - 1, 0)
            if lhs < rhs:
                ok, violation = False, a
                break
        log_masses = tuple(math.log(counts[a]) for a in support)
        return LogConcavityReport(tuple(support), log_masses, ok, violation)
    log_masses = {a: _logsumexp([-e for e in es]) for a, es in by_height.items()}
    ok, violation = True, None
    for a in support:
        lhs = 2 * log_masses.get(a, -INF)
        rhs = log_masses.get(a + 1, -INF) + log_masses.get(a - 1, -INF)
        if rhs > lhs + 1e-9:
            ok, violation = False, a
            break
    return LogConcavityReport(
        tuple(support), tuple(log_masses[a] for a in support), ok, violation
    )
