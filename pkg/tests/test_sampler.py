import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from gradsurf.errors import EmptySupport
from gradsurf.feasibility import enumerate_torus_configs
from gradsurf.heights import HeightConfig, TorusInfo
from gradsurf.lattice import box_region, outer_boundary
from gradsurf.potential import PeriodicPotential, QuadraticPotential, TablePotential
from gradsurf.rng import RngStream
from gradsurf.sampler import (
    DiscreteDistribution,
    GaussianDistribution,
    cftp_sample,
    checkerboard_order,
    heat_bath_sweep,
    random_round,
    site_conditional,
    torus_sample,
)

from oracles import exact_gibbs_distribution

F = Fraction


def test_site_conditional_sos_two_neighbors(sos):
    config = {(0, 0): 0, (2, 0): 0}
    dist = site_conditional(sos, config, (1, 0))
    # oracle: P(a) i e^{-2|a|}; P(0) = (1 - e^-2) / (1 + e^-2) by the geometric series
    q = math.exp(-2)
    expected0 = (1 - q) / (1 + q)
    assert dist.prob(0) == pytest.approx(expected0, abs=1e-12)
    assert dist.prob(1) == pytest.approx(expected0 * q, abs=1e-12)
    assert dist.prob(-3) == pytest.approx(expected0 * q**3, abs=1e-12)


def test_site_conditional_domino_point_mass(domino):
    # neighbors 0 and 2 cannot happen for dominoes; build a forcing window instead
    boundary = {(0, 1): 0, (2, 1): 0, (1, 0): -1, (1, 2): -1}
    dist = site_conditional(domino, boundary, (1, 1))
    assert isinstance(dist, DiscreteDistribution)
    assert set(dist.support) <= {-1, 0}
    # all four neighbors at 1: horizontal edges allow {0,1}, vertical {1,2}
    forcing = {(0, 1): 1, (2, 1): 1, (1, 0): 1, (1, 2): 1}
    d2 = site_conditional(domino, forcing, (1, 1))
    assert d2.support == (1,) and d2.probs == (1.0,)


def test_site_conditional_gaussian(gaussian):
    config = {(0, 0): 1.0, (2, 0): 4.0}
    dist = site_conditional(gaussian, config, (1, 0))
    assert isinstance(dist, GaussianDistribution)
    assert dist.mean == pytest.approx(2.5)
    assert dist.variance == pytest.approx(0.25)


def test_site_conditional_empty_support(sos_trunc1):
    config = {(0, 0): 0, (2, 0): 3}
    with pytest.raises(EmptySupport):
        site_conditional(sos_trunc1, config, (1, 0))


def test_sweep_empty_region(sos):
    config = HeightConfig({(0, 0): 0}, reference=(0, 0))
    out = heat_bath_sweep(sos, config, boundary={(0, 0): 0}, order=[], uniforms=[])
    assert out.values == config.values


def test_single_site_sweep_is_exact_gibbs(sos_trunc1):
    # one interior vertex: the sweep distribution equals the conditional itself
    interior = [(1, 1)]
    boundary = {v: 0 for v in outer_boundary(interior)}
    states, probs = exact_gibbs_distribution(sos_trunc1, interior, boundary)
    dist = site_conditional(sos_trunc1, boundary, (1, 1))
    oracle = {s[(1, 1)]: p for s, p in zip(states, probs)}
    assert set(oracle) == set(dist.support)
    for a, p in oracle.items():
        assert dist.prob(a) == pytest.approx(p, abs=1e-12)


def _sweep_matrix(pot, states, interior, boundary):
    """Exact one-sweep transition matrix, composing per-site kernels."""
    order = checkerboard_order(interior)
    index = {tuple(sorted(s.items())): i for i, s in enumerate(states)}
    n = len(states)
    mat = np.eye(n)
    for x in order:
        site = np.zeros((n, n))
        for i, s in enumerate(states):
            values = dict(boundary)
            values.update(s)
            del values[x]
            dist = site_conditional(pot, values, x)
            for a, p in zip(dist.support, dist.probs):
                target = dict(s)
                target[x] = a
                j = index[tuple(sorted(target.items()))]
                site[i, j] += p
        mat = mat @ site
    return mat


@pytest.mark.parametrize("fixture_name", ["sos_trunc1", "domino"])
def test_sweep_fixes_gibbs_vector(request, fixture_name):
    pot = request.getfixturevalue(fixture_name)
    if fixture_name == "domino":
        interior = sorted(box_region(2, 2, origin=(1, 1)))
        boundary = {
            (0, 0): 0, (1, 0): -1, (2, 0): 0, (3, 0): -1,
            (0, 1): 0, (3, 1): 0,
            (0, 2): 0, (3, 2): -1,
            (0, 3): 0, (1, 3): -1, (2, 3): 0, (3, 3): -1,
        }
        boundary = {v: h for v, h in boundary.items() if v in outer_boundary(interior)}
    else:
        interior = sorted(box_region(2, 2, origin=(1, 1)))
        boundary = {v: 0 for v in outer_boundary(interior)}
    states, probs = exact_gibbs_distribution(pot, interior, boundary)
    assert len(states) > 1
    mat = _sweep_matrix(pot, states, interior, boundary)
    pi = np.array(probs)
    assert np.abs(pi @ mat - pi).max() < 1e-12
    assert np.abs(mat.sum(axis=1) - 1).max() < 1e-12


def test_sweep_deterministic_given_stream(sos_trunc1):
    interior = sorted(box_region(2, 2, origin=(1, 1)))
    boundary = {v: 0 for v in outer_boundary(interior)}
    init = HeightConfig({v: 0 for v in interior}, reference=interior[0])
    stream = RngStream(99, 3)
    a = heat_bath_sweep(sos_trunc1, init, boundary=boundary, rng=stream.at(0))
    b = heat_bath_sweep(sos_trunc1, init, boundary=boundary, rng=stream.at(0))
    assert a.values == b.values


def test_torus_sample_homology_conserved(domino):
    stream = RngStream(7, 0)
    config = torus_sample(domino, 4, (F(0), F(0)), sweeps=10, rng=stream)
    n = 4
    row = sum(config.increment((i, 0), 0) for i in range(n))
    col = sum(config.increment((0, j), 1) for j in range(n))
    assert (row, col) == (0, 0)
    tilted = torus_sample(domino, 4, (F(1, 4), F(0)), sweeps=10, rng=stream.substream(1))
    row = sum(tilted.increment((i, 0), 0) for i in range(n))
    assert row == 1


def test_torus_sweep_fixes_class_gibbs(sos_trunc1):
    # exact stationarity on the 2-torus, slope (1/2, 0) class
    n, slope = 2, (F(1, 2), F(0))
    states = []
    weights = []
    for values, energy in enumerate_torus_configs(sos_trunc1, n, slope):
        states.append(values)
        weights.append(math.exp(-energy))
    info_slope = states[0]
    index = {tuple(sorted(s.items())): i for i, s in enumerate(states)}
    pi = np.array(weights)
    pi /= pi.sum()
    interior = [v for v in sorted(states[0]) if v != (0, 0)]
    from gradsurf.feasibility import torus_info

    info = torus_info(sos_trunc1, n, slope)
    mat = np.eye(len(states))
    for x in checkerboard_order(interior):
        site = np.zeros((len(states), len(states)))
        for i, s in enumerate(states):
            cfg = HeightConfig(dict(s), reference=(0, 0), torus=info)
            del cfg.values[x]
            dist = site_conditional(sos_trunc1, cfg, x)
            for a, p in zip(dist.support, dist.probs):
                target = dict(s)
                target[x] = a
                site[i, index[tuple(sorted(target.items()))]] += p
        mat = mat @ site
    assert np.abs(pi @ mat - pi).max() < 1e-12


def test_heat_bath_empirical_matches_enumeration(sos_trunc1):
    # thinned chain on the 2x2 block against the exact enumeration
    from scipy import stats

    interior = sorted(box_region(2, 2, origin=(1, 1)))
    boundary = {v: 0 for v in outer_boundary(interior)}
    states, probs = exact_gibbs_distribution(sos_trunc1, interior, boundary)
    index = {tuple(sorted(s.items())): i for i, s in enumerate(states)}
    config = HeightConfig({v: 0 for v in interior}, reference=interior[0])
    stream = RngStream(6021, 0)
    counts = [0] * len(states)
    thin, samples = 6, 6000
    t = 0
    for _ in range(200):  # burn-in
        config = heat_bath_sweep(sos_trunc1, config, boundary=boundary, rng=stream.at(t))
        t += 1
    for _ in range(samples):
        for _ in range(thin):
            config = heat_bath_sweep(sos_trunc1, config, boundary=boundary, rng=stream.at(t))
            t += 1
        counts[index[tuple(sorted(config.values.items()))]] += 1
    expected = [samples * p for p in probs]
    assert stats.chisquare(counts, expected).pvalue > 0.01


def test_cftp_unique_config(sos_trunc1):
    boundary = {(0, 1): 0, (2, 1): 2, (1, 0): 1, (1, 2): 1}
    out = cftp_sample(sos_trunc1, [(1, 1)], boundary, RngStream(1, 0))
    assert out.values[(1, 1)] == 1


def test_cftp_deterministic(domino):
    interior = sorted(box_region(2, 2, origin=(1, 1)))
    boundary = {
        (1, 0): -1, (2, 0): 0,
        (0, 1): 0, (3, 1): 0,
        (0, 2): 0, (3, 2): -1,
        (1, 3): -1, (2, 3): 0,
    }
    boundary = {v: h for v, h in boundary.items() if v in outer_boundary(interior)}
    a = cftp_sample(domino, interior, boundary, RngStream(123, 5))
    b = cftp_sample(domino, interior, boundary, RngStream(123, 5))
    assert a.values == b.values


def test_cftp_matches_enumeration(sos_trunc1):
    from scipy import stats

    interior = [(1, 1)]
    boundary = {v: 0 for v in outer_boundary(interior)}
    states, probs = exact_gibbs_distribution(sos_trunc1, interior, boundary)
    oracle = {s[(1, 1)]: p for s, p in zip(states, probs)}
    counts = {a: 0 for a in oracle}
    trials = 4000
    for k in range(trials):
        out = cftp_sample(sos_trunc1, interior, boundary, RngStream(2024, k))
        counts[out.values[(1, 1)]] += 1
    observed = [counts[a] for a in sorted(oracle)]
    expected = [trials * oracle[a] for a in sorted(oracle)]
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_cftp_monotone_coupling_under_shifted_boundary(sos_trunc1):
    # shared uniforms and ordered boundaries keep the chains ordered
    interior = sorted(box_region(2, 2, origin=(1, 1)))
    b1 = {v: 0 for v in outer_boundary(interior)}
    b2 = {v: 1 for v in outer_boundary(interior)}
    for k in range(50):
        s1 = cftp_sample(sos_trunc1, interior, b1, RngStream(77, k))
        s2 = cftp_sample(sos_trunc1, interior, b2, RngStream(77, k))
        assert all(s1.values[v] <= s2.values[v] for v in interior)


def test_random_round_integer_input():
    config = HeightConfig({(0, 0): 0, (1, 0): 2}, reference=(0, 0))
    out = random_round(config, RngStream(5, 0).at(0))
    assert out.values == config.values


def test_random_round_flat_half():
    config = HeightConfig({(0, 0): 0.5, (1, 0): 0.5}, reference=(0, 0))
    for k in range(10):
        out = random_round(config, RngStream(5, k).at(0))
        vals = set(out.values.values())
        assert len(vals) == 1 and vals <= {0, 1}


def test_random_round_plane_slope_half():
    n = 4
    info = TorusInfo(n=n, slope=(F(1, 2), F(0)))
    values = {(i, j): 0.5 * i for i in range(n) for j in range(n)}
    config = HeightConfig(values, reference=(0, 0), torus=info)
    for k in range(10):
        out = random_round(config, RngStream(6, k).at(0))
        row = sum(out.increment((i, 0), 0) for i in range(n))
        assert row == 2


def test_checkerboard_order():
    order = checkerboard_order([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert order == [(0, 0), (1, 1), (0, 1), (1, 0)]


def test_checkerboard_half_sweep_order_independent(sos_trunc1):
    # sites of one color share no edges, so updating a color block in any
    # order with site-keyed uniforms is bit-identical; this is what makes
    # internal parallelization of half-sweeps legal
    interior = sorted(box_region(3, 3, origin=(1, 1)))
    boundary = {v: 0 for v in outer_boundary(interior)}
    init = HeightConfig({v: 0 for v in interior}, reference=interior[0])
    base_order = checkerboard_order(interior)
    us = RngStream(41, 0).at(0).random(len(base_order))
    by_site = dict(zip(base_order, us))
    n_even = sum(1 for v in base_order if (v[0] + v[1]) % 2 == 0)
    evens, odds = base_order[:n_even], base_order[n_even:]
    reference = heat_bath_sweep(
        sos_trunc1, init, boundary=boundary, order=base_order, uniforms=us
    )
    for perm_seed in range(3):
        rng = np.random.default_rng(perm_seed)
        order2 = [evens[i] for i in rng.permutation(n_even)] + [
            odds[i] for i in rng.permutation(len(odds))
        ]
        us2 = [by_site[v] for v in order2]
        shuffled = heat_bath_sweep(
            sos_trunc1, init, boundary=boundary, order=order2, uniforms=us2
        )
        assert shuffled.values == reference.values
