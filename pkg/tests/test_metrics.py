"""Transport distances, a-priori bound constants, convergence driver."""

import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

import plantfield as pf
from plantfield.metrics import export_distances_csv

# Bound constants frozen from an independent high-precision evaluation
# of the closed-form expressions (uniform start law on [0.1, 0.3],
# minimal size 0.05, log-range 3, rate roll-off 1.32, rate cap 2.0).
ALPHA_GAMMA = 28.873518523864272
BETA_N_100 = 1095.5721615258307
S_M_N_100 = 0.048500114202736729
DRIVE_CONSTANT = 18.076983230868901


@pytest.fixture(scope="module")
def w():
    return pf.ZMetricWeights(s_m=0.05, ell=2.0, tau_r=0.7)


def _measure(rng, n, spread=1.0):
    return pf.EmpiricalMeasure(
        sizes=rng.uniform(0.06, 0.9, n),
        positions=rng.normal(scale=spread, size=(n, 2)),
        caps=rng.uniform(0.55, 0.95, n),
        rates=rng.uniform(0.1, 1.9, n),
        weights=np.full(n, 1.0 / n),
    )


def _atom(m, i):
    return (m.sizes[i], m.positions[i], m.caps[i], m.rates[i])


def test_z_distance_hand_value(w):
    z1 = (0.2, np.array([0.0, 0.0]), 0.8, 1.0)
    z2 = (0.25, np.array([3.0, 4.0]), 0.7, 1.6)
    expected = 0.05 / 0.05 + 0.1 / 0.05 + 5.0 / 2.0 + 0.7 * 0.6
    assert pf.z_distance(w, z1, z2) == pytest.approx(expected, rel=1e-12)


def test_z_distance_axioms(w, rng):
    for _ in range(50):
        zs = [
            (rng.uniform(0.05, 1.0), rng.normal(size=2),
             rng.uniform(0.5, 1.0), rng.uniform(0.0, 2.0))
            for _ in range(3)
        ]
        a, b, c = zs
        assert pf.z_distance(w, a, a) == 0.0
        assert pf.z_distance(w, a, b) == pf.z_distance(w, b, a)
        assert pf.z_distance(w, a, c) <= (
            pf.z_distance(w, a, b) + pf.z_distance(w, b, c) + 1e-12
        )


def test_z_weights_validation():
    with pytest.raises(ValueError):
        pf.ZMetricWeights(s_m=0.0, ell=1.0, tau_r=1.0)
    with pytest.raises(ValueError):
        pf.ZMetricWeights(s_m=0.05, ell=-1.0, tau_r=1.0)


def test_w1_sorted_hand_values():
    assert pf.w1_sorted_1d([0.0, 0.0, 1.0], [0.0, 1.0, 1.0]) == pytest.approx(1.0 / 3.0)
    a = np.array([0.3, 0.9, 0.1, 0.5])
    assert pf.w1_sorted_1d(a, a + 0.25) == pytest.approx(0.25, rel=1e-14)
    assert pf.w1_sorted_1d(a, np.sort(a)) == 0.0
    with pytest.raises(ValueError):
        pf.w1_sorted_1d([1.0, 2.0], [1.0])


def test_w1_sorted_is_optimal_on_line(rng):
    # Sorting realizes the optimal coupling in one dimension: check
    # against brute-force assignment on small instances.
    for _ in range(20):
        n = int(rng.integers(2, 7))
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        brute = min(
            np.abs(a - np.asarray(perm)).mean()
            for perm in itertools.permutations(b)
        )
        assert pf.w1_sorted_1d(a, b) == pytest.approx(brute, abs=1e-12)


def test_matching_equals_brute_force(w, rng):
    for _ in range(40):
        n = int(rng.integers(2, 7))
        a = _measure(rng, n)
        b = _measure(rng, n)
        got = pf.w1_matching(a, b, w)
        brute = min(
            np.mean([
                pf.z_distance(w, _atom(a, i), _atom(b, perm[i]))
                for i in range(n)
            ])
            for perm in itertools.permutations(range(n))
        )
        assert got == pytest.approx(brute, abs=1e-12)


def test_matching_never_beats_identity(w, rng):
    for _ in range(10):
        a = _measure(rng, 12)
        b = _measure(rng, 12)
        identity = np.mean([
            pf.z_distance(w, _atom(a, i), _atom(b, i)) for i in range(12)
        ])
        assert pf.w1_matching(a, b, w) <= identity + 1e-12


def test_matching_dominates_marginal_transports(w, rng):
    # Dropping coordinates can only shrink the ground distance, so the
    # joint W1 dominates each marginal W1.
    for _ in range(10):
        a = _measure(rng, 15)
        b = _measure(rng, 15)
        joint = pf.w1_matching(a, b, w)
        assert joint >= pf.w1_sorted_1d(a.sizes, b.sizes) / w.s_m - 1e-12
        assert joint >= pf.w1_sorted_1d(a.caps, b.caps) / w.s_m - 1e-12
        assert joint >= w.tau_r * pf.w1_sorted_1d(a.rates, b.rates) - 1e-12
        assert joint >= (
            pf.w1_sorted_1d(a.positions[:, 0], b.positions[:, 0]) / w.ell - 1e-12
        )


def test_matching_reduces_to_sorted_when_only_sizes_differ(w, rng):
    n = 30
    pos = np.tile([[0.3, -0.2]], (n, 1))
    caps = np.full(n, 0.7)
    rates = np.full(n, 1.1)
    wts = np.full(n, 1.0 / n)
    a = pf.EmpiricalMeasure(rng.uniform(0.1, 0.9, n), pos, caps, rates, wts)
    b = pf.EmpiricalMeasure(rng.uniform(0.1, 0.9, n), pos, caps, rates, wts)
    assert pf.w1_matching(a, b, w) == pytest.approx(
        pf.w1_sorted_1d(a.sizes, b.sizes) / w.s_m, abs=1e-12
    )


def test_matching_refuses_oversized_and_mismatched(w, rng):
    a = _measure(rng, 6)
    b = _measure(rng, 6)
    with pytest.raises(ValueError, match="cap"):
        pf.w1_matching(a, b, w, cap=5)
    with pytest.raises(ValueError, match="cardinality"):
        pf.w1_matching(a, _measure(rng, 5), w)


def test_bound_constants_frozen_values(params, mu0_uniform, rng):
    cloud = _measure(rng, 40)
    c = pf.bound_coefficients(params, mu0_uniform, cloud, 100)
    assert c.alpha_S == 0.6
    assert c.alpha_gamma == pytest.approx(ALPHA_GAMMA, rel=1e-12)
    assert c.beta_N == pytest.approx(BETA_N_100, rel=1e-12)
    assert c.s_m_N == pytest.approx(S_M_N_100, rel=1e-12)
    assert c.drive_constant == pytest.approx(DRIVE_CONSTANT, rel=1e-12)
    assert c.N == 100
    assert c.drive_term(2.0) == pytest.approx(
        (c.drive_constant + 2.0 * c.A_mu) / 99.0, rel=1e-14
    )


def test_bound_rate_improves_with_population(params, mu0_uniform, rng):
    cloud = _measure(rng, 20)
    betas = [
        pf.bound_coefficients(params, mu0_uniform, cloud, n).beta_N
        for n in (10, 100, 1000, 10_000)
    ]
    assert all(b2 < b1 for b1, b2 in zip(betas, betas[1:]))
    far = pf.bound_coefficients(params, mu0_uniform, cloud, 1_000_000)
    assert abs(far.s_m_N - params.s_m) < 1e-6


def test_bound_requires_two_plants(params, mu0_uniform, rng):
    with pytest.raises(ValueError):
        pf.bound_coefficients(params, mu0_uniform, _measure(rng, 5), 1)


def _cloud_measure(samples):
    sizes = np.array([s.s0 for s in samples])
    pos = np.stack([s.traits.x for s in samples])
    caps = np.array([s.traits.S for s in samples])
    rates = np.array([s.traits.gamma for s in samples])
    n = sizes.size
    return pf.EmpiricalMeasure(sizes, pos, caps, rates, np.full(n, 1.0 / n))


def test_drive_functional_against_direct_average(params, mu0_uniform):
    # The A functional is a plain cloud average of a known integrand:
    # recompute it directly, and check the 10^4-atom value sits within
    # Monte-Carlo error of the 10^5-atom value of the same integral.
    cfg = mu0_uniform.with_seed(77)
    big = pf.sample_mu0(cfg, 100_000)
    m_big = _cloud_measure(big)
    m_small = _cloud_measure(big[:10_000])

    p = params
    s0_max = mu0_uniform.s0_support_max
    terms = (
        m_big.rates * m_big.caps * (m_big.sizes / p.s_m)
        * np.log(m_big.sizes / p.s_m)
        + s0_max * math.exp(p.R_M) * p.R_M * m_big.rates
        * np.log(m_big.caps / p.s_m)
    ) / (2.0 * p.R_M)

    a_big = pf.bound_coefficients(params, mu0_uniform, m_big, 100).A_mu
    a_small = pf.bound_coefficients(params, mu0_uniform, m_small, 100).A_mu
    assert a_big == pytest.approx(terms.mean(), rel=1e-12)
    se_small = terms.std() / math.sqrt(10_000)
    assert abs(a_small - a_big) < 5.0 * se_small


def test_bound_radicand_clamp_counted(params, mu0_uniform, rng):
    # A cloud far off-center makes the pointwise radicand negative for
    # every atom; the functional must clamp (and report) rather than
    # emit NaN.
    n = 50
    pos = np.array([3.0, 0.0]) + 0.01 * rng.normal(size=(n, 2))
    cloud = pf.EmpiricalMeasure(
        sizes=np.full(n, 0.2), positions=pos, caps=np.full(n, 0.8),
        rates=np.full(n, 1.0), weights=np.full(n, 1.0 / n),
    )
    c = pf.bound_coefficients(params, mu0_uniform, cloud, n)
    assert c.clamped_radicands == n
    assert math.isfinite(c.B_mu) and c.B_mu > 0.0


def test_flow_gap_zero_at_start(params, mu0_uniform, tiny_model):
    samples = pf.sample_mu0(mu0_uniform.with_seed(5), 12)
    state0 = pf.samples_to_state(samples)
    cfg = pf.SolverConfig(t_end=1.0)
    traj = pf.integrate(params, state0, cfg)
    probes = [(s.s0, s.traits) for s in samples[:4]]
    gap0 = pf.flow_gap(params, traj, tiny_model, probes, 0.0, solver_cfg=cfg)
    assert gap0 == pytest.approx(0.0, abs=1e-14)
    gap1 = pf.flow_gap(params, traj, tiny_model, probes, 1.0, solver_cfg=cfg)
    assert gap1 >= 0.0
    with pytest.raises(ValueError):
        pf.flow_gap(params, traj, tiny_model, [], 1.0, solver_cfg=cfg)


def test_self_comparison_is_exactly_zero(params, mu0_uniform):
    reports = pf.convergence_experiment(
        mu0_uniform, params, None, [5, 9], [0.0, 0.5, 1.0],
        seed=3, self_comparison=True,
    )
    assert [r.N for r in reports] == [5, 9]
    for r in reports:
        assert np.all(r.w1_size == 0.0)
        assert np.all(r.w1_full == 0.0)
        assert np.all(r.flow_gap == 0.0)
        assert np.all(r.bound_value > 0.0)
        assert r.runtime_seconds > 0.0


def test_convergence_experiment_validation(params, mu0_uniform, tiny_model):
    with pytest.raises(ValueError, match="increasing"):
        pf.convergence_experiment(
            mu0_uniform, params, tiny_model, [10, 10], [1.0], seed=0
        )
    with pytest.raises(ValueError, match="at least 2"):
        pf.convergence_experiment(
            mu0_uniform, params, tiny_model, [1, 5], [1.0], seed=0
        )
    with pytest.raises(ValueError, match="nonempty"):
        pf.convergence_experiment(
            mu0_uniform, params, tiny_model, [5, 10], [], seed=0
        )
    with pytest.raises(ValueError, match="model"):
        pf.convergence_experiment(
            mu0_uniform, params, None, [5, 10], [1.0], seed=0
        )
    with pytest.raises(ValueError, match="horizon"):
        pf.convergence_experiment(
            mu0_uniform, params, tiny_model, [5, 10],
            [0.0, tiny_model.T + 1.0], seed=0
        )


def test_distances_csv_layout(params, mu0_uniform, tmp_path):
    reports = pf.convergence_experiment(
        mu0_uniform, params, None, [4, 6], [0.0, 0.5, 1.0],
        seed=11, self_comparison=True,
    )
    out = tmp_path / "distances.csv"
    export_distances_csv(reports, out, comments=["seed=11"])
    lines = out.read_text().splitlines()
    assert lines[0] == "# seed=11"
    assert lines[1] == "N,t,w1_size,w1_full,flow_gap,bound_value"
    assert len(lines) == 2 + 2 * 3
    first = lines[2].split(",")
    assert first[0] == "4"
    assert float(first[1]) == 0.0
    assert float(first[2]) == 0.0


def test_surrogate_tracks_large_population(params, mu0_uniform, trained_model):
    # Direct mean-field check: in a 2000-plant system, per-plant probe
    # growth at the final time should agree with the surrogate flow at
    # the same initial data to within a few percent.
    model, _ = trained_model
    samples = pf.sample_mu0(mu0_uniform.with_seed(123), 2000)
    state0 = pf.samples_to_state(samples)
    cfg = pf.SolverConfig(t_end=10.0, rel_tol=1e-6, abs_tol=1e-9, max_step=0.5)
    traj = pf.integrate(params, state0, cfg)
    rel_gaps = []
    for smp in samples[:40]:
        pt = pf.empirical_flow(params, traj, smp.s0, smp.traits, cfg)
        probe = pt.size_at(10.0)
        surro = pf.flow_eval(model, 10.0, smp.s0, smp.traits)
        rel_gaps.append(abs(probe - surro) / probe)
    assert float(np.mean(rel_gaps)) < 0.05
