"""Synthetic network generators, the Monte Carlo walker simulator, the
exhaustive path enumerator, and the analytic-vs-simulated comparison
harness.
"""
import warnings

import numpy as np
import pytest

from attnflow import (
    GeneratorSpec,
    InvalidSpec,
    MismatchedNetworks,
    NotCertified,
    SessionLog,
    StepCapWarning,
    build_flow_network,
    compare,
    enumerate_walks,
    fundamental_matrix,
    generate,
    node_flows,
    simulate_walkers,
    source_distances,
    transition_matrix,
    validate,
    write_estimates_csv,
)


@pytest.fixture
def balanced_loop_net():
    """One node, 1/3 loop probability: expected visits per walker 1.5."""
    return build_flow_network(
        {("__source__", "X"): 2, ("X", "X"): 1, ("X", "__sink__"): 2}
    )


class TestGeneratorSpec:
    def test_unknown_family(self):
        with pytest.raises(InvalidSpec):
            GeneratorSpec(family="lattice", size=5)

    def test_bad_size(self):
        with pytest.raises(InvalidSpec):
            GeneratorSpec(family="chain", size=0)

    def test_bad_weight_scale(self):
        with pytest.raises(InvalidSpec):
            GeneratorSpec(family="chain", size=3, weight_scale=0.0)

    def test_bad_recirculation(self):
        with pytest.raises(InvalidSpec):
            GeneratorSpec(family="random-cyclic", size=10, recirculation=1.5)

    def test_star_needs_leaves(self):
        with pytest.raises(InvalidSpec):
            generate(GeneratorSpec(family="star", size=1))

    def test_planted_needs_room(self):
        with pytest.raises(InvalidSpec):
            generate(GeneratorSpec(family="planted-dissipation", size=2))

    def test_planted_steep_exponent_breaks_positivity(self):
        with pytest.raises(InvalidSpec, match="positivity"):
            generate(GeneratorSpec(family="planted-dissipation", size=10, exponent=5.0))


class TestGenerate:
    def test_chain_matches_fixture_shape(self):
        net = generate(GeneratorSpec(family="chain", size=2, weight_scale=2.0))
        assert validate(net).certified
        stats = node_flows(net)
        np.testing.assert_allclose(stats.through_flow, [2, 2])
        np.testing.assert_allclose(stats.impact, [4, 2])

    def test_deterministic(self):
        spec = GeneratorSpec(family="random-cyclic", size=40, seed=12, recirculation=0.3)
        a = list(generate(spec).edges())
        b = list(generate(spec).edges())
        assert a == b

    def test_seed_changes_output(self):
        a = generate(GeneratorSpec(family="random-cyclic", size=40, seed=1))
        b = generate(GeneratorSpec(family="random-cyclic", size=40, seed=2))
        assert list(a.edges()) != list(b.edges())

    def test_cyclic_certified_with_positive_terminals(self):
        net = generate(
            GeneratorSpec(family="random-cyclic", size=120, recirculation=0.35, seed=5)
        )
        assert validate(net).certified
        stats = node_flows(net)
        assert np.all(stats.dissipation > 0)
        assert np.all(stats.source_inflow > 0)
        weights = [w for _, _, w in net.edges()]
        assert all(float(w).is_integer() for w in weights)

    def test_tree_is_acyclic_and_certified(self):
        net = generate(GeneratorSpec(family="random-tree", size=30, seed=4))
        assert validate(net).certified
        enumerate_walks(net, max_nodes=30)  # raises if any cycle exists

    def test_planted_exponent_recovered(self):
        from attnflow import fit_power_law

        net = generate(
            GeneratorSpec(family="planted-dissipation", size=200, exponent=0.8)
        )
        assert validate(net).certified
        stats = node_flows(net)
        fit = fit_power_law(stats.through_flow, stats.dissipation)
        assert fit.exponent == pytest.approx(0.8, abs=1e-9)

    def test_session_log_family(self):
        log = generate(GeneratorSpec(family="session-log", size=25, seed=9))
        assert isinstance(log, SessionLog)
        assert len(log.item_registry) == 25
        assert log.n_sessions >= 25  # one singleton per item plus extras

    def test_weight_scale(self):
        net = generate(GeneratorSpec(family="chain", size=3, weight_scale=5.0))
        assert net.total_source_outflow() == pytest.approx(5.0)


class TestSimulateWalkers:
    def test_chain_deterministic_tallies(self, chain_net):
        est = simulate_walkers(chain_net, 500, seed=3)
        a_hat, a_se = est.through_flow_estimate()
        np.testing.assert_allclose(a_hat, [2, 2])
        np.testing.assert_allclose(a_se, [0, 0])
        d_hat, d_se = est.dissipation_estimate()
        np.testing.assert_allclose(d_hat, [0, 2])
        np.testing.assert_allclose(d_se, [0, 0])
        l_hat, l_se = est.source_distance_estimate()
        np.testing.assert_allclose(l_hat, [1, 2])
        np.testing.assert_allclose(l_se, [0, 0])

    def test_star_absorption_thirds(self, star_net):
        n = 3000
        est = simulate_walkers(star_net, n, seed=8)
        assert est.absorption.sum() == n
        d_hat, d_se = est.dissipation_estimate()
        for leaf in (1, 2, 3):
            assert abs(d_hat[leaf] - 1.0) <= 3.5 * d_se[leaf]

    def test_loop_mean_visits(self, balanced_loop_net):
        est = simulate_walkers(balanced_loop_net, 40_000, seed=21)
        a_hat, a_se = est.through_flow_estimate()
        assert abs(a_hat[0] - 3.0) <= 3.5 * a_se[0]

    def test_walker_conservation(self, balanced_cyclic_net):
        n = 7_777  # not a multiple of any batch size
        est = simulate_walkers(balanced_cyclic_net, n, seed=2)
        assert est.absorption.sum() + est.cap_exceeded == n
        assert est.first_arrival.sum() == n

    def test_deterministic_given_seed(self, balanced_cyclic_net):
        a = simulate_walkers(balanced_cyclic_net, 5_000, seed=6)
        b = simulate_walkers(balanced_cyclic_net, 5_000, seed=6)
        np.testing.assert_array_equal(a.visit_sum, b.visit_sum)
        np.testing.assert_array_equal(a.fp_sum, b.fp_sum)
        c = simulate_walkers(balanced_cyclic_net, 5_000, seed=7)
        assert not np.array_equal(a.visit_sum, c.visit_sum)

    def test_uncertified_rejected(self, selfloop_net):
        with pytest.raises(NotCertified):
            simulate_walkers(selfloop_net, 10)

    def test_bad_walker_count(self, chain_net):
        with pytest.raises(ValueError):
            simulate_walkers(chain_net, 0)

    def test_step_cap_accounting(self, balanced_loop_net):
        heavy = build_flow_network(
            {("__source__", "X"): 2, ("X", "X"): 8, ("X", "__sink__"): 2}
        )
        with pytest.warns(StepCapWarning):
            est = simulate_walkers(heavy, 2_000, seed=1, step_cap=3)
        assert est.cap_exceeded > 0
        assert est.absorption.sum() + est.cap_exceeded == 2_000

    def test_error_shrinks_with_more_walkers(self, balanced_cyclic_net):
        stats = node_flows(balanced_cyclic_net)
        ratios = []
        for s in range(6):
            small = simulate_walkers(balanced_cyclic_net, 5_000, seed=100 + s)
            big = simulate_walkers(balanced_cyclic_net, 80_000, seed=200 + s)
            e_small = np.linalg.norm(
                small.through_flow_estimate()[0] - stats.through_flow
            )
            e_big = np.linalg.norm(big.through_flow_estimate()[0] - stats.through_flow)
            ratios.append(e_small / e_big)
        # 16x walkers should shrink error about 4x; demand at least half that
        assert np.median(ratios) >= 2.0

    def test_subtree_impact_on_dag(self):
        net = generate(GeneratorSpec(family="random-tree", size=10, seed=3))
        stats = node_flows(net)
        est = simulate_walkers(net, 50_000, seed=5, track_subtree=True)
        c_hat, c_se = est.impact_estimate()
        z = np.abs(c_hat - stats.impact) / np.where(c_se > 0, c_se, 1.0)
        assert np.all(z <= 4.0)
        np.testing.assert_allclose(c_hat, stats.impact, rtol=0.1)

    def test_impact_estimate_requires_tracking(self, chain_net):
        est = simulate_walkers(chain_net, 100, seed=0)
        assert est.impact_estimate() is None


class TestCompare:
    def test_passes_on_matching_network(self, balanced_cyclic_net):
        stats = node_flows(balanced_cyclic_net)
        fm = fundamental_matrix(transition_matrix(balanced_cyclic_net))
        l0 = source_distances(fm)
        est = simulate_walkers(balanced_cyclic_net, 200_000, seed=42)
        report = compare(est, stats, source_distance=l0)
        assert report.passed
        assert set(report.pass_fraction) == {"A", "D", "l"}
        for fraction in report.pass_fraction.values():
            assert fraction >= 0.95

    def test_impossible_multiplier_fails(self, balanced_cyclic_net):
        stats = node_flows(balanced_cyclic_net)
        est = simulate_walkers(balanced_cyclic_net, 20_000, seed=1)
        report = compare(est, stats, multiplier=1e-4)
        assert not report.passed
        assert report.worst  # offenders reported

    def test_mismatched_networks(self, chain_net, star_net):
        est = simulate_walkers(chain_net, 100, seed=0)
        with pytest.raises(MismatchedNetworks):
            compare(est, node_flows(star_net))

    def test_report_dict_roundtrip(self, chain_net):
        est = simulate_walkers(chain_net, 100, seed=0)
        report = compare(est, node_flows(chain_net))
        d = report.to_dict()
        assert d["passed"] is True
        assert d["n_walkers"] == 100
        assert isinstance(d["worst"], list)


class TestEnumerateWalks:
    def test_chain_exact(self, chain_net):
        res = enumerate_walks(chain_net)
        assert res.n_paths == 1
        np.testing.assert_allclose(res.through_flow(), [2, 2], atol=1e-12)
        np.testing.assert_allclose(res.dissipation(), [0, 2], atol=1e-12)
        np.testing.assert_allclose(res.source_distance(), [1, 2], atol=1e-12)
        np.testing.assert_allclose(res.impact(), [4, 2], atol=1e-12)

    def test_star_exact(self, star_net):
        res = enumerate_walks(star_net)
        assert res.n_paths == 3
        np.testing.assert_allclose(res.impact(), [6, 1, 1, 1], atol=1e-12)
        np.testing.assert_allclose(res.source_distance(), [1, 2, 2, 2], atol=1e-12)

    @pytest.mark.parametrize(
        "spec",
        [
            GeneratorSpec(family="random-tree", size=12, seed=31),
            GeneratorSpec(family="random-cyclic", size=12, recirculation=0.0, seed=32),
        ],
        ids=["tree", "dag"],
    )
    def test_matches_analytic(self, spec):
        net = generate(spec)
        assert validate(net).certified
        res = enumerate_walks(net)
        stats = node_flows(net)
        fm = fundamental_matrix(transition_matrix(net))
        np.testing.assert_allclose(res.through_flow(), stats.through_flow, atol=1e-9)
        np.testing.assert_allclose(res.dissipation(), stats.dissipation, atol=1e-9)
        np.testing.assert_allclose(res.impact(), stats.impact, atol=1e-9)
        l0 = source_distances(fm)
        np.testing.assert_allclose(res.source_distance(), l0, atol=1e-9)

    def test_matches_simulator(self):
        net = generate(GeneratorSpec(family="random-tree", size=10, seed=13))
        res = enumerate_walks(net)
        est = simulate_walkers(net, 50_000, seed=2)
        a_hat, a_se = est.through_flow_estimate()
        z = np.abs(a_hat - res.through_flow()) / np.where(a_se > 0, a_se, 1.0)
        assert np.all(z <= 4.0)

    def test_cycle_rejected(self, balanced_cyclic_net):
        with pytest.raises(ValueError, match="cycle"):
            enumerate_walks(balanced_cyclic_net, max_nodes=100)

    def test_selfloop_rejected(self, balanced_loop_net):
        with pytest.raises(ValueError, match="cycle"):
            enumerate_walks(balanced_loop_net)

    def test_size_guard(self):
        net = generate(GeneratorSpec(family="chain", size=20))
        with pytest.raises(ValueError, match="enumeration"):
            enumerate_walks(net, max_nodes=16)


class TestEstimatesCsv:
    def test_layout_and_determinism(self, tmp_path, chain_net):
        est = simulate_walkers(chain_net, 200, seed=4)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_estimates_csv(p1, est)
        write_estimates_csv(p2, simulate_walkers(chain_net, 200, seed=4))
        assert p1.read_bytes() == p2.read_bytes()
        lines = p1.read_text().splitlines()
        assert lines[0] == "item,A_hat,D_hat,S_hat,F_hat,l_hat"
        assert len(lines) == 3

    def test_impact_column_when_tracked(self, tmp_path, chain_net):
        est = simulate_walkers(chain_net, 200, seed=4, track_subtree=True)
        path = tmp_path / "c.csv"
        write_estimates_csv(path, est)
        assert path.read_text().splitlines()[0].endswith(",C_hat")
