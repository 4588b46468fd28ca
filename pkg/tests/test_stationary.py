import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmlab import (
    BallIndicatorConfig,
    ChannelParams,
    ExperimentConfig,
    enumerate_reachable,
    enumeration_distribution,
    enumeration_weight,
    delta_distribution,
    time_average_F,
)
from pcmlab.estimator import pcm_trajectory
from pcmlab.experiments import (
    cluster_probabilities,
    distribution_clusters,
    run_ergodic,
)
from pcmlab.channel import sample_chain
from pcmlab.stationary import LN10, Atom, AtomicDistribution, decimal_distance, index_code
from pcmlab.pdm import riemannian_distance


class TestEnumerateReachable:
    def test_zero_steps(self, ref_mp, ref_prep):
        atoms = enumerate_reachable(ref_mp, ref_prep.p_star, 0)
        assert len(atoms) == 1
        assert atoms[0].code == ""
        assert atoms[0].distance == 0.0

    def test_one_step(self, ref_mp, ref_prep):
        atoms = enumerate_reachable(ref_mp, ref_prep.p_star, 1)
        assert len(atoms) == 2
        assert {a.code for a in atoms} == {"", "0"}
        assert atoms[1].distance == pytest.approx(0.81725, abs=5e-4)

    def test_three_steps_all_distinct(self, ref_mp, ref_prep):
        atoms = enumerate_reachable(ref_mp, ref_prep.p_star, 3)
        assert len(atoms) == 8
        for i in range(8):
            for j in range(i + 1, 8):
                assert riemannian_distance(atoms[i].matrix, atoms[j].matrix) > 1e-6

    def test_cardinality_doubles(self, ref_mp, ref_prep):
        for n in range(6):
            assert len(enumerate_reachable(ref_mp, ref_prep.p_star, n)) == 2**n

    def test_cap_enforced(self, ref_mp, ref_prep):
        with pytest.raises(ValueError, match=r"\[0, 12\]"):
            enumerate_reachable(ref_mp, ref_prep.p_star, 13)

    def test_stored_distance_matches_metric(self, ref_mp, ref_prep):
        for atom in enumerate_reachable(ref_mp, ref_prep.p_star, 4):
            direct = riemannian_distance(atom.matrix, ref_prep.p_star) / LN10
            assert atom.distance == pytest.approx(direct, abs=1e-10)


class TestWeightFormula:
    def test_first_index_empty_bit_sum(self):
        # s = 0 for j = 1: the weight collapses to 1 - g^n.
        assert enumeration_weight(1, 100, 0.95) == pytest.approx(1.0 - 0.95**100, rel=1e-12)

    def test_hand_value_j2(self):
        w = enumeration_weight(2, 100, 0.95)
        assert w == pytest.approx((1.0 - 0.95**99) * 0.05, rel=1e-12)
        assert w == pytest.approx(0.04969, abs=1e-5)

    def test_hand_value_j3(self):
        # decode of 3 - 1 - 2 = 0 gives bits (0, 0)
        w = enumeration_weight(3, 100, 0.95)
        assert w == pytest.approx((1.0 - 0.95**98) * 0.05**2, rel=1e-12)
        assert w == pytest.approx(2.4834e-3, abs=5e-7)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            enumeration_weight(0, 4, 0.5)
        with pytest.raises(ValueError):
            enumeration_weight(17, 4, 0.5)

    @settings(max_examples=200, deadline=None)
    @given(j=st.integers(min_value=1, max_value=4096))
    def test_index_code_roundtrip(self, j):
        code = index_code(j)
        if j == 1:
            assert code == ()
        else:
            s = len(code)
            assert 2 ** (s - 1) < j <= 2**s
            assert j == 1 + 2 ** (s - 1) + sum(b << i for i, b in enumerate(code))
            assert code[-1] == 0  # top bit of an (s-1)-bit payload

    @settings(max_examples=100, deadline=None)
    @given(
        j=st.integers(min_value=1, max_value=255),
        n=st.integers(min_value=8, max_value=30),
        g=st.floats(min_value=0.05, max_value=0.95),
    )
    def test_weight_in_unit_interval(self, j, n, g):
        assert 0.0 <= enumeration_weight(j, n, g) <= 1.0


class TestEnumerationDistribution:
    def test_mass_conservation(self, ref_mp, ref_prep):
        for g, eps in [(0.95, 1e-9), (0.7, 1e-6), (0.3, 1e-5)]:
            dist = enumeration_distribution(ref_mp, ref_prep.p_star, g, max_len=8, eps_p=eps)
            total = sum(a.mass for a in dist.atoms) + dist.residual_mass
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_distances_sorted(self, ref_mp, ref_prep):
        dist = enumeration_distribution(ref_mp, ref_prep.p_star, 0.95, max_len=8, eps_p=1e-8)
        d = dist.distances()
        assert np.all(np.diff(d) >= 0)

    def test_no_drop_limit_concentrates_at_fixed_point(self, ref_mp, ref_prep):
        dist = enumeration_distribution(ref_mp, ref_prep.p_star, 0.999999, max_len=10, eps_p=1e-30)
        by_code = {a.code: a.mass for a in dist.atoms}
        assert by_code[""] == pytest.approx(1.0, abs=1e-5)
        assert all(m < 1e-5 for code, m in by_code.items() if code)

    def test_first_orbit_cluster_mass(self, ref_mp, ref_prep):
        # Mass near the first open-loop image: one drop preceded by a long
        # arrival run, i.e. g * (1 - g) to within the horizon transient.
        dist = enumeration_distribution(ref_mp, ref_prep.p_star, 0.95, max_len=12, eps_p=1e-9)
        fracs, _ = distribution_clusters(dist, ref_prep.ladder, 10)
        assert fracs[1] == pytest.approx(0.0475, abs=0.002)

    def test_pruned_mass_reported_not_dropped(self, ref_mp, ref_prep):
        tight = enumeration_distribution(ref_mp, ref_prep.p_star, 0.95, max_len=10, eps_p=1e-3)
        loose = enumeration_distribution(ref_mp, ref_prep.p_star, 0.95, max_len=10, eps_p=1e-12)
        assert tight.residual_mass > loose.residual_mass
        assert len(tight.atoms) < len(loose.atoms)
        assert tight.residual_mass + sum(a.mass for a in tight.atoms) == pytest.approx(1.0, abs=1e-9)

    def test_gamma_bounds(self, ref_mp, ref_prep):
        with pytest.raises(ValueError, match="gamma_st"):
            enumeration_distribution(ref_mp, ref_prep.p_star, 1.0, max_len=5, eps_p=1e-6)

    @pytest.mark.slow
    def test_matches_long_monte_carlo(self, ref_plant, ref_mp, ref_prep):
        # Independent oracle: time averaging along a million-step stationary
        # trajectory.  The enumeration masses must match the occupation
        # frequencies of the first four clusters.
        cfg = ExperimentConfig(
            plant=ref_plant, channel=ChannelParams(0.95, 0.05),
            ergodic_length=10**6, master_seed=3,
        )
        samples, _ = run_ergodic(cfg, ref_prep)
        mc_fracs, _ = cluster_probabilities(samples, ref_prep.ladder, cfg.n_s)
        dist = enumeration_distribution(ref_mp, ref_prep.p_star, 0.95, max_len=10, eps_p=1e-9)
        enum_fracs, _ = distribution_clusters(dist, ref_prep.ladder, cfg.n_s)
        assert np.max(np.abs(enum_fracs[:4] - mc_fracs[:4])) <= 0.01


class TestDeltaDistribution:
    def test_reference_masses_and_distances(self, ref_mp, ref_prep):
        dist = delta_distribution(ref_mp, ref_prep.p_star, 0.95, n_d=5)
        expected_mass = [0.95, 4.75e-2, 2.375e-3, 1.1875e-4, 5.9375e-6, 2.96875e-7]
        expected_dist = [0.0, 0.81725, 1.1519, 1.3900, 1.5855, 1.7572]
        assert len(dist.atoms) == 6
        for atom, m, d in zip(dist.atoms, expected_mass, expected_dist):
            assert atom.mass == pytest.approx(m, rel=1e-12)
            assert atom.distance == pytest.approx(d, abs=5e-4)

    def test_heavy_loss_second_mass(self, ref_mp, ref_prep):
        dist = delta_distribution(ref_mp, ref_prep.p_star, 0.08, n_d=3)
        assert dist.atoms[1].mass == pytest.approx(0.08 * 0.92, rel=1e-12)

    def test_near_certain_arrival_single_atom(self, ref_mp, ref_prep):
        dist = delta_distribution(ref_mp, ref_prep.p_star, 1.0 - 1e-12, n_d=3)
        assert dist.atoms[0].mass == pytest.approx(1.0, abs=1e-9)

    def test_residual_is_geometric_tail(self, ref_mp, ref_prep):
        g, n_d = 0.8, 6
        dist = delta_distribution(ref_mp, ref_prep.p_star, g, n_d=n_d)
        assert dist.residual_mass == pytest.approx((1 - g) ** (n_d + 1), rel=1e-9)

    def test_consistent_with_enumeration_clusters(self, ref_mp, ref_prep):
        # The lumped masses and the enumeration refinement agree per cluster
        # once the arrival probability is high enough.
        for g in (0.95, 7.0 / 9.0):
            delta = delta_distribution(ref_mp, ref_prep.p_star, g, n_d=5)
            enum = enumeration_distribution(ref_mp, ref_prep.p_star, g, max_len=12, eps_p=1e-10)
            d_fracs, _ = distribution_clusters(delta, ref_prep.ladder, 10)
            e_fracs, _ = distribution_clusters(enum, ref_prep.ladder, 10)
            assert np.max(np.abs(d_fracs[:4] - e_fracs[:4])) <= 5e-3


class TestTimeAverage:
    def test_all_arrivals_gives_one(self, ref_mp, ref_prep):
        traj = pcm_trajectory(ref_mp, ref_prep.p_star, np.ones(50, dtype=np.uint8), ref_prep.p_star)
        cfg = BallIndicatorConfig(epsilon=1e-9, reference=ref_prep.p_star)
        assert time_average_F(traj, cfg) == 1.0

    def test_radius_covering_everything_gives_one(self, ref_mp, ref_prep):
        word = sample_chain(ChannelParams(0.95, 0.05), 0.95, 200, seed=12)[1:]
        traj = pcm_trajectory(ref_mp, ref_prep.p_star, word, ref_prep.p_star)
        cfg = BallIndicatorConfig(epsilon=float(np.max(traj.distances)) + 1.0, reference=ref_prep.p_star)
        assert time_average_F(traj, cfg) == 1.0

    def test_burn_in_bounds(self, ref_mp, ref_prep):
        traj = pcm_trajectory(ref_mp, ref_prep.p_star, [1, 1], ref_prep.p_star)
        cfg = BallIndicatorConfig(epsilon=1.0, reference=ref_prep.p_star)
        with pytest.raises(ValueError, match="burn_in"):
            time_average_F(traj, cfg, burn_in=3)

    def test_reference_low_loss_fraction(self, ref_plant, ref_prep):
        # Half the first orbit distance separates the fixed-point cluster
        # from everything else; the time fraction inside it is the arrival
        # majority mass.
        cfg = ExperimentConfig(
            plant=ref_plant, channel=ChannelParams(0.95, 0.05),
            ergodic_length=50_000, master_seed=11,
        )
        samples, _ = run_ergodic(cfg, ref_prep)
        eps = ref_prep.ladder[1] / 2.0
        fraction = float(np.mean(samples <= eps))
        assert fraction == pytest.approx(0.95044, abs=0.01)

    def test_monotone_in_radius(self, ref_mp, ref_prep):
        word = sample_chain(ChannelParams(0.9, 0.2), 0.9, 500, seed=13)[1:]
        traj = pcm_trajectory(ref_mp, ref_prep.p_star, word, ref_prep.p_star)
        values = [
            time_average_F(traj, BallIndicatorConfig(epsilon=e, reference=ref_prep.p_star))
            for e in np.linspace(1e-3, 5.0, 12)
        ]
        assert all(a <= b for a, b in zip(values, values[1:]))


class TestAtomicDistributionType:
    def test_cdf_monotone(self, ref_mp, ref_prep):
        dist = enumeration_distribution(ref_mp, ref_prep.p_star, 0.9, max_len=8, eps_p=1e-8)
        grid = np.linspace(0.0, 3.0, 20)
        values = [dist.cdf(e) for e in grid]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))

    def test_mass_violation_rejected(self, ref_prep):
        with pytest.raises(ValueError, match="sum"):
            AtomicDistribution(
                atoms=(Atom(matrix=ref_prep.p_star, distance=0.0, mass=0.5),),
                residual_mass=0.0,
                method="delta",
            )

    def test_unknown_method_rejected(self, ref_prep):
        with pytest.raises(ValueError, match="method"):
            AtomicDistribution(
                atoms=(Atom(matrix=ref_prep.p_star, distance=0.0, mass=1.0),),
                residual_mass=0.0,
                method="magic",
            )

    def test_atom_distance_convention(self, ref_mp, ref_prep):
        # Stored distances are on the decimal-log scale of the canonical
        # metric; conversion is exact up to round-off.
        dist = delta_distribution(ref_mp, ref_prep.p_star, 0.9, n_d=3)
        for atom in dist.atoms:
            nat = riemannian_distance(atom.matrix, ref_prep.p_star)
            assert atom.distance == pytest.approx(nat / LN10, abs=1e-10)
            assert atom.distance == pytest.approx(
                decimal_distance(atom.matrix, ref_prep.p_star), abs=1e-12
            )
