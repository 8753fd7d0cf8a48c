import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smvmf.dataset import center_columns, scaled_view
from smvmf.errors import DimensionMismatch, RankDeficient, RankTooLarge
from smvmf.factor_model import reconstruct
from smvmf.solver import polar_factor, soft_threshold
from smvmf.synthetic import PlantSpec, generate, oracle_polar, oracle_prox


def small_spec(**overrides):
    settings = dict(
        n_subjects=(20, 24),
        shared_template=np.array([[2.0, 0.0], [0.0, 1.5], [1.0, -1.0], [0.5, 0.5], [0.0, 0.3]]),
        specific_templates=(
            np.array([[0.0], [0.0], [1.2], [0.8], [0.0]]),
            np.array([[0.9], [0.0], [0.0], [0.0], [1.1]]),
        ),
        noise=0.0,
        seed=3,
    )
    settings.update(overrides)
    return PlantSpec(**settings)


class TestGenerate:
    def test_deterministic_per_seed(self):
        a = generate(small_spec(noise=0.2, label_strength=(0.8, 0.8)))
        b = generate(small_spec(noise=0.2, label_strength=(0.8, 0.8)))
        for m in range(2):
            np.testing.assert_array_equal(a[0].views[m].values, b[0].views[m].values)
            np.testing.assert_array_equal(a[2][m], b[2][m])

    def test_truth_satisfies_constraints_exactly(self):
        _, truth, _ = generate(small_spec())
        assert truth.max_constraint_violation() < 1e-12

    def test_planted_projections_have_zero_column_means(self):
        _, truth, _ = generate(small_spec())
        for m in range(2):
            assert np.abs(truth.shared_projections[m].mean(axis=0)).max() < 1e-12
            assert np.abs(truth.specific_projections[m].mean(axis=0)).max() < 1e-12

    def test_noiseless_data_is_the_exact_model(self):
        raw, truth, _ = generate(small_spec())
        ds = center_columns(raw)
        for m in range(2):
            np.testing.assert_allclose(
                scaled_view(ds, m), reconstruct(truth, m), atol=1e-12
            )

    def test_dataset_comes_back_uncentered(self):
        raw, _, _ = generate(small_spec(noise=0.5))
        assert not raw.centered

    def test_full_strength_labels_follow_the_first_specific_axis(self):
        _, truth, labels = generate(small_spec(label_strength=(1.0, 1.0)))
        for m in range(2):
            axis = truth.specific_projections[m][:, 0]
            np.testing.assert_array_equal(labels[m], axis > np.median(axis))

    def test_full_strength_labels_are_balanced(self):
        _, _, labels = generate(small_spec(label_strength=(1.0, 1.0)))
        assert labels[0].sum() == 10  # n = 20, median split
        assert labels[1].sum() == 12

    def test_no_strength_means_no_labels(self):
        raw, _, labels = generate(small_spec())
        assert labels == (None, None)
        assert all(v.labels is None for v in raw.views)

    def test_names_flow_through(self):
        raw, _, _ = generate(
            small_spec(
                view_names=("alpha", "beta"),
                region_names=("a", "b", "c", "d", "e"),
            )
        )
        assert tuple(v.name for v in raw.views) == ("alpha", "beta")
        assert raw.regions == ("a", "b", "c", "d", "e")
        assert raw.views[0].subjects[0] == "alpha-s001"

    def test_default_region_names_are_zero_padded(self):
        raw, _, _ = generate(small_spec())
        assert raw.regions[0] == "r01"
        assert raw.regions[-1] == "r05"

    def test_component_budget_enforced(self):
        with pytest.raises(RankTooLarge):
            generate(small_spec(n_subjects=(3, 24)))  # 2 + 1 > min(2, 5)

    def test_strength_validation(self):
        with pytest.raises(DimensionMismatch):
            small_spec(label_strength=(0.5,))
        with pytest.raises(DimensionMismatch):
            small_spec(label_strength=(0.5, 1.2))

    def test_negative_noise_rejected(self):
        with pytest.raises(DimensionMismatch):
            small_spec(noise=-0.1)

    def test_template_shape_validation(self):
        with pytest.raises(DimensionMismatch):
            small_spec(specific_templates=(np.zeros((4, 1)), np.zeros((5, 1))))


class TestOraclePolar:
    def test_agrees_with_production_routine(self, rng):
        for _ in range(20):
            target = rng.normal(size=(8, 3))
            np.testing.assert_allclose(
                oracle_polar(target), polar_factor(target), atol=1e-8
            )

    def test_rank_deficient_input_refused(self, rng):
        target = rng.normal(size=(6, 3))
        target[:, 1] = 2.0 * target[:, 0]
        with pytest.raises(RankDeficient):
            oracle_polar(target)

    def test_width_limit(self, rng):
        with pytest.raises(DimensionMismatch):
            oracle_polar(rng.normal(size=(10, 7)))


class TestOracleProx:
    @pytest.mark.parametrize(
        "target,weight,expected",
        [
            (3.0, 1.0, 2.0),
            (-0.5, 1.0, 0.0),
            (1.0, 1.0, 0.0),
            (2.0, 0.0, 2.0),
            (0.0, 5.0, 0.0),
            (-4.0, 1.5, -2.5),
        ],
    )
    def test_known_values(self, target, weight, expected):
        assert oracle_prox(target, weight) == pytest.approx(expected, abs=1e-6)

    def test_negative_weight_rejected(self):
        with pytest.raises(DimensionMismatch):
            oracle_prox(1.0, -0.5)

    @settings(max_examples=60, deadline=None)
    @given(
        target=st.floats(min_value=-100.0, max_value=100.0),
        weight=st.floats(min_value=0.0, max_value=50.0),
    )
    def test_grid_search_matches_closed_form(self, target, weight):
        closed = float(soft_threshold(np.array([target]), weight)[0])
        assert oracle_prox(target, weight) == pytest.approx(
            closed, abs=1e-5 * (1.0 + abs(target))
        )
