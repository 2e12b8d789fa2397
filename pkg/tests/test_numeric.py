import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepmmc import numeric
from deepmmc.numeric import (
    DataMatrix,
    logistic_map,
    make_rng,
    pca_project,
    remap_labels,
    standardize_columns,
)


class TestDataMatrix:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DataMatrix(np.empty((0, 3)))

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            DataMatrix(np.ones((3, 2)), labels=[1, 3, 3])  # label 2 missing

    def test_binary_kind_accepts_expectations(self):
        x = DataMatrix(np.array([[0.0, 0.5], [1.0, 0.25]]), feature_kind="binary")
        assert x.feature_kind == "binary"

    def test_binary_kind_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            DataMatrix(np.array([[0.0, 1.5]]), feature_kind="binary")

    def test_remap_labels_first_occurrence(self):
        assert remap_labels([7, 7, 2, 9, 2]).tolist() == [1, 1, 2, 3, 2]


class TestLogistic:
    def test_zero_is_half(self):
        assert logistic_map(np.array([[0.0]]))[0, 0] == 0.5

    def test_symmetry_sums_to_one(self):
        for t in (0.3, 1.7, 12.0):
            out = logistic_map(np.array([[t, -t]]))
            assert out.sum() == pytest.approx(1.0, abs=1e-15)

    def test_log_three(self):
        # oracle: 1 / (1 + 1/3) = 0.75
        out = logistic_map(np.array([[math.log(3.0)]]))
        assert out[0, 0] == pytest.approx(0.75, abs=1e-15)

    def test_strictly_inside_unit_interval(self):
        out = logistic_map(np.array([-1e6, -500.0, 0.0, 500.0, 1e6]))
        assert (out > 0.0).all() and (out < 1.0).all()

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=20))
    def test_monotone(self, xs):
        xs = np.sort(np.asarray(xs))
        out = logistic_map(xs)
        assert (np.diff(out) >= 0).all()


class TestStandardize:
    def test_two_point_column(self):
        x = DataMatrix(np.array([[1.0], [3.0]]))
        out, stats = standardize_columns(x)
        assert out.values[:, 0].tolist() == [-1.0, 1.0]
        assert stats.mean[0] == 2.0 and stats.scale[0] == 1.0

    def test_constant_column_flagged(self):
        x = DataMatrix(np.array([[5.0], [5.0], [5.0]]))
        out, stats = standardize_columns(x)
        assert out.values[:, 0].tolist() == [0.0, 0.0, 0.0]
        assert stats.degenerate[0]

    def test_population_moments(self):
        # oracle (hand computed, population stddev): mean 1.5, std sqrt(1.25)
        x = DataMatrix(np.array([[0.0], [1.0], [2.0], [3.0]]))
        out, stats = standardize_columns(x)
        assert stats.mean[0] == pytest.approx(1.5)
        assert stats.scale[0] == pytest.approx(math.sqrt(1.25))
        expect = [-1.3416407864998738, -0.4472135954999579, 0.4472135954999579, 1.3416407864998738]
        assert np.allclose(out.values[:, 0], expect, atol=1e-12)

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            standardize_columns(DataMatrix(np.ones((1, 2))))

    def test_record_reapplies_bit_identically(self):
        rng = make_rng(3)
        x = DataMatrix(rng.normal(2.0, 3.0, size=(20, 4)))
        out, stats = standardize_columns(x)
        again = stats.apply(x.values)
        assert np.array_equal(out.values, again)

    def test_record_transforms_held_out_rows(self):
        rng = make_rng(4)
        x = DataMatrix(rng.normal(size=(30, 3)))
        _, stats = standardize_columns(x)
        held = rng.normal(size=(5, 3))
        manual = (held - stats.mean) / stats.scale
        assert np.array_equal(stats.apply(held), manual)


def cov_eig_oracle(values):
    """Independent PCA oracle: eigendecomposition of the explicit covariance."""
    centered = values - values.mean(axis=0)
    cov = centered.T @ centered / values.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    return evals[order], evecs[:, order]


class TestPca:
    def test_rank_one_data_keeps_all_variance(self):
        rng = make_rng(0)
        t = rng.normal(size=40)
        values = np.column_stack([2.0 * t + 1.0, -3.0 * t + 0.5])
        proj, basis = pca_project(DataMatrix(values), 1)
        total = ((values - values.mean(0)) ** 2).sum() / len(values)
        kept = proj.values.var(axis=0, ddof=0).sum()
        assert kept == pytest.approx(total, rel=1e-10)

    def test_full_dim_reconstruction(self):
        rng = make_rng(1)
        values = rng.normal(size=(25, 6))
        proj, basis = pca_project(DataMatrix(values), 6)
        recon = basis.reconstruct(proj.values)
        assert np.abs(recon - values).max() < 1e-8

    def test_against_covariance_oracle(self):
        rng = make_rng(2)
        values = rng.normal(size=(50, 10))
        proj, basis = pca_project(DataMatrix(values), 3)
        # orthonormal basis
        gram = basis.basis.T @ basis.basis
        assert np.abs(gram - np.eye(3)).max() < 1e-10
        # projected covariance is diagonal with the oracle eigenvalues
        pc = proj.values.T @ proj.values / len(values)
        evals, _ = cov_eig_oracle(values)
        assert np.abs(pc - np.diag(evals[:3])).max() < 1e-8
        # explained variances non-increasing
        assert (np.diff(basis.explained_variance) <= 1e-12).all()

    def test_target_dim_out_of_range(self):
        x = DataMatrix(np.ones((5, 3)) + np.arange(15).reshape(5, 3))
        with pytest.raises(ValueError):
            pca_project(x, 4)
        with pytest.raises(ValueError):
            pca_project(x, 0)

    def test_gram_trick_matches_direct_branch(self, monkeypatch):
        rng = make_rng(5)
        values = rng.normal(size=(12, 30))
        direct, dbasis = pca_project(DataMatrix(values), 4)
        monkeypatch.setattr(numeric, "GRAM_TRICK_DIM", 8)
        gram, gbasis = pca_project(DataMatrix(values), 4)
        assert np.abs(direct.values - gram.values).max() < 1e-8
        assert np.abs(dbasis.basis - gbasis.basis).max() < 1e-8

    def test_wide_matrix_does_not_crash(self, monkeypatch):
        monkeypatch.setattr(numeric, "GRAM_TRICK_DIM", 50)
        rng = make_rng(6)
        values = rng.normal(size=(20, 100))
        proj, basis = pca_project(DataMatrix(values), 5)
        assert proj.values.shape == (20, 5)
        assert np.abs(basis.basis.T @ basis.basis - np.eye(5)).max() < 1e-8


class TestRng:
    def test_same_seed_same_stream(self):
        a = make_rng(123).random(10)
        b = make_rng(123).random(10)
        assert np.array_equal(a, b)

    def test_known_algorithm(self):
        assert isinstance(make_rng(0).bit_generator, np.random.PCG64)
