import numpy as np
import pytest

from smvmf.dataset import center_columns, scaled_view
from smvmf.errors import DimensionMismatch, NotReached, ViewIndexOutOfRange
from smvmf.factor_model import Factorization, Penalty
from smvmf.model_selection import (
    RankCandidate,
    select_shared_rank,
    variance_explained,
)
from smvmf.solver import FitConfig, fit
from smvmf.synthetic import PlantSpec, generate

from conftest import make_dataset, random_factorization


def planted_ds(seed, n=(40, 36, 44), p=12, d=3, r=2, noise=0.02, scale=2.0):
    rng = np.random.default_rng(seed)
    spec = PlantSpec(
        n_subjects=tuple(n),
        shared_template=scale * rng.standard_normal((p, d)),
        specific_templates=tuple(rng.standard_normal((p, r)) for _ in n),
        noise=noise,
        seed=seed,
    )
    return center_columns(generate(spec)[0])


def graded_ds(seed, noise=0.02):
    # five orthogonal planted directions with energies 13.2, 12, 10.9, 12,
    # 12 over a total of about 60, so a d + r slot budget captures the top
    # d + r energies: d=1 -> ~0.62, d=2 -> ~0.82, d=3 -> ~0.999 (r = 2)
    p = 12
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.standard_normal((p, 5)))[0]
    shared = basis[:, :3] * (np.sqrt(12.0) * np.array([1.05, 1.0, 0.95]))
    specific = basis[:, 3:5] * np.sqrt(12.0)
    spec = PlantSpec(
        n_subjects=(40, 36, 44),
        shared_template=shared,
        specific_templates=(specific, specific, specific),
        noise=noise,
        seed=seed,
    )
    return center_columns(generate(spec)[0])


class TestVarianceExplained:
    def test_zero_model_explains_nothing(self, rng):
        f = random_factorization(rng, [10], p=6, d=2, r=1)
        zero = Factorization(
            shared_loadings=np.zeros((6, 2)),
            shared_projections=f.shared_projections,
            specific_projections=f.specific_projections,
            specific_loadings=(np.zeros((6, 1)),),
        )
        ds = make_dataset([rng.normal(size=(10, 6))], centered=True)
        assert variance_explained(zero, ds, 0) == (0.0, 0.0)

    def test_planted_model_explains_almost_everything(self):
        ds = planted_ds(3, noise=0.0)
        cfg = FitConfig(3, 2, Penalty.none(3, 2, 3), max_iters=5000, rel_tol=1e-14)
        f, _ = fit(ds, cfg)
        for m in range(3):
            s, t = variance_explained(f, ds, m)
            assert s + t == pytest.approx(1.0, abs=1e-6)

    def test_single_view_no_shared_matches_gram_eigenvalues(self, rng):
        # with one view and no shared part the fit is plain PCA, so the
        # explained fraction must match the top-k gram eigenvalue mass
        values = rng.normal(size=(30, 8)) @ np.diag([4, 3, 2, 1, 0.5, 0.4, 0.3, 0.2])
        values -= values.mean(axis=0)
        ds = make_dataset([values], centered=True)
        k = 3
        f, _ = fit(ds, FitConfig(0, k, Penalty.none(0, k, 1), max_iters=300, rel_tol=1e-13))
        _, frac = variance_explained(f, ds, 0)
        a = scaled_view(ds, 0)
        eigenvalues = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
        expected = eigenvalues[:k].sum() / eigenvalues.sum()
        assert frac == pytest.approx(expected, rel=1e-8)

    def test_view_index_checked(self, rng):
        f = random_factorization(rng, [10], p=6, d=1, r=1)
        ds = make_dataset([rng.normal(size=(10, 6))], centered=True)
        with pytest.raises(ViewIndexOutOfRange):
            variance_explained(f, ds, 1)


class TestSelectSharedRank:
    def test_finds_the_smallest_qualifying_rank(self):
        ds = graded_ds(11)
        selected, rows = select_shared_rank(ds, specific_rank=2, threshold=0.9, threads=1)
        assert selected == 3
        assert [row.shared_rank for row in rows] == [1, 2, 3]
        assert rows[-1].qualifying
        assert not any(row.qualifying for row in rows[:-1])

    def test_scan_table_rows_carry_both_fractions(self):
        ds = graded_ds(11)
        _, rows = select_shared_rank(ds, specific_rank=2, threshold=0.9, threads=1)
        for row in rows:
            assert isinstance(row, RankCandidate)
            assert len(row.shared_fraction) == 3
            assert len(row.specific_fraction) == 3
            assert all(0.0 <= s <= 1.5 for s in row.shared_fraction)
        # fractions grow with the candidate rank
        sums = [max(s + t for s, t in zip(r.shared_fraction, r.specific_fraction)) for r in rows]
        assert sums == sorted(sums)

    def test_low_threshold_stops_at_one(self):
        ds = graded_ds(11)
        selected, rows = select_shared_rank(ds, specific_rank=2, threshold=0.05, threads=1)
        assert selected == 1
        assert len(rows) == 1

    def test_unreachable_threshold_raises_with_full_table(self, rng):
        # two small pure-noise views have nearly orthogonal row spaces, so
        # the shared loadings must compromise and no view reaches the
        # threshold at any candidate rank
        ds = center_columns(
            make_dataset([rng.normal(size=(8, 20)), rng.normal(size=(8, 20))])
        )
        with pytest.raises(NotReached) as info:
            select_shared_rank(ds, specific_rank=1, threshold=0.95, threads=1)
        rows = info.value.rows
        assert [row.shared_rank for row in rows] == list(range(1, 8))
        assert not any(row.qualifying for row in rows)
        assert max(
            s + t
            for row in rows
            for s, t in zip(row.shared_fraction, row.specific_fraction)
        ) < 0.95

    def test_no_room_for_shared_component(self):
        ds = planted_ds(5, n=(8, 8), p=6, d=1, r=1)
        with pytest.raises(NotReached):
            select_shared_rank(ds, specific_rank=6, threshold=0.5, threads=1)

    def test_thread_count_does_not_change_the_result(self):
        ds = graded_ds(11)
        serial = select_shared_rank(ds, specific_rank=2, threshold=0.9, threads=1)
        parallel = select_shared_rank(ds, specific_rank=2, threshold=0.9, threads=3)
        assert serial[0] == parallel[0]
        assert len(serial[1]) == len(parallel[1])
        for a, b in zip(serial[1], parallel[1]):
            assert a.shared_rank == b.shared_rank
            assert a.shared_fraction == b.shared_fraction
            assert a.specific_fraction == b.specific_fraction
            assert a.qualifying == b.qualifying

    @pytest.mark.parametrize("threshold", [0.0, -0.2, 1.5])
    def test_threshold_range_checked(self, threshold):
        ds = planted_ds(11, n=(20, 20, 20))
        with pytest.raises(DimensionMismatch):
            select_shared_rank(ds, specific_rank=2, threshold=threshold, threads=1)
