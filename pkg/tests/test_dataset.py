import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smvmf.dataset import (
    MultiViewDataset,
    ViewMatrix,
    center_columns,
    load_view_csv,
    load_views,
    parse_manifest,
    scaled_view,
    total_sample_variance,
)
from smvmf.errors import (
    AlreadyCentered,
    ConfigParseError,
    DuplicateSubjectInView,
    EmptyView,
    MismatchedRegions,
    NonNumericCell,
    ViewIndexOutOfRange,
)

from conftest import make_dataset


def write_view(path, rows, header="subject_id,a,b"):
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")


def write_manifest(tmp_path, entries):
    manifest = tmp_path / "manifest.txt"
    manifest.write_text("\n".join(f"{k} = {v}" for k, v in entries) + "\n")
    return manifest


class TestLoading:
    def test_happy_path_two_views(self, tmp_path):
        write_view(tmp_path / "one.csv", ["s1,1.0,2.0", "s2,3.0,4.0"])
        write_view(tmp_path / "two.csv", ["t1,5,6", "t2,7,8", "t3,9,0"])
        manifest = write_manifest(tmp_path, [("young", "one.csv"), ("old", "two.csv")])
        ds = load_views(manifest)
        assert ds.n_views == 2
        assert ds.regions == ("a", "b")
        assert ds.views[0].subjects == ("s1", "s2")
        assert ds.views[1].n_subjects == 3
        assert not ds.centered
        np.testing.assert_array_equal(ds.views[0].values, [[1.0, 2.0], [3.0, 4.0]])
        assert ds.views[0].labels is None

    def test_label_column(self, tmp_path):
        write_view(
            tmp_path / "v.csv",
            ["s1,1,2,0", "s2,3,4,1"],
            header="subject_id,a,b,label",
        )
        regions, view = load_view_csv(tmp_path / "v.csv", "v")
        assert regions == ("a", "b")
        np.testing.assert_array_equal(view.labels, [0, 1])

    def test_crlf_and_quoting(self, tmp_path):
        (tmp_path / "v.csv").write_bytes(b'subject_id,a,b\r\n"s,1",1,2\r\ns2,3,4\r\n')
        regions, view = load_view_csv(tmp_path / "v.csv", "v")
        assert view.subjects == ("s,1", "s2")

    def test_mismatched_regions(self, tmp_path):
        write_view(tmp_path / "one.csv", ["s1,1,2", "s2,3,4"])
        write_view(tmp_path / "two.csv", ["t1,1,2", "t2,3,4"], header="subject_id,a,c")
        manifest = write_manifest(tmp_path, [("x", "one.csv"), ("y", "two.csv")])
        with pytest.raises(MismatchedRegions):
            load_views(manifest)

    def test_region_order_matters(self, tmp_path):
        write_view(tmp_path / "one.csv", ["s1,1,2", "s2,3,4"])
        write_view(tmp_path / "two.csv", ["t1,1,2", "t2,3,4"], header="subject_id,b,a")
        manifest = write_manifest(tmp_path, [("x", "one.csv"), ("y", "two.csv")])
        with pytest.raises(MismatchedRegions):
            load_views(manifest)

    @pytest.mark.parametrize("cell", ["abc", "nan", "inf", ""])
    def test_non_numeric_cell(self, tmp_path, cell):
        write_view(tmp_path / "v.csv", [f"s1,1,{cell}", "s2,3,4"])
        with pytest.raises(NonNumericCell):
            load_view_csv(tmp_path / "v.csv", "v")

    def test_ragged_row(self, tmp_path):
        write_view(tmp_path / "v.csv", ["s1,1", "s2,3,4"])
        with pytest.raises(NonNumericCell):
            load_view_csv(tmp_path / "v.csv", "v")

    def test_duplicate_subject(self, tmp_path):
        write_view(tmp_path / "v.csv", ["s1,1,2", "s1,3,4"])
        with pytest.raises(DuplicateSubjectInView):
            load_view_csv(tmp_path / "v.csv", "v")

    def test_empty_view(self, tmp_path):
        write_view(tmp_path / "v.csv", [])
        with pytest.raises(EmptyView):
            load_view_csv(tmp_path / "v.csv", "v")

    def test_single_row_rejected(self, tmp_path):
        write_view(tmp_path / "v.csv", ["s1,1,2"])
        with pytest.raises(EmptyView):
            load_view_csv(tmp_path / "v.csv", "v")

    def test_bad_label_value(self, tmp_path):
        write_view(
            tmp_path / "v.csv",
            ["s1,1,2,2", "s2,3,4,0"],
            header="subject_id,a,b,label",
        )
        with pytest.raises(NonNumericCell):
            load_view_csv(tmp_path / "v.csv", "v")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigParseError):
            load_views(tmp_path / "nope.txt")

    def test_missing_view_file(self, tmp_path):
        manifest = write_manifest(tmp_path, [("x", "gone.csv")])
        with pytest.raises(ConfigParseError):
            load_views(manifest)

    def test_manifest_relative_paths_and_comments(self, tmp_path):
        sub = tmp_path / "data"
        sub.mkdir()
        write_view(sub / "one.csv", ["s1,1,2", "s2,3,4"])
        manifest = tmp_path / "m.txt"
        manifest.write_text("# comment\n\nx = data/one.csv\n")
        pairs = parse_manifest(manifest)
        assert pairs[0][0] == "x"
        assert load_views(manifest).n_views == 1

    def test_manifest_duplicate_view_name(self, tmp_path):
        write_view(tmp_path / "one.csv", ["s1,1,2", "s2,3,4"])
        manifest = write_manifest(tmp_path, [("x", "one.csv"), ("x", "one.csv")])
        with pytest.raises(ConfigParseError):
            parse_manifest(manifest)


class TestCentering:
    def test_means_removed(self):
        ds = make_dataset([[[1.0, 10.0], [3.0, 30.0]]])
        centered = center_columns(ds)
        np.testing.assert_allclose(
            centered.views[0].values, [[-1.0, -10.0], [1.0, 10.0]]
        )
        assert centered.centered

    def test_double_centering_flagged(self):
        ds = center_columns(make_dataset([[[1.0], [2.0]]]))
        with pytest.raises(AlreadyCentered):
            center_columns(ds)

    def test_metadata_preserved(self):
        labels = np.array([0, 1, 1])
        ds = make_dataset([np.arange(6.0).reshape(3, 2)], labels=[labels])
        centered = center_columns(ds)
        assert centered.views[0].subjects == ds.views[0].subjects
        np.testing.assert_array_equal(centered.views[0].labels, labels)

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(2, 12),
        p=st.integers(1, 6),
        seed=st.integers(0, 10_000),
    )
    def test_centering_invariant(self, n, p, seed):
        values = np.random.default_rng(seed).normal(size=(n, p)) * 100
        centered = center_columns(make_dataset([values]))
        means = centered.views[0].values.mean(axis=0)
        tol = 1e-10 * (1.0 + np.abs(values).max())
        assert np.all(np.abs(means) <= tol)

    def test_centering_idempotent_up_to_tolerance(self, rng):
        values = rng.normal(size=(8, 3))
        once = center_columns(make_dataset([values]))
        again = center_columns(
            make_dataset([once.views[0].values])  # fresh flag, same numbers
        )
        np.testing.assert_allclose(
            again.views[0].values, once.views[0].values, atol=1e-12
        )


class TestScaling:
    def test_two_point_example(self):
        # centered single column (-1, 1): scaling by 1/sqrt(2) gives unit
        # total sample variance
        ds = center_columns(make_dataset([[[-1.0], [1.0]]]))
        a = scaled_view(ds, 0)
        np.testing.assert_allclose(a, [[-1 / math.sqrt(2)], [1 / math.sqrt(2)]])
        assert total_sample_variance(ds, 0) == pytest.approx(1.0)

    def test_gram_trace_equals_brute_force_variance(self, rng):
        values = rng.normal(size=(7, 4)) * 3
        ds = center_columns(make_dataset([values]))
        # independent double loop with divisor n
        x = ds.views[0].values
        expected = sum(
            sum(x[i, j] ** 2 for i in range(x.shape[0])) / x.shape[0]
            for j in range(x.shape[1])
        )
        assert total_sample_variance(ds, 0) == pytest.approx(expected, rel=1e-12)

    def test_requires_centered(self):
        ds = make_dataset([[[1.0], [2.0]]])
        with pytest.raises(ValueError):
            scaled_view(ds, 0)

    def test_view_index_out_of_range(self):
        ds = center_columns(make_dataset([[[1.0], [2.0]]]))
        with pytest.raises(ViewIndexOutOfRange):
            scaled_view(ds, 1)


class TestValidation:
    def test_nan_rejected(self):
        with pytest.raises(NonNumericCell):
            ViewMatrix(name="v", subjects=("a", "b"), values=np.array([[1.0], [np.nan]]))

    def test_views_must_share_region_count(self):
        v1 = ViewMatrix(name="a", subjects=("s1", "s2"), values=np.ones((2, 2)))
        v2 = ViewMatrix(name="b", subjects=("t1", "t2"), values=np.ones((2, 3)))
        with pytest.raises(MismatchedRegions):
            MultiViewDataset(views=(v1, v2), regions=("x", "y"))

    def test_values_read_only(self):
        view = ViewMatrix(name="v", subjects=("a", "b"), values=np.ones((2, 1)))
        with pytest.raises(ValueError):
            view.values[0, 0] = 5.0
