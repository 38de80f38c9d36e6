import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtlrank.data import (
    DataError,
    MultiTaskDataset,
    SyntheticConfig,
    TaskDataset,
    apply_standardization,
    generate_synthetic,
    load_dataset,
    save_dataset,
    standardize,
)


def make_dataset(**kwargs):
    t1 = TaskDataset("t1", X=[[1.0, 0.0], [0.0, 1.0]], y=[1, -1], scores=[2.0, 0.5])
    t2 = TaskDataset("t2", X=[[2.0, 2.0]], y=[1], scores=[1.0])
    return MultiTaskDataset((t1, t2))


class TestValidation:
    def test_label_values(self):
        with pytest.raises(DataError):
            TaskDataset("t", X=[[1.0]], y=[0])

    def test_nonfinite_feature(self):
        with pytest.raises(DataError):
            TaskDataset("t", X=[[np.nan]], y=[1])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            TaskDataset("t", X=[[1.0], [2.0]], y=[1])

    def test_scores_length(self):
        with pytest.raises(DataError):
            TaskDataset("t", X=[[1.0]], y=[1], scores=[1.0, 2.0])

    def test_duplicate_task_ids(self):
        t = TaskDataset("t", X=[[1.0]], y=[1])
        with pytest.raises(DataError):
            MultiTaskDataset((t, t))

    def test_dimension_mismatch_across_tasks(self):
        t1 = TaskDataset("a", X=[[1.0]], y=[1])
        t2 = TaskDataset("b", X=[[1.0, 2.0]], y=[1])
        with pytest.raises(DataError):
            MultiTaskDataset((t1, t2))


class TestLoadSave:
    def test_csv_basic(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("task_id,label,score,f0,f1\nt1,1,2.0,1.0,0.0\nt1,-1,0.5,0.0,1.0\n")
        ds = load_dataset(p)
        assert ds.n_tasks == 1 and ds.d == 2 and ds.tasks[0].m == 2
        assert list(ds.tasks[0].y) == [1, -1]
        assert np.allclose(ds.tasks[0].scores, [2.0, 0.5])

    def test_csv_dimension_mismatch_names_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("task_id,label,score,f0,f1,f2\nt1,1,,1.0,2.0,3.0\nt1,-1,,1.0,2.0\n")
        with pytest.raises(DataError, match="row 3"):
            load_dataset(p)

    def test_csv_bad_label(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("task_id,label,score,f0\nt1,3,,1.0\n")
        with pytest.raises(DataError, match="label"):
            load_dataset(p)

    def test_jsonl_two_tasks_first_appearance_order(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text(
            '{"task_id": "b", "label": 1, "features": [1.0]}\n'
            '{"task_id": "a", "label": -1, "features": [2.0]}\n'
            '{"task_id": "b", "label": -1, "features": [3.0]}\n'
        )
        ds = load_dataset(p)
        assert ds.task_ids == ["b", "a"]
        assert ds.tasks[0].m == 2

    def test_missing_score_column_ok(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("task_id,label,score,f0\nt1,1,,1.0\nt1,-1,,2.0\n")
        ds = load_dataset(p)
        assert ds.tasks[0].scores is None
        assert not ds.has_scores

    @pytest.mark.parametrize("fmt", ["csv", "jsonl"])
    def test_round_trip_exact(self, tmp_path, fmt):
        ds = make_dataset()
        p = tmp_path / f"rt.{fmt}"
        save_dataset(ds, p)
        back = load_dataset(p)
        assert back.task_ids == ds.task_ids
        for a, b in zip(back.tasks, ds.tasks):
            assert np.array_equal(a.X, b.X)
            assert np.array_equal(a.y, b.y)
            assert np.array_equal(a.scores, b.scores)


class TestStandardize:
    def test_two_point_column(self):
        t = TaskDataset("t", X=[[1.0], [3.0]], y=[1, -1])
        out, params = standardize(MultiTaskDataset((t,)))
        assert np.allclose(out.tasks[0].X.ravel(), [-1.0, 1.0])
        assert params.mean[0] == 2.0 and params.std[0] == 1.0

    def test_constant_column_centered_only(self):
        t = TaskDataset("t", X=[[5.0], [5.0], [5.0]], y=[1, -1, 1])
        out, _ = standardize(MultiTaskDataset((t,)))
        assert np.allclose(out.tasks[0].X, 0.0)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        t = TaskDataset("t", X=rng.normal(3.0, 2.0, (20, 3)), y=rng.choice([-1, 1], 20))
        once, _ = standardize(MultiTaskDataset((t,)))
        twice, _ = standardize(once)
        assert np.allclose(once.tasks[0].X, twice.tasks[0].X, atol=1e-12)

    def test_pools_over_tasks(self):
        t1 = TaskDataset("a", X=[[0.0]], y=[1])
        t2 = TaskDataset("b", X=[[2.0]], y=[-1])
        out, params = standardize(MultiTaskDataset((t1, t2)))
        assert params.mean[0] == 1.0
        assert np.allclose([out.tasks[0].X[0, 0], out.tasks[1].X[0, 0]], [-1.0, 1.0])

    def test_apply_to_held_out_data(self):
        t = TaskDataset("t", X=[[1.0], [3.0]], y=[1, -1])
        _, params = standardize(MultiTaskDataset((t,)))
        held = MultiTaskDataset((TaskDataset("h", X=[[5.0]], y=[1]),))
        out = apply_standardization(held, params)
        assert out.tasks[0].X[0, 0] == 3.0


class TestSynthetic:
    def test_no_flip_when_prob_zero(self):
        ds, gt = generate_synthetic(SyntheticConfig(T=3, m=30, d=4, flip_prob=0.0, seed=1))
        for t in ds.tasks:
            assert np.array_equal(t.y, gt.true_labels[t.task_id])

    def test_no_flip_when_band_zero(self):
        ds, gt = generate_synthetic(
            SyntheticConfig(T=3, m=30, d=4, flip_prob=1.0, noise_band=0.0, seed=1))
        for t in ds.tasks:
            assert np.array_equal(t.y, gt.true_labels[t.task_id])

    def test_deterministic(self):
        cfg = SyntheticConfig(T=2, m=10, d=3, flip_prob=0.5, score_noise=0.2, seed=7)
        a, _ = generate_synthetic(cfg)
        b, _ = generate_synthetic(cfg)
        for ta, tb in zip(a.tasks, b.tasks):
            assert np.array_equal(ta.X, tb.X)
            assert np.array_equal(ta.y, tb.y)
            assert np.array_equal(ta.scores, tb.scores)

    def test_noise_free_scores_order_true_margins(self):
        ds, gt = generate_synthetic(
            SyntheticConfig(T=2, m=25, d=4, score_noise=0.0, flip_prob=0.3, seed=3))
        for t in ds.tasks:
            margins = t.X @ (gt.w0 + gt.v[t.task_id])
            assert np.array_equal(np.argsort(t.scores), np.argsort(margins))

    def test_bad_flip_prob(self):
        with pytest.raises(DataError):
            SyntheticConfig(T=1, m=1, d=1, flip_prob=1.5)

    def test_task_spread_scales_v(self):
        _, gt = generate_synthetic(SyntheticConfig(T=4, m=2, d=5, task_spread=0.7, seed=2))
        for v in gt.v.values():
            assert np.isclose(np.linalg.norm(v), 0.7)

    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=20, deadline=None)
    def test_labels_always_valid(self, seed):
        ds, _ = generate_synthetic(
            SyntheticConfig(T=2, m=8, d=3, flip_prob=0.5, noise_band=1.0, seed=seed))
        for t in ds.tasks:
            assert set(np.unique(t.y)) <= {-1, 1}
