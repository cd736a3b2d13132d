import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adml import LabeledDataset, gen_coiled_surfaces, load_csv, normalize, random_split
from adml.dataset import MULTILABEL, write_csv
from adml.errors import EmptyFile, InvalidK, MalformedRow, NonNumericFeature


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_two_rows(self, tmp_path):
        ds = load_csv(write(tmp_path, "label,f1,f2,f3\n0,1,2,3\n1,4,5,6\n"))
        assert ds.n_samples == 2 and ds.dim == 3
        np.testing.assert_array_equal(ds.features[:, 1], [4, 5, 6])
        np.testing.assert_array_equal(ds.labels, [0, 1])

    def test_nan_token(self, tmp_path):
        with pytest.raises(NonNumericFeature):
            load_csv(write(tmp_path, "label,f1,f2\n0,1,NaN\n"))

    def test_inf_and_garbage(self, tmp_path):
        with pytest.raises(NonNumericFeature):
            load_csv(write(tmp_path, "label,f1,f2\n0,1,inf\n"))
        with pytest.raises(NonNumericFeature):
            load_csv(write(tmp_path, "label,f1,f2\n0,1,abc\n"))

    def test_short_row(self, tmp_path):
        with pytest.raises(MalformedRow):
            load_csv(write(tmp_path, "label,f1,f2,f3\n0,1,2\n"))

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyFile):
            load_csv(write(tmp_path, ""))
        with pytest.raises(EmptyFile):
            load_csv(write(tmp_path, "label,f1\n"))

    def test_multilabel(self, tmp_path):
        ds = load_csv(write(tmp_path, "tags,f1\n1;3,0.5\n2,1.5\n"), MULTILABEL)
        assert ds.labels == (frozenset({1, 3}), frozenset({2}))
        assert ds.vocabulary() == [1, 2, 3]

    def test_roundtrip(self, tmp_path):
        ds = gen_coiled_surfaces(5, seed=3)
        write_csv(ds, tmp_path / "g.csv")
        back = load_csv(tmp_path / "g.csv")
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, ds.labels)


class TestNormalize:
    def test_hand_zscores(self):
        ds = LabeledDataset([[1.0, 2.0, 3.0]], [0, 1, 0])
        out, stats = normalize(ds)
        np.testing.assert_allclose(out.features[0], [-1.0, 0.0, 1.0], atol=1e-15)

    def test_constant_feature(self):
        ds = LabeledDataset([[5.0, 5.0, 5.0], [1.0, 2.0, 4.0]], [0, 1, 0])
        out, stats = normalize(ds)
        np.testing.assert_array_equal(out.features[0], [0, 0, 0])
        assert stats.scale[0] == 1.0

    def test_idempotent_and_roundtrip(self, rng):
        ds = LabeledDataset(rng.normal(3, 7, size=(4, 50)), rng.integers(0, 2, 50))
        once, stats = normalize(ds)
        twice, _ = normalize(once)
        np.testing.assert_allclose(twice.features, once.features, atol=1e-12)
        np.testing.assert_allclose(stats.apply(ds).features, once.features, atol=1e-12)
        np.testing.assert_allclose(once.features.std(axis=1, ddof=1), 1.0)


class TestCoiledSurfaces:
    def test_counts(self):
        ds = gen_coiled_surfaces(1000, seed=7)
        assert ds.n_samples == 2000 and ds.dim == 3
        assert np.bincount(ds.labels).tolist() == [1000, 1000]

    def test_zero_noise_on_spiral(self):
        ds = gen_coiled_surfaces(200, noise_sigma=0.0, seed=1)
        x, y, _ = ds.features[:, ds.labels == 0]
        r = np.hypot(x, y)
        t = (r - 0.25) / 0.15
        np.testing.assert_allclose(np.cos(t) * r, x, atol=1e-12)
        np.testing.assert_allclose(np.sin(t) * r, y, atol=1e-12)

    def test_z_range_exceeds_xy(self):
        X = gen_coiled_surfaces(seed=0).features
        assert np.abs(X[2]).max() > np.abs(X[:2]).max()

    def test_seeded(self):
        a, b = gen_coiled_surfaces(50, seed=9), gen_coiled_surfaces(50, seed=9)
        assert a.features.tobytes() == b.features.tobytes()
        assert gen_coiled_surfaces(50, seed=10).features.tobytes() != a.features.tobytes()


class TestRandomSplit:
    def test_sizes_4_3_3(self):
        ds = LabeledDataset(np.arange(10.0)[None, :], np.zeros(10))
        parts, plan = random_split(ds, K=3, seed=1)
        assert sorted(len(p) for p in parts) == [3, 3, 4]
        ids = np.concatenate([p.sample_ids for p in parts])
        assert sorted(ids.tolist()) == list(range(10))

    def test_subset_size(self):
        ds = LabeledDataset(np.zeros((2, 1000)), np.zeros(1000))
        parts, plan = random_split(ds, subset_size=200, seed=0)
        assert plan.K == 5 and all(len(p) == 200 for p in parts)

    def test_k1_identity(self, rng):
        ds = LabeledDataset(rng.normal(size=(3, 20)), rng.integers(0, 2, 20))
        (part,), _ = random_split(ds, K=1, seed=4)
        np.testing.assert_array_equal(part.features, ds.features)
        np.testing.assert_array_equal(part.sample_ids, ds.sample_ids)

    @pytest.mark.parametrize("K", [0, 11])
    def test_invalid_k(self, K):
        ds = LabeledDataset(np.zeros((1, 10)), np.zeros(10))
        with pytest.raises(InvalidK):
            random_split(ds, K=K)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 200), data=st.data(), seed=st.integers(0, 2**32 - 1))
    def test_partition_property(self, n, data, seed):
        K = data.draw(st.integers(1, n))
        ds = LabeledDataset(np.zeros((1, n)), np.zeros(n))
        parts, plan = random_split(ds, K=K, seed=seed)
        ids = np.concatenate([p.sample_ids for p in parts])
        assert sorted(ids.tolist()) == list(range(n))
        sizes = [len(p) for p in parts]
        assert max(sizes) - min(sizes) <= 1
        parts2, plan2 = random_split(ds, K=K, seed=seed)
        assert plan.assignment.tobytes() == plan2.assignment.tobytes()
