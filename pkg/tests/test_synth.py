import numpy as np
import pytest

from ldnorm import SynthConfig, generate, sweep, validate_dataset
from ldnorm.geometry import pairwise_distances
from ldnorm.rng import Rng, derive_seed

SMALL = dict(d=8, sections=2, n_src_train=120, n_tgt_train=6,
             n_src_test_normal=15, n_tgt_test_normal=15, n_src_test_anom=15, n_tgt_test_anom=15)


def test_splitmix64_reference_sequence():
    r = Rng(0)
    assert [r.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_vectorized_draws_match_scalar():
    a, b = Rng(99), Rng(99)
    assert a.u64(5).tolist() == [b.next_u64() for _ in range(5)]
    assert a.next_u64() == b.next_u64()


def test_rng_ranges_and_substreams():
    r = Rng(5)
    u = r.uniform(10_000)
    assert u.min() >= 0 and u.max() < 1
    ints = r.integers(7, 10_000)
    assert set(np.unique(ints)) == set(range(7))
    assert derive_seed(5, "a") != derive_seed(5, "b")
    assert derive_seed(5, "a") == derive_seed(5, "a")
    z = Rng(3).normal(200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


def test_default_counts_and_ordering():
    ds = generate(SynthConfig(sections=1))
    assert ds.n == 1200 and ds.d == 16
    assert len(ds.rows("section_00", "train", "source")) == 990
    assert len(ds.rows("section_00", "train", "target")) == 10
    assert len(ds.rows("section_00", "test")) == 200
    assert ds.metas[0].id == "section_00/train/source/normal/0000"
    assert ds.metas[-1].id == "section_00/test/target/anomaly/0049"


def test_unit_norm_and_valid():
    ds = generate(SynthConfig(**SMALL))
    assert np.abs(np.linalg.norm(ds.embeddings, axis=1) - 1).max() <= 1e-12
    assert validate_dataset(ds, require_labels=True) == []
    assert ds.sections() == ["section_00", "section_01"]


def test_determinism_and_seed_sensitivity():
    a = generate(SynthConfig(**SMALL, seed=4))
    b = generate(SynthConfig(**SMALL, seed=4))
    c = generate(SynthConfig(**SMALL, seed=5))
    assert a.embeddings.tobytes() == b.embeddings.tobytes() and a.metas == b.metas
    assert not np.array_equal(a.embeddings, c.embeddings)


def test_train_only_config():
    ds = generate(SynthConfig(sections=2, n_src_test_normal=0, n_tgt_test_normal=0,
                              n_src_test_anom=0, n_tgt_test_anom=0))
    assert ds.n == 2000
    assert all(m.split == "train" for m in ds.metas)


def test_target_normals_sit_farther_from_references():
    ds = generate(SynthConfig(seed=1))
    for sec in ds.sections():
        refs = ds.embeddings[ds.rows(sec, "train")]
        nn = {dom: pairwise_distances(ds.embeddings[ds.rows(sec, "test", dom, "normal")], refs).min(axis=1)
              for dom in ("source", "target")}
        assert np.median(nn["target"]) > np.median(nn["source"])


@pytest.mark.parametrize("bad", [dict(d=1), dict(source_spread=0), dict(target_spread=-1.0),
                                 dict(anomaly_offset_angle=0), dict(n_src_train=-1)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SynthConfig(**bad)


def test_config_dict_round_trip():
    cfg = SynthConfig(**SMALL)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        SynthConfig.from_dict({"dims": 3})


@pytest.fixture(scope="module")
def small_ds():
    return generate(SynthConfig(**SMALL, seed=2))


def test_sweep_identities(small_ds):
    k_rows = sweep(small_ds, "knn", [1, 4, 2])
    r_rows = sweep(small_ds, "gwrp", [0.0])
    assert [r.param for r in k_rows] == [1.0, 4.0, 2.0]
    assert k_rows[0].aggregate == r_rows[0].aggregate
    assert k_rows[0].auc_target == r_rows[0].auc_target
    assert sweep(small_ds, "knn", [4]) == [k_rows[1]]
    assert sweep(small_ds, "knn", [1, 4, 2]) == k_rows


def test_sweep_gwrp_one_equals_all_neighbors():
    ds = generate(SynthConfig(d=6, sections=1, n_src_train=20, n_tgt_train=3, n_src_test_normal=5,
                              n_tgt_test_normal=5, n_src_test_anom=5, n_tgt_test_anom=5))
    (g,), (k,) = sweep(ds, "gwrp", [1.0]), sweep(ds, "knn", [22])
    assert (g.aggregate, g.auc_source, g.auc_target) == (k.aggregate, k.auc_source, k.auc_target)


def test_sweep_errors(small_ds):
    with pytest.raises(ValueError):
        sweep(small_ds, "knn", [])
    with pytest.raises(ValueError):
        sweep(small_ds, "lof", [1])
