import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldprecover.core import (
    Dataset,
    ItemDomain,
    load_dataset,
    make_rng,
    save_dataset,
    stream_key,
    synthesize_zipf,
    true_frequencies,
    user_uniforms,
    zipf_pmf,
)
from oracles import histogram


def test_domain_rejects_small_sizes():
    with pytest.raises(ValueError):
        ItemDomain(1)
    assert len(ItemDomain(2)) == 2


def test_true_frequencies_trivial():
    d2 = ItemDomain(2)
    np.testing.assert_array_equal(true_frequencies(Dataset(d2, [0, 0, 1, 1])), [0.5, 0.5])
    np.testing.assert_array_equal(true_frequencies(Dataset(ItemDomain(3), [2])), [0, 0, 1])


def test_empty_dataset_rejected():
    with pytest.raises(ValueError, match="empty dataset"):
        Dataset(ItemDomain(3), np.array([], dtype=int))


def test_out_of_domain_rejected():
    with pytest.raises(ValueError, match="out of domain"):
        Dataset(ItemDomain(3), [0, 3])


def test_true_frequencies_match_histogram_oracle():
    data = synthesize_zipf(ItemDomain(10), 1000, 1.1, seed=42)
    assert true_frequencies(data).tolist() == histogram(data.values.tolist(), 10)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=200))
def test_true_frequencies_is_distribution(values):
    f = true_frequencies(Dataset(ItemDomain(7), values))
    assert f.min() >= 0
    assert abs(f.sum() - 1) < 1e-9


def test_zipf_scales_from_evaluation():
    ipums = synthesize_zipf(102, 389894, 1.1, seed=1)
    assert (ipums.d, ipums.n) == (102, 389894)
    fire = synthesize_zipf(490, 667574, 1.1, seed=1)
    assert (fire.d, fire.n) == (490, 667574)


def test_zipf_large_exponent_concentrates_on_first_item():
    # mass of item 0 under s=50 is 1 / sum_k k^-50, i.e. 1 - 2^-50 - ...
    assert zipf_pmf(10, 50)[0] > 0.999999
    data = synthesize_zipf(10, 10000, 50, seed=3)
    assert np.mean(data.values == 0) >= 0.99


def test_zipf_is_deterministic():
    a = synthesize_zipf(20, 5000, 1.3, seed=9)
    b = synthesize_zipf(20, 5000, 1.3, seed=9)
    c = synthesize_zipf(20, 5000, 1.3, seed=10)
    assert a == b
    assert a != c


def test_zipf_rejects_bad_exponent():
    with pytest.raises(ValueError):
        synthesize_zipf(10, 10, 0.0)


def test_load_one_per_line(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("0\n0\n1\n")
    data = load_dataset(p)
    assert data.d == 2
    assert data.values.tolist() == [0, 0, 1]


def test_load_counted_form(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("item,count\n0,3\n1,1\n")
    assert load_dataset(p).values.tolist() == [0, 0, 0, 1]


def test_load_skips_comments_and_honours_hint(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("# a comment\n1\n\n2\n")
    data = load_dataset(p, domain_size=5)
    assert data.d == 5
    assert data.values.tolist() == [1, 2]


def test_load_errors(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_dataset(empty)

    bad = tmp_path / "bad.csv"
    bad.write_text("item,count\n0,3\n1,x\n")
    with pytest.raises(ValueError, match=r":3:"):
        load_dataset(bad)

    big = tmp_path / "big.txt"
    big.write_text("0\n7\n")
    with pytest.raises(ValueError, match="item out of domain"):
        load_dataset(big, domain_size=5)


def test_load_maps_labels_by_first_appearance(tmp_path):
    p = tmp_path / "labels.txt"
    p.write_text("paris\nrome\nparis\noslo\n")
    data = load_dataset(p)
    assert data.labels == ("paris", "rome", "oslo")
    assert data.values.tolist() == [0, 1, 0, 2]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=50), st.booleans())
def test_save_load_round_trip(tmp_path_factory, values, counted):
    data = Dataset(ItemDomain(12), values)
    path = tmp_path_factory.mktemp("rt") / "data.txt"
    save_dataset(data, path, counted=counted)
    back = load_dataset(path)
    if counted:
        assert back == Dataset(ItemDomain(12), sorted(values))
    else:
        assert back == data


def test_user_streams_are_order_independent():
    key = stream_key(5, "genuine")
    ids = np.arange(100, dtype=np.uint64)
    forward = user_uniforms(key, ids, 3)
    backward = user_uniforms(key, ids[::-1], 3)[::-1]
    np.testing.assert_array_equal(forward, backward)
    np.testing.assert_array_equal(user_uniforms(key, ids[40:41], 3), forward[40:41])


def test_streams_differ_by_seed_and_tag():
    ids = np.arange(1000, dtype=np.uint64)
    a = user_uniforms(stream_key(1, "x"), ids, 1)
    assert not np.array_equal(a, user_uniforms(stream_key(2, "x"), ids, 1))
    assert not np.array_equal(a, user_uniforms(stream_key(1, "y"), ids, 1))


def test_user_uniforms_look_uniform():
    u = user_uniforms(stream_key(0, "t"), np.arange(200000, dtype=np.uint64), 2)
    assert u.min() >= 0 and u.max() < 1
    np.testing.assert_allclose(u.mean(axis=0), 0.5, atol=0.003)
    # adjacent columns must not be correlated
    assert abs(np.corrcoef(u[:, 0], u[:, 1])[0, 1]) < 0.01


def test_make_rng_reproducible():
    assert make_rng(3, "a").random() == make_rng(3, "a").random()
    assert make_rng(3, "a").random() != make_rng(3, "b").random()
