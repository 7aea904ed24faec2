import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ldprecover.core import stream_key
from ldprecover.ldp import (
    GRR,
    OLH,
    OUE,
    GrrReports,
    OlhReports,
    OueReports,
    Reports,
    make_protocol,
    olh_hash,
    report_to_json,
    reports_from_json,
)
from oracles import support_count_direct

LN3 = math.log(3)


def test_probabilities():
    grr = GRR(LN3, 4)
    assert grr.p == pytest.approx(1 / 2, abs=1e-15)
    assert grr.q == pytest.approx(1 / 6, abs=1e-15)
    oue = OUE(LN3, 4)
    assert (oue.p, oue.q) == (0.5, pytest.approx(1 / 4, abs=1e-15))
    assert OLH(0.5, 10).g == 3


@given(st.floats(0.01, 8), st.integers(2, 5000))
def test_grr_probability_closure(eps, d):
    grr = GRR(eps, d)
    assert abs(grr.p + (d - 1) * grr.q - 1) < 1e-12


def test_invalid_parameters():
    with pytest.raises(ValueError):
        GRR(0.0, 4)
    with pytest.raises(ValueError):
        GRR(1.0, 1)
    with pytest.raises(ValueError):
        OLH(1.0, 4, g=1)
    with pytest.raises(ValueError, match="unknown protocol"):
        make_protocol("rappor", 1.0, 4)
    with pytest.raises(ValueError):
        make_protocol("grr", 1.0, 4, g=3)
    assert make_protocol("OLH", 1.0, 4, g=5).g == 5


def test_perturb_rejects_out_of_domain():
    with pytest.raises(ValueError, match="out of domain"):
        GRR(1.0, 4).perturb([4], key=1)


def test_supports_examples():
    grr = GRR(1.0, 5)
    r = GrrReports(np.array([3]))
    assert grr.supports(r, 3)[0] and not grr.supports(r, 2)[0]
    oue = OUE(1.0, 4)
    r = reports_from_json([{"oue": "0110"}], oue)
    assert oue.supports(r, 1)[0] and not oue.supports(r, 0)[0]


def test_olh_support_size_is_d_over_g():
    olh = OLH(0.5, 9)
    seeds = np.random.default_rng(1).integers(0, 1 << 64, size=100_000, dtype=np.uint64)
    hashed = olh_hash(seeds[:, None], np.arange(9)[None, :], olh.g)
    sizes = (hashed == 0).sum(axis=1)
    # support size is Binomial(9, 1/3): sd 1.414, so the mean of 1e5 has sd ~0.0045
    assert abs(sizes.mean() - 3) < 5 * math.sqrt(9 * (1 / 3) * (2 / 3) / 1e5)


def test_aggregate_examples():
    grr = GRR(LN3, 4)
    counts = grr.estimate_counts(np.array([30, 0, 0, 0]), 100)
    assert counts[0] == pytest.approx(40, abs=1e-9)
    assert counts[0] / 100 == pytest.approx(0.4, abs=1e-12)
    oue = OUE(LN3, 4)
    assert oue.estimate_counts(np.array([25]), 100)[0] == pytest.approx(0, abs=1e-12)


def test_aggregate_errors():
    grr = GRR(1.0, 4)
    with pytest.raises(ValueError, match="no reports"):
        grr.aggregate(GrrReports(np.zeros(0, dtype=np.int64)))
    with pytest.raises(TypeError):
        grr.aggregate(OueReports(np.zeros((1, 4), dtype=bool)))


def test_grr_unbiased_at_point_three():
    d, n, eps, trials = 5, 200_000, 0.5, 50
    n0 = int(0.3 * n)
    items = np.concatenate([np.zeros(n0, dtype=np.int64), np.arange(n - n0) % (d - 1) + 1])
    grr = GRR(eps, d)
    est = [grr.aggregate(grr.perturb(items, stream_key(t, "u"))).frequencies[0] for t in range(trials)]
    sigma = math.sqrt(grr.count_variance(0.3, n) / n**2)
    assert abs(np.mean(est) - 0.3) < 3 * sigma / math.sqrt(trials)


def test_olh_hash_deterministic_and_in_range():
    a = olh_hash(np.arange(1000, dtype=np.uint64), 7, 5)
    assert np.array_equal(a, olh_hash(np.arange(1000, dtype=np.uint64), 7, 5))
    assert a.min() >= 0 and a.max() < 5
    with pytest.raises(ValueError):
        olh_hash(1, 1, 1)


def test_olh_hash_uniform_chi_square():
    seeds = np.random.default_rng(2).integers(0, 1 << 64, size=100_000, dtype=np.uint64)
    for g in (3, 7):
        observed = np.bincount(olh_hash(seeds, 11, g), minlength=g)
        assert stats.chisquare(observed).pvalue > 0.001


def test_olh_hash_collision_rate():
    g, n = 4, 100_000
    seeds = np.random.default_rng(3).integers(0, 1 << 64, size=n, dtype=np.uint64)
    rate = np.mean(olh_hash(seeds, 2, g) == olh_hash(seeds, 9, g))
    assert abs(rate - 1 / g) < 3 * math.sqrt((1 / g) * (1 - 1 / g) / n)


@pytest.mark.parametrize("name", ["grr", "oue", "olh"])
def test_support_counts_match_direct_oracle(name):
    proto = make_protocol(name, 0.8, 7)
    items = np.random.default_rng(4).integers(0, 7, size=300)
    reports = proto.perturb(items, stream_key(4, name))
    direct = support_count_direct(name, reports, 7, getattr(proto, "g", None), olh_hash)
    assert proto.support_counts(reports).tolist() == direct
    for v in range(7):
        assert int(proto.supports(reports, v).sum()) == direct[v]


@pytest.mark.parametrize("name", ["grr", "oue", "olh"])
@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_aggregation_is_linear(name, data):
    proto = make_protocol(name, 1.0, 6)
    a_items = data.draw(st.lists(st.integers(0, 5), min_size=1, max_size=40))
    b_items = data.draw(st.lists(st.integers(0, 5), min_size=1, max_size=40))
    seed = data.draw(st.integers(0, 2**32))
    a = proto.perturb(a_items, stream_key(seed, "a"))
    b = proto.perturb(b_items, stream_key(seed, "b"))
    whole = proto.aggregate(Reports.concat([a, b]))
    ca, cb = proto.aggregate(a), proto.aggregate(b)
    assert np.array_equal(whole.support_counts, ca.support_counts + cb.support_counts)
    np.testing.assert_allclose(whole.counts, ca.counts + cb.counts, rtol=0, atol=1e-9 * len(a_items + b_items))


@pytest.mark.parametrize("name", ["grr", "oue", "olh"])
def test_perturb_deterministic_and_order_independent(name):
    proto = make_protocol(name, 1.0, 8)
    items = np.random.default_rng(5).integers(0, 8, size=500)
    ids = np.arange(500, dtype=np.uint64)
    key = stream_key(9, "x")
    fwd = proto.perturb(items, key, ids)
    rev = proto.perturb(items[::-1], key, ids[::-1])
    for i in (0, 17, 499):
        assert report_to_json(fwd, i) == report_to_json(rev, 499 - i)
    again = proto.perturb(items, key, ids)
    assert [report_to_json(fwd, i) for i in range(500)] == [report_to_json(again, i) for i in range(500)]


@pytest.mark.parametrize("name", ["grr", "oue", "olh"])
def test_perturb_matches_p_and_q(name):
    proto = make_protocol(name, 1.0, 6)
    n = 60_000
    reports = proto.perturb(np.zeros(n, dtype=np.int64), stream_key(6, name))
    c = proto.support_counts(reports) / n
    tol = 5 * math.sqrt(0.25 / n)
    assert abs(c[0] - proto.p) < tol
    assert np.all(np.abs(c[1:] - proto.q) < tol)


def test_encode_is_unperturbed():
    rng = np.random.default_rng(0)
    for name in ("grr", "oue", "olh"):
        proto = make_protocol(name, 0.5, 10)
        r = proto.encode(np.array([4, 4, 4]), rng)
        assert proto.supports(r, 4).all()
    oue = OUE(0.5, 4)
    assert report_to_json(oue.encode([2]), 0) == {"oue": "0010"}


def test_json_round_trip():
    rng = np.random.default_rng(8)
    for name in ("grr", "oue", "olh"):
        proto = make_protocol(name, 1.0, 5)
        r = proto.perturb(rng.integers(0, 5, size=20), stream_key(1, name))
        objs = [report_to_json(r, i) for i in range(len(r))]
        back = reports_from_json(objs, proto)
        assert [report_to_json(back, i) for i in range(len(back))] == objs
    with pytest.raises(ValueError):
        reports_from_json([{"oue": "01"}], OUE(1.0, 5))
    with pytest.raises(ValueError):
        reports_from_json([{"grr": 1}], OLH(1.0, 5))
    olh = reports_from_json([{"olh": {"seed": 5, "val": 1}}], OLH(1.0, 5))
    assert isinstance(olh, OlhReports)


def test_concat_rejects_mixed_protocols():
    with pytest.raises(TypeError):
        Reports.concat([GrrReports(np.array([0])), OueReports(np.zeros((1, 2), dtype=bool))])


def test_frequency_variance_formula():
    grr = GRR(0.5, 10)
    p, q, n = grr.p, grr.q, 1000
    expected = q * (1 - q) / (n * (p - q) ** 2) + 0.2 * (1 - p - q) / (n * (p - q))
    assert grr.frequency_variance(0.2, n) == pytest.approx(expected, rel=1e-12)
    # for GRR the count variance over n^2 is the same expression
    assert grr.count_variance(0.2, n) / n**2 == pytest.approx(expected, rel=1e-12)
