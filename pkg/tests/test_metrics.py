import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emcwm import ari, cross_tab


def pair_count_ari(truth, estimated):
    """O(N^2) oracle: classify every pair as agreeing or not in each partition."""
    t = np.asarray(truth)
    e = np.asarray(estimated)
    n = len(t)
    a = b = c = d = 0  # together/together, together/apart, apart/together, apart/apart
    for i in range(n):
        for j in range(i + 1, n):
            st_ = t[i] == t[j]
            se = e[i] == e[j]
            if st_ and se:
                a += 1
            elif st_ and not se:
                b += 1
            elif not st_ and se:
                c += 1
            else:
                d += 1
    total = a + b + c + d
    expected = (a + b) * (a + c) / total
    max_index = 0.5 * ((a + b) + (a + c))
    if max_index == expected:
        return 1.0
    return (a - expected) / (max_index - expected)


# confusion matrices reported for the benchmark classifications
IRIS_CONFUSION = np.array([[50, 0, 0], [0, 45, 5], [0, 0, 50]])
CRABS_CONFUSION = np.array(
    [[39, 11, 0, 0], [0, 50, 0, 0], [0, 0, 50, 0], [0, 0, 4, 46]]
)


def labels_from_confusion(counts):
    truth, est = [], []
    for r in range(counts.shape[0]):
        for c in range(counts.shape[1]):
            truth.extend([r] * counts[r, c])
            est.extend([c] * counts[r, c])
    return np.array(truth), np.array(est)


# ---------------------------------------------------------------------------
# cross_tab


def test_cross_tab_identical_binary():
    tab = cross_tab([0, 1, 1, 0], [0, 1, 1, 0])
    np.testing.assert_array_equal(tab.counts, [[2, 0], [0, 2]])


def test_cross_tab_counts_and_marginals(rng):
    t = rng.integers(0, 3, size=200)
    e = rng.integers(0, 4, size=200)
    tab = cross_tab(t, e)
    assert tab.counts.sum() == 200
    np.testing.assert_array_equal(tab.counts.sum(axis=0),
                                  [np.sum(e == c) for c in tab.cols])
    np.testing.assert_array_equal(tab.counts.sum(axis=1),
                                  [np.sum(t == r) for r in tab.rows])


def test_cross_tab_string_labels():
    tab = cross_tab(["a", "b", "a"], [1, 2, 1])
    assert tab.rows == ("a", "b")
    np.testing.assert_array_equal(tab.counts, [[2, 0], [0, 1]])


def test_cross_tab_length_mismatch():
    with pytest.raises(ValueError):
        cross_tab([0, 1], [0, 1, 2])


# ---------------------------------------------------------------------------
# adjusted Rand index


def test_ari_identical_up_to_relabeling(rng):
    labels = rng.integers(0, 4, size=60)
    relabeled = (labels + 2) % 4
    assert ari(labels, relabeled) == 1.0


def test_ari_published_confusions():
    t, e = labels_from_confusion(IRIS_CONFUSION)
    assert round(ari(t, e), 2) == 0.90
    t, e = labels_from_confusion(CRABS_CONFUSION)
    assert round(ari(t, e), 2) == 0.82


def test_ari_matches_pair_oracle_1000_random_pairs(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 31))
        t = rng.integers(0, rng.integers(1, 6), size=n)
        e = rng.integers(0, rng.integers(1, 6), size=n)
        assert abs(ari(t, e) - pair_count_ari(t, e)) <= 1e-12


def test_ari_symmetry_and_permutation(rng):
    t = rng.integers(0, 3, size=40)
    e = rng.integers(0, 3, size=40)
    assert ari(t, e) == pytest.approx(ari(e, t), abs=1e-15)
    perm = np.array([2, 0, 1])
    assert ari(t, perm[e]) == pytest.approx(ari(t, e), abs=1e-15)


def test_ari_singletons_vs_single_class():
    t = np.zeros(6, dtype=int)
    e = np.arange(6)
    assert ari(t, e) == pytest.approx(pair_count_ari(t, e))
    assert ari(t, e) == 0.0


def test_ari_degenerate_convention():
    assert ari([0, 0, 0], [1, 1, 1]) == 1.0


def test_ari_errors():
    with pytest.raises(ValueError):
        ari([0], [0])
    with pytest.raises(ValueError):
        ari([0, 1], [0, 1, 2])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 4), min_size=2, max_size=25),
    st.data(),
)
def test_ari_pair_oracle_property(truth, data):
    est = data.draw(
        st.lists(st.integers(0, 4), min_size=len(truth), max_size=len(truth))
    )
    assert abs(ari(truth, est) - pair_count_ari(truth, est)) <= 1e-12
