import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lsrl import semantics as sem


def test_catalog_is_a_bijection():
    assert sem.NUM_CLASSES == 13
    assert [sem.class_id(n) for n in sem.CLASS_NAMES] == list(range(13))
    assert sem.class_id("vehicle") == sem.VEHICLE == 7
    with pytest.raises(KeyError):
        sem.class_id("sky")


def test_validate_grid_rejects_bad_ids():
    with pytest.raises(ValueError):
        sem.validate_grid(np.array([[13]]))
    with pytest.raises(ValueError):
        sem.validate_grid(np.array([[-1, 0]]))
    with pytest.raises(ValueError):
        sem.validate_grid(np.zeros(4, dtype=int))


def test_class_frequencies_examples():
    counts = sem.class_frequencies([np.full((2, 2), 7)])
    assert counts[7] == 4 and counts.sum() == 4
    counts = sem.class_frequencies([np.array([[0]]), np.array([[1]])])
    assert counts.tolist() == [1, 1] + [0] * 11
    with pytest.raises(ValueError):
        sem.class_frequencies([])


def test_class_frequencies_matches_tally_loop():
    rng = np.random.default_rng(0)
    grids = [rng.integers(0, 13, size=(6, 5)) for _ in range(10)]
    tally = [0] * 13
    for g in grids:
        for v in g.ravel():
            tally[int(v)] += 1
    assert sem.class_frequencies(grids).tolist() == tally


def test_class_weight_examples():
    w = sem.compute_class_weights([50, 50] + [0] * 11)
    assert w.tolist() == [0.5, 0.5] + [0.0] * 11
    w = sem.compute_class_weights([900, 100] + [0] * 11)
    np.testing.assert_allclose(w[:2], [0.1, 0.9], atol=1e-12)
    w = sem.compute_class_weights([7] * 13)
    np.testing.assert_allclose(w, 1 / 13, atol=1e-15)
    with pytest.raises(ValueError):
        sem.compute_class_weights([0] * 13)
    with pytest.raises(ValueError):
        sem.compute_class_weights([1] * 12)


@given(arrays(np.int64, 13, elements=st.integers(0, 10**6)).filter(lambda c: c.sum() > 0))
def test_class_weight_invariants(counts):
    w = sem.compute_class_weights(counts)
    assert abs(w.sum() - 1) <= 1e-9
    assert np.all(w[counts == 0] == 0)
    pos = np.flatnonzero(counts)
    prod = w[pos] * counts[pos]
    assert np.all(np.abs(prod - prod[0]) <= 1e-9)
    for a in pos:
        for b in pos:
            if counts[a] < counts[b]:
                assert w[a] > w[b]


@given(arrays(np.int64, (4, 5), elements=st.integers(0, 12)))
def test_one_hot_round_trip(grid):
    vol = sem.one_hot(grid)
    assert vol.shape == (13, 4, 5)
    assert np.all(vol.sum(axis=0) == 1)
    assert np.array_equal(sem.argmax_classes(vol), grid)
    assert np.array_equal(sem.one_hot(sem.argmax_classes(vol)), vol)


def test_one_hot_single_pixel():
    vol = sem.one_hot(np.array([[3]]))
    assert vol[:, 0, 0].tolist() == [0] * 3 + [1] + [0] * 9


@settings(max_examples=30)
@given(st.lists(arrays(np.int64, (3, 3), elements=st.integers(0, 12)), min_size=1, max_size=4),
       st.lists(arrays(np.int64, (3, 3), elements=st.integers(0, 12)), min_size=1, max_size=4))
def test_frequencies_additive(a, b):
    assert np.array_equal(sem.class_frequencies(a + b), sem.class_frequencies(a) + sem.class_frequencies(b))
