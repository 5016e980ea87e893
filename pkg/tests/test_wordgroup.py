import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pqlab import wordgroup as wg

letters2 = st.sampled_from([1, -1, 2, -2])
raw_words = st.lists(letters2, max_size=20)


def reduce_by_scanning(w):
    """Oracle: repeatedly delete the first adjacent inverse pair."""
    w = list(w)
    changed = True
    while changed:
        changed = False
        for i in range(len(w) - 1):
            if w[i] == -w[i + 1]:
                del w[i:i + 2]
                changed = True
                break
    return tuple(w)


def test_parse_and_format():
    assert wg.parse("aB") == (1, -2)
    assert wg.fmt((1, -2)) == "aB"
    assert wg.fmt(()) == "1"
    assert wg.parse("abBa") == (1, 1)
    with pytest.raises(ValueError):
        wg.parse("a?")


def test_reduce_examples():
    assert wg.reduce((1, -1)) == ()
    assert wg.reduce((1, 2, -2, 1)) == (1, 1)
    with pytest.raises(ValueError):
        wg.reduce((0,))
    with pytest.raises(ValueError):
        wg.reduce((3,), k=2)


@given(raw_words)
def test_reduce_matches_scan_oracle(w):
    r = wg.reduce(w)
    assert r == reduce_by_scanning(w)
    assert wg.is_reduced(r)
    assert wg.reduce(r) == r


def test_reduce_random_20_letters(rng):
    for _ in range(200):
        w = tuple(int(x) for x in rng.choice([1, -1, 2, -2], 20))
        assert wg.reduce(w) == reduce_by_scanning(w)


def test_multiply_inverse_examples():
    assert wg.multiply((1,), (-1,)) == ()
    assert wg.inverse((1, 2)) == (-2, -1)


@given(raw_words, raw_words, raw_words)
def test_group_laws(a, b, c):
    a, b, c = wg.reduce(a), wg.reduce(b), wg.reduce(c)
    assert wg.multiply(a, wg.inverse(a)) == ()
    assert wg.multiply(wg.multiply(a, b), c) == wg.multiply(a, wg.multiply(b, c))
    assert wg.multiply(a, b) == wg.reduce(a + b)
    assert len(wg.multiply(a, b)) <= len(a) + len(b)


def test_sphere_and_ball_counts():
    assert len(list(wg.sphere(2, 1))) == 4
    s3 = list(wg.sphere(2, 3))
    assert len(s3) == 36 and len(set(s3)) == 36
    # exhaustive oracle: all letter strings of length 3 that are reduced
    brute = [w for w in itertools.product([1, -1, 2, -2], repeat=3) if wg.is_reduced(w)]
    assert sorted(brute) == sorted(s3)
    assert len(list(wg.ball(2, 2))) == 17
    assert list(wg.sphere(2, 0)) == [()]
    with pytest.raises(ValueError):
        list(wg.sphere(2, -1))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sphere_sizes_closed_form(k):
    for L in range(0, 13 if k < 3 else 9):
        n = wg.sphere_size(k, L)
        if L <= 7:
            assert sum(1 for _ in wg.sphere(k, L)) == n
        assert wg.sphere_array(k, L).shape[0] == n


def test_sphere_array_matches_iterator():
    for L in range(0, 6):
        A = wg.sphere_array(2, L)
        assert [tuple(int(x) for x in r) for r in A] == list(wg.sphere(2, L))


def test_cyclic_word_examples():
    assert not wg.CyclicWord.of((1, 1)).primitive
    ab, ba = wg.CyclicWord.of((1, 2)), wg.CyclicWord.of((2, 1))
    assert ab.primitive and ab == ba
    assert wg.CyclicWord.of((-2, 1, 2, 2)) == wg.CyclicWord.of((1, 2))
    with pytest.raises(ValueError):
        wg.CyclicWord.of((1, -1))


def test_canonical_rotation_invariance_exhaustive():
    for n in range(1, 9):
        for w in wg.sphere(2, n):
            if not wg.is_cyclically_reduced(w):
                continue
            c = wg.canonical_rotation(w)
            for r in wg.rotations(w):
                assert wg.canonical_rotation(r) == c


def _proper_power_brute(w):
    n = len(w)
    return any(n % s == 0 and w == w[:s] * (n // s) for s in range(1, n))


def test_primitivity_matches_divisor_brute_force():
    for n in range(1, 9):
        for w in wg.sphere(2, n):
            assert wg.is_primitive(w) == (not _proper_power_brute(w))


def _conjugacy_brute(k, L, conj_len):
    """Partition the nontrivial words of ball(L) under conjugation by short words."""
    words = [w for w in wg.ball(k, L) if w]
    conj = list(wg.ball(k, conj_len))
    classes = []
    seen = set()
    for w in words:
        if w in seen:
            continue
        orbit = {wg.multiply(wg.multiply(c, w), wg.inverse(c)) for c in conj}
        orbit = {x for x in orbit if len(x) <= L}
        # only count classes whose cyclically reduced length is <= L
        seen |= orbit
        classes.append(orbit)
    return classes


def test_conjugacy_class_count_brute_force():
    ours = list(wg.conjugacy_classes(2, 2))
    brute = [c for c in _conjugacy_brute(2, 2, 3)]
    # representatives of minimal length identify each class
    brute_min = {min((x for x in c), key=lambda x: (len(x), x)) for c in brute}
    brute_min = {wg.canonical_rotation(wg.cyclic_reduce(x)) for x in brute_min}
    assert len(ours) == 12
    assert {c.letters for c in ours} == brute_min


def test_conjugacy_classes_inverse_not_identified():
    cls = {c.letters for c in wg.conjugacy_classes(2, 1)}
    assert cls == {(1,), (-1,), (2,), (-2,)}
    with pytest.raises(ValueError):
        list(wg.conjugacy_classes(2, 0))


def test_fixed_point_symbol():
    assert wg.fixed_point_symbol((1,), 3) == (1, 1, 1)
    assert wg.fixed_point_symbol((1, 2), 3) == (1, 2, 1)
    for c in wg.conjugacy_classes(2, 5):
        s = wg.fixed_point_symbol(c, 17)
        assert len(s) == 17 and wg.is_reduced(s)


def test_random_words_are_reduced(rng):
    for _ in range(200):
        w = wg.random_word(rng, 3, 0, 10)
        assert wg.is_reduced(w) and len(w) <= 10
        c = wg.random_cyclic_word(rng, 2, 2, 6)
        assert wg.is_cyclically_reduced(c) and wg.is_primitive(c)
