import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from flipchain._engine import hash_find, pair_key
from flipchain.oracle import labelled_triangulations
from flipchain.triangulation import (Triangulation, TriangulationError, canonical_code,
                                     degree_sequence, deserialize, flip, is_flippable,
                                     make_christmas_tree, make_tetrahedron, opposite_vertices,
                                     serialize, validate)

from conftest import random_walk


def degs(T):
    return tuple(d for _, d in degree_sequence(T))


# builders

def test_tetrahedron():
    T = make_tetrahedron()
    assert T.link_set() == {(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)}
    assert degs(T) == (3, 3, 3, 3)
    assert T.num_links == 6
    assert len(T.triangles()) == 4
    assert validate(T) == []


def test_christmas_tree_7_degrees():
    T = make_christmas_tree(7)
    assert degs(T) == (6, 6, 3, 4, 4, 4, 3)
    assert sum(degs(T)) == 2 * (3 * 7 - 6)


@pytest.mark.parametrize("n", [4, 5, 6, 10, 100])
def test_christmas_tree_valid(n):
    T = make_christmas_tree(n)
    assert validate(T) == []
    d = degs(T)
    assert d[0] == d[1] == n - 1
    assert sum(d) == 6 * n - 12


def test_christmas_tree_small_n_rejected():
    with pytest.raises(TriangulationError):
        make_christmas_tree(3)


def test_christmas_tree_4_is_tetrahedron():
    assert make_christmas_tree(4) == make_tetrahedron()
    assert canonical_code(make_christmas_tree(4)) == canonical_code(make_tetrahedron())


# opposite vertices and flips

def test_opposite_vertices(tree7):
    assert sorted(opposite_vertices(make_tetrahedron(), make_tetrahedron().link(1, 2))) == [3, 4]
    assert sorted(opposite_vertices(tree7, tree7.link(1, 4))) == [3, 5]
    assert sorted(opposite_vertices(tree7, tree7.link(2, 5))) == [4, 6]


def test_tetrahedron_frozen():
    T = make_tetrahedron()
    for link in T.links():
        assert not is_flippable(T, link)
        assert flip(T, link).rejected
    assert T == make_tetrahedron()


@pytest.mark.parametrize("n", [6, 7, 20])
def test_hub_link_flippable(n):
    T = make_christmas_tree(n)
    assert is_flippable(T, T.link(1, 4))


def test_flip_and_back(tree7):
    out = flip(tree7, tree7.link(1, 4))
    assert out.flipped and out.removed == (1, 4) and out.added == (3, 5)
    assert degs(tree7) == (5, 6, 4, 3, 5, 4, 3)
    assert validate(tree7) == []
    back = flip(tree7, tree7.link(3, 5))
    assert back.added == (1, 4)
    assert tree7 == make_christmas_tree(7)


def test_stale_handle(tree7):
    h = tree7.link(1, 4)
    flip(tree7, h)
    with pytest.raises(TriangulationError):
        opposite_vertices(tree7, h)
    with pytest.raises(TriangulationError):
        is_flippable(tree7, h)


def test_degree_three_lock_and_injectivity():
    T = random_walk(make_christmas_tree(12), 300, seed=5)
    succ = set()
    for link in T.links():
        a, b = T.endpoints(link)
        if T.degree(a) == 3 or T.degree(b) == 3:
            assert not is_flippable(T, link)
        if is_flippable(T, link):
            U = T.copy()
            before = degs(U)
            flip(U, U.link(a, b))
            changed = [x - y for x, y in zip(degs(U), before) if x != y]
            assert sorted(changed) == [-1, -1, 1, 1]
            succ.add(U.link_set())
    assert len(succ) == sum(is_flippable(T, l) for l in T.links())


def test_random_flips_stay_valid():
    T = make_christmas_tree(30)
    rng = np.random.default_rng(1)
    for _ in range(2000):
        pairs = sorted(T.link_set())
        a, b = pairs[rng.integers(len(pairs))]
        link = T.link(a, b)
        was = T.link_set()
        out = flip(T, link)
        if out.rejected:
            assert T.link_set() == was
        else:
            flip(T, T.link(*out.added))
            assert T.link_set() == was
            flip(T, T.link(a, b))
    assert validate(T) == []


# validate fault injection

def test_validate_corrupt_adjacency():
    T = make_christmas_tree(10)
    i = hash_find(T.hkeys, pair_key(1, 4, T.n))
    T.hvals[i] = T.hvals[hash_find(T.hkeys, pair_key(1, 5, T.n))]
    problems = validate(T)
    assert len(problems) == 1
    assert "(1, 4)" in problems[0]


def test_validate_corrupt_opposite():
    T = make_christmas_tree(10)
    s = T.link(1, 4).slot
    T.opp[s, 0] = 9
    assert validate(T)


def test_validate_corrupt_degree_cache():
    T = make_christmas_tree(10)
    T.meta[1] += 2
    assert any("square" in p or "sumsq" in p for p in validate(T))


# canonical form

def test_canonical_relabel_small():
    T = random_walk(make_christmas_tree(9), 100, seed=2)
    perm = [0, 3, 1, 2, 9, 8, 7, 6, 5, 4]
    assert canonical_code(T.relabel(perm)) == canonical_code(T)


@settings(max_examples=30, deadline=None)
@given(hs.integers(6, 14), hs.integers(0, 10**6), hs.permutations(range(14)))
def test_canonical_relabel_property(n, seed, perm14):
    T = random_walk(make_christmas_tree(n), 5 * n, seed)
    sub = [p for p in perm14 if p < n]
    perm = [0] + [p + 1 for p in sub]
    assert canonical_code(T.relabel(perm)) == canonical_code(T)


def test_canonical_distinguishes():
    # octahedron (all degree 4) vs n=6 tree (degrees 5,5,3,4,4,3)
    a = make_christmas_tree(6)
    octa = Triangulation.from_triangles(6, [(1, 2, 3), (1, 3, 4), (1, 4, 5), (1, 2, 5),
                                            (6, 2, 3), (6, 3, 4), (6, 4, 5), (6, 2, 5)])
    assert canonical_code(a) != canonical_code(octa)


def test_canonical_classes_n6_oracle():
    states = labelled_triangulations(6)
    assert len(states) == 195
    codes = {canonical_code(Triangulation.from_triangles(6, sorted(s))) for s in states}
    assert len(codes) == 2


# serialization

def test_serialize_roundtrip():
    T = random_walk(make_christmas_tree(50), 500, seed=3)
    text = serialize(T)
    assert text.splitlines()[0] == "tri n=50 f=96"
    lines = text.splitlines()[1:]
    assert lines == sorted(lines, key=lambda s: tuple(map(int, s.split())))
    U = deserialize(text)
    assert U.link_set() == T.link_set()
    assert sorted(U.triangles()) == sorted(T.triangles())
    assert validate(U) == []


def test_deserialize_link_in_three_triangles():
    text = serialize(make_christmas_tree(6)).splitlines()
    text[-1] = "1 2 4"
    with pytest.raises(TriangulationError, match="line"):
        deserialize("\n".join(text))


@pytest.mark.parametrize("bad, where", [
    ("", "line 1"),
    ("tri n=4\n1 2 3", "line 1"),
    ("tri n=4 f=4\n1 2 3\n1 2 4\n1 3 x\n2 3 4", "line 4"),
    ("tri n=4 f=4\n1 2 3\n1 2 4\n1 3 4", "line"),
    ("tri n=4 f=4\n1 2 3\n1 2 4\n1 3 4\n2 3 3", "line 5"),
])
def test_deserialize_errors(bad, where):
    with pytest.raises(TriangulationError, match=where):
        deserialize(bad)


def test_from_triangles_rejects_non_sphere():
    # two disjoint tetrahedra have the right counts for n=8 but are not a sphere
    tris = [tuple(sorted(t)) for base in (1, 5)
            for t in itertools.combinations(range(base, base + 4), 3)]
    tris = tris + [(1, 2, 5), (1, 2, 6), (3, 4, 5), (3, 4, 6)]
    with pytest.raises(TriangulationError):
        Triangulation.from_triangles(8, tris[:12])
