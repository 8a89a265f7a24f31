"""Combinatorial triangulations of the sphere with O(1) flips.

A :class:`Triangulation` lives on the labelled node set ``1..n`` and has exactly
``3n-6`` link slots.  Each slot remembers its two endpoints and the two vertices
opposite it, which is all a flip needs; the triangle set is implied by those
records.  A flip re-keys its slot in place and bumps the slot generation, so a
:class:`Link` handle taken before the flip becomes stale.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from . import _engine as eng


class TriangulationError(ValueError):
    """Raised for malformed input, illegal use or stale link handles."""


class Link(NamedTuple):
    slot: int
    gen: int


@dataclass(frozen=True)
class FlipOutcome:
    """Result of a flip attempt; ``removed``/``added`` are ``None`` when rejected."""

    removed: tuple[int, int] | None = None
    added: tuple[int, int] | None = None

    @property
    def flipped(self) -> bool:
        return self.added is not None

    @property
    def rejected(self) -> bool:
        return self.added is None


REJECTED = FlipOutcome()


def _pair(a, b):
    a, b = int(a), int(b)
    return (a, b) if a < b else (b, a)


class Triangulation:
    """Mutable sphere triangulation on nodes ``1..n``.

    Build one with :func:`make_tetrahedron`, :func:`make_christmas_tree`,
    :meth:`from_triangles` or :func:`deserialize`.
    """

    def __init__(self, n, ends, opp):
        n = int(n)
        if n < 4:
            raise TriangulationError(f"need at least 4 nodes, got {n}")
        m = 3 * n - 6
        ends = np.ascontiguousarray(ends, dtype=np.int32).reshape(-1, 2)
        opp = np.ascontiguousarray(opp, dtype=np.int32).reshape(-1, 2)
        if ends.shape[0] != m or opp.shape[0] != m:
            raise TriangulationError(f"expected {m} links for n={n}, got {ends.shape[0]}")
        self.n = n
        self.ends = ends
        self.opp = opp
        self.gen = np.zeros(m, dtype=np.int64)
        self.linkpos = np.zeros((m, 2), dtype=np.int32)

        hcap = 16
        while hcap < 4 * m:
            hcap *= 2
        self.hkeys = np.full(hcap, eng.EMPTY, dtype=np.int64)
        self.hvals = np.full(hcap, eng.EMPTY, dtype=np.int32)

        deg = np.bincount(ends.ravel(), minlength=n + 1)
        if deg.shape[0] > n + 1 or ends.min() < 1:
            raise TriangulationError("link endpoint outside 1..n")
        self.cap = np.maximum(8, 2 * deg).astype(np.int64)
        self.cap[0] = 0
        self.start = np.zeros(n + 1, dtype=np.int64)
        self.start[1:] = np.cumsum(self.cap)[:-1]
        self.size = np.zeros(n + 1, dtype=np.int64)
        top = int(self.cap.sum())
        self.pool = np.full(2 * top, -1, dtype=np.int32)
        self.meta = np.array([top, int((deg ** 2).sum())], dtype=np.int64)

        for slot in range(m):
            a, b = int(ends[slot, 0]), int(ends[slot, 1])
            if a == b:
                raise TriangulationError(f"loop at node {a}")
            key = eng.pair_key(a, b, n)
            if eng.hash_find(self.hkeys, key) >= 0:
                raise TriangulationError(f"parallel link {_pair(a, b)}")
            eng.hash_put(self.hkeys, self.hvals, key, slot)
            for side, v in enumerate((a, b)):
                p = self.size[v]
                self.pool[self.start[v] + p] = slot
                self.linkpos[slot, side] = p
                self.size[v] = p + 1

    # ------------------------------------------------------------------
    # construction

    @classmethod
    def from_triangles(cls, n, triangles):
        """Build from ``2n-4`` node triples; every link must lie in two of them."""
        apex: dict[tuple[int, int], list[int]] = {}
        for tri in triangles:
            a, b, c = (int(x) for x in tri)
            if len({a, b, c}) != 3:
                raise TriangulationError(f"degenerate triangle {tri}")
            for x, y, z in ((a, b, c), (a, c, b), (b, c, a)):
                apex.setdefault(_pair(x, y), []).append(z)
        bad = {k: v for k, v in apex.items() if len(v) != 2}
        if bad:
            k = min(bad)
            raise TriangulationError(f"link {k} lies in {len(bad[k])} triangles")
        links = sorted(apex)
        ends = np.array(links, dtype=np.int64).reshape(-1, 2)
        opp = np.array([apex[k] for k in links], dtype=np.int64).reshape(-1, 2)
        T = cls(n, ends, opp)
        problems = validate(T)
        if problems:
            raise TriangulationError("; ".join(problems))
        return T

    def copy(self) -> "Triangulation":
        new = object.__new__(Triangulation)
        new.n = self.n
        for name in ("ends", "opp", "gen", "linkpos", "hkeys", "hvals",
                     "cap", "start", "size", "pool", "meta"):
            setattr(new, name, getattr(self, name).copy())
        return new

    def relabel(self, perm) -> "Triangulation":
        """Return a copy with node ``v`` renamed ``perm[v]`` (mapping or sequence indexed from 1)."""
        tris = [tuple(perm[v] for v in t) for t in self.triangles()]
        return Triangulation.from_triangles(self.n, tris)

    # ------------------------------------------------------------------
    # queries

    @property
    def num_links(self) -> int:
        return self.ends.shape[0]

    def degree(self, v) -> int:
        return int(self.size[v])

    def degrees(self) -> np.ndarray:
        """Degrees indexed by node; entry 0 is unused."""
        return self.size.copy()

    def has_link(self, a, b) -> bool:
        return eng.hash_find(self.hkeys, eng.pair_key(int(a), int(b), self.n)) >= 0

    def link(self, a, b) -> Link:
        slot = eng.hash_get(self.hkeys, self.hvals, eng.pair_key(int(a), int(b), self.n))
        if slot < 0:
            raise TriangulationError(f"no link {_pair(a, b)}")
        return Link(int(slot), int(self.gen[slot]))

    def links(self) -> list[Link]:
        return [Link(s, int(g)) for s, g in enumerate(self.gen)]

    def _slot(self, link) -> int:
        if isinstance(link, Link):
            slot, gen = link
            if not 0 <= slot < self.num_links or self.gen[slot] != gen:
                raise TriangulationError(f"stale link handle {link}")
            return slot
        if isinstance(link, tuple) and len(link) == 2:
            return self.link(*link).slot
        raise TriangulationError(f"not a link handle: {link!r}")

    def endpoints(self, link) -> tuple[int, int]:
        s = self._slot(link)
        return _pair(self.ends[s, 0], self.ends[s, 1])

    def link_set(self) -> frozenset:
        return frozenset(_pair(a, b) for a, b in self.ends)

    def triangles(self) -> list[tuple[int, int, int]]:
        tris = set()
        for (a, b), (c, d) in zip(self.ends.tolist(), self.opp.tolist()):
            tris.add(tuple(sorted((a, b, c))))
            tris.add(tuple(sorted((a, b, d))))
        return sorted(tris)

    def incident_links(self, v) -> list[Link]:
        s = self.start[v]
        return [Link(int(x), int(self.gen[x])) for x in self.pool[s:s + self.size[v]]]

    def neighbors(self, v) -> list[int]:
        out = []
        for link in self.incident_links(v):
            a, b = self.ends[link.slot]
            out.append(int(b if a == v else a))
        return out

    def sum_squared_degrees(self) -> int:
        """Incrementally maintained Σ d_i²."""
        return int(self.meta[eng.META_SUMSQ])

    def __eq__(self, other):
        if not isinstance(other, Triangulation):
            return NotImplemented
        return self.n == other.n and self.link_set() == other.link_set()

    __hash__ = None

    def __repr__(self):
        return f"Triangulation(n={self.n})"


# ----------------------------------------------------------------------
# builders


def make_tetrahedron() -> Triangulation:
    return Triangulation.from_triangles(4, [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)])


def christmas_tree_triangles(n):
    tris = [(1, 2, 3), (1, 2, n)]
    for i in range(3, n):
        tris.append((1, i, i + 1))
        tris.append((2, i, i + 1))
    return tris


def make_christmas_tree(n) -> Triangulation:
    """Double wheel: hubs 1 and 2 joined, with the path 3..n between them.

    Degrees are ``n-1`` at the hubs, 3 at nodes 3 and ``n``, 4 elsewhere.
    """
    if n < 4:
        raise TriangulationError(f"christmas tree needs n >= 4, got {n}")
    return Triangulation.from_triangles(n, christmas_tree_triangles(n))


# ----------------------------------------------------------------------
# flip mechanics


def opposite_vertices(T: Triangulation, link) -> tuple[int, int]:
    s = T._slot(link)
    return _pair(T.opp[s, 0], T.opp[s, 1])


def is_flippable(T: Triangulation, link) -> bool:
    c, d = opposite_vertices(T, link)
    return not T.has_link(c, d)


def flip(T: Triangulation, link) -> FlipOutcome:
    """Replace ``link`` by its complementary link, unless that one already exists."""
    s = T._slot(link)
    removed = _pair(T.ends[s, 0], T.ends[s, 1])
    if eng.complement_present(T.n, s, T.opp, T.hkeys):
        return REJECTED
    if eng.needs_compact(T.pool, T.size, T.cap, T.meta, T.opp[s, 0], T.opp[s, 1]):
        T.pool = eng.compact(T.pool, T.start, T.size, T.cap, T.meta)
    eng.flip_kernel(T.n, s, T.ends, T.opp, T.linkpos, T.gen, T.hkeys, T.hvals,
                    T.start, T.size, T.cap, T.pool, T.meta)
    return FlipOutcome(removed, _pair(T.ends[s, 0], T.ends[s, 1]))


def degree_sequence(T: Triangulation) -> list[tuple[int, int]]:
    return [(v, int(T.size[v])) for v in range(1, T.n + 1)]


# ----------------------------------------------------------------------
# validation


def validate(T: Triangulation) -> list[str]:
    """Full consistency check; returns human-readable violations (empty if sound)."""
    n, m = T.n, T.num_links
    out = []
    if m != 3 * n - 6:
        out.append(f"euler: {m} links, expected {3 * n - 6}")

    table: dict[tuple[int, int], int] = {}
    for s, (a, b) in enumerate(T.ends.tolist()):
        if not (1 <= a <= n and 1 <= b <= n):
            out.append(f"range: link slot {s} has endpoint outside 1..{n}")
            continue
        if a == b:
            out.append(f"simple: link slot {s} is a loop at {a}")
            continue
        p = _pair(a, b)
        if p in table:
            out.append(f"simple: links {table[p]} and {s} both join {p}")
        table[p] = s

    # adjacency hash vs link table
    live = int((T.hkeys != eng.EMPTY).sum())
    if live != m:
        out.append(f"adjacency: hash holds {live} entries for {m} links")
    for p, s in table.items():
        got = eng.hash_get(T.hkeys, T.hvals, eng.pair_key(p[0], p[1], n))
        if got != s:
            out.append(f"adjacency: lookup of {p} gives slot {got}, link table says {s}")

    # incidence lists vs link table
    # plain lists: element access on numpy arrays dominates otherwise
    ends, opp, linkpos = T.ends.tolist(), T.opp.tolist(), T.linkpos.tolist()
    pool, start, size = T.pool.tolist(), T.start.tolist(), T.size.tolist()
    deg = [0] * (n + 1)
    for s, (a, b) in enumerate(ends):
        for side, v in enumerate((a, b)):
            if not 1 <= v <= n:
                continue
            deg[v] += 1
            p = linkpos[s][side]
            if not 0 <= p < size[v] or pool[start[v] + p] != s:
                out.append(f"incidence: link slot {s} missing from list of node {v}")
    for v in range(1, n + 1):
        if size[v] != deg[v]:
            out.append(f"incidence: node {v} lists {size[v]} links, has {deg[v]}")
        if deg[v] < 3:
            out.append(f"degree: node {v} has degree {deg[v]} < 3")
    if sum(deg) != 6 * n - 12:
        out.append(f"degree: degree sum {sum(deg)} != {6 * n - 12}")
    sumsq = sum(d * d for d in deg)
    if T.meta[eng.META_SUMSQ] != sumsq:
        out.append(f"degree: cached sum of squares {T.meta[eng.META_SUMSQ]} != {sumsq}")

    # opposite vertices describe a closed triangle set
    tris = set()
    for s, ((a, b), (c, d)) in enumerate(zip(ends, opp)):
        if c == d or c in (a, b) or d in (a, b):
            out.append(f"opposite: link slot {s} {_pair(a, b)} has bad apexes ({c}, {d})")
            continue
        for x in (c, d):
            tris.add(tuple(sorted((a, b, x))))
    for a, b, c in sorted(tris):
        for (x, y), z in (((a, b), c), ((a, c), b), ((b, c), a)):
            s = table.get((x, y))
            if s is None:
                out.append(f"triangle: ({a},{b},{c}) uses missing link {(x, y)}")
            elif z not in opp[s]:
                out.append(f"triangle: ({a},{b},{c}) not recorded at link {(x, y)}")
    if len(tris) != 2 * n - 4:
        out.append(f"euler: {len(tris)} triangles, expected {2 * n - 4}")
    if out:
        return out

    # sphere, not just Euler counts: every vertex link is one cycle, graph connected
    nbrs: dict[int, list[int]] = {v: [] for v in range(1, n + 1)}
    for a, b in table:
        nbrs[a].append(b)
        nbrs[b].append(a)
    for v in range(1, n + 1):
        u0 = nbrs[v][0]
        prev, cur, steps = None, u0, 0
        while True:
            c, d = opp[table[_pair(v, cur)]]
            nxt = d if c == prev else c
            prev, cur = cur, nxt
            steps += 1
            if cur == u0 or steps > len(nbrs[v]):
                break
        if steps != len(nbrs[v]):
            out.append(f"manifold: link of node {v} is not a single cycle")
    seen = {1}
    stack = [1]
    while stack:
        for u in nbrs[stack.pop()]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    if len(seen) != n:
        out.append(f"connectivity: only {len(seen)} of {n} nodes reachable from node 1")
    return out


# ----------------------------------------------------------------------
# canonical form


def _rotation(T: Triangulation):
    """Successor map ``succ[(v, u)] = w`` for a coherent orientation of the triangles."""
    apex = {}
    for (a, b), (c, d) in zip(T.ends.tolist(), T.opp.tolist()):
        apex[_pair(a, b)] = (c, d)
    a, b = _pair(*T.ends[0])
    first = (a, b, int(T.opp[0, 0]))
    oriented = {}
    queue = deque([first])
    seen = {tuple(sorted(first))}
    while queue:
        x, y, z = queue.popleft()
        for p, q, r in ((x, y, z), (y, z, x), (z, x, y)):
            oriented[(p, q)] = r
            c, d = apex[_pair(p, q)]
            w = d if c == r else c
            key = tuple(sorted((q, p, w)))
            if key not in seen:
                seen.add(key)
                queue.append((q, p, w))
    return oriented


def _bfs_code(succ, n, v0, u0):
    number = {v0: 1}
    first = {v0: u0}
    code = []
    queue = deque([v0])
    while queue:
        v = queue.popleft()
        u = first[v]
        while True:
            if u not in number:
                number[u] = len(number) + 1
                first[u] = v
                queue.append(u)
            code.append(number[u])
            u = succ[(v, u)]
            if u == first[v]:
                break
        code.append(0)
    return code


def canonical_code(T: Triangulation) -> bytes:
    """Isomorphism invariant: equal iff the triangulations are combinatorially isomorphic.

    Minimum breadth-first code over every directed link and both orientations.
    """
    if validate(T):
        raise TriangulationError("canonical_code needs a valid triangulation")
    succ = _rotation(T)
    mirror = {(v, w): u for (v, u), w in succ.items()}
    best = None
    for rot in (succ, mirror):
        for (v, u) in rot:
            code = _bfs_code(rot, T.n, v, u)
            if best is None or code < best:
                best = code
    return struct.pack(f">H{len(best)}H", T.n, *best)


# ----------------------------------------------------------------------
# text format


def serialize(T: Triangulation) -> str:
    tris = T.triangles()
    lines = [f"tri n={T.n} f={len(tris)}"]
    lines.extend(f"{a} {b} {c}" for a, b, c in tris)
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> Triangulation:
    lines = text.splitlines()
    if not lines:
        raise TriangulationError("line 1: empty input")
    head = lines[0].split()
    try:
        if head[0] != "tri":
            raise ValueError
        fields = dict(tok.split("=", 1) for tok in head[1:])
        n, f = int(fields["n"]), int(fields["f"])
    except (ValueError, KeyError, IndexError):
        raise TriangulationError(f"line 1: bad header {lines[0]!r}") from None
    if n < 4 or f != 2 * n - 4:
        raise TriangulationError(f"line 1: header needs n >= 4 and f = 2n-4, got n={n} f={f}")

    tris: list[tuple[int, int, int]] = []
    owner: dict[tuple[int, int], list[int]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            tri = tuple(int(x) for x in line.split())
        except ValueError:
            raise TriangulationError(f"line {lineno}: not integers: {line!r}") from None
        if len(tri) != 3 or len(set(tri)) != 3 or not all(1 <= x <= n for x in tri):
            raise TriangulationError(f"line {lineno}: bad triangle {line!r}")
        for p in (_pair(tri[0], tri[1]), _pair(tri[0], tri[2]), _pair(tri[1], tri[2])):
            owner.setdefault(p, []).append(lineno)
            if len(owner[p]) > 2:
                raise TriangulationError(
                    f"line {lineno}: link {p} already in triangles on lines {owner[p][:2]}")
        tris.append(tri)
    if len(tris) != f:
        raise TriangulationError(f"line {len(lines)}: expected {f} triangles, read {len(tris)}")
    if len(set(map(frozenset, tris))) != f:
        raise TriangulationError("duplicate triangle")
    open_links = [(p, ls) for p, ls in owner.items() if len(ls) != 2]
    if open_links:
        p, ls = min(open_links)
        raise TriangulationError(f"line {ls[0]}: link {p} lies in only one triangle")
    return Triangulation.from_triangles(n, tris)


def links_from_pairs(T: Triangulation, pairs: Iterable[tuple[int, int]]) -> list[Link]:
    return [T.link(a, b) for a, b in pairs]
