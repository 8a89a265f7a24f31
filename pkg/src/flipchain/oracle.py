"""Brute-force enumeration of labelled sphere triangulations.

Independent of the flip engine on purpose: triangle sets on ``1..n`` are grown
by repeatedly closing the smallest link that lies in only one triangle, then
filtered by the sphere conditions.  Nothing here imports the rest of the
package.
"""

from itertools import combinations


def _pairs(tri):
    a, b, c = tri
    return ((a, b), (a, c), (b, c))


def _is_sphere(n, tris):
    """Closed, connected, every vertex link a single cycle, Euler counts right."""
    if len(tris) != 2 * n - 4:
        return False
    apex = {}
    for tri in tris:
        for p in _pairs(tri):
            z = (set(tri) - set(p)).pop()
            apex.setdefault(p, []).append(z)
    if len(apex) != 3 * n - 6 or any(len(v) != 2 for v in apex.values()):
        return False
    nbrs = {v: set() for v in range(1, n + 1)}
    for a, b in apex:
        nbrs[a].add(b)
        nbrs[b].add(a)
    for v in range(1, n + 1):
        if len(nbrs[v]) < 3:
            return False
        ring = {u: [w for w in apex[tuple(sorted((u, v)))]] for u in nbrs[v]}
        start = next(iter(ring))
        prev, cur, seen = None, start, 0
        while True:
            a, b = ring[cur]
            prev, cur = cur, (b if a == prev else a)
            seen += 1
            if cur == start:
                break
        if seen != len(nbrs[v]):
            return False
    stack, reached = [1], {1}
    while stack:
        for u in nbrs[stack.pop()]:
            if u not in reached:
                reached.add(u)
                stack.append(u)
    return len(reached) == n


def labelled_triangulations(n):
    """All triangulations of the sphere on labelled nodes ``1..n``, as frozensets of triangles.

    Node 1 has degree at least 3, so every triangulation contains a triangle
    through node 1; growth starts from each such triangle and duplicates are
    removed by set identity.
    """
    if n < 4:
        return set()
    target = 2 * n - 4
    found = set()

    def grow(tris, count):
        if len(tris) > target:
            return
        open_links = sorted(p for p, k in count.items() if k == 1)
        if not open_links:
            if len(tris) == target:
                key = frozenset(tris)
                if key not in found and _is_sphere(n, tris):
                    found.add(key)
            return
        if len(tris) == target:
            return
        a, b = open_links[0]
        for x in range(1, n + 1):
            if x in (a, b):
                continue
            tri = tuple(sorted((a, b, x)))
            if tri in tris:
                continue
            ps = _pairs(tri)
            if any(count.get(p, 0) >= 2 for p in ps):
                continue
            tris.add(tri)
            for p in ps:
                count[p] = count.get(p, 0) + 1
            grow(tris, count)
            for p in ps:
                count[p] -= 1
                if not count[p]:
                    del count[p]
            tris.discard(tri)

    for b, c in combinations(range(2, n + 1), 2):
        tri = (1, b, c)
        grow({tri}, {p: 1 for p in _pairs(tri)})
    return found
