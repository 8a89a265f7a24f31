"""Array-level flip kernels.

Everything in here is compiled with numba and works on plain numpy arrays so
that the Monte Carlo loop never touches Python objects.  Layout (``m = 3n-6``
link slots, nodes are ``1..n`` so arrays indexed by node have length ``n+1``):

``ends[l]``     the two endpoints of link slot ``l``
``opp[l]``      the two vertices opposite ``l`` (apexes of its two triangles)
``linkpos[l]``  position of ``l`` inside the incidence list of ``ends[l, s]``
``gen[l]``      bumped whenever slot ``l`` is re-keyed by a flip
``hkeys/hvals`` open-addressing hash (linear probing) from pair key to slot
``start/size/cap``, ``pool``  per-node incidence lists packed into one pool
``meta``        ``[pool_top, sum of squared degrees]``
"""

import numpy as np
from numba import njit

# Kernels that never allocate are compiled without the refcounting runtime:
# with it, passing arrays into helpers inside the hot loop costs ~100ns/call.

EMPTY = -1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
META_TOP = 0
META_SUMSQ = 1


# --------------------------------------------------------------------------
# random numbers: xoshiro256** seeded through splitmix64
# --------------------------------------------------------------------------


@njit(cache=True, _nrt=False)
def _splitmix64(x):
    x = x + _GOLDEN
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@njit(cache=True)
def seed_state(seed):
    s = np.empty(4, dtype=np.uint64)
    x = np.uint64(seed)
    for i in range(4):
        x, z = _splitmix64(x)
        s[i] = z
    return s


@njit(cache=True, _nrt=False)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, _nrt=False)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True, _nrt=False)
def rand_below(s, bound):
    """Uniform integer in ``[0, bound)`` by masked rejection (no modulo)."""
    if bound <= 1:
        return 0
    mask = np.uint64(bound - 1)
    mask |= mask >> np.uint64(1)
    mask |= mask >> np.uint64(2)
    mask |= mask >> np.uint64(4)
    mask |= mask >> np.uint64(8)
    mask |= mask >> np.uint64(16)
    while True:
        r = (next_u64(s) >> np.uint64(32)) & mask
        if r < np.uint64(bound):
            return np.int64(r)


# --------------------------------------------------------------------------
# pair hash
# --------------------------------------------------------------------------


@njit(cache=True, _nrt=False)
def pair_key(a, b, n):
    if a > b:
        a, b = b, a
    return np.int64(a) * np.int64(n + 1) + np.int64(b)


@njit(cache=True, _nrt=False)
def _home(key, hmask):
    h = np.uint64(key) * _GOLDEN
    return np.int64((h >> np.uint64(29)) & np.uint64(hmask))


@njit(cache=True, _nrt=False)
def hash_find(hkeys, key):
    """Return the table slot holding ``key`` or -1."""
    hmask = hkeys.shape[0] - 1
    i = _home(key, hmask)
    while True:
        k = hkeys[i]
        if k == key:
            return i
        if k == EMPTY:
            return -1
        i = (i + 1) & hmask


@njit(cache=True, _nrt=False)
def hash_get(hkeys, hvals, key):
    i = hash_find(hkeys, key)
    if i < 0:
        return -1
    return hvals[i]


@njit(cache=True, _nrt=False)
def hash_put(hkeys, hvals, key, val):
    hmask = hkeys.shape[0] - 1
    i = _home(key, hmask)
    while hkeys[i] != EMPTY and hkeys[i] != key:
        i = (i + 1) & hmask
    hkeys[i] = key
    hvals[i] = val


@njit(cache=True, _nrt=False)
def hash_delete(hkeys, hvals, key):
    # backward-shift deletion keeps probe chains intact without tombstones
    hmask = hkeys.shape[0] - 1
    i = hash_find(hkeys, key)
    if i < 0:
        return False
    j = i
    while True:
        j = (j + 1) & hmask
        kj = hkeys[j]
        if kj == EMPTY:
            break
        h = _home(kj, hmask)
        if i <= j:
            stays = i < h <= j
        else:
            stays = h > i or h <= j
        if stays:
            continue
        hkeys[i] = kj
        hvals[i] = hvals[j]
        i = j
    hkeys[i] = EMPTY
    hvals[i] = EMPTY
    return True


# --------------------------------------------------------------------------
# incidence pool
# --------------------------------------------------------------------------


@njit(cache=True)
def _compact(pool, start, size, cap, meta, extra):
    total = 0
    for v in range(1, start.shape[0]):
        total += cap[v]
    new = np.empty(2 * (total + extra), dtype=pool.dtype)
    top = 0
    for v in range(1, start.shape[0]):
        s = start[v]
        for k in range(size[v]):
            new[top + k] = pool[s + k]
        start[v] = top
        top += cap[v]
    meta[META_TOP] = top
    return new


@njit(cache=True, _nrt=False)
def needs_compact(pool, size, cap, meta, c, d):
    """True if appending to ``c`` and ``d`` could run past the end of ``pool``."""
    need = 0
    if size[c] == cap[c]:
        need += 2 * cap[c]
    if size[d] == cap[d]:
        need += 2 * cap[d]
    return meta[META_TOP] + need > pool.shape[0]


@njit(cache=True)
def compact(pool, start, size, cap, meta):
    """Repack the incidence lists into a fresh pool with room to spare."""
    big = 0
    for v in range(1, cap.shape[0]):
        if cap[v] > big:
            big = cap[v]
    return _compact(pool, start, size, cap, meta, 4 * big)


@njit(cache=True, _nrt=False)
def inc_append(pool, start, size, cap, meta, linkpos, ends, v, link):
    # caller guarantees room via needs_compact/compact
    if size[v] == cap[v]:
        newcap = 2 * cap[v]
        top = meta[META_TOP]
        s = start[v]
        for k in range(size[v]):
            pool[top + k] = pool[s + k]
        start[v] = top
        cap[v] = newcap
        meta[META_TOP] = top + newcap
    p = size[v]
    pool[start[v] + p] = link
    side = 0 if ends[link, 0] == v else 1
    linkpos[link, side] = p
    size[v] = p + 1


@njit(cache=True, _nrt=False)
def inc_remove(pool, start, size, linkpos, ends, v, link):
    side = 0 if ends[link, 0] == v else 1
    p = linkpos[link, side]
    last = size[v] - 1
    moved = pool[start[v] + last]
    pool[start[v] + p] = moved
    if moved != link:
        mside = 0 if ends[moved, 0] == v else 1
        linkpos[moved, mside] = p
    size[v] = last


# --------------------------------------------------------------------------
# flip
# --------------------------------------------------------------------------


@njit(cache=True, _nrt=False)
def _replace_opp(opp, link, old, new):
    if opp[link, 0] == old:
        opp[link, 0] = new
    else:
        opp[link, 1] = new


@njit(cache=True, _nrt=False)
def flip_kernel(n, link, ends, opp, linkpos, gen, hkeys, hvals, start, size, cap, pool, meta):
    """Flip slot ``link``; the complementary link must be absent and the pool roomy."""
    a = ends[link, 0]
    b = ends[link, 1]
    c = opp[link, 0]
    d = opp[link, 1]
    ac = hash_get(hkeys, hvals, pair_key(a, c, n))
    ad = hash_get(hkeys, hvals, pair_key(a, d, n))
    bc = hash_get(hkeys, hvals, pair_key(b, c, n))
    bd = hash_get(hkeys, hvals, pair_key(b, d, n))
    # (A,B,C),(A,B,D) -> (A,C,D),(B,C,D)
    _replace_opp(opp, ac, b, d)
    _replace_opp(opp, ad, b, c)
    _replace_opp(opp, bc, a, d)
    _replace_opp(opp, bd, a, c)

    meta[META_SUMSQ] += 2 * (size[c] + size[d] - size[a] - size[b] + 2)

    inc_remove(pool, start, size, linkpos, ends, a, link)
    inc_remove(pool, start, size, linkpos, ends, b, link)
    hash_delete(hkeys, hvals, pair_key(a, b, n))

    ends[link, 0] = c
    ends[link, 1] = d
    opp[link, 0] = a
    opp[link, 1] = b
    gen[link] += 1
    hash_put(hkeys, hvals, pair_key(c, d, n), link)
    inc_append(pool, start, size, cap, meta, linkpos, ends, c, link)
    inc_append(pool, start, size, cap, meta, linkpos, ends, d, link)


@njit(cache=True, _nrt=False)
def complement_present(n, link, opp, hkeys):
    return hash_find(hkeys, pair_key(opp[link, 0], opp[link, 1], n)) >= 0


@njit(cache=True, _nrt=False)
def sample_kernel(rule, n, rng, ends, start, size, pool):
    if rule == 0:
        return rand_below(rng, ends.shape[0])
    v = 1 + rand_below(rng, n)
    return np.int64(pool[start[v] + rand_below(rng, size[v])])


@njit(cache=True, _nrt=False)
def pool_headroom_ok(pool, cap, meta):
    """Room for any two list relocations (each at most twice the largest list)."""
    big = 0
    for v in range(1, cap.shape[0]):
        if cap[v] > big:
            big = cap[v]
    return pool.shape[0] - meta[META_TOP] >= 8 * big


@njit(cache=True, _nrt=False)
def run_kernel(rule, budget, n, rng, counters,
               ends, opp, linkpos, gen, hkeys, hvals, start, size, cap, pool, meta):
    """Run up to ``budget`` attempted flips; ``counters = [attempts, accepted, rejected]``.

    Returns the number of attempts made.  Stops early (without drawing further
    random numbers) when a list relocation could overrun the pool, so the
    caller can compact and resume.
    """
    m = ends.shape[0]
    big = 0
    for v in range(1, n + 1):
        if cap[v] > big:
            big = cap[v]
    room = pool.shape[0]
    for t in range(budget):
        if room - meta[META_TOP] < 4 * big:
            return t
        # sampling written out here: going through sample_kernel costs ~10x
        if rule == 0:
            link = rand_below(rng, m)
        else:
            v = 1 + rand_below(rng, n)
            link = pool[start[v] + rand_below(rng, size[v])]
        counters[0] += 1
        if complement_present(n, link, opp, hkeys):
            counters[2] += 1
            continue
        flip_kernel(n, link, ends, opp, linkpos, gen, hkeys, hvals, start, size, cap, pool, meta)
        c = ends[link, 0]
        d = ends[link, 1]
        if cap[c] > big:
            big = cap[c]
        if cap[d] > big:
            big = cap[d]
        counters[1] += 1
    return budget
