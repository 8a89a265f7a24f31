"""Exact small-n analysis of the flip chains.

Enumerates the labelled state space by breadth-first search over flips,
assembles transition matrices with :class:`fractions.Fraction` entries, and
solves for stationary distributions without rounding, so that reversibility
verdicts are exact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
import scipy.sparse as sp

from .dynamics import SelectionRule, link_probability
from .triangulation import (Triangulation, canonical_code, flip, is_flippable,
                            make_christmas_tree, serialize)

N_MAX_ENUMERATE = 8
N_MAX_MATRIX = 7
DIRECT_SOLVE_LIMIT = 1000


class ExactAnalysisError(RuntimeError):
    pass


def _key(T: Triangulation):
    return tuple(sorted(T.link_set()))


def enumerate_labeled(n: int, seed: Triangulation | None = None, n_max: int = N_MAX_ENUMERATE):
    """All labelled triangulations reachable from ``seed`` by flips, sorted by serialized form."""
    if n > n_max:
        raise ExactAnalysisError(f"n={n} exceeds the enumeration guard n_max={n_max}")
    if seed is None:
        seed = make_christmas_tree(n)
    if seed.n != n:
        raise ValueError(f"seed has n={seed.n}, asked for n={n}")
    seen = {_key(seed): seed.copy()}
    queue = deque([seed.copy()])
    while queue:
        T = queue.popleft()
        for a, b in sorted(T.link_set()):
            U = T.copy()
            if flip(U, U.link(a, b)).rejected:
                continue
            k = _key(U)
            if k not in seen:
                seen[k] = U
                queue.append(U)
    return sorted(seen.values(), key=serialize)


def count_isomorphism_classes(states) -> int:
    ns = {T.n for T in states}
    if len(ns) > 1:
        raise ValueError(f"states mix node counts {sorted(ns)}")
    return len({canonical_code(T) for T in states})


# ----------------------------------------------------------------------
# transition matrices


@dataclass
class TransitionMatrix:
    """Sparse exact transition matrix; ``rows[i][j] = P(T_j | T_i)``."""

    states: list
    rule: SelectionRule
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def entry(self, i, j) -> Fraction:
        return self.rows[i].get(j, Fraction(0))

    def row_sums(self):
        return [sum(r.values(), Fraction(0)) for r in self.rows]

    def is_symmetric(self) -> bool:
        return all(self.entry(j, i) == p for i, r in enumerate(self.rows) for j, p in r.items())

    def successors(self, i):
        return [j for j in self.rows[i] if j != i]

    def to_float_csr(self):
        data, ri, ci = [], [], []
        for i, r in enumerate(self.rows):
            for j, p in r.items():
                ri.append(i)
                ci.append(j)
                data.append(float(p))
        N = len(self.rows)
        return sp.csr_matrix((data, (ri, ci)), shape=(N, N))

    def triples(self):
        """Lines ``i j num/den`` in row-major order."""
        for i, r in enumerate(self.rows):
            for j in sorted(r):
                p = r[j]
                yield f"{i} {j} {p.numerator}/{p.denominator}"


def transition_matrix(states, rule) -> TransitionMatrix:
    rule = SelectionRule.parse(rule)
    index = {_key(T): i for i, T in enumerate(states)}
    rows = []
    for i, T in enumerate(states):
        row: dict[int, Fraction] = {}
        for link in T.links():
            p = link_probability(T, rule, link)
            if not is_flippable(T, link):
                row[i] = row.get(i, Fraction(0)) + p
                continue
            U = T.copy()
            flip(U, U.link(*T.endpoints(link)))
            j = index.get(_key(U))
            if j is None:
                raise ExactAnalysisError(
                    f"flip of {T.endpoints(link)} in state {i} leaves the enumeration")
            row[j] = row.get(j, Fraction(0)) + p
        rows.append(row)
    return TransitionMatrix(list(states), rule, rows)


# ----------------------------------------------------------------------
# stationary distribution


def is_irreducible(P: TransitionMatrix) -> bool:
    N = len(P)
    fwd = [[] for _ in range(N)]
    bwd = [[] for _ in range(N)]
    for i, r in enumerate(P.rows):
        for j in r:
            if j != i:
                fwd[i].append(j)
                bwd[j].append(i)

    def reach(adj):
        seen = {0}
        stack = [0]
        while stack:
            for u in adj[stack.pop()]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen)

    return reach(fwd) == N and reach(bwd) == N


def _solve_stationary(rows, N):
    """Exact solve of pi (P - I) = 0, sum(pi) = 1 by sparse Gaussian elimination.

    Equation ``j`` reads ``sum_i pi_i (P_ij - [i == j]) = 0``; the last one is
    replaced by the normalisation.
    """
    eqs = [dict() for _ in range(N)]
    for i, r in enumerate(rows):
        for j, p in r.items():
            eqs[j][i] = eqs[j].get(i, Fraction(0)) + p
        eqs[i][i] = eqs[i].get(i, Fraction(0)) - 1
    eqs[N - 1] = {i: Fraction(1) for i in range(N)}
    rhs = [Fraction(0)] * N
    rhs[N - 1] = Fraction(1)
    for e in eqs:
        for k in [k for k, v in e.items() if v == 0]:
            del e[k]

    # column -> equations touching it, for sparse pivoting
    active = set(range(N))
    pivots = []
    for _ in range(N):
        col_count: dict[int, int] = {}
        for e in active:
            for c in eqs[e]:
                col_count[c] = col_count.get(c, 0) + 1
        # sparsest equation, then its sparsest column
        e = min(active, key=lambda q: (len(eqs[q]), q))
        if not eqs[e]:
            raise ExactAnalysisError("singular system: chain is not irreducible")
        c = min(eqs[e], key=lambda k: (col_count[k], k))
        active.discard(e)
        piv = eqs[e][c]
        for q in list(active):
            f = eqs[q].get(c)
            if f is None:
                continue
            ratio = f / piv
            row = eqs[q]
            for k, v in eqs[e].items():
                nv = row.get(k, Fraction(0)) - ratio * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            rhs[q] -= ratio * rhs[e]
        pivots.append((e, c))
    pi = [Fraction(0)] * N
    for e, c in reversed(pivots):
        s = rhs[e] - sum((v * pi[k] for k, v in eqs[e].items() if k != c), Fraction(0))
        pi[c] = s / eqs[e][c]
    return pi


def _lumped_stationary(P: TransitionMatrix):
    """Solve on isomorphism classes, then spread each class mass evenly.

    Relabelling commutes with the transition law, so the unique stationary
    vector is constant on classes.  The caller re-checks pi P = pi exactly.
    """
    codes = [canonical_code(T) for T in P.states]
    classes = sorted(set(codes))
    cid = {c: a for a, c in enumerate(classes)}
    member = [cid[c] for c in codes]
    size = [0] * len(classes)
    for a in member:
        size[a] += 1
    Q: list = [None] * len(classes)
    for i, r in enumerate(P.rows):
        lumped: dict[int, Fraction] = {}
        for j, p in r.items():
            lumped[member[j]] = lumped.get(member[j], Fraction(0)) + p
        a = member[i]
        if Q[a] is None:
            Q[a] = lumped
        elif Q[a] != lumped:
            raise ExactAnalysisError("chain is not lumpable over isomorphism classes")
    rho = _solve_stationary(Q, len(classes))
    return [rho[member[i]] / size[member[i]] for i in range(len(P))]


def _power_iteration(P: TransitionMatrix, iters=20000, tol=1e-13):
    M = P.to_float_csr().T.tocsr()
    x = np.full(len(P), 1.0 / len(P))
    for _ in range(iters):
        y = 0.5 * (x + M @ x)
        if np.abs(y - x).sum() < tol:
            return y
        x = y
    return x


@dataclass
class StationaryDistribution:
    pi: list
    method: str
    power_iteration_gap: float

    def __len__(self):
        return len(self.pi)

    def __getitem__(self, i):
        return self.pi[i]

    def lines(self):
        for i, p in enumerate(self.pi):
            yield f"{i} {p.numerator}/{p.denominator}"


def stationary_residual(P: TransitionMatrix, pi) -> list:
    """Exact ``pi P - pi``."""
    out = [-p for p in pi]
    for i, r in enumerate(P.rows):
        for j, p in r.items():
            out[j] += pi[i] * p
    return out


def stationary_distribution(P: TransitionMatrix, method: str = "auto") -> StationaryDistribution:
    """Unique invariant vector of an irreducible chain, in exact rationals.

    ``method`` is ``"direct"`` (sparse rational elimination on the labelled
    chain), ``"lumped"`` (solve over isomorphism classes and lift), or
    ``"auto"``, which goes direct up to ``DIRECT_SOLVE_LIMIT`` states.
    Either way the answer is verified exactly and cross-checked against
    floating-point power iteration.
    """
    if not is_irreducible(P):
        raise ExactAnalysisError("transition matrix is reducible")
    if method == "auto":
        method = "direct" if len(P) <= DIRECT_SOLVE_LIMIT else "lumped"
    if method == "direct":
        pi = _solve_stationary(P.rows, len(P))
    elif method == "lumped":
        pi = _lumped_stationary(P)
    else:
        raise ValueError(f"unknown method {method!r}")
    if sum(pi) != 1 or any(p < 0 for p in pi) or any(stationary_residual(P, pi)):
        raise ExactAnalysisError("solver returned a vector that is not stationary")
    approx = _power_iteration(P)
    gap = float(np.abs(approx - np.array([float(p) for p in pi])).max())
    if gap > 1e-8:
        raise ExactAnalysisError(f"power iteration disagrees with exact solve by {gap:g}")
    return StationaryDistribution(pi, method, gap)


# ----------------------------------------------------------------------
# reversibility


@dataclass
class ReversibilityResult:
    reversible: bool
    pair: tuple | None = None
    cycle: list | None = None
    cycle_ratio: Fraction | None = None
    flips: list | None = None

    def __bool__(self):
        return self.reversible


def kolmogorov_ratio(P: TransitionMatrix, cycle) -> Fraction:
    """Product of P(back)/P(forward) around ``cycle`` (state indices, first not repeated)."""
    ratio = Fraction(1)
    k = len(cycle)
    for t in range(k):
        i, j = cycle[t], cycle[(t + 1) % k]
        fwd, back = P.entry(i, j), P.entry(j, i)
        if fwd == 0 or back == 0:
            raise ExactAnalysisError(f"no transition between states {i} and {j}")
        ratio *= back / fwd
    return ratio


def _cycles_through(P: TransitionMatrix, i, j, max_len):
    """Simple cycles starting with the step i -> j, up to ``max_len`` states."""
    stack = [[i, j]]
    while stack:
        path = stack.pop()
        last = path[-1]
        for k in P.successors(last):
            if k == i and len(path) >= 3:
                yield list(path)
            elif k not in path and len(path) < max_len:
                stack.append(path + [k])


def _flip_labels(P: TransitionMatrix, cycle):
    out = []
    for t in range(len(cycle)):
        A = P.states[cycle[t]].link_set()
        B = P.states[cycle[(t + 1) % len(cycle)]].link_set()
        out.append((sorted(A - B)[0], sorted(B - A)[0]))
    return out


def reversibility_test(P: TransitionMatrix, pi, max_cycle: int = 4) -> ReversibilityResult:
    """Exact detailed-balance check; on failure, find a short cycle with ratio != 1."""
    pi = list(pi.pi if isinstance(pi, StationaryDistribution) else pi)
    bad = []
    for i, r in enumerate(P.rows):
        for j, p in r.items():
            if j > i and pi[i] * p != pi[j] * P.entry(j, i):
                bad.append((i, j))
    if not bad:
        return ReversibilityResult(True)
    for i, j in bad:
        for cyc in _cycles_through(P, i, j, max_cycle):
            ratio = kolmogorov_ratio(P, cyc)
            if ratio != 1:
                return ReversibilityResult(False, (i, j), cyc, ratio, _flip_labels(P, cyc))
    return ReversibilityResult(False, bad[0])


# ----------------------------------------------------------------------
# Tutte asymptotics


@dataclass(frozen=True)
class TutteValue:
    n: int
    log_z: mpmath.mpf
    z: mpmath.mpf


def tutte_asymptotic(n: int, dps: int = 50) -> TutteValue:
    """Asymptotic count ``3 / (16 sqrt(6 pi n^5)) (256/27)^(n-2)`` and its log."""
    if n < 3:
        raise ValueError("n must be >= 3")
    with mpmath.workdps(dps):
        n_ = mpmath.mpf(n)
        log_z = (mpmath.log(3) - mpmath.log(16) - mpmath.log(6 * mpmath.pi * n_ ** 5) / 2
                 + (n_ - 2) * mpmath.log(mpmath.mpf(256) / 27))
        return TutteValue(n, +log_z, mpmath.exp(log_z))
