"""Link-selection rules, the flip chain, and exact transition probabilities."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _engine as eng
from .triangulation import (FlipOutcome, Link, Triangulation, TriangulationError,
                            canonical_code, flip, is_flippable, make_christmas_tree)


class ChainError(ValueError):
    """Illegal flip sequence, unflippable link, or similar domain error."""


class SelectionRule(enum.IntEnum):
    UNIFORM_LINK = 0
    NODE_THEN_LINK = 1

    @classmethod
    def parse(cls, name) -> "SelectionRule":
        if isinstance(name, cls):
            return name
        if isinstance(name, (int, np.integer)):
            return cls(int(name))
        key = str(name).replace("-", "_").upper()
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown rule {name!r}; use uniform-link or node-then-link") from None

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


UNIFORM_LINK = SelectionRule.UNIFORM_LINK
NODE_THEN_LINK = SelectionRule.NODE_THEN_LINK


@dataclass(frozen=True)
class StepOutcome:
    chosen: Link
    outcome: FlipOutcome


class ChainState:
    """A running flip chain; owns its triangulation and RNG stream.

    The stream is xoshiro256** seeded through splitmix64 from a 64-bit ``seed``,
    so the trajectory is a function of ``(seed, initial triangulation, rule)``.
    """

    def __init__(self, T: Triangulation, rule, seed: int = 0):
        self.T = T
        self.rule = SelectionRule.parse(rule)
        self.seed = int(seed)
        self.rng = eng.seed_state(np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF))
        self.counters = np.zeros(3, dtype=np.int64)

    @property
    def attempts(self) -> int:
        return int(self.counters[0])

    @property
    def accepted(self) -> int:
        return int(self.counters[1])

    @property
    def rejected(self) -> int:
        return int(self.counters[2])

    def __repr__(self):
        return (f"ChainState(n={self.T.n}, rule={self.rule.label}, attempts={self.attempts}, "
                f"rejected={self.rejected})")


# ----------------------------------------------------------------------
# exact probabilities


def link_probability(T: Triangulation, rule, link) -> Fraction:
    rule = SelectionRule.parse(rule)
    a, b = T.endpoints(link)
    if rule is UNIFORM_LINK:
        return Fraction(1, T.num_links)
    return Fraction(1, T.n) * (Fraction(1, T.degree(a)) + Fraction(1, T.degree(b)))


def check_normalization(T, rule) -> Fraction:
    """Total selection probability over all links.

    ``T`` may also be any edge list; the node-then-link identity holds for every
    graph without isolated nodes.
    """
    rule = SelectionRule.parse(rule)
    if isinstance(T, Triangulation):
        edges = [T.endpoints(link) for link in T.links()]
    else:
        edges = [tuple(e) for e in T]
    if rule is UNIFORM_LINK:
        return sum((Fraction(1, len(edges)) for _ in edges), Fraction(0))
    deg: dict = {}
    for a, b in edges:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    n = len(deg)
    return sum((Fraction(1, n) * (Fraction(1, deg[a]) + Fraction(1, deg[b])) for a, b in edges),
               Fraction(0))


def flip_transition_probability(T: Triangulation, link, rule) -> Fraction:
    """P(T'|T) where T' is ``T`` with ``link`` flipped.

    Distinct flippable links give distinct successors, so this is just the
    selection probability of ``link``.
    """
    if not is_flippable(T, link):
        raise ChainError(f"link {T.endpoints(link)} is not flippable")
    return link_probability(T, rule, link)


def self_loop_probability(T: Triangulation, rule) -> Fraction:
    return sum((link_probability(T, rule, link) for link in T.links()
                if not is_flippable(T, link)), Fraction(0))


def cycle_balance_ratio(T0: Triangulation, flips, rule) -> Fraction:
    """Product of backward over forward transition probabilities along a flip cycle.

    ``flips`` lists the links to flip as node pairs.  The walk must come back to
    ``T0``; ending on a relabelled copy of ``T0`` also closes the cycle because
    the transition law commutes with relabelling.
    """
    rule = SelectionRule.parse(rule)
    T = T0.copy()
    ratio = Fraction(1)
    for step, (a, b) in enumerate(flips, start=1):
        if not T.has_link(a, b):
            raise ChainError(f"step {step}: link ({a}, {b}) not present")
        link = T.link(a, b)
        if not is_flippable(T, link):
            raise ChainError(f"step {step}: link ({a}, {b}) is not flippable")
        forward = link_probability(T, rule, link)
        out = flip(T, link)
        backward = link_probability(T, rule, T.link(*out.added))
        ratio *= backward / forward
    if T != T0 and canonical_code(T) != canonical_code(T0):
        raise ChainError("flip sequence does not return to the starting triangulation")
    return ratio


FOUR_CYCLE = ((1, 4), (2, 5), (3, 4), (5, 6))
THREE_CYCLE = ((1, 4), (2, 3), (4, 5))


def three_cycle_check(n: int, verbose: bool = False) -> bool:
    """Flip (1-4), (2-3), (4-5) on the christmas tree; expect the tree with 3 and 4 swapped."""
    T = make_christmas_tree(n)
    for step, (a, b) in enumerate(THREE_CYCLE, start=1):
        if not T.has_link(a, b) or not is_flippable(T, T.link(a, b)):
            if verbose:
                print(f"three-cycle n={n}: step {step} ({a}-{b}) illegal")
            return False
        flip(T, T.link(a, b))
    perm = list(range(n + 1))
    perm[3], perm[4] = 4, 3
    target = make_christmas_tree(n).relabel(perm)
    ok = T == target
    if verbose and not ok:
        print(f"three-cycle n={n}: extra {sorted(T.link_set() - target.link_set())}, "
              f"missing {sorted(target.link_set() - T.link_set())}")
    return ok


def two_cycle_check(T: Triangulation, link, rule=NODE_THEN_LINK) -> bool:
    """Flip ``link`` and its replacement back; expect the original link set and ratio 1."""
    pair = T.endpoints(link)
    U = T.copy()
    out = flip(U, U.link(*pair))
    if out.rejected:
        return False
    return cycle_balance_ratio(T, [pair, out.added], rule) == 1


# ----------------------------------------------------------------------
# simulation


def sample_link(chain: ChainState) -> Link:
    T = chain.T
    slot = eng.sample_kernel(int(chain.rule), T.n, chain.rng, T.ends, T.start, T.size, T.pool)
    return Link(int(slot), int(T.gen[slot]))


def step(chain: ChainState, link=None) -> StepOutcome:
    """One attempted flip; ``link`` forces the choice instead of sampling."""
    chosen = sample_link(chain) if link is None else link
    if isinstance(chosen, tuple) and not isinstance(chosen, Link):
        chosen = chain.T.link(*chosen)
    outcome = flip(chain.T, chosen)
    chain.counters[0] += 1
    chain.counters[1 if outcome.flipped else 2] += 1
    return StepOutcome(chosen, outcome)


def _advance(chain: ChainState, budget: int):
    T = chain.T
    left = int(budget)
    while left > 0:
        if not eng.pool_headroom_ok(T.pool, T.cap, T.meta):
            T.pool = eng.compact(T.pool, T.start, T.size, T.cap, T.meta)
        left -= eng.run_kernel(int(chain.rule), left, T.n, chain.rng, chain.counters,
                               T.ends, T.opp, T.linkpos, T.gen, T.hkeys, T.hvals,
                               T.start, T.size, T.cap, T.pool, T.meta)


def run(chain: ChainState, budget: int, observers=()) -> ChainState:
    """Execute ``budget`` attempts.

    Each observer has an ``every`` cadence and an ``observe(chain)`` method,
    called whenever the chain's total attempt count hits a multiple of
    ``every``.  An optional ``start(chain)`` is called before the first attempt.
    """
    budget = int(budget)
    if budget < 0:
        raise ValueError("budget must be >= 0")
    observers = list(observers)
    for obs in observers:
        if int(obs.every) < 1:
            raise ValueError(f"observer {obs!r} needs every >= 1")
        if hasattr(obs, "start"):
            obs.start(chain)
    end = chain.attempts + budget
    while chain.attempts < end:
        now = chain.attempts
        stop = end
        for obs in observers:
            stop = min(stop, (now // obs.every + 1) * obs.every)
        _advance(chain, stop - now)
        for obs in observers:
            if chain.attempts % obs.every == 0:
                try:
                    obs.observe(chain)
                except Exception as exc:
                    raise RuntimeError(
                        f"observer {type(obs).__name__} failed at attempt {chain.attempts}") from exc
    return chain
