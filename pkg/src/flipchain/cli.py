"""Command-line front end: ``python -m flipchain <command> ...``."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import dynamics as dyn
from . import exact
from . import statistics as st
from .triangulation import (deserialize, flip, make_christmas_tree, serialize,
                            validate)


class ConfigError(ValueError):
    pass


def _count(text) -> int:
    """Non-negative integer; accepts ``1e8`` style."""
    try:
        value = float(text) if any(c in str(text) for c in ".eE") else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value != int(value) or value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return int(value)


# ----------------------------------------------------------------------
# simulate


@dataclass
class RunConfig:
    n: int = 1000
    rule: str = "node-then-link"
    seed: int = 1
    budget: int = 10**6
    burn_in: int | None = None
    sample_every: int | None = None
    window: int | None = None
    initial: str = "christmas-tree"
    out: str = "run"
    chains: int = 1

    def resolved(self) -> "RunConfig":
        c = RunConfig(**asdict(self))
        if c.n < 4:
            raise ConfigError("n must be >= 4")
        if c.budget < 0:
            raise ConfigError("budget must be >= 0")
        if c.chains < 1:
            raise ConfigError("chains must be >= 1")
        try:
            c.rule = dyn.SelectionRule.parse(c.rule).label
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        c.burn_in = 1000 * c.n if c.burn_in is None else c.burn_in
        c.sample_every = c.n if c.sample_every is None else c.sample_every
        if c.sample_every < 1:
            raise ConfigError("sample-every must be >= 1")
        if c.window is None:
            c.window = max(1, (c.burn_in + c.budget) // 100)
        if c.window < 1:
            raise ConfigError("window must be >= 1")
        return c

    def lines(self):
        return [f"{k}={v}" for k, v in asdict(self).items()]


_CONFIG_TYPES = {"n": int, "seed": int, "budget": _count, "burn_in": _count,
                 "sample_every": _count, "window": _count, "chains": int,
                 "rule": str, "initial": str, "out": str}


def read_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CONFIG_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _CONFIG_TYPES[key](value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def _initial_state(cfg: RunConfig):
    if cfg.initial == "christmas-tree":
        return make_christmas_tree(cfg.n)
    with open(cfg.initial) as fh:
        T = deserialize(fh.read())
    if T.n != cfg.n:
        raise ConfigError(f"initial triangulation has n={T.n}, config says n={cfg.n}")
    return T


def chain_seeds(seed: int, k: int) -> list:
    if k == 1:
        return [seed]
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


def run_one_chain(cfg: RunConfig, seed: int, outdir: str):
    """Burn-in then sampling; writes per-chain files and returns the averaged histogram."""
    T0 = _initial_state(cfg)
    chain = dyn.ChainState(T0, cfg.rule, seed=seed)
    tracker = st.RejectionTracker(cfg.window)
    dyn.run(chain, cfg.burn_in, [tracker])
    sampler = st.DegreeSampler(cfg.n, cfg.sample_every)
    dyn.run(chain, cfg.budget, [tracker, sampler])
    os.makedirs(outdir, exist_ok=True)
    st.write_histogram_csv(os.path.join(outdir, "histogram.csv"), st.degree_histogram(chain.T))
    st.write_timeseries_csv(os.path.join(outdir, "timeseries.csv"), tracker.series)
    if sampler.hist.samples:
        st.write_histogram_csv(os.path.join(outdir, "average_histogram.csv"), sampler.hist)
    with open(os.path.join(outdir, "final.tri"), "w") as fh:
        fh.write(serialize(chain.T))
    problems = validate(chain.T)
    return sampler.hist, problems, chain.attempts, chain.rejected


def _fits(h: st.DegreeHistogram, n: int):
    c = st.cumulative(h)
    fits, notes = [], []
    for f in (st.fit_loglog, st.fit_loglinear):
        try:
            fits.append(f(c, n=n))
        except st.FitError as exc:
            notes.append(str(exc))
    return fits, notes


def cmd_simulate(args) -> int:
    base = RunConfig()
    values = asdict(base)
    if args.config:
        values.update(read_config_file(args.config))
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = RunConfig(**values).resolved()
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.txt"), "w") as fh:
        fh.write("\n".join(cfg.lines()) + "\n")
    print("\n".join(cfg.lines()))

    seeds = chain_seeds(cfg.seed, cfg.chains)
    if cfg.chains == 1:
        results = [run_one_chain(cfg, seeds[0], cfg.out)]
    else:
        dirs = [os.path.join(cfg.out, f"chain-{i}") for i in range(cfg.chains)]
        with ProcessPoolExecutor(max_workers=min(cfg.chains, os.cpu_count() or 1)) as pool:
            results = list(pool.map(run_one_chain, [cfg] * cfg.chains, seeds, dirs))

    merged = None
    status = 0
    for i, (hist, problems, attempts, rejected) in enumerate(results):
        if problems:
            print(f"chain {i}: final state invalid: {problems[:3]}", file=sys.stderr)
            status = 1
        print(f"chain {i}: seed={seeds[i]} attempts={attempts} rejected={rejected}")
        if hist.samples:
            merged = hist if merged is None else merged.merge(hist)
    if merged is not None:
        if cfg.chains > 1:
            st.write_histogram_csv(os.path.join(cfg.out, "average_histogram.csv"), merged)
        fits, notes = _fits(merged, cfg.n)
        st.write_fits_csv(os.path.join(cfg.out, "fits.csv"), fits)
        for f in fits:
            print(f"{f.model}: slope={f.slope!r} residual={f.residual!r} window=[{f.d_lo},{f.d_hi}]")
        for note in notes:
            print(f"fit skipped: {note}")
    return status


# ----------------------------------------------------------------------
# verify


def _report(ok, label, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  {detail}" if detail else ""))
    return bool(ok)


def _fmt(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    ok = True
    for n in range(args.n_min, args.n_max + 1):
        T = make_christmas_tree(n)
        problems = validate(T)
        ok &= _report(not problems, f"n={n} christmas tree valid", "; ".join(problems[:3]))

        # random walk for normalization and symmetry checks
        U = T.copy()
        states = [U.copy()]
        for _ in range(args.walk):
            pairs = sorted(U.link_set())
            a, b = pairs[rng.integers(len(pairs))]
            flip(U, U.link(a, b))
            states.append(U.copy())
        bad = validate(U)
        ok &= _report(not bad, f"n={n} Euler counts after {args.walk} random flips")
        for rule in dyn.SelectionRule:
            sums = {dyn.check_normalization(S, rule) for S in states}
            ok &= _report(sums == {1}, f"n={n} {rule.label} normalization",
                          " ".join(_fmt(s) for s in sorted(sums)))
        sym = all(
            dyn.flip_transition_probability(S, S.link(*p), dyn.UNIFORM_LINK)
            == dyn.flip_transition_probability(*_flipped(S, p), dyn.UNIFORM_LINK)
            for S in states[:20] for p in sorted(S.link_set())
            if dyn.is_flippable(S, S.link(*p)))
        ok &= _report(sym, f"n={n} uniform-link transition matrix symmetric on walk states")

        if n >= 7:
            ok &= _report(dyn.three_cycle_check(n), f"n={n} three-cycle gives tree with 3,4 swapped")
            for rule, want in ((dyn.NODE_THEN_LINK, Fraction(10, 9)), (dyn.UNIFORM_LINK, Fraction(1))):
                try:
                    r = dyn.cycle_balance_ratio(T, dyn.FOUR_CYCLE, rule)
                except dyn.ChainError as exc:
                    ok &= _report(False, f"n={n} {rule.label} four-cycle ratio", str(exc))
                    continue
                ok &= _report(r == want, f"n={n} {rule.label} four-cycle ratio {_fmt(r)}",
                              f"expected {_fmt(want)}")
            r = dyn.cycle_balance_ratio(T, dyn.FOUR_CYCLE, dyn.NODE_THEN_LINK)
            ok &= _report(r != 1, f"n={n} node-then-link four-cycle breaks balance", _fmt(r))
        two = all(dyn.two_cycle_check(T, T.link(*p), rule)
                  for rule in dyn.SelectionRule for p in sorted(T.link_set())
                  if dyn.is_flippable(T, T.link(*p)))
        ok &= _report(two, f"n={n} two-cycles balance")
    return 0 if ok else 1


def _flipped(S, pair):
    U = S.copy()
    out = flip(U, U.link(*pair))
    return U, U.link(*out.added)


# ----------------------------------------------------------------------
# enumerate


def cmd_enumerate(args) -> int:
    n = args.n
    if n > exact.N_MAX_MATRIX:
        print(f"error: n={n} exceeds the exact-analysis limit {exact.N_MAX_MATRIX}", file=sys.stderr)
        return 2
    states = exact.enumerate_labeled(n)
    classes = exact.count_isomorphism_classes(states)
    out = args.out
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "manifest.txt"), "w") as fh:
            for i, T in enumerate(states):
                fh.write(f"# state {i}\n{serialize(T)}")
    print(f"n={n} labelled states={len(states)} isomorphism classes={classes}")
    ok = True
    for rule in dyn.SelectionRule:
        P = exact.transition_matrix(states, rule)
        pi = exact.stationary_distribution(P)
        rev = exact.reversibility_test(P, pi)
        values = sorted(set(pi.pi))
        uniform = values == [Fraction(1, len(states))]
        print(f"{rule.label}: symmetric={P.is_symmetric()} uniform={uniform} "
              f"distinct_pi={len(values)} reversible={str(rev.reversible).lower()}")
        print("  pi values: " + " ".join(_fmt(v) for v in values))
        if not rev.reversible and rev.cycle is not None:
            print(f"  witness cycle {rev.cycle} ratio {_fmt(rev.cycle_ratio)}")
            print(f"  flips {rev.flips}")
        if out:
            with open(os.path.join(out, f"stationary-{rule.label}.txt"), "w") as fh:
                fh.write("\n".join(pi.lines()) + "\n")
        ok &= len(values) > 0
    return 0 if ok else 1


# ----------------------------------------------------------------------
# tutte


def cmd_tutte(args) -> int:
    prev = None
    print("n\tlog_Z\tZ\tratio")
    for n in args.n:
        v = exact.tutte_asymptotic(n)
        ratio = ""
        if prev is not None and prev.n == n - 1:
            ratio = mpmath.nstr(mpmath.exp(v.log_z - prev.log_z), 15)
        print(f"{n}\t{mpmath.nstr(v.log_z, 20)}\t{mpmath.nstr(v.z, 15)}\t{ratio}")
        prev = v
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flipchain", description="Random flips on sphere triangulations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the flip chain and write CSV outputs")
    s.add_argument("--n", type=int, help="number of nodes (>= 4)")
    s.add_argument("--rule", help="uniform-link or node-then-link")
    s.add_argument("--seed", type=int, help="RNG seed")
    s.add_argument("--budget", type=_count, help="attempted flips after burn-in (1e8 style allowed)")
    s.add_argument("--burn-in", type=_count, help="attempts before sampling (default 1000*n)")
    s.add_argument("--sample-every", type=_count, help="attempts between histogram samples (default n)")
    s.add_argument("--window", type=_count, help="attempts per time-series record")
    s.add_argument("--initial", help="'christmas-tree' or a serialized triangulation file")
    s.add_argument("--out", help="output directory")
    s.add_argument("--chains", type=int, help="independent chains run in parallel and merged")
    s.add_argument("--config", help="key=value file; flags override it")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="exact checks of balance, cycles and normalization")
    v.add_argument("--n-min", type=int, default=7)
    v.add_argument("--n-max", type=int, default=10)
    v.add_argument("--walk", type=int, default=200, help="random flips per n for the normalization check")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("enumerate", help="enumerate all states and solve the chains exactly")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--out", help="directory for the manifest and stationary vectors")
    e.set_defaults(func=cmd_enumerate)

    t = sub.add_parser("tutte", help="asymptotic number of triangulations")
    t.add_argument("n", type=int, nargs="+")
    t.set_defaults(func=cmd_tutte)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.error(str(exc))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
