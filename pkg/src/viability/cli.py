"""Command-line entry point: ``viability <subcommand> [flags]``.

Every run writes its CSV outputs plus ``manifest.json`` (inputs, seed,
library versions, wall time, checks) into ``--out``. Exit status: 0 when
every analytic check passes, 1 when one fails, 2 on usage errors (bad flags,
missing or malformed input files, parameters out of range).

Verbosity is read from the ``VIAB_LOG`` environment variable (``DEBUG``,
``INFO``, ``WARNING``, ...).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

log = logging.getLogger("viability")

TOPICS = {
    "tree": "event-tree construction",
    "shadow": "shadow price by band stopping and segment pasting; spread shrinking",
    "cps": "strictly consistent price systems under proportional costs",
    "arb": "no-arbitrage linear programming under proportional costs",
    "oa": "obvious arbitrage between stopping times",
    "upbr": "unbounded profit with bounded risk: tail diagnostics",
    "optimize": "utility maximisation of terminal liquidation value and its dual",
    "example poisson": "stopped compensated Poisson market: deflator without price system",
    "example grs": "barrier-stopped exponential martingale: no consistent price system",
}

STOCHASTIC = {"example poisson", "example grs"}


class UsageError(Exception):
    """Invalid invocation; reported with exit status 2."""


@dataclass
class RunConfig:
    subcommand: str
    model: str | None = None
    lam: float | None = None
    seed: int | None = None
    paths: int | None = None
    trials: int | None = None
    out: str = "."
    threads: int = 1
    strict: bool = False
    exact: bool = False
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lam is not None and not 0 <= self.lam < 1:
            raise UsageError(f"--lambda must lie in [0, 1), got {self.lam}")
        if self.subcommand in STOCHASTIC and self.seed is None:
            raise UsageError(f"{self.subcommand} is stochastic: --seed is required")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")


# --------------------------------------------------------------------------
# helpers


def _lam(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _floats(text):
    try:
        return [float(Fraction(t)) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions():
    from importlib import metadata

    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "scikit-learn", "gmpy2"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def _json_safe(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "item"):        # numpy scalars
        return obj.item()
    return obj


class Run:
    """Collects outputs and checks for one invocation."""

    def __init__(self, cfg, argv):
        self.cfg = cfg
        self.argv = list(argv)
        self.out = Path(cfg.out)
        self.outputs = []
        self.inputs = {}
        self.checks = {}
        self.results = {}
        self.t0 = time.perf_counter()

    def input(self, path):
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"input file not found: {path}")
        self.inputs[str(p)] = _sha256(p)
        return p

    def write(self, name, text):
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.outputs.append(name)
        return path

    def check(self, name, passed, detail=None):
        self.checks[name] = {"passed": bool(passed), "detail": _json_safe(detail)}
        status = "PASS" if passed else "FAIL"
        print(f"[{status}] {name}" + (f": {detail}" if detail is not None else ""))
        return passed

    def finish(self):
        ok = all(c["passed"] for c in self.checks.values())
        manifest = {
            "subcommand": self.cfg.subcommand,
            "topic": TOPICS[self.cfg.subcommand],
            "argv": self.argv,
            "config": _json_safe(asdict(self.cfg)),
            "seed": self.cfg.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "results": _json_safe(self.results),
            "checks": self.checks,
            "status": "pass" if ok else "fail",
            "versions": _versions(),
            "wall_time_s": time.perf_counter() - self.t0,
        }
        self.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return 0 if ok else 1


def _load_tree(run, path, exact):
    from .market_model import load_tree

    if path is None:
        raise UsageError("--tree (or --model) is required")
    p = run.input(path)
    try:
        return load_tree(p, exact=exact)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v):
    return str(v) if isinstance(v, Fraction) else repr(float(v))


def _lam_value(args, exact, default=None):
    lam = args.lam if args.lam is not None else default
    if lam is None:
        raise UsageError("--lambda is required")
    return lam if exact else float(lam)


# --------------------------------------------------------------------------
# subcommands


def cmd_tree(run, args):
    from .market_model import build_binomial_tree, format_tree, random_tree

    if args.kind == "binomial":
        vals = [Fraction(v) for v in (args.s0, args.u, args.d, args.p)]
        if args.periods is None:
            raise UsageError("binomial trees need --periods")
        try:
            tree = build_binomial_tree(*vals, args.periods)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        if args.seed is None:
            raise UsageError("random trees need --seed")
        tree = random_tree(args.seed, periods=args.periods)
    text = format_tree(tree)
    run.write(args.file, text)
    run.results["nodes"] = tree.n_nodes
    print(f"wrote {run.out / args.file} ({tree.n_nodes} nodes)")


def cmd_shadow(run, args):
    from .scan import shrink_spread
    from .shadow import band_stopping_times, build_shadow_price, verify_band

    tree = _load_tree(run, args.tree or args.model, args.exact)
    lam = _lam_value(args, args.exact)
    if not lam > 0:
        raise UsageError("shadow prices need --lambda > 0")
    shadow = build_shadow_price(tree, lam)
    run.write("shadow.csv", shadow.to_csv())
    rows = []
    for b in band_stopping_times(tree, lam):
        rows += [[b.n, tree.labels[v], k] for v, k in zip(b.nodes, b.triggers)]
    run.write("stopping_times.csv", _table(["n", "node_id", "trigger"], rows))
    band = verify_band(shadow, lam)
    run.results["max_deviation"] = float(band.max_deviation)
    bound = (1 + lam / 3) ** 2 - 1
    run.check("band", band.passed and band.max_deviation <= bound,
              f"max |S_tilde/S - 1| = {float(band.max_deviation):.6g} "
              f"(bound {float(bound):.6g}, lambda {float(lam):.6g})")
    if band.passed:
        sp = shrink_spread(tree, lam, shadow)
        run.write("spread.csv", _table(
            ["node_id", "S_prime", "ask_gap", "bid_gap"],
            [[tree.labels[v], _num(sp.prices[v]), _num(sp.ask_gap[v]), _num(sp.bid_gap[v])]
             for v in range(tree.n_nodes)]))
        run.check("spread_gaps_positive", sp.min_gap > 0, f"min gap {float(sp.min_gap):.6g}")


def cmd_cps(run, args):
    from .cps import find_scps, solve_cps_lp, verify_certificate

    tree = _load_tree(run, args.tree or args.model, args.exact)
    lam = _lam_value(args, args.exact)
    tol = args.tol if args.tol is not None else 1e-9
    delta, _, _ = solve_cps_lp(tree, lam, exact=args.exact)
    cert = find_scps(tree, lam, exact=args.exact, tol=tol)
    run.results["delta"] = delta
    if cert is None:
        print(f"SCPS: no (best margin {float(delta):.6g})")
        run.results["scps"] = False
        if args.strict:
            run.check("scps_exists", False, "no strictly consistent price system")
        return
    print(f"SCPS: yes, delta={float(delta):.6g}")
    run.results["scps"] = True
    run.write("certificate.csv", cert.to_csv())
    rep = verify_certificate(cert, tree, lam, strict=True)
    run.check("certificate_verified", rep.passed,
              None if rep.passed else rep.violations[:5])


def cmd_arb(run, args):
    from .cps import find_scps
    from .scan import arbitrage_lp

    tree = _load_tree(run, args.tree or args.model, args.exact)
    lam = _lam_value(args, args.exact)
    tol = args.tol if args.tol is not None else 1e-9
    witness = arbitrage_lp(tree, lam, exact=args.exact, tol=tol)
    cert = find_scps(tree, lam, exact=args.exact, tol=tol)
    run.results["arbitrage"] = witness is not None
    if witness is None:
        print("arbitrage: none")
    else:
        print(f"arbitrage: yes, E[V_T]={float(witness.expected_value):.6g}, "
              f"required wealth {float(witness.required_wealth):.6g}")
        run.results["expected_value"] = witness.expected_value
        run.results["required_wealth"] = witness.required_wealth
        run.write("witness.csv", witness.to_csv(tree))
    run.check("exactly_one_of_witness_and_scps", (witness is None) != (cert is None),
              f"witness={'yes' if witness is not None else 'no'}, "
              f"scps={'yes' if cert is not None else 'no'}")
    if args.strict:
        run.check("no_arbitrage", witness is None)


def _load_model(run, path, exact=False):
    """Tree file, or a CSV of paths (``.csv`` suffix)."""
    from .market_model import load_paths

    if path is None:
        raise UsageError("--model (or --tree) is required")
    if str(path).endswith(".csv"):
        p = run.input(path)
        try:
            return load_paths(p)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{path}: {exc}") from None
    return _load_tree(run, path, exact)


def cmd_oa(run, args):
    from .scan import detect_obvious_arbitrage

    model = _load_model(run, args.model or args.tree, args.exact)
    alphas = args.alpha or [0.1, 0.5, 1.0]
    if any(not a > 0 for a in alphas):
        raise UsageError("--alpha values must be positive")
    rows, found = [], False
    for a in alphas:
        oa = detect_obvious_arbitrage(model, a)
        if oa is None:
            rows.append([repr(a), 0, "", "", "", 0])
            print(f"alpha={a:g}: no obvious arbitrage")
            continue
        found = True
        if isinstance(oa.sigma, tuple):
            sigma = f"{oa.sigma[0]}:{oa.sigma[1]!r}"
            tau = ";".join("-" if t is None else str(t) for t in oa.tau)
        else:
            sigma = model.labels[oa.sigma]
            tau = ";".join(model.labels[t] for t in oa.tau)
        rows.append([repr(a), 1, sigma, oa.direction, tau, int(oa.heuristic)])
        print(f"alpha={a:g}: obvious arbitrage, sigma={sigma}, direction={oa.direction}"
              + (" (heuristic)" if oa.heuristic else ""))
    run.write("oa.csv", _table(["alpha", "found", "sigma", "direction", "tau", "heuristic"],
                               rows))
    run.results["found"] = found
    if args.strict:
        run.check("no_obvious_arbitrage", not found)


def cmd_upbr(run, args):
    from .scan import (
        arbitrage_lp,
        buy_and_hold_family,
        leverage_ladder_family,
        upbr_diagnostic,
        zero_family,
    )

    tree = _load_tree(run, args.model or args.tree, False)
    lam = _lam_value(args, False)
    if args.paths is not None and args.seed is None:
        raise UsageError("Monte Carlo tail curves (--paths) need --seed")
    grid = args.mgrid or [0.5, 1, 1.5, 2, 3, 4, 6, 8, 12, 16, 24, 32]
    if sorted(grid) != grid:
        raise UsageError("--mgrid must be increasing")
    families = [zero_family(), buy_and_hold_family()]
    witness = arbitrage_lp(tree, lam)
    if witness is not None and witness.required_wealth == 0:
        # scaled copies of a zero-cost witness stay 1-admissible
        families.append(leverage_ladder_family(base=witness.strategy))
    else:
        print("leverage ladder skipped: no arbitrage witness to scale")
    curves = []
    for fam in families:
        short = fam.name.split("(")[0]
        curve = upbr_diagnostic(tree, lam, fam, grid, paths=args.paths, seed=args.seed)
        run.write(f"tail_{short}.csv", curve.to_csv())
        curves.append((short, curve))
        ok = all(0 <= p <= 1 for p in curve.values) and all(
            a >= b for a, b in zip(curve.values, curve.values[1:]))
        run.check(f"tail_{short}_is_survival_curve", ok)
    lines = ["# m " + " ".join(name for name, _ in curves)]
    for i, m in enumerate(grid):
        lines.append(" ".join([repr(float(m))] + [repr(c.values[i]) for _, c in curves]))
    run.write("tail.dat", "\n".join(lines) + "\n")
    run.results["heuristic"] = args.paths is not None
    print("tail curves written" + (" (Monte Carlo)" if args.paths else " (exact)"))


def cmd_optimize(run, args):
    from .utility import (
        NotViableError,
        duality_gap,
        maximize_utility,
        numeraire_check,
        parse_utility,
    )

    tree = _load_tree(run, args.tree or args.model, False)
    lam = _lam_value(args, False)
    x = args.wealth if args.wealth is not None else 1.0
    try:
        x = float(Fraction(x))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--wealth must be a number, got {x!r}") from None
    if not x > 0:
        raise UsageError("--wealth must be positive")
    try:
        U = parse_utility(args.utility)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        sol = maximize_utility(tree, lam, x, U)
    except NotViableError as exc:
        print(f"no optimum: {exc}")
        run.check("viable", False, str(exc))
        return
    run.write("strategy.csv", sol.to_csv())
    rep = duality_gap(tree, lam, x, U, primal=sol)
    leaves = list(tree.leaves)
    run.write("dual.csv", _table(
        ["leaf_id", "w", "Z", "Y", "V_star", "I_Y"],
        [[tree.labels[v], repr(float(rep.dual.w[i])), repr(float(rep.dual.Z[i])),
          repr(float(rep.dual.Y[i])), repr(float(sol.terminal[i])),
          repr(float(U.I(rep.dual.Y[i])))] for i, v in enumerate(leaves)]))
    run.results.update(u=sol.value, y_star=rep.y_star, dual_bound=rep.dual_bound,
                       gap=rep.gap, reconstruction_error=rep.reconstruction_error,
                       terminal={tree.labels[v]: float(t) for v, t in zip(leaves, sol.terminal)})
    print(f"u(x) = {sol.value:.10g}, dual bound {rep.dual_bound:.10g}, y* = {rep.y_star:.8g}")
    tol_gap = args.tol if args.tol is not None else 1e-5
    run.check("duality_gap", -1e-6 <= rep.gap <= tol_gap, f"{rep.gap:.3g}")
    run.check("primal_from_dual", rep.reconstruction_error <= 1e-6,
              f"{rep.reconstruction_error:.3g}")
    if args.trials:
        if U.kind != "log":
            raise UsageError("--trials (numeraire check) applies to --utility log")
        if args.seed is None:
            raise UsageError("--trials needs --seed")
        nr = numeraire_check(tree, lam, sol, trials=args.trials, seed=args.seed)
        run.results.update(numeraire_max_ratio=nr.max_ratio,
                           numeraire_max_log_ratio=nr.max_log_ratio)
        run.check("numeraire", nr.max_ratio <= 1 + 1e-6 and nr.max_log_ratio <= 1e-6,
                  f"max E[V/V*] = {nr.max_ratio:.9g}, max E[log V/V*] = {nr.max_log_ratio:.3g}")


def cmd_example_poisson(run, args):
    from .counterexamples import E_INV, run_poisson_example

    lam = float(_lam_value(args, False, default=Fraction(1, 10)))
    wealth = args.wealth or "nominal"
    if wealth not in ("nominal", "corrected"):
        try:
            wealth = float(Fraction(wealth))
        except (ValueError, ZeroDivisionError):
            raise UsageError("--wealth must be 'nominal', 'corrected' or a number") from None
    try:
        rep = run_poisson_example(lam, paths=args.paths or 100_000, seed=args.seed,
                                  wealth=wealth, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    summary = rep.summary()
    run.results.update(summary)
    run.write("poisson_summary.csv", _table(["key", "value"],
                                            [[k, v] for k, v in summary.items()]))
    run.write("poisson_paths.csv", rep.to_csv())
    target = 1 - E_INV
    print(f"E^P[1/Y_T] = {rep.inv_y_mean:.5f} +- {rep.inv_y_se:.5f} (target {target:.5f})")
    print(f"E^P[V_T]   = {rep.value_mean:.5f}, x = {rep.x:.5f}")
    run.check("pathwise_V_T_dominates_indicator", rep.pathwise_ok,
              f"{rep.pathwise_violations} of {rep.paths} paths below, "
              f"min margin {float(rep.pathwise_margin.min()):.3g}")
    run.check("prestop_value_nonnegative", rep.prestop_ok,
              f"min {float(rep.prestop_min.min()):.3g}")
    run.check("E_P_inv_Y_matches", abs(rep.inv_y_mean - target) <= 4 * rep.inv_y_se,
              f"|diff| = {abs(rep.inv_y_mean - target):.3g}, 4 se = {4 * rep.inv_y_se:.3g}")
    run.check("E_P_V_T_at_least_1_above_x", rep.contradiction,
              f"E^P[V_T] = {rep.value_mean:.5f}, x = {rep.x:.5f}")


def cmd_example_grs(run, args):
    from .counterexamples import grs_tau_distribution, run_grs_example

    n_max = args.nmax or 10
    if n_max < 2:
        raise UsageError("--nmax must be >= 2")
    alphas = args.alpha or [0.1, 0.5, 1.0]
    rep = run_grs_example(seed=args.seed, paths=args.paths or 100_000, n_max=n_max,
                          alphas=alphas, threads=args.threads)
    run.results.update(rep.summary())
    run.write("grs_tau.csv", rep.to_csv())
    run.write("grs_oa.csv", _table(
        ["alpha", "sample_candidate", "refuted_by_segment", "certified", "support_depth",
         "support_shapes"],
        [[repr(o.alpha),
          "" if o.candidate is None else f"{o.candidate.sigma[0]}:{o.candidate.sigma[1]!r}"
          f":{o.candidate.direction}",
          "" if o.refuted_by is None else o.refuted_by, int(o.found), o.support_depth,
          o.support_size] for o in rep.oa.values()]))
    print("barriers (n, start, lower, value defining tau, segment upper):")
    for n, s, lo, tv, up in rep.barriers:
        print(f"  {n:3d}  {s}  {lo}  {tv}  {up}")
    exact = grs_tau_distribution(1, exact=True)[0][0]
    run.check("P0_tau_rho1_is_3_7", exact == Fraction(3, 7), str(exact))
    for n in range(1, min(4, n_max) + 1):
        diff = abs(rep.freq[n - 1] - 2.0 ** -n)
        run.check(f"P_tau_rho{n}_matches_2^-{n}", diff <= 4 * rep.freq_se[n - 1],
                  f"{rep.freq[n - 1]:.5f} +- {rep.freq_se[n - 1]:.5f}")
    run.check("weights_normalise", abs(rep.weight_mass - (1 - 2.0 ** -n_max)) <= 1e-12,
              f"{rep.weight_mass!r}")
    run.check("all_P_paths_finite_tau", rep.all_tau_finite)
    run.check("no_obvious_arbitrage_certified", not rep.oa_found)


COMMANDS = {
    "tree": cmd_tree,
    "shadow": cmd_shadow,
    "cps": cmd_cps,
    "arb": cmd_arb,
    "oa": cmd_oa,
    "upbr": cmd_upbr,
    "optimize": cmd_optimize,
    "example poisson": cmd_example_poisson,
    "example grs": cmd_example_grs,
}


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--tree", help="tree file (id parent prob price time per line)")
    p.add_argument("--model", help="tree file, or CSV of paths (path,time,S_minus,S,event)")
    p.add_argument("--lambda", dest="lam", type=_lam, help="proportional cost rate")
    p.add_argument("--wealth", help="initial wealth")
    p.add_argument("--utility", default="log", help="'log' or 'power:p'")
    p.add_argument("--alpha", type=_floats, help="comma-separated relative moves")
    p.add_argument("--paths", type=int, help="Monte Carlo path count")
    p.add_argument("--trials", type=int, help="random competitor strategies")
    p.add_argument("--seed", type=int, help="random seed (required when sampling)")
    p.add_argument("--nmax", type=int, help="segment cap for the barrier example")
    p.add_argument("--mgrid", type=_floats, help="comma-separated tail levels m")
    p.add_argument("--tol", type=float, help="tolerance override")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker cap")
    p.add_argument("--strict", action="store_true",
                   help="treat negative findings (no SCPS, arbitrage) as failures")
    p.add_argument("--exact", action="store_true", help="rational arithmetic LP mode")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="viability", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    t = sub.add_parser("tree", parents=[common], help="write a tree file")
    t.add_argument("kind", choices=("binomial", "random"))
    t.add_argument("--s0", default="1")
    t.add_argument("--u", default="2")
    t.add_argument("--d", default="1/2")
    t.add_argument("--p", default="1/2")
    t.add_argument("--periods", type=int)
    t.add_argument("--file", default="tree.txt", help="file name inside --out")
    for name, helptext in (
        ("shadow", "shadow price and spread shrinking"),
        ("cps", "strictly consistent price system LP"),
        ("arb", "arbitrage witness LP"),
        ("oa", "obvious arbitrage scan"),
        ("upbr", "tail curves of 1-admissible strategies"),
        ("optimize", "utility maximisation and duality check"),
    ):
        sub.add_parser(name, parents=[common], help=helptext)
    ex = sub.add_parser("example", help="counterexample markets")
    exsub = ex.add_subparsers(dest="example", parser_class=_Parser)
    exsub.required = True
    exsub.add_parser("poisson", parents=[common], help="stopped compensated Poisson market")
    exsub.add_parser("grs", parents=[common], help="barrier-stopped exponential martingale")
    return parser


def _configure_logging():
    level = os.environ.get("VIAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def dispatch(argv=None):
    """Run one subcommand; returns the exit status."""
    _configure_logging()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        name = args.command if args.command != "example" else f"example {args.example}"
        cfg = RunConfig(
            subcommand=name, model=args.model or args.tree,
            lam=None if args.lam is None else float(args.lam), seed=args.seed,
            paths=args.paths, trials=args.trials, out=args.out, threads=args.threads,
            strict=args.strict, exact=args.exact,
            tolerances={} if args.tol is None else {"tol": args.tol},
        )
        if args.paths is not None and args.paths < 2:
            raise UsageError("--paths must be >= 2")
        run = Run(cfg, argv)
        COMMANDS[name](run, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:       # --help
        return int(exc.code or 0)
    return run.finish()


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
