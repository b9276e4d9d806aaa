"""Command-line entry point.

Subcommands: classify, green, semigroup, exits, sample-orbits.  Exit code 0
on success, 2 on an honest "undecided" (so batch drivers can triage), 1 on
errors and refusals.
"""

from __future__ import annotations

import argparse
import sys

from .graphs import GraphFormatError, parse_graph_file
from .green import DEFAULT_GREEN_TOL, DEFAULT_NMAX, build_adjacency, green as green_fn
from .detours import (
    DEFAULT_HORIZONS,
    loop_difference_group,
    tail_semigroup,
    theta_f,
)
from .exits import (
    DEFAULT_IMAX,
    CAUCHY_TOL,
    ExitPath,
    check_beta_summable,
    classify_product_tail,
    conformal_measure,
    is_slim,
    product_vectors,
)
from .graphs import CayleyFreeFamily, CayleyZFamily, ExplicitFamily, RayFamily
from .orbits import (
    MASS_DELTA,
    SUBST_RATE,
    compare_to_prediction,
    design_mass,
    essential_range_estimate,
    sample_histogram,
)
from .classify import (
    ClassificationRequest,
    CrossCheckError,
    NotSimpleError,
    classify,
    report,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="graph description file")
    p.add_argument("--exact", action="store_true", help="force exact (rational) mode")
    p.add_argument("--format", default="text", choices=("text", "json-lines", "csv"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kmsfactor",
                                 description="factor-type classification for weighted graph shifts")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="full pipeline: gate, transience, semigroup, verdict")
    _add_common(c)
    c.add_argument("--beta", type=float, required=True)
    c.add_argument("--mode", default="both", choices=("detour", "exit", "both"))
    c.add_argument("--span", type=int, default=None)
    c.add_argument("--mulen", type=int, default=None)
    c.add_argument("--horizons", default=None, help="comma-separated tail horizons")

    g = sub.add_parser("green", help="truncated Green function with certificates")
    _add_common(g)
    g.add_argument("--beta", type=float, required=True)
    g.add_argument("--from", dest="src", required=True, metavar="V")
    g.add_argument("--to", dest="dst", required=True, metavar="W")
    g.add_argument("--nmax", type=int, default=DEFAULT_NMAX)
    g.add_argument("--horizon", type=int, default=16, help="horizon for generator-backed families")

    s = sub.add_parser("semigroup", help="detour semigroup / loop-difference group")
    _add_common(s)
    s.add_argument("--span", type=int, default=None)
    s.add_argument("--mulen", type=int, default=None)
    s.add_argument("--horizons", default=None)

    e = sub.add_parser("exits", help="exit summability, conformal values, product tail")
    _add_common(e)
    e.add_argument("--beta", type=float, required=True)
    e.add_argument("--imax", type=int, default=DEFAULT_IMAX)

    o = sub.add_parser("sample-orbits", help="Monte-Carlo histogram of the tail cocycle range")
    _add_common(o)
    o.add_argument("--beta", type=float, required=True)
    o.add_argument("--samples", type=int, default=100_000)
    o.add_argument("--depth", type=int, default=8)
    o.add_argument("--out", default="hist.csv")
    o.add_argument("--delta", type=float, default=MASS_DELTA)
    o.add_argument("--rate", type=float, default=SUBST_RATE)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        family = parse_graph_file(args.graph)
    except (OSError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _dispatch(args, family)
    except (NotSimpleError, CrossCheckError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args, family) -> int:
    cmd = args.command
    if cmd == "classify":
        horizons = _parse_horizons(args.horizons)
        req = ClassificationRequest(
            family, args.beta, args.mode, seed=args.seed,
            span=args.span, mu_len=args.mulen, horizons=horizons,
            exact=True if args.exact else None)
        verdict = classify(req)
        print(report(verdict, args.format))
        return verdict.exit_code
    if cmd == "green":
        horizon = args.horizon if not isinstance(family, ExplicitFamily) else 1
        graph = family.realize_horizon(horizon)
        A = build_adjacency(graph, args.beta)
        if not graph.has_vertex(args.src) or not graph.has_vertex(args.dst):
            print("error: unknown vertex id", file=sys.stderr)
            return 1
        res = green_fn(A, args.src, args.dst, args.tol or DEFAULT_GREEN_TOL, args.nmax)
        print(f"value={res.value!r}")
        print(f"order={res.order}")
        print(f"tail_bound={res.tail_text}")
        print(f"converged={str(res.converged).lower()}")
        print(f"diverged={str(res.diverged).lower()}")
        print(f"status={res.status}")
        return 0 if (res.converged or res.diverged) else 2
    if cmd == "semigroup":
        return _semigroup_cmd(args, family)
    if cmd == "exits":
        return _exits_cmd(args, family)
    if cmd == "sample-orbits":
        return _orbits_cmd(args, family)
    raise AssertionError(cmd)


def _parse_horizons(text):
    if not text:
        return None
    return tuple(int(t) for t in text.split(","))


def _semigroup_cmd(args, family) -> int:
    mode = "exact" if args.exact else "auto"
    if isinstance(family, RayFamily):
        res = tail_semigroup(family, _parse_horizons(args.horizons) or DEFAULT_HORIZONS,
                             args.span or 12, args.mulen or 12, mode=mode)
        print(f"semigroup={res.semigroup.describe()}")
        print(f"s={res.semigroup.s!r}")
        print(f"stabilized={str(res.stabilized).lower()}")
        if res.stabilized_at is not None:
            print(f"stabilized_at_horizon={res.stabilized_at}")
        if res.tag:
            print(f"tag={res.tag}")
        for h, sub in res.per_horizon:
            print(f"horizon_{h}={sub.describe()}")
        for n in res.notes:
            print(f"note={n}")
        return 0 if res.stabilized else 2
    group = loop_difference_group(family, None, args.span or 12, mode=mode)
    print(f"loop_difference_group={group.subgroup.describe()}")
    print(f"stabilized={str(group.stabilized).lower()}")
    print(f"loop_values_sample={list(group.loop_values_sample)}")
    print(f"sign_profile={group.sign_profile}")
    if group.tag:
        print(f"tag={group.tag}")
    if isinstance(family, (CayleyZFamily, CayleyFreeFamily)):
        th = theta_f(family, args.span or 12, mode=mode)
        print(f"theta_kind={th.kind}")
        if th.theta is not None:
            print(f"theta={th.theta!r}")
        if th.note:
            print(f"note={th.note}")
    return 0 if group.stabilized else 2


def _exits_cmd(args, family) -> int:
    if isinstance(family, ExplicitFamily):
        print("error: exit analysis needs a generator-backed family", file=sys.stderr)
        return 1
    t = ExitPath(family)
    rep = check_beta_summable(t, args.beta, args.imax, args.tol or CAUCHY_TOL)
    print(f"summability={rep.verdict}")
    if rep.limit is not None:
        print(f"limit={rep.limit!r}")
        print(f"cauchy_width={rep.width!r}")
    print(f"slim={str(is_slim(t)).lower()}")
    if rep.verdict == "summable":
        verts = [t.vertex(i) for i in (1, 2, 3)]
        cm = conformal_measure(t, args.beta, verts, args.imax, args.tol or CAUCHY_TOL)
        for vid, (val, err) in cm.values.items():
            print(f"m_t[Z({vid})]={val!r} (± {err:.3g})")
    spec = product_vectors(t, args.beta)
    for i, vec in enumerate(spec.first_vectors(10), start=1):
        print(f"omega_{i}=({', '.join(f'{x:.9g}' for x in vec)})")
    verdict = classify_product_tail(spec)
    print(f"product_tail={verdict.type}"
          + (f" lambda={verdict.lam!r}" if verdict.lam is not None else ""))
    for n in rep.notes + verdict.notes:
        print(f"note={n}")
    return 0 if rep.verdict != "undecided" else 2


def _orbits_cmd(args, family) -> int:
    import csv

    hist = sample_histogram(family, args.beta, args.samples, args.depth,
                            args.seed, args.rate)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_log_center", "mass"])
        for center, mass in hist.csv_rows():
            w.writerow([repr(center), repr(mass)])
    est = essential_range_estimate(hist, args.delta)
    lines = [f"samples={args.samples}", f"depth={args.depth}", f"seed={args.seed}",
             f"beta={args.beta!r}", f"measure={hist.measure_note}",
             f"accumulation_points={[round(v, 12) for v, _ in est.points]}",
             f"zero_mass={est.zero_mass!r}", f"inf_mass={est.inf_mass!r}",
             f"low_confidence={str(est.low_confidence).lower()}"]
    if isinstance(family, RayFamily):
        sem = tail_semigroup(family).semigroup
        dm = design_mass(family, args.depth, args.rate)
        repcmp = compare_to_prediction(est, sem, args.beta, dm, args.delta)
        lines.append(f"prediction={sem.describe()}")
        lines.append(repcmp.describe())
    text = "\n".join(lines)
    with open(args.out + ".report", "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
