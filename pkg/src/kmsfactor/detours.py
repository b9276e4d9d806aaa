"""Detour enumeration and the closed-subgroup classification behind it.

A detour on a wandering path replaces the segment between two spine
vertices by an alternative finite path with the same endpoints; its weight
is the potential difference.  The multiplicative closure of the weight
exponentials, taken outside every finite vertex set, is always one of four
semigroups:

    {1}                  ("s = -1")
    {0, 1}               ("s = 0")
    {0} cup {s^z}        (geometric, s in (0,1))
    [0, inf)             ("s = 1")

which reduces, on the additive side, to classifying the closed subgroup of
the reals generated by the weight values: trivial, a lattice, or dense.
The artifact computes horizon-stabilized approximations of this object and
tags every verdict with the bounds at which it stabilized.

Because the measures of interest have full support on the admissible arrow
choices, enumeration ranges over ordered pairs (segment, alternative) of
parallel paths in a window outside the horizon; this realizes the weight
set of almost every path, and makes the delta multiset symmetric by
construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .numbers import ExactReal, float_gcd, fraction_gcd
from .graphs import (
    CayleyFreeFamily,
    CayleyZFamily,
    ExplicitFamily,
    FinitePath,
    Graph,
    GraphFamily,
    PValue,
    RayFamily,
)

GCD_EPS = 1e-9
ZERO_CUT = 1e-12
DEFAULT_SPAN = 12
DEFAULT_MU_LEN = 12
FREE_SPAN = 8
DEFAULT_HORIZONS = (2, 4, 8, 16)
UNBOUNDED_FACTOR = 3.0  # heuristic threshold 3*(horizon) for the S(0) call
VALUE_CAP = 20_000
RECORD_CAP = 20_000


class SemigroupInconsistencyError(RuntimeError):
    pass


class EnumerationCapError(RuntimeError):
    """Raised when detour enumeration exceeds the explosion guard."""


# ---------------------------------------------------------------------------
# Closed subgroups of the reals


@dataclass(frozen=True)
class ClosedSubgroup:
    """Closure of the group generated by a finite delta set: one of three kinds."""

    kind: str  # "trivial" | "lattice" | "dense"
    alpha: float | None = None
    alpha_exact: ExactReal | None = None
    witness: tuple = ()

    def same_as(self, other: "ClosedSubgroup", rel_tol: float = 1e-9) -> bool:
        if self.kind != other.kind:
            return False
        if self.kind != "lattice":
            return True
        if self.alpha_exact is not None and other.alpha_exact is not None:
            return (self.alpha_exact - other.alpha_exact).is_zero()
        a, b = self.alpha, other.alpha
        return abs(a - b) <= rel_tol * max(abs(a), abs(b), 1e-30)

    def describe(self) -> str:
        if self.kind == "lattice":
            if self.alpha_exact is not None:
                return f"lattice({self.alpha_exact.describe()})"
            return f"lattice({self.alpha!r})"
        return self.kind


def _subgroup_from_exact(deltas: Sequence[ExactReal], witness_all: Sequence) -> ClosedSubgroup:
    nonzero = [d for d in deltas if not d.is_zero()]
    if not nonzero:
        return ClosedSubgroup("trivial")
    ref = nonzero[0]
    coeffs: list[Fraction] = []
    for d in nonzero:
        q = d.div_exact(ref)
        if q is None:
            return ClosedSubgroup("dense", witness=(ref, d))
        coeffs.append(q)
    g = fraction_gcd(coeffs)
    alpha = ref.scale(g)
    alpha = abs(alpha)
    return ClosedSubgroup("lattice", float(alpha), alpha, witness=tuple(nonzero[:8]))


def _subgroup_from_float(deltas: Sequence[float], eps: float) -> ClosedSubgroup:
    nonzero = [d for d in deltas if abs(d) > ZERO_CUT]
    if not nonzero:
        return ClosedSubgroup("trivial")
    g = float_gcd(nonzero, eps)
    if g <= eps:
        srt = sorted(set(abs(d) for d in nonzero))
        return ClosedSubgroup("dense", witness=tuple(srt[:2]))
    # lattice sanity: every delta must sit on a multiple of g
    for d in nonzero:
        m = round(abs(d) / g)
        if abs(abs(d) - m * g) > max(1e-6 * g, 64 * eps * max(1.0, abs(d))):
            return ClosedSubgroup("dense", witness=(g, d))
    return ClosedSubgroup("lattice", g, None, witness=tuple(sorted(set(nonzero))[:8]))


def real_gcd(deltas: Sequence, mode: str = "auto", eps: float = GCD_EPS) -> ClosedSubgroup:
    """Closed subgroup generated by the deltas.

    mode "exact" requires ExactReal inputs (authoritative); "tolerance" runs
    Euclidean reduction at resolution eps on floats; "auto" prefers exact
    when every delta carries one, cross-checks against the float route, and
    warns if the two disagree (exact wins).
    """
    items = list(deltas)
    if not items:
        return ClosedSubgroup("trivial")
    exacts = [d if isinstance(d, ExactReal) else None for d in items]
    have_exact = all(e is not None for e in exacts)
    if mode == "exact":
        if not have_exact:
            raise ValueError("exact mode needs exact-valued deltas")
        return _subgroup_from_exact(exacts, items)
    floats = [float(d) for d in items]
    if mode == "tolerance" or not have_exact:
        return _subgroup_from_float(floats, eps)
    # auto with exact data available
    res = _subgroup_from_exact(exacts, items)
    chk = _subgroup_from_float(floats, eps)
    if not res.same_as(chk, rel_tol=1e-6):
        warnings.warn(
            f"float-mode gcd ({chk.describe()}) disagrees with exact gcd "
            f"({res.describe()}); exact result wins",
            stacklevel=2,
        )
    return res


# ---------------------------------------------------------------------------
# Detour records and horizon delta sets


@dataclass(frozen=True)
class Detour:
    """Ordered pair of parallel paths over a spine window [i, j)."""

    i: int
    j: int
    segment: FinitePath
    alternative: FinitePath
    delta: float
    delta_exact: ExactReal | None = None

    def recompute(self) -> float:
        return self.segment.potential - self.alternative.potential


@dataclass
class HorizonDeltaSet:
    """Deltas of detours outside horizon n, with enumeration bounds.

    ``deltas`` is a symmetric generator multiset: it generates the same
    closed subgroup as the full (segment, alternative) pair set, which may
    be much larger.  ``delta_min``/``delta_max`` are exact extremes over all
    pairs within the bounds.
    """

    horizon: int
    deltas: tuple
    exact: bool
    span: int
    mu_len: int
    window: int
    delta_min: float
    delta_max: float
    capped: bool = False

    def nonzero(self) -> bool:
        if self.exact:
            return any(not d.is_zero() for d in self.deltas)
        return any(abs(d) > ZERO_CUT for d in self.deltas)


def _value_sets(family: GraphFamily, start, max_len: int, horizon: int,
                value_cap: int = VALUE_CAP, exact: bool = True):
    """DP over (vertex, length): potential value sets of paths avoiding H_n.

    Returns (table, capped) with table[length][vertex] = set of values.
    Vertices inside the horizon are excluded entirely, which matches the
    "outside of H" condition on every vertex the path touches.
    """
    capped = False
    zero = ExactReal() if exact else 0.0
    table: list[dict] = [{start: {zero}}]
    for _ in range(max_len):
        prev = table[-1]
        cur: dict = {}
        for v, vals in prev.items():
            for dst, pot, _aid in family.out_arrows_struct(v):
                if family.in_horizon(dst, horizon):
                    continue
                step = pot.exact if exact else pot.value
                if exact and step is None:
                    raise ValueError("exact enumeration needs exact potentials")
                bucket = cur.setdefault(dst, set())
                for val in vals:
                    bucket.add(val + step)
                if len(bucket) > value_cap:
                    capped = True
                    trimmed = sorted(bucket, key=float)
                    keep = value_cap // 2
                    bucket.clear()
                    bucket.update(trimmed[:keep])
                    bucket.update(trimmed[-keep:])
        table.append(cur)
    return table, capped


def _spine_start(family: GraphFamily, horizon: int) -> int:
    """First spine index whose forward tail stays outside H_horizon."""
    i = 1
    while family.in_horizon(family.spine_vertex(i), horizon):
        i += 1
        if i > horizon + 10**6:
            raise RuntimeError("spine does not leave the horizon")
    return i


def enumerate_detours(family: GraphFamily, horizon: int, span: int | None = None,
                      mu_len: int | None = None, window: int | None = None,
                      mode: str | None = None, value_cap: int = VALUE_CAP) -> HorizonDeltaSet:
    """Delta multiset of detours outside H_horizon, over a bounded window.

    Windows [i, j) run over spine positions with i in the first ``window``
    admissible indices and j - i <= span; segment values come from paths of
    length exactly j - i, alternatives from length <= mu_len.  Ray families
    use the per-level shortcut (parallel-arrow differences), which generates
    the identical subgroup.
    """
    span = span or (FREE_SPAN if isinstance(family, CayleyFreeFamily) else DEFAULT_SPAN)
    mu_len = mu_len or span
    window = window or max(span + mu_len, 16)
    exact = family.rationals if mode is None else (mode == "exact")
    if isinstance(family, RayFamily):
        return _ray_delta_set(family, horizon, span, mu_len, window, exact)
    start0 = _spine_start(family, horizon)
    deltas: list = []
    dmin, dmax = 0.0, 0.0
    capped = False
    for i in range(start0, start0 + window):
        u = family.spine_vertex(i)
        table, cap = _value_sets(family, u, max(span, mu_len), horizon, value_cap, exact)
        capped = capped or cap
        for d in range(1, span + 1):
            w = family.spine_vertex(i + d)
            seg_vals = table[d].get(w, set())
            if not seg_vals:
                continue
            alt_vals: set = set()
            for ell in range(0, mu_len + 1):
                alt_vals |= table[ell].get(w, set())
            ref = min(seg_vals, key=float)
            for x in seg_vals:
                dd = x - ref
                deltas.append(dd)
                deltas.append(-dd)
            for y in alt_vals:
                dd = y - ref
                deltas.append(dd)
                deltas.append(-dd)
            lo = float(ref) - float(max(alt_vals, key=float))
            hi = float(max(seg_vals, key=float)) - float(min(alt_vals, key=float))
            dmin = min(dmin, lo)
            dmax = max(dmax, hi)
        if len(deltas) > 4 * value_cap:
            capped = True
            break
    return HorizonDeltaSet(horizon, tuple(deltas), exact, span, mu_len, window,
                           dmin, dmax, capped)


def _ray_delta_set(family: RayFamily, horizon: int, span: int, mu_len: int,
                   window: int, exact: bool) -> HorizonDeltaSet:
    # Every path between two ray vertices picks one parallel arrow per level,
    # so window deltas are sums of per-level differences and the per-level
    # differences generate the same subgroup.  Extremes add up level-wise.
    first_level = horizon + 2  # arrows at level k touch vertices k-1, k
    deltas: list = []
    lo_terms: list[float] = []
    hi_terms: list[float] = []
    for lvl in range(first_level, first_level + window):
        pots = family.spec.level_potentials(lvl)
        vals_exact = [p.exact for p in pots]
        if exact and any(v is None for v in vals_exact):
            raise ValueError("exact enumeration needs exact potentials")
        vals = vals_exact if exact else [p.value for p in pots]
        ref = min(vals, key=float)
        for v in vals:
            dd = v - ref
            deltas.append(dd)
            deltas.append(-dd)
        fv = [float(v) for v in vals]
        lo_terms.append(min(fv) - max(fv))
        hi_terms.append(max(fv) - min(fv))
    lo_terms.sort()
    hi_terms.sort(reverse=True)
    dmin = sum(lo_terms[:span])
    dmax = sum(hi_terms[:span])
    return HorizonDeltaSet(horizon, tuple(deltas), exact, span, mu_len, window,
                           dmin, dmax, False)


def enumerate_detour_records(family: GraphFamily, horizon: int, span: int = 4,
                             mu_len: int = 4, window: int = 6,
                             cap: int = RECORD_CAP) -> list[Detour]:
    """Explicit (segment, alternative) detour pairs with path witnesses.

    Used by the property suite; the analytic pipeline works on the value
    sets instead.  Enumeration order is deterministic.
    """
    start0 = _spine_start(family, horizon)
    records: list[Detour] = []
    for i in range(start0, start0 + window):
        u = family.spine_vertex(i)
        for d in range(1, span + 1):
            w = family.spine_vertex(i + d)
            segs = _paths_between(family, u, w, d, d, horizon)
            alts = _paths_between(family, u, w, 0, mu_len, horizon)
            for s in segs:
                for a in alts:
                    delta = s.potential - a.potential
                    dx = None
                    se, ae = s.potential_exact, a.potential_exact
                    if se is not None and ae is not None:
                        dx = se - ae
                    records.append(Detour(i, i + d, s, a, delta, dx))
                    if len(records) >= cap:
                        raise EnumerationCapError(
                            f"detour records exceed cap {cap}; tighten span/window")
    return records


def _paths_between(family: GraphFamily, u, w, min_len: int, max_len: int,
                   horizon: int) -> list[FinitePath]:
    """All paths u -> w with min_len <= length <= max_len avoiding H_horizon."""
    from .graphs import Arrow

    out: list[FinitePath] = []
    stack: list[tuple[object, tuple]] = [(u, ())]
    while stack:
        v, arrows = stack.pop()
        if len(arrows) >= min_len and v == w:
            out.append(FinitePath(family.vertex_id(u), arrows))
        if len(arrows) == max_len:
            continue
        for dst, pot, aid in reversed(family.out_arrows_struct(v)):
            if family.in_horizon(dst, horizon):
                continue
            arr = Arrow(aid, family.vertex_id(v), family.vertex_id(dst), pot.value, pot.exact)
            stack.append((dst, arrows + (arr,)))
    out.sort(key=lambda p: (len(p.arrows), tuple(a.id for a in p.arrows)))
    return out


# ---------------------------------------------------------------------------
# Zero membership and the semigroup taxonomy


@dataclass(frozen=True)
class DetourSemigroup:
    kind: str  # "s-minus-1" | "s-zero" | "s-geometric" | "s-full"
    s: float
    s_fraction: Fraction | None = None
    subgroup: ClosedSubgroup | None = None

    def describe(self) -> str:
        if self.kind == "s-minus-1":
            return "S(-1) = {1}"
        if self.kind == "s-zero":
            return "S(0) = {0, 1}"
        if self.kind == "s-full":
            return "S(1) = [0, oo)"
        s = self.s_fraction if self.s_fraction is not None else self.s
        return f"S({s}) = {{0}} u {{s^z : z in Z}}"


@dataclass
class ZeroEvidence:
    value: bool | None  # None = undecided
    basis: str  # "structural" | "numeric" | "all-zero" | "mixed"
    notes: str = ""


def zero_membership(delta_sets: Sequence[HorizonDeltaSet],
                    subgroups: Sequence[ClosedSubgroup] | None = None) -> ZeroEvidence:
    """Does 0 belong to the limiting semigroup?

    Structural: a lattice or dense subgroup whose witnesses persist outside
    every scheduled horizon accumulates its powers at 0.  Numeric: deltas
    unbounded below and above past the 3*(horizon) threshold (a documented
    heuristic for the trivial-group case).  Tails whose deltas are
    identically 0 on the late horizons mean the semigroup is {1}.
    """
    if not delta_sets:
        return ZeroEvidence(None, "mixed", "no delta sets")
    if subgroups is None:
        subgroups = [real_gcd(ds.deltas, "auto" if ds.exact else "tolerance")
                     for ds in delta_sets]
    if all(not ds.nonzero() for ds in delta_sets):
        return ZeroEvidence(False, "all-zero", "all deltas vanish at every horizon")
    if all(not ds.nonzero() for ds in delta_sets[-2:]) and len(delta_sets) >= 2:
        return ZeroEvidence(False, "all-zero",
                            "deltas vanish on the late horizons (tail stabilized to zero)")
    persists = all(ds.nonzero() for ds in delta_sets)
    structural = persists and all(g.kind in ("lattice", "dense") for g in subgroups)
    if structural:
        return ZeroEvidence(True, "structural",
                            "nontrivial subgroup with witnesses outside every horizon")
    unbounded = all(
        ds.delta_max >= UNBOUNDED_FACTOR * ds.horizon and
        ds.delta_min <= -UNBOUNDED_FACTOR * ds.horizon
        for ds in delta_sets)
    if unbounded:
        return ZeroEvidence(True, "numeric",
                            "per-horizon deltas unbounded past the 3*horizon threshold")
    return ZeroEvidence(None, "mixed", "neither structural nor numeric evidence stabilized")


def classify_semigroup(subgroup: ClosedSubgroup, zero: bool) -> DetourSemigroup:
    """The (subgroup, zero-membership) pair pinned to one of the four kinds."""
    if subgroup.kind == "trivial":
        if zero:
            return DetourSemigroup("s-zero", 0.0, Fraction(0), subgroup)
        return DetourSemigroup("s-minus-1", -1.0, Fraction(-1), subgroup)
    if not zero:
        raise SemigroupInconsistencyError(
            f"{subgroup.describe()} forces 0 into the closed semigroup; zero=False is contradictory")
    if subgroup.kind == "dense":
        return DetourSemigroup("s-full", 1.0, Fraction(1), subgroup)
    s_frac = subgroup.alpha_exact.exp_as_fraction() if subgroup.alpha_exact is not None else None
    if s_frac is not None:
        s_frac = 1 / s_frac
        s = float(s_frac)
    else:
        s = math.exp(-subgroup.alpha)
    if not (0 < s < 1):
        raise SemigroupInconsistencyError(f"geometric parameter {s} outside (0,1)")
    return DetourSemigroup("s-geometric", s, s_frac, subgroup)


# ---------------------------------------------------------------------------
# Stabilization over a horizon schedule (shared by both verdict lanes)


@dataclass
class TailSemigroupResult:
    semigroup: DetourSemigroup
    stabilized: bool
    stabilized_at: int | None
    tag: str  # "" or "at-horizon"
    per_horizon: list[tuple[int, ClosedSubgroup]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def classify_tail_sets(delta_sets: Sequence[HorizonDeltaSet],
                       mode: str = "auto", eps: float = GCD_EPS) -> TailSemigroupResult:
    """Stabilize the per-horizon subgroups of a tail-restricted delta stream.

    The kind (and the lattice generator) must agree on the last two horizons
    to count as stabilized.  A lattice whose generator keeps growing is the
    degenerate route to S(0): the limit group collapses while the deltas
    blow up both ways.
    """
    subs = [real_gcd(ds.deltas, "tolerance" if (mode == "tolerance" or not ds.exact) else mode, eps)
            for ds in delta_sets]
    pairs = list(zip([ds.horizon for ds in delta_sets], subs))
    notes: list[str] = []
    zero = zero_membership(delta_sets, subs)
    last, prev = subs[-1], subs[-2] if len(subs) > 1 else subs[-1]
    if last.same_as(prev):
        if last.kind == "trivial":
            if zero.value is False:
                sem = classify_semigroup(last, False)
            elif zero.value is True:
                sem = classify_semigroup(last, True)
                notes.append(f"zero membership by {zero.basis} evidence")
            else:
                return TailSemigroupResult(
                    DetourSemigroup("s-minus-1", -1.0, Fraction(-1), last),
                    False, None, "at-horizon", pairs,
                    [f"trivial tail group but zero membership undecided: {zero.notes}"])
        else:
            sem = classify_semigroup(last, True)
        return TailSemigroupResult(sem, True, delta_sets[-1].horizon, "", pairs, notes)
    # not stabilized: look for lattice degeneration
    lattices = [s for s in subs if s.kind == "lattice"]
    if len(lattices) == len(subs) and len(subs) >= 2:
        alphas = [s.alpha for s in subs]
        growing = all(b >= 1.5 * a for a, b in zip(alphas, alphas[1:]))
        if growing and zero.value is True:
            notes.append(
                "lattice generator grows without stabilizing "
                f"({alphas[0]:.6g} -> {alphas[-1]:.6g}); limit group is trivial")
            sem = DetourSemigroup("s-zero", 0.0, Fraction(0), ClosedSubgroup("trivial"))
            return TailSemigroupResult(sem, True, delta_sets[-1].horizon, "", pairs, notes)
    notes.append("subgroup kind did not stabilize over the schedule")
    fallback = classify_semigroup(last, True) if last.kind != "trivial" else \
        DetourSemigroup("s-minus-1", -1.0, Fraction(-1), last)
    return TailSemigroupResult(fallback, False, None, "at-horizon", pairs, notes)


def tail_semigroup(family: RayFamily, horizons: Sequence[int] = DEFAULT_HORIZONS,
                   span: int = DEFAULT_SPAN, mu_len: int = DEFAULT_MU_LEN,
                   window: int | None = None, mode: str = "auto",
                   eps: float = GCD_EPS) -> TailSemigroupResult:
    """Detour semigroup of the canonical ray path, stabilized over tails."""
    if not isinstance(family, RayFamily):
        raise TypeError("tail_semigroup expects a ray family")
    sets = [enumerate_detours(family, h, span, mu_len, window, mode if mode != "auto" else None)
            for h in horizons]
    return classify_tail_sets(sets, mode, eps)


# ---------------------------------------------------------------------------
# Loop-difference groups and the Cayley exponent


@dataclass
class LoopGroupResult:
    subgroup: ClosedSubgroup
    stabilized: bool
    stabilized_at: int | None
    tag: str
    loop_value_count: int
    loop_values_sample: tuple
    sign_profile: str  # "positive" | "negative" | "mixed" | "zero" | "none"


def _return_distance_bound(family_or_graph, base):
    """Lower bound on the number of arrows needed to get back to base."""
    if isinstance(family_or_graph, Graph):
        graph = family_or_graph
        dist = {base: 0}
        queue = [base]
        while queue:
            v = queue.pop(0)
            for a in graph.in_arrows(v):
                if a.src not in dist:
                    dist[a.src] = dist[v] + 1
                    queue.append(a.src)
        inf = float("inf")
        return lambda v: dist.get(v, inf)
    if isinstance(family_or_graph, CayleyZFamily):
        ups = [y for y, _ in family_or_graph.gens if y > 0]
        downs = [-y for y, _ in family_or_graph.gens if y < 0]
        maxup = max(ups) if ups else 0
        maxdown = max(downs) if downs else 0
        inf = float("inf")

        def bound(v: int):
            if v > 0:
                return math.ceil(v / maxdown) if maxdown else inf
            if v < 0:
                return math.ceil(-v / maxup) if maxup else inf
            return 0

        return bound
    if isinstance(family_or_graph, CayleyFreeFamily):
        return len
    return lambda v: 0


def _loop_values(family_or_graph, base, max_len: int, exact: bool,
                 value_cap: int = VALUE_CAP):
    """Value sets of loops at ``base`` per length <= max_len (DP, pruned).

    States that provably cannot return to the base within the remaining
    length are dropped, which keeps the free-group enumeration polynomial.
    """
    if isinstance(family_or_graph, Graph):
        graph = family_or_graph
        exact = exact and all(a.exact is not None for a in graph.arrows)

        def out_arrows(v):
            return tuple((a.dst, PValue(a.potential, a.exact), a.id)
                         for a in graph.out_arrows(v))
    else:
        fam = family_or_graph
        exact = exact and fam.rationals
        out_arrows = fam.out_arrows_struct
    return_bound = _return_distance_bound(family_or_graph, base)
    zero = ExactReal() if exact else 0.0
    frontier: dict = {base: {zero}}
    capped = False
    by_len: dict[int, set] = {}
    for ell in range(1, max_len + 1):
        nxt: dict = {}
        for v, vals in frontier.items():
            for dst, pot, _aid in out_arrows(v):
                if return_bound(dst) > max_len - ell:
                    continue
                step = pot.exact if exact else pot.value
                if exact and step is None:
                    raise ValueError("exact loop enumeration needs exact potentials")
                bucket = nxt.setdefault(dst, set())
                for val in vals:
                    bucket.add(val + step)
                if len(bucket) > value_cap:
                    capped = True
                    trimmed = sorted(bucket, key=float)
                    keep = value_cap // 2
                    bucket.clear()
                    bucket.update(trimmed[:keep] + trimmed[-keep:])
        frontier = nxt
        if base in frontier:
            by_len[ell] = set(frontier[base])
    return by_len, capped, exact


def loop_difference_group(family_or_graph, base=None, max_len: int = 12,
                          mode: str = "auto", eps: float = GCD_EPS) -> LoopGroupResult:
    """Closed subgroup generated by potential differences of loop pairs at base.

    Stabilization is checked over increasing length cutoffs; the result is
    tagged "at-horizon" when the last two cutoffs still disagree.
    """
    if isinstance(family_or_graph, GraphFamily) and not isinstance(family_or_graph, ExplicitFamily):
        if base is None:
            base = _loop_base(family_or_graph)
    elif isinstance(family_or_graph, ExplicitFamily):
        family_or_graph = family_or_graph.graph
    if isinstance(family_or_graph, Graph):
        if base is None:
            base = family_or_graph.vertices[0]
    by_len, capped, exact = _loop_values(family_or_graph, base, max_len,
                                         exact=(mode != "tolerance"))
    all_values: list = []
    checkpoints: list[tuple[int, ClosedSubgroup]] = []
    cuts = sorted({max(2, max_len // 4), max(2, max_len // 2), max(3, (3 * max_len) // 4), max_len})
    for cut in cuts:
        vals: list = []
        for ell, vset in by_len.items():
            if ell <= cut:
                vals.extend(vset)
        if not vals:
            checkpoints.append((cut, ClosedSubgroup("trivial")))
            continue
        ref = min(vals, key=float)
        diffs = [v - ref for v in vals] + [ref - v for v in vals]
        sub = real_gcd(diffs, mode if mode != "auto" or exact else "tolerance", eps)
        checkpoints.append((cut, sub))
        if cut == max_len:
            all_values = vals
    last = checkpoints[-1][1]
    stable = len(checkpoints) >= 2 and last.same_as(checkpoints[-2][1])
    sample = tuple(sorted(set(float(v) for v in all_values))[:10])
    if not all_values:
        profile = "none"
    else:
        signs = set()
        for v in all_values:
            s = v.sign() if isinstance(v, ExactReal) else (0 if abs(v) <= ZERO_CUT else (1 if v > 0 else -1))
            signs.add(s)
        if signs == {1}:
            profile = "positive"
        elif signs == {-1}:
            profile = "negative"
        elif 0 in signs:
            profile = "zero"
        else:
            profile = "mixed"
    tag = "" if stable else "at-horizon"
    if capped:
        tag = (tag + " capped").strip()
    at = checkpoints[-2][0] if stable else None
    return LoopGroupResult(last, stable, at, tag, len(all_values), sample, profile)


def _loop_base(family: GraphFamily):
    if isinstance(family, CayleyZFamily):
        return 0
    if isinstance(family, CayleyFreeFamily):
        return ""
    if isinstance(family, RayFamily):
        raise ValueError("ray families are acyclic; no loops to analyze")
    raise TypeError(f"no loop base for {type(family).__name__}")


@dataclass
class ThetaResult:
    kind: str  # "lattice" | "dense" | "no-kms" | "undefined"
    theta: float | None
    theta_exact: ExactReal | None
    group: LoopGroupResult | None
    note: str = ""


def theta_f(family, max_len: int = 12, mode: str = "auto", eps: float = GCD_EPS) -> ThetaResult:
    """Supremum of the negative loop-potential differences, via the lattice.

    Equilibrium states require the loop potentials to be all positive or all
    negative; a zero or mixed-sign loop reports "no KMS states".  A dense
    difference group drives the supremum to 0 ("dense (lambda = 1)").
    """
    group = loop_difference_group(family, None, max_len, mode, eps)
    if group.sign_profile in ("zero", "mixed"):
        return ThetaResult("no-kms", None, None, group,
                           "loop potentials are not of one sign: no KMS states")
    if group.sign_profile == "none":
        return ThetaResult("undefined", None, None, group,
                           f"no loops of length <= {max_len} at the base vertex")
    if group.subgroup.kind == "dense":
        return ThetaResult("dense", 0.0, None, group, "dense (lambda = 1)")
    if group.subgroup.kind == "trivial":
        return ThetaResult("undefined", None, None, group,
                           "all loop potentials agree; no negative differences")
    alpha_exact = group.subgroup.alpha_exact
    theta_exact = -alpha_exact if alpha_exact is not None else None
    return ThetaResult("lattice", -group.subgroup.alpha, theta_exact, group)
