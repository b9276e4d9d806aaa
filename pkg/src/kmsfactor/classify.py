"""Pipeline orchestration: from a parsed family to a factor-type verdict.

The case split: inverse temperature 0 is semifinite outright; otherwise the
detour parameter s decides the type, with s = -1 semifinite (refined to
I/II only in the unit-potential case the product-tail argument covers),
s = 0 type III_0, s in (0,1) type III_{s^|beta|}, s = 1 type III_1.

Two independent verdict lanes exist for ray families (detour tails and
product-state tails); "both" mode cross-checks them and refuses to pick a
side on disagreement.  Cayley families classify through the loop-difference
exponent, which covers the conservative regime as well, so for them a
conservative dissipativity certificate downgrades to a recorded assumption
instead of a refusal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import (
    CayleyFreeFamily,
    CayleyZFamily,
    ExplicitFamily,
    GraphFamily,
    RayFamily,
    check_simplicity,
)
from .green import is_dissipative
from .detours import (
    DetourSemigroup,
    classify_semigroup,
    loop_difference_group,
    tail_semigroup,
    theta_f,
)
from .exits import (
    ExitPath,
    check_beta_summable,
    classify_product_tail,
    product_vectors,
    semifinite_exit_verdict,
)

SCHEMA_VERSION = 1

TYPE_SEMIFINITE_I = "Semifinite_I"
TYPE_SEMIFINITE_II = "Semifinite_II"
TYPE_SEMIFINITE = "Semifinite_undetermined"
TYPE_III_LAMBDA = "III_lambda"
TYPE_III_0 = "III_0"
TYPE_III_1 = "III_1"
TYPE_UNDECIDED = "Undecided"


class CrossCheckError(RuntimeError):
    """The detour and product-tail lanes disagree; never silently resolved."""


class NotSimpleError(RuntimeError):
    pass


@dataclass
class ClassificationRequest:
    family: GraphFamily
    beta: float
    mode: str = "both"  # "detour" | "exit" | "both"
    seed: int = 0
    span: int | None = None
    mu_len: int | None = None
    horizons: tuple[int, ...] | None = None
    loop_max_len: int = 12
    exact: bool | None = None  # None = follow the file's rationals flag

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if self.mode not in ("detour", "exit", "both"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class FactorVerdict:
    type: str
    s: float | None
    s_fraction: Fraction | None
    lam: float | None
    lam_fraction: Fraction | None
    s_invariant: str
    beta: float
    evidence: list[str] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    exit_code: int = 0

    def __post_init__(self):
        if self.type == TYPE_III_LAMBDA:
            assert self.s is not None and 0 < self.s < 1
            assert math.isclose(self.lam, self.s ** abs(self.beta), rel_tol=1e-12), \
                "III_lambda verdict must carry lambda = s^|beta|"
        if self.type in (TYPE_SEMIFINITE, TYPE_SEMIFINITE_I, TYPE_SEMIFINITE_II):
            assert self.beta == 0 or self.s == -1.0


def _lambda_value(s: float, s_fraction: Fraction | None, beta: float,
                  alpha: float | None = None):
    """lambda = s^|beta|: exact Fraction power when s is rational and beta
    integral, exp(-alpha*|beta|) when the lattice exponent is the exact
    datum, plain float power otherwise."""
    b = abs(beta)
    if s_fraction is not None and s_fraction > 0:
        if b == int(b):
            lf = s_fraction ** int(b)
            return float(lf), lf
        return float(s_fraction) ** b, None
    if alpha is not None:
        return math.exp(-alpha * b), None
    return s ** b, None


def _s_invariant_text(type_: str, lam: float | None) -> str:
    if type_ in (TYPE_SEMIFINITE, TYPE_SEMIFINITE_I, TYPE_SEMIFINITE_II):
        return "{1}"
    if type_ == TYPE_III_0:
        return "{0, 1}"
    if type_ == TYPE_III_1:
        return "[0,∞)"
    if type_ == TYPE_III_LAMBDA:
        return f"{{0}} ∪ {{λ^z : z ∈ ℤ}}, λ = {lam!r}"
    return "undetermined"


def _verdict(type_: str, s, s_fraction, beta, evidence, assumptions, tags,
             exit_code=0, alpha: float | None = None):
    lam = lamf = None
    if type_ == TYPE_III_LAMBDA:
        lam, lamf = _lambda_value(s, s_fraction, beta, alpha)
    elif type_ == TYPE_III_0:
        lam, lamf = 0.0, Fraction(0)
    elif type_ == TYPE_III_1:
        lam, lamf = 1.0, Fraction(1)
    return FactorVerdict(type_, s, s_fraction, lam, lamf, _s_invariant_text(type_, lam),
                         beta, evidence, assumptions, tags, exit_code)


def _semigroup_to_verdict(sem: DetourSemigroup, beta: float, evidence, assumptions,
                          tags, refine) -> FactorVerdict:
    """Map the detour parameter s through the main case split."""
    if sem.kind == "s-minus-1":
        sub = refine() if refine else None
        if sub == "I_inf":
            evidence.append("unit-potential summable exit, slim: subtype I_inf")
            return _verdict(TYPE_SEMIFINITE_I, -1.0, Fraction(-1), beta, evidence, assumptions, tags)
        if sub == "II_inf":
            evidence.append("unit-potential summable exit, not slim: subtype II_inf")
            return _verdict(TYPE_SEMIFINITE_II, -1.0, Fraction(-1), beta, evidence, assumptions, tags)
        return _verdict(TYPE_SEMIFINITE, -1.0, Fraction(-1), beta, evidence, assumptions, tags)
    if sem.kind == "s-zero":
        return _verdict(TYPE_III_0, 0.0, Fraction(0), beta, evidence, assumptions, tags)
    if sem.kind == "s-full":
        return _verdict(TYPE_III_1, 1.0, Fraction(1), beta, evidence, assumptions, tags)
    alpha = sem.subgroup.alpha if sem.subgroup is not None else None
    return _verdict(TYPE_III_LAMBDA, sem.s, sem.s_fraction, beta, evidence, assumptions,
                    tags, alpha=alpha)


def classify(req: ClassificationRequest) -> FactorVerdict:
    """Full pipeline: simplicity gate, dissipativity, semigroup, case split."""
    family = req.family
    beta = req.beta
    evidence: list[str] = []
    assumptions: list[str] = [
        "extremality and tail concentration of the weight are assumed for preset families",
    ]
    tags: list[str] = []

    simple = check_simplicity(family)
    evidence.append(f"simplicity gate: {simple}")
    if simple == "not-simple":
        raise NotSimpleError("graph algebra is not simple; classification refused")

    if beta == 0:
        evidence.append("beta = 0: invariant weight is a trace, semifinite outright")
        return _verdict(TYPE_SEMIFINITE, None, None, 0.0, evidence, assumptions, tags)

    diss = is_dissipative(family, beta)  # family-kind default horizon schedule
    evidence.extend(f"dissipativity: {c}" for c in diss.certificates[:4])
    cayley = isinstance(family, (CayleyZFamily, CayleyFreeFamily))
    if diss.verdict == "conservative":
        if not cayley:
            evidence.append("conservative regime: out of scope")
            return _verdict(TYPE_UNDECIDED, None, None, beta, evidence, assumptions, tags, exit_code=2)
        assumptions.append(
            "A(beta) is not transient on the tested horizons; the loop-exponent "
            "classification covers the conservative regime as well, conditional on "
            "a KMS state existing at this beta")
        tags.append("conservative-horizon")
    elif diss.verdict == "undecided" and not cayley:
        evidence.append("dissipativity undecided")
        return _verdict(TYPE_UNDECIDED, None, None, beta, evidence, assumptions, tags, exit_code=2)

    detour_v = exit_v = None
    if req.mode in ("detour", "both"):
        detour_v = _detour_lane(req, evidence, assumptions, tags)
    if req.mode in ("exit", "both"):
        exit_v = _exit_lane(req, evidence, assumptions, tags)
    if req.mode == "both" and detour_v is not None and exit_v is not None:
        _cross_check(detour_v, exit_v)
        evidence.append("cross-check: detour and product-tail lanes agree")
    primary = detour_v if detour_v is not None else exit_v
    if primary is None:
        return _verdict(TYPE_UNDECIDED, None, None, beta, evidence, assumptions, tags, exit_code=2)
    return primary


def _detour_lane(req: ClassificationRequest, evidence, assumptions, tags) -> FactorVerdict | None:
    family, beta = req.family, req.beta
    mode = "exact" if req.exact else ("auto" if req.exact is None else "tolerance")
    if isinstance(family, RayFamily):
        res = tail_semigroup(family, req.horizons or (2, 4, 8, 16),
                             req.span or 12, req.mu_len or 12, mode=mode)
        evidence.append(f"detour lane: tail semigroup {res.semigroup.describe()}"
                        + (f" [{res.tag}]" if res.tag else f" (stabilized at horizon {res.stabilized_at})"))
        evidence.extend(f"detour lane: {n}" for n in res.notes)
        if res.tag:
            tags.append("detour-at-horizon")
            return None
        refine = _make_refiner(family, beta)
        return _semigroup_to_verdict(res.semigroup, beta, evidence, assumptions, tags, refine)
    if isinstance(family, (CayleyZFamily, CayleyFreeFamily, ExplicitFamily)):
        th = theta_f(family, req.loop_max_len, mode=mode) if not isinstance(family, ExplicitFamily) else None
        if th is not None:
            if th.kind == "no-kms":
                evidence.append(f"loop lane: {th.note}")
                return _verdict(TYPE_UNDECIDED, None, None, beta, evidence, assumptions,
                                tags + ["no-kms-states"], exit_code=2)
            if th.kind == "dense":
                evidence.append("loop lane: dense loop-difference group, theta -> 0")
                return _verdict(TYPE_III_1, 1.0, Fraction(1), beta, evidence, assumptions, tags)
            if th.kind == "undefined":
                evidence.append(f"loop lane: {th.note}")
                return _verdict(TYPE_UNDECIDED, None, None, beta, evidence, assumptions,
                                tags + ["loops-not-visible"], exit_code=2)
            group = th.group
            evidence.append(
                f"loop lane: difference group {group.subgroup.describe()}, theta_F = {th.theta}"
                + ("" if group.stabilized else " [at-horizon]"))
            if not group.stabilized:
                tags.append("loop-at-horizon")
            sem = classify_semigroup(group.subgroup, True)
            return _semigroup_to_verdict(sem, beta, evidence, assumptions, tags, None)
        # explicit graph: loop differences at the first vertex
        group = loop_difference_group(family, None, req.loop_max_len, mode=mode)
        evidence.append(f"loop lane: difference group {group.subgroup.describe()}"
                        + ("" if group.stabilized else " [at-horizon]"))
        if group.subgroup.kind == "trivial":
            sem = classify_semigroup(group.subgroup, False)
        else:
            sem = classify_semigroup(group.subgroup, True)
        return _semigroup_to_verdict(sem, beta, evidence, assumptions, tags, None)
    return None


def _make_refiner(family: RayFamily, beta: float):
    def refine():
        t = ExitPath(family)
        return semifinite_exit_verdict(t, beta)

    return refine


def _exit_lane(req: ClassificationRequest, evidence, assumptions, tags) -> FactorVerdict | None:
    family, beta = req.family, req.beta
    if not isinstance(family, RayFamily):
        evidence.append("exit lane: no summable exit preset for this family kind; not applicable")
        return None
    t = ExitPath(family)
    summable = check_beta_summable(t, beta)
    evidence.append(f"exit lane: beta-summability {summable.verdict}"
                    + (f", limit {summable.limit:.9g}" if summable.limit is not None else ""))
    if summable.verdict != "summable":
        tags.append("exit-not-summable")
        return None
    spec = product_vectors(t, beta)
    v = classify_product_tail(spec, req.horizons or (2, 4, 8, 16))
    evidence.append(f"exit lane: product tail {v.type}"
                    + (f", lambda {v.lam!r}" if v.lam is not None else "")
                    + (f" [{v.tag}]" if v.tag else ""))
    evidence.extend(f"exit lane: {n}" for n in v.notes)
    if v.tag:
        tags.append("exit-at-horizon")
        return None
    if v.type == "semifinite-I":
        return _verdict(TYPE_SEMIFINITE_I, -1.0, Fraction(-1), beta, evidence, assumptions, tags)
    if v.type == "semifinite-II":
        return _verdict(TYPE_SEMIFINITE_II, -1.0, Fraction(-1), beta, evidence, assumptions, tags)
    if v.type == "semifinite":
        return _verdict(TYPE_SEMIFINITE, -1.0, Fraction(-1), beta, evidence, assumptions, tags)
    if v.type == "III_0":
        return _verdict(TYPE_III_0, 0.0, Fraction(0), beta, evidence, assumptions, tags)
    if v.type == "III_1":
        return _verdict(TYPE_III_1, 1.0, Fraction(1), beta, evidence, assumptions, tags)
    # III_lambda: the product-tail lambda already carries the beta power; recover s
    s = v.lam ** (1.0 / abs(beta))
    s_fraction = None
    if v.lam_fraction is not None and abs(beta) == 1:
        s_fraction = v.lam_fraction
    elif v.lam_fraction is not None and abs(beta) == int(abs(beta)):
        root = _nth_root_fraction(v.lam_fraction, int(abs(beta)))
        s_fraction = root
        if root is not None:
            s = float(root)
    return _verdict(TYPE_III_LAMBDA, s, s_fraction, beta, evidence, assumptions, tags)


def _nth_root_fraction(q: Fraction, n: int) -> Fraction | None:
    def iroot(k: int) -> int | None:
        r = round(k ** (1.0 / n))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** n == k:
                return cand
        return None

    num, den = iroot(q.numerator), iroot(q.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


def _cross_check(a: FactorVerdict, b: FactorVerdict) -> None:
    if a.type != b.type:
        raise CrossCheckError(
            f"verdict lanes disagree: detour says {a.type}, product tail says {b.type}\n"
            f"detour evidence: {a.evidence}\nexit evidence: {b.evidence}")
    if a.type == TYPE_III_LAMBDA:
        if a.lam_fraction is not None and b.lam_fraction is not None:
            if a.lam_fraction != b.lam_fraction:
                raise CrossCheckError(
                    f"lambda mismatch: {a.lam_fraction} vs {b.lam_fraction}")
        elif abs(a.lam - b.lam) > 1e-9 * max(a.lam, b.lam):
            raise CrossCheckError(f"lambda mismatch: {a.lam!r} vs {b.lam!r}")


# ---------------------------------------------------------------------------
# Reports


_FIELDS = ("type", "s", "lambda", "s_invariant", "beta", "evidence", "assumptions", "tags")


def report(verdict: FactorVerdict, fmt: str = "text") -> str:
    """Render a verdict with stable field ordering."""
    lam = verdict.lam
    if fmt == "text":
        lines = [
            f"type: {verdict.type}",
            f"s: {_num_text(verdict.s, verdict.s_fraction)}",
            f"lambda: {_num_text(lam, verdict.lam_fraction)}",
            f"S-invariant: {verdict.s_invariant}",
            f"beta: {verdict.beta!r}",
        ]
        lines.extend(f"evidence: {e}" for e in verdict.evidence)
        lines.extend(f"assumption: {a}" for a in verdict.assumptions)
        lines.extend(f"tag: {t}" for t in verdict.tags)
        return "\n".join(lines)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "type": verdict.type,
        "s": verdict.s,
        "s_exact": str(verdict.s_fraction) if verdict.s_fraction is not None else None,
        "lambda": lam,
        "lambda_exact": str(verdict.lam_fraction) if verdict.lam_fraction is not None else None,
        "s_invariant": verdict.s_invariant,
        "beta": verdict.beta,
        "evidence": verdict.evidence,
        "assumptions": verdict.assumptions,
        "tags": verdict.tags,
    }
    if fmt == "json-lines":
        return json.dumps(payload, ensure_ascii=False)
    if fmt == "csv":
        head = ",".join(_FIELDS)
        row = ",".join([
            verdict.type,
            "" if verdict.s is None else repr(verdict.s),
            "" if lam is None else repr(lam),
            '"' + verdict.s_invariant.replace('"', "'") + '"',
            repr(verdict.beta),
            '"' + "; ".join(verdict.evidence).replace('"', "'") + '"',
            '"' + "; ".join(verdict.assumptions).replace('"', "'") + '"',
            '"' + "; ".join(verdict.tags).replace('"', "'") + '"',
        ])
        return head + "\n" + row
    raise ValueError(f"unknown format {fmt!r}")


def _num_text(x, frac: Fraction | None) -> str:
    if x is None:
        return "n/a"
    if frac is not None:
        return f"{x!r} (exact {frac})"
    return repr(x)
