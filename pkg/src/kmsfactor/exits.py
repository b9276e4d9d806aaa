"""Exit paths: summability, conformal measure values, and product-state tails.

An exit path is a vertex spine leaving every finite horizon; each step
carries the parallel arrows joining consecutive spine vertices.  The two
deliverables here are numeric (normalized Green-function ratios along the
spine and their limits, the conformal measure values) and structural (the
infinite-tensor-product state built from the per-step Gibbs vectors, whose
tail ratio group classifies the associated product factor).

The product-tail classification is the independent cross-check for the
detour route: on ray families both must land on the same factor type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import (
    CayleyFreeFamily,
    CayleyZFamily,
    GraphFamily,
    RayFamily,
)
from .green import DEFAULT_GREEN_TOL, DEFAULT_NMAX, build_adjacency, green
from .numbers import ExactReal
from .detours import (
    HorizonDeltaSet,
    TailSemigroupResult,
    classify_tail_sets,
    DEFAULT_HORIZONS,
)

CAUCHY_WINDOW = 5
CAUCHY_TOL = 1e-9
DEFAULT_IMAX = 50
HORIZON_MARGIN = 4


class ExitPath:
    """The canonical exit spine of a generator-backed family."""

    def __init__(self, family: GraphFamily):
        if not isinstance(family, (RayFamily, CayleyZFamily, CayleyFreeFamily)):
            raise TypeError("exit paths are defined for the generator-backed presets")
        self.family = family

    def vertex(self, i: int):
        """Spine vertex t_i, 1-based."""
        return self.family.spine_vertex(i)

    def vertex_id(self, i: int) -> str:
        return self.family.vertex_id(self.vertex(i))

    def step_potentials(self, i: int) -> tuple:
        """Potentials of the arrows from t_i to t_{i+1} (PValue tuple)."""
        src = self.vertex(i)
        dst = self.vertex(i + 1)
        return tuple(p for (w, p, _aid) in self.family.out_arrows_struct(src) if w == dst)

    def step_multiplicity(self, i: int) -> int:
        return len(self.step_potentials(i))

    def step_weight(self, i: int, beta: float) -> float:
        """A(beta) entry along the spine: sum of exp(-beta F) over the step."""
        return math.fsum(math.exp(-beta * p.value) for p in self.step_potentials(i))

    def weight_product(self, i: int, beta: float) -> float:
        """t^beta(i) = product of the first i-1 step weights."""
        out = 1.0
        for k in range(1, i):
            out *= self.step_weight(k, beta)
        return out


@dataclass
class SummabilityReport:
    beta: float
    ratios: tuple[float, ...]
    limit: float | None
    width: float | None
    verdict: str  # "summable" | "not-summable" | "undecided"
    notes: list[str] = field(default_factory=list)


def _spine_ratios(t: ExitPath, beta: float, vertex, i_max: int,
                  tol: float, n_max: int) -> tuple[list[float], list[str]]:
    """r_i = t^beta(i)^{-1} * Green(vertex, t_i) for i = 1..i_max."""
    fam = t.family
    horizon = i_max + HORIZON_MARGIN
    graph = fam.realize_horizon(horizon)
    A = build_adjacency(graph, beta)
    v_id = fam.vertex_id(vertex)
    notes: list[str] = []
    ratios: list[float] = []
    tprod = 1.0
    for i in range(1, i_max + 1):
        if i > 1:
            tprod *= t.step_weight(i - 1, beta)
        res = green(A, v_id, t.vertex_id(i), tol, n_max)
        if res.diverged:
            notes.append(f"Green(v, t_{i}) diverged: {res.status}")
            break
        if not res.converged:
            notes.append(f"Green(v, t_{i}) undecided: {res.status}")
            break
        ratios.append(res.value / tprod)
    return ratios, notes


def check_beta_summable(t: ExitPath, beta: float, i_max: int = DEFAULT_IMAX,
                        tol: float = CAUCHY_TOL, green_tol: float = DEFAULT_GREEN_TOL,
                        n_max: int = DEFAULT_NMAX, window: int = CAUCHY_WINDOW) -> SummabilityReport:
    """Cauchy test on the normalized Green ratios along the exit."""
    vertex = t.vertex(1)
    ratios, notes = _spine_ratios(t, beta, vertex, i_max, green_tol, n_max)
    if len(ratios) < window:
        return SummabilityReport(beta, tuple(ratios), None, None, "undecided", notes)
    tail = ratios[-window:]
    width = max(tail) - min(tail)
    limit = tail[-1]
    if width < tol:
        return SummabilityReport(beta, tuple(ratios), limit, width, "summable", notes)
    # monotone escape to infinity counts as a negative verdict
    diffs = [b - a for a, b in zip(ratios, ratios[1:])]
    if all(d > 0 for d in diffs[-window:]) and tail[-1] > 2 * ratios[0] > 0:
        notes.append("ratios increase without stabilizing")
        return SummabilityReport(beta, tuple(ratios), None, width, "not-summable", notes)
    return SummabilityReport(beta, tuple(ratios), None, width, "undecided", notes)


@dataclass
class ConformalMeasure:
    beta: float
    values: dict[str, tuple[float, float]]  # vertex id -> (estimate, error bar)
    verdict: str
    notes: list[str] = field(default_factory=list)


def conformal_measure(t: ExitPath, beta: float, vertices, i_max: int = DEFAULT_IMAX,
                      tol: float = CAUCHY_TOL, green_tol: float = DEFAULT_GREEN_TOL,
                      n_max: int = DEFAULT_NMAX, window: int = CAUCHY_WINDOW) -> ConformalMeasure:
    """Per-vertex limits of t^beta(i)^{-1} Green(v, t_i) with Cauchy bars."""
    values: dict[str, tuple[float, float]] = {}
    notes: list[str] = []
    verdict = "ok"
    for v in vertices:
        ratios, vnotes = _spine_ratios(t, beta, v, i_max, green_tol, n_max)
        notes.extend(vnotes)
        if len(ratios) < window:
            verdict = "undecided"
            continue
        tail = ratios[-window:]
        width = max(tail) - min(tail)
        vid = t.family.vertex_id(v) if not isinstance(v, str) else v
        values[vid] = (tail[-1], width)
        if width >= tol:
            verdict = "undecided"
            notes.append(f"vertex {vid}: Cauchy width {width:.3g} above tol")
    return ConformalMeasure(beta, values, verdict, notes)


def is_slim(t: ExitPath, horizon_schedule=(8, 16, 32, 64)) -> bool:
    """Eventually one arrow per step, decided by the family's tail rule.

    The realized multiplicities at the scheduled indices are checked against
    the rule as a consistency guard.
    """
    fam = t.family
    if isinstance(fam, RayFamily):
        target = fam.spec.eventual_multiplicity()
        slim = target == 1
        if fam.spec.tail.kind == "periodic" and target is None:
            slim = False  # multiplicity oscillates, the limit does not exist
    else:
        # Cayley steps repeat one generator; multiplicity is the label count.
        slim = t.step_multiplicity(1) == 1
    for i in horizon_schedule:
        k = t.step_multiplicity(int(i))
        if slim and isinstance(fam, RayFamily) and fam.spec.tail.kind == "constant":
            if i > len(fam.spec.levels) and k != 1:
                raise AssertionError("tail rule and realized multiplicity disagree")
    return slim


@dataclass
class ProductStateSpec:
    """Per-step Gibbs probability vectors of the product state."""

    exit_path: ExitPath
    beta: float

    def vector(self, i: int) -> tuple[float, ...]:
        pots = self.exit_path.step_potentials(i)
        weights = [math.exp(-self.beta * p.value) for p in pots]
        z = math.fsum(weights)
        return tuple(w / z for w in weights)

    def log_ratios(self, i: int) -> tuple:
        """log(p_j / p_1) = -beta (F_j - F_1), exact when potentials are."""
        pots = self.exit_path.step_potentials(i)
        if all(p.exact is not None for p in pots) and _beta_fraction(self.beta) is not None:
            bq = _beta_fraction(self.beta)
            base = pots[0].exact
            return tuple((base - p.exact).scale(bq) for p in pots[1:])
        base = pots[0].value
        return tuple(-self.beta * (p.value - base) for p in pots[1:])

    def first_vectors(self, count: int = 10) -> list[tuple[float, ...]]:
        return [self.vector(i) for i in range(1, count + 1)]


def _beta_fraction(beta: float) -> Fraction | None:
    q = Fraction(beta).limit_denominator(10**6)
    return q if float(q) == beta else None


def product_vectors(t: ExitPath, beta: float) -> ProductStateSpec:
    """Normalized (exp(-beta F_j))_j per step."""
    return ProductStateSpec(t, beta)


@dataclass
class ProductTailVerdict:
    type: str  # "semifinite-I" | "semifinite-II" | "semifinite" | "III_lambda" | "III_0" | "III_1" | "unsupported"
    lam: float | None
    lam_fraction: Fraction | None
    stabilized: bool
    tag: str
    detail: TailSemigroupResult | None = None
    notes: list[str] = field(default_factory=list)


def classify_product_tail(spec: ProductStateSpec, horizons=DEFAULT_HORIZONS,
                          window: int = 24, gauge: bool | None = None,
                          slim: bool | None = None) -> ProductTailVerdict:
    """Type of the product factor from the tail group of entry log-ratios.

    Reuses the subgroup/stabilization machinery on the per-step log-ratio
    sets restricted to tails: a stable lattice is the constant-ratio matrix
    case (type III_lambda), a dense group gives III_1, a degenerating group
    with unbounded ratios gives III_0, and trivial tails are semifinite
    (type I when the exit is slim, type II for the non-slim unit-potential
    case, subtype undetermined otherwise).
    """
    t = spec.exit_path
    fam = t.family
    if isinstance(fam, RayFamily) and fam.spec.tail.kind not in ("constant", "periodic", "formula"):
        return ProductTailVerdict("unsupported", None, None, False, "unsupported",
                                  notes=[f"unsupported sequence kind {fam.spec.tail.kind}"])
    if gauge is None:
        gauge = fam.is_gauge()
    if slim is None:
        slim = is_slim(t)
    sets = []
    for h in horizons:
        first = h + 2
        deltas: list = []
        lo: list[float] = []
        hi: list[float] = []
        exact = True
        for i in range(first, first + window):
            ratios = spec.log_ratios(i)
            for r in ratios:
                deltas.append(r)
                deltas.append(-r)
                exact = exact and isinstance(r, ExactReal)
            fv = [abs(float(r)) for r in ratios] or [0.0]
            lo.append(-max(fv))
            hi.append(max(fv))
        lo.sort()
        hi.sort(reverse=True)
        span = min(12, window)
        sets.append(HorizonDeltaSet(h, tuple(deltas), exact and bool(deltas), span,
                                    span, window, sum(lo[:span]), sum(hi[:span])))
    result = classify_tail_sets(sets)
    sem = result.semigroup
    if sem.kind == "s-minus-1":
        if slim:
            return ProductTailVerdict("semifinite-I", None, None, result.stabilized,
                                      result.tag, result,
                                      ["tail vectors eventually degenerate: type I"])
        if gauge:
            return ProductTailVerdict("semifinite-II", None, None, result.stabilized,
                                      result.tag, result,
                                      ["unit potential, non-slim: hyperfinite type II tail"])
        return ProductTailVerdict("semifinite", None, None, result.stabilized, result.tag,
                                  result, ["trivial tail ratios: semifinite, subtype undetermined"])
    if sem.kind == "s-zero":
        return ProductTailVerdict("III_0", 0.0, Fraction(0), result.stabilized, result.tag, result)
    if sem.kind == "s-full":
        return ProductTailVerdict("III_1", 1.0, Fraction(1), result.stabilized, result.tag, result)
    # geometric: the ratios were already scaled by beta, so s IS lambda here
    return ProductTailVerdict("III_lambda", sem.s, sem.s_fraction, result.stabilized,
                              result.tag, result)


def semifinite_exit_verdict(t: ExitPath, beta: float, summable: str | None = None) -> str:
    """"I_inf" / "II_inf" under the unit potential, else "not applicable"."""
    if not t.family.is_gauge():
        return "not applicable"
    if summable is None:
        summable = check_beta_summable(t, beta).verdict
    if summable != "summable":
        return "not applicable"
    return "I_inf" if is_slim(t) else "II_inf"
