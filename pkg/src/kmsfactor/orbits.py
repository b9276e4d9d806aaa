"""Monte-Carlo probe of the multiplicative range of the tail cocycle.

Pairs of tail-equivalent paths are sampled, their potential-difference
cocycle c is evaluated, and the values d = exp(-beta*c) are histogrammed on
a log scale.  The detected accumulation points are compared against the
semigroup prediction s^{beta*z}.

Design notes, all load-bearing:

* The base path q is drawn from the reference product measure at
  beta_ref = 1.  Every admissible measure in the class has full support, so
  the detected accumulation set is the same, and keeping the sampling
  measure independent of the run beta makes the scaling law
  range(beta) = range(1)^beta hold bin-exactly for a fixed seed.
* The partner p resamples each level from the same measure with probability
  SUBST_RATE, independently per level up to ``depth``; c is therefore
  exactly symmetric in distribution and confined to a window the predicted
  comparison can compute in closed form.
* Histograms are keyed by the quantized cocycle qc = round(c / width); the
  log-d bin center is -beta * width * qc.  At beta = 1 the log-space bin
  width is exactly ``width``; at other beta it scales with |beta|.
* Sampling runs in fixed-size chunks, each seeded by (seed, chunk index);
  merging integer counts is order-independent, so worker count can never
  change the result.

This is a verification instrument, not a proof instrument: masses below the
detection threshold say nothing about the true essential range.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graphs import Arrow, CayleyFreeFamily, CayleyZFamily, FinitePath, GraphFamily, RayFamily
from .detours import DetourSemigroup

CHUNK = 4096
HIST_WIDTH = 1e-4
MASS_DELTA = 1e-3
SAMPLE_FLOOR = 10**4
SUBST_RATE = 0.3
ESCAPE_LOG = 50.0
BETA_REF = 1.0
ALT_MAX_LEN = 3  # alternative segment length for the Cayley sampler


class TailMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class OrbitPair:
    """A sampled tail-equivalent pair, truncated to its differing prefix."""

    p: FinitePath
    q: FinitePath
    k: int
    c: float
    d_beta: float
    weight: float

    def verify(self) -> None:
        if self.k != len(self.p) - len(self.q):
            raise TailMismatchError("shift offset does not match prefix lengths")


def cocycle_value(p: FinitePath, q: FinitePath, k: int | None = None) -> float:
    """c(p, q) from prefixes that agree past their ends (offset k).

    Evaluated at two cut points; a disagreement or a trailing arrow mismatch
    is an invariant violation.
    """
    if k is None:
        k = len(p) - len(q)
    if k != len(p) - len(q):
        raise TailMismatchError("offset inconsistent with prefix lengths")
    if len(q) >= 1 and len(p) >= 1:
        # two evaluation points: full prefixes, and both shortened by one
        c_full = p.potential - q.potential
        if p.arrows and q.arrows:
            if p.arrows[-1].id != q.arrows[-1].id and p.dst != q.dst:
                raise TailMismatchError("prefixes do not end in a common tail")
            c_prev = (p.potential - p.arrows[-1].potential) - (q.potential - q.arrows[-1].potential)
            if p.arrows[-1].id == q.arrows[-1].id and abs(c_full - c_prev) > 1e-9:
                raise TailMismatchError("cocycle value depends on the cut point")
        return c_full
    return p.potential - q.potential


# ---------------------------------------------------------------------------
# Histogram


@dataclass
class RangeHistogram:
    counts: dict[int, int]
    n_samples: int
    beta: float
    width: float = HIST_WIDTH
    depth: int = 8
    seed: int = 0
    subst_rate: float = SUBST_RATE
    measure_note: str = "reference product measure at beta_ref=1"
    diagonal_only: bool = False

    def bin_log_center(self, qc: int) -> float:
        return -self.beta * self.width * qc

    def masses(self) -> dict[int, float]:
        n = self.n_samples
        return {qc: cnt / n for qc, cnt in self.counts.items()}

    def total_mass(self) -> float:
        return sum(self.counts.values()) / self.n_samples

    def csv_rows(self):
        for qc in sorted(self.counts, key=self.bin_log_center):
            yield self.bin_log_center(qc), self.counts[qc] / self.n_samples


def merge_histograms(parts) -> RangeHistogram:
    parts = list(parts)
    base = parts[0]
    counts: dict[int, int] = {}
    n = 0
    for h in parts:
        n += h.n_samples
        for qc, cnt in h.counts.items():
            counts[qc] = counts.get(qc, 0) + cnt
    return RangeHistogram(counts, n, base.beta, base.width, base.depth, base.seed,
                          base.subst_rate, base.measure_note,
                          all(h.diagonal_only for h in parts))


# ---------------------------------------------------------------------------
# Ray sampling (vectorized, chunked, deterministic)


def _ray_level_tables(family: RayFamily, depth: int):
    """Per-level potential rows and the reference-measure CDF rows."""
    pots, cdfs = [], []
    kmax = 1
    for lvl in range(1, depth + 1):
        vals = [p.value for p in family.spec.level_potentials(lvl)]
        kmax = max(kmax, len(vals))
        w = np.exp(-BETA_REF * np.asarray(vals))
        cdf = np.cumsum(w / w.sum())
        pots.append(vals)
        cdfs.append(cdf)
    prow = np.zeros((depth, kmax))
    for i, vals in enumerate(pots):
        prow[i, :len(vals)] = vals
        prow[i, len(vals):] = vals[-1]
    return pots, cdfs, prow


def _ray_chunk(family: RayFamily, depth: int, rate: float, seed: int,
               chunk_index: int, size: int):
    """Index arrays (q_idx, p_idx) and cocycle values for one chunk."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, chunk_index)))
    u = rng.random((3, size, depth))
    pots, cdfs, prow = _ray_level_tables(family, depth)
    q_idx = np.zeros((size, depth), dtype=np.int64)
    p_idx = np.zeros((size, depth), dtype=np.int64)
    for k in range(depth):
        q_idx[:, k] = np.searchsorted(cdfs[k], u[0, :, k], side="right")
        p_idx[:, k] = np.searchsorted(cdfs[k], u[2, :, k], side="right")
    mask = u[1] < rate
    p_idx = np.where(mask, p_idx, q_idx)
    rows = np.arange(depth)
    c = (prow[rows, p_idx] - prow[rows, q_idx]).sum(axis=1)
    return q_idx, p_idx, c


def _check_alternatives(family: RayFamily, depth: int) -> bool:
    return any(family.spec.multiplicity(k) > 1 for k in range(1, depth + 1))


def sample_histogram(family: GraphFamily, beta: float, samples: int, depth: int = 8,
                     seed: int = 0, rate: float = SUBST_RATE,
                     width: float = HIST_WIDTH) -> RangeHistogram:
    """Histogram of d = exp(-beta c) over ``samples`` sampled pairs."""
    counts: dict[int, int] = {}
    diagonal = False
    if isinstance(family, RayFamily):
        if not _check_alternatives(family, depth):
            warnings.warn("no alternative segments within depth: emitting diagonal pairs only")
            diagonal = True
        done = 0
        chunk_index = 0
        while done < samples:
            size = min(CHUNK, samples - done)
            _, _, c = _ray_chunk(family, depth, rate, seed, chunk_index, size)
            qc = np.rint(c / width).astype(np.int64)
            vals, cnts = np.unique(qc, return_counts=True)
            for v, n in zip(vals.tolist(), cnts.tolist()):
                counts[v] = counts.get(v, 0) + n
            done += size
            chunk_index += 1
    elif isinstance(family, (CayleyZFamily, CayleyFreeFamily)):
        done = 0
        chunk_index = 0
        while done < samples:
            size = min(CHUNK, samples - done)
            for c in _cayley_chunk_c(family, depth, rate, seed, chunk_index, size):
                qc = int(round(c / width))
                counts[qc] = counts.get(qc, 0) + 1
            done += size
            chunk_index += 1
    else:
        raise TypeError("sampling needs a generator-backed family")
    return RangeHistogram(counts, samples, beta, width, depth, seed, rate,
                          diagonal_only=diagonal)


def sample_pairs(family: GraphFamily, beta: float, depth: int = 8,
                 n_samples: int = 1000, seed: int = 0, rate: float = SUBST_RATE):
    """Stream of OrbitPair records (same numbers as the histogram path)."""
    if not isinstance(family, RayFamily):
        raise NotImplementedError("pair records are materialized for ray families")
    if not _check_alternatives(family, depth):
        warnings.warn("no alternative segments within depth: emitting diagonal pairs only")
    weight = 1.0 / n_samples
    done = 0
    chunk_index = 0
    while done < n_samples:
        size = min(CHUNK, n_samples - done)
        q_idx, p_idx, c = _ray_chunk(family, depth, rate, seed, chunk_index, size)
        for s in range(size):
            q_path = _ray_path(family, q_idx[s])
            p_path = _ray_path(family, p_idx[s])
            cc = float(c[s])
            yield OrbitPair(p_path, q_path, 0, cc, math.exp(-beta * cc), weight)
        done += size
        chunk_index += 1


def _ray_path(family: RayFamily, idx_row) -> FinitePath:
    arrows = []
    for lvl0, j in enumerate(idx_row.tolist()):
        lvl = lvl0 + 1
        pots = family.spec.level_potentials(lvl)
        j = min(j, len(pots) - 1)
        p = pots[j]
        arrows.append(Arrow(f"L{lvl}.{j}", f"v{lvl - 1}", f"v{lvl}", p.value, p.exact))
    return FinitePath("v0", tuple(arrows))


# ---------------------------------------------------------------------------
# Cayley sampling (plain loop; a verification surface, not a hot path)


def _cayley_alternatives(family, u, w, exclude_id: str):
    """Alternative segments u -> w (length <= ALT_MAX_LEN) with weights."""
    from .detours import _paths_between

    paths = _paths_between(family, u, w, 1, ALT_MAX_LEN, horizon=-1)
    weights = [math.exp(-BETA_REF * p.potential) for p in paths]
    z = sum(weights)
    return paths, [wt / z for wt in weights]


def _cayley_chunk_c(family, depth: int, rate: float, seed: int,
                    chunk_index: int, size: int):
    rng = np.random.default_rng(np.random.SeedSequence((seed, chunk_index)))
    alt_cache: dict = {}
    out = np.zeros(size)
    for s in range(size):
        v = _cayley_origin(family)
        c = 0.0
        for _step in range(depth):
            arrows = family.out_arrows_struct(v)
            weights = np.array([math.exp(-BETA_REF * p.value) for (_, p, _) in arrows])
            weights /= weights.sum()
            j = int(rng.choice(len(arrows), p=weights))
            dst, pot, aid = arrows[j]
            if rng.random() < rate:
                key = (v, dst)
                if key not in alt_cache:
                    alt_cache[key] = _cayley_alternatives(family, v, dst, aid)
                paths, pw = alt_cache[key]
                i = int(rng.choice(len(paths), p=np.asarray(pw)))
                c += paths[i].potential - pot.value
            v = dst
        out[s] = c
    return out


def _cayley_origin(family):
    if isinstance(family, CayleyZFamily):
        return 0
    return ""


# ---------------------------------------------------------------------------
# Range estimation and prediction comparison


@dataclass
class RangeEstimate:
    points: tuple[tuple[float, float], ...]  # (d value, mass), sorted by value
    zero_mass: float
    inf_mass: float
    low_confidence: bool
    beta: float
    width: float
    delta: float

    def values(self) -> tuple[float, ...]:
        return tuple(v for v, _ in self.points)


def essential_range_estimate(hist: RangeHistogram, delta: float = MASS_DELTA,
                             floor: int = SAMPLE_FLOOR) -> RangeEstimate:
    """Accumulation candidates: bins with mass >= delta, merged when adjacent."""
    masses = hist.masses()
    zero_mass = sum(m for qc, m in masses.items() if hist.bin_log_center(qc) < -ESCAPE_LOG)
    inf_mass = sum(m for qc, m in masses.items() if hist.bin_log_center(qc) > ESCAPE_LOG)
    hot = sorted(qc for qc, m in masses.items() if m >= delta
                 and abs(hist.bin_log_center(qc)) <= ESCAPE_LOG)
    points = []
    i = 0
    while i < len(hot):
        j = i
        while j + 1 < len(hot) and abs(hot[j + 1] - hot[j]) <= 1:
            j += 1
        group = hot[i:j + 1]
        mass = sum(masses[qc] for qc in group)
        center = sum(hist.bin_log_center(qc) * masses[qc] for qc in group) / mass
        points.append((math.exp(center), mass))
        i = j + 1
    points.sort()
    return RangeEstimate(tuple(points), zero_mass, inf_mass,
                         hist.n_samples < floor, hist.beta, hist.width, delta)


def design_mass(family: RayFamily, depth: int, rate: float = SUBST_RATE,
                width: float = HIST_WIDTH) -> dict[int, float]:
    """Exact per-bin expected mass of the ray sampler's cocycle distribution."""
    dist: dict[float, float] = {0.0: 1.0}
    for lvl in range(1, depth + 1):
        vals = [p.value for p in family.spec.level_potentials(lvl)]
        w = np.exp(-BETA_REF * np.asarray(vals))
        probs = w / w.sum()
        step: dict[float, float] = {}
        for qi, pq in enumerate(probs):
            for pi, pp in enumerate(probs):
                dv = vals[pi] - vals[qi]
                pr = pq * (rate * pp + (1.0 - rate) * (1.0 if pi == qi else 0.0))
                if pr > 0:
                    step[round(dv, 12)] = step.get(round(dv, 12), 0.0) + pr
        nxt: dict[float, float] = {}
        for v0, p0 in dist.items():
            for dv, p1 in step.items():
                key = round(v0 + dv, 12)
                nxt[key] = nxt.get(key, 0.0) + p0 * p1
        dist = nxt
    out: dict[int, float] = {}
    for v, p in dist.items():
        qc = int(round(v / width))
        out[qc] = out.get(qc, 0.0) + p
    return out


@dataclass
class AgreementReport:
    agree: bool
    matched: list[tuple[float, float]] = field(default_factory=list)  # (detected, predicted)
    missing: list[float] = field(default_factory=list)
    extra: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def describe(self) -> str:
        lines = [f"agreement: {'yes' if self.agree else 'NO'}"]
        for d, p in self.matched:
            lines.append(f"  matched {d:.9g} ~ predicted {p:.9g}")
        for p in self.missing:
            lines.append(f"  MISSING predicted value {p:.9g}")
        for d in self.extra:
            lines.append(f"  EXTRA detected value {d:.9g}")
        lines.extend("  " + n for n in self.notes)
        return "\n".join(lines)


def compare_to_prediction(est: RangeEstimate, sem: DetourSemigroup, beta: float,
                          expected_bins: dict[int, float] | None = None,
                          delta: float = MASS_DELTA, safety: float = 2.0) -> AgreementReport:
    """Detected accumulation values against the semigroup prediction.

    ``expected_bins`` (from design_mass, keyed by quantized cocycle) fixes
    the window of predicted values whose expected mass makes detection
    statistically certain; predictions outside it cannot be asserted from a
    finite run and are not counted as missing.
    """
    report = AgreementReport(True)
    log_tol = max(3.0 * est.width * max(abs(beta), 1.0), 1e-12)
    if sem.kind == "s-full":
        vals = sorted(math.log(v) for v, _ in est.points)
        if len(vals) < 4:
            report.agree = False
            report.notes.append("dense prediction but fewer than 4 detected values")
        else:
            gaps = [b - a for a, b in zip(vals, vals[1:])]
            report.notes.append(f"dense prediction: {len(vals)} values, max log-gap {max(gaps):.4g}")
        return report
    if sem.kind == "s-zero":
        report.notes.append("prediction {0, 1}: expect a point mass at 1 and escaping mass")
        predicted_logs = [0.0]
    elif sem.kind == "s-minus-1":
        predicted_logs = [0.0]
    else:
        alpha = -math.log(sem.s)
        zmax = 0
        if expected_bins:
            for qc, m in expected_bins.items():
                if m >= safety * delta and qc != 0:
                    zmax = max(zmax, int(round(abs(qc) * est.width / alpha)))
        else:
            zmax = 3
        predicted_logs = [beta * z * (-alpha) for z in range(-zmax, zmax + 1)]
    predicted_logs.sort()
    detected = [(math.log(v), v, m) for v, m in est.points]
    used = set()
    for lv, v, _m in detected:
        best = None
        for i, pl in enumerate(predicted_logs):
            err = abs(lv - pl)
            if err <= log_tol and (best is None or err < best[0]):
                best = (err, i)
        if best is None:
            report.extra.append(v)
            report.agree = False
        else:
            used.add(best[1])
            report.matched.append((v, math.exp(predicted_logs[best[1]])))
    for i, pl in enumerate(predicted_logs):
        if i not in used:
            report.missing.append(math.exp(pl))
            report.agree = False
    return report
