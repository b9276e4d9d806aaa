"""Directed multigraphs with arrow potentials, and finitely described families.

A graph is either explicit (finite, fully materialized) or one of three
generator-backed infinite families:

* ``ray``          -- a one-way chain of levels, ``k_n`` parallel arrows from
                      level n-1 to level n, potentials given per level by a
                      table and/or a tail rule;
* ``cayley-z``     -- the integers with an arrow g -> g+y per generator y;
* ``cayley-free``  -- a free group on letters with an arrow w -> w*y per
                      signed letter y (reduced words as vertices).

Families expose lazy structural navigation (``out_arrows_struct``) plus
finite horizon realizations along a canonical exhaustion: levels for rays,
word-metric balls for the Cayley kinds.  Horizons are monotone in n and
deterministic.  Graphs and families are immutable after construction.

Input format (UTF-8, line oriented, '#' comments)::

    [graph]
    kind = explicit | ray | cayley-z | cayley-free
    rationals = true | false          # optional, default false
    # explicit:
    vertex <id>
    arrow <src> <dst> <F-value>
    # ray:
    level <n> <F-value> [<F-value> ...]
    tail = constant | periodic | formula:<name>[:<p/q>]
    offset = <int>                    # optional, used by shifted views
    # cayley kinds:
    gen <label> <F-value>             # labels: nonzero ints / a+ a- b+ ...

F-values are decimals or ``p/q`` rationals.  Named tail formulas:
``formula:const-lambda:<p/q>`` gives two arrows per level with potentials
(1, 1 - ln(lam)); ``formula:lambda-exp2k`` gives (1, 1 + 2^k) at level k.
Sinks and infinite emitters are rejected at parse time.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import math

from .numbers import ExactReal, parse_number


class GraphFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class HorizonLimitError(RuntimeError):
    """Raised when a horizon realization would exceed the vertex cap."""


@dataclass(frozen=True)
class PValue:
    """A potential value: float for numerics, exact form when available."""

    value: float
    exact: ExactReal | None = None

    @staticmethod
    def from_fraction(q: Fraction, exact_mode: bool) -> "PValue":
        return PValue(float(q), ExactReal.from_fraction(q) if exact_mode else None)

    @staticmethod
    def from_exact(x: ExactReal) -> "PValue":
        return PValue(float(x), x)


@dataclass(frozen=True)
class Arrow:
    id: str
    src: str
    dst: str
    potential: float
    exact: ExactReal | None = None


@dataclass(frozen=True)
class FinitePath:
    """A path as an arrow tuple; a bare vertex is the length-0 path at it."""

    src: str
    arrows: tuple[Arrow, ...] = ()

    def __post_init__(self):
        v = self.src
        for a in self.arrows:
            if a.src != v:
                raise ValueError(f"broken path: arrow {a.id} starts at {a.src}, expected {v}")
            v = a.dst

    @property
    def dst(self) -> str:
        return self.arrows[-1].dst if self.arrows else self.src

    def __len__(self) -> int:
        return len(self.arrows)

    @property
    def potential(self) -> float:
        return math.fsum(a.potential for a in self.arrows)

    @property
    def potential_exact(self) -> ExactReal | None:
        total = ExactReal()
        for a in self.arrows:
            if a.exact is None:
                return None
            total = total + a.exact
        return total

    def concat(self, other: "FinitePath") -> "FinitePath":
        if other.src != self.dst:
            raise ValueError("paths do not concatenate")
        return FinitePath(self.src, self.arrows + other.arrows)


def potential_of_path(p: FinitePath) -> float:
    """Sum of arrow potentials; 0 for a length-0 path."""
    return p.potential


class Graph:
    """A finite directed multigraph with consistent out/in indexes."""

    def __init__(self, vertices: Sequence[str], arrows: Sequence[Arrow]):
        self.vertices: tuple[str, ...] = tuple(vertices)
        self.arrows: tuple[Arrow, ...] = tuple(arrows)
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise GraphFormatError("duplicate vertex id")
        self._out: dict[str, list[Arrow]] = {v: [] for v in self.vertices}
        self._in: dict[str, list[Arrow]] = {v: [] for v in self.vertices}
        for a in self.arrows:
            if a.src not in vset:
                raise GraphFormatError(f"arrow {a.id} references unknown vertex {a.src!r}")
            if a.dst not in vset:
                raise GraphFormatError(f"arrow {a.id} references unknown vertex {a.dst!r}")
            self._out[a.src].append(a)
            self._in[a.dst].append(a)

    def out_arrows(self, v: str) -> tuple[Arrow, ...]:
        return tuple(self._out[v])

    def in_arrows(self, v: str) -> tuple[Arrow, ...]:
        return tuple(self._in[v])

    def has_vertex(self, v: str) -> bool:
        return v in self._out

    def arrows_between(self, v: str, w: str) -> tuple[Arrow, ...]:
        return tuple(a for a in self._out[v] if a.dst == w)

    def __repr__(self) -> str:
        return f"Graph({len(self.vertices)} vertices, {len(self.arrows)} arrows)"


# ---------------------------------------------------------------------------
# Ray tail rules


@dataclass(frozen=True)
class TailRule:
    """Continuation rule past the tabulated levels of a ray."""

    kind: str  # "constant" | "periodic" | "formula"
    formula: str | None = None
    param: Fraction | None = None

    def describe(self) -> str:
        if self.kind == "formula":
            if self.param is not None:
                return f"formula:{self.formula}:{self.param}"
            return f"formula:{self.formula}"
        return self.kind


_FORMULAS = ("const-lambda", "lambda-exp2k")


@dataclass(frozen=True)
class SequenceSpec:
    """Per-level potentials of a ray: finite table plus deterministic tail.

    ``kind`` is derived: constant / periodic / tabulated-with-tail /
    named-formula.  ``offset`` shifts formula indices; shifted views of a
    family use it so tail rules keep their meaning after deleting levels.
    """

    levels: tuple[tuple[PValue, ...], ...]
    tail: TailRule
    rationals: bool = False
    offset: int = 0

    def __post_init__(self):
        for lvl in self.levels:
            if len(lvl) < 1:
                raise GraphFormatError("ray level must have at least one arrow")
        if self.tail.kind == "formula":
            if self.tail.formula not in _FORMULAS:
                raise GraphFormatError(f"unknown tail formula {self.tail.formula!r}")
            if self.tail.formula == "const-lambda":
                lam = self.tail.param
                if lam is None or not (0 < lam < 1):
                    raise GraphFormatError("const-lambda needs a ratio in (0,1)")
        elif not self.levels:
            raise GraphFormatError("ray without levels needs a formula tail")

    @property
    def kind(self) -> str:
        if self.tail.kind == "formula" and not self.levels:
            return "named-formula"
        if self.tail.kind == "periodic":
            return "periodic"
        if self.tail.kind == "constant" and len(self.levels) == 1:
            return "constant"
        return "tabulated-with-tail"

    def level_potentials(self, n: int) -> tuple[PValue, ...]:
        """Potentials of the parallel arrows at level n >= 1."""
        if n < 1:
            raise ValueError("levels are 1-based")
        if n <= len(self.levels):
            return self.levels[n - 1]
        if self.tail.kind == "constant":
            return self.levels[-1]
        if self.tail.kind == "periodic":
            return self.levels[(n - 1) % len(self.levels)]
        return self._formula_level(n + self.offset)

    def _formula_level(self, k: int) -> tuple[PValue, ...]:
        if self.tail.formula == "const-lambda":
            lam = self.tail.param
            one = PValue.from_fraction(Fraction(1), self.rationals)
            if self.rationals:
                second = PValue.from_exact(ExactReal.from_fraction(1) - ExactReal.ln(lam))
            else:
                second = PValue(1.0 - math.log(lam))
            return (one, second)
        # lambda-exp2k: ratio exp(-2^k), so the second potential is 1 + 2^k.
        one = PValue.from_fraction(Fraction(1), self.rationals)
        second = PValue.from_fraction(Fraction(1) + Fraction(2) ** k, self.rationals)
        return (one, second)

    def multiplicity(self, n: int) -> int:
        return len(self.level_potentials(n))

    def eventual_multiplicity(self) -> int | None:
        """The limit of k_n if the tail rule forces one, else None."""
        if self.tail.kind == "constant":
            return len(self.levels[-1])
        if self.tail.kind == "periodic":
            sizes = {len(l) for l in self.levels}
            return sizes.pop() if len(sizes) == 1 else None
        return 2  # both named formulas have two arrows per level

    def shifted(self, m: int = 1) -> "SequenceSpec":
        """The spec with the first m levels deleted (level n maps to n+m)."""
        if m < 0:
            raise ValueError("shift must be nonnegative")
        if self.tail.kind == "periodic":
            rot = [self.level_potentials(n) for n in range(m + 1, m + 1 + len(self.levels))]
            return SequenceSpec(tuple(rot), self.tail, self.rationals, self.offset)
        if self.tail.kind == "constant":
            rest = self.levels[m:] if m < len(self.levels) else (self.levels[-1],)
            return SequenceSpec(rest, self.tail, self.rationals, self.offset)
        return SequenceSpec(self.levels[m:], self.tail, self.rationals, self.offset + m)


# ---------------------------------------------------------------------------
# Families


class GraphFamily:
    """Common surface of the four family kinds."""

    kind: str
    rationals: bool

    # structural navigation ------------------------------------------------
    def out_arrows_struct(self, v) -> tuple:  # (dst_key, potential PValue, arrow id)
        raise NotImplementedError

    def vertex_id(self, v) -> str:
        raise NotImplementedError

    def in_horizon(self, v, n: int) -> bool:
        raise NotImplementedError

    def spine_vertex(self, i: int):
        """Vertex t_i (1-based) of the canonical wandering spine."""
        raise NotImplementedError

    def realize_horizon(self, n: int, vertex_cap: int = 200_000) -> Graph:
        raise NotImplementedError

    def serialize(self) -> str:
        raise NotImplementedError

    def is_gauge(self, probe_levels: int = 64) -> bool:
        """True when every reachable potential equals 1 exactly."""
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.serialize() == other.serialize()

    def __hash__(self) -> int:
        return hash(self.serialize())


class ExplicitFamily(GraphFamily):
    kind = "explicit"

    def __init__(self, graph: Graph, rationals: bool = False):
        self.graph = graph
        self.rationals = rationals
        for v in graph.vertices:
            if not graph.out_arrows(v):
                raise GraphFormatError(f"vertex {v!r} is a sink; sinks are not supported")

    def out_arrows_struct(self, v):
        return tuple((a.dst, PValue(a.potential, a.exact), a.id) for a in self.graph.out_arrows(v))

    def vertex_id(self, v) -> str:
        return v

    def in_horizon(self, v, n: int) -> bool:
        return True  # the exhaustion of a finite graph is the whole graph

    def spine_vertex(self, i: int):
        raise ValueError("explicit graphs have no canonical wandering spine")

    def realize_horizon(self, n: int, vertex_cap: int = 200_000) -> Graph:
        if n < 1:
            raise ValueError("horizon must be >= 1")
        return self.graph

    def serialize(self) -> str:
        lines = ["[graph]", "kind = explicit", f"rationals = {'true' if self.rationals else 'false'}"]
        for v in sorted(self.graph.vertices):
            lines.append(f"vertex {v}")
        for a in sorted(self.graph.arrows, key=lambda a: (a.src, a.dst, a.id)):
            lines.append(f"arrow {a.src} {a.dst} {_format_value(a)}")
        return "\n".join(lines) + "\n"

    def is_gauge(self, probe_levels: int = 64) -> bool:
        return all(_is_one(a.potential, a.exact) for a in self.graph.arrows)


class RayFamily(GraphFamily):
    kind = "ray"

    def __init__(self, spec: SequenceSpec):
        self.spec = spec
        self.rationals = spec.rationals

    # vertices are integers 0,1,2,...; level n joins n-1 to n
    def out_arrows_struct(self, v: int):
        pots = self.spec.level_potentials(v + 1)
        return tuple((v + 1, p, f"L{v + 1}.{j}") for j, p in enumerate(pots))

    def vertex_id(self, v: int) -> str:
        return f"v{v}"

    def in_horizon(self, v: int, n: int) -> bool:
        return v <= n

    def spine_vertex(self, i: int) -> int:
        return i - 1  # t_1 = v0, t_2 = v1, ...

    def realize_horizon(self, n: int, vertex_cap: int = 200_000) -> Graph:
        if n < 1:
            raise ValueError("horizon must be >= 1")
        if n + 1 > vertex_cap:
            raise HorizonLimitError(f"ray horizon {n} exceeds vertex cap {vertex_cap}")
        vertices = [f"v{i}" for i in range(n + 1)]
        arrows = []
        for lvl in range(1, n + 1):
            for j, p in enumerate(self.spec.level_potentials(lvl)):
                arrows.append(Arrow(f"L{lvl}.{j}", f"v{lvl - 1}", f"v{lvl}", p.value, p.exact))
        return Graph(vertices, arrows)

    def serialize(self) -> str:
        lines = ["[graph]", "kind = ray", f"rationals = {'true' if self.rationals else 'false'}"]
        for i, lvl in enumerate(self.spec.levels, start=1):
            vals = " ".join(_format_pvalue(p) for p in lvl)
            lines.append(f"level {i} {vals}")
        lines.append(f"tail = {self.spec.tail.describe()}")
        if self.spec.offset:
            lines.append(f"offset = {self.spec.offset}")
        return "\n".join(lines) + "\n"

    def is_gauge(self, probe_levels: int = 64) -> bool:
        if self.spec.tail.kind == "formula":
            return False  # both formulas carry a non-unit second arrow
        for n in range(1, max(probe_levels, len(self.spec.levels) + 1)):
            if not all(_is_one(p.value, p.exact) for p in self.spec.level_potentials(n)):
                return False
        return True

    def shifted(self, m: int = 1) -> "RayFamily":
        return RayFamily(self.spec.shifted(m))


class CayleyZFamily(GraphFamily):
    kind = "cayley-z"

    def __init__(self, gens: Sequence[tuple[int, PValue]], rationals: bool = False):
        if len(gens) < 2:
            raise GraphFormatError("cayley kinds need at least two generators")
        labels = [g for g, _ in gens]
        if len(set(labels)) != len(labels):
            raise GraphFormatError("duplicate generator label")
        if any(g == 0 for g in labels):
            raise GraphFormatError("cayley-z generator labels must be nonzero integers")
        self.gens = tuple(sorted(gens, key=lambda t: t[0]))
        self.rationals = rationals

    def out_arrows_struct(self, v: int):
        return tuple((v + y, p, f"{v}:{y:+d}") for y, p in self.gens)

    def vertex_id(self, v: int) -> str:
        return str(v)

    def in_horizon(self, v: int, n: int) -> bool:
        return abs(v) <= n

    def spine_vertex(self, i: int) -> int:
        step = min(y for y, _ in self.gens if y > 0) if any(y > 0 for y, _ in self.gens) else max(y for y, _ in self.gens)
        return (i - 1) * step

    def realize_horizon(self, n: int, vertex_cap: int = 200_000) -> Graph:
        if n < 1:
            raise ValueError("horizon must be >= 1")
        if 2 * n + 1 > vertex_cap:
            raise HorizonLimitError(f"ball of radius {n} exceeds vertex cap {vertex_cap}")
        vertices = [str(g) for g in range(-n, n + 1)]
        arrows = []
        for g in range(-n, n + 1):
            for y, p in self.gens:
                h = g + y
                if -n <= h <= n:
                    arrows.append(Arrow(f"{g}:{y:+d}", str(g), str(h), p.value, p.exact))
        return Graph(vertices, arrows)

    def serialize(self) -> str:
        lines = ["[graph]", "kind = cayley-z", f"rationals = {'true' if self.rationals else 'false'}"]
        for y, p in self.gens:
            lines.append(f"gen {y:+d} {_format_pvalue(p)}")
        return "\n".join(lines) + "\n"

    def is_gauge(self, probe_levels: int = 64) -> bool:
        return all(_is_one(p.value, p.exact) for _, p in self.gens)


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _free_mul(word: str, letter: str) -> str:
    """Right-multiply a reduced word by a signed letter (case = inverse)."""
    if word and word[-1] == letter.swapcase():
        return word[:-1]
    return word + letter


class CayleyFreeFamily(GraphFamily):
    kind = "cayley-free"

    def __init__(self, gens: Sequence[tuple[str, PValue]], rationals: bool = False):
        if len(gens) < 2:
            raise GraphFormatError("cayley kinds need at least two generators")
        labels = [g for g, _ in gens]
        if len(set(labels)) != len(labels):
            raise GraphFormatError("duplicate generator label")
        for g in labels:
            if len(g) != 1 or g.lower() not in _LETTERS:
                raise GraphFormatError(f"bad free-group generator {g!r}")
        self.gens = tuple(sorted(gens, key=lambda t: (t[0].lower(), t[0].isupper())))
        self.rationals = rationals

    def out_arrows_struct(self, v: str):
        return tuple((_free_mul(v, y), p, f"{v or 'e'}:{_label_out(y)}") for y, p in self.gens)

    def vertex_id(self, v: str) -> str:
        return v if v else "e"

    def in_horizon(self, v: str, n: int) -> bool:
        return len(v) <= n

    def spine_vertex(self, i: int) -> str:
        y = self.gens[0][0]
        return y * (i - 1)

    def realize_horizon(self, n: int, vertex_cap: int = 200_000) -> Graph:
        if n < 1:
            raise ValueError("horizon must be >= 1")
        words: list[str] = [""]
        frontier = [""]
        letters = [y for y, _ in self.gens]
        seen = {""}
        for _ in range(n):
            nxt = []
            for w in frontier:
                for y in letters:
                    u = _free_mul(w, y)
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
                        if len(seen) > vertex_cap:
                            raise HorizonLimitError(f"ball of radius {n} exceeds vertex cap {vertex_cap}")
            words.extend(nxt)
            frontier = nxt
        words.sort(key=lambda w: (len(w), w))
        arrows = []
        for w in words:
            for y, p in self.gens:
                u = _free_mul(w, y)
                if u in seen:
                    arrows.append(Arrow(f"{w or 'e'}:{_label_out(y)}", w or "e", u or "e", p.value, p.exact))
        return Graph([w or "e" for w in words], arrows)

    def serialize(self) -> str:
        lines = ["[graph]", "kind = cayley-free", f"rationals = {'true' if self.rationals else 'false'}"]
        for y, p in self.gens:
            lines.append(f"gen {_label_out(y)} {_format_pvalue(p)}")
        return "\n".join(lines) + "\n"

    def is_gauge(self, probe_levels: int = 64) -> bool:
        return all(_is_one(p.value, p.exact) for _, p in self.gens)


def _label_out(letter: str) -> str:
    return letter.lower() + ("-" if letter.isupper() else "+")


def _is_one(value: float, exact: ExactReal | None) -> bool:
    if exact is not None:
        return (exact - ExactReal.from_fraction(1)).is_zero()
    return value == 1.0


def _format_pvalue(p: PValue) -> str:
    if p.exact is not None and not p.exact.logs:
        return str(p.exact.rat)
    return repr(p.value)


def _format_value(a: Arrow) -> str:
    return _format_pvalue(PValue(a.potential, a.exact))


# ---------------------------------------------------------------------------
# Parser


def parse_graph(text: str) -> GraphFamily:
    """Parse a graph-description document into a validated family."""
    kind: str | None = None
    rationals = False
    vertices: list[str] = []
    varrows: list[tuple[str, str, Fraction, int]] = []
    levels: dict[int, list[Fraction]] = {}
    tail: TailRule | None = None
    offset = 0
    gens: list[tuple[str, Fraction]] = []
    saw_header = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[graph]":
            if saw_header:
                raise GraphFormatError("duplicate [graph] header", lineno)
            saw_header = True
            continue
        if not saw_header:
            raise GraphFormatError("content before [graph] header", lineno)
        if "=" in line and line.split()[0] not in ("vertex", "arrow", "level", "gen"):
            key, _, value = (s.strip() for s in line.partition("="))
            if key == "kind":
                if value not in ("explicit", "ray", "cayley-z", "cayley-free"):
                    raise GraphFormatError(f"unknown kind {value!r}", lineno)
                kind = value
            elif key == "rationals":
                if value not in ("true", "false"):
                    raise GraphFormatError("rationals must be true or false", lineno)
                rationals = value == "true"
            elif key == "tail":
                tail = _parse_tail(value, lineno)
            elif key == "offset":
                try:
                    offset = int(value)
                except ValueError:
                    raise GraphFormatError("offset must be an integer", lineno)
            else:
                raise GraphFormatError(f"unknown key {key!r}", lineno)
            continue
        parts = line.split()
        word = parts[0]
        if word == "vertex":
            if len(parts) != 2:
                raise GraphFormatError("vertex takes one id", lineno)
            vertices.append(parts[1])
        elif word == "arrow":
            if len(parts) != 4:
                raise GraphFormatError("arrow takes src dst value", lineno)
            try:
                val = parse_number(parts[3])
            except ValueError as exc:
                raise GraphFormatError(str(exc), lineno)
            varrows.append((parts[1], parts[2], val, lineno))
        elif word == "level":
            if len(parts) < 3:
                raise GraphFormatError("level takes an index and at least one value", lineno)
            try:
                idx = int(parts[1])
            except ValueError:
                raise GraphFormatError("level index must be an integer", lineno)
            if idx in levels:
                raise GraphFormatError(f"duplicate level {idx}", lineno)
            try:
                levels[idx] = [parse_number(s) for s in parts[2:]]
            except ValueError as exc:
                raise GraphFormatError(str(exc), lineno)
        elif word == "gen":
            if len(parts) != 3:
                raise GraphFormatError("gen takes a label and a value", lineno)
            try:
                val = parse_number(parts[2])
            except ValueError as exc:
                raise GraphFormatError(str(exc), lineno)
            gens.append((parts[1], val))
        else:
            raise GraphFormatError(f"unknown directive {word!r}", lineno)

    if not saw_header:
        raise GraphFormatError("missing [graph] header")
    if kind is None:
        raise GraphFormatError("missing kind")

    if kind == "explicit":
        if levels or gens:
            raise GraphFormatError("explicit graphs take vertex/arrow lines only")
        arrows = []
        for i, (src, dst, val, lineno) in enumerate(varrows):
            if src not in vertices:
                raise GraphFormatError(f"arrow references unknown vertex {src!r}", lineno)
            if dst not in vertices:
                raise GraphFormatError(f"arrow references unknown vertex {dst!r}", lineno)
            pv = PValue.from_fraction(val, rationals)
            arrows.append(Arrow(f"a{i}", src, dst, pv.value, pv.exact))
        graph = Graph(vertices, arrows)
        return ExplicitFamily(graph, rationals)

    if kind == "ray":
        if vertices or varrows or gens:
            raise GraphFormatError("ray graphs take level lines only")
        if levels:
            expected = list(range(1, len(levels) + 1))
            if sorted(levels) != expected:
                raise GraphFormatError("ray levels must be numbered 1..N without gaps")
        table = tuple(
            tuple(PValue.from_fraction(v, rationals) for v in levels[i]) for i in sorted(levels)
        )
        rule = tail if tail is not None else TailRule("constant")
        spec = SequenceSpec(table, rule, rationals, offset)
        return RayFamily(spec)

    # cayley kinds
    if vertices or varrows or levels:
        raise GraphFormatError("cayley graphs take gen lines only")
    if kind == "cayley-z":
        zgens = []
        for label, val in gens:
            try:
                y = int(label)
            except ValueError:
                raise GraphFormatError(f"cayley-z labels are nonzero integers, got {label!r}")
            if y == 0:
                raise GraphFormatError("cayley-z labels must be nonzero")
            zgens.append((y, PValue.from_fraction(val, rationals)))
        return CayleyZFamily(zgens, rationals)
    fgens = []
    for label, val in gens:
        if len(label) != 2 or label[0].lower() not in _LETTERS or label[1] not in "+-":
            raise GraphFormatError(f"cayley-free labels look like a+ or b-, got {label!r}")
        letter = label[0].lower() if label[1] == "+" else label[0].upper()
        fgens.append((letter, PValue.from_fraction(val, rationals)))
    return CayleyFreeFamily(fgens, rationals)


def _parse_tail(value: str, lineno: int) -> TailRule:
    if value == "constant":
        return TailRule("constant")
    if value == "periodic":
        return TailRule("periodic")
    if value.startswith("formula:"):
        rest = value[len("formula:"):]
        if ":" in rest:
            name, _, param = rest.partition(":")
            try:
                return TailRule("formula", name, parse_number(param))
            except ValueError as exc:
                raise GraphFormatError(str(exc), lineno)
        return TailRule("formula", rest, None)
    raise GraphFormatError(f"unknown tail rule {value!r}", lineno)


def parse_graph_file(path) -> GraphFamily:
    from pathlib import Path

    return parse_graph(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Structure checks


def _reachable(graph: Graph, start: str, forward: bool = True) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        nbrs = graph.out_arrows(v) if forward else graph.in_arrows(v)
        for a in nbrs:
            w = a.dst if forward else a.src
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def is_strongly_connected(graph: Graph) -> bool:
    if not graph.vertices:
        return True
    v0 = graph.vertices[0]
    if _reachable(graph, v0, forward=True) != set(graph.vertices):
        return False
    return _reachable(graph, v0, forward=False) == set(graph.vertices)


def strongly_connected_components(graph: Graph) -> list[set[str]]:
    """Kosaraju on the (small) finite graphs this artifact handles."""
    order: list[str] = []
    seen: set[str] = set()
    for root in graph.vertices:
        if root in seen:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        seen.add(root)
        while stack:
            v, i = stack[-1]
            outs = graph.out_arrows(v)
            if i < len(outs):
                stack[-1] = (v, i + 1)
                w = outs[i].dst
                if w not in seen:
                    seen.add(w)
                    stack.append((w, 0))
            else:
                order.append(v)
                stack.pop()
    comp: dict[str, int] = {}
    comps: list[set[str]] = []
    for root in reversed(order):
        if root in comp:
            continue
        cur = {root}
        comp[root] = len(comps)
        stack2 = [root]
        while stack2:
            v = stack2.pop()
            for a in graph.in_arrows(v):
                if a.src not in comp:
                    comp[a.src] = len(comps)
                    cur.add(a.src)
                    stack2.append(a.src)
        comps.append(cur)
    return comps


def _cycle_sccs(graph: Graph) -> list[set[str]]:
    out = []
    for c in strongly_connected_components(graph):
        if len(c) > 1:
            out.append(c)
        else:
            v = next(iter(c))
            if any(a.dst == v for a in graph.out_arrows(v)):
                out.append(c)
    return out


def _every_cycle_has_exit(graph: Graph) -> bool:
    # A cycle with no exit runs through vertices of out-degree exactly 1,
    # so it shows up as a cycle in the unique-successor subgraph.
    succ = {v: graph.out_arrows(v)[0].dst for v in graph.vertices if len(graph.out_arrows(v)) == 1}
    state: dict[str, int] = {}
    for start in succ:
        if state.get(start):
            continue
        path = []
        v = start
        while v in succ and state.get(v, 0) == 0:
            state[v] = 1
            path.append(v)
            v = succ[v]
        if v in succ and state.get(v) == 1:
            return False  # closed loop of out-degree-1 vertices
        for u in path:
            state[u] = 2
    return True


def check_simplicity(target, row_finite: bool = True) -> str:
    """Simplicity verdict: "simple", "not-simple" or "undecided".

    Finite explicit graphs use the row-finite criterion (cofinal and every
    cycle has an exit, specialized to finite sink-free graphs: every vertex
    reaches every cycle-carrying component).  Preset families return their
    known answers; anything else is undecided.
    """
    if isinstance(target, GraphFamily):
        if isinstance(target, ExplicitFamily):
            return check_simplicity(target.graph, row_finite)
        if isinstance(target, (CayleyZFamily, CayleyFreeFamily)):
            return "simple"  # at least two generators by construction
        if isinstance(target, RayFamily):
            # Acyclic, sink-free, and every vertex reaches every later level.
            return "simple"
        return "undecided"
    graph: Graph = target
    if not row_finite:
        return "undecided"
    if not _every_cycle_has_exit(graph):
        return "not-simple"
    cycle_comps = _cycle_sccs(graph)
    for v in graph.vertices:
        reach = _reachable(graph, v, forward=True)
        for comp in cycle_comps:
            if not (comp & reach):
                return "not-simple"
    return "simple"
