"""In-memory knowledge base: fact storage, schema metadata and a query
executor for the supported query-graph semantics.

The KB file format is UTF-8, one tab-separated ``subject property object``
triple per line, with ``a`` accepted as shorthand for rdf:type. Blank
lines and lines starting with ``#`` are skipped. The optional schema file
holds lines ``domain <prop> <class>``, ``range <prop> <class>`` and
``disjoint <class> <class>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .graph import (
    AGG_CONNECTORS,
    AGG_RESULT,
    AVG,
    CLASS,
    COUNT,
    ENTITY,
    ISA,
    LITERAL,
    MAX,
    MAXATN,
    ORDER_LABELS,
    QueryGraph,
    Triple,
    VARIABLE,
)

RDF_TYPE_SHORTHAND = "a"


class KbParseError(ValueError):
    pass


class NonNumericAggregateError(ValueError):
    pass


class UnboundTargetError(ValueError):
    pass


def parse_number(text: str):
    """Parse a literal as an exact number (int or Fraction), or None."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        return None


@dataclass
class Schema:
    domains: dict[str, str] = field(default_factory=dict)
    ranges: dict[str, str] = field(default_factory=dict)
    disjoint: set[frozenset[str]] = field(default_factory=set)

    def are_disjoint(self, c1: str, c2: str) -> bool:
        return frozenset((c1, c2)) in self.disjoint


@dataclass
class KnowledgeBase:
    """Immutable-after-load fact store with property-centric indexes."""

    facts: set[tuple[str, str, str]] = field(default_factory=set)
    types: dict[str, set[str]] = field(default_factory=dict)
    schema: Schema = field(default_factory=Schema)
    by_property: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    subjects_by_po: dict[tuple[str, str], set[str]] = field(default_factory=dict)
    objects_by_ps: dict[tuple[str, str], set[str]] = field(default_factory=dict)

    def add_fact(self, s: str, p: str, o: str) -> None:
        if p == RDF_TYPE_SHORTHAND:
            self.types.setdefault(s, set()).add(o)
            return
        if (s, p, o) in self.facts:
            return
        self.facts.add((s, p, o))
        self.by_property.setdefault(p, []).append((s, o))
        self.subjects_by_po.setdefault((p, o), set()).add(s)
        self.objects_by_ps.setdefault((p, s), set()).add(o)

    def classes_of(self, entity: str) -> set[str]:
        return self.types.get(entity, set())

    def entities_of_class(self, cls: str) -> set[str]:
        return {e for e, cs in self.types.items() if cls in cs}

    @property
    def fact_count(self) -> int:
        return len(self.facts) + sum(len(v) for v in self.types.values())


def load_kb(path, schema_path=None) -> KnowledgeBase:
    kb = KnowledgeBase()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                parts = line.split()
            if len(parts) != 3:
                raise KbParseError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            kb.add_fact(*parts)
    if schema_path is not None:
        kb.schema = load_schema(schema_path)
    return kb


def load_schema(path) -> Schema:
    schema = Schema()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in ("domain", "range", "disjoint"):
                raise KbParseError(f"{path}:{lineno}: bad schema line {line!r}")
            kind, a, b = parts
            if kind == "domain":
                schema.domains[a] = b
            elif kind == "range":
                schema.ranges[a] = b
            else:
                schema.disjoint.add(frozenset((a, b)))
    return schema


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class AnswerSet:
    """Bindings of the target vertex: a set of symbols, or one aggregate value."""

    values: frozenset[str] = frozenset()
    aggregate: object = None
    is_aggregate: bool = False

    @property
    def is_empty(self) -> bool:
        """Empty means: no set bindings, no aggregate input rows, or a zero
        count. COUNT yields an int, AVG a Fraction, so a legitimate average
        of zero does not read as empty."""
        if self.is_aggregate:
            return self.aggregate is None or (
                isinstance(self.aggregate, int) and self.aggregate == 0)
        return not self.values

    def __eq__(self, other):
        if not isinstance(other, AnswerSet):
            return NotImplemented
        if self.is_aggregate != other.is_aggregate:
            return False
        if self.is_aggregate:
            return self.aggregate == other.aggregate
        return self.values == other.values

    def __hash__(self):
        return hash((self.values, self.is_aggregate))


def _pattern_triples(q: QueryGraph) -> list[Triple]:
    return [t for t in q.triples
            if not t.label.is_builtin or t.label.builtin == ISA]


def _solutions(q: QueryGraph, kb: KnowledgeBase) -> list[dict[str, str]]:
    """All variable bindings satisfying the basic graph pattern (user
    triples + ISA), by backtracking join, most-constrained triple first."""
    pattern = _pattern_triples(q)
    if not pattern:
        return []

    def term(vid):
        v = q.vertex_by_id[vid]
        if v.kind in (VARIABLE, AGG_RESULT):
            return None, vid
        return v.surface, vid

    solutions: list[dict[str, str]] = []

    def candidates(t: Triple, binding: dict[str, str]) -> list[tuple[str, str]]:
        sconst, svid = term(t.subject)
        oconst, ovid = term(t.object)
        s = sconst if sconst is not None else binding.get(svid)
        o = oconst if oconst is not None else binding.get(ovid)
        if t.label.is_builtin:  # ISA
            if s is not None and o is not None:
                return [(s, o)] if o in kb.classes_of(s) else []
            if o is not None:
                return sorted((e, o) for e in kb.entities_of_class(o))
            if s is not None:
                return sorted((s, c) for c in kb.classes_of(s))
            return sorted((e, c) for e, cs in kb.types.items() for c in cs)
        p = t.label.name
        if s is not None and o is not None:
            return [(s, o)] if (s, p, o) in kb.facts else []
        if s is not None:
            return sorted((s, o2) for o2 in kb.objects_by_ps.get((p, s), ()))
        if o is not None:
            return sorted((s2, o) for s2 in kb.subjects_by_po.get((p, o), ()))
        return sorted(kb.by_property.get(p, ()))

    def extend(remaining: list[Triple], binding: dict[str, str]) -> None:
        if not remaining:
            solutions.append(dict(binding))
            return
        # most-constrained next: fewest candidate facts
        scored = [(len(candidates(t, binding)), i) for i, t in enumerate(remaining)]
        _, idx = min(scored)
        t = remaining[idx]
        rest = remaining[:idx] + remaining[idx + 1:]
        sconst, svid = term(t.subject)
        oconst, ovid = term(t.object)
        for s, o in candidates(t, binding):
            added = []
            ok = True
            for const, vid, val in ((sconst, svid, s), (oconst, ovid, o)):
                if const is not None:
                    continue
                bound = binding.get(vid)
                if bound is None:
                    binding[vid] = val
                    added.append(vid)
                elif bound != val:
                    ok = False
                    break
            if ok:
                extend(rest, binding)
            for vid in added:
                del binding[vid]

    extend(pattern, {})
    return solutions


def _numeric(value: str, context: str):
    num = parse_number(value)
    if num is None:
        raise NonNumericAggregateError(f"{context}: non-numeric value {value!r}")
    return num


def execute(q: QueryGraph, kb: KnowledgeBase) -> AnswerSet:
    """Evaluate a grounded query graph.

    The basic graph pattern is joined over the facts; MAXATN/MINATN
    triples then keep only the solution row whose subject value is the
    N-th largest/smallest (ties broken by the full sorted row, so results
    are deterministic); finally COUNT/AVG/MAX/MIN bind the aggregate of
    the subject variable's distinct bindings to their result variable.
    """
    if q.target is None:
        raise UnboundTargetError("query has no target")
    rows = _solutions(q, kb)

    order_triples = sorted(
        (t for t in q.triples if t.label.is_builtin and t.label.builtin in ORDER_LABELS),
        key=Triple.sort_key)
    for t in order_triples:
        n = int(q.vertex_by_id[t.object].surface)
        var = t.subject
        keyed = []
        for row in rows:
            if var not in row:
                raise UnboundTargetError(f"order variable {var} unbound")
            num = parse_number(row[var])
            sort_val = num if num is not None else row[var]
            keyed.append((sort_val, tuple(sorted(row.items())), row))
        # non-numeric keys fall back to lexicographic comparison
        if keyed and any(isinstance(k[0], str) for k in keyed):
            keyed = [(str(k[0]), k[1], k[2]) for k in keyed]
        keyed.sort(key=lambda k: (k[0], k[1]), reverse=(t.label.builtin == MAXATN))
        rows = [keyed[n - 1][2]] if len(keyed) >= n else []

    agg_triples = [t for t in q.triples
                   if t.label.is_builtin and t.label.builtin in AGG_CONNECTORS]
    target_agg = next((t for t in agg_triples if t.object == q.target), None)
    if target_agg is not None:
        var = target_agg.subject
        values = {row[var] for row in rows if var in row}
        fn = target_agg.label.builtin
        if fn == COUNT:
            return AnswerSet(aggregate=len(values), is_aggregate=True)
        if not values:
            return AnswerSet(aggregate=None, is_aggregate=True)
        nums = sorted(_numeric(v, fn) for v in values)
        if fn == AVG:
            return AnswerSet(aggregate=Fraction(sum(nums), len(nums)), is_aggregate=True)
        return AnswerSet(aggregate=nums[-1] if fn == MAX else nums[0], is_aggregate=True)

    if rows and q.target not in rows[0]:
        raise UnboundTargetError(f"target {q.target} not bound by the pattern")
    return AnswerSet(values=frozenset(row[q.target] for row in rows))


def check_domain_range(q: QueryGraph, kb: KnowledgeBase) -> bool:
    """Schema consistency of a grounded query.

    Every vertex accumulates the classes imposed on it by property
    domains/ranges and ISA constraints. An entity with known types must
    carry each imposed class; a variable's imposed classes must not be
    declared disjoint. Properties without declarations impose nothing.
    """
    schema = kb.schema
    imposed: dict[str, set[str]] = {}

    def impose(vid: str, cls: str) -> None:
        imposed.setdefault(vid, set()).add(cls)

    for t in q.triples:
        if t.label.is_builtin:
            if t.label.builtin == ISA:
                obj = q.vertex_by_id[t.object]
                if obj.kind == CLASS:
                    impose(t.subject, obj.surface)
            continue
        dom = schema.domains.get(t.label.name)
        if dom is not None:
            impose(t.subject, dom)
        rng = schema.ranges.get(t.label.name)
        if rng is not None and q.vertex_by_id[t.object].kind != LITERAL:
            impose(t.object, rng)

    for vid, classes in imposed.items():
        v = q.vertex_by_id[vid]
        if v.kind == ENTITY:
            known = kb.classes_of(v.surface)
            if known and any(c not in known for c in classes):
                return False
        elif v.kind in (VARIABLE, AGG_RESULT):
            classes = sorted(classes)
            for i, c1 in enumerate(classes):
                for c2 in classes[i + 1:]:
                    if schema.are_disjoint(c1, c2):
                        return False
        # literal/class vertices: nothing to check
    return True
