"""Building new query structures by merging frequent substructures.

A merge of two structures is a disjoint union in which zero or more
same-kind vertex pairs (never aggregation-result variables; offset
literals only with equal offsets) and zero or more user-defined
edge-label pairs are unified. Merging is applied iteratively: seed
candidates are the frequent substructures whose own score beats the
threshold; each round merges every predicted-contained substructure with
every current candidate, keeps results that are connected, small enough
and score above the threshold, and the final output is the union of all
rounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .canon import StructureKey, canonical_form
from .graph import (
    AGG_CONNECTORS,
    AGG_RESULT,
    GraphError,
    QueryGraph,
    Triple,
    Vertex,
    build_graph,
    user,
)
from .mining import SubstructureCatalog
from .ranking import MERGED, ScoredStructure, containment_pattern, score_containment


@dataclass(frozen=True)
class MergeConfig:
    k_max: int = 2          # merge iterations
    theta: float = 0.3      # score threshold
    tau: int = 5            # max triples
    delta: int = 2          # max aggregations
    max_shared_vertices: int = 2   # unification pairs tried per merge
    max_shared_labels: int = 1
    beam: int = 200         # best-scoring candidates kept per iteration
    count_order_as_agg: bool = True

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        if self.tau < 1 or self.delta < 0:
            raise ValueError("bad tau/delta")


def aggregation_count(g: QueryGraph, count_order_as_agg: bool = True) -> int:
    labels = set(AGG_CONNECTORS)
    if count_order_as_agg:
        labels |= {"MAXATN", "MINATN"}
    return sum(1 for t in g.triples if t.label.is_builtin and t.label.builtin in labels)


def passes_restrictions(g: QueryGraph, cfg: MergeConfig) -> bool:
    return (g.is_connected()
            and g.triple_count <= cfg.tau
            and aggregation_count(g, cfg.count_order_as_agg) <= cfg.delta)


def _rename_apart(b: QueryGraph) -> QueryGraph:
    """Prefix b's vertex ids and user label names so they are disjoint
    from any other structure's."""
    verts = [Vertex("b#" + v.id, v.kind, v.surface) for v in b.vertices]
    triples = []
    for t in b.triples:
        label = t.label if t.label.is_builtin else user("b#" + t.label.name)
        triples.append(Triple("b#" + t.subject, label, "b#" + t.object))
    return build_graph(verts, triples, "b#" + b.target if b.target else None)


def _unifiable(a: QueryGraph, va: Vertex, b: QueryGraph, vb: Vertex) -> bool:
    if va.kind != vb.kind or va.kind == AGG_RESULT:
        return False
    # offset literals only unify with offset literals of equal value
    return a.order_values.get(va.id, "") == b.order_values.get(vb.id, "")


def merge_pair(a: QueryGraph, b: QueryGraph,
               max_shared_vertices: int = 2,
               max_shared_labels: int = 1,
               max_triples: int | None = None) -> dict[StructureKey, QueryGraph]:
    """All structures obtainable by unifying up to ``max_shared_vertices``
    vertex pairs and ``max_shared_labels`` user-label pairs of the disjoint
    union of a and b, deduplicated by canonical key.

    The bare disjoint union is included (it is dropped later by the
    connectivity restriction). ``max_triples`` skips oversized results
    before canonicalization.
    """
    b = _rename_apart(b)
    vertex_pairs = [(va.id, vb.id) for va in a.vertices for vb in b.vertices
                    if _unifiable(a, va, b, vb)]
    label_pairs = [(la, lb) for la in a.user_labels for lb in b.user_labels]

    out: dict[StructureKey, QueryGraph] = {}

    def build(vmap: dict[str, str], lmap: dict[str, str]) -> None:
        triples = list(a.triples)
        for t in b.triples:
            label = t.label
            if not label.is_builtin and label.name in lmap:
                label = user(lmap[label.name])
            triples.append(Triple(vmap.get(t.subject, t.subject), label,
                                  vmap.get(t.object, t.object)))
        triple_set = set(triples)
        if max_triples is not None and len(triple_set) > max_triples:
            return
        dropped = set(vmap)
        verts = list(a.vertices) + [v for v in b.vertices if v.id not in dropped]
        try:
            merged = build_graph(verts, triple_set, None)
        except GraphError:
            return
        key, rep = canonical_form(merged)
        out.setdefault(key, rep)

    for k in range(0, max_shared_vertices + 1):
        for combo in combinations(vertex_pairs, k):
            a_side = [p[0] for p in combo]
            b_side = [p[1] for p in combo]
            if len(set(a_side)) < k or len(set(b_side)) < k:
                continue
            vmap = {vb: va for va, vb in combo}
            for l in range(0, max_shared_labels + 1):
                for lab_combo in combinations(label_pairs, l):
                    la_side = [p[0] for p in lab_combo]
                    lb_side = [p[1] for p in lab_combo]
                    if len(set(la_side)) < l or len(set(lb_side)) < l:
                        continue
                    build(vmap, {lb: la for la, lb in lab_combo})
    return out


def merge_substructures(probs: dict[StructureKey, float],
                        catalog: SubstructureCatalog,
                        cfg: MergeConfig,
                        score_fn=None,
                        rounds_out: list | None = None) -> list[ScoredStructure]:
    """Iteratively merge predicted-contained frequent substructures.

    Seeds are the frequent substructures scoring above theta; each of the
    ``k_max`` rounds merges every substructure with predicted probability
    above 0.5 into every current candidate, keeps the connected results
    within the size and aggregation caps that score above theta, and the
    union over all rounds is returned (deduplicated by canonical key,
    best scores first).

    Passing a list as ``rounds_out`` collects one JSON-ready dict per
    round (the seed set and each iteration's survivors) for inspection.
    """
    def default_score(key: StructureKey, rep: QueryGraph) -> float:
        return score_containment(containment_pattern(rep, catalog, key), probs, catalog)

    scorer = score_fn or default_score
    score_cache: dict[StructureKey, float] = {}

    def score(key: StructureKey, rep: QueryGraph) -> float:
        if key not in score_cache:
            score_cache[key] = scorer(key, rep)
        return score_cache[key]

    contained = [key for key in catalog.frequent_keys if probs.get(key, 0.0) > 0.5]

    def record_round(label, members):
        if rounds_out is None:
            return
        from .mining import graph_to_json

        rounds_out.append({
            "round": label,
            "members": [{"key": k.canonical, "score": score_cache[k],
                         "graph": graph_to_json(members[k])}
                        for k in sorted(members, key=StructureKey.sort_key)],
        })

    current: dict[StructureKey, QueryGraph] = {}
    for key in catalog.frequent_keys:
        rep = catalog.substructures[key].representative
        if passes_restrictions(rep, cfg) and score(key, rep) > cfg.theta:
            current[key] = rep
    result: dict[StructureKey, QueryGraph] = dict(current)
    record_round(0, current)

    for _round in range(cfg.k_max):
        merged: dict[StructureKey, QueryGraph] = {}
        for skey in contained:
            srep = catalog.substructures[skey].representative
            for mkey in sorted(current, key=StructureKey.sort_key):
                candidates = merge_pair(srep, current[mkey],
                                        cfg.max_shared_vertices,
                                        cfg.max_shared_labels,
                                        max_triples=cfg.tau)
                for ckey, crep in candidates.items():
                    if ckey in merged or not passes_restrictions(crep, cfg):
                        continue
                    if score(ckey, crep) > cfg.theta:
                        merged[ckey] = crep
        if len(merged) > cfg.beam:
            best = sorted(merged, key=lambda k: (-score_cache[k], k.sort_key()))[:cfg.beam]
            merged = {k: merged[k] for k in best}
        result.update(merged)
        current = merged
        record_round(_round + 1, current)
        if not current:
            break

    out = [ScoredStructure(key, rep, score_cache[key], MERGED)
           for key, rep in result.items()]
    out.sort(key=ScoredStructure.rank_key)
    return out
