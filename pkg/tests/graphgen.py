"""Random valid query-graph generator for property tests.

Generates graphs satisfying the structural invariants (kind-consistent
vertices, no isolated vertices, deduplicated triples) with a mix of
user-defined, ISA, aggregation and order triples. Group sizes stay small
so the brute-force bijection oracle remains fast.
"""

from __future__ import annotations

import random

from kbqg.graph import (
    AGG_CONNECTORS,
    AGG_RESULT,
    CLASS,
    ENTITY,
    LITERAL,
    VARIABLE,
    Triple,
    Vertex,
    build_graph,
    builtin,
    derive_var_kind,
    user,
)


def random_graph(rng: random.Random, max_triples: int = 5):
    n_triples = rng.randint(1, max_triples)
    vars_pool = [f"?v{i}" for i in range(4)]
    ents_pool = [f"e{i}" for i in range(3)]
    lits_pool = [f"l{i}" for i in range(2)]
    classes_pool = [f"c{i}" for i in range(2)]
    labels_pool = [f":p{i}" for i in range(3)]

    triples = []
    used_vars: set[str] = set()
    agg_objects: set[str] = set()
    fresh = 0

    def pick_var():
        v = rng.choice(vars_pool)
        used_vars.add(v)
        return v

    attempts = 0
    while len(triples) < n_triples and attempts < 60:
        attempts += 1
        kind = rng.random()
        if kind < 0.55:
            subj = pick_var() if rng.random() < 0.8 else rng.choice(ents_pool)
            r = rng.random()
            if r < 0.55:
                obj = pick_var()
            elif r < 0.85:
                obj = rng.choice(ents_pool)
            else:
                obj = rng.choice(lits_pool)
            t = Triple(subj, user(rng.choice(labels_pool)), obj)
        elif kind < 0.75:
            t = Triple(pick_var(), builtin("ISA"), rng.choice(classes_pool))
        elif kind < 0.9:
            subj = pick_var()
            if subj in agg_objects:
                continue
            fresh += 1
            obj = f"?agg{fresh}"
            agg_objects.add(obj)
            t = Triple(subj, builtin(rng.choice(sorted(AGG_CONNECTORS))), obj)
        else:
            fresh += 1
            lit = f"n{fresh}"
            t = Triple(pick_var(), builtin(rng.choice(["MAXATN", "MINATN"])), lit)
        if t not in triples:
            triples.append(t)

    if not triples:
        triples = [Triple("?v0", user(":p0"), "e0")]
        used_vars.add("?v0")

    ids = {t.subject for t in triples} | {t.object for t in triples}
    vertices = []
    var_ids = []
    for vid in sorted(ids):
        if vid.startswith("?"):
            k = derive_var_kind(vid, triples)
            vertices.append(Vertex(vid, k))
            if k == VARIABLE:
                var_ids.append(vid)
        elif vid.startswith("e"):
            vertices.append(Vertex(vid, ENTITY, ":" + vid.upper()))
        elif vid.startswith("c"):
            vertices.append(Vertex(vid, CLASS, ":" + vid.upper()))
        elif vid.startswith("l"):
            vertices.append(Vertex(vid, LITERAL, "txt_" + vid))
        else:  # order literal
            vertices.append(Vertex(vid, LITERAL, str(rng.randint(1, 3))))
    target = rng.choice(var_ids) if var_ids and rng.random() < 0.8 else None
    return build_graph(vertices, triples, target)


def relabeled_copy(g, rng: random.Random):
    """An equivalent graph: permuted vertex ids, permuted user label
    names, fresh literal/entity surfaces."""
    ids = [v.id for v in g.vertices]
    new_ids = [f"x{i}" for i in range(len(ids))]
    rng.shuffle(new_ids)
    rename = dict(zip(ids, new_ids))
    labels = list(g.user_labels)
    new_labels = [f":q{i}" for i in range(len(labels))]
    rng.shuffle(new_labels)
    lab_rename = dict(zip(labels, new_labels))

    order_vals = g.order_values
    vertices = []
    for v in g.vertices:
        if v.kind in (VARIABLE, AGG_RESULT):
            vertices.append(Vertex(rename[v.id], v.kind))
        elif v.id in order_vals:
            vertices.append(Vertex(rename[v.id], v.kind, v.surface))
        else:
            vertices.append(Vertex(rename[v.id], v.kind, "s_" + rename[v.id]))
    triples = []
    for t in g.triples:
        lab = t.label if t.label.is_builtin else user(lab_rename[t.label.name])
        triples.append(Triple(rename[t.subject], lab, rename[t.object]))
    target = rename[g.target] if g.target else None
    return build_graph(vertices, triples, target)
