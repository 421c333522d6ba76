"""Independent reference implementations used as test oracles.

Each function here re-derives an answer from first principles (exhaustive
enumeration, naive products, a second forward-pass implementation) so the
library code can be checked against it. None of it shares algorithms with
the package beyond the data types.
"""

from __future__ import annotations

import math
from itertools import combinations, permutations, product

from kbqg.graph import AGG_RESULT, ISA, QueryGraph, VARIABLE


def _vertex_tag(g: QueryGraph, vid: str) -> tuple:
    return (g.kind_of(vid), g.order_values.get(vid, ""))


def oracle_is_equivalent(a: QueryGraph, b: QueryGraph) -> bool:
    """Brute force over all kind-respecting vertex bijections and all
    label bijections, checking the triple correspondence directly."""
    if len(a.vertices) != len(b.vertices) or len(a.triples) != len(b.triples):
        return False
    groups_a: dict[tuple, list[str]] = {}
    groups_b: dict[tuple, list[str]] = {}
    for v in a.vertices:
        groups_a.setdefault(_vertex_tag(a, v.id), []).append(v.id)
    for v in b.vertices:
        groups_b.setdefault(_vertex_tag(b, v.id), []).append(v.id)
    if set(groups_a) != set(groups_b):
        return False
    if any(len(groups_a[t]) != len(groups_b[t]) for t in groups_a):
        return False
    builtins_a = sorted(t.label.builtin for t in a.triples if t.label.is_builtin)
    builtins_b = sorted(t.label.builtin for t in b.triples if t.label.is_builtin)
    if builtins_a != builtins_b:
        return False
    labs_a, labs_b = list(a.user_labels), list(b.user_labels)
    if len(labs_a) != len(labs_b):
        return False

    tags = sorted(groups_a)
    b_triples = {(t.subject, ("b", t.label.builtin) if t.label.is_builtin
                  else ("u", t.label.name), t.object) for t in b.triples}

    for perm_choice in product(*(permutations(groups_b[t]) for t in tags)):
        f = {}
        for tag, perm in zip(tags, perm_choice):
            for av, bv in zip(groups_a[tag], perm):
                f[av] = bv
        for lab_perm in permutations(labs_b):
            gmap = dict(zip(labs_a, lab_perm))
            image = set()
            for t in a.triples:
                lab = (("b", t.label.builtin) if t.label.is_builtin
                       else ("u", gmap[t.label.name]))
                image.add((f[t.subject], lab, f[t.object]))
            if image == b_triples:
                return True
    return False


def connected_triple_subsets(g: QueryGraph):
    """All non-empty subsets of triples whose vertex-sharing graph is
    connected, via direct union-find over each subset."""
    triples = list(g.triples)
    for size in range(1, len(triples) + 1):
        for subset in combinations(triples, size):
            parents: dict[str, str] = {}

            def find(x):
                while parents[x] != x:
                    parents[x] = parents[parents[x]]
                    x = parents[x]
                return x

            for t in subset:
                for vid in (t.subject, t.object):
                    parents.setdefault(vid, vid)
                ra, rb = find(t.subject), find(t.object)
                parents[ra] = rb
            roots = {find(v) for v in parents}
            if len(roots) == 1:
                yield subset


def oracle_substructure_classes(g: QueryGraph) -> list[QueryGraph]:
    """One representative per equivalence class among the connected triple
    subsets of g, deduplicated with the brute-force bijection oracle."""
    from kbqg.graph import induced_subgraph

    reps: list[QueryGraph] = []
    for subset in connected_triple_subsets(g):
        sub = induced_subgraph(g, subset)
        sub = QueryGraph(sub.vertices, sub.triples, None)
        if not any(oracle_is_equivalent(sub, r) for r in reps):
            reps.append(sub)
    return reps


def oracle_is_substructure(a: QueryGraph, b: QueryGraph) -> bool:
    from kbqg.graph import induced_subgraph

    if len(a.triples) > len(b.triples):
        return False
    for subset in combinations(b.triples, len(a.triples)):
        sub = induced_subgraph(b, subset)
        if oracle_is_equivalent(a, QueryGraph(sub.vertices, sub.triples, None)):
            return True
    return False


# ---------------------------------------------------------------------------
# executor oracle


def oracle_execute_pattern(q: QueryGraph, kb) -> set[str]:
    """Naive cartesian-product join over per-triple fact lists for an
    aggregate-free query; returns the target's bindings."""
    pattern = [t for t in q.triples if not t.label.is_builtin or t.label.builtin == ISA]
    per_triple = []
    for t in pattern:
        if t.label.is_builtin:
            facts = [(e, c) for e, cs in kb.types.items() for c in cs]
        else:
            facts = [(s, o) for (s, p, o) in kb.facts if p == t.label.name]
        per_triple.append(facts)

    def term(vid):
        v = q.vertex_by_id[vid]
        return None if v.kind in (VARIABLE, AGG_RESULT) else v.surface

    answers = set()
    for combo in product(*per_triple):
        binding: dict[str, str] = {}
        ok = True
        for t, (s, o) in zip(pattern, combo):
            for vid, val in ((t.subject, s), (t.object, o)):
                const = term(vid)
                if const is not None:
                    if const != val:
                        ok = False
                elif binding.setdefault(vid, val) != val:
                    ok = False
            if not ok:
                break
        if ok and q.target in binding:
            answers.add(binding[q.target])
    return answers


# ---------------------------------------------------------------------------
# network forward-pass oracle (list-based re-implementation)


def _sig(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def oracle_forward(params, token_ids, d_h: int):
    """Second implementation of the attention BiLSTM forward pass using
    plain python lists; returns (probability, attention weights)."""
    emb = params["emb"].tolist()
    xs = [emb[i] for i in token_ids]
    d_e = len(xs[0])

    def lstm(seq, W, b):
        W, b = W.tolist(), b.tolist()
        h = [0.0] * d_h
        c = [0.0] * d_h
        out = []
        for x in seq:
            zcat = list(x) + h
            z = [sum(W[r][k] * zcat[k] for k in range(d_e + d_h)) + b[r]
                 for r in range(4 * d_h)]
            i = [_sig(z[r]) for r in range(d_h)]
            f = [_sig(z[d_h + r]) for r in range(d_h)]
            o = [_sig(z[2 * d_h + r]) for r in range(d_h)]
            g = [math.tanh(z[3 * d_h + r]) for r in range(d_h)]
            c = [f[r] * c[r] + i[r] * g[r] for r in range(d_h)]
            h = [o[r] * math.tanh(c[r]) for r in range(d_h)]
            out.append(h)
        return out

    hf = lstm(xs, params["W_f"], params["b_f"])
    hb = lstm(xs[::-1], params["W_b"], params["b_b"])[::-1]
    hs = [hf[t] + hb[t] for t in range(len(xs))]

    W_att = params["W_att"].tolist()
    b_att = params["b_att"].tolist()
    v_att = params["v_att"].tolist()
    scores = []
    for h in hs:
        u = [math.tanh(sum(W_att[r][k] * h[k] for k in range(2 * d_h)) + b_att[r])
             for r in range(2 * d_h)]
        scores.append(sum(v_att[r] * u[r] for r in range(2 * d_h)))
    m = max(scores)
    exps = [math.exp(s - m) for s in scores]
    total = sum(exps)
    alpha = [e / total for e in exps]
    qvec = [sum(alpha[t] * hs[t][r] for t in range(len(hs))) for r in range(2 * d_h)]
    w_out = params["W_out"].tolist()[0]
    logit = sum(w_out[r] * qvec[r] for r in range(2 * d_h)) + float(params["b_out"][0])
    return _sig(logit), alpha


def oracle_bce_loss(probs, labels) -> float:
    total = 0.0
    for p, y in zip(probs, labels):
        total += -math.log(p) if y else -math.log(1.0 - p)
    return total


# ---------------------------------------------------------------------------
# scoring oracle


def oracle_score(contained_keys, probs: dict) -> float:
    """Direct product form of the joint-probability score, no log space,
    no clamping."""
    score = 1.0
    for key, p in probs.items():
        score *= p if key in contained_keys else (1.0 - p)
    return score


# ---------------------------------------------------------------------------
# merge oracle


def oracle_merge_pair(a: QueryGraph, b: QueryGraph,
                      max_shared_vertices: int = 2,
                      max_shared_labels: int = 1) -> list[QueryGraph]:
    """Exhaustive unification enumeration for tiny inputs, deduplicated
    with the brute-force equivalence oracle."""
    from kbqg.graph import GraphError, Triple, Vertex, build_graph, user

    b_verts = {"B" + v.id: Vertex("B" + v.id, v.kind, v.surface) for v in b.vertices}
    b_triples = []
    for t in b.triples:
        lab = t.label if t.label.is_builtin else user("B" + t.label.name)
        b_triples.append(Triple("B" + t.subject, lab, "B" + t.object))
    b_labels = ["B" + name for name in b.user_labels]

    pairs = []
    for va in a.vertices:
        for vb in b.vertices:
            if va.kind != vb.kind or va.kind == AGG_RESULT:
                continue
            if a.order_values.get(va.id, "") != b.order_values.get(vb.id, ""):
                continue
            pairs.append((va.id, "B" + vb.id))
    lab_pairs = [(la, lb) for la in a.user_labels for lb in b_labels]

    reps: list[QueryGraph] = []
    for k in range(0, max_shared_vertices + 1):
        for vcombo in combinations(pairs, k):
            if len({p[0] for p in vcombo}) < k or len({p[1] for p in vcombo}) < k:
                continue
            vmap = {pb: pa for pa, pb in vcombo}
            for m in range(0, max_shared_labels + 1):
                for lcombo in combinations(lab_pairs, m):
                    if len({p[0] for p in lcombo}) < m or len({p[1] for p in lcombo}) < m:
                        continue
                    lmap = {lb: la for la, lb in lcombo}
                    verts = list(a.vertices) + [v for vid, v in sorted(b_verts.items())
                                                if vid not in vmap]
                    triples = list(a.triples)
                    for t in b_triples:
                        lab = t.label
                        if not lab.is_builtin and lab.name in lmap:
                            lab = user(lmap[lab.name])
                        triples.append(Triple(vmap.get(t.subject, t.subject), lab,
                                              vmap.get(t.object, t.object)))
                    try:
                        merged = build_graph(verts, set(triples), None)
                    except GraphError:
                        continue
                    if not any(oracle_is_equivalent(merged, r) for r in reps):
                        reps.append(merged)
    return reps
