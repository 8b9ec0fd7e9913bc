"""Slow, obviously-correct reference computations used by the tests."""

import itertools
import math
from collections import Counter


def bic_by_hand(rows, child, parents):
    """BIC family score from raw row tuples with plain counting."""
    n = len(rows)
    joint = Counter((tuple(r[p] for p in parents), r[child]) for r in rows)
    margin = Counter(tuple(r[p] for p in parents) for r in rows)
    loglik = sum(c * math.log(c / margin[cfg]) for (cfg, _), c in joint.items())
    return loglik - (2 ** len(parents)) * 1 * math.log(n) / 2


def network_bic_by_hand(rows, n_vars, arcs):
    parents = {v: sorted(s for s, t in arcs if t == v) for v in range(n_vars)}
    return sum(bic_by_hand(rows, v, parents[v]) for v in range(n_vars))


def is_acyclic(n_vars, arcs):
    succ = {v: [t for s, t in arcs if s == v] for v in range(n_vars)}
    state = [0] * n_vars

    def visit(v):
        if state[v] == 1:
            return False
        if state[v] == 2:
            return True
        state[v] = 1
        ok = all(visit(c) for c in succ[v])
        state[v] = 2
        return ok

    return all(visit(v) for v in range(n_vars))


def all_dags_by_subsets(chapters):
    """Every arc subset over allowed ordered pairs that is acyclic."""
    n = len(chapters)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j and chapters[i] <= chapters[j]]
    out = []
    for bits in range(1 << len(pairs)):
        arcs = [pairs[k] for k in range(len(pairs)) if bits >> k & 1]
        if is_acyclic(n, arcs):
            out.append(frozenset(arcs))
    return out


def joint_probability(assignment, cpts, parents):
    """P(full assignment) as a product of CPT entries; cpts[v][cfg_tuple] = P(v=1|cfg)."""
    p = 1.0
    for v, val in assignment.items():
        cfg = tuple(assignment[q] for q in parents[v])
        p1 = cpts[v][cfg]
        p *= p1 if val else 1 - p1
    return p


def brute_force_conditional(variables, cpts, parents, target, value, evidence):
    num = den = 0.0
    for values in itertools.product((0, 1), repeat=len(variables)):
        a = dict(zip(variables, values))
        if any(a[k] != v for k, v in evidence.items()):
            continue
        p = joint_probability(a, cpts, parents)
        den += p
        if a[target] == value:
            num += p
    return num / den


def pairwise_g_statistics(rows, n_vars):
    """2 * N * mutual information for every unordered pair, by counting."""
    n = len(rows)
    out = {}
    for i in range(n_vars):
        for j in range(i + 1, n_vars):
            joint = Counter((r[i], r[j]) for r in rows)
            left = Counter(r[i] for r in rows)
            right = Counter(r[j] for r in rows)
            out[(i, j)] = 2 * sum(c * math.log(c * n / (left[a] * right[b])) for (a, b), c in joint.items())
    return out
