"""Shared fixtures and brute-force oracles.

The oracles here are deliberately naive (path enumeration, exhaustive state
search) and independent of the library's algorithms; metric tests compare
against them on small random DAGs.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np
import pytest

from trajlab.curriculum import (
    ALL_COURSES_PASSED,
    EVEN,
    ODD,
    REQUIRES_PASSED,
    Course,
    GraduationRule,
    PrereqEdge,
    build_curriculum,
)


def mk_course(cid, credits=6.0, parities=(ODD, EVEN), difficulty=0.0):
    return Course(id=cid, name=cid, credits=credits,
                  terms_offered=frozenset(parities), base_difficulty=difficulty)


def mk_curriculum(ids, edge_pairs, kinds=None, parities=None, graduation=None):
    parities = parities or {}
    kinds = kinds or {}
    courses = [mk_course(cid, parities=parities.get(cid, (ODD, EVEN))) for cid in ids]
    edges = [PrereqEdge(a, b, kinds.get((a, b), REQUIRES_PASSED)) for a, b in edge_pairs]
    return build_curriculum(courses, edges, graduation or GraduationRule())


@pytest.fixture
def chain4():
    return mk_curriculum(list("ABCD"), [("A", "B"), ("B", "C"), ("C", "D")])


@pytest.fixture
def diamond():
    return mk_curriculum(list("ABCD"), [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")])


def random_dag(rng: np.random.Generator, max_nodes=12, max_edges=20, random_parity=False):
    n = int(rng.integers(2, max_nodes + 1))
    ids = [f"C{i:02d}" for i in range(n)]
    order = list(rng.permutation(n))
    pairs = [(order[i], order[j]) for i in range(n) for j in range(i + 1, n)]
    rng.shuffle(pairs)
    n_edges = int(rng.integers(0, min(max_edges, len(pairs)) + 1))
    edge_pairs = [(ids[a], ids[b]) for a, b in pairs[:n_edges]]
    parities = {}
    if random_parity:
        for cid in ids:
            choice = rng.integers(0, 3)
            parities[cid] = [(ODD, EVEN), (ODD,), (EVEN,)][choice]
    return mk_curriculum(ids, edge_pairs, parities=parities)


# -- brute-force oracles ------------------------------------------------------

def _succ_map(curriculum):
    succ = {c: [] for c in curriculum.courses}
    for e in curriculum.edges:
        succ[e.from_id].append(e.to_id)
    return succ


def enumerate_paths(succ, start, end):
    """All directed paths start -> end (graph is acyclic)."""
    paths = []
    stack = [(start, [start])]
    while stack:
        node, path = stack.pop()
        if node == end:
            paths.append(path)
            continue
        for nxt in succ.get(node, []):
            stack.append((nxt, path + [nxt]))
    return paths


def brute_backbone(curriculum):
    """Intersection of node sets over all SOURCE->SINK paths."""
    succ = _succ_map(curriculum)
    indeg = {c: 0 for c in curriculum.courses}
    for e in curriculum.edges:
        indeg[e.to_id] += 1
    succ["__S__"] = [c for c in curriculum.courses if indeg[c] == 0]
    for c in curriculum.courses:
        if not succ[c]:
            succ[c] = ["__T__"]
    paths = enumerate_paths(succ, "__S__", "__T__")
    if not paths:
        return set()
    common = set(paths[0])
    for p in paths[1:]:
        common &= set(p)
    return common - {"__S__", "__T__"}


def brute_betweenness(curriculum):
    """Shortest-path counting by full path enumeration per ordered pair."""
    succ = _succ_map(curriculum)
    nodes = sorted(curriculum.courses)
    scores = {c: 0.0 for c in nodes}
    for s in nodes:
        for t in nodes:
            if s == t:
                continue
            paths = enumerate_paths(succ, s, t)
            if not paths:
                continue
            d = min(len(p) for p in paths)
            shortest = [p for p in paths if len(p) == d]
            for v in nodes:
                if v in (s, t):
                    continue
                through = sum(1 for p in shortest if v in p)
                if through:
                    scores[v] += through / len(shortest)
    return scores


def _parity_of(term, start_parity):
    flip = (term - 1) % 2
    if start_parity == ODD:
        return ODD if flip == 0 else EVEN
    return EVEN if flip == 0 else ODD


def brute_min_terms(curriculum, cap, start_parity=ODD):
    """Unpruned BFS over (taken set, parity phase) states; every subset of the
    eligible courses (including waiting) is a transition."""
    all_ids = sorted(curriculum.courses)
    prereqs = {c: [e.from_id for e in curriculum.edges if e.to_id == c] for c in all_ids}

    def satisfied(taken):
        if curriculum.graduation.rule == ALL_COURSES_PASSED:
            return set(all_ids) <= taken
        credits = sum(curriculum.courses[c].credits for c in taken)
        return credits >= curriculum.graduation.credit_threshold

    start = (frozenset(), 0)
    if satisfied(set()):
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        (taken, phase), depth = queue.popleft()
        parity = _parity_of(depth + 1, start_parity)
        elig = [c for c in all_ids if c not in taken
                and parity in curriculum.courses[c].terms_offered
                and all(p in taken for p in prereqs[c])]
        subsets = []
        for r in range(0, min(cap, len(elig)) + 1):
            subsets.extend(itertools.combinations(elig, r))
        for combo in subsets:
            nxt = (taken | frozenset(combo), (phase + 1) % 2)
            if satisfied(set(nxt[0])):
                return depth + 1
            if nxt not in seen:
                seen.add(nxt)
                queue.append(((nxt[0], nxt[1]), depth + 1))
    raise AssertionError("oracle: unreachable graduation")


def brute_delay(curriculum, failed_course, fail_term, cap, start_parity=ODD):
    """Exhaustive perturbed schedule search mirroring the declared semantics:
    first attempt of failed_course pinned at fail_term (burns a slot, fails),
    mandatory retake at the next offered term."""
    all_ids = sorted(curriculum.courses)
    prereqs = {c: [e.from_id for e in curriculum.edges if e.to_id == c] for c in all_ids}
    offered = curriculum.courses[failed_course].terms_offered
    retake_term = fail_term + 1
    while _parity_of(retake_term, start_parity) not in offered:
        retake_term += 1

    def satisfied(taken):
        if curriculum.graduation.rule == ALL_COURSES_PASSED:
            return set(all_ids) <= set(taken)
        credits = sum(curriculum.courses[c].credits for c in taken)
        return credits >= curriculum.graduation.credit_threshold

    base = brute_min_terms(curriculum, cap, start_parity)
    best = None
    horizon = 2 * len(all_ids) + 2 + retake_term

    frontier = {frozenset()}
    for term in range(1, horizon + 1):
        parity = _parity_of(term, start_parity)
        nxt = set()
        for taken in frontier:
            forced = frozenset()
            slots = cap
            banned = {failed_course}
            if term == fail_term:
                if not all(p in taken for p in prereqs[failed_course]):
                    continue
                slots = cap - 1
            elif term == retake_term:
                forced = frozenset({failed_course})
                slots = cap - 1
            elif term > retake_term:
                banned = set()
            elig = [c for c in all_ids if c not in taken and c not in banned
                    and parity in curriculum.courses[c].terms_offered
                    and all(p in taken for p in prereqs[c])]
            for r in range(0, min(slots, len(elig)) + 1):
                for combo in itertools.combinations(elig, r):
                    nxt.add(taken | frozenset(combo) | forced)
        frontier = nxt
        if not frontier:
            return None  # infeasible perturbation
        if any(satisfied(s) for s in frontier):
            best = term
            break
    if best is None:
        raise AssertionError("oracle: perturbed graduation unreachable")
    return max(best - base, 0)
