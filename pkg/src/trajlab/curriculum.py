"""Typed prerequisite DAG and its structural metrics.

Courses are nodes; an edge u -> v means v is gated on u, either on u being
regularized (REQUIRES_REGULARIZED) or fully passed (REQUIRES_PASSED). The
metrics here expose what a course catalogue hides: the longest forced
sequence, the set of courses every path to graduation crosses, where failure
propagation concentrates, the structural minimum time to finish under a load
cap and term-parity offerings, and how far a single failure pushes completion.

All metrics are deterministic; ties break on lexicographic course id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .errors import (
    ConfigError,
    CycleDetected,
    TermOutOfRange,
    UnknownEndpoint,
    Unschedulable,
)

REQUIRES_REGULARIZED = "REQUIRES_REGULARIZED"
REQUIRES_PASSED = "REQUIRES_PASSED"
EDGE_KINDS = (REQUIRES_REGULARIZED, REQUIRES_PASSED)

ODD = "ODD"
EVEN = "EVEN"
PARITIES = (ODD, EVEN)

ALL_COURSES_PASSED = "ALL_COURSES_PASSED"
CREDIT_THRESHOLD = "CREDIT_THRESHOLD"


@dataclass(frozen=True)
class Course:
    id: str
    name: str
    credits: float
    terms_offered: frozenset[str]
    base_difficulty: float = 0.0  # additive pass-probability intercept; higher = easier

    def __post_init__(self):
        if self.credits <= 0:
            raise ConfigError(f"course {self.id!r}: credits must be positive")
        if not self.terms_offered or not set(self.terms_offered) <= set(PARITIES):
            raise ConfigError(f"course {self.id!r}: terms_offered must be a nonempty "
                              f"subset of {PARITIES}")


@dataclass(frozen=True)
class PrereqEdge:
    from_id: str
    to_id: str
    kind: str = REQUIRES_PASSED

    def __post_init__(self):
        if self.kind not in EDGE_KINDS:
            raise ConfigError(f"unknown edge kind {self.kind!r}")
        if self.from_id == self.to_id:
            raise ConfigError(f"self-loop on {self.from_id!r}")


@dataclass(frozen=True)
class GraduationRule:
    rule: str = ALL_COURSES_PASSED
    credit_threshold: float | None = None

    def __post_init__(self):
        if self.rule not in (ALL_COURSES_PASSED, CREDIT_THRESHOLD):
            raise ConfigError(f"unknown graduation rule {self.rule!r}")
        if self.rule == CREDIT_THRESHOLD and (self.credit_threshold is None
                                              or self.credit_threshold <= 0):
            raise ConfigError("credit threshold rule needs a positive credit_threshold")


@dataclass(frozen=True)
class Curriculum:
    courses: dict[str, Course]
    edges: tuple[PrereqEdge, ...]
    graduation: GraduationRule = field(default_factory=GraduationRule)
    ref: str = "curriculum"

    def prereqs_of(self, course_id: str) -> list[PrereqEdge]:
        return [e for e in self.edges if e.to_id == course_id]

    def course_ids(self) -> list[str]:
        return sorted(self.courses)

    def total_credits(self) -> float:
        return sum(c.credits for c in self.courses.values())

    def satisfied(self, passed: set[str], credits: float | None = None) -> bool:
        if self.graduation.rule == ALL_COURSES_PASSED:
            return set(self.courses) <= passed
        if credits is None:
            credits = sum(self.courses[c].credits for c in passed if c in self.courses)
        return credits >= self.graduation.credit_threshold


def build_curriculum(courses: list[Course], edges: list[PrereqEdge],
                     graduation: GraduationRule | None = None,
                     ref: str = "curriculum") -> Curriculum:
    """Validate and assemble a curriculum; rejects cycles and dangling edges."""
    by_id: dict[str, Course] = {}
    for course in courses:
        if course.id in by_id:
            raise ConfigError(f"duplicate course id {course.id!r}")
        by_id[course.id] = course
    for edge in edges:
        if edge.from_id not in by_id or edge.to_id not in by_id:
            raise UnknownEndpoint((edge.from_id, edge.to_id))
    unique_edges = tuple(sorted(set(edges), key=lambda e: (e.from_id, e.to_id, e.kind)))
    cycle = _find_cycle(by_id, unique_edges)
    if cycle:
        raise CycleDetected(cycle)
    return Curriculum(courses=dict(sorted(by_id.items())), edges=unique_edges,
                      graduation=graduation or GraduationRule(), ref=ref)


def _successors(curriculum_edges, nodes) -> dict[str, list[str]]:
    succ = {n: [] for n in nodes}
    for e in curriculum_edges:
        succ[e.from_id].append(e.to_id)
    return {n: sorted(set(v)) for n, v in succ.items()}


def _find_cycle(by_id, edges) -> list[str] | None:
    succ = _successors(edges, by_id)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in by_id}
    stack: list[str] = []

    def dfs(node: str) -> list[str] | None:
        color[node] = GREY
        stack.append(node)
        for nxt in succ[node]:
            if color[nxt] == GREY:
                i = stack.index(nxt)
                return stack[i:] + [nxt]
            if color[nxt] == WHITE:
                found = dfs(nxt)
                if found:
                    return found
        stack.pop()
        color[node] = BLACK
        return None

    for node in sorted(by_id):
        if color[node] == WHITE:
            found = dfs(node)
            if found:
                return found
    return None


def _topo_order(curriculum: Curriculum) -> list[str]:
    indeg = {c: 0 for c in curriculum.courses}
    succ = _successors(curriculum.edges, curriculum.courses)
    for e in curriculum.edges:
        indeg[e.to_id] += 1
    ready = sorted(c for c, d in indeg.items() if d == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in succ[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    return order


def longest_chain(curriculum: Curriculum) -> tuple[int, list[str]]:
    """Longest directed path, counted in courses; lexicographically smallest
    path among equals."""
    if not curriculum.courses:
        return 0, []
    preds: dict[str, list[str]] = {c: [] for c in curriculum.courses}
    for e in curriculum.edges:
        preds[e.to_id].append(e.from_id)
    best: dict[str, tuple[int, tuple[str, ...]]] = {}
    for node in _topo_order(curriculum):
        candidates = [(1, (node,))]
        for p in preds[node]:
            length, path = best[p]
            candidates.append((length + 1, path + (node,)))
        # max on length; among ties prefer the lexicographically smallest path
        top_len = max(c[0] for c in candidates)
        best[node] = min(c for c in candidates if c[0] == top_len)
    top_len = max(v[0] for v in best.values())
    path = min((v[1] for v in best.values() if v[0] == top_len))
    return top_len, list(path)


SOURCE = "__SOURCE__"
SINK = "__SINK__"


def _augmented_succ(curriculum: Curriculum) -> dict[str, list[str]]:
    succ = _successors(curriculum.edges, curriculum.courses)
    indeg = {c: 0 for c in curriculum.courses}
    for e in curriculum.edges:
        indeg[e.to_id] += 1
    succ[SOURCE] = sorted(c for c in curriculum.courses if indeg[c] == 0)
    succ[SINK] = []
    for c in curriculum.courses:
        if not succ[c]:
            succ[c] = [SINK]
    return succ


def backbone_courses(curriculum: Curriculum) -> set[str]:
    """Courses lying on every SOURCE -> SINK path of the augmented graph.

    A course is on all paths exactly when removing it disconnects the virtual
    SOURCE from the virtual SINK.
    """
    if not curriculum.courses:
        return set()
    succ = _augmented_succ(curriculum)

    def reaches_sink_without(banned: str) -> bool:
        seen = {SOURCE}
        frontier = [SOURCE]
        while frontier:
            node = frontier.pop()
            for nxt in succ[node]:
                if nxt == banned or nxt in seen:
                    continue
                if nxt == SINK:
                    return True
                seen.add(nxt)
                frontier.append(nxt)
        return False

    return {c for c in curriculum.courses if not reaches_sink_without(c)}


def bottleneck_scores(curriculum: Curriculum) -> dict[str, float]:
    """Directed betweenness centrality over unit-weight shortest paths.

    Brandes accumulation: for every ordered course pair (s, t) the interior
    nodes of shortest s->t paths receive the pair's path fraction.
    """
    nodes = curriculum.course_ids()
    succ = _successors(curriculum.edges, curriculum.courses)
    scores = {n: 0.0 for n in nodes}
    for s in nodes:
        # BFS shortest-path DAG from s
        dist = {s: 0}
        sigma = {n: 0.0 for n in nodes}
        sigma[s] = 1.0
        preds: dict[str, list[str]] = {n: [] for n in nodes}
        order = []
        frontier = [s]
        while frontier:
            nxt_frontier = []
            for v in frontier:
                order.append(v)
                for w in succ[v]:
                    if w not in dist:
                        dist[w] = dist[v] + 1
                        nxt_frontier.append(w)
                    if dist[w] == dist[v] + 1:
                        sigma[w] += sigma[v]
                        preds[w].append(v)
            frontier = sorted(set(nxt_frontier))
        delta = {n: 0.0 for n in nodes}
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                scores[w] += delta[w]
    return scores


def passed_set(record, term: int) -> tuple[set[str], set[str], set[str]]:
    """(attempted, passed, regularized) course sets observed through `term`."""
    attempted: set[str] = set()
    passed: set[str] = set()
    regularized: set[str] = set()
    for snap in record.n3:
        if snap.term > term:
            break
        attempted.update(snap.enrollments)
        for course, outcome in snap.outcomes.items():
            attempted.add(course)
            if outcome == "PASSED":
                passed.add(course)
                regularized.add(course)
            elif outcome == "REGULARIZED":
                regularized.add(course)
    return attempted, passed, regularized


def friction_from_sets(curriculum: Curriculum, attempted: set[str], passed: set[str],
                       regularized: set[str]) -> float:
    """Share of gating prerequisite courses the student attempted but has not
    brought to the status their edges require.

    Denominator: distinct `from` courses over all edges into not-yet-passed
    courses. Numerator: those among them attempted without reaching the
    required status on at least one such edge. 0 when nothing gates the plan.
    """
    denom: set[str] = set()
    num: set[str] = set()
    for edge in curriculum.edges:
        if edge.to_id in passed:
            continue
        denom.add(edge.from_id)
        if edge.from_id not in attempted:
            continue
        satisfied = (edge.from_id in passed if edge.kind == REQUIRES_PASSED
                     else edge.from_id in regularized)
        if not satisfied:
            num.add(edge.from_id)
    if not denom:
        return 0.0
    return len(num) / len(denom)


def friction_index(record, curriculum: Curriculum, term: int) -> float:
    """Friction for a student record at a given term (snapshots must reach it)."""
    if term < 1 or term > (record.n3[-1].term if record.n3 else 0):
        raise TermOutOfRange(f"term {term} outside record's observed range")
    attempted, passed, regularized = passed_set(record, term)
    return friction_from_sets(curriculum, attempted, passed, regularized)


# -- scheduling ---------------------------------------------------------------

def _parity_of(term: int, start_parity: str) -> str:
    if start_parity not in PARITIES:
        raise ConfigError(f"unknown parity {start_parity!r}")
    flip = (term - 1) % 2
    if start_parity == ODD:
        return ODD if flip == 0 else EVEN
    return EVEN if flip == 0 else ODD


def _eligible(curriculum: Curriculum, taken: frozenset[str], parity: str,
              exclude: set[str] | None = None) -> list[str]:
    exclude = exclude or set()
    out = []
    for cid in curriculum.course_ids():
        if cid in taken or cid in exclude:
            continue
        if parity not in curriculum.courses[cid].terms_offered:
            continue
        if all(e.from_id in taken for e in curriculum.prereqs_of(cid)):
            out.append(cid)
    return out


def _prune_dominated(states: set[frozenset[str]]) -> set[frozenset[str]]:
    """Keep only set-maximal states: a superset of taken courses always
    finishes at least as early."""
    ordered = sorted(states, key=len, reverse=True)
    kept: list[frozenset[str]] = []
    for s in ordered:
        if not any(s < k for k in kept):
            kept.append(s)
    return set(kept)


def _credits_of(curriculum: Curriculum, taken: frozenset[str]) -> float:
    return sum(curriculum.courses[c].credits for c in taken)


def min_completion_terms(curriculum: Curriculum, load_cap: int,
                         start_parity: str = ODD) -> int:
    """Minimum terms for an always-passing student to satisfy graduation.

    Both edge kinds unlock a dependent one term after its prerequisite is
    taken (the ideal student passes, hence regularizes, on first take).
    Exact search over taken-set states with superset-dominance pruning;
    intended for catalogue-scale curricula.
    """
    if load_cap < 1:
        raise ConfigError("load_cap must be >= 1")
    for course in curriculum.courses.values():
        if not course.terms_offered:
            raise Unschedulable(f"course {course.id!r} is never offered")
    if curriculum.satisfied(set()):
        return 0
    frontier: set[frozenset[str]] = {frozenset()}
    horizon = 2 * len(curriculum.courses) + 2
    for term in range(1, horizon + 1):
        parity = _parity_of(term, start_parity)
        nxt: set[frozenset[str]] = set()
        for state in frontier:
            elig = _eligible(curriculum, state, parity)
            if not elig:
                nxt.add(state)
                continue
            take = min(load_cap, len(elig))
            for combo in combinations(elig, take):
                nxt.add(state | frozenset(combo))
        frontier = _prune_dominated(nxt)
        for state in frontier:
            if curriculum.satisfied(set(state), _credits_of(curriculum, state)):
                return term
    raise Unschedulable("graduation unreachable within search horizon")


def delay_propagation(curriculum: Curriculum, failed_course: str, fail_term: int,
                      load_cap: int, start_parity: str = ODD) -> int:
    """Extra terms to completion when `failed_course`'s first attempt happens
    at `fail_term`, fails, and is retaken at the next offered term.

    The failed attempt and the mandatory retake both consume load slots;
    dependents unlock only after the retake. Never negative.
    """
    if failed_course not in curriculum.courses:
        raise ConfigError(f"unknown course {failed_course!r}")
    if fail_term < 1:
        raise TermOutOfRange(f"fail_term must be >= 1, got {fail_term}")
    offered = curriculum.courses[failed_course].terms_offered
    if _parity_of(fail_term, start_parity) not in offered:
        raise TermOutOfRange(f"{failed_course!r} is not offered at term {fail_term}")
    retake_term = fail_term + 1
    while _parity_of(retake_term, start_parity) not in offered:
        retake_term += 1

    base = min_completion_terms(curriculum, load_cap, start_parity)

    frontier: set[frozenset[str]] = {frozenset()}
    horizon = 2 * len(curriculum.courses) + 2 + retake_term
    for term in range(1, horizon + 1):
        parity = _parity_of(term, start_parity)
        nxt: set[frozenset[str]] = set()
        for state in frontier:
            if term < fail_term or fail_term < term < retake_term:
                elig = _eligible(curriculum, state, parity, exclude={failed_course})
                cap = load_cap
                forced: frozenset[str] = frozenset()
            elif term == fail_term:
                # the failed first attempt must be feasible here and burns a slot
                prereqs_ok = all(e.from_id in state
                                 for e in curriculum.prereqs_of(failed_course))
                if not prereqs_ok:
                    continue
                elig = _eligible(curriculum, state, parity, exclude={failed_course})
                cap = load_cap - 1
                forced = frozenset()
            elif term == retake_term:
                elig = _eligible(curriculum, state, parity, exclude={failed_course})
                cap = load_cap - 1
                forced = frozenset({failed_course})
            else:
                elig = _eligible(curriculum, state, parity)
                cap = load_cap
                forced = frozenset()
            if not elig:
                nxt.add(state | forced)
                continue
            take = min(cap, len(elig))
            if take == 0:
                nxt.add(state | forced)
                continue
            for combo in combinations(elig, take):
                nxt.add(state | frozenset(combo) | forced)
        frontier = _prune_dominated(nxt)
        if not frontier:
            raise TermOutOfRange(
                f"{failed_course!r} cannot be first-attempted at term {fail_term}")
        if term >= retake_term or curriculum.graduation.rule == CREDIT_THRESHOLD:
            for state in frontier:
                if curriculum.satisfied(set(state), _credits_of(curriculum, state)):
                    return max(term - base, 0)
    raise Unschedulable("perturbed completion unreachable within search horizon")


# -- JSON interface -----------------------------------------------------------

def curriculum_from_json_obj(obj: dict, ref: str = "curriculum") -> Curriculum:
    try:
        courses = [Course(id=c["id"], name=c.get("name", c["id"]),
                          credits=float(c["credits"]),
                          terms_offered=frozenset(c.get("terms_offered", PARITIES)),
                          base_difficulty=float(c.get("base_difficulty", 0.0)))
                   for c in obj["courses"]]
        edges = [PrereqEdge(from_id=e["from"], to_id=e["to"],
                            kind=e.get("kind", REQUIRES_PASSED))
                 for e in obj.get("edges", [])]
        grad_obj = obj.get("graduation", {})
        graduation = GraduationRule(rule=grad_obj.get("rule", ALL_COURSES_PASSED),
                                    credit_threshold=grad_obj.get("credit_threshold"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad curriculum object: {exc}")
    return build_curriculum(courses, edges, graduation, ref=ref)


def load_curriculum(path: str | Path) -> Curriculum:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return curriculum_from_json_obj(obj, ref=path.stem)


def curriculum_to_json_obj(curriculum: Curriculum) -> dict:
    return {
        "courses": [
            {"id": c.id, "name": c.name, "credits": c.credits,
             "terms_offered": sorted(c.terms_offered), "base_difficulty": c.base_difficulty}
            for c in curriculum.courses.values()
        ],
        "edges": [{"from": e.from_id, "to": e.to_id, "kind": e.kind}
                  for e in curriculum.edges],
        "graduation": (
            {"rule": curriculum.graduation.rule}
            if curriculum.graduation.rule == ALL_COURSES_PASSED
            else {"rule": curriculum.graduation.rule,
                  "credit_threshold": curriculum.graduation.credit_threshold}
        ),
    }
