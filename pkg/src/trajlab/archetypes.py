"""Trajectory-shape features and archetype clustering.

Students are summarized by progression-shape features (credit velocities over
fixed windows of the observed trajectory, failure rate, friction peaks,
regularity losses, exit timing) computed strictly from snapshots observable
at the requested as-of point. Centroid clustering over the standardized
feature space then yields five named archetypes:

    REGULAR_PROGRESSION  steady nominal pace, graduates on schedule
    DAMPED_PROGRESSION   persistently below nominal pace
    EARLY_FRICTION       prerequisite friction concentrated in the first terms
    LATE_EXHAUSTION      normal start, collapsing pace later, no degree
    EARLY_EXIT           gone within the first two terms

The label rules operate on de-standardized centroids and are threshold
configurable; they are applied in priority order with bijectivity enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curriculum import Curriculum
from .errors import DegenerateInput
from .temporal import (
    FeatureRegistry,
    ObservationWindow,
    StudentRecord,
    assert_no_leakage,
    derived_name,
    n3,
)

REGULAR_PROGRESSION = "REGULAR_PROGRESSION"
DAMPED_PROGRESSION = "DAMPED_PROGRESSION"
EARLY_FRICTION = "EARLY_FRICTION"
LATE_EXHAUSTION = "LATE_EXHAUSTION"
EARLY_EXIT = "EARLY_EXIT"

ARCHETYPE_LABELS = (REGULAR_PROGRESSION, DAMPED_PROGRESSION, EARLY_FRICTION,
                    LATE_EXHAUSTION, EARLY_EXIT)

FEATURE_ORDER = ("early_velocity", "mid_velocity", "late_velocity", "failure_rate",
                 "peak_friction", "early_peak_friction", "regularity_losses",
                 "exit_term", "graduated", "exited")


@dataclass(frozen=True)
class ArchetypeConfig:
    """Program constants and label-rule thresholds (all overridable)."""

    nominal_terms: int = 10
    early_exit_term: float = 2.0
    early_friction_floor: float = 0.5
    strong_start_velocity: float = 0.8
    collapsed_velocity: float = 0.4
    damped_band: tuple[float, float] = (0.4, 0.8)


@dataclass(frozen=True)
class TrajectoryFeatures:
    student_id: str
    early_velocity: float
    mid_velocity: float
    late_velocity: float
    failure_rate: float
    peak_friction: float
    early_peak_friction: float
    regularity_losses: int
    exit_term: int          # exit term when exited, else last observed term
    graduated: bool
    exited: bool            # GRADUATED or DROPPED by the as-of point
    short_trajectory: bool  # fewer than three observed terms: thirds undefined

    def vector(self) -> np.ndarray:
        return np.array([
            self.early_velocity, self.mid_velocity, self.late_velocity,
            self.failure_rate, self.peak_friction, self.early_peak_friction,
            float(self.regularity_losses), float(self.exit_term),
            1.0 if self.graduated else 0.0, 1.0 if self.exited else 0.0,
        ])


def extract_features(record: StudentRecord, curriculum: Curriculum,
                     as_of: ObservationWindow,
                     config: ArchetypeConfig = ArchetypeConfig()) -> TrajectoryFeatures:
    """Shape features from snapshots with term <= as_of's term.

    The leakage gate runs first: trajectory extraction consumes per-term
    derived features, so the as-of point must sit at N3(1) or later.
    """
    horizon = as_of.term if as_of.term is not None else 0
    observed = [s for s in record.n3 if s.term <= horizon]
    consumed_terms = range(1, max(1, len(observed)) + 1) if horizon >= 1 else [1]
    gate_registry = FeatureRegistry()
    names = []
    for t in consumed_terms:
        for base in ("credits", "friction", "regular"):
            name = derived_name(base, t)
            gate_registry.register(name, n3(t), "numeric")
            names.append(name)
    assert_no_leakage(names, as_of, gate_registry)

    T = len(observed)
    nominal_cpt = curriculum.total_credits() / config.nominal_terms
    short = T < 3

    def velocity(terms: list[int]) -> float:
        if not terms or nominal_cpt <= 0:
            return 0.0
        earned = sum(observed[t - 1].credits_earned for t in terms)
        return earned / len(terms) / nominal_cpt

    early = velocity(list(range(1, min(2, T) + 1)))
    if short:
        mid = late = 0.0
    else:
        b1, b2 = T // 3, (2 * T) // 3
        mid = velocity(list(range(b1 + 1, b2 + 1)))
        late = velocity(list(range(b2 + 1, T + 1)))

    attempts = sum(len(s.enrollments) for s in observed)
    fails = sum(1 for s in observed for o in s.outcomes.values() if o == "FAILED")
    failure_rate = fails / attempts if attempts else 0.0

    peak = max((s.friction_index for s in observed), default=0.0)
    early_peak = max((s.friction_index for s in observed[:2]), default=0.0)

    losses = 0
    status = True
    for s in observed:
        if status and not s.regularity_status:
            losses += 1
        status = s.regularity_status

    exited = record.exit.kind != "ENROLLED" and record.exit.term is not None \
        and record.exit.term <= horizon
    exit_term = record.exit.term if exited else T
    graduated = exited and record.exit.kind == "GRADUATED"

    return TrajectoryFeatures(
        student_id=record.id, early_velocity=early, mid_velocity=mid,
        late_velocity=late, failure_rate=failure_rate, peak_friction=peak,
        early_peak_friction=early_peak, regularity_losses=losses,
        exit_term=int(exit_term), graduated=graduated, exited=exited,
        short_trajectory=short,
    )


@dataclass(frozen=True)
class ArchetypeModel:
    k: int
    centroids: np.ndarray            # (k, n_features), standardized space
    means: np.ndarray
    scales: np.ndarray
    label_map: dict[int, str]        # bijective onto the five labels when k == 5
    seed: int
    config: ArchetypeConfig = field(default_factory=ArchetypeConfig)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.scales

    def destandardized_centroids(self) -> np.ndarray:
        return self.centroids * self.scales + self.means

    def assign(self, features: TrajectoryFeatures) -> int:
        z = self.standardize(features.vector())
        dists = np.sum((self.centroids - z) ** 2, axis=1)
        return int(np.argmin(dists))  # argmin takes the lowest index on ties


def _init_centroids(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Greedy farthest-point seeding from a seeded starting row."""
    rng = np.random.default_rng(seed)
    first = int(rng.integers(len(X)))
    chosen = [first]
    d2 = np.sum((X - X[first]) ** 2, axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[chosen].copy()


def fit_archetypes(features: list[TrajectoryFeatures], k: int = 5, seed: int = 0,
                   config: ArchetypeConfig = ArchetypeConfig(),
                   max_iter: int = 100) -> ArchetypeModel:
    """Centroid clustering (squared distance) to an assignment fixpoint."""
    raw = np.array([f.vector() for f in features], dtype=float)
    if raw.ndim != 2 or len(raw) == 0:
        raise DegenerateInput("no feature vectors")
    means = raw.mean(axis=0)
    scales = raw.std(axis=0)
    flat = np.where(scales == 0.0)[0]
    if flat.size:
        names = [FEATURE_ORDER[i] for i in flat]
        raise DegenerateInput(f"constant feature(s): {', '.join(names)}")
    X = (raw - means) / scales
    distinct = np.unique(X, axis=0)
    if len(distinct) < k:
        raise DegenerateInput(f"{len(distinct)} distinct points < k={k}")

    centroids = _init_centroids(X, k, seed)
    assignment = np.full(len(X), -1)
    for _ in range(max_iter):
        dists = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = np.argmin(dists, axis=1)
        donated: set[int] = set()
        for cluster in range(k):
            if not np.any(new_assignment == cluster):
                # revive an empty cluster with the point farthest from its centroid
                own = dists[np.arange(len(X)), new_assignment].copy()
                own[list(donated)] = -np.inf
                donor = int(np.argmax(own))
                new_assignment[donor] = cluster
                donated.add(donor)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for cluster in range(k):
            members = X[assignment == cluster]
            if len(members):
                centroids[cluster] = members.mean(axis=0)

    label_map = label_centroids(centroids, (means, scales), config) if k == 5 else {}
    return ArchetypeModel(k=k, centroids=centroids, means=means, scales=scales,
                          label_map=label_map, seed=seed, config=config)


def _rule_scores(c: dict[str, float], config: ArchetypeConfig) -> dict[str, float]:
    """Signed margin of each label rule at a de-standardized centroid.

    Positive means the rule's conditions hold, with room to spare; the least
    satisfied condition dominates.
    """
    lo, hi = config.damped_band
    return {
        EARLY_EXIT: min(config.early_exit_term + 0.5 - c["exit_term"],
                        0.5 - c["graduated"], c["exited"] - 0.5),
        EARLY_FRICTION: min(c["early_peak_friction"] - config.early_friction_floor,
                            max(c["exit_term"] - config.early_exit_term,
                                0.5 - c["exited"])),
        LATE_EXHAUSTION: min(c["early_velocity"] - config.strong_start_velocity,
                             config.collapsed_velocity - c["late_velocity"],
                             0.5 - c["graduated"]),
        DAMPED_PROGRESSION: min(c["early_velocity"] - lo, hi - c["early_velocity"],
                                c["mid_velocity"] - lo, hi - c["mid_velocity"],
                                c["late_velocity"] - lo, hi - c["late_velocity"]),
        REGULAR_PROGRESSION: min(c["early_velocity"] - config.strong_start_velocity,
                                 c["late_velocity"] - config.strong_start_velocity,
                                 c["graduated"] - 0.5),
    }


_PRIORITY = (EARLY_EXIT, EARLY_FRICTION, LATE_EXHAUSTION, DAMPED_PROGRESSION,
             REGULAR_PROGRESSION)


def label_centroids(centroids: np.ndarray, standardization,
                    config: ArchetypeConfig = ArchetypeConfig()) -> dict[int, str]:
    """Assign the five labels to five centroids, bijectively.

    Rules run in priority order on de-standardized centroids; when several
    centroids claim the same rule the best margin wins, and leftover labels
    go to leftover centroids by best remaining margin.
    """
    means, scales = standardization
    if len(centroids) != 5:
        raise DegenerateInput("labeling requires exactly five centroids")
    raw = centroids * scales + means
    as_dicts = [dict(zip(FEATURE_ORDER, row)) for row in raw]
    margins = [_rule_scores(c, config) for c in as_dicts]

    label_map: dict[int, str] = {}
    taken_labels: set[str] = set()
    for label in _PRIORITY:
        candidates = [i for i in range(5)
                      if i not in label_map and margins[i][label] >= 0.0]
        if not candidates:
            continue
        best = max(candidates, key=lambda i: (margins[i][label], -i))
        label_map[best] = label
        taken_labels.add(label)

    remaining_labels = [lab for lab in _PRIORITY if lab not in taken_labels]
    remaining_idx = [i for i in range(5) if i not in label_map]
    while remaining_labels:
        best_pair = max(((i, lab) for i in remaining_idx for lab in remaining_labels),
                        key=lambda pair: (margins[pair[0]][pair[1]],
                                          -_PRIORITY.index(pair[1]), -pair[0]))
        i, lab = best_pair
        label_map[i] = lab
        remaining_idx.remove(i)
        remaining_labels.remove(lab)
    return label_map


def classify(model: ArchetypeModel, features: TrajectoryFeatures) -> str:
    """Label of the nearest centroid in standardized space."""
    if model.k != 5 or not model.label_map:
        raise DegenerateInput("model has no label map (fit with k=5)")
    return model.label_map[model.assign(features)]


def model_to_json_obj(model: ArchetypeModel) -> dict:
    return {
        "k": model.k,
        "seed": model.seed,
        "feature_order": list(FEATURE_ORDER),
        "centroids": model.centroids.tolist(),
        "standardization": {"means": model.means.tolist(),
                            "scales": model.scales.tolist()},
        "label_map": {str(i): lab for i, lab in sorted(model.label_map.items())},
    }
