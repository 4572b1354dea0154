"""Policy interventions and factorial experiments over the simulator.

Three intervention axes: STRUCTURAL rewires the prerequisite graph (edge
removal, extra offerings, alternative prerequisites), PEDAGOGICAL shifts
pass-model intercepts and compresses difficulty spread, REGULATORY loosens
or tightens the regularity rule and downgrades edge kinds. A full 2^k
crossing of on/off levels per axis, replicated R times with a published
seed formula, feeds contrast decomposition: main effects, pairwise and
three-way interactions with Monte Carlo uncertainty, amplifier detection
(beneficial interactions) and adverse-cell flagging (time-to-degree up
without dropout relief).
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .curriculum import (
    REQUIRES_PASSED,
    REQUIRES_REGULARIZED,
    Curriculum,
    PrereqEdge,
    build_curriculum,
)
from .errors import ConfigError, CycleDetected, IncompleteDesign, InvalidPolicy
from .sim import BehaviorRules, SimulationConfig, SimulationResult, simulate

STRUCTURAL = "STRUCTURAL"
PEDAGOGICAL = "PEDAGOGICAL"
REGULATORY = "REGULATORY"
AXES = (STRUCTURAL, PEDAGOGICAL, REGULATORY)

OUTCOME_KEYS = ("dropout_rate", "graduation_rate", "mean_time_to_degree")
# sign of a beneficial change per outcome
IMPROVEMENT_SIGN = {"dropout_rate": -1.0, "graduation_rate": 1.0,
                    "mean_time_to_degree": -1.0}


@dataclass(frozen=True)
class PolicyIntervention:
    axis: str
    # STRUCTURAL
    remove_edges: tuple[tuple[str, str], ...] = ()
    add_offerings: tuple[tuple[str, tuple[str, ...]], ...] = ()
    alternative_prereqs: tuple[tuple[str, str, str], ...] = ()  # (course, old_from, new_from)
    # PEDAGOGICAL
    pass_shift: float = 0.0
    pass_shift_courses: tuple[str, ...] = ()  # empty tuple = every course
    difficulty_variance_scale: float | None = None
    # REGULATORY
    window_delta: int = 0
    required_delta: int = 0
    downgrade_edges: tuple[tuple[str, str], ...] | str = ()  # pairs or "ALL"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown policy axis {self.axis!r}")
        structural = bool(self.remove_edges or self.add_offerings
                          or self.alternative_prereqs)
        pedagogical = bool(self.pass_shift or self.difficulty_variance_scale is not None)
        regulatory = bool(self.window_delta or self.required_delta
                          or self.downgrade_edges)
        used = {STRUCTURAL: structural, PEDAGOGICAL: pedagogical,
                REGULATORY: regulatory}
        for axis, flag in used.items():
            if flag and axis != self.axis:
                raise ConfigError(f"{self.axis} intervention carries {axis} parameters")

    def to_json_obj(self) -> dict:
        obj: dict = {"axis": self.axis}
        if self.remove_edges:
            obj["remove_edges"] = [list(e) for e in self.remove_edges]
        if self.add_offerings:
            obj["add_offerings"] = {c: sorted(p) for c, p in self.add_offerings}
        if self.alternative_prereqs:
            obj["alternative_prereqs"] = [list(a) for a in self.alternative_prereqs]
        if self.pass_shift:
            obj["pass_shift"] = self.pass_shift
        if self.pass_shift_courses:
            obj["pass_shift_courses"] = list(self.pass_shift_courses)
        if self.difficulty_variance_scale is not None:
            obj["difficulty_variance_scale"] = self.difficulty_variance_scale
        if self.window_delta:
            obj["window_delta"] = self.window_delta
        if self.required_delta:
            obj["required_delta"] = self.required_delta
        if self.downgrade_edges:
            obj["downgrade_edges"] = (self.downgrade_edges if self.downgrade_edges == "ALL"
                                      else [list(e) for e in self.downgrade_edges])
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PolicyIntervention":
        known = {"axis", "remove_edges", "add_offerings", "alternative_prereqs",
                 "pass_shift", "pass_shift_courses", "difficulty_variance_scale",
                 "window_delta", "required_delta", "downgrade_edges"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown intervention keys: {sorted(unknown)}")
        downgrade = obj.get("downgrade_edges", ())
        if downgrade != "ALL" and downgrade != ():
            downgrade = tuple((e[0], e[1]) for e in downgrade)
        return cls(
            axis=obj["axis"],
            remove_edges=tuple((e[0], e[1]) for e in obj.get("remove_edges", [])),
            add_offerings=tuple(sorted(
                (c, tuple(sorted(p))) for c, p in obj.get("add_offerings", {}).items())),
            alternative_prereqs=tuple(
                (a[0], a[1], a[2]) for a in obj.get("alternative_prereqs", [])),
            pass_shift=float(obj.get("pass_shift", 0.0)),
            pass_shift_courses=tuple(obj.get("pass_shift_courses", [])),
            difficulty_variance_scale=obj.get("difficulty_variance_scale"),
            window_delta=int(obj.get("window_delta", 0)),
            required_delta=int(obj.get("required_delta", 0)),
            downgrade_edges=downgrade,
        )


def apply_policy(curriculum: Curriculum, rules: BehaviorRules,
                 interventions: list[PolicyIntervention]
                 ) -> tuple[Curriculum, BehaviorRules]:
    """Apply interventions and re-validate; set-based edits are idempotent
    (already-absent removals and already-present additions warn and no-op)."""
    courses = {c.id: c for c in curriculum.courses.values()}
    edges = list(curriculum.edges)
    rule_changes: dict = {}

    for item in interventions:
        if item.axis == STRUCTURAL:
            for pair in item.remove_edges:
                matching = [e for e in edges if (e.from_id, e.to_id) == tuple(pair)]
                if not matching:
                    warnings.warn(f"edge {pair[0]}->{pair[1]} already absent; no-op")
                edges = [e for e in edges if (e.from_id, e.to_id) != tuple(pair)]
            for cid, parities in item.add_offerings:
                if cid not in courses:
                    raise InvalidPolicy(f"add_offerings: unknown course {cid!r}")
                current = courses[cid].terms_offered
                added = set(parities) - current
                if not added:
                    warnings.warn(f"offerings for {cid} already include {parities}; no-op")
                courses[cid] = dataclasses.replace(
                    courses[cid], terms_offered=frozenset(current | set(parities)))
            for cid, old_from, new_from in item.alternative_prereqs:
                matching = [e for e in edges
                            if e.from_id == old_from and e.to_id == cid]
                if not matching:
                    raise InvalidPolicy(
                        f"alternative_prereqs: no edge {old_from}->{cid} to replace")
                if new_from not in courses:
                    raise InvalidPolicy(f"alternative_prereqs: unknown course {new_from!r}")
                kind = matching[0].kind
                edges = [e for e in edges
                         if not (e.from_id == old_from and e.to_id == cid)]
                edges.append(PrereqEdge(new_from, cid, kind))
        elif item.axis == PEDAGOGICAL:
            targets = item.pass_shift_courses or tuple(courses)
            for cid in targets:
                if cid not in courses:
                    raise InvalidPolicy(f"pass_shift: unknown course {cid!r}")
                courses[cid] = dataclasses.replace(
                    courses[cid],
                    base_difficulty=courses[cid].base_difficulty + item.pass_shift)
            if item.difficulty_variance_scale is not None:
                scale = item.difficulty_variance_scale
                mean = float(np.mean([c.base_difficulty for c in courses.values()]))
                for cid in courses:
                    d = courses[cid].base_difficulty
                    courses[cid] = dataclasses.replace(
                        courses[cid], base_difficulty=mean + scale * (d - mean))
        else:  # REGULATORY
            if item.window_delta:
                rule_changes["regularity_window"] = (
                    rule_changes.get("regularity_window", rules.regularity_window)
                    + item.window_delta)
            if item.required_delta:
                rule_changes["regularity_required"] = (
                    rule_changes.get("regularity_required", rules.regularity_required)
                    + item.required_delta)
            if item.downgrade_edges:
                pairs = (None if item.downgrade_edges == "ALL"
                         else {tuple(e) for e in item.downgrade_edges})
                new_edges = []
                for e in edges:
                    hit = (pairs is None or (e.from_id, e.to_id) in pairs)
                    if hit and e.kind == REQUIRES_PASSED:
                        new_edges.append(PrereqEdge(e.from_id, e.to_id,
                                                    REQUIRES_REGULARIZED))
                    else:
                        if hit and e.kind == REQUIRES_REGULARIZED:
                            warnings.warn(f"edge {e.from_id}->{e.to_id} already "
                                          "REQUIRES_REGULARIZED; no-op")
                        new_edges.append(e)
                edges = new_edges

    if "regularity_window" in rule_changes and rule_changes["regularity_window"] < 1:
        raise InvalidPolicy("regularity window would drop below 1")
    if ("regularity_required" in rule_changes
            and rule_changes["regularity_required"] < 0):
        raise InvalidPolicy("regularity requirement would drop below 0")
    new_rules = dataclasses.replace(rules, **rule_changes) if rule_changes else rules
    try:
        new_curriculum = build_curriculum(list(courses.values()), edges,
                                          curriculum.graduation, ref=curriculum.ref)
    except CycleDetected as exc:
        raise InvalidPolicy(f"policy would create a cycle: {exc}")
    return new_curriculum, new_rules


@dataclass(frozen=True)
class ExperimentDesign:
    base: SimulationConfig
    factors: dict[str, PolicyIntervention]   # axis -> its "on" intervention
    replications: int
    seed_base: int = 0

    def axes(self) -> list[str]:
        return [a for a in AXES if a in self.factors]

    def cells(self) -> list[tuple[str, dict[str, bool]]]:
        """Canonical cell enumeration: first axis is the most significant bit."""
        axes = self.axes()
        out = []
        for levels in product((False, True), repeat=len(axes)):
            mapping = dict(zip(axes, levels))
            cell_id = "".join(f"{a[0]}{'+' if on else '-'}"
                              for a, on in mapping.items())
            out.append((cell_id or "BASE", mapping))
        return out

    def seed_for(self, cell_index: int, rep: int) -> int:
        # documented formula: seed_base + cell_index * R + rep
        return self.seed_base + cell_index * self.replications + rep


@dataclass(frozen=True)
class CellResult:
    cell_id: str
    levels: dict[str, bool]
    outcomes: tuple[dict[str, float], ...]
    means: dict[str, float]
    sds: dict[str, float]

    @classmethod
    def from_outcomes(cls, cell_id, levels, outcomes):
        keys = ("dropout_rate", "graduation_rate", "mean_time_to_degree",
                "graduate_count")
        means, sds = {}, {}
        for key in keys:
            values = np.array([o[key] for o in outcomes], dtype=float)
            valid = values[~np.isnan(values)]
            means[key] = float(valid.mean()) if valid.size else float("nan")
            sds[key] = float(valid.std(ddof=1)) if valid.size > 1 else 0.0
        return cls(cell_id=cell_id, levels=dict(levels), outcomes=tuple(outcomes),
                   means=means, sds=sds)


def _outcomes_of(result: SimulationResult) -> dict[str, float]:
    return {
        "dropout_rate": result.dropout_rate,
        "graduation_rate": result.graduation_rate,
        "mean_time_to_degree": result.mean_time_to_degree(),
        "graduate_count": float(sum(result.time_to_degree.values())),
    }


def run_experiment(design: ExperimentDesign) -> list[CellResult]:
    """Simulate every cell x replication with the documented seed formula."""
    if design.replications < 1:
        raise ConfigError("replications must be >= 1")
    results = []
    for cell_index, (cell_id, levels) in enumerate(design.cells()):
        interventions = tuple(design.factors[a] for a in design.axes() if levels[a])
        outcomes = []
        for rep in range(design.replications):
            config = dataclasses.replace(design.base, policy=interventions,
                                         seed=design.seed_for(cell_index, rep))
            try:
                outcomes.append(_outcomes_of(simulate(config)))
            except ConfigError as exc:
                raise ConfigError(f"cell {cell_id}: {exc}")
        results.append(CellResult.from_outcomes(cell_id, levels, outcomes))
    return results


@dataclass(frozen=True)
class Contrast:
    estimate: float
    std_error: float


@dataclass(frozen=True)
class EffectsReport:
    outcome: str
    main: dict[str, Contrast]
    interactions: dict[tuple[str, ...], Contrast]
    axes: tuple[str, ...]
    replications: int

    def to_json_obj(self) -> dict:
        return {
            "outcome": self.outcome,
            "replications": self.replications,
            "main_effects": {a: {"estimate": c.estimate, "std_error": c.std_error}
                             for a, c in sorted(self.main.items())},
            "interactions": {"*".join(k): {"estimate": c.estimate,
                                           "std_error": c.std_error}
                             for k, c in sorted(self.interactions.items())},
        }


def decompose_effects(cells: list[CellResult], outcome: str) -> EffectsReport:
    """Standard 2^k contrasts from cell means.

    Every contrast is sum(sign-product * cell mean) / 2^(k-1); its Monte
    Carlo standard error comes from the per-cell replication variances.
    """
    if outcome not in OUTCOME_KEYS:
        raise ConfigError(f"unknown outcome {outcome!r}")
    axes = sorted({a for cell in cells for a in cell.levels}, key=AXES.index)
    expected = 2 ** len(axes)
    seen = {tuple(cell.levels[a] for a in axes) for cell in cells}
    if len(cells) != expected or len(seen) != expected:
        raise IncompleteDesign(f"need all {expected} cells of the {len(axes)}-axis "
                               f"crossing, have {len(cells)}")
    reps = {len(cell.outcomes) for cell in cells}
    if len(reps) != 1:
        raise IncompleteDesign("unequal replication counts across cells")
    R = reps.pop()

    denom = 2 ** (len(axes) - 1) if axes else 1
    main: dict[str, Contrast] = {}
    interactions: dict[tuple[str, ...], Contrast] = {}
    for size in range(1, len(axes) + 1):
        for subset in combinations(axes, size):
            estimate = 0.0
            variance = 0.0
            for cell in cells:
                sign = 1.0
                for a in subset:
                    sign *= 1.0 if cell.levels[a] else -1.0
                coef = sign / denom
                estimate += coef * cell.means[outcome]
                variance += (coef ** 2) * (cell.sds[outcome] ** 2) / R
            contrast = Contrast(estimate=estimate, std_error=float(np.sqrt(variance)))
            if size == 1:
                main[subset[0]] = contrast
            else:
                interactions[subset] = contrast
    return EffectsReport(outcome=outcome, main=main, interactions=interactions,
                         axes=tuple(axes), replications=R)


def detect_amplifiers(report: EffectsReport, threshold: float
                      ) -> list[tuple[tuple[str, str], dict]]:
    """Pairs whose interaction improves the outcome beyond the threshold and
    beyond two contrast standard errors. STRUCTURAL pairs are highlighted."""
    sign = IMPROVEMENT_SIGN[report.outcome]
    flagged = []
    for subset, contrast in sorted(report.interactions.items()):
        if len(subset) != 2:
            continue
        improvement = sign * contrast.estimate
        if improvement > threshold and improvement > 2.0 * contrast.std_error:
            flagged.append((subset, {
                "estimate": contrast.estimate,
                "std_error": contrast.std_error,
                "improvement": improvement,
                "structural": STRUCTURAL in subset,
            }))
    return flagged


def flag_adverse_outcomes(cells: list[CellResult], base_cell_id: str,
                          eps_dropout: float, delta_ttd: float) -> list[str]:
    """Cells where time-to-degree rises by at least delta_ttd while dropout
    fails to improve by more than eps_dropout."""
    by_id = {cell.cell_id: cell for cell in cells}
    if base_cell_id not in by_id:
        raise ConfigError(f"unknown base cell {base_cell_id!r}")
    base = by_id[base_cell_id]
    flagged = []
    for cell in cells:
        if cell.cell_id == base_cell_id:
            continue
        dropout_ok = cell.means["dropout_rate"] >= base.means["dropout_rate"] - eps_dropout
        ttd_up = (cell.means["mean_time_to_degree"]
                  >= base.means["mean_time_to_degree"] + delta_ttd)
        if dropout_ok and ttd_up:
            flagged.append(cell.cell_id)
    return flagged
