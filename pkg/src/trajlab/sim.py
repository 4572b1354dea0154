"""Agent-based cohort simulator over a prerequisite curriculum.

Each agent is a student with heterogeneous preparation and work hours drawn
at entry. Per term an agent (1) collects the courses its edge requirements
and the term parity allow, (2) enrolls bottleneck-first up to its load cap,
(3) passes each course with a logistic probability driven by preparation,
overload, strikes and work hours, (4) re-evaluates rolling-window
regularity, losing enrollment capacity when it lapses, and (5) faces a
logistic dropout hazard driven by prerequisite friction, regularity loss,
inflation, strikes, the friction-x-inflation interaction and tenure.

Randomness comes from one seeded substream per agent (run seed + agent id),
so agents may be stepped in any order and results are reproducible bit for
bit; run-level aggregates satisfy enrolled + graduated + dropped = n at
every term (checked in the loop).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curriculum import (
    ODD,
    REQUIRES_PASSED,
    Curriculum,
    bottleneck_scores,
    curriculum_to_json_obj,
    friction_from_sets,
    min_completion_terms,
    _parity_of,
    _topo_order,
)
from .errors import ConfigError, HorizonMismatch, InvalidDistribution
from .temporal import (
    Dataset,
    ExitStatus,
    FeatureRegistry,
    ShockSeries,
    StudentRecord,
    TermSnapshot,
    _register_derived,
    n1,
    n2,
)


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class PopulationSpec:
    n: int
    ses_mean: float = 0.0
    ses_sd: float = 1.0
    prep_base_mean: float = 0.0
    prep_sd: float = 0.8
    prep_ses_slope: float = 0.5
    work_base_mean: float = 0.4
    work_base_sd: float = 0.2

    def __post_init__(self):
        if self.n < 0:
            raise InvalidDistribution("population size must be >= 0")
        for name in ("ses_sd", "prep_sd", "work_base_sd"):
            if getattr(self, name) < 0:
                raise InvalidDistribution(f"{name} must be >= 0")

    def to_json_obj(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n", "ses_mean", "ses_sd", "prep_base_mean", "prep_sd",
            "prep_ses_slope", "work_base_mean", "work_base_sd")}


@dataclass(frozen=True)
class BehaviorRules:
    """Pass-model and hazard coefficients plus institutional rule parameters.

    Pass probability per enrolled course:
        logistic(pass_base + course_difficulty + pass_prep*prep
                 - pass_overload*max(0, load - comfort_load)
                 - pass_strike*strike_fraction - pass_work*work_hours)

    Dropout hazard per term:
        logistic(haz_base + haz_friction*F + haz_regularity_loss*1[lapsed]
                 + haz_inflation*infl + haz_strike*strike
                 + haz_friction_inflation*F*infl + haz_tenure*term)
    """

    pass_base: float = 1.2
    pass_prep: float = 0.8
    pass_overload: float = 0.4
    pass_strike: float = 2.0
    pass_work: float = 0.6
    haz_base: float = -4.5
    haz_friction: float = 2.0
    haz_regularity_loss: float = 1.2
    haz_inflation: float = 1.5
    haz_strike: float = 1.0
    haz_friction_inflation: float = 4.0
    haz_tenure: float = 0.08
    regularity_required: int = 2
    regularity_window: int = 2
    nominal_cap: int = 4
    reduced_cap: int = 2
    comfort_load: int = 3
    work_inflation_slope: float = 0.5
    selection_rule: str = "bottleneck"

    def __post_init__(self):
        if self.regularity_window < 1:
            raise ConfigError("regularity_window must be >= 1")
        if not 1 <= self.reduced_cap <= self.nominal_cap:
            raise ConfigError("need 1 <= reduced_cap <= nominal_cap")
        if self.selection_rule not in ("bottleneck", "topological", "random"):
            raise ConfigError(f"unknown selection rule {self.selection_rule!r}")

    def to_json_obj(self) -> dict:
        return {k: getattr(self, k) for k in (
            "pass_base", "pass_prep", "pass_overload", "pass_strike", "pass_work",
            "haz_base", "haz_friction", "haz_regularity_loss", "haz_inflation",
            "haz_strike", "haz_friction_inflation", "haz_tenure",
            "regularity_required", "regularity_window", "nominal_cap",
            "reduced_cap", "comfort_load", "work_inflation_slope", "selection_rule")}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BehaviorRules":
        known = cls().to_json_obj().keys()
        unknown = set(obj) - set(known)
        if unknown:
            raise ConfigError(f"unknown rule parameters: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class AgentState:
    id: str
    prep: float
    ses: float
    work_hours_base: float
    passed: set[str] = field(default_factory=set)
    regularized: set[str] = field(default_factory=set)
    attempted: set[str] = field(default_factory=set)
    attempts: dict[str, int] = field(default_factory=dict)
    regularity_status: bool = True
    window_history: list[int] = field(default_factory=list)
    status: ExitStatus = ExitStatus("ENROLLED")
    snapshots: list[TermSnapshot] = field(default_factory=list)
    rng: np.random.Generator | None = None

    def credits(self, curriculum: Curriculum) -> float:
        return sum(curriculum.courses[c].credits for c in self.passed)


@dataclass(frozen=True)
class SimulationConfig:
    curriculum: Curriculum
    population: PopulationSpec
    shocks: ShockSeries
    rules: BehaviorRules
    policy: tuple = ()
    horizon: int = 20
    seed: int = 0

    def to_json_obj(self) -> dict:
        return {
            "curriculum": curriculum_to_json_obj(self.curriculum),
            "population": self.population.to_json_obj(),
            "shocks": {
                "inflation": {str(t): v for t, v in sorted(self.shocks.inflation.items())},
                "strike": {str(t): v for t, v in sorted(self.shocks.strike.items())},
            },
            "rules": self.rules.to_json_obj(),
            "policy": [p.to_json_obj() for p in self.policy],
            "horizon": self.horizon,
            "seed": self.seed,
        }


def config_fingerprint(obj: dict) -> str:
    """Stable content hash over a canonically serialized config object."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TermAggregate:
    term: int
    enrolled: int            # still enrolled at end of term
    graduated_this: int
    dropped_this: int
    graduated_cum: int
    dropped_cum: int
    mean_friction: float     # across agents active during the term
    regularity_losses: int   # lapses newly triggered this term


@dataclass(frozen=True)
class SimulationResult:
    n: int
    seed: int
    horizon: int
    config_fingerprint: str
    curriculum_ref: str
    terms: tuple[TermAggregate, ...]
    congestion: dict[str, dict[str, int]]
    dropout_rate: float
    graduation_rate: float
    time_to_degree: dict[int, int]
    records: tuple[StudentRecord, ...]
    shocks: ShockSeries

    def mean_time_to_degree(self) -> float:
        total = sum(self.time_to_degree.values())
        if total == 0:
            return float("nan")
        return sum(t * c for t, c in self.time_to_degree.items()) / total

    def survival_curve(self) -> list[float]:
        """Fraction of the cohort not yet dropped, per simulated term."""
        if self.n == 0:
            return [1.0 for _ in self.terms]
        return [1.0 - agg.dropped_cum / self.n for agg in self.terms]

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "horizon": self.horizon,
            "config_fingerprint": self.config_fingerprint,
            "curriculum_ref": self.curriculum_ref,
            "dropout_rate": self.dropout_rate,
            "graduation_rate": self.graduation_rate,
            "mean_time_to_degree": (None if not self.time_to_degree
                                    else self.mean_time_to_degree()),
            "time_to_degree_histogram": {str(k): v for k, v
                                         in sorted(self.time_to_degree.items())},
            "terms": [
                {"term": a.term, "enrolled": a.enrolled,
                 "graduated_this": a.graduated_this, "dropped_this": a.dropped_this,
                 "graduated_cum": a.graduated_cum, "dropped_cum": a.dropped_cum,
                 "mean_friction": a.mean_friction,
                 "regularity_losses": a.regularity_losses}
                for a in self.terms
            ],
            "congestion": {c: dict(sorted(v.items()))
                           for c, v in sorted(self.congestion.items())},
        }

    def to_dataset(self) -> Dataset:
        registry = synth_registry()
        full = FeatureRegistry()
        for d in registry:
            full.register(d.name, d.window, d.kind)
        max_term = max((r.last_term() for r in self.records), default=0)
        _register_derived(full, max_term)
        return Dataset(features=full, records=self.records, shocks=self.shocks,
                       curriculum_ref=self.curriculum_ref)


def synth_registry() -> FeatureRegistry:
    reg = FeatureRegistry()
    reg.register("ses_index", n1(), "numeric")
    reg.register("work_hours_base", n1(), "numeric")
    reg.register("diagnostic_score", n2(), "numeric")
    return reg


def _agent_stream(seed: int, agent_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{agent_id}".encode("utf-8")).digest()
    entropy = int.from_bytes(digest[:16], "big")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def sample_population(spec: PopulationSpec, seed: int) -> list[AgentState]:
    """Draw agents with preparation shifted by socioeconomic status; per-agent
    simulation streams derive from (seed, agent id)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x9E3779B9)))
    ses = rng.normal(spec.ses_mean, spec.ses_sd, size=spec.n)
    prep_noise = rng.normal(0.0, spec.prep_sd, size=spec.n)
    work = np.clip(rng.normal(spec.work_base_mean, spec.work_base_sd, size=spec.n),
                   0.0, None)
    agents = []
    for i in range(spec.n):
        agent_id = f"a{i:05d}"
        prep = spec.prep_base_mean + spec.prep_ses_slope * ses[i] + prep_noise[i]
        agents.append(AgentState(id=agent_id, prep=float(prep), ses=float(ses[i]),
                                 work_hours_base=float(work[i]),
                                 rng=_agent_stream(seed, agent_id)))
    return agents


@dataclass
class WorldState:
    curriculum: Curriculum
    rules: BehaviorRules
    shocks: ShockSeries
    agents: list[AgentState]
    selection_rank: dict[str, float]
    prereqs: dict[str, list]
    start_parity: str = ODD
    congestion: dict[str, dict[str, int]] = field(default_factory=dict)


def build_world(curriculum: Curriculum, rules: BehaviorRules, shocks: ShockSeries,
                agents: list[AgentState]) -> WorldState:
    if rules.selection_rule == "bottleneck":
        scores = bottleneck_scores(curriculum)
        rank = {c: -scores[c] for c in curriculum.courses}
    elif rules.selection_rule == "topological":
        rank = {c: float(i) for i, c in enumerate(_topo_order(curriculum))}
    else:
        rank = {c: 0.0 for c in curriculum.courses}
    prereqs = {c: curriculum.prereqs_of(c) for c in curriculum.courses}
    return WorldState(curriculum=curriculum, rules=rules, shocks=shocks,
                      agents=agents, selection_rank=rank, prereqs=prereqs)


def _eligible_courses(world: WorldState, agent: AgentState, parity: str) -> list[str]:
    out = []
    for cid, course in world.curriculum.courses.items():
        if cid in agent.passed or parity not in course.terms_offered:
            continue
        ok = True
        for edge in world.prereqs[cid]:
            anchor = agent.regularized if edge.kind != REQUIRES_PASSED else agent.passed
            if edge.from_id not in anchor:
                ok = False
                break
        if ok:
            out.append(cid)
    return out


def step_term(world: WorldState, term: int) -> TermAggregate:
    """Advance every enrolled agent one term; returns the term log.

    Mutates world in place. Agent substreams make the iteration order
    irrelevant to the outcome.
    """
    rules = world.rules
    parity = _parity_of(term, world.start_parity)
    inflation = world.shocks.inflation_at(term)
    strike = world.shocks.strike_at(term)
    graduated_this = dropped_this = 0
    losses_this = 0
    frictions = []
    course_attempts: dict[str, int] = {}
    course_fails: dict[str, int] = {}

    for agent in world.agents:
        if agent.status.kind != "ENROLLED":
            continue
        eligible = _eligible_courses(world, agent, parity)
        cap = rules.nominal_cap if agent.regularity_status else rules.reduced_cap
        if rules.selection_rule == "random":
            order = list(agent.rng.permutation(len(eligible)))
            eligible = [eligible[i] for i in order]
            selected = eligible[:cap]
        else:
            selected = sorted(eligible,
                              key=lambda c: (world.selection_rank[c], c))[:cap]

        load = len(selected)
        overload = max(0, load - rules.comfort_load)
        work_hours = max(0.0, agent.work_hours_base
                         + rules.work_inflation_slope * inflation)
        outcomes: dict[str, str] = {}
        credits = 0.0
        completions = 0
        for cid in selected:
            agent.attempted.add(cid)
            agent.attempts[cid] = agent.attempts.get(cid, 0) + 1
            course_attempts[cid] = course_attempts.get(cid, 0) + 1
            course = world.curriculum.courses[cid]
            p_pass = logistic(rules.pass_base + course.base_difficulty
                              + rules.pass_prep * agent.prep
                              - rules.pass_overload * overload
                              - rules.pass_strike * strike
                              - rules.pass_work * work_hours)
            if agent.rng.random() < p_pass:
                outcomes[cid] = "PASSED"
                agent.passed.add(cid)
                agent.regularized.add(cid)
                credits += course.credits
                completions += 1
            else:
                outcomes[cid] = "FAILED"
                course_fails[cid] = course_fails.get(cid, 0) + 1

        agent.window_history.append(completions)
        was_regular = agent.regularity_status
        if len(agent.window_history) >= rules.regularity_window:
            window = agent.window_history[-rules.regularity_window:]
            agent.regularity_status = sum(window) >= rules.regularity_required
        if was_regular and not agent.regularity_status:
            losses_this += 1

        friction = friction_from_sets(world.curriculum, agent.attempted,
                                      agent.passed, agent.regularized)
        frictions.append(friction)
        agent.snapshots.append(TermSnapshot(
            term=term, enrollments=tuple(sorted(selected)), outcomes=outcomes,
            credits_earned=credits, regularity_status=agent.regularity_status,
            friction_index=friction))

        if world.curriculum.satisfied(agent.passed, agent.credits(world.curriculum)):
            agent.status = ExitStatus("GRADUATED", term)
            graduated_this += 1
            continue

        hazard = logistic(rules.haz_base
                          + rules.haz_friction * friction
                          + rules.haz_regularity_loss * (0.0 if agent.regularity_status else 1.0)
                          + rules.haz_inflation * inflation
                          + rules.haz_strike * strike
                          + rules.haz_friction_inflation * friction * inflation
                          + rules.haz_tenure * term)
        if agent.rng.random() < hazard:
            agent.status = ExitStatus("DROPPED", term)
            dropped_this += 1

    graduated_cum = sum(1 for a in world.agents if a.status.kind == "GRADUATED")
    dropped_cum = sum(1 for a in world.agents if a.status.kind == "DROPPED")
    enrolled = sum(1 for a in world.agents if a.status.kind == "ENROLLED")
    agg = TermAggregate(
        term=term, enrolled=enrolled, graduated_this=graduated_this,
        dropped_this=dropped_this, graduated_cum=graduated_cum,
        dropped_cum=dropped_cum,
        mean_friction=float(np.mean(frictions)) if frictions else 0.0,
        regularity_losses=losses_this)
    for cid, count in course_attempts.items():
        entry = world.congestion.setdefault(cid, {"attempts": 0, "fails": 0})
        entry["attempts"] += count
    for cid, count in course_fails.items():
        entry = world.congestion.setdefault(cid, {"attempts": 0, "fails": 0})
        entry["fails"] += count
    return agg


def simulate(config: SimulationConfig) -> SimulationResult:
    """Run the cohort for the configured horizon (or until nobody is enrolled).

    Policy interventions in the config are applied to the curriculum and
    rules before the run. Identical config and seed give a bit-identical
    result.
    """
    curriculum, rules = config.curriculum, config.rules
    if config.policy:
        from .policy import apply_policy  # deferred: policy builds on sim types

        curriculum, rules = apply_policy(curriculum, rules, list(config.policy))
    if config.horizon < 1:
        raise ConfigError("horizon must be >= 1")
    try:
        config.shocks.require(config.horizon)
    except HorizonMismatch as exc:
        raise ConfigError(str(exc))
    if config.population.n > 0:
        floor = min_completion_terms(curriculum, rules.nominal_cap, ODD)
        if config.horizon < floor:
            raise ConfigError(f"horizon {config.horizon} below the structural "
                              f"minimum of {floor} terms")

    fingerprint = config_fingerprint(config.to_json_obj())
    agents = sample_population(config.population, config.seed)
    world = build_world(curriculum, rules, config.shocks, agents)

    terms: list[TermAggregate] = []
    for term in range(1, config.horizon + 1):
        agg = step_term(world, term)
        if agg.enrolled + agg.graduated_cum + agg.dropped_cum != config.population.n:
            raise RuntimeError(f"conservation violated at term {term}")
        terms.append(agg)
        if agg.enrolled == 0:
            break

    records = []
    ttd: dict[int, int] = {}
    for agent in world.agents:
        if agent.status.kind == "GRADUATED":
            ttd[agent.status.term] = ttd.get(agent.status.term, 0) + 1
        records.append(StudentRecord(
            id=agent.id,
            n1={"ses_index": agent.ses, "work_hours_base": agent.work_hours_base},
            n2={"diagnostic_score": agent.prep},
            n3=tuple(agent.snapshots),
            exit=agent.status))
    n = config.population.n
    dropped = sum(1 for a in world.agents if a.status.kind == "DROPPED")
    graduated = sum(1 for a in world.agents if a.status.kind == "GRADUATED")
    return SimulationResult(
        n=n, seed=config.seed, horizon=config.horizon,
        config_fingerprint=fingerprint, curriculum_ref=curriculum.ref,
        terms=tuple(terms),
        congestion=world.congestion,
        dropout_rate=dropped / n if n else 0.0,
        graduation_rate=graduated / n if n else 0.0,
        time_to_degree=ttd, records=tuple(records), shocks=config.shocks)


@dataclass(frozen=True)
class FitReport:
    max_survival_gap: float
    max_ttd_cdf_gap: float
    tolerance: float
    passed: bool


def _survival_from_records(records, horizon: int, n: int) -> list[float]:
    out = []
    for t in range(1, horizon + 1):
        dropped = sum(1 for r in records
                      if r.exit.kind == "DROPPED" and r.exit.term <= t)
        out.append(1.0 - dropped / n if n else 1.0)
    return out


def _ttd_cdf(hist: dict[int, int], horizon: int) -> list[float]:
    total = sum(hist.values())
    out = []
    cum = 0
    for t in range(1, horizon + 1):
        cum += hist.get(t, 0)
        out.append(cum / total if total else 0.0)
    return out


def validate_against_observed(result: SimulationResult, observed: Dataset,
                              tolerance: float = 0.05) -> FitReport:
    """Compare per-term survival curves and time-to-degree CDFs.

    The observed data must cover every term the simulation was still active.
    """
    active_terms = len(result.terms)
    observed_cover = max((r.last_term() for r in observed.records), default=0)
    if observed_cover < active_terms:
        raise HorizonMismatch(f"observed data covers {observed_cover} terms, "
                              f"simulation was active for {active_terms}")
    n_obs = len(observed.records)
    sim_surv = _survival_from_records(result.records, active_terms, result.n)
    obs_surv = _survival_from_records(observed.records, active_terms, n_obs)
    surv_gap = max((abs(a - b) for a, b in zip(sim_surv, obs_surv)), default=0.0)

    obs_ttd: dict[int, int] = {}
    for r in observed.records:
        if r.exit.kind == "GRADUATED":
            obs_ttd[r.exit.term] = obs_ttd.get(r.exit.term, 0) + 1
    sim_cdf = _ttd_cdf(result.time_to_degree, active_terms)
    obs_cdf = _ttd_cdf(obs_ttd, active_terms)
    ttd_gap = max((abs(a - b) for a, b in zip(sim_cdf, obs_cdf)), default=0.0)

    passed = surv_gap <= tolerance and ttd_gap <= tolerance
    return FitReport(max_survival_gap=surv_gap, max_ttd_cdf_gap=ttd_gap,
                     tolerance=tolerance, passed=passed)


def matched_hazard_contrast(results: list[SimulationResult],
                            n_deciles: int = 10) -> tuple[float, int]:
    """Dropout-hazard gap between regularity-lapsed and regular agent-terms,
    matched on (term, friction decile).

    Pools agent-terms across runs; strata contribute with Mantel-Haenszel
    style weights. Positive contrast means lapsing regularity raises the
    hazard beyond what friction and tenure explain.
    """
    rows = []  # (term, friction, lapsed, dropped)
    for result in results:
        for record in result.records:
            for snap in record.n3:
                if record.exit.kind == "GRADUATED" and record.exit.term == snap.term:
                    continue  # graduation precedes the dropout draw
                dropped = (record.exit.kind == "DROPPED"
                           and record.exit.term == snap.term)
                rows.append((snap.term, snap.friction_index,
                             not snap.regularity_status, dropped))
    if not rows:
        return 0.0, 0
    frictions = sorted(r[1] for r in rows)
    edges = [frictions[min(len(frictions) - 1, int(len(frictions) * q / n_deciles))]
             for q in range(1, n_deciles)]

    def decile(f: float) -> int:
        for i, e in enumerate(edges):
            if f <= e:
                return i
        return len(edges)

    strata: dict[tuple[int, int], list[tuple[bool, bool]]] = {}
    for term, friction, lapsed, dropped in rows:
        strata.setdefault((term, decile(friction)), []).append((lapsed, dropped))
    total_weight = 0.0
    contrast = 0.0
    used = 0
    for _, members in sorted(strata.items()):
        exposed = [d for l, d in members if l]
        control = [d for l, d in members if not l]
        if not exposed or not control:
            continue
        h_e = sum(exposed) / len(exposed)
        h_c = sum(control) / len(control)
        w = len(exposed) * len(control) / (len(exposed) + len(control))
        contrast += w * (h_e - h_c)
        total_weight += w
        used += 1
    if total_weight == 0:
        return 0.0, 0
    return contrast / total_weight, used
