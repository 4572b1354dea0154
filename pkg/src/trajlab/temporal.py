"""Multi-level longitudinal store with observation-window discipline.

Student data is partitioned into four observation levels: pre-entry (N1),
entry (N2), per-term trajectory (N3) and per-term external context (N4).
Every feature carries the window at which it becomes observable, and
`assert_no_leakage` / `view_as_of` guarantee that downstream analyses only
consume information available at their decision point.

Window ordering: N1 < N2 < N3(t) = N4(t) < N3(t+1) = N4(t+1). Context for
term t is treated as observable during term t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .curriculum import Curriculum, friction_from_sets
from .errors import (
    DuplicateFeature,
    HorizonMismatch,
    InvalidWindow,
    LeakageViolation,
    NonMonotoneTerms,
    SchemaError,
    UnknownCourse,
)

N1_PRE_ENTRY = "N1_PRE_ENTRY"
N2_ENTRY = "N2_ENTRY"
N3_TERM = "N3_TERM"
N4_CONTEXT = "N4_CONTEXT"

_LEVELS = (N1_PRE_ENTRY, N2_ENTRY, N3_TERM, N4_CONTEXT)
_TERMED = (N3_TERM, N4_CONTEXT)

OUTCOMES = ("PASSED", "REGULARIZED", "FAILED", "WITHDRAWN")

FEATURE_KINDS = ("numeric", "categorical", "boolean")


@dataclass(frozen=True)
class ObservationWindow:
    """A point on the observability timeline."""

    level: str
    term: int | None = None

    def __post_init__(self):
        if self.level not in _LEVELS:
            raise InvalidWindow(f"unknown window level {self.level!r}")
        if self.level in _TERMED:
            if self.term is None or self.term < 1:
                raise InvalidWindow(f"{self.level} requires a term index >= 1, got {self.term!r}")
        elif self.term is not None:
            raise InvalidWindow(f"{self.level} does not take a term index")

    @property
    def rank(self) -> int:
        """Position in the total order used for leakage checks."""
        if self.level == N1_PRE_ENTRY:
            return 0
        if self.level == N2_ENTRY:
            return 1
        return 1 + self.term  # N3(t) and N4(t) share rank 1 + t

    def not_after(self, other: "ObservationWindow") -> bool:
        return self.rank <= other.rank

    def __str__(self) -> str:
        short = {N1_PRE_ENTRY: "N1", N2_ENTRY: "N2", N3_TERM: "N3", N4_CONTEXT: "N4"}[self.level]
        return short if self.term is None else f"{short}:{self.term}"

    @classmethod
    def parse(cls, text: str) -> "ObservationWindow":
        """Parse 'N1', 'N2', 'N3:4', 'N4:2' (long level names also accepted)."""
        text = text.strip()
        if ":" in text:
            head, _, tail = text.partition(":")
            try:
                term = int(tail)
            except ValueError:
                raise InvalidWindow(f"bad term index in window {text!r}")
        else:
            head, term = text, None
        aliases = {"N1": N1_PRE_ENTRY, "N2": N2_ENTRY, "N3": N3_TERM, "N4": N4_CONTEXT}
        level = aliases.get(head, head)
        return cls(level, term)


def n1() -> ObservationWindow:
    return ObservationWindow(N1_PRE_ENTRY)


def n2() -> ObservationWindow:
    return ObservationWindow(N2_ENTRY)


def n3(term: int) -> ObservationWindow:
    return ObservationWindow(N3_TERM, term)


def n4(term: int) -> ObservationWindow:
    return ObservationWindow(N4_CONTEXT, term)


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    window: ObservationWindow
    kind: str

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise InvalidWindow(f"unknown feature kind {self.kind!r}")


class FeatureRegistry:
    """Ordered registry of feature descriptors; names unique, windows immutable."""

    def __init__(self):
        self._by_name: dict[str, FeatureDescriptor] = {}

    def register(self, name: str, window: ObservationWindow, kind: str) -> FeatureDescriptor:
        if name in self._by_name:
            raise DuplicateFeature(f"feature {name!r} already registered")
        desc = FeatureDescriptor(name, window, kind)
        self._by_name[name] = desc
        return desc

    def get(self, name: str) -> FeatureDescriptor:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"feature {name!r} is not registered")

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self) -> int:
        return len(self._by_name)

    def names(self) -> list[str]:
        return list(self._by_name)

    def declared(self) -> list[FeatureDescriptor]:
        """Features declared by the user (N1/N2), excluding derived per-term ones."""
        return [d for d in self if d.window.level in (N1_PRE_ENTRY, N2_ENTRY)]

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureRegistry) and self._by_name == other._by_name

    def to_json_obj(self) -> list[dict]:
        out = []
        for d in self.declared():
            entry = {"name": d.name, "window": str(d.window).split(":")[0], "kind": d.kind}
            if d.window.term is not None:
                entry["term"] = d.window.term
            out.append(entry)
        return out

    @classmethod
    def from_json_obj(cls, obj: list[dict]) -> "FeatureRegistry":
        reg = cls()
        for entry in obj:
            term = entry.get("term")
            window = ObservationWindow.parse(
                entry["window"] if term is None else f"{entry['window']}:{term}"
            )
            reg.register(entry["name"], window, entry["kind"])
        return reg


def register_feature(registry: FeatureRegistry, name: str, window: ObservationWindow,
                     kind: str) -> FeatureDescriptor:
    return registry.register(name, window, kind)


@dataclass(frozen=True)
class TermSnapshot:
    term: int
    enrollments: tuple[str, ...]
    outcomes: dict[str, str]
    credits_earned: float
    regularity_status: bool
    friction_index: float

    def __post_init__(self):
        if not 0.0 <= self.friction_index <= 1.0:
            raise SchemaError(f"friction_index {self.friction_index} outside [0,1]")
        if self.credits_earned < 0:
            raise SchemaError(f"negative credits_earned {self.credits_earned}")
        for outcome in self.outcomes.values():
            if outcome not in OUTCOMES:
                raise SchemaError(f"unknown outcome {outcome!r}")


@dataclass(frozen=True)
class ExitStatus:
    kind: str  # GRADUATED | DROPPED | ENROLLED
    term: int | None = None

    def __post_init__(self):
        if self.kind not in ("GRADUATED", "DROPPED", "ENROLLED"):
            raise SchemaError(f"unknown exit status {self.kind!r}")
        if self.kind == "ENROLLED" and self.term is not None:
            raise SchemaError("ENROLLED carries no exit term")
        if self.kind != "ENROLLED" and (self.term is None or self.term < 1):
            raise SchemaError(f"{self.kind} requires an exit term >= 1")


ENROLLED = ExitStatus("ENROLLED")


@dataclass(frozen=True)
class StudentRecord:
    id: str
    n1: dict[str, object]
    n2: dict[str, object]
    n3: tuple[TermSnapshot, ...]
    exit: ExitStatus

    def last_term(self) -> int:
        return self.n3[-1].term if self.n3 else 0

    def validate(self, registry: FeatureRegistry) -> None:
        for level, values in ((N1_PRE_ENTRY, self.n1), (N2_ENTRY, self.n2)):
            for name in values:
                if name not in registry:
                    raise SchemaError(f"student {self.id!r}: unregistered feature {name!r}")
                if registry.get(name).window.level != level:
                    raise SchemaError(
                        f"student {self.id!r}: feature {name!r} not registered at {level}")
        expected = 1
        for snap in self.n3:
            if snap.term != expected:
                raise NonMonotoneTerms(self.id, f"expected term {expected}, found {snap.term}")
            expected += 1
        seen: set[str] = set()
        for snap in self.n3:
            seen.update(snap.enrollments)
            for course in snap.outcomes:
                if course not in seen:
                    raise SchemaError(
                        f"student {self.id!r}: outcome for {course!r} at term {snap.term} "
                        "precedes any enrollment")
        if self.exit.kind != "ENROLLED" and self.n3 and self.last_term() > self.exit.term:
            raise SchemaError(
                f"student {self.id!r}: snapshot term {self.last_term()} after exit at "
                f"term {self.exit.term}")


@dataclass(frozen=True)
class ShockSeries:
    """Per-term macro context: inflation rate and instructional days lost to strikes."""

    inflation: dict[int, float]
    strike: dict[int, float]

    def __post_init__(self):
        for term, value in self.strike.items():
            if not 0.0 <= value <= 1.0:
                raise SchemaError(f"strike_fraction {value} at term {term} outside [0,1]")
        for term, value in self.inflation.items():
            if value < -1.0:
                raise SchemaError(f"inflation_rate {value} at term {term} below -1")

    def terms(self) -> list[int]:
        return sorted(self.inflation)

    def require(self, horizon: int) -> None:
        missing = [t for t in range(1, horizon + 1)
                   if t not in self.inflation or t not in self.strike]
        if missing:
            raise HorizonMismatch(f"shock series missing terms {missing}")

    def inflation_at(self, term: int) -> float:
        return self.inflation[term]

    def strike_at(self, term: int) -> float:
        return self.strike[term]


@dataclass(frozen=True)
class Dataset:
    features: FeatureRegistry
    records: tuple[StudentRecord, ...]
    shocks: ShockSeries
    curriculum_ref: str

    def record_ids(self) -> list[str]:
        return [r.id for r in self.records]

    def max_term(self) -> int:
        return max((r.last_term() for r in self.records), default=0)


# -- derived per-term features ----------------------------------------------

DERIVED_N3 = ("credits", "cum_credits", "attempts", "fails", "friction", "regular")
DERIVED_N4 = ("inflation", "strike")


def derived_name(base: str, term: int) -> str:
    return f"{base}_t{term}"


def _register_derived(registry: FeatureRegistry, max_term: int) -> None:
    for t in range(1, max_term + 1):
        for base in DERIVED_N3:
            kind = "boolean" if base == "regular" else "numeric"
            registry.register(derived_name(base, t), n3(t), kind)
        for base in DERIVED_N4:
            registry.register(derived_name(base, t), n4(t), "numeric")


def _derived_value(record: StudentRecord, base: str, term: int) -> object:
    if term > record.last_term():
        # beyond observation: for exited students the values are still known
        # (activity stops, totals freeze); for enrolled students they are
        # genuinely unavailable and stay missing
        exited = (record.exit.kind != "ENROLLED" and record.exit.term is not None
                  and record.exit.term <= term)
        if not exited:
            return None
        if base in ("credits", "attempts", "fails"):
            return 0.0
        if base == "cum_credits":
            return sum(s.credits_earned for s in record.n3)
        if not record.n3:
            return None
        if base == "friction":
            return record.n3[-1].friction_index
        if base == "regular":
            return bool(record.n3[-1].regularity_status)
        raise KeyError(base)
    snap = record.n3[term - 1]
    if base == "credits":
        return snap.credits_earned
    if base == "cum_credits":
        return sum(s.credits_earned for s in record.n3[:term])
    if base == "attempts":
        return float(len(snap.enrollments))
    if base == "fails":
        return float(sum(1 for o in snap.outcomes.values() if o == "FAILED"))
    if base == "friction":
        return snap.friction_index
    if base == "regular":
        return bool(snap.regularity_status)
    raise KeyError(base)


# -- as-of views and the leakage guard ---------------------------------------

@dataclass
class FeatureMatrix:
    """Column store of feature values, one row per student; None marks missing."""

    ids: list[str]
    columns: list[str]
    values: dict[str, list]

    def column(self, name: str) -> list:
        return self.values[name]

    def to_array(self, columns: Iterable[str]) -> np.ndarray:
        """Numeric view (float64) of the named columns; missing becomes NaN."""
        cols = list(columns)
        out = np.full((len(self.ids), len(cols)), np.nan)
        for j, name in enumerate(cols):
            for i, v in enumerate(self.values[name]):
                if v is None:
                    continue
                if isinstance(v, bool):
                    out[i, j] = 1.0 if v else 0.0
                elif isinstance(v, (int, float)):
                    out[i, j] = float(v)
                else:
                    raise SchemaError(f"column {name!r} is not numeric (value {v!r})")
        return out


def view_as_of(dataset: Dataset, point: ObservationWindow) -> FeatureMatrix:
    """Matrix of every feature observable at `point`, never imputed.

    N3/N4 columns materialize only up to the point's term; cells a student
    has not reached are missing (None).
    """
    names = [d.name for d in dataset.features if d.window.not_after(point)]
    values: dict[str, list] = {}
    for name in names:
        desc = dataset.features.get(name)
        col: list = []
        for record in dataset.records:
            col.append(_feature_value(record, dataset, desc))
        values[name] = col
    return FeatureMatrix(ids=dataset.record_ids(), columns=names, values=values)


def _feature_value(record: StudentRecord, dataset: Dataset, desc: FeatureDescriptor):
    # explicit per-student values first (covers declared N1/N2 features and
    # analysis-time columns added at any window), then the derived layer
    if desc.name in record.n1:
        return record.n1[desc.name]
    if desc.name in record.n2:
        return record.n2[desc.name]
    level = desc.window.level
    if level == N3_TERM:
        base, _, tail = desc.name.rpartition("_t")
        if base in DERIVED_N3 and tail.isdigit():
            return _derived_value(record, base, int(tail))
    if level == N4_CONTEXT:
        base, _, tail = desc.name.rpartition("_t")
        if base in DERIVED_N4 and tail.isdigit():
            term = int(tail)
            series = dataset.shocks.inflation if base == "inflation" else dataset.shocks.strike
            return series.get(term)
    return None


def assert_no_leakage(model_inputs: Iterable[str], point: ObservationWindow,
                      registry: FeatureRegistry) -> None:
    """Raise LeakageViolation unless every input is observable at `point`.

    Mandatory gate before any model consumes features: archetype extraction
    and treatment-effect estimation both call this first.
    """
    offending = []
    for name in model_inputs:
        desc = registry.get(name)
        if not desc.window.not_after(point):
            offending.append((name, str(desc.window)))
    if offending:
        raise LeakageViolation(offending)


# -- ingestion and serialization ---------------------------------------------

def _parse_value(raw: str, kind: str, line: int):
    if raw == "":
        return None
    if kind == "numeric":
        try:
            return float(raw)
        except ValueError:
            raise SchemaError(f"expected numeric value, got {raw!r}", line)
    if kind == "boolean":
        lowered = raw.lower()
        if lowered in ("true", "1"):
            return True
        if lowered in ("false", "0"):
            return False
        raise SchemaError(f"expected boolean value, got {raw!r}", line)
    return raw


def _read_csv(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [(i + 1, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = rows[0][1]
    return header, rows[1:]


def compute_regularity(completions: list[int], window: int, required: int) -> list[bool]:
    """Rolling-window regularity: status holds until a full window sums below
    the requirement; earlier terms keep the initial (held) status."""
    status = True
    out = []
    for t in range(1, len(completions) + 1):
        if t >= window:
            status = sum(completions[t - window:t]) >= required
        out.append(status)
    return out


def ingest_dataset(curriculum: Curriculum, students_path: str | Path,
                   trajectories_path: str | Path, shocks_path: str | Path,
                   registry: FeatureRegistry,
                   regularity_window: int = 2, regularity_required: int = 2) -> Dataset:
    """Build a validated Dataset from the flat-file schema.

    students CSV:     id, n1_<name>..., n2_<name>..., exit_status, exit_term
    trajectories CSV: id, term, course_id, outcome, credits (empty course_id
                      marks an explicitly inactive term)
    shocks CSV:       term, inflation_rate, strike_fraction

    Regularity status and friction are derived here (per term) with the given
    rolling-window rule; the simulator defines the same rule when emitting.
    """
    students_path, trajectories_path = Path(students_path), Path(trajectories_path)
    shocks_path = Path(shocks_path)

    header, rows = _read_csv(students_path)
    if not header or header[0] != "id":
        raise SchemaError(f"{students_path}: first column must be 'id'", 1)
    feature_cols: list[tuple[int, str, str]] = []  # (column index, level, name)
    exit_cols: dict[str, int] = {}
    for idx, col in enumerate(header[1:], start=1):
        if col in ("exit_status", "exit_term"):
            exit_cols[col] = idx
            continue
        if col.startswith("n1_"):
            feature_cols.append((idx, N1_PRE_ENTRY, col[3:]))
        elif col.startswith("n2_"):
            feature_cols.append((idx, N2_ENTRY, col[3:]))
        else:
            raise SchemaError(f"{students_path}: unexpected column {col!r}", 1)
    for _, level, name in feature_cols:
        if name not in registry:
            raise SchemaError(f"{students_path}: column references unregistered feature {name!r}", 1)
        if registry.get(name).window.level != level:
            raise SchemaError(f"{students_path}: feature {name!r} not registered at {level}", 1)

    profiles: dict[str, tuple[dict, dict, ExitStatus]] = {}
    order: list[str] = []
    for line, row in rows:
        if len(row) != len(header):
            raise SchemaError(f"{students_path}: expected {len(header)} fields, got {len(row)}", line)
        sid = row[0]
        if sid in profiles:
            raise SchemaError(f"{students_path}: duplicate student id {sid!r}", line)
        values_n1: dict[str, object] = {}
        values_n2: dict[str, object] = {}
        for idx, level, name in feature_cols:
            value = _parse_value(row[idx], registry.get(name).kind, line)
            if value is None:
                continue
            (values_n1 if level == N1_PRE_ENTRY else values_n2)[name] = value
        kind = row[exit_cols["exit_status"]] if "exit_status" in exit_cols else "ENROLLED"
        kind = kind or "ENROLLED"
        term_raw = row[exit_cols["exit_term"]] if "exit_term" in exit_cols else ""
        exit_term = int(term_raw) if term_raw else None
        try:
            exit_status = ExitStatus(kind, exit_term)
        except SchemaError as exc:
            raise SchemaError(f"{students_path}: {exc}", line)
        profiles[sid] = (values_n1, values_n2, exit_status)
        order.append(sid)

    header, rows = _read_csv(trajectories_path)
    if header != ["id", "term", "course_id", "outcome", "credits"]:
        raise SchemaError(f"{trajectories_path}: bad header {header}", 1)
    per_student: dict[str, dict[int, list[tuple[str, str, float]]]] = {sid: {} for sid in order}
    for line, row in rows:
        if len(row) != 5:
            raise SchemaError(f"{trajectories_path}: expected 5 fields, got {len(row)}", line)
        sid, term_raw, course, outcome, credits_raw = row
        if sid not in per_student:
            raise SchemaError(f"{trajectories_path}: unknown student id {sid!r}", line)
        try:
            term = int(term_raw)
        except ValueError:
            raise SchemaError(f"{trajectories_path}: bad term {term_raw!r}", line)
        if term < 1:
            raise SchemaError(f"{trajectories_path}: term must be >= 1", line)
        attempts = per_student[sid].setdefault(term, [])
        if course == "":
            continue  # explicit inactive-term marker
        if course not in curriculum.courses:
            raise UnknownCourse(course, line)
        if outcome and outcome not in OUTCOMES:
            raise SchemaError(f"{trajectories_path}: unknown outcome {outcome!r}", line)
        try:
            credits = float(credits_raw) if credits_raw else 0.0
        except ValueError:
            raise SchemaError(f"{trajectories_path}: bad credits {credits_raw!r}", line)
        attempts.append((course, outcome, credits))

    shock_header, shock_rows = _read_csv(shocks_path)
    if shock_header != ["term", "inflation_rate", "strike_fraction"]:
        raise SchemaError(f"{shocks_path}: bad header {shock_header}", 1)
    inflation: dict[int, float] = {}
    strike: dict[int, float] = {}
    for line, row in shock_rows:
        if len(row) != 3:
            raise SchemaError(f"{shocks_path}: expected 3 fields, got {len(row)}", line)
        try:
            term = int(row[0])
            inflation[term] = float(row[1])
            strike[term] = float(row[2])
        except ValueError:
            raise SchemaError(f"{shocks_path}: non-numeric shock row", line)
    shocks = ShockSeries(inflation=inflation, strike=strike)

    records = []
    for sid in order:
        values_n1, values_n2, exit_status = profiles[sid]
        terms = sorted(per_student[sid])
        if terms and terms != list(range(1, terms[-1] + 1)):
            raise NonMonotoneTerms(sid, f"observed terms {terms}")
        passed: set[str] = set()
        regularized: set[str] = set()
        attempted: set[str] = set()
        completions: list[int] = []
        snapshots = []
        for term in terms:
            attempts = per_student[sid][term]
            enrollments = tuple(sorted({c for c, _, _ in attempts}))
            outcomes = {c: o for c, o, _ in attempts if o}
            credits = sum(cr for _, o, cr in attempts if o == "PASSED")
            attempted.update(enrollments)
            for course, outcome in outcomes.items():
                if outcome == "PASSED":
                    passed.add(course)
                    regularized.add(course)
                elif outcome == "REGULARIZED":
                    regularized.add(course)
            completions.append(sum(1 for _, o, _ in attempts if o == "PASSED"))
            friction = friction_from_sets(curriculum, attempted, passed, regularized)
            snapshots.append((term, enrollments, outcomes, credits, friction))
        regular = compute_regularity(completions, regularity_window, regularity_required)
        n3_snaps = tuple(
            TermSnapshot(term=t, enrollments=e, outcomes=o, credits_earned=c,
                         regularity_status=r, friction_index=f)
            for (t, e, o, c, f), r in zip(snapshots, regular)
        )
        record = StudentRecord(id=sid, n1=values_n1, n2=values_n2, n3=n3_snaps,
                               exit=exit_status)
        record.validate(registry)
        records.append(record)

    max_term = max((r.last_term() for r in records), default=0)
    full_registry = FeatureRegistry()
    for desc in registry.declared():
        full_registry.register(desc.name, desc.window, desc.kind)
    _register_derived(full_registry, max_term)
    if max_term:
        try:
            shocks.require(max_term)
        except HorizonMismatch as exc:
            raise SchemaError(f"{shocks_path}: {exc}")
    return Dataset(features=full_registry, records=tuple(records), shocks=shocks,
                   curriculum_ref=curriculum.ref)


def _format_value(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_dataset(dataset: Dataset, out_dir: str | Path) -> dict[str, Path]:
    """Write students/trajectories/shocks CSVs plus the registry JSON.

    Output re-ingests to an identical Dataset (round-trip stability).
    """
    import json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    declared = dataset.features.declared()
    n1_names = sorted(d.name for d in declared if d.window.level == N1_PRE_ENTRY)
    n2_names = sorted(d.name for d in declared if d.window.level == N2_ENTRY)

    students = out_dir / "students.csv"
    with open(students, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"n1_{n}" for n in n1_names] + [f"n2_{n}" for n in n2_names]
                        + ["exit_status", "exit_term"])
        for record in dataset.records:
            row = [record.id]
            row += [_format_value(record.n1.get(n)) for n in n1_names]
            row += [_format_value(record.n2.get(n)) for n in n2_names]
            row += [record.exit.kind, "" if record.exit.term is None else str(record.exit.term)]
            writer.writerow(row)

    trajectories = out_dir / "trajectories.csv"
    with open(trajectories, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "term", "course_id", "outcome", "credits"])
        for record in dataset.records:
            for snap in record.n3:
                if not snap.enrollments:
                    writer.writerow([record.id, snap.term, "", "", ""])
                    continue
                shares = _credit_shares(snap)
                for course in snap.enrollments:
                    outcome = snap.outcomes.get(course, "")
                    writer.writerow([record.id, snap.term, course, outcome,
                                     _format_value(shares.get(course, 0.0))])

    shocks = out_dir / "shocks.csv"
    with open(shocks, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term", "inflation_rate", "strike_fraction"])
        for term in dataset.shocks.terms():
            writer.writerow([term, _format_value(dataset.shocks.inflation[term]),
                             _format_value(dataset.shocks.strike[term])])

    registry = out_dir / "registry.json"
    with open(registry, "w", encoding="utf-8") as fh:
        json.dump(dataset.features.to_json_obj(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"students": students, "trajectories": trajectories, "shocks": shocks,
            "registry": registry}


def _credit_shares(snap: TermSnapshot) -> dict[str, float]:
    """Per-row credit attribution for passed courses.

    The snapshot only stores the term total, so shares are reconstructed. An
    equal split is used when re-summing it reproduces the total bit-exactly
    (floating point); otherwise the whole total rides on the first passed
    course so re-ingestion always recovers the identical credits_earned.
    """
    passed = [c for c in snap.enrollments if snap.outcomes.get(c) == "PASSED"]
    if not passed:
        return {}
    equal = snap.credits_earned / len(passed)
    acc = 0.0
    for _ in passed:
        acc += equal
    if acc == snap.credits_earned:
        return {c: equal for c in passed}
    return {c: (snap.credits_earned if i == 0 else 0.0) for i, c in enumerate(passed)}


def add_feature(dataset: Dataset, name: str, window: ObservationWindow, kind: str,
                values_by_id: Mapping[str, object]) -> Dataset:
    """Return a new Dataset with one extra registered feature column.

    Used for analysis-time derived columns (e.g. a binarized treatment); the
    values land in the matching n1/n2 map or are served via the derived layer.
    """
    registry = FeatureRegistry()
    for desc in dataset.features:
        registry.register(desc.name, desc.window, desc.kind)
    registry.register(name, window, kind)
    records = []
    for record in dataset.records:
        value = values_by_id.get(record.id)
        n1_map, n2_map = dict(record.n1), dict(record.n2)
        if value is not None:
            if window.level == N1_PRE_ENTRY:
                n1_map[name] = value
            elif window.level == N2_ENTRY:
                n2_map[name] = value
            else:
                # stored on the n1 map but registered at its true window; the
                # as-of view resolves it through the registry, so leakage
                # checks still use the declared window.
                n1_map[name] = value
        records.append(StudentRecord(id=record.id, n1=n1_map, n2=n2_map, n3=record.n3,
                                     exit=record.exit))
    return Dataset(features=registry, records=tuple(records), shocks=dataset.shocks,
                   curriculum_ref=dataset.curriculum_ref)
