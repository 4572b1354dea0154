import numpy as np
import pytest

from trajlab.errors import (
    DuplicateFeature,
    InvalidWindow,
    LeakageViolation,
    NonMonotoneTerms,
    SchemaError,
    UnknownCourse,
)
from trajlab.temporal import (
    ENROLLED,
    ExitStatus,
    FeatureRegistry,
    ObservationWindow,
    ShockSeries,
    StudentRecord,
    TermSnapshot,
    assert_no_leakage,
    ingest_dataset,
    n1,
    n2,
    n3,
    n4,
    register_feature,
    serialize_dataset,
    view_as_of,
)

from conftest import mk_curriculum


class TestObservationWindow:
    def test_total_order(self):
        assert n1().rank < n2().rank < n3(1).rank < n3(2).rank

    def test_context_ties_with_same_term(self):
        assert n3(2).rank == n4(2).rank
        assert n4(1).rank < n3(2).rank

    def test_term_index_must_be_positive(self):
        with pytest.raises(InvalidWindow):
            n3(0)
        with pytest.raises(InvalidWindow):
            ObservationWindow("N4_CONTEXT", -1)

    def test_n1_n2_take_no_term(self):
        with pytest.raises(InvalidWindow):
            ObservationWindow("N1_PRE_ENTRY", 3)

    def test_parse_round_trip(self):
        for w in (n1(), n2(), n3(4), n4(2)):
            assert ObservationWindow.parse(str(w)) == w


class TestRegistry:
    def test_register(self):
        reg = FeatureRegistry()
        desc = register_feature(reg, "ses_index", n1(), "numeric")
        assert desc.window == n1()
        desc2 = register_feature(reg, "diagnostic_score", n2(), "numeric")
        assert desc2.window == n2()

    def test_duplicate_rejected(self):
        reg = FeatureRegistry()
        register_feature(reg, "ses_index", n1(), "numeric")
        with pytest.raises(DuplicateFeature):
            register_feature(reg, "ses_index", n1(), "numeric")

    def test_registry_json_round_trip(self):
        reg = FeatureRegistry()
        register_feature(reg, "ses_index", n1(), "numeric")
        register_feature(reg, "diagnostic_score", n2(), "numeric")
        assert FeatureRegistry.from_json_obj(reg.to_json_obj()) == reg


class TestLeakageGuard:
    @pytest.fixture
    def registry(self):
        reg = FeatureRegistry()
        register_feature(reg, "ses_index", n1(), "numeric")
        register_feature(reg, "diagnostic_score", n2(), "numeric")
        register_feature(reg, "term3_gpa", n3(3), "numeric")
        register_feature(reg, "inflation_1", n4(1), "numeric")
        return reg

    def test_past_feature_ok(self, registry):
        assert_no_leakage(["ses_index"], n2(), registry)

    def test_future_feature_rejected(self, registry):
        with pytest.raises(LeakageViolation) as exc:
            assert_no_leakage(["term3_gpa"], n2(), registry)
        assert exc.value.violations == [("term3_gpa", "N3:3")]

    def test_context_boundary_is_legal(self, registry):
        assert_no_leakage(["inflation_1"], n3(1), registry)

    def test_all_offenders_listed(self, registry):
        with pytest.raises(LeakageViolation) as exc:
            assert_no_leakage(["term3_gpa", "inflation_1"], n1(), registry)
        assert len(exc.value.violations) == 2


def _write_inputs(tmp_path, students, trajectories, shocks):
    s = tmp_path / "students.csv"
    t = tmp_path / "trajectories.csv"
    k = tmp_path / "shocks.csv"
    s.write_text(students)
    t.write_text(trajectories)
    k.write_text(shocks)
    return s, t, k


STUDENTS = """id,n1_ses_index,n2_diagnostic_score,exit_status,exit_term
s1,0.5,1.2,GRADUATED,2
s2,-0.3,0.1,ENROLLED,
s3,0.0,-1.0,DROPPED,1
s4,0.2,0.4,ENROLLED,
"""

TRAJECTORIES = """id,term,course_id,outcome,credits
s1,1,A,PASSED,6.0
s1,2,B,PASSED,6.0
s2,1,A,FAILED,0.0
s2,2,A,PASSED,6.0
s3,1,A,WITHDRAWN,0.0
s4,1,A,PASSED,6.0
"""

SHOCKS = """term,inflation_rate,strike_fraction
1,0.1,0.0
2,0.2,0.25
"""


@pytest.fixture
def curriculum():
    return mk_curriculum(["A", "B"], [("A", "B")])


@pytest.fixture
def registry():
    reg = FeatureRegistry()
    register_feature(reg, "ses_index", n1(), "numeric")
    register_feature(reg, "diagnostic_score", n2(), "numeric")
    return reg


class TestIngest:
    def test_happy_path(self, tmp_path, curriculum, registry):
        paths = _write_inputs(tmp_path, STUDENTS, TRAJECTORIES, SHOCKS)
        ds = ingest_dataset(curriculum, *paths, registry)
        assert len(ds.records) == 4
        assert ds.records[0].exit == ExitStatus("GRADUATED", 2)
        assert ds.records[0].n3[0].outcomes == {"A": "PASSED"}
        assert ds.records[1].n3[1].credits_earned == 6.0

    def test_unknown_course(self, tmp_path, curriculum, registry):
        bad = TRAJECTORIES + "s2,3,Z9,PASSED,6.0\n"
        paths = _write_inputs(tmp_path, STUDENTS, bad, SHOCKS)
        with pytest.raises(UnknownCourse) as exc:
            ingest_dataset(curriculum, *paths, registry)
        assert exc.value.course_id == "Z9"
        assert exc.value.line == 8

    def test_term_gap_rejected(self, tmp_path, curriculum, registry):
        bad = "id,term,course_id,outcome,credits\ns1,1,A,PASSED,6.0\ns1,3,B,PASSED,6.0\n"
        students = "id,n1_ses_index,n2_diagnostic_score,exit_status,exit_term\ns1,0.5,1.2,ENROLLED,\n"
        paths = _write_inputs(tmp_path, students, bad, SHOCKS)
        with pytest.raises(NonMonotoneTerms):
            ingest_dataset(curriculum, *paths, registry)

    def test_unregistered_column_rejected(self, tmp_path, curriculum, registry):
        students = "id,n1_unknown_thing\ns1,1.0\n"
        paths = _write_inputs(tmp_path, students, "id,term,course_id,outcome,credits\n", SHOCKS)
        with pytest.raises(SchemaError):
            ingest_dataset(curriculum, *paths, registry)

    def test_explicit_inactive_term(self, tmp_path, curriculum, registry):
        students = "id,n1_ses_index,n2_diagnostic_score,exit_status,exit_term\ns1,0.5,1.2,ENROLLED,\n"
        traj = "id,term,course_id,outcome,credits\ns1,1,A,PASSED,6.0\ns1,2,,,\n"
        paths = _write_inputs(tmp_path, students, traj, SHOCKS)
        ds = ingest_dataset(curriculum, *paths, registry)
        assert ds.records[0].n3[1].enrollments == ()

    def test_round_trip_identity(self, tmp_path, curriculum, registry):
        paths = _write_inputs(tmp_path, STUDENTS, TRAJECTORIES, SHOCKS)
        ds1 = ingest_dataset(curriculum, *paths, registry)
        out = serialize_dataset(ds1, tmp_path / "again")
        reg2 = FeatureRegistry.from_json_obj(__import__("json").load(open(out["registry"])))
        ds2 = ingest_dataset(curriculum, out["students"], out["trajectories"],
                             out["shocks"], reg2)
        assert ds1 == ds2


class TestViewAsOf:
    @pytest.fixture
    def dataset(self, tmp_path, curriculum, registry):
        paths = _write_inputs(tmp_path, STUDENTS, TRAJECTORIES, SHOCKS)
        return ingest_dataset(curriculum, *paths, registry)

    def test_entry_point_hides_trajectory(self, dataset):
        m = view_as_of(dataset, n2())
        assert set(m.columns) == {"ses_index", "diagnostic_score"}

    def test_term2_includes_terms_1_and_2(self, dataset):
        m = view_as_of(dataset, n3(2))
        assert "friction_t1" in m.columns and "friction_t2" in m.columns
        assert "inflation_t2" in m.columns
        assert not any(c.endswith("_t3") for c in m.columns)

    def test_pre_entry_on_trajectory_only_features(self, tmp_path, curriculum):
        reg = FeatureRegistry()
        students = "id,exit_status,exit_term\ns1,ENROLLED,\n"
        traj = "id,term,course_id,outcome,credits\ns1,1,A,PASSED,6.0\n"
        paths = _write_inputs(tmp_path, students, traj, SHOCKS)
        ds = ingest_dataset(curriculum, *paths, reg)
        m = view_as_of(ds, n1())
        assert m.columns == []

    def test_monotone_information_growth(self, dataset):
        points = [n1(), n2(), n3(1), n3(2)]
        previous: set[str] = set()
        for p in points:
            cols = set(view_as_of(dataset, p).columns)
            assert previous <= cols
            previous = cols

    def test_post_exit_cells_freeze_and_censored_cells_stay_missing(self, dataset):
        m = view_as_of(dataset, n3(2))
        # s3 dropped at term 1: by term 2 its totals are knowable and frozen
        idx3 = m.ids.index("s3")
        assert m.column("credits_t2")[idx3] == 0.0
        assert m.column("cum_credits_t2")[idx3] == 0.0
        # s4 is still enrolled with only term 1 observed: term 2 is unknowable
        idx4 = m.ids.index("s4")
        assert m.column("credits_t2")[idx4] is None
        arr = m.to_array(["credits_t2"])
        assert np.isnan(arr[idx4, 0])

    def test_leakage_guard_agrees_with_view(self, dataset):
        for point in (n1(), n2(), n3(1), n3(2)):
            visible = set(view_as_of(dataset, point).columns)
            for name in dataset.features.names():
                window = dataset.features.get(name).window
                if name in visible:
                    assert_no_leakage([name], point, dataset.features)
                else:
                    with pytest.raises(LeakageViolation):
                        assert_no_leakage([name], point, dataset.features)


class TestInvariantValidation:
    def test_snapshot_after_exit_rejected(self):
        snaps = (TermSnapshot(1, ("A",), {"A": "PASSED"}, 6.0, True, 0.0),
                 TermSnapshot(2, (), {}, 0.0, True, 0.0))
        rec = StudentRecord("s1", {}, {}, snaps, ExitStatus("DROPPED", 1))
        with pytest.raises(SchemaError):
            rec.validate(FeatureRegistry())

    def test_outcome_before_enrollment_rejected(self):
        snaps = (TermSnapshot(1, (), {"A": "PASSED"}, 6.0, True, 0.0),)
        rec = StudentRecord("s1", {}, {}, snaps, ENROLLED)
        with pytest.raises(SchemaError):
            rec.validate(FeatureRegistry())

    def test_shock_bounds(self):
        with pytest.raises(SchemaError):
            ShockSeries(inflation={1: 0.1}, strike={1: 1.5})
        with pytest.raises(SchemaError):
            ShockSeries(inflation={1: -2.0}, strike={1: 0.0})
