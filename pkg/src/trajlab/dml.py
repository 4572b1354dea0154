"""Cross-fitted treatment-effect estimation for the partially linear model.

The estimator separates nuisance estimation from effect estimation: ridge
regressions of outcome-on-controls and treatment-on-controls are fitted on
out-of-fold data, and the treatment coefficient comes from regressing the
outcome residual on the treatment residual. Cross-fitting keeps each row's
nuisance prediction independent of that row; fold membership is a stable
hash of the student id, so row order never matters.

A single-equation `naive_regression` ships as the biased comparator for
confounded designs, and `group_cate` runs the cross-fitted estimator
independently per group (per archetype, stratum, ...).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    InsufficientData,
    SingularSystem,
    ZeroTreatmentVariation,
)
from .temporal import Dataset, ObservationWindow, assert_no_leakage, view_as_of


@dataclass(frozen=True)
class LearnerParams:
    """Ridge nuisance learner: optionally expand controls with fixed
    polynomial/interaction terms ("name^2", "a*b")."""

    ridge_lambda: float = 1e-3
    intercept: bool = True
    expansions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be >= 0")


@dataclass(frozen=True)
class DmlSpec:
    outcome: str
    treatment: str
    controls: tuple[str, ...]
    decision_point: ObservationWindow
    folds: int = 5
    learner: LearnerParams = field(default_factory=LearnerParams)
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.outcome == self.treatment:
            raise ConfigError("outcome and treatment must differ")
        if self.outcome in self.controls or self.treatment in self.controls:
            raise ConfigError("outcome/treatment cannot appear among controls")


@dataclass(frozen=True)
class DmlEstimate:
    theta: float
    std_error: float
    ci95: tuple[float, float]
    n_used: int
    fold_thetas: tuple[float, ...]

    @classmethod
    def from_theta_se(cls, theta, se, n_used, fold_thetas=()):
        return cls(theta=float(theta), std_error=float(se),
                   ci95=(float(theta - 1.96 * se), float(theta + 1.96 * se)),
                   n_used=int(n_used), fold_thetas=tuple(float(f) for f in fold_thetas))


@dataclass(frozen=True)
class GroupEffects:
    group_by: str
    effects: dict[str, DmlEstimate]
    min_group_size: int
    omitted: tuple[tuple[str, int], ...]  # (group, complete-case n) below threshold


@dataclass(frozen=True)
class LinearPredictor:
    coef: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef + self.intercept


def fit_ridge(X: np.ndarray, y: np.ndarray, params: LearnerParams) -> LinearPredictor:
    """Solve (X'X + lambda*I) beta = X'y with an unpenalized intercept."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if params.intercept:
        Z = np.hstack([np.ones((n, 1)), X])
        penalty = np.diag([0.0] + [1.0] * p)
    else:
        Z = X
        penalty = np.eye(p)
    gram = Z.T @ Z + params.ridge_lambda * penalty
    if params.ridge_lambda == 0.0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SingularSystem("rank-deficient system with lambda = 0")
    try:
        beta = np.linalg.solve(gram, Z.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc))
    if params.intercept:
        return LinearPredictor(coef=beta[1:], intercept=float(beta[0]))
    return LinearPredictor(coef=beta, intercept=0.0)


def _parse_expansions(expansions: tuple[str, ...], control_names: list[str]):
    """Each term is either 'name^2' or 'a*b' over control names."""
    ops = []
    for term in expansions:
        if "^2" in term:
            name = term.replace("^2", "").strip()
            if name not in control_names:
                raise ConfigError(f"expansion {term!r}: unknown control {name!r}")
            i = control_names.index(name)
            ops.append((i, i))
        elif "*" in term:
            a, _, b = term.partition("*")
            a, b = a.strip(), b.strip()
            for name in (a, b):
                if name not in control_names:
                    raise ConfigError(f"expansion {term!r}: unknown control {name!r}")
            ops.append((control_names.index(a), control_names.index(b)))
        else:
            raise ConfigError(f"cannot parse expansion term {term!r}")
    return ops


def expand_controls(X: np.ndarray, expansions: tuple[str, ...],
                    control_names: list[str]) -> np.ndarray:
    ops = _parse_expansions(expansions, control_names)
    if not ops:
        return X
    extras = [X[:, i] * X[:, j] for i, j in ops]
    return np.hstack([X] + [e[:, None] for e in extras])


def fold_assignments(ids: list[str], n_folds: int, seed: int) -> np.ndarray:
    """Stable per-id fold membership; independent of row order."""
    out = np.empty(len(ids), dtype=int)
    for i, sid in enumerate(ids):
        digest = hashlib.sha256(f"{seed}:{sid}".encode("utf-8")).hexdigest()
        out[i] = int(digest[:8], 16) % n_folds
    return out


def crossfit_arrays(y: np.ndarray, t: np.ndarray, X: np.ndarray, ids: list[str],
                    n_folds: int, params: LearnerParams, seed: int) -> DmlEstimate:
    """Core cross-fitted partialling-out estimator on plain arrays.

    Rows are sorted by id first so estimates are invariant to input order.
    """
    order = np.argsort(np.array(ids, dtype=object))
    ids = [ids[i] for i in order]
    y, t, X = y[order], t[order], X[order]
    n = len(y)
    if n < 10 * n_folds:
        raise InsufficientData(f"need at least {10 * n_folds} complete rows, have {n}")
    folds = fold_assignments(ids, n_folds, seed)
    y_res = np.empty(n)
    t_res = np.empty(n)
    fold_thetas = []
    for k in range(n_folds):
        test = folds == k
        train = ~test
        if not test.any() or not train.any():
            raise InsufficientData(f"fold {k} is empty under the seeded id hash")
        g_hat = fit_ridge(X[train], y[train], params)
        m_hat = fit_ridge(X[train], t[train], params)
        y_res[test] = y[test] - g_hat.predict(X[test])
        t_res[test] = t[test] - m_hat.predict(X[test])
    denom = float(t_res @ t_res)
    scale = max(1.0, float(t @ t))
    if denom <= 1e-12 * scale:
        raise ZeroTreatmentVariation("treatment residual variation is numerically zero")
    theta = float(t_res @ y_res) / denom
    for k in range(n_folds):
        test = folds == k
        d = float(t_res[test] @ t_res[test])
        fold_thetas.append(float(t_res[test] @ y_res[test]) / d if d > 0 else float("nan"))
    psi = t_res * (y_res - theta * t_res)
    var = float(psi @ psi) / n / (denom / n) ** 2 / n
    return DmlEstimate.from_theta_se(theta, np.sqrt(var), n, fold_thetas)


def _design_matrix(dataset: Dataset, spec: DmlSpec):
    """Complete-case (y, t, X, ids) for the spec's features.

    The leakage gate covers the model inputs (treatment and controls); the
    outcome is by nature observed after the decision point.
    """
    assert_no_leakage([spec.treatment, *spec.controls], spec.decision_point,
                      dataset.features)
    names = [spec.outcome, spec.treatment, *spec.controls]
    ranks = [dataset.features.get(n).window for n in names]
    widest = max(ranks, key=lambda w: w.rank)
    matrix = view_as_of(dataset, widest)
    arr = matrix.to_array(names)
    keep = ~np.isnan(arr).any(axis=1)
    ids = [sid for sid, ok in zip(matrix.ids, keep) if ok]
    arr = arr[keep]
    return arr[:, 0], arr[:, 1], arr[:, 2:], ids


def crossfit_dml(dataset: Dataset, spec: DmlSpec) -> DmlEstimate:
    """Cross-fitted effect of spec.treatment on spec.outcome."""
    y, t, X, ids = _design_matrix(dataset, spec)
    X = expand_controls(X, spec.learner.expansions, list(spec.controls))
    return crossfit_arrays(y, t, X, ids, spec.folds, spec.learner, spec.seed)


def naive_arrays(y: np.ndarray, t: np.ndarray, X: np.ndarray,
                 params: LearnerParams) -> DmlEstimate:
    """Single ridge regression of y on (t, X); reports t's coefficient with a
    homoskedastic sandwich standard error."""
    n = len(y)
    Z = np.hstack([t[:, None], X])
    predictor = fit_ridge(Z, y, params)
    theta = float(predictor.coef[0])
    resid = y - predictor.predict(Z)
    p_eff = Z.shape[1] + (1 if params.intercept else 0)
    dof = max(n - p_eff, 1)
    sigma2 = float(resid @ resid) / dof
    if params.intercept:
        D = np.hstack([np.ones((n, 1)), Z])
        penalty = np.diag([0.0] + [1.0] * Z.shape[1])
        t_idx = 1
    else:
        D = Z
        penalty = np.eye(Z.shape[1])
        t_idx = 0
    gram = D.T @ D + params.ridge_lambda * penalty
    inv = np.linalg.inv(gram)
    cov = sigma2 * (inv @ (D.T @ D) @ inv)
    se = float(np.sqrt(cov[t_idx, t_idx]))
    return DmlEstimate.from_theta_se(theta, se, n)


def naive_regression(dataset: Dataset, spec: DmlSpec) -> DmlEstimate:
    """Biased comparator: one regression, no cross-fitting, no partialling."""
    y, t, X, ids = _design_matrix(dataset, spec)
    X = expand_controls(X, spec.learner.expansions, list(spec.controls))
    order = np.argsort(np.array(ids, dtype=object))
    return naive_arrays(y[order], t[order], X[order], spec.learner)


def group_cate(dataset: Dataset, spec: DmlSpec, groups: dict[str, str],
               min_group_size: int, group_by: str = "group") -> GroupEffects:
    """Cross-fitted effect per group, fold-split within group.

    Groups must cover every complete-case row; groups below min_group_size
    are omitted and listed in the result.
    """
    y, t, X, ids = _design_matrix(dataset, spec)
    X = expand_controls(X, spec.learner.expansions, list(spec.controls))
    uncovered = [sid for sid in ids if sid not in groups]
    if uncovered:
        raise ConfigError(f"groups do not cover complete-case rows: {uncovered[:5]}"
                          f"{'...' if len(uncovered) > 5 else ''}")
    effects: dict[str, DmlEstimate] = {}
    omitted: list[tuple[str, int]] = []
    for group in sorted(set(groups[sid] for sid in ids)):
        mask = np.array([groups[sid] == group for sid in ids])
        size = int(mask.sum())
        if size < min_group_size:
            omitted.append((group, size))
            continue
        sub_ids = [sid for sid, m in zip(ids, mask) if m]
        effects[group] = crossfit_arrays(y[mask], t[mask], X[mask], sub_ids,
                                         spec.folds, spec.learner, spec.seed)
    return GroupEffects(group_by=group_by, effects=effects,
                        min_group_size=min_group_size, omitted=tuple(omitted))
