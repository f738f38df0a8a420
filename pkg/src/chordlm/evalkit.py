"""Evaluation harness: corpus cross-entropy, dataset-stratified folds,
BCa bootstrap intervals, per-composition predictors, and the stepwise
regression that explains cross-entropy differences.

The evaluation unit throughout is the composition: each composition
contributes one mean cross-entropy per model, the bootstrap resamples
compositions, and the regression fits one row per composition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "EvalRecord",
    "FoldPlan",
    "Predictors",
    "RegressionResult",
    "cross_entropy",
    "make_folds",
    "bootstrap_ci",
    "zeroth_order_distribution",
    "bottom_decile_ids",
    "compute_predictors",
    "stepwise_regression",
    "PREDICTOR_NAMES",
]

PREDICTOR_NAMES = ("n_tokens", "n_types", "improbable", "monophonic", "repetition")


@dataclass(frozen=True)
class Predictors:
    """Per-composition regressors for explaining cross-entropy."""

    n_tokens: int
    n_types: int
    improbable: float
    monophonic: float
    repetition: float

    def __post_init__(self):
        if self.n_types > self.n_tokens:
            raise ValueError("a sequence cannot have more types than tokens")
        for name in ("improbable", "monophonic", "repetition"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class EvalRecord:
    """One composition's mean cross-entropy plus its predictors."""

    composition_id: str
    dataset_id: str
    h_m: float
    predictors: Predictors

    def __post_init__(self):
        if self.h_m < 0:
            raise ValueError("cross-entropy cannot be negative")

    def predictor_vector(self) -> list[float]:
        return [float(getattr(self.predictors, name)) for name in PREDICTOR_NAMES]


def cross_entropy(probabilities) -> float:
    """Mean negative log2 probability per token (bits/token)."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.size == 0:
        raise ValueError("need at least one probability")
    if np.any(p <= 0.0):
        raise ValueError("probabilities must be strictly positive")
    if np.any(p > 1.0):
        raise ValueError("probabilities cannot exceed 1")
    return float(-np.log2(p).mean())


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of composition ids to folds, stratified by dataset."""

    k: int
    assignment: dict[str, int]

    def fold_of(self, composition_id: str) -> int:
        return self.assignment[composition_id]

    def test_set(self, fold: int) -> list[str]:
        return sorted(c for c, f in self.assignment.items() if f == fold)

    def train_set(self, fold: int) -> list[str]:
        return sorted(c for c, f in self.assignment.items() if f != fold)


def make_folds(
    corpus: list[tuple[str, str]],
    k: int = 4,
    seed: int = 0,
    warnings: list[str] | None = None,
) -> FoldPlan:
    """Deterministic stratified fold plan.

    ``corpus`` holds (composition id, dataset id) pairs. Within every
    dataset the compositions are shuffled by the seeded generator and
    dealt round-robin, so per-dataset fold sizes differ by at most one.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    ids = [c for c, _ in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("composition ids must be unique")
    rng = np.random.default_rng(seed)
    by_dataset: dict[str, list[str]] = {}
    for composition_id, dataset_id in corpus:
        by_dataset.setdefault(dataset_id, []).append(composition_id)
    assignment: dict[str, int] = {}
    for dataset_id in sorted(by_dataset):
        members = sorted(by_dataset[dataset_id])
        if len(members) < k and warnings is not None:
            warnings.append(
                f"dataset {dataset_id!r} has {len(members)} compositions "
                f"for {k} folds; assigning round-robin"
            )
        order = rng.permutation(len(members))
        for position, index in enumerate(order):
            assignment[members[index]] = position % k
    return FoldPlan(k=k, assignment=assignment)


# ---------------------------------------------------------------------------
# BCa bootstrap
# ---------------------------------------------------------------------------


def bootstrap_ci(
    values,
    replicates: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Bias-corrected and accelerated bootstrap interval for the mean.

    The bias correction comes from the fraction of replicate means below
    the observed mean, the acceleration from jackknife skewness, and the
    adjusted percentiles are read off the sorted replicate means.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 values")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    if x.min() == x.max():
        v = float(x[0])
        return (v, v)

    rng = np.random.default_rng(seed)
    indices = rng.integers(0, n, size=(replicates, n))
    replicate_means = np.sort(x[indices].mean(axis=1))
    theta_hat = float(x.mean())

    below = int(np.count_nonzero(replicate_means < theta_hat))
    # Keep z0 finite when every replicate lands on one side.
    fraction = below / replicates
    fraction = min(max(fraction, 1.0 / (replicates + 1)), replicates / (replicates + 1.0))
    z0 = float(stats.norm.ppf(fraction))

    jackknife = (x.sum() - x) / (n - 1)
    deviations = jackknife.mean() - jackknife
    denom = float((deviations**2).sum()) ** 1.5
    acceleration = 0.0 if denom == 0.0 else float((deviations**3).sum()) / (6 * denom)

    alpha = (1.0 - level) / 2.0
    endpoints = []
    for z_alpha in (stats.norm.ppf(alpha), stats.norm.ppf(1.0 - alpha)):
        adjusted = stats.norm.cdf(z0 + (z0 + z_alpha) / (1.0 - acceleration * (z0 + z_alpha)))
        rank = int(math.floor(adjusted * (replicates + 1)))
        rank = min(max(rank, 1), replicates)
        endpoints.append(float(replicate_means[rank - 1]))
    return (endpoints[0], endpoints[1])


# ---------------------------------------------------------------------------
# Predictors
# ---------------------------------------------------------------------------


def zeroth_order_distribution(counts) -> np.ndarray:
    """Unigram type probabilities from corpus-wide counts."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        raise ValueError("corpus counts must be positive")
    return c / total


def bottom_decile_ids(probabilities) -> frozenset[int]:
    """Ids of the ceil(10%) of types with the lowest corpus probability.

    Ties are broken by type id, so the cut is deterministic.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    n_bottom = math.ceil(0.10 * p.size)
    order = sorted(range(p.size), key=lambda i: (p[i], i))
    return frozenset(order[:n_bottom])


def compute_predictors(
    tokens,
    bottom_ids: frozenset[int],
    monophonic_ids: frozenset[int],
) -> Predictors:
    """Predictor fields for one encoded composition.

    ``bottom_ids`` must come from the corpus-wide zeroth-order
    distribution, fixed once per experiment.
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("empty token sequence")
    n_tokens = len(tokens)
    n_types = len(set(tokens))
    improbable = sum(1 for t in tokens if t in bottom_ids) / n_tokens
    monophonic = sum(1 for t in tokens if t in monophonic_ids) / n_tokens
    if n_tokens == 1:
        repetition = 0.0
    else:
        repeats = sum(1 for a, b in zip(tokens, tokens[1:]) if a == b)
        repetition = repeats / (n_tokens - 1)
    return Predictors(
        n_tokens=n_tokens,
        n_types=n_types,
        improbable=improbable,
        monophonic=monophonic,
        repetition=repetition,
    )


# ---------------------------------------------------------------------------
# Stepwise regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionStep:
    action: str  # "add" | "remove"
    predictor: str
    r_squared: float


@dataclass(frozen=True)
class RegressionResult:
    """Forward-stepwise selection outcome on standardized variables."""

    steps: tuple[RegressionStep, ...]
    selected: tuple[str, ...]  # retained predictors, in entry order
    betas: dict[str, float]  # standardized betas of the final model
    r_squared_path: tuple[float, ...]  # cumulative R^2 at each retained entry
    criterion: str
    warnings: tuple[str, ...] = ()

    @property
    def r_squared(self) -> float:
        return self.r_squared_path[-1] if self.r_squared_path else 0.0


def _zscore(column: np.ndarray) -> np.ndarray:
    sd = column.std(ddof=1)
    if sd == 0:
        raise ValueError("zero-variance column cannot be standardized")
    return (column - column.mean()) / sd


def _ols_fit(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Least squares with intercept; returns (coefs, p-values, R^2).

    Slope p-values are two-sided t tests; a perfect fit pins them to 0
    for nonzero slopes.
    """
    n = y.size
    design = np.column_stack([np.ones(n), x])
    coefs, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coefs
    residuals = y - fitted
    rss = float(residuals @ residuals)
    tss = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if tss == 0.0 else 1.0 - rss / tss
    dof = n - design.shape[1]
    if dof <= 0:
        raise ValueError("not enough records for the model size")
    # Rounding leaves a perfect fit with rss of order 1e-30; t ratios of
    # that noise are meaningless, so snap it to zero.
    if rss <= 1e-12 * max(tss, 1e-300):
        rss = 0.0
    sigma2 = rss / dof
    xtx_inv = np.linalg.pinv(design.T @ design)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
        t_values = np.where(se > 0, coefs / se, np.inf * np.sign(coefs))
    # A perfect fit zeroes every standard error; slopes that are
    # numerically zero on the standardized scale carry no evidence.
    p_values = np.where(
        se > 0,
        2.0 * stats.t.sf(np.abs(np.where(se > 0, t_values, 0.0)), dof),
        np.where(np.abs(coefs) > 1e-8, 0.0, 1.0),
    )
    return coefs[1:], p_values[1:], r_squared


def stepwise_regression(
    records: list[EvalRecord],
    enter_p: float = 0.05,
    remove_p: float = 0.10,
    predictor_names: tuple[str, ...] = PREDICTOR_NAMES,
) -> RegressionResult:
    """Forward stepwise selection of cross-entropy predictors.

    Variables (outcome included) are z-scored before fitting, so the
    reported betas are standardized. At each step the candidate with the
    smallest entry p-value joins if it clears ``enter_p``; any retained
    predictor whose p-value rises above ``remove_p`` is dropped.
    Candidates perfectly correlated with a retained predictor are
    skipped with a warning.
    """
    if len(records) < 10:
        raise ValueError("need at least 10 records for the regression")
    y = _zscore(np.array([r.h_m for r in records], dtype=np.float64))
    raw = np.array([r.predictor_vector() for r in records], dtype=np.float64)

    columns: dict[str, np.ndarray] = {}
    warnings: list[str] = []
    for j, name in enumerate(predictor_names):
        if raw[:, j].std(ddof=1) == 0:
            warnings.append(f"predictor {name} is constant; excluded")
            continue
        columns[name] = _zscore(raw[:, j])

    selected: list[str] = []
    steps: list[RegressionStep] = []
    r2_path: list[float] = []

    # The enter/remove hysteresis rules out two-step cycles; the cap
    # guards against longer ones on adversarial data.
    for _ in range(4 * len(predictor_names) + 4):
        changed = False
        # Forward step: best-entering candidate below the threshold.
        best_name = None
        best_p = None
        best_r2 = None
        for name in predictor_names:
            if name in selected or name not in columns:
                continue
            collinear = False
            for kept in selected:
                r = float(np.corrcoef(columns[name], columns[kept])[0, 1])
                if abs(r) >= 1.0 - 1e-12:
                    warnings.append(
                        f"predictor {name} is collinear with {kept}; skipped"
                    )
                    collinear = True
                    break
            if collinear:
                continue
            trial = selected + [name]
            x = np.column_stack([columns[c] for c in trial])
            _, p_values, r_squared = _ols_fit(x, y)
            entry_p = float(p_values[-1])
            if entry_p < enter_p and (best_p is None or entry_p < best_p):
                best_name, best_p, best_r2 = name, entry_p, r_squared
        if best_name is not None:
            selected.append(best_name)
            steps.append(RegressionStep("add", best_name, float(best_r2)))
            r2_path.append(float(best_r2))
            changed = True

        # Backward step: drop anything whose p-value decayed.
        while len(selected) > 0:
            x = np.column_stack([columns[c] for c in selected])
            _, p_values, r_squared = _ols_fit(x, y)
            worst_index = int(np.argmax(p_values))
            if float(p_values[worst_index]) <= remove_p:
                break
            dropped = selected.pop(worst_index)
            steps.append(
                RegressionStep(
                    "remove",
                    dropped,
                    float(_ols_fit(np.column_stack([columns[c] for c in selected]), y)[2])
                    if selected
                    else 0.0,
                )
            )
            changed = True

        if not changed:
            break

    betas: dict[str, float] = {}
    if selected:
        x = np.column_stack([columns[c] for c in selected])
        coefs, _, final_r2 = _ols_fit(x, y)
        betas = {name: float(b) for name, b in zip(selected, coefs)}
        # Entry-order R^2 path may be stale after removals; recompute it
        # over the final selection.
        r2_path = []
        for upto in range(1, len(selected) + 1):
            x_part = np.column_stack([columns[c] for c in selected[:upto]])
            r2_path.append(float(_ols_fit(x_part, y)[2]))
        r2_path[-1] = float(final_r2)

    return RegressionResult(
        steps=tuple(steps),
        selected=tuple(selected),
        betas=betas,
        r_squared_path=tuple(r2_path),
        criterion=f"p-enter<{enter_p}, p-remove>{remove_p}",
        warnings=tuple(warnings),
    )
