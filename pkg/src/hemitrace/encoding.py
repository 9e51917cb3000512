"""Voxelwise encoding-model brain scores from BOLD runs and stimulus feature
matrices, plus hemispheric asymmetry indices.

Pipeline per run: discrete-cosine drift removal and per-voxel standardization,
subject averaging, leave-one-out inter-subject reliability for voxel
selection, hemodynamic design construction, nested leave-one-run-out ridge
regression, and left/right region means.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import gamma

DEFAULT_CUTOFF_SECONDS = 128.0
DEFAULT_LAMBDA_GRID = tuple(np.logspace(0.0, 6.0, 10))
ZERO_SD_REL = 1e-12


@dataclass(frozen=True, eq=False)
class BoldRun:
    """One scanning run: scans x voxels, with the repetition time."""

    data: np.ndarray
    tr_seconds: float
    run_index: int
    zero_variance: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ValueError(f"run {self.run_index}: data must be scans x voxels, got ndim={data.ndim}")
        if not np.all(np.isfinite(data)):
            raise ValueError(f"run {self.run_index}: data contains non-finite values")
        if self.tr_seconds <= 0:
            raise ValueError(f"run {self.run_index}: tr_seconds must be positive")
        if self.run_index < 0:
            raise ValueError(f"negative run_index {self.run_index}")
        if self.zero_variance is not None and len(self.zero_variance) != data.shape[1]:
            raise ValueError(f"run {self.run_index}: zero_variance length mismatch")

    @property
    def n_scans(self) -> int:
        return self.data.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Per-voxel left/right/other labels for one anatomical region."""

    name: str
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=object)
        object.__setattr__(self, "labels", labels)
        bad = sorted({str(l) for l in labels} - {"left", "right", "other"})
        if bad:
            raise ValueError(f"mask {self.name!r}: unknown labels {bad}")

    def left_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == "left")

    def right_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == "right")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Event features for one run at one layer of one checkpoint."""

    data: np.ndarray
    onsets: np.ndarray
    layer_index: int
    checkpoint_tokens: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        onsets = np.asarray(self.onsets, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "onsets", onsets)
        if data.ndim != 2:
            raise ValueError(f"feature data must be events x dims, got ndim={data.ndim}")
        if onsets.shape != (data.shape[0],):
            raise ValueError(f"{len(onsets)} onsets for {data.shape[0]} event rows")
        if len(onsets) and (onsets[0] < 0 or np.any(np.diff(onsets) < 0)):
            raise ValueError("onsets must be non-decreasing and non-negative")
        if self.checkpoint_tokens <= 0:
            raise ValueError(f"checkpoint_tokens must be positive, got {self.checkpoint_tokens}")


@dataclass(frozen=True, eq=False)
class BrainScoreMap:
    """Per-voxel best-layer correlation and which layer achieved it."""

    scores: np.ndarray
    layer_of_max: np.ndarray
    checkpoint_tokens: int

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        layer_of_max = np.asarray(self.layer_of_max, dtype=np.int64)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "layer_of_max", layer_of_max)
        if scores.shape != layer_of_max.shape:
            raise ValueError("scores and layer_of_max shapes differ")
        if scores.size and (scores.min() < -1.0 or scores.max() > 1.0):
            raise ValueError("scores outside [-1, 1]")
        if self.checkpoint_tokens <= 0:
            raise ValueError(f"checkpoint_tokens must be positive, got {self.checkpoint_tokens}")


def _drift_basis(n_scans: int, tr: float, cutoff_seconds: float) -> np.ndarray:
    # constant + linear ramp + the DCT cosines whose period exceeds the
    # cutoff; the ramp is included so pure linear trends are removed exactly
    k_max = int(math.floor(2.0 * n_scans * tr / cutoff_seconds))
    t = np.arange(n_scans, dtype=np.float64)
    cols = [np.ones(n_scans), t - t.mean()]
    for k in range(1, k_max + 1):
        cols.append(np.cos(np.pi * k * (2.0 * t + 1.0) / (2.0 * n_scans)))
    return np.column_stack(cols)


def _standardize_columns(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-mean unit-sd columns; zero-variance columns come back as zeros."""
    centered = data - data.mean(axis=0)
    sd = centered.std(axis=0)
    col_scale = np.max(np.abs(centered), axis=0, initial=0.0)
    dead = sd <= ZERO_SD_REL * np.maximum(1.0, col_scale)
    safe_sd = np.where(dead, 1.0, sd)
    out = centered / safe_sd
    out[:, dead] = 0.0
    return out, dead


def preprocess_run(run: BoldRun, cutoff_seconds: float = DEFAULT_CUTOFF_SECONDS) -> BoldRun:
    """High-pass by projecting out slow drifts, then z-score each voxel.

    Drifts with period longer than the cutoff are removed via a discrete
    cosine basis (plus constant and linear terms); voxels left with zero
    variance are set to all zeros and flagged in the result.
    """
    if cutoff_seconds <= 0:
        raise ValueError(f"cutoff_seconds must be positive, got {cutoff_seconds}")
    if run.n_scans < 2:
        raise ValueError(f"run {run.run_index}: need >= 2 scans, got {run.n_scans}")
    basis = _drift_basis(run.n_scans, run.tr_seconds, cutoff_seconds)
    coef, *_ = np.linalg.lstsq(basis, run.data, rcond=None)
    resid = run.data - basis @ coef
    standardized, dead = _standardize_columns(resid)
    return BoldRun(
        data=standardized,
        tr_seconds=run.tr_seconds,
        run_index=run.run_index,
        zero_variance=dead,
    )


def average_subjects(runs: Sequence[BoldRun]) -> BoldRun:
    """Element-wise mean of the same run across subjects."""
    if not runs:
        raise ValueError("no runs to average")
    first = runs[0]
    for run in runs[1:]:
        if run.data.shape != first.data.shape:
            raise ValueError(
                f"run {run.run_index}: shape {run.data.shape} != {first.data.shape}"
            )
        if run.tr_seconds != first.tr_seconds or run.run_index != first.run_index:
            raise ValueError("subject runs disagree on tr_seconds or run_index")
    mean = np.mean(np.stack([run.data for run in runs]), axis=0)
    return BoldRun(data=mean, tr_seconds=first.tr_seconds, run_index=first.run_index)


def _corr_and_flat(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    sa = np.sqrt((ac**2).sum(axis=0))
    sb = np.sqrt((bc**2).sum(axis=0))
    dead = (sa == 0.0) | (sb == 0.0)
    denom = np.where(dead, 1.0, sa * sb)
    r = (ac * bc).sum(axis=0) / denom
    r[dead] = 0.0
    return np.clip(r, -1.0, 1.0), dead


def colwise_corr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-column Pearson correlation; zero-variance operands score 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return _corr_and_flat(a, b)[0]


def _concat_subject(runs: Sequence[BoldRun]) -> np.ndarray:
    ordered = sorted(runs, key=lambda r: r.run_index)
    return np.concatenate([r.data for r in ordered], axis=0)


def isc_reliability(subjects: Sequence[Sequence[BoldRun]]) -> np.ndarray:
    """Leave-one-out inter-subject correlation per voxel.

    Each subject's runs are concatenated in run order and correlated against
    the mean of the other subjects' concatenations; the per-voxel mean over
    subjects is returned. A voxel that is flat in any operand scores 0.
    """
    if len(subjects) < 2:
        raise ValueError(f"need >= 2 subjects, got {len(subjects)}")
    stacks = [_concat_subject(runs) for runs in subjects]
    shape = stacks[0].shape
    for i, stack in enumerate(stacks):
        if stack.shape != shape:
            raise ValueError(f"subject {i}: concatenated shape {stack.shape} != {shape}")
    n = len(stacks)
    corr_sum = np.zeros(shape[1])
    any_flat = np.zeros(shape[1], dtype=bool)
    # the mean of the others is formed directly (not as total minus self)
    # so a voxel that is exactly flat in one subject stays exactly flat in
    # every other subject's comparison operand
    for i in range(n):
        others_mean = np.mean(np.stack([stacks[j] for j in range(n) if j != i]), axis=0)
        r, flat = _corr_and_flat(stacks[i], others_mean)
        corr_sum += r
        any_flat |= flat
    out = corr_sum / n
    out[any_flat] = 0.0
    return out


def top_fraction_mask(reliability: np.ndarray, fraction: float = 0.25) -> np.ndarray:
    """Indices of the ceil(fraction * n) most reliable voxels, sorted.

    Ties go to the lowest voxel index.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    reliability = np.asarray(reliability, dtype=np.float64)
    n = len(reliability)
    m = math.ceil(fraction * n)
    order = np.argsort(-reliability, kind="stable")
    return np.sort(order[:m])


def canonical_hrf(tr: float, duration: float = 32.0) -> np.ndarray:
    """Double-gamma hemodynamic response sampled at the TR, peak scaled to 1.

    Response gamma peaks near 6 s, undershoot near 16 s, with a 6:1
    peak-to-undershoot ratio.
    """
    if tr <= 0:
        raise ValueError(f"tr must be positive, got {tr}")
    t = np.arange(0.0, duration + tr / 2.0, tr)
    h = gamma.pdf(t, a=6.0) - gamma.pdf(t, a=16.0) / 6.0
    peak = h.max()
    return h / peak if peak > 0 else h


def build_design(
    features: FeatureMatrix,
    n_scans: int,
    tr: float,
    hrf: np.ndarray | None = None,
    standardize: bool = True,
) -> np.ndarray:
    """TR-bin the event features, convolve with the HRF, standardize columns.

    Events landing in the same TR bin are vector-summed. standardize=False
    skips the final column z-scoring (useful for inspecting raw regressors).
    """
    if n_scans <= 0:
        raise ValueError(f"n_scans must be positive, got {n_scans}")
    if tr <= 0:
        raise ValueError(f"tr must be positive, got {tr}")
    duration = n_scans * tr
    if len(features.onsets) and features.onsets[-1] >= duration:
        raise ValueError(
            f"event onset {features.onsets[-1]} s at or past run end {duration} s"
        )
    kernel = canonical_hrf(tr) if hrf is None else np.asarray(hrf, dtype=np.float64)
    binned = np.zeros((n_scans, features.data.shape[1]))
    if len(features.onsets):
        bins = np.floor(features.onsets / tr).astype(np.int64)
        np.add.at(binned, bins, features.data)
    design = np.empty_like(binned)
    for j in range(binned.shape[1]):
        design[:, j] = np.convolve(binned[:, j], kernel)[:n_scans]
    if standardize:
        design, _ = _standardize_columns(design)
    return design


def ridge_fit(X: np.ndarray, Y: np.ndarray, lam: float, solver: str = "auto") -> np.ndarray:
    """Ridge weights for min ||XW - Y||^2 + lam ||W||^2.

    The dual (kernel) path solves an n x n system instead of d x d and is
    selected automatically when the feature count exceeds the sample count.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if solver not in ("auto", "primal", "dual"):
        raise ValueError(f"unknown solver {solver!r}")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n, d = X.shape
    if Y.shape[0] != n:
        raise ValueError(f"X has {n} rows but Y has {Y.shape[0]}")
    if solver == "auto":
        solver = "dual" if d > n else "primal"
    if solver == "primal":
        return np.linalg.solve(X.T @ X + lam * np.eye(d), X.T @ Y)
    alpha = np.linalg.solve(X @ X.T + lam * np.eye(n), Y)
    return X.T @ alpha


def _fit_from_grams(gram: np.ndarray, xty: np.ndarray, lam: float) -> np.ndarray:
    d = gram.shape[0]
    return np.linalg.solve(gram + lam * np.eye(d), xty)


def ridge_cv_scores(
    designs: Sequence[np.ndarray],
    bold: Sequence[BoldRun],
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
) -> np.ndarray:
    """Nested leave-one-run-out ridge: per-voxel mean held-out correlation.

    Outer folds hold out one run; the regularization strength is picked per
    outer fold by an inner leave-one-run-out over the training runs, shared
    across voxels (the grid value maximizing the mean held-in correlation,
    first grid entry on ties). The returned score is the mean across outer
    folds of the per-voxel Pearson correlation between predicted and
    measured held-out activity.
    """
    n_runs = len(designs)
    if n_runs < 3:
        raise ValueError(f"need >= 3 runs for nested cross-validation, got {n_runs}")
    if len(bold) != n_runs:
        raise ValueError(f"{n_runs} designs but {len(bold)} BOLD runs")
    lambda_grid = [float(l) for l in lambda_grid]
    if not lambda_grid:
        raise ValueError("empty lambda grid")
    for lam in lambda_grid:
        if lam <= 0:
            raise ValueError(f"lambda must be positive, got {lam}")
    Xs = [np.asarray(X, dtype=np.float64) for X in designs]
    Ys = [run.data for run in bold]
    d = Xs[0].shape[1]
    n_voxels = Ys[0].shape[1]
    for r in range(n_runs):
        if Xs[r].shape[0] != Ys[r].shape[0]:
            raise ValueError(
                f"run {r}: design has {Xs[r].shape[0]} rows, BOLD has {Ys[r].shape[0]}"
            )
        if Xs[r].shape[1] != d:
            raise ValueError(f"run {r}: feature dimension {Xs[r].shape[1]} != {d}")
        if Ys[r].shape[1] != n_voxels:
            raise ValueError(f"run {r}: voxel count {Ys[r].shape[1]} != {n_voxels}")

    # per-run Gram blocks make refitting on any run subset a cheap sum
    grams = [X.T @ X for X in Xs]
    xtys = [X.T @ Y for X, Y in zip(Xs, Ys)]
    scan_counts = [X.shape[0] for X in Xs]

    def fit_subset(train: list[int], lam: float) -> np.ndarray:
        n_train = sum(scan_counts[r] for r in train)
        if d > n_train:
            X = np.concatenate([Xs[r] for r in train], axis=0)
            Y = np.concatenate([Ys[r] for r in train], axis=0)
            return ridge_fit(X, Y, lam, solver="dual")
        gram = sum(grams[r] for r in train)
        xty = sum(xtys[r] for r in train)
        return _fit_from_grams(gram, xty, lam)

    fold_scores = np.zeros((n_runs, n_voxels))
    for test in range(n_runs):
        train = [r for r in range(n_runs) if r != test]
        best_lam = None
        best_score = -np.inf
        for lam in lambda_grid:
            inner_scores = []
            for held in train:
                inner_train = [r for r in train if r != held]
                W = fit_subset(inner_train, lam)
                pred = Xs[held] @ W
                inner_scores.append(float(np.mean(colwise_corr(pred, Ys[held]))))
            mean_score = float(np.mean(inner_scores))
            if mean_score > best_score:
                best_score = mean_score
                best_lam = lam
        W = fit_subset(train, best_lam)
        pred = Xs[test] @ W
        fold_scores[test] = colwise_corr(pred, Ys[test])
    return fold_scores.mean(axis=0)


def best_layer_map(
    per_layer_scores: Mapping[int, np.ndarray], checkpoint_tokens: int
) -> BrainScoreMap:
    """Per-voxel maximum over layers and the (lowest) layer achieving it."""
    if not per_layer_scores:
        raise ValueError("no layers given")
    layer_ids = sorted(per_layer_scores)
    stacked = np.stack(
        [np.asarray(per_layer_scores[layer], dtype=np.float64) for layer in layer_ids]
    )
    if stacked.ndim != 2:
        raise ValueError("per-layer scores must be 1-D per layer")
    best = stacked.max(axis=0)
    arg = stacked.argmax(axis=0)
    layers = np.asarray(layer_ids, dtype=np.int64)[arg]
    return BrainScoreMap(
        scores=np.clip(best, -1.0, 1.0),
        layer_of_max=layers,
        checkpoint_tokens=checkpoint_tokens,
    )


def region_asymmetry(
    score_map: "BrainScoreMap | np.ndarray",
    mask: RegionMask,
    voxel_subset: np.ndarray | None = None,
    sign: str = "left_minus_right",
) -> float:
    """Difference of mean scores between the mask's two hemisphere labels."""
    if sign not in ("left_minus_right", "right_minus_left"):
        raise ValueError(f"unknown sign {sign!r}")
    scores = score_map.scores if isinstance(score_map, BrainScoreMap) else np.asarray(score_map)
    if len(mask.labels) != len(scores):
        raise ValueError(f"mask has {len(mask.labels)} labels for {len(scores)} voxels")
    left = mask.left_indices()
    right = mask.right_indices()
    if voxel_subset is not None:
        subset = np.asarray(voxel_subset, dtype=np.int64)
        left = np.intersect1d(left, subset)
        right = np.intersect1d(right, subset)
    for side, idx in (("left", left), ("right", right)):
        if len(idx) == 0:
            raise ValueError(f"mask {mask.name!r}: no {side} voxels after subsetting")
    diff = float(scores[left].mean() - scores[right].mean())
    return diff if sign == "left_minus_right" else -diff
