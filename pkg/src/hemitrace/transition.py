"""Sigmoid fits to training trajectories, display alignment of curves, and
distances between transitions in the (x0, beta) plane.

x is always log10(tokens seen); beta values are slopes in that base.
"""

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

DEGENERATE_RANGE_REL = 1e-6
BETA_STARTS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
X0_START_QUANTILES = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class Trajectory:
    """A scalar measure tracked across training checkpoints."""

    points: tuple[tuple[int, float], ...]
    label: str

    def __post_init__(self):
        if len(self.points) < 4:
            raise ValueError(
                f"trajectory {self.label!r}: need >= 4 points, got {len(self.points)}"
            )
        prev = 0
        for tokens, _ in self.points:
            if tokens <= prev:
                raise ValueError(
                    f"trajectory {self.label!r}: tokens_seen must be strictly "
                    f"increasing positive integers"
                )
            prev = tokens

    def tokens(self) -> np.ndarray:
        return np.array([t for t, _ in self.points], dtype=np.int64)

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=np.float64)

    def log_tokens(self) -> np.ndarray:
        return np.log10(self.tokens().astype(np.float64))


@dataclass(frozen=True)
class SigmoidFit:
    """Parameters of y = y_min + (y_max - y_min) / (1 + exp(-beta (x - x0)))."""

    y_min: float
    y_max: float
    x0: float
    beta: float
    mse: float
    degenerate: bool
    label: str = ""

    def __post_init__(self):
        if self.degenerate:
            return
        if self.y_max < self.y_min:
            raise ValueError(f"fit {self.label!r}: y_max {self.y_max} < y_min {self.y_min}")
        if not self.beta > 0:
            raise ValueError(f"fit {self.label!r}: beta must be positive, got {self.beta}")
        if not math.isfinite(self.x0):
            raise ValueError(f"fit {self.label!r}: non-finite x0")
        if self.mse < 0:
            raise ValueError(f"fit {self.label!r}: negative mse")


def sigmoid_curve(x: np.ndarray, y_min: float, y_max: float, x0: float, beta: float) -> np.ndarray:
    return y_min + (y_max - y_min) * expit(beta * (np.asarray(x, dtype=np.float64) - x0))


def _nm(objective, start, maxiter):
    res = minimize(
        objective,
        np.asarray(start, dtype=np.float64),
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 1e-10, "fatol": 1e-14},
    )
    # restart once from the converged point; a fresh simplex recovers from
    # collapse and tightens the optimum cheaply
    res2 = minimize(
        objective,
        res.x,
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 1e-10, "fatol": 1e-14},
    )
    return res2 if res2.fun < res.fun else res


def fit_sigmoid(t: Trajectory) -> SigmoidFit:
    """Least-squares sigmoid fit in x = log10(tokens).

    Multi-start Nelder-Mead: x0 seeded at the 25/50/75% quantiles of the
    observed x values crossed with beta in {0.5, 1, 2, 4, 8, 16}; the start
    with the lowest converged MSE wins (ties keep the earliest start). Values
    are standardized internally so affine rescaling of the trajectory leaves
    x0 and beta untouched. A flat trajectory (relative range < 1e-6) is
    flagged degenerate with x0 and beta as NaN rather than force-fitted.
    """
    if len(t.points) < 4:
        raise ValueError(f"trajectory {t.label!r}: need >= 4 points")
    x = t.log_tokens()
    y = t.values()
    y_lo = float(y.min())
    y_hi = float(y.max())
    span = y_hi - y_lo
    if span < DEGENERATE_RANGE_REL * max(1.0, abs(y_hi)):
        resid = y - y.mean()
        return SigmoidFit(
            y_min=y_lo,
            y_max=y_hi,
            x0=math.nan,
            beta=math.nan,
            mse=float(np.mean(resid**2)),
            degenerate=True,
            label=t.label,
        )

    # standardized target in [0, 1]; parameters map back affinely afterwards
    ys = (y - y_lo) / span

    def objective(params: np.ndarray) -> float:
        b_lo, log_sp, x0, log_beta = params
        pred = b_lo + math.exp(log_sp) * expit(math.exp(log_beta) * (x - x0))
        return float(np.mean((pred - ys) ** 2))

    x0_starts = [float(np.quantile(x, q)) for q in X0_START_QUANTILES]
    best = None
    for x0_start in x0_starts:
        for beta_start in BETA_STARTS:
            res = _nm(objective, [0.0, 0.0, x0_start, math.log(beta_start)], maxiter=4000)
            if best is None or res.fun < best.fun:
                best = res
    b_lo, log_sp, x0, log_beta = best.x
    sp = math.exp(log_sp)
    return SigmoidFit(
        y_min=y_lo + span * float(b_lo),
        y_max=y_lo + span * float(b_lo + sp),
        x0=float(x0),
        beta=float(math.exp(log_beta)),
        mse=float(best.fun) * span**2,
        degenerate=False,
        label=t.label,
    )


def align_curve(curve: Trajectory, reference: Trajectory, fit_offset: bool = True) -> Trajectory:
    """Affine y-transform of `curve` that best matches `reference` in the
    least-absolute-deviations sense (display-only).

    Curves on different token grids are compared after linear interpolation
    of the curve onto the reference's x = log10(tokens) points inside the
    overlap; the returned trajectory keeps the curve's own grid with a*y + b
    applied. Set fit_offset=False to pin b = 0 (pure rescaling).
    """
    xc = curve.log_tokens()
    yc = curve.values()
    xr = reference.log_tokens()
    yr = reference.values()
    lo = max(xc[0], xr[0])
    hi = min(xc[-1], xr[-1])
    if lo > hi:
        raise ValueError(
            f"curves {curve.label!r} and {reference.label!r} have disjoint x ranges"
        )
    keep = (xr >= lo) & (xr <= hi)
    grid = xr[keep]
    rg = yr[keep]
    cg = np.interp(grid, xc, yc)

    if fit_offset:
        design = np.column_stack([cg, np.ones_like(cg)])
    else:
        design = cg[:, None]
    start, *_ = np.linalg.lstsq(design, rg, rcond=None)

    def objective(params: np.ndarray) -> float:
        return float(np.mean(np.abs(design @ params - rg)))

    res = _nm(objective, start, maxiter=2000)
    if fit_offset:
        a, b = (float(v) for v in res.x)
    else:
        a, b = float(res.x[0]), 0.0
    points = tuple((tok, a * val + b) for tok, val in curve.points)
    return Trajectory(points=points, label=curve.label)


def transition_distance(a: SigmoidFit, b: SigmoidFit) -> float:
    """Euclidean distance between two fits in the (x0, beta) plane."""
    for fit in (a, b):
        if fit.degenerate:
            raise ValueError(f"fit {fit.label!r}: no transition (degenerate fit)")
    return math.hypot(a.x0 - b.x0, a.beta - b.beta)


def load_trajectories(path: "str | Path") -> list[Trajectory]:
    """Read a CSV of tokens,value,label rows into per-label trajectories.

    Lines starting with # are ignored; labels keep first-appearance order.
    """
    grouped: dict[str, list[tuple[int, float]]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [line for line in fh if not line.lstrip().startswith("#")]
    reader = csv.reader(io.StringIO("".join(rows)))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["tokens", "value", "label"]:
        raise ValueError(f"{path}: expected header 'tokens,value,label', got {header}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"{path}: row {lineno}: expected 3 fields, got {len(row)}")
        tokens_str, value_str, label = row
        try:
            tokens = int(tokens_str)
            value = float(value_str)
        except ValueError as err:
            raise ValueError(f"{path}: row {lineno}: {err}") from err
        if label not in grouped:
            grouped[label] = []
            order.append(label)
        grouped[label].append((tokens, value))
    return [Trajectory(points=tuple(grouped[label]), label=label) for label in order]


def trajectories_to_csv(trajectories: Sequence[Trajectory], comments: Sequence[str] = ()) -> str:
    """Serialize trajectories as tokens,value,label CSV with optional # lines."""
    buf = io.StringIO()
    for comment in comments:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tokens", "value", "label"])
    for traj in trajectories:
        for tokens, value in traj.points:
            writer.writerow([tokens, repr(float(value)), traj.label])
    return buf.getvalue()


def pairwise_distances(fits: Sequence[SigmoidFit]) -> list[tuple[str, str, float]]:
    """All unordered pairs of non-degenerate fits with their plane distances."""
    usable = [f for f in fits if not f.degenerate]
    out = []
    for i, fa in enumerate(usable):
        for fb in usable[i + 1 :]:
            out.append((fa.label, fb.label, transition_distance(fa, fb)))
    return out
