"""Synthetic multi-subject BOLD data with a planted linear response and a
controllable left/right amplitude difference, for end-to-end verification of
the encoding pipeline against known ground truth.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoding import BoldRun, FeatureMatrix, RegionMask, build_design


@dataclass(frozen=True)
class SynthSpec:
    """Sizes, amplitudes, and seed for one synthetic dataset."""

    n_subjects: int
    n_runs: int
    n_scans: int
    n_voxels: int
    n_features: int
    snr_left: float
    snr_right: float
    noise_sd: float
    seed: int
    tr_seconds: float = 2.0

    def __post_init__(self):
        for name in ("n_subjects", "n_runs", "n_scans", "n_voxels", "n_features"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_voxels % 2 != 0:
            raise ValueError(f"n_voxels must be even, got {self.n_voxels}")
        if self.snr_left < 0 or self.snr_right < 0:
            raise ValueError("snr amplitudes must be nonnegative")
        if self.noise_sd <= 0:
            raise ValueError(f"noise_sd must be positive, got {self.noise_sd}")
        if self.tr_seconds <= 0:
            raise ValueError(f"tr_seconds must be positive, got {self.tr_seconds}")


@dataclass(frozen=True)
class PlantedAsymmetry:
    """What was planted, for comparing against recovered asymmetry."""

    snr_left: float
    snr_right: float
    noise_sd: float
    seed: int

    @property
    def sign(self) -> str:
        if self.snr_left > self.snr_right:
            return "left"
        if self.snr_right > self.snr_left:
            return "right"
        return "none"


@dataclass(frozen=True, eq=False)
class SynthDataset:
    """bold[subject][run] plus the shared per-run features and ground truth.

    signal[run] is the noiseless scans x voxels response every subject
    shares; subjects differ only in their additive Gaussian noise.
    """

    bold: tuple[tuple[BoldRun, ...], ...]
    features: tuple[FeatureMatrix, ...]
    mask: RegionMask
    planted: PlantedAsymmetry
    signal: tuple[np.ndarray, ...]


def make_synthetic(spec: SynthSpec, checkpoint_tokens: int = 1) -> SynthDataset:
    """Generate a dataset with a per-voxel linear response of side-dependent
    amplitude plus independent per-subject noise.

    One seed stream draws everything subjects share (event onsets, features,
    response weights); each subject gets an independently spawned stream for
    noise, so datasets are reproducible and subjects are exchangeable. Event
    counts are Poisson with mean one event per scan, onsets uniform over the
    run. The planted signal is the standardized design times shared weights,
    rescaled to unit variance per voxel and multiplied by the side amplitude.
    """
    seq = np.random.SeedSequence(spec.seed)
    children = seq.spawn(1 + spec.n_subjects)
    common = np.random.default_rng(children[0])
    noise_rngs = [np.random.default_rng(child) for child in children[1:]]

    half = spec.n_voxels // 2
    amplitude = np.concatenate(
        [np.full(half, spec.snr_left), np.full(half, spec.snr_right)]
    )
    weights = common.standard_normal((spec.n_features, spec.n_voxels))
    duration = spec.n_scans * spec.tr_seconds

    features = []
    signals = []
    for run in range(spec.n_runs):
        n_events = max(1, int(common.poisson(spec.n_scans)))
        onsets = np.sort(common.uniform(0.0, duration, n_events))
        data = common.standard_normal((n_events, spec.n_features))
        fm = FeatureMatrix(
            data=data, onsets=onsets, layer_index=0, checkpoint_tokens=checkpoint_tokens
        )
        features.append(fm)
        design = build_design(fm, spec.n_scans, spec.tr_seconds)
        raw = design @ weights
        sd = raw.std(axis=0)
        sd = np.where(sd == 0.0, 1.0, sd)
        signals.append((raw - raw.mean(axis=0)) / sd * amplitude)

    bold = []
    for rng in noise_rngs:
        runs = []
        for run in range(spec.n_runs):
            noise = spec.noise_sd * rng.standard_normal((spec.n_scans, spec.n_voxels))
            runs.append(
                BoldRun(
                    data=signals[run] + noise,
                    tr_seconds=spec.tr_seconds,
                    run_index=run,
                )
            )
        bold.append(tuple(runs))

    labels = np.array(["left"] * half + ["right"] * half, dtype=object)
    return SynthDataset(
        bold=tuple(bold),
        features=tuple(features),
        mask=RegionMask(name="synthetic", labels=labels),
        planted=PlantedAsymmetry(
            snr_left=spec.snr_left,
            snr_right=spec.snr_right,
            noise_sd=spec.noise_sd,
            seed=spec.seed,
        ),
        signal=tuple(signals),
    )
