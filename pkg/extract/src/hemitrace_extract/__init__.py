"""Model-side extraction: log-prob dumps, activation matrices, generation
sweeps, and acceptability trajectories, written in the analysis toolkit's
file formats."""

__version__ = "0.1.0"
