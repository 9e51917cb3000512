"""Benchmark generation, log-probability scoring, voxelwise brain scores and
hemispheric asymmetry, and sigmoid-based phase-transition analysis."""

__version__ = "0.1.0"
