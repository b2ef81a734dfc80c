"""splatkit: 3D Gaussian splatting reconstruction for sparse multi-camera rigs.

Pipeline: COLMAP ingestion -> differentiable splat optimization -> floater
pruning -> novel-view rendering, plus a synthetic camera-rig benchmark.
"""

__version__ = "0.1.0"
