"""Algorithm-selection workbench for Euclidean TSP.

Pipeline pieces: instance generation (six point-placement families), a
TSPLIB-subset reader/writer, density-map rasterization with label-safe
augmentation, a deterministic heuristic portfolio, the penalized-runtime
benchmarking protocol, selection metrics, and a small float64 CNN that
learns to pick a solver per instance.
"""

__version__ = "0.1.0"

FORMATS = {"run-table-csv": 1, "checkpoint": 1, "manifest": 1}
