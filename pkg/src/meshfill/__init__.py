"""Local low-poly mesh editing workbench.

Core pieces: tri/quad mesh substrate, fill-in-the-middle serialization of
face sequences, target-region sampling, gated reference conditioning math,
pluggable patch generators, multi-view defect detection, iterative repair
with a quality gate, and the evaluation-metric family.
"""

__version__ = "0.1.0"
