"""
ocs_arc package initializer

Online conformal selection with irrevocable selections: conformal
p-values, online BH thresholding, baselines and a Monte Carlo runner.

Keep this module lightweight; the runtime lives in
`ocs_arc.selection_runtime` and the runner in `ocs_arc.experiment`.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
