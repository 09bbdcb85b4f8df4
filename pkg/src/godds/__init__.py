"""Geometric-mean odds ratio under outcome-dependent sampling.

Library layout:

- ``dgp``          synthetic populations, sampling-scheme tilts, data draws
- ``oracle``       exact (high-precision) estimands and efficiency bounds
- ``aggregation``  arithmetic/geometric aggregation and collapsibility checks
- ``nuisance``     cross-fit nuisance regressions, clipping, perturbations
- ``estimator``    one-step cell estimates and the odds-ratio curve
- ``inference``    pseudo-outcomes, endpoint and identified-set intervals
- ``harness``      seeded Monte Carlo studies (coverage / rate / efficiency)
- ``cli``          the ``godds`` command-line entry point

Hot numeric kernels live in ``_kernels`` and run under numba when available;
set ``GODDS_BACKEND=numpy`` to force the pure-numpy fallback.
"""

__version__ = "0.1.0"
