"""Numerical checks for longitude functions on spheres, Harnack-type
oscillation decay on weighted graphs, harmonic maps into spheres and
curvature estimates for minimal graphs.

Submodules are imported on demand: ``sphere``, ``graphs``, ``elliptic``,
``harmonic``, ``kernels``, ``minimal``, ``audits``, ``experiments``,
``plotting`` and ``cli``.
"""

__version__ = "0.1.0"
