"""
paraspec package

Paradifferential and microlocal diagnostics for hyperbolic maps and flows
on the torus: Littlewood-Paley analysis, unstable bundles, wavefront tests,
threshold margins and transfer-operator resonances.
"""

__version__ = "1.0.0"
__author__ = "Paraspec Maintainers"
