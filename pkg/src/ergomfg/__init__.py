"""Numerical solvers and verification tools for stationary ergodic mean field
games whose players are confined to a domain by a singular feedback.

Modules
-------
domain
    Interval and radial-disk grids of the truncated set ``{d > eps}``.
asymptotics
    Boundary blow-up profiles and power-law rate fits.
hjb
    Ergodic Hamilton-Jacobi-Bellman solver (Newton on ``(u, lambda)``).
linearized
    Linear transport-diffusion operators and their invariant measures.
fokker_planck
    Stationary Fokker-Planck solver, the adjoint of the transport operator.
mfg
    Damped fixed-point iteration for the coupled system.
particles
    Monte-Carlo simulation of the controlled diffusion.
cli
    Configuration-driven command-line front end.
"""

__version__ = "0.1.0"
