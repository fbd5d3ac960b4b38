"""Quasiclassical cavity-QED simulator for single-atom radial feedback cooling.

Subpackages by pipeline stage: params and jc (driven Jaynes-Cummings
steady states), maps (radial field tables), dynamics and trajectory
(stochastic atom motion), detection and estimators (shot noise and the
rho/rho_dot estimation chain), controllers (bang-bang switching
policies), calibrate (noise and heating anchors), experiment (Monte
Carlo campaigns and figures of merit), cli (command-line entry).
"""

__version__ = "0.1.0"
