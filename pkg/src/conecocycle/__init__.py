"""Cone-contraction tools for random expanding dynamics.

Spectral discretization of weighted transfer operators of uniformly expanding
maps, Hilbert-metric contraction certificates, equivariant densities along
random environments, linear response and Bowen-type dimension estimates.
"""

__version__ = "0.1.0"
