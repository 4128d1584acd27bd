"""Constructive ReLU-network approximation of Kolmogorov PDE solutions.

Subpackages:
  nets      network calculus (compose, identities, averages, products)
  sde       additive-noise Euler schemes, Feynman-Kac Monte Carlo, L^p norms
  bounds    closed-form constants, error and size bounds, budget planner
  build     assembly of the space-time solution network
  problems  benchmark problems with exact solutions
  cli       batch experiment driver
"""

__version__ = "0.1.0"
