# waveguide/__init__.py
"""
Weakly bound states in heterogeneous Dirichlet waveguides
- Perturbative energy to third order in the density heterogeneity
- Variational bound, exactly solvable slab, finite-difference oracle
"""

__version__ = "1.0.0"
