"""Numerical laboratory for orbit counting of projective Anosov representations into PSO(p, q)."""
