"""Capillarity isoperimetric functionals, reductions and ABP constructions in the half-space."""
