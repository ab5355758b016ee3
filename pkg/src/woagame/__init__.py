"""Markov-perfect equilibria of war-of-attrition Dynkin games on a line."""

__version__ = "0.1.0"
