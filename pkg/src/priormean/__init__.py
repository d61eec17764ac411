"""Bayesian optimisation with pluggable GP prior mean functions."""
