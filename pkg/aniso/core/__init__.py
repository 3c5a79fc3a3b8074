"""Numerical core: potentials, oracles, prox mappings, splitting and distributed training."""
