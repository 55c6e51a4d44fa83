"""dgmsim: parametric data-generating mechanisms from real datasets.

Builds DGMs by screening a dataset database with declarative eligibility
criteria, inferring parameter values from the selected datasets, crossing
them with researcher-specified grids, and running deterministic Monte Carlo
replication studies over the resulting generators.
"""

__version__ = "0.1.0"

from . import core, engine, families, inference, selection, stats

__all__ = ["core", "selection", "inference", "families", "stats", "engine"]
