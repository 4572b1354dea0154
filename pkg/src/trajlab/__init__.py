"""trajlab: a laboratory for student-trajectory analytics and policy simulation.

Submodules:
    temporal    multi-level longitudinal store with observation-window guards
    curriculum  prerequisite DAG metrics and exact completion scheduling
    archetypes  trajectory feature extraction and archetype clustering
    dml         cross-fitted partially linear treatment-effect estimation
    sim         agent-based cohort simulator
    policy      factorial intervention experiments and effect decomposition
    cli         reproducible command-line surface over all of the above
"""

__version__ = "0.1.0"
