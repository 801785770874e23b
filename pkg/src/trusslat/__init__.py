"""Graph-parameterized truss metamaterials: generation, homogenization,
latent-space modeling and inverse design."""

__version__ = "0.1.0"

from .graph import (  # noqa: F401
    TrussGraph,
    UnitCell,
    ValidityReport,
    make_graph,
    radius_for_density,
    reflect_to_cell,
    repair,
    resolve_intersections,
    superpose,
    validate,
)
from .seeds import elementary_seeds  # noqa: F401
