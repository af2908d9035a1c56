"""Whitney-form discretization of the Hodge-Dirac operator on flat tori."""

from .dirac import assemble_dirac, parity_grading, perturbed_operator, potential_catalog
from .fractional import SlobodetskijQuadrature, slobodetskij, slobodetskij_matrix
from .hodge import harmonic_basis, hodge_decompose, weak_codifferential
from .mesh import Lattice, MeshError, PeriodicMesh, build_torus_mesh
from .mollify import Mollifier, SmoothedProjector, build_projector
from .norms import broken_h1_jump, domain_seminorm
from .spectra import (
    convergence_study,
    generalized_symmetric_eig,
    infsup_constant,
    match_spectrum,
    torus_dirac_oracle,
)
from .whitney import Cochain, DeRhamComplex, GradedCochain, assemble_complex

__version__ = "0.1.0"

__all__ = [
    "Cochain",
    "DeRhamComplex",
    "GradedCochain",
    "Lattice",
    "MeshError",
    "Mollifier",
    "PeriodicMesh",
    "SlobodetskijQuadrature",
    "SmoothedProjector",
    "assemble_complex",
    "assemble_dirac",
    "broken_h1_jump",
    "build_projector",
    "build_torus_mesh",
    "convergence_study",
    "domain_seminorm",
    "generalized_symmetric_eig",
    "harmonic_basis",
    "hodge_decompose",
    "infsup_constant",
    "match_spectrum",
    "parity_grading",
    "perturbed_operator",
    "potential_catalog",
    "slobodetskij",
    "slobodetskij_matrix",
    "torus_dirac_oracle",
    "weak_codifferential",
]
