"""Integrable geodesic flows with polynomial-in-momenta integrals and the
hydrodynamic-type system that describes them."""

from .fields import FieldError, Grid2D, ScalarField1D, ScalarField2D, partial, partial1d
from .momenta import (HamiltonianForm, MomentaPolynomial, NonRealFactorization, RootStructure, evaluate,
                      poisson_bracket, root_structure, transform_from_semigeodesic, transform_to_semigeodesic)
from .systems import RazSystem, RazTerm, bracket_equivalence, build_raz, raz_residual, render_system
from .riemann import (DegenerateBranchPoints, HydroSnapshot, RiemannData, branch_points,
                      invariants_and_velocities, riemann_from_state, state_from_invariants)
from .evolution import EvolutionConfig, evolve_diagonal, evolve_uno
from .bridge import (metric_chebyshev, metric_semigeodesic, reciprocal_forward, reconstruct_from_solution,
                     x1_potential, hj_residual_chebyshev, hj_residual_semigeodesic)
from .geodesics import PhaseState, drift, hamilton_rhs, integrate_geodesic

__version__ = "0.1.0"
