"""Desk-scale laboratory for exterior (channel) energies of radial waves
linearized around the critical ground state."""

__version__ = "0.1.0"

from .grid import FieldPair, RadialGrid, h_inner, h_norm_sq, quadrature
from .groundstate import (bubble_value, energy, lambda_w_value,
                          potential_value, w_value)
from .resonances import (KernelBasis, ResonanceFamily, build_kernel_basis,
                         build_resonance_family, small_r_exponent)
from .evolution import (EvolutionConfig, Trajectory, dalembert_solution,
                        evolve, evolve_nonlinear, exact_resonance_solution,
                        support_radius)
from .channels import (ChannelReport, SubspaceBasis, channel_limits,
                       exterior_energy, kll_basis, project_complement,
                       radiation_profile, verify_lower_bound, z_basis)
from .lorentz import (Boost, BoostState, boost_energy_momentum,
                      boost_linear_in_time, boost_point,
                      h_norm_of_boosted_W, traveling_wave_value)
from .modulation import ModulationPoint, delta_w, minimize_delta_w

__all__ = [
    "FieldPair", "RadialGrid", "h_inner", "h_norm_sq", "quadrature",
    "bubble_value", "energy", "lambda_w_value", "potential_value", "w_value",
    "KernelBasis", "ResonanceFamily", "build_kernel_basis",
    "build_resonance_family", "small_r_exponent",
    "EvolutionConfig", "Trajectory", "dalembert_solution", "evolve",
    "evolve_nonlinear", "exact_resonance_solution", "support_radius",
    "ChannelReport", "SubspaceBasis", "channel_limits", "exterior_energy",
    "kll_basis", "project_complement", "radiation_profile",
    "verify_lower_bound", "z_basis",
    "Boost", "BoostState", "boost_energy_momentum", "boost_linear_in_time",
    "boost_point", "h_norm_of_boosted_W", "traveling_wave_value",
    "ModulationPoint", "delta_w", "minimize_delta_w",
]
