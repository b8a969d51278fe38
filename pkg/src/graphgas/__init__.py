"""graphgas: quantum-graph spectra, two-particle contact models, and
Bose gas thermodynamics on wires (units hbar = 2 m_e = 1)."""

__version__ = "0.1.0"

from .errors import DimensionError, GraphGasError, SolverError, ValidationError
from .graphs import (
    BoundaryConditions,
    Custom,
    Delta,
    Dirichlet,
    Kirchhoff,
    MetricGraph,
    Robin,
    assemble_conditions,
    scale_graph,
    total_length,
)
from .spectra import (
    Eigenroot,
    SpectrumResult,
    negative_spectrum,
    scan_spectrum,
    scattering_matrix,
    secular_value,
    weyl_fit,
    zero_mode_multiplicity,
)
from .bethe import (
    BetheRoot,
    GraphZSpec,
    assemble_Z,
    gaudin_residual,
    ring_residual,
    solve_gaudin,
    solve_graph_pair,
    solve_lieb_liniger_ring,
)
from .oracle import DomainSpec, OracleResult, build_operator, eigen_lowest, extrapolate, pencil_spectrum
from .thermo import (
    SurfaceModelSpec,
    SweepResult,
    ThermoState,
    discrete_path_laplacian,
    fermi_free_energy,
    ground_state_limit,
    pair_condensation,
    solve_mu,
    surface_model,
    sweep_thermo,
)

__all__ = [name for name in dir() if not name.startswith("_")]
