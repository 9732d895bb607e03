"""Fractional and complete adiabatic passage of Lambda atoms through cavity and laser fields."""

__version__ = "0.1.0"

from .core import (BasisLabel, HamiltonianSpec, Level, StateVector, build_effective_hamiltonian,
                   build_projected_hamiltonian, dark_state, manifold_basis, mixing_angle,
                   rotating_frame_map)
from .exceptions import (BasisMismatchError, ClassificationError, ConfigError,
                         DegenerateDarkStateError, FstirapError, IntegrationError,
                         SequencingError)
from .fields import (FieldGeometry, GaussianEnvelope, PulsePair, classify_sequence,
                     hermite_gauss_coupling, pulses_atom1, pulses_atom2, reference_geometry)
from .propagator import (AdiabaticityReport, PulseHamiltonian, Trajectory, adiabaticity_check,
                         initial_state, instantaneous_eigen_diagnostics, propagate,
                         reference_propagate)
from .protocols import (ProtocolResult, atom_atom_protocol, atom_photon_protocol, concurrence,
                        optical_path_phase, photon_photon_protocol, reduced_purity)
from .scan import ScanGrid, locate_operating_points, scan
