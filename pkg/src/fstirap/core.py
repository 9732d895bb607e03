"""
Basis, state and Hamiltonian primitives for a resonant Lambda atom in a cavity.

The atom has two ground levels ``g1``, ``g2`` and an excited level ``e``. The
laser (pump, Rabi frequency ``omega``) drives g1 <-> e and the cavity mode
(Stokes, coupling ``g``) drives e <-> g2 while adding a photon. The resonant
Hamiltonian splits into invariant three-dimensional manifolds

    {(g1, n), (e, n), (g2, n + 1)},   n = 0, 1, 2, ...

and every matrix in this package is written in that order. Units: hbar = 1,
couplings are angular frequencies in rad/s.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .exceptions import BasisMismatchError, DegenerateDarkStateError

NORM_TOL = 1e-9


class Level(str, Enum):
    G1 = "g1"
    E = "e"
    G2 = "g2"


ATOM_LEVELS = (Level.G1.value, Level.E.value, Level.G2.value)


@dataclass(frozen=True)
class BasisLabel:
    """Atomic level together with the photon number of one or more cavities."""

    atom_level: Level
    photon_number: int | tuple[int, ...] = 0

    def __post_init__(self):
        object.__setattr__(self, "atom_level", Level(self.atom_level))
        photons = self.photon_number
        if isinstance(photons, (list, tuple)):
            photons = tuple(int(p) for p in photons)
            object.__setattr__(self, "photon_number", photons)
            counts = photons
        else:
            counts = (int(photons),)
        if any(p < 0 for p in counts):
            raise ValueError(f"photon number must be >= 0, got {self.photon_number}")

    def __str__(self):
        photons = self.photon_number
        if isinstance(photons, tuple):
            return ",".join([self.atom_level.value, *map(str, photons)])
        return f"{self.atom_level.value},{photons}"


def manifold_basis(n: int = 0) -> tuple[BasisLabel, BasisLabel, BasisLabel]:
    """The ordered triple ``(g1, n), (e, n), (g2, n + 1)``."""
    if n < 0:
        raise ValueError(f"manifold index must be >= 0, got {n}")
    return (
        BasisLabel(Level.G1, n),
        BasisLabel(Level.E, n),
        BasisLabel(Level.G2, n + 1),
    )


def label_str(label) -> str:
    if isinstance(label, tuple):
        return ",".join(str(x) for x in label)
    return str(label)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over an ordered, labeled basis.

    ``factors`` is set for tensor-product states: a sequence of
    ``(name, values)`` pairs such that ``basis`` is the row-major product of
    the factor values. It is what :func:`fstirap.protocols.reduced_purity`
    uses to trace out subsystems.
    """

    basis: tuple
    amplitudes: np.ndarray
    factors: tuple | None = field(default=None)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        basis = tuple(self.basis)
        if len(amps) != len(basis):
            raise BasisMismatchError(
                f"{len(amps)} amplitudes for a basis of length {len(basis)}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "basis", basis)
        if self.factors is not None:
            factors = tuple((str(name), tuple(values)) for name, values in self.factors)
            dims = [len(values) for _, values in factors]
            if int(np.prod(dims)) != len(basis):
                raise BasisMismatchError(
                    f"factor dimensions {dims} do not match basis length {len(basis)}")
            object.__setattr__(self, "factors", factors)

    @classmethod
    def from_label(cls, label, basis: Sequence, factors=None) -> "StateVector":
        basis = tuple(basis)
        amps = np.zeros(len(basis), dtype=complex)
        amps[basis.index(label)] = 1.0
        return cls(basis, amps, factors)

    @classmethod
    def product(cls, factors: Iterable, amplitudes: dict) -> "StateVector":
        """Build a tensor-product-basis state from a ``{label tuple: amplitude}`` map."""
        factors = tuple((name, tuple(values)) for name, values in factors)
        basis = product_basis(factors)
        index = {label: i for i, label in enumerate(basis)}
        amps = np.zeros(len(basis), dtype=complex)
        for label, value in amplitudes.items():
            amps[index[tuple(label)]] += value
        return cls(basis, amps, factors)

    @property
    def dims(self) -> tuple[int, ...]:
        if self.factors is None:
            return (len(self.basis),)
        return tuple(len(values) for _, values in self.factors)

    def index(self, label) -> int:
        """Position of ``label``; plain tuples and ``"g1,0"`` strings also match."""
        try:
            return self.basis.index(label)
        except ValueError:
            pass
        key = label_str(label)
        for i, b in enumerate(self.basis):
            if label_str(b) == key:
                return i
        raise BasisMismatchError(f"label {label!r} not in basis")

    def amplitude(self, label) -> complex:
        return complex(self.amplitudes[self.index(label)])

    def population(self, label) -> float:
        return float(abs(self.amplitudes[self.index(label)]) ** 2)

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def as_dict(self) -> dict[str, complex]:
        return {label_str(b): complex(a) for b, a in zip(self.basis, self.amplitudes)}

    def __repr__(self):
        terms = ", ".join(f"{k}: {v:.4g}" for k, v in self.as_dict().items())
        return f"StateVector({terms})"


def product_basis(factors) -> tuple:
    grids = np.meshgrid(*[np.arange(len(v)) for _, v in factors], indexing="ij")
    flat = [g.reshape(-1) for g in grids]
    return tuple(
        tuple(factors[k][1][idx[k]] for k in range(len(factors)))
        for idx in zip(*flat)
    )


@dataclass(frozen=True)
class HamiltonianSpec:
    """Frame, manifold and carrier frequencies of a single-manifold Hamiltonian.

    Only exact resonance is modeled: ``omega_C`` and ``omega_e`` default to
    ``omega_L`` and must equal it when given.
    """

    frame: str = "lab_projected"
    n: int = 0
    phi_L: float = 0.0
    omega_L: float = 0.0
    omega_C: float | None = None
    omega_e: float | None = None

    def __post_init__(self):
        if self.frame not in ("lab_projected", "rotating_effective"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.n < 0:
            raise ValueError(f"manifold index must be >= 0, got {self.n}")
        for name in ("omega_C", "omega_e"):
            value = getattr(self, name)
            if value is None:
                object.__setattr__(self, name, self.omega_L)
            elif value != self.omega_L:
                raise ValueError(
                    f"only exact resonance is supported: {name}={value} != omega_L={self.omega_L}")

    @property
    def basis(self):
        return manifold_basis(self.n)


def _check_couplings(omega, g):
    if omega < 0 or g < 0:
        raise ValueError(f"couplings must be non-negative, got omega={omega}, g={g}")


def build_effective_hamiltonian(omega: float, g: float, phi_L: float = 0.0,
                                stokes_phase: float = 0.0) -> np.ndarray:
    """Rotating-frame 3x3 Hamiltonian over ``(g1,0), (e,0), (g2,1)``.

    Off-diagonal entries are ``omega * exp(i phi_L)`` (g1-e) and ``g`` (e-g2),
    the diagonal is zero. ``stokes_phase`` (0 or pi in practice) carries the
    sign of a standing-wave coupling that was folded out of the envelope.
    """
    _check_couplings(omega, g)
    h = np.zeros((3, 3), dtype=complex)
    pump = omega * cmath.exp(1j * phi_L) if phi_L else complex(omega)
    stokes = g * cmath.exp(1j * stokes_phase) if stokes_phase else complex(g)
    h[0, 1] = pump
    h[1, 0] = pump.conjugate()
    h[1, 2] = stokes
    h[2, 1] = stokes.conjugate()
    return h


def build_projected_hamiltonian(omega: float, g: float, spec: HamiltonianSpec,
                                t: float = 0.0) -> np.ndarray:
    """Lab-frame Hamiltonian restricted to the manifold ``spec.n`` at time ``t``.

    Includes the cavity energy ``omega_C * photons`` on the diagonal, the
    excited-level energy, the carrier phase ``exp(i (omega_L t + phi_L))`` on
    the pump and the ``sqrt(n + 1)`` enhancement of the cavity coupling.
    """
    if spec.frame != "lab_projected":
        raise ValueError("build_projected_hamiltonian needs a lab_projected spec")
    _check_couplings(omega, g)
    n = spec.n
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = spec.omega_C * n
    h[1, 1] = spec.omega_e + spec.omega_C * n
    h[2, 2] = spec.omega_C * (n + 1)
    pump = omega * cmath.exp(1j * (spec.omega_L * t + spec.phi_L))
    h[0, 1] = pump
    h[1, 0] = pump.conjugate()
    h[1, 2] = h[2, 1] = g * math.sqrt(n + 1)
    return h


def rotating_frame_map(state: StateVector, t: float, spec: HamiltonianSpec,
                       direction: str = "to_rotating") -> StateVector:
    """Apply ``R(t)`` (``to_lab``) or ``R(t)^dagger`` (``to_rotating``).

    ``R`` multiplies the ``(e, n)`` and ``(g2, n + 1)`` amplitudes by
    ``exp(-i omega_L t)`` and leaves ``(g1, n)`` untouched.
    """
    if tuple(state.basis) != spec.basis:
        raise BasisMismatchError(
            f"state basis {[str(b) for b in state.basis]} is not manifold {spec.n}")
    if direction == "to_lab":
        phase = cmath.exp(-1j * spec.omega_L * t)
    elif direction == "to_rotating":
        phase = cmath.exp(1j * spec.omega_L * t)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    amps = state.amplitudes.copy()
    amps[1:] *= phase
    return StateVector(state.basis, amps, state.factors)


def dark_state(omega: float, g: float, phi_L: float = 0.0,
               stokes_phase: float = 0.0) -> StateVector:
    """Zero-eigenvalue eigenvector ``(g, 0, -omega exp(-i phi_L)) / sqrt(omega^2 + g^2)``."""
    _check_couplings(omega, g)
    scale = math.hypot(omega, g)
    if scale == 0.0:
        raise DegenerateDarkStateError("dark state undefined when omega = g = 0")
    amps = np.array([
        g * cmath.exp(1j * stokes_phase),
        0.0,
        -omega * cmath.exp(-1j * phi_L),
    ], dtype=complex) / scale
    return StateVector(manifold_basis(0), amps)


def mixing_angle(omega_end: float, g_end: float) -> float:
    """Mixing angle ``atan2(omega_end, g_end)`` in ``[0, pi/2]``."""
    _check_couplings(omega_end, g_end)
    if omega_end == 0 and g_end == 0:
        raise DegenerateDarkStateError("mixing angle undefined when both couplings vanish")
    return math.atan2(omega_end, g_end)
