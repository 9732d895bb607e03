"""
Sequential entanglement protocols built from single-atom propagations.

Every stage moves one atom through one cavity mode and one laser beam, which
only couples the manifold ``{(g1,0), (e,0), (g2,1)}`` of that atom-cavity
pair. The other branches of the joint state are stationary, so the joint
state is assembled branch by branch. Phases are tracked in the rotating
frame; the carrier factor ``exp(-i (omega_L t + phi_L))`` that multiplies
photon-carrying amplitudes in the lab frame is only reported symbolically.
"""

from __future__ import annotations

import cmath
import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ATOM_LEVELS, NORM_TOL, StateVector, label_str
from .exceptions import BasisMismatchError, ClassificationError, SequencingError
from .fields import (FieldGeometry, PulsePair, SequenceClass, classify_sequence,
                     pulses_atom1, pulses_atom2)
from .io import atomic_write_json
from .propagator import PulseHamiltonian, initial_state, propagate

LAB_PHASE = "exp(-i*(omega_L*t + phi_L))"
EXCITED_FLAG = 0.01


@dataclass(eq=False)
class ProtocolResult:
    """Outcome of one protocol run.

    ``factorization_purity`` is the purity of the subsystem that should end up
    in a product state with the rest: the cavity for atom-atom, the atom for
    photon-photon. For atom-photon it is the atom's purity, 0.5 for a
    maximally entangled pair.
    """

    protocol: str
    final_state: StateVector
    branch_amplitudes: dict
    concurrence: float
    residual_excitation: float
    factorization_purity: float
    mixing_angle: float | None
    state_mixing_angle: float
    relative_phase: float
    alpha: float = 0.0
    target_fidelity: float | None = None
    sequence: list = field(default_factory=list)
    lab_phase: str = LAB_PHASE
    warnings: list = field(default_factory=list)

    @property
    def populations(self) -> dict[str, float]:
        pops = self.final_state.populations()
        return {label_str(b): float(p) for b, p in zip(self.final_state.basis, pops)}

    def to_dict(self) -> dict:
        """JSON-ready document. Complex numbers are ``{"re": .., "im": ..}``."""
        def cplx(z):
            return {"re": float(z.real), "im": float(z.imag)}

        return {
            "protocol": self.protocol,
            "factors": [[name, list(values)] for name, values in self.final_state.factors],
            "amplitudes": {k: cplx(v) for k, v in self.final_state.as_dict().items()},
            "populations": self.populations,
            "branch_amplitudes": {k: cplx(v) for k, v in self.branch_amplitudes.items()},
            "concurrence": self.concurrence,
            "residual_excitation": self.residual_excitation,
            "factorization_purity": self.factorization_purity,
            "mixing_angle": self.mixing_angle,
            "state_mixing_angle": self.state_mixing_angle,
            "relative_phase": self.relative_phase,
            "alpha": self.alpha,
            "target_fidelity": self.target_fidelity,
            "sequence": [s.to_dict() if s is not None else None for s in self.sequence],
            "lab_phase": self.lab_phase,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(type(obj))


def write_protocol_json(result: ProtocolResult, path):
    return atomic_write_json(path, json.loads(result.to_json()))


def concurrence(state) -> float:
    """Pure-state two-qubit concurrence ``2 |a d - b c|``.

    ``state`` is a :class:`StateVector` with two two-dimensional factors or
    any length-4 amplitude sequence ordered ``(00, 01, 10, 11)``.
    """
    if isinstance(state, StateVector):
        if state.dims != (2, 2):
            raise BasisMismatchError(f"concurrence needs a 2x2 bipartition, got {state.dims}")
        amps = state.amplitudes
    else:
        amps = np.asarray(state, dtype=complex).reshape(-1)
        if amps.size != 4:
            raise BasisMismatchError(f"concurrence needs 4 amplitudes, got {amps.size}")
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm {norm!r})")
    a, b, c, d = amps
    return float(min(1.0, 2.0 * abs(a * d - b * c)))


def reduced_purity(state: StateVector, subsystem) -> float:
    """``Tr(rho_sub^2)`` for the named factor(s) of a pure product-basis state."""
    if state.factors is None:
        raise BasisMismatchError("state has no declared tensor factors")
    names = [name for name, _ in state.factors]
    wanted = [subsystem] if isinstance(subsystem, str) else list(subsystem)
    missing = [w for w in wanted if w not in names]
    if missing or len(set(wanted)) != len(wanted):
        raise BasisMismatchError(f"unknown or repeated subsystem {wanted} for factors {names}")
    keep = [names.index(w) for w in wanted]
    rest = [i for i in range(len(names)) if i not in keep]
    psi = np.transpose(state.tensor(), keep + rest)
    d_keep = int(np.prod([state.dims[i] for i in keep]))
    m = psi.reshape(d_keep, -1)
    rho = m @ m.conj().T
    return float(np.real(np.vdot(rho, rho)))


def qubit_pair(state: StateVector, keep: dict[str, tuple], fixed: dict[str, object]):
    """Project onto ``fixed`` values and two-level slices of two factors.

    Returns the normalized 4-amplitude vector and the projected weight.
    """
    names = [name for name, _ in state.factors]
    values = dict(state.factors)
    t = state.tensor()
    index = []
    for name in names:
        if name in fixed:
            index.append(values[name].index(fixed[name]))
        elif name in keep:
            index.append([values[name].index(v) for v in keep[name]])
        else:
            raise BasisMismatchError(f"factor {name!r} neither kept nor fixed")
    kept = [n for n in names if n in keep]
    sub = t[np.ix_(*[np.atleast_1d(i) for i in index])].reshape(
        [len(keep[n]) for n in kept])
    sub = sub.reshape(-1)
    weight = float(np.vdot(sub, sub).real)
    if weight == 0:
        return sub, 0.0
    return sub / math.sqrt(weight), weight


def _propagate_manifold(pulses: PulsePair, amps, rel_tol, abs_tol, n_samples=2,
                        phi_L=None) -> np.ndarray:
    """Evolve manifold amplitudes ``(g1,0), (e,0), (g2,1)`` through one pulse pair."""
    amps = np.asarray(amps, dtype=complex)
    weight = np.linalg.norm(amps)
    if weight == 0:
        return amps
    start = initial_state("g1")
    start = StateVector(start.basis, amps / weight)
    traj = propagate(PulseHamiltonian(pulses, phi_L), start, pulses.support,
                     rel_tol=rel_tol, abs_tol=abs_tol, n_samples=n_samples)
    return traj.amplitudes[-1] * weight


def _classify(pulses: PulsePair, warns: list) -> SequenceClass | None:
    try:
        seq = classify_sequence(pulses)
    except ClassificationError as exc:
        warns.append(f"sequence not classified: {exc}")
        return None
    if seq.process == "incomplete":
        warns.append("pulse sequence does not end in a stable ratio (incomplete)")
    return seq


def _relative_phase(first: complex, second: complex) -> float:
    if first == 0 or second == 0:
        return float("nan")
    return cmath.phase(second / first)


def atom_photon_protocol(geom: FieldGeometry, *, rel_tol: float = 1e-10,
                         abs_tol: float = 1e-12) -> ProtocolResult:
    """Fractional adiabatic passage of one atom through a cavity then a laser.

    Starts in ``|g1,0>`` and ends close to
    ``cos(theta)|g1,0> - exp(-i phi_L) sin(theta)|g2,1>``, where ``theta`` is
    the mixing angle of the realized pulse endings.
    """
    pulses = pulses_atom1(geom)
    warns: list[str] = []
    seq = _classify(pulses, warns)
    c_g1, c_e, c_g2 = _propagate_manifold(pulses, [1, 0, 0], rel_tol, abs_tol)

    factors = (("atom", ATOM_LEVELS), ("cavity", (0, 1)))
    state = StateVector.product(factors, {("g1", 0): c_g1, ("e", 0): c_e, ("g2", 1): c_g2})
    pair, _ = qubit_pair(state, {"atom": ("g1", "g2"), "cavity": (0, 1)}, {})
    conc = concurrence(pair) if np.any(pair) else 0.0
    residual = abs(c_e) ** 2
    if residual > EXCITED_FLAG:
        warns.append(f"excited population {residual:.3g} left after the interaction")

    fidelity = None
    if seq is not None:
        th = seq.mixing_angle
        target = np.array([math.cos(th), 0, -cmath.exp(-1j * geom.phi_L) * math.sin(th)])
        fidelity = float(abs(np.vdot(target, [c_g1, c_e, c_g2])) ** 2)
    return ProtocolResult(
        protocol="atom-photon",
        final_state=state,
        branch_amplitudes={"g1,0": complex(c_g1), "g2,1": complex(c_g2)},
        concurrence=conc,
        residual_excitation=float(residual),
        factorization_purity=reduced_purity(state, "atom"),
        mixing_angle=None if seq is None else seq.mixing_angle,
        state_mixing_angle=math.atan2(abs(c_g2), abs(c_g1)),
        relative_phase=_relative_phase(c_g1, c_g2),
        target_fidelity=fidelity,
        sequence=[seq],
        warnings=warns,
    )


def check_disjoint(first: PulsePair, second: PulsePair):
    if second.support[0] <= first.support[1]:
        raise SequencingError(
            f"pulse supports overlap: first ends at {first.support[1]:.4g} s, "
            f"second starts at {second.support[0]:.4g} s; increase the arrival delay tau")


def atom_atom_protocol(geom1: FieldGeometry, geom2: FieldGeometry, *,
                       rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> ProtocolResult:
    """Entangle two atoms through a shared cavity mode.

    Atom 1 performs fractional passage (cavity then laser). Atom 2 starts in
    ``g2``, arrives ``geom2.tau`` later on the ``z = 0`` line and meets the
    laser before the cavity. If the cavity holds a photon, atom 2 is
    transferred ``|g2,1> -> |g1,0>``; without a photon it is untouched. The
    cavity ends in vacuum and factorizes from the atoms.
    """
    stage1 = atom_photon_protocol(geom1, rel_tol=rel_tol, abs_tol=abs_tol)
    p1 = pulses_atom1(geom1)
    p2 = pulses_atom2(geom2)
    check_disjoint(p1, p2)
    warns = list(stage1.warnings)
    seq2 = _classify(p2, warns)

    s1 = stage1.final_state
    a = s1.amplitude(("g1", 0))
    e = s1.amplitude(("e", 0))
    b = s1.amplitude(("g2", 1))
    # only the photon-carrying branch couples atom 2
    x, y, z = _propagate_manifold(p2, [0, 0, b], rel_tol, abs_tol)

    factors = (("atom2", ATOM_LEVELS), ("atom1", ATOM_LEVELS), ("cavity", (0, 1)))
    state = StateVector.product(factors, {
        ("g2", "g1", 0): a,
        ("g2", "e", 0): e,
        ("g1", "g2", 0): x,
        ("e", "g2", 0): y,
        ("g2", "g2", 1): z,
    })
    pair, _ = qubit_pair(state, {"atom2": ("g1", "g2"), "atom1": ("g1", "g2")},
                         {"cavity": 0})
    pops = state.populations()
    excited = sum(p for lbl, p in zip(state.basis, pops) if "e" in lbl[:2])
    photon = sum(p for lbl, p in zip(state.basis, pops) if lbl[2] == 1)
    return ProtocolResult(
        protocol="atom-atom",
        final_state=state,
        branch_amplitudes={"g2(2),g1(1)": complex(a), "g1(2),g2(1)": complex(x)},
        concurrence=concurrence(pair) if np.any(pair) else 0.0,
        residual_excitation=float(excited + photon),
        factorization_purity=reduced_purity(state, "cavity"),
        mixing_angle=stage1.mixing_angle,
        state_mixing_angle=math.atan2(abs(x), abs(a)),
        relative_phase=_relative_phase(a, x),
        target_fidelity=None,
        sequence=stage1.sequence + [seq2],
        warnings=warns,
    )


def optical_path_phase(x0: float, z0: float, wavelength: float) -> float:
    """Laser phase ``2 pi sqrt(x0^2 + z0^2) / wavelength`` wrapped to ``(-pi, pi]``."""
    alpha = 2 * math.pi * math.hypot(x0, z0) / wavelength
    return math.remainder(alpha, 2 * math.pi)


def photon_photon_protocol(geom1: FieldGeometry, geom2: FieldGeometry, *,
                           rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> ProtocolResult:
    """Entangle two cavities with one atom.

    The atom first performs fractional passage with cavity 1 (``geom1``),
    then complete passage ``|g1,0> -> |g2,1>`` with cavity 2 (``geom2``,
    cavity first). The atom crosses the center of cavity 2 at
    ``geom2.x0 / geom2.v + geom2.tau``. The second laser
    interaction carries the extra phase ``alpha`` from the optical path
    between the cavities, ``geom2.x0`` being their separation and
    ``geom1.z0`` the atom's offset from the first cavity axis. The atom ends
    in ``g2`` and the cavities in
    ``cos(theta)|1_2 0_1> + exp(i alpha) sin(theta)|0_2 1_1>``.
    """
    stage1 = atom_photon_protocol(geom1, rel_tol=rel_tol, abs_tol=abs_tol)
    p1 = pulses_atom1(geom1)
    p2 = pulses_atom1(geom2).shifted(geom2.x0 / geom2.v)
    check_disjoint(p1, p2)
    alpha = optical_path_phase(geom2.x0, geom1.z0, geom1.wavelength)
    phi2 = geom1.phi_L + alpha
    warns = list(stage1.warnings)
    seq2 = _classify(p2, warns)

    s1 = stage1.final_state
    a = s1.amplitude(("g1", 0))
    e = s1.amplitude(("e", 0))
    b = s1.amplitude(("g2", 1))
    # cavity 1 empty: atom and cavity 2 evolve; cavity 1 holding a photon: atom in g2, inert
    p, q, r = _propagate_manifold(p2, [a, e, 0], rel_tol, abs_tol, phi_L=phi2)

    factors = (("atom", ATOM_LEVELS), ("cavity2", (0, 1)), ("cavity1", (0, 1)))
    state = StateVector.product(factors, {
        ("g1", 0, 0): p,
        ("e", 0, 0): q,
        ("g2", 1, 0): r,
        ("g2", 0, 1): b,
    })
    pair, _ = qubit_pair(state, {"cavity2": (0, 1), "cavity1": (0, 1)}, {"atom": "g2"})
    excited = abs(q) ** 2
    if excited > EXCITED_FLAG:
        warns.append(f"excited population {excited:.3g} left after the interaction")
    return ProtocolResult(
        protocol="photon-photon",
        final_state=state,
        branch_amplitudes={"1(2),0(1)": complex(r), "0(2),1(1)": complex(b)},
        concurrence=concurrence(pair) if np.any(pair) else 0.0,
        residual_excitation=float(excited),
        factorization_purity=reduced_purity(state, "atom"),
        mixing_angle=stage1.mixing_angle,
        state_mixing_angle=math.atan2(abs(b), abs(r)),
        relative_phase=_relative_phase(r, b),
        alpha=alpha,
        sequence=stage1.sequence + [seq2],
        warnings=warns,
    )


def stage_hamiltonian(pulses: PulsePair, factors, atom: str, cavity: str, phi_L=None):
    """Full-space Hamiltonian of one atom-cavity stage on a product basis.

    The pump drives ``g1 <-> e`` of ``atom``; the cavity term drives
    ``(e, n) <-> (g2, n + 1)`` of ``atom``/``cavity`` with ``sqrt(n + 1)``
    within the retained photon numbers. Every other factor is a spectator.
    Used to check the branch-wise composition against direct propagation.
    """
    factors = tuple((name, tuple(values)) for name, values in factors)
    names = [n for n, _ in factors]
    dims = [len(v) for _, v in factors]
    values = dict(factors)
    ia, ic = names.index(atom), names.index(cavity)
    levels = values[atom]
    photons = values[cavity]
    dim = int(np.prod(dims))
    pump_pairs, stokes_pairs = [], []
    for flat in range(dim):
        idx = list(np.unravel_index(flat, dims))
        if levels[idx[ia]] == "g1":
            up = idx.copy()
            up[ia] = levels.index("e")
            pump_pairs.append((np.ravel_multi_index(up, dims), flat))
        if levels[idx[ia]] == "e" and photons[idx[ic]] + 1 in photons:
            n = photons[idx[ic]]
            dn = idx.copy()
            dn[ia] = levels.index("g2")
            dn[ic] = photons.index(n + 1)
            stokes_pairs.append((flat, np.ravel_multi_index(dn, dims), math.sqrt(n + 1)))
    phase = cmath.exp(1j * (pulses.phi_L if phi_L is None else phi_L))
    s_phase = cmath.exp(1j * pulses.stokes_phase)

    def hamiltonian(t):
        om, g = pulses.pump(t), pulses.stokes(t)
        h = np.zeros((dim, dim), dtype=complex)
        for i_e, i_g in pump_pairs:
            # <g1|H|e> = omega exp(i phi)
            h[i_g, i_e] = om * phase
            h[i_e, i_g] = om * phase.conjugate()
        for i_e, i_g2, amp in stokes_pairs:
            h[i_e, i_g2] = g * amp * s_phase
            h[i_g2, i_e] = g * amp * s_phase.conjugate()
        return h

    return hamiltonian


def direct_stage(state: StateVector, pulses: PulsePair, atom: str, cavity: str,
                 phi_L=None, **kw) -> StateVector:
    """Propagate a whole product-basis state through one stage without branching."""
    ham = stage_hamiltonian(pulses, state.factors, atom, cavity, phi_L)
    traj = propagate(ham, state, pulses.support, n_samples=2, **kw)
    return traj.final


def with_warnings(result: ProtocolResult) -> ProtocolResult:
    for msg in result.warnings:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return result
