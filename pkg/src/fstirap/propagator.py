"""
Time propagation of the Schroedinger equation ``i d/dt psi = H(t) psi``.

``propagate`` is the production path (adaptive Dormand-Prince 8(5,3) with
local error control). ``reference_propagate`` is an independent brute-force
check: piecewise-constant midpoint Hamiltonians, each exponentiated exactly
through its eigendecomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import (NORM_TOL, StateVector, build_effective_hamiltonian, dark_state,
                   label_str, manifold_basis)
from .exceptions import DegenerateDarkStateError, IntegrationError
from .fields import FieldGeometry, PulsePair
from .io import atomic_write_text, fmt


class PulseHamiltonian:
    """Effective rotating-frame Hamiltonian ``H(t)`` generated by a pulse pair.

    Calling with a scalar time returns a 3x3 matrix; ``batch`` evaluates an
    array of times at once as an ``(N, 3, 3)`` stack.
    """

    def __init__(self, pulses: PulsePair, phi_L: float | None = None):
        self.pulses = pulses
        self.phi_L = pulses.phi_L if phi_L is None else phi_L
        self._pump_phase = np.exp(1j * self.phi_L)
        self._stokes_phase = np.exp(1j * pulses.stokes_phase)

    def couplings(self, t):
        return self.pulses.pump(t), self.pulses.stokes(t)

    def __call__(self, t: float) -> np.ndarray:
        om, g = self.couplings(t)
        return build_effective_hamiltonian(om, g, self.phi_L, self.pulses.stokes_phase)

    def batch(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        om, g = self.couplings(t)
        h = np.zeros(t.shape + (3, 3), dtype=complex)
        h[..., 0, 1] = om * self._pump_phase
        h[..., 1, 0] = om * self._pump_phase.conjugate()
        h[..., 1, 2] = g * self._stokes_phase
        h[..., 2, 1] = g * self._stokes_phase.conjugate()
        return h


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled solution of one propagation."""

    times: np.ndarray
    amplitudes: np.ndarray  # (n_samples, dim)
    basis: tuple
    norm_drift: float
    factors: tuple | None = None
    nfev: int = 0

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def state(self, i: int) -> StateVector:
        return StateVector(self.basis, self.amplitudes[i], self.factors)

    @property
    def final(self) -> StateVector:
        return self.state(-1)

    def population_of(self, label) -> np.ndarray:
        return self.populations[:, self.basis.index(label)]


def _sample_hamiltonian(hamiltonian, t):
    if hasattr(hamiltonian, "batch"):
        return hamiltonian.batch(t)
    return np.array([hamiltonian(float(s)) for s in np.atleast_1d(t)])


def propagate(hamiltonian, initial: StateVector, window, *, rel_tol: float = 1e-10,
              abs_tol: float = 1e-12, max_step: float = np.inf, n_samples: int = 2000,
              norm_tol: float = NORM_TOL) -> Trajectory:
    """Integrate from ``window[0]`` to ``window[1]`` (either direction).

    The state is never renormalized: if the norm drifts by more than
    ``norm_tol`` at any sample, :class:`IntegrationError` is raised.
    """
    t0, t1 = (float(w) for w in window)
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValueError("propagation window must be finite")
    if abs(initial.norm() - 1.0) > norm_tol:
        raise ValueError(f"initial state is not normalized (norm {initial.norm()!r})")
    n_samples = max(int(n_samples), 2)
    y0 = initial.amplitudes.copy()
    times = np.linspace(t0, t1, n_samples)

    if t0 == t1:
        amps = np.repeat(y0[None, :], n_samples, axis=0)
        return Trajectory(times, amps, initial.basis, 0.0, initial.factors)

    def rhs(t, y):
        h = hamiltonian(t)
        if not np.all(np.isfinite(h)):
            raise IntegrationError(f"non-finite Hamiltonian at t={t!r}")
        return -1j * (h @ y)

    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", t_eval=times, rtol=rel_tol,
                    atol=abs_tol, max_step=max_step)
    if not sol.success:
        raise IntegrationError(f"integrator failed: {sol.message}")
    amps = sol.y.T
    drift = float(np.max(np.abs(np.linalg.norm(amps, axis=1) - 1.0)))
    if drift > norm_tol:
        raise IntegrationError(
            f"norm drift {drift:.3e} exceeds {norm_tol:.1e}; tighten rel_tol/abs_tol")
    return Trajectory(times, amps, initial.basis, drift, initial.factors, sol.nfev)


def max_coupling(hamiltonian, window, n: int = 20001) -> float:
    """Largest off-diagonal magnitude of ``H`` sampled over ``window``."""
    h = _sample_hamiltonian(hamiltonian, np.linspace(*window, n))
    off = h.copy()
    idx = np.arange(h.shape[-1])
    off[:, idx, idx] = 0
    return float(np.abs(off).max())


def _is_lambda_chain(h) -> bool:
    """Zero diagonal and no direct g1-g2 coupling, so that ``H^3 = r^2 H``."""
    return (h.shape[-1] == 3 and not np.any(h[:, [0, 1, 2], [0, 1, 2]])
            and not np.any(h[:, 0, 2]))


def _step_unitaries(h, step):
    """``exp(-i H step)`` for a stack of Hermitian matrices."""
    if _is_lambda_chain(h):
        # closed form: exp(-i H s) = 1 - i sin(r s)/r H + (cos(r s) - 1)/r^2 H^2
        r = np.sqrt(np.abs(h[:, 0, 1]) ** 2 + np.abs(h[:, 1, 2]) ** 2)
        a = step * np.sinc(r * step / np.pi)
        b = -0.5 * step ** 2 * np.sinc(r * step / (2 * np.pi)) ** 2
        h2 = h @ h
        return np.eye(3) - 1j * a[:, None, None] * h + b[:, None, None] * h2
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * step)[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))


def reference_propagate(hamiltonian, initial: StateVector, window, dt: float | None = None,
                        *, coupling_limit: float = 1e-3, chunk: int = 100_000) -> StateVector:
    """Piecewise-constant exact-exponential propagation.

    Each step of length ``dt`` applies the exact exponential of ``H`` at the
    step midpoint: ``V exp(-i w dt) V^dagger`` from an eigendecomposition,
    or the closed form available when ``H`` is a three-level Lambda chain. ``dt`` defaults to the
    largest uniform step with ``max coupling * dt < coupling_limit``.
    """
    t0, t1 = (float(w) for w in window)
    span = t1 - t0
    if dt is None:
        peak = max_coupling(hamiltonian, (t0, t1))
        dt = abs(span) if peak == 0 else 0.9 * coupling_limit / peak
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    n_steps = max(1, math.ceil(abs(span) / dt - 1e-9))
    step = span / n_steps

    psi = initial.amplitudes.copy()
    dim = len(psi)
    eye = np.eye(dim, dtype=complex)
    offdiag = ~np.eye(dim, dtype=bool)
    for start in range(0, n_steps, chunk):
        k = np.arange(start, min(n_steps, start + chunk))
        h = _sample_hamiltonian(hamiltonian, t0 + (k + 0.5) * step)
        if not np.all(np.isfinite(h)):
            raise IntegrationError("non-finite Hamiltonian sample")
        if np.abs(h[:, offdiag]).max(initial=0.0) * abs(step) >= coupling_limit:
            raise ValueError("dt too coarse: max coupling * dt must stay below "
                             f"{coupling_limit}")
        u = _step_unitaries(h, step)
        # ordered product U_last ... U_first by pairwise reduction
        while len(u) > 1:
            if len(u) % 2:
                u = np.concatenate([u, eye[None]])
            u = u[1::2] @ u[0::2]
        psi = u[0] @ psi
    return StateVector(initial.basis, psi, initial.factors)


@dataclass(frozen=True)
class AdiabaticityReport:
    pump_area_product: float
    stokes_area_product: float
    interaction_product: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "pump_area_product": self.pump_area_product,
            "stokes_area_product": self.stokes_area_product,
            "interaction_product": self.interaction_product,
            "verdict": self.verdict,
        }


def adiabaticity_check(geom: FieldGeometry, t_int: float | None = None, *,
                       adiabatic: float = 10.0, marginal: float = 3.0) -> AdiabaticityReport:
    """Pulse-area products ``Omega0 T_L``, ``G0 T_C`` and ``G0 T_int``.

    ``T_int`` defaults to ``max(T_L, T_C)``. The verdict looks at the smaller
    of the two pulse products.
    """
    t_int = max(geom.T_L, geom.T_C) if t_int is None else t_int
    pump = geom.Omega0 * geom.T_L
    stokes = geom.G0 * geom.T_C
    worst = min(pump, stokes)
    if worst >= adiabatic:
        verdict = "adiabatic"
    elif worst >= marginal:
        verdict = "marginal"
    else:
        verdict = "diabatic"
    return AdiabaticityReport(pump, stokes, geom.G0 * t_int, verdict)


@dataclass(frozen=True, eq=False)
class EigenDiagnostics:
    times: np.ndarray
    eigenvalues: np.ndarray   # (n, 3), ascending
    dark_overlap: np.ndarray  # NaN where the dark state is undefined
    dark_energy: np.ndarray   # <D|H|D>, NaN where undefined


def instantaneous_eigen_diagnostics(hamiltonian, trajectory: Trajectory,
                                    degenerate_tol: float = 1e-12) -> EigenDiagnostics:
    """Instantaneous spectrum and dark-state fidelity along a trajectory.

    The dark state is built from the couplings read off ``H(t)`` (not by
    matching eigenvalues), so it stays well defined when two eigenvalues meet.
    Steps where both couplings are below ``degenerate_tol`` times the largest
    coupling on the trajectory report NaN.
    """
    h = _sample_hamiltonian(hamiltonian, trajectory.times)
    eigenvalues = np.linalg.eigvalsh(h)
    om = np.abs(h[:, 0, 1])
    phi = np.angle(h[:, 0, 1])
    g = np.abs(h[:, 1, 2])
    stokes_phase = np.angle(h[:, 1, 2])
    scale = max(float(np.max(om + g)), 0.0)
    overlap = np.full(len(h), np.nan)
    energy = np.full(len(h), np.nan)
    for i in range(len(h)):
        if om[i] + g[i] <= degenerate_tol * scale:
            continue
        try:
            dark = dark_state(om[i], g[i], phi[i], stokes_phase[i]).amplitudes
        except DegenerateDarkStateError:
            continue
        overlap[i] = abs(np.vdot(dark, trajectory.amplitudes[i])) ** 2
        energy[i] = np.vdot(dark, h[i] @ dark).real
    return EigenDiagnostics(trajectory.times, eigenvalues, overlap, energy)


def _column(label) -> str:
    return label_str(label).replace(",", "_")


def trajectory_csv(trajectory: Trajectory, dark_overlap=None) -> str:
    """CSV text: ``time_s``, ``re_<label>``, ``im_<label>``, ``P_<label>``, ``dark_overlap``.

    Labels are the basis labels with commas replaced by underscores, e.g.
    ``g1_0``, ``e_0``, ``g2_1``. Missing overlaps are written as empty fields.
    """
    names = [_column(b) for b in trajectory.basis]
    header = (["time_s"] + [f"re_{n}" for n in names] + [f"im_{n}" for n in names]
              + [f"P_{n}" for n in names] + ["dark_overlap"])
    lines = [",".join(header)]
    pops = trajectory.populations
    for i, t in enumerate(trajectory.times):
        a = trajectory.amplitudes[i]
        row = [fmt(t)]
        row += [fmt(x) for x in a.real]
        row += [fmt(x) for x in a.imag]
        row += [fmt(x) for x in pops[i]]
        if dark_overlap is None or not np.isfinite(dark_overlap[i]):
            row.append("")
        else:
            row.append(fmt(dark_overlap[i]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(trajectory: Trajectory, path, dark_overlap=None):
    return atomic_write_text(path, trajectory_csv(trajectory, dark_overlap))


def initial_state(label: str = "g1") -> StateVector:
    """Manifold-0 basis state: ``"g1"`` -> |g1,0>, ``"e"`` -> |e,0>, ``"g2"`` -> |g2,1>."""
    basis = manifold_basis(0)
    index = {"g1": 0, "e": 1, "g2": 2}[label]
    return StateVector.from_label(basis[index], basis)
