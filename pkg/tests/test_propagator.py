import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fstirap.core import manifold_basis, StateVector
from fstirap.exceptions import IntegrationError
from fstirap.fields import GaussianEnvelope, PulsePair, pulses_atom1, pulses_atom2
from fstirap.propagator import (PulseHamiltonian, adiabaticity_check, initial_state,
                                instantaneous_eigen_diagnostics, propagate,
                                reference_propagate, trajectory_csv)

slow = settings(max_examples=8, deadline=None,
                suppress_health_check=[HealthCheck.function_scoped_fixture])


def _final(pulses, phi=None, initial="g1", **kw):
    ham = PulseHamiltonian(pulses, phi)
    return propagate(ham, initial_state(initial), pulses.support, n_samples=2, **kw).final


def test_half_passage_populations(geom):
    traj = propagate(PulseHamiltonian(pulses_atom1(geom)), initial_state("g1"),
                     pulses_atom1(geom).support)
    p = traj.final.populations()
    assert 0.45 <= p[0] <= 0.55
    assert 0.45 <= p[2] <= 0.55
    assert p[1] < 0.01
    assert traj.norm_drift <= 1e-9
    assert traj.times[0] < traj.times[-1]


def test_constant_coupling_rabi_oscillation():
    """Pump alone: |g1> <-> |e> at frequency Omega; closed form cos^2(Omega t)."""
    om = 2.0e5
    pulses = PulsePair(GaussianEnvelope(om, 0.0, 1e9), GaussianEnvelope(0.0, 0.0, 1.0), 0.0,
                       (0.0, 3e-5))
    traj = propagate(PulseHamiltonian(pulses), initial_state("g1"), pulses.support,
                     n_samples=51)
    expected = np.cos(om * traj.times) ** 2
    assert np.allclose(traj.population_of(manifold_basis(0)[0]), expected, atol=1e-9)


def test_unitarity_and_norm_error(geom):
    p = pulses_atom1(geom)
    traj = propagate(PulseHamiltonian(p), initial_state(), p.support)
    assert np.max(np.abs(np.linalg.norm(traj.amplitudes, axis=1) - 1)) <= 1e-9
    with pytest.raises(IntegrationError):
        propagate(PulseHamiltonian(p), initial_state(), p.support, rel_tol=1e-3, abs_tol=1e-3)


def test_non_finite_hamiltonian_raises():
    def ham(t):
        return np.full((3, 3), np.nan)

    with pytest.raises(IntegrationError):
        propagate(ham, initial_state(), (0.0, 1.0))


def test_unnormalized_initial_rejected():
    s = StateVector(manifold_basis(0), [1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        propagate(lambda t: np.zeros((3, 3)), s, (0.0, 1.0))


@slow
@given(st.floats(0.6, 1.4), st.floats(0.6, 1.4), st.floats(-math.pi, math.pi))
def test_phase_invariance(geom, fz, fd, phi):
    p = pulses_atom1(geom.replace(z0=geom.z0 * fz, d=geom.d * fd))
    a = _final(p).populations()
    b = _final(p, phi).populations()
    assert np.max(np.abs(a - b)) <= 1e-10


def test_time_reversal(geom):
    p = pulses_atom1(geom)
    ham = PulseHamiltonian(p)
    fwd = propagate(ham, initial_state(), p.support, n_samples=2).final
    back = propagate(ham, fwd, p.support[::-1], n_samples=2).final
    assert np.max(np.abs(back.amplitudes - initial_state().amplitudes)) < 1e-6


def test_sign_fold_invariance(geom):
    """A literal negative cavity coupling and the folded pi phase give the same state."""
    p = pulses_atom1(geom)

    def negative(t):
        h = np.zeros((3, 3), complex)
        h[0, 1] = h[1, 0] = p.pump(t)
        h[1, 2] = h[2, 1] = -p.stokes(t)
        return h

    folded = _final(p.__class__(p.pump, p.stokes, 0.0, p.support, math.pi))
    direct = propagate(negative, initial_state(), p.support, n_samples=2).final
    assert np.allclose(folded.amplitudes, direct.amplitudes, atol=1e-8)
    # populations do not depend on the sign at all
    assert np.allclose(folded.populations(), _final(p).populations(), atol=1e-10)


def test_tau_invariance(geom):
    g2 = geom.replace(z0=0.0)
    a = _final(pulses_atom2(g2), initial="g2").populations()
    b = _final(pulses_atom2(g2.replace(tau=3.7e-4)), initial="g2").populations()
    assert np.max(np.abs(a - b)) < 1e-6


def test_scaling_covariance():
    """Scaling couplings by k and time by 1/k leaves final populations unchanged."""
    base = PulsePair(GaussianEnvelope(4.0, 1.0, 1.0), GaussianEnvelope(5.0, 0.0, 1.5), 0.0,
                     (-9.0, 10.0))
    k = 1e6
    scaled = PulsePair(GaussianEnvelope(4.0 * k, 1.0 / k, 1.0 / k),
                       GaussianEnvelope(5.0 * k, 0.0, 1.5 / k), 0.0, (-9.0 / k, 10.0 / k))
    assert np.allclose(_final(base).populations(), _final(scaled).populations(), atol=1e-8)


def test_backward_window(geom):
    p = pulses_atom1(geom)
    traj = propagate(PulseHamiltonian(p), initial_state("g2"), p.support[::-1], n_samples=5)
    assert traj.times[0] > traj.times[-1]


def test_reference_oracle_agrees(geom):
    p = pulses_atom1(geom)
    ham = PulseHamiltonian(p)
    ref = reference_propagate(ham, initial_state(), p.support)
    fast = propagate(ham, initial_state(), p.support, n_samples=2).final
    assert np.max(np.abs(ref.populations() - fast.populations())) < 1e-6


def test_reference_oracle_rejects_bad_steps(geom):
    p = pulses_atom1(geom)
    ham = PulseHamiltonian(p)
    with pytest.raises(ValueError):
        reference_propagate(ham, initial_state(), p.support, dt=0.0)
    with pytest.raises(ValueError):
        reference_propagate(ham, initial_state(), p.support, dt=1e-6)


def test_reference_oracle_exact_for_constant_h():
    h = np.array([[0, 1, 0], [1, 0, 2], [0, 2, 0]], complex)
    from scipy.linalg import expm

    out = reference_propagate(lambda t: h, initial_state(), (0.0, 1.0), dt=1e-4)
    assert np.allclose(out.amplitudes, expm(-1j * h) @ [1, 0, 0], atol=1e-12)


def test_adiabaticity_products(geom):
    rep = adiabaticity_check(geom)
    assert rep.pump_area_product == pytest.approx(50, rel=1e-14)
    assert rep.stokes_area_product == pytest.approx(50, rel=1e-14)
    assert rep.verdict == "adiabatic"
    weak = adiabaticity_check(geom.replace(G0=geom.G0 / 10))
    assert weak.verdict == "marginal"
    assert adiabaticity_check(geom.replace(G0=geom.G0 / 100)).verdict == "diabatic"


def test_eigen_diagnostics(geom):
    p = pulses_atom1(geom)
    ham = PulseHamiltonian(p)
    traj = propagate(ham, initial_state(), p.support, n_samples=501)
    diag = instantaneous_eigen_diagnostics(ham, traj)
    ok = np.isfinite(diag.dark_energy)
    assert np.max(np.abs(diag.dark_energy[ok])) < 1e-6
    # eigenvalues are 0 and +-sqrt(Omega^2 + G^2)
    om, g = p.pump(traj.times), p.stokes(traj.times)
    assert np.allclose(diag.eigenvalues[:, 2], np.hypot(om, g), rtol=1e-9, atol=1e-6)


def test_trajectory_csv_columns_and_determinism(geom):
    p = pulses_atom1(geom)
    ham = PulseHamiltonian(p)
    runs = [trajectory_csv(propagate(ham, initial_state(), p.support, n_samples=50))
            for _ in range(2)]
    assert runs[0] == runs[1]
    header = runs[0].splitlines()[0].split(",")
    assert header[0] == "time_s"
    assert "P_g2_1" in header and header[-1] == "dark_overlap"
    assert len(runs[0].splitlines()) == 51


def test_reference_oracle_general_hamiltonian():
    """Non-Lambda Hamiltonians go through the eigendecomposition path."""
    from scipy.linalg import expm

    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (a + a.conj().T) / 2
    s = StateVector(tuple(range(4)), np.eye(4)[0])
    out = reference_propagate(lambda t: h, s, (0.0, 0.5), dt=1e-4)
    assert np.allclose(out.amplitudes, expm(-0.5j * h) @ np.eye(4)[0], atol=1e-12)
