import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fstirap.core import StateVector
from fstirap.exceptions import SequencingError
from fstirap.fields import pulses_atom1, pulses_atom2
from fstirap.protocols import (atom_atom_protocol, atom_photon_protocol, concurrence,
                               direct_stage, optical_path_phase, photon_photon_protocol,
                               qubit_pair, reduced_purity)

TIGHT = dict(rel_tol=1e-12, abs_tol=1e-14)
QUBITS = (("a", (0, 1)), ("b", (0, 1)))


def _stage2_geometry(geom, **kw):
    return geom.replace(z0=0.0, **kw)


def test_concurrence_bell_and_product():
    bell = StateVector.product(QUBITS, {(0, 1): 1 / math.sqrt(2), (1, 0): 1 / math.sqrt(2)})
    assert concurrence(bell) == pytest.approx(1.0)
    prod = StateVector.product(QUBITS, {(0, 0): 0.6, (0, 1): 0.8})
    assert concurrence(prod) == pytest.approx(0.0, abs=1e-15)
    assert concurrence(np.array([math.cos(0.3), 0, 0, math.sin(0.3)])) == pytest.approx(
        math.sin(0.6))
    with pytest.raises(ValueError):
        concurrence(np.array([1.0, 1.0, 0, 0]))


@given(st.floats(0, math.pi / 2), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_concurrence_local_phase_invariance(theta, p1, p2):
    a = np.array([0, math.cos(theta), math.sin(theta), 0], complex)
    b = a * np.array([1, cmath.exp(1j * p1), cmath.exp(1j * p2), 1])
    assert concurrence(a) == pytest.approx(concurrence(b), abs=1e-12)
    assert concurrence(a) == pytest.approx(math.sin(2 * theta), abs=1e-12)


def test_reduced_purity():
    bell = StateVector.product(QUBITS, {(0, 1): 1 / math.sqrt(2), (1, 0): 1 / math.sqrt(2)})
    assert reduced_purity(bell, "a") == pytest.approx(0.5)
    prod = StateVector.product(QUBITS, {(0, 0): 0.6, (0, 1): 0.8})
    assert reduced_purity(prod, "a") == pytest.approx(1.0)
    assert reduced_purity(prod, "b") == pytest.approx(1.0)


def test_qubit_pair_projection():
    factors = (("x", ("g1", "e", "g2")), ("c", (0, 1)))
    s = StateVector.product(factors, {("g1", 0): 0.6, ("g2", 1): 0.8})
    pair, weight = qubit_pair(s, {"x": ("g1", "g2"), "c": (0, 1)}, {})
    assert weight == pytest.approx(1.0)
    assert concurrence(pair) == pytest.approx(2 * 0.6 * 0.8)


def test_atom_photon(geom):
    res = atom_photon_protocol(geom)
    p = res.populations
    assert 0.45 <= p["g1,0"] <= 0.55
    assert res.residual_excitation < 0.01
    assert res.concurrence > 0.95
    assert res.sequence[0].process == "f_STIRAP"
    assert res.target_fidelity > 0.99
    # relative phase of the g2 branch: -exp(-i phi_L)
    assert abs(cmath.phase(-res.branch_amplitudes["g2,1"] / res.branch_amplitudes["g1,0"])) < 0.05


def test_atom_photon_phase_convention(geom):
    a = atom_photon_protocol(geom.replace(phi_L=0.8))
    ratio = a.branch_amplitudes["g2,1"] / a.branch_amplitudes["g1,0"]
    assert cmath.phase(-ratio * cmath.exp(0.8j)) == pytest.approx(0.0, abs=0.05)


def test_atom_atom(geom):
    res = atom_atom_protocol(geom, _stage2_geometry(geom, tau=250e-6))
    assert res.concurrence >= 0.95
    assert res.residual_excitation < 0.01
    assert res.relative_phase == pytest.approx(0.0, abs=0.05)
    assert res.final_state.factors[0][0] == "atom2"


def test_atom_atom_requires_disjoint(geom):
    with pytest.raises(SequencingError):
        atom_atom_protocol(geom, _stage2_geometry(geom, tau=50e-6))


def test_atom_atom_linearity(geom):
    g2 = _stage2_geometry(geom, tau=250e-6)
    res = atom_atom_protocol(geom, g2, **TIGHT)
    s1 = atom_photon_protocol(geom, **TIGHT).final_state
    factors = (("atom2", ("g1", "e", "g2")), ("atom1", ("g1", "e", "g2")), ("cavity", (0, 1)))
    start = StateVector.product(factors, {
        ("g2", "g1", 0): s1.amplitude(("g1", 0)),
        ("g2", "e", 0): s1.amplitude(("e", 0)),
        ("g2", "g2", 1): s1.amplitude(("g2", 1)),
    })
    direct = direct_stage(start, pulses_atom2(g2), "atom2", "cavity", **TIGHT)
    assert np.max(np.abs(direct.amplitudes - res.final_state.amplitudes)) <= 1e-8


def _x0_for_alpha(alpha, z0, wavelength, near=500e-6):
    k = math.ceil(near / wavelength)
    r = wavelength * (k + alpha / (2 * math.pi))
    return math.sqrt(r * r - z0 * z0)


@pytest.mark.parametrize("alpha", [0.0, math.pi / 2, math.pi])
def test_photon_photon_phase_chain(geom, alpha):
    x0 = _x0_for_alpha(alpha, geom.z0, geom.wavelength)
    res = photon_photon_protocol(geom, _stage2_geometry(geom, x0=x0))
    assert abs(cmath.phase(cmath.exp(1j * (res.alpha - alpha)))) < 1e-9
    assert abs(cmath.phase(cmath.exp(1j * (res.relative_phase - alpha)))) < 0.05
    assert res.concurrence >= 0.95


def test_photon_photon_linearity(geom):
    g2 = _stage2_geometry(geom, x0=_x0_for_alpha(1.0, geom.z0, geom.wavelength))
    res = photon_photon_protocol(geom, g2, **TIGHT)
    s1 = atom_photon_protocol(geom, **TIGHT).final_state
    factors = (("atom", ("g1", "e", "g2")), ("cavity2", (0, 1)), ("cavity1", (0, 1)))
    start = StateVector.product(factors, {
        ("g1", 0, 0): s1.amplitude(("g1", 0)),
        ("e", 0, 0): s1.amplitude(("e", 0)),
        ("g2", 0, 1): s1.amplitude(("g2", 1)),
    })
    p2 = pulses_atom1(g2).shifted(g2.x0 / g2.v)
    direct = direct_stage(start, p2, "atom", "cavity2", phi_L=geom.phi_L + res.alpha, **TIGHT)
    assert np.max(np.abs(direct.amplitudes - res.final_state.amplitudes)) <= 1e-8


def test_optical_path_phase():
    assert optical_path_phase(0.0, 0.0, 780e-9) == 0.0
    assert optical_path_phase(390e-9, 0.0, 780e-9) == pytest.approx(math.pi)
    assert -math.pi <= optical_path_phase(1e-3, 3e-5, 780e-9) <= math.pi


def test_result_json_round_trip(geom):
    import json

    res = atom_photon_protocol(geom)
    doc = json.loads(res.to_json())
    assert doc["protocol"] == "atom-photon"
    assert doc["concurrence"] == pytest.approx(res.concurrence)
