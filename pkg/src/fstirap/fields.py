"""
Beam geometry, trajectory-induced pulse envelopes and pulse-sequence analysis.

An atom crossing a standing-wave cavity mode and a laser beam sees two
Gaussian Rabi-frequency envelopes in time. ``pulses_atom1`` is the
cavity-then-laser sequence of an atom flying at height ``z0`` above the cavity
axis; ``pulses_atom2`` is the laser-then-cavity sequence on the ``z = 0`` line.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import eval_hermite

from .exceptions import ClassificationError

SUPPORT_WIDTHS = 6.0


@dataclass(frozen=True)
class FieldGeometry:
    """Spatial and beam parameters of one atom traversal (SI units, rad/s)."""

    G0: float
    Omega0: float
    W_C: float
    W_L: float
    wavelength: float
    v: float
    z0: float = 0.0
    d: float = 0.0
    phi_L: float = 0.0
    tau: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        for name in ("W_C", "W_L", "wavelength", "v"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("G0", "Omega0"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for f in dataclasses.fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")

    @property
    def T_L(self) -> float:
        return self.W_L / self.v

    @property
    def T_C(self) -> float:
        return self.W_C / self.v

    def replace(self, **changes) -> "FieldGeometry":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def reference_geometry(**overrides) -> FieldGeometry:
    """Rb-like optical setup with the half-transfer operating point.

    W_L = 20 um, W_C = 30 um, v = 2 m/s, lambda = 780 nm,
    Omega0 = 50 v / W_L, G0 = 50 v / W_C, z0 = 31.9 um, d = 30.2 um.
    """
    W_L, W_C, v = 20e-6, 30e-6, 2.0
    params = dict(G0=50 * v / W_C, Omega0=50 * v / W_L, W_C=W_C, W_L=W_L,
                  wavelength=780e-9, v=v, z0=31.9e-6, d=30.2e-6)
    params.update(overrides)
    return FieldGeometry(**params)


@dataclass(frozen=True)
class GaussianEnvelope:
    """``amplitude * exp(-((t - center) / width)**2)``; accepts scalars or arrays."""

    amplitude: float
    center: float
    width: float

    def __call__(self, t):
        x = (np.asarray(t, dtype=float) - self.center) / self.width
        out = self.amplitude * np.exp(-x * x)
        return float(out) if out.ndim == 0 else out

    @property
    def peak_time(self) -> float:
        return self.center


@dataclass(frozen=True)
class PulsePair:
    """Pump ``Omega(t)`` and Stokes ``G(t)`` envelopes with their phases.

    Both envelopes are non-negative. A negative standing-wave factor is kept
    as ``stokes_phase = pi`` on the cavity coupling.
    """

    pump: Callable
    stokes: Callable
    phi_L: float
    support: tuple[float, float]
    stokes_phase: float = 0.0

    @property
    def pump_peak_time(self) -> float:
        return _peak_time(self.pump, self.support)

    @property
    def stokes_peak_time(self) -> float:
        return _peak_time(self.stokes, self.support)

    def sample(self, n: int = 4001):
        t = np.linspace(*self.support, n)
        return t, np.asarray(self.pump(t), float), np.asarray(self.stokes(t), float)

    def shifted(self, dt: float) -> "PulsePair":
        return PulsePair(_shift(self.pump, dt), _shift(self.stokes, dt), self.phi_L,
                         (self.support[0] + dt, self.support[1] + dt), self.stokes_phase)

    def with_phase(self, phi_L: float) -> "PulsePair":
        return dataclasses.replace(self, phi_L=phi_L)


def _shift(envelope, dt):
    if isinstance(envelope, GaussianEnvelope):
        return dataclasses.replace(envelope, center=envelope.center + dt)
    return lambda t: envelope(np.asarray(t) - dt)


def _peak_time(envelope, support) -> float:
    if isinstance(envelope, GaussianEnvelope):
        return envelope.center
    t = np.linspace(*support, 20001)
    return float(t[np.argmax(envelope(t))])


def _support(peaks, geom: FieldGeometry) -> tuple[float, float]:
    span = SUPPORT_WIDTHS * max(geom.T_L, geom.T_C)
    return (min(peaks) - span, max(peaks) + span)


def standing_wave_factor(z: float, wavelength: float) -> float:
    """``cos(2 pi z / wavelength)``, exactly zero on the nodes."""
    frac = math.fmod(z / wavelength, 1.0)
    if frac < 0:
        frac += 1.0
    if frac in (0.25, 0.75):
        return 0.0
    return math.cos(2 * math.pi * frac)


def hermite_gauss_coupling(x, y, z, m_idx: int, n_idx: int, geom: FieldGeometry):
    """Atom-cavity coupling of a TEM_mn mode at position ``(x, y, z)``.

    Physicists' Hermite polynomials of ``sqrt(2) x / W_C`` and
    ``sqrt(2) y / W_C``, a Gaussian transverse envelope and a standing wave
    ``cos(2 pi z / wavelength)`` along the cavity axis.
    """
    if m_idx < 0 or n_idx < 0:
        raise ValueError("mode indices must be >= 0")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = geom.W_C
    transverse = (eval_hermite(m_idx, math.sqrt(2) * x / w)
                  * eval_hermite(n_idx, math.sqrt(2) * y / w)
                  * np.exp(-(x ** 2 + y ** 2) / w ** 2))
    if np.ndim(z) == 0:
        axial = standing_wave_factor(float(z), geom.wavelength)
    else:
        axial = np.cos(2 * np.pi * np.asarray(z, float) / geom.wavelength)
    out = geom.G0 * transverse * axial
    return float(out) if np.ndim(out) == 0 else out


def pulses_atom1(geom: FieldGeometry) -> PulsePair:
    """Cavity-then-laser sequence for an atom on the ``z = z0`` line.

    ``G(t) = G0 exp(-(v t)^2 / W_C^2) cos(2 pi z0 / lambda)`` and
    ``Omega(t) = Omega0 exp(-z0^2 / W_L^2) exp(-(v t - d)^2 / W_L^2)``, with
    ``t = 0`` when the atom crosses the cavity center (shifted by ``tau``).
    """
    c = standing_wave_factor(geom.z0, geom.wavelength)
    stokes = GaussianEnvelope(geom.G0 * abs(c), geom.tau, geom.T_C)
    pump = GaussianEnvelope(geom.Omega0 * math.exp(-(geom.z0 / geom.W_L) ** 2),
                            geom.tau + geom.d / geom.v, geom.T_L)
    return PulsePair(pump, stokes, geom.phi_L,
                     _support((stokes.center, pump.center), geom),
                     math.pi if c < 0 else 0.0)


def pulses_atom2(geom: FieldGeometry) -> PulsePair:
    """Laser-then-cavity sequence on the ``z = 0`` line, cavity crossing at ``tau``.

    ``G(t) = G0 exp(-[v (t - tau)]^2 / W_C^2)`` and
    ``Omega(t) = Omega0 exp(-[v (t - tau) + d]^2 / W_L^2)``.
    """
    stokes = GaussianEnvelope(geom.G0, geom.tau, geom.T_C)
    pump = GaussianEnvelope(geom.Omega0, geom.tau - geom.d / geom.v, geom.T_L)
    return PulsePair(pump, stokes, geom.phi_L, _support((stokes.center, pump.center), geom))


@dataclass(frozen=True)
class SequenceClass:
    ordering: str
    ending_ratio: float
    mixing_angle: float
    process: str
    window: tuple[float, float]
    relative_std: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def classify_sequence(pulses: PulsePair, epsilon_rel: float = 1e-2, *,
                      trailing_fraction: float = 0.5, stability: float = 0.1,
                      stirap_ratio: float = 10.0, n_samples: int = 8001) -> SequenceClass:
    """Characterize how a pulse pair ends.

    The decay region starts at the later of the two peaks and ends where
    ``max(Omega, G)`` falls below ``epsilon_rel`` times the global peak. The
    ending ratio is the mean of ``Omega / G`` over the last
    ``trailing_fraction`` of that region. A ratio above ``stirap_ratio`` (or
    below its inverse) means one pulse has effectively vanished first, which
    is reported as ``STIRAP`` with ratio ``inf`` (or ``0``). A finite ratio
    whose relative standard deviation stays under ``stability`` is
    ``f_STIRAP``; anything else is ``incomplete``.
    """
    if not 0 < epsilon_rel < 1:
        raise ValueError("epsilon_rel must lie in (0, 1)")
    if not 0 < trailing_fraction <= 1:
        raise ValueError("trailing_fraction must lie in (0, 1]")
    t, om, g = pulses.sample(n_samples)
    if not om.any() or not g.any():
        raise ClassificationError("cannot classify a sequence with an identically zero pulse")

    t_pump, t_stokes = pulses.pump_peak_time, pulses.stokes_peak_time
    ordering = "stokes_first" if t_stokes <= t_pump else "pump_first"
    peak = max(om.max(), g.max())
    start = max(t_pump, t_stokes)
    alive = np.maximum(om, g) > epsilon_rel * peak
    decay = (t >= start) & alive
    if not decay.any():
        raise ClassificationError("no non-negligible decay region after the pulse peaks")
    t_end = t[decay][-1]
    t_begin = t_end - trailing_fraction * (t_end - start)
    window = decay & (t >= t_begin)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = om[window] / g[window]
    finite = ratio[np.isfinite(ratio)]
    if finite.size < window.sum() or finite.size == 0:
        mean = math.inf
        rel_std = math.inf
    else:
        mean = float(finite.mean())
        rel_std = float(finite.std() / mean) if mean > 0 else math.inf

    if mean >= stirap_ratio:
        process, ending = "STIRAP", math.inf
    elif mean <= 1.0 / stirap_ratio:
        process, ending = "STIRAP", 0.0
    elif rel_std < stability:
        process, ending = "f_STIRAP", mean
    else:
        process, ending = "incomplete", mean
    angle = math.pi / 2 if math.isinf(ending) else math.atan(ending)
    return SequenceClass(ordering, ending, angle, process,
                         (float(t_begin), float(t_end)), rel_std)
