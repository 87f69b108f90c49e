"""Element-level model of a STAR surface.

Covers the load-impedance mapping to transmission and reflection (T&R)
coefficients, the single- and dual-sided signal models, energy
classification of T&R matrices, the coupled phase-shift constraint, and
operating-protocol feasibility.

All phases are canonicalised to ``[0, 2*pi)`` and compared on the unit
circle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import NotRealizable, ProtocolMismatch, SingularImpedance

__all__ = [
    "ETA0", "STRUCT_TOL", "PHASE_TOL", "ZERO_AMPLITUDE", "TWO_PI",
    "wrap_phase", "angular_distance",
    "ImpedancePair", "TrCoefficients", "TimeSwitchedCoefficients",
    "TrMatrix", "ElementClass", "PhaseShiftModel", "ProtocolKind",
    "OperatingProtocol", "SurfaceConfig",
    "coeffs_from_impedance", "split_signal", "apply_dual_sided", "classify",
    "project_coupled", "auxiliary_bits", "phase_violation",
    "enforce_protocol", "round_to_modes", "coupled_consistency_check",
]

ETA0 = 376.730
STRUCT_TOL = 1e-9
PHASE_TOL = 1e-6
ZERO_AMPLITUDE = 1e-12
TWO_PI = 2.0 * np.pi

_COUPLED_TARGETS = (np.pi / 2, 3 * np.pi / 2)


def wrap_phase(phi):
    """Map angles onto ``[0, 2*pi)``."""
    out = np.mod(phi, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def angular_distance(a, b):
    """Shortest distance between two angles on the unit circle, in ``[0, pi]``."""
    return np.abs(np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b)))))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ImpedancePair:
    """Electric admittance ``y`` (S) and magnetic impedance ``z`` (ohm)."""

    y: complex
    z: complex
    eta0: float = ETA0

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")
        object.__setattr__(self, "y", complex(self.y))
        object.__setattr__(self, "z", complex(self.z))

    @property
    def lossless_realizable(self) -> bool:
        return abs(self.y.real) <= 1e-12 and abs(self.z.real) <= 1e-12


@dataclass(frozen=True)
class TrCoefficients:
    """Amplitudes (power fractions) and phases of T&R coefficients.

    Fields may be scalars or 1-D arrays with one entry per element.
    """

    beta_t: np.ndarray
    beta_r: np.ndarray
    phi_t: np.ndarray
    phi_r: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, n), dtype=float)
                  for n in ("beta_t", "beta_r", "phi_t", "phi_r")]
        shape = np.broadcast_shapes(*(a.shape for a in arrays))
        arrays = [np.broadcast_to(a, shape).copy() for a in arrays]
        if np.any(~np.isfinite(np.concatenate([a.ravel() for a in arrays]))):
            raise ValueError("T&R coefficients must be finite")
        if np.any(arrays[0] < 0) or np.any(arrays[1] < 0):
            raise ValueError("amplitudes beta_t, beta_r must be nonnegative")
        arrays[2] = wrap_phase(arrays[2])
        arrays[3] = wrap_phase(arrays[3])
        for name, arr in zip(("beta_t", "beta_r", "phi_t", "phi_r"), arrays):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_complex(cls, t, r) -> "TrCoefficients":
        t = np.asarray(t, dtype=complex)
        r = np.asarray(r, dtype=complex)
        return cls(np.abs(t) ** 2, np.abs(r) ** 2, np.angle(t), np.angle(r))

    @classmethod
    def from_split_angle(cls, theta, phi_t, phi_r) -> "TrCoefficients":
        """Lossless coefficients with ``beta_t = sin^2(theta)``, ``beta_r = cos^2(theta)``."""
        theta = np.asarray(theta, dtype=float)
        return cls(np.sin(theta) ** 2, np.cos(theta) ** 2, phi_t, phi_r)

    @property
    def t(self) -> np.ndarray:
        return np.sqrt(self.beta_t) * np.exp(1j * self.phi_t)

    @property
    def r(self) -> np.ndarray:
        return np.sqrt(self.beta_r) * np.exp(1j * self.phi_r)

    def side(self, side) -> np.ndarray:
        """Complex coefficients of one side (``"transmission"``/``"reflection"``)."""
        return self.t if _side_name(side) == "transmission" else self.r

    @property
    def split_angle(self) -> np.ndarray:
        """Angle ``theta`` with ``tan^2(theta) = beta_t / beta_r``."""
        return np.arctan2(np.sqrt(self.beta_t), np.sqrt(self.beta_r))

    def __len__(self):
        if self.beta_t.ndim == 0:
            raise TypeError("scalar TrCoefficients has no len()")
        return self.beta_t.shape[0]

    def __getitem__(self, idx) -> "TrCoefficients":
        return TrCoefficients(self.beta_t[idx], self.beta_r[idx],
                              self.phi_t[idx], self.phi_r[idx])

    def is_passive(self, tol=STRUCT_TOL) -> bool:
        return bool(np.all(self.beta_t <= 1 + tol) and np.all(self.beta_r <= 1 + tol))

    def is_lossless(self, tol=STRUCT_TOL) -> bool:
        return bool(np.all(np.abs(self.beta_t + self.beta_r - 1) <= tol))

    def replace(self, **kwargs) -> "TrCoefficients":
        fields = dict(beta_t=self.beta_t, beta_r=self.beta_r,
                      phi_t=self.phi_t, phi_r=self.phi_r)
        fields.update(kwargs)
        return TrCoefficients(**fields)


@dataclass(frozen=True)
class TimeSwitchedCoefficients:
    """Transmission-only and reflection-only vectors plus slot fractions."""

    transmit: TrCoefficients
    reflect: TrCoefficients
    fractions: Tuple[float, float]

    def __post_init__(self):
        lt, lr = (float(v) for v in self.fractions)
        if lt < 0 or lr < 0 or lt + lr > 1 + STRUCT_TOL:
            raise ProtocolMismatch(
                f"time-switching fractions must be nonnegative with sum <= 1, got {self.fractions}")
        object.__setattr__(self, "fractions", (lt, lr))


class ElementClass(enum.Enum):
    PASSIVE_LOSSLESS = "passive_lossless"
    PASSIVE_LOSSY = "passive_lossy"
    ACTIVE = "active"
    INDEFINITE = "indefinite"


@dataclass(frozen=True)
class TrMatrix:
    """Dual-sided T&R matrix ``[[R_A, T_AB], [T_BA, R_B]]``."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=complex)
        if xi.shape != (2, 2):
            raise ValueError(f"T&R matrix must be 2x2, got shape {xi.shape}")
        xi.flags.writeable = False
        object.__setattr__(self, "xi", xi)

    @classmethod
    def from_entries(cls, r_a, t_ab, t_ba, r_b) -> "TrMatrix":
        return cls(np.array([[r_a, t_ab], [t_ba, r_b]], dtype=complex))

    def is_reciprocal(self, tol=STRUCT_TOL) -> bool:
        return bool(abs(self.xi[0, 1] - self.xi[1, 0]) <= tol)

    @property
    def T(self) -> "TrMatrix":
        return TrMatrix(self.xi.T)


class PhaseShiftModel(enum.Enum):
    INDEPENDENT = "independent"
    COUPLED = "coupled"


class ProtocolKind(enum.Enum):
    ENERGY_SPLITTING = "energy_splitting"
    MODE_SWITCHING = "mode_switching"
    TIME_SWITCHING = "time_switching"


@dataclass(frozen=True)
class OperatingProtocol:
    kind: ProtocolKind = ProtocolKind.ENERGY_SPLITTING
    ts_fractions: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if self.ts_fractions is not None:
            lt, lr = (float(v) for v in self.ts_fractions)
            if lt < 0 or lr < 0 or lt + lr > 1 + STRUCT_TOL:
                raise ProtocolMismatch(
                    f"ts_fractions must be nonnegative with sum <= 1, got {self.ts_fractions}")
            object.__setattr__(self, "ts_fractions", (lt, lr))


@dataclass(frozen=True)
class SurfaceConfig:
    """Element layout, phase-shift model and operating protocol of a surface.

    The surface is planar with unit ``normal``; the base station sits on the
    ``-normal`` side so reflection users share its half-space and
    transmission users occupy the ``+normal`` half-space.
    """

    positions: np.ndarray
    model: PhaseShiftModel = PhaseShiftModel.COUPLED
    protocol: OperatingProtocol = field(default_factory=OperatingProtocol)
    normal: Tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 3)
        if pos.shape[0] < 1:
            raise ValueError("a surface needs at least one element")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "model", PhaseShiftModel(self.model))
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", tuple(n / np.linalg.norm(n)))

    @classmethod
    def planar(cls, m: int, columns: int, spacing: float,
               center=(0.0, 0.0, 0.0), **kwargs) -> "SurfaceConfig":
        """Rectangular layout in the y-z plane, filled row by row."""
        if m < 1 or columns < 1:
            raise ValueError("m and columns must be positive")
        idx = np.arange(m)
        col, row = idx % columns, idx // columns
        rows = int(np.ceil(m / columns))
        ncols = min(columns, m)
        y = (col - (ncols - 1) / 2) * spacing
        z = (row - (rows - 1) / 2) * spacing
        pos = np.stack([np.zeros(m), y, z], axis=1) + np.asarray(center, dtype=float)
        return cls(pos, **kwargs)

    @property
    def m(self) -> int:
        return self.positions.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    @property
    def largest_dimension(self) -> float:
        if self.m < 2:
            return 0.0
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())

    def with_protocol(self, protocol: OperatingProtocol) -> "SurfaceConfig":
        return SurfaceConfig(self.positions, self.model, protocol, self.normal)

    def with_model(self, model: PhaseShiftModel) -> "SurfaceConfig":
        return SurfaceConfig(self.positions, model, self.protocol, self.normal)


def _side_name(side) -> str:
    name = getattr(side, "value", side)
    if name in ("t", "transmission"):
        return "transmission"
    if name in ("r", "reflection"):
        return "reflection"
    raise ValueError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def coeffs_from_impedance(p: ImpedancePair) -> Tuple[complex, complex]:
    """Transmission and reflection coefficients of a load-impedance element.

    Parameters
    ----------
    p : ImpedancePair
        Electric admittance, magnetic impedance and free-space impedance.

    Returns
    -------
    t, r : complex
        ``R = -2 (eta0^2 Y - Z) / ((2 + eta0 Y)(2 eta0 + Z))`` and
        ``T = (2 - eta0 Y) / (2 + eta0 Y) - R``.
    """
    eta0, y, z = p.eta0, p.y, p.z
    den_y = 2 + eta0 * y
    den_z = 2 * eta0 + z
    if abs(den_y) < 1e-12 or abs(den_z) < 1e-12:
        raise SingularImpedance(f"singular load impedance: y={y}, z={z}, eta0={eta0}")
    r = -2 * (eta0 ** 2 * y - z) / (den_y * den_z)
    t = (2 - eta0 * y) / den_y - r
    return complex(t), complex(r)


def split_signal(c: TrCoefficients, s):
    """Split an incident signal into its transmitted and reflected parts."""
    return c.t * s, c.r * s


def apply_dual_sided(x: TrMatrix, s_a, s_b):
    y = x.xi @ np.array([s_a, s_b], dtype=complex)
    return complex(y[0]), complex(y[1])


def classify(x: TrMatrix, tol=STRUCT_TOL) -> ElementClass:
    """Energy class of a T&R matrix from the spectrum of ``Xi^H Xi - I``."""
    gram = x.xi.conj().T @ x.xi
    ev = np.linalg.eigvalsh(gram - np.eye(2))
    if np.all(np.abs(ev) <= tol):
        return ElementClass.PASSIVE_LOSSLESS
    if np.all(ev < -tol):
        return ElementClass.PASSIVE_LOSSY
    if np.all(ev > tol):
        return ElementClass.ACTIVE
    return ElementClass.INDEFINITE


def _nearest_target(diff):
    d0 = angular_distance(diff, _COUPLED_TARGETS[0])
    d1 = angular_distance(diff, _COUPLED_TARGETS[1])
    nu = (d1 < d0).astype(int)
    return nu, np.where(nu == 1, d1, d0)


def auxiliary_bits(c: TrCoefficients) -> np.ndarray:
    """Bit ``nu`` selecting the admissible difference nearest to ``phi_r - phi_t``."""
    nu, _ = _nearest_target(c.phi_r - c.phi_t)
    return nu


def project_coupled(c: TrCoefficients) -> TrCoefficients:
    """Nearest coefficients whose phase difference is pi/2 or 3*pi/2.

    The correction is split equally between the two phases. When one
    amplitude is zero its phase is meaningless, so the whole correction is
    put on that phase and the active one is left untouched.
    """
    diff = c.phi_r - c.phi_t
    nu, dist = _nearest_target(diff)
    target = np.where(nu == 1, _COUPLED_TARGETS[1], _COUPLED_TARGETS[0])
    delta = np.angle(np.exp(1j * (target - diff)))
    # already on the constraint: keep bitwise, which makes projection idempotent
    delta = np.where(dist <= 1e-12, 0.0, delta)
    t_off = c.beta_t < ZERO_AMPLITUDE
    r_off = (c.beta_r < ZERO_AMPLITUDE) & ~t_off
    share_t = np.where(t_off, 1.0, np.where(r_off, 0.0, 0.5))
    phi_t = c.phi_t - share_t * delta
    phi_r = c.phi_r + (1.0 - share_t) * delta
    moved = delta != 0
    return c.replace(phi_t=np.where(moved, phi_t, c.phi_t),
                     phi_r=np.where(moved, phi_r, c.phi_r))


def phase_violation(c: TrCoefficients) -> float:
    """Largest distance of ``phi_r - phi_t`` from {pi/2, 3*pi/2} over active elements."""
    active = (c.beta_t >= ZERO_AMPLITUDE) & (c.beta_r >= ZERO_AMPLITUDE)
    if not np.any(active):
        return 0.0
    _, dist = _nearest_target(c.phi_r - c.phi_t)
    return float(np.max(np.where(active, dist, 0.0)))


def enforce_protocol(cfg: SurfaceConfig, coeffs: TrCoefficients,
                     tol=STRUCT_TOL) -> Union[TrCoefficients, TimeSwitchedCoefficients]:
    """Make a coefficient vector conform to the surface's operating protocol.

    Energy splitting returns the input after checking passivity. Mode
    switching rounds every element to transmission-only or reflection-only
    (ties go to reflection). Time switching returns the transmission-only
    and reflection-only vectors with full amplitude in the active mode.
    """
    if np.ndim(coeffs.beta_t) != 1 or len(coeffs) != cfg.m:
        raise ProtocolMismatch(f"expected {cfg.m} coefficients, got shape {np.shape(coeffs.beta_t)}")
    kind = cfg.protocol.kind
    if kind is ProtocolKind.ENERGY_SPLITTING:
        if not coeffs.is_passive(tol) or np.any(coeffs.beta_t + coeffs.beta_r > 1 + tol):
            raise ProtocolMismatch("energy-splitting coefficients exceed the passive amplitude bound")
        return coeffs
    if kind is ProtocolKind.MODE_SWITCHING:
        return round_to_modes(coeffs)
    if cfg.protocol.ts_fractions is None:
        raise ProtocolMismatch("time-switching protocol requires ts_fractions")
    ones, zeros = np.ones(cfg.m), np.zeros(cfg.m)
    return TimeSwitchedCoefficients(
        transmit=coeffs.replace(beta_t=ones, beta_r=zeros),
        reflect=coeffs.replace(beta_t=zeros, beta_r=ones),
        fractions=cfg.protocol.ts_fractions,
    )


def round_to_modes(coeffs: TrCoefficients) -> TrCoefficients:
    """Send each element to its dominant mode; ``beta_t == beta_r`` goes to reflection."""
    transmit = coeffs.beta_t > coeffs.beta_r
    return coeffs.replace(beta_t=transmit.astype(float), beta_r=(~transmit).astype(float))


def coupled_consistency_check(p: ImpedancePair, tol=STRUCT_TOL) -> bool:
    """Check that a lossless impedance pair yields lossless, coupled coefficients."""
    if not p.lossless_realizable:
        raise NotRealizable(f"impedances must be purely imaginary, got y={p.y}, z={p.z}")
    t, r = coeffs_from_impedance(p)
    if abs(abs(t) ** 2 + abs(r) ** 2 - 1) > tol:
        return False
    if abs(t) < ZERO_AMPLITUDE or abs(r) < ZERO_AMPLITUDE:
        return True
    diff = np.angle(r) - np.angle(t)
    return bool(min(angular_distance(diff, a) for a in _COUPLED_TARGETS) <= tol)
