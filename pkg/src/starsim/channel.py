"""Geometry-aware channel generation for STAR-surface links.

Conventions: ``g`` has shape ``(M, N)`` (base-station antenna ``n`` to
element ``m``), ``h`` has shape ``(K, M)`` (element to user) and ``d`` has
shape ``(K, N)`` (direct base-station to user link). A user ``k`` receives
``a_k @ x`` where ``a_k = d_k + sum_m h_km c_m g_m`` and ``c_m`` is the
element's coefficient on that user's side.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.constants import speed_of_light

from .core import SurfaceConfig, TimeSwitchedCoefficients, TrCoefficients
from .errors import InvalidWavelength, LengthMismatch

__all__ = [
    "Side", "LinkGeometry", "Deployment", "FadingParams", "ChannelRealization",
    "wavelength", "rayleigh_distance", "far_field_links", "near_field_links",
    "effective_channel", "effective_channels", "infer_side",
]


class Side(enum.Enum):
    TRANSMISSION = "transmission"
    REFLECTION = "reflection"


def wavelength(frequency_hz: float) -> float:
    return speed_of_light / frequency_hz


def rayleigh_distance(l: float, lam: float) -> float:
    """Near/far-field boundary ``2 L^2 / lambda`` of an aperture of size ``l``."""
    if not lam > 0:
        raise InvalidWavelength(f"wavelength must be positive, got {lam}")
    if l < 0:
        raise ValueError(f"aperture size must be nonnegative, got {l}")
    return 2.0 * l ** 2 / lam


def infer_side(surface: SurfaceConfig, position) -> Side:
    offset = np.dot(np.asarray(position, dtype=float) - surface.center, surface.normal)
    if offset == 0:
        raise ValueError(f"position {position} lies in the surface plane")
    return Side.TRANSMISSION if offset > 0 else Side.REFLECTION


@dataclass(frozen=True)
class LinkGeometry:
    bs_position: Tuple[float, float, float]
    user_position: Tuple[float, float, float]
    side: Side

    def __post_init__(self):
        object.__setattr__(self, "bs_position", tuple(float(v) for v in self.bs_position))
        object.__setattr__(self, "user_position", tuple(float(v) for v in self.user_position))
        object.__setattr__(self, "side", Side(self.side))


@dataclass(frozen=True)
class Deployment:
    """A surface, a base station and the users it serves.

    Base-station antennas form a uniform linear array along ``z`` centred at
    the base-station position (half-wavelength spacing unless given).
    """

    surface: SurfaceConfig
    links: Tuple[LinkGeometry, ...]
    n_bs_antennas: int = 1
    bs_antenna_spacing: Optional[float] = None

    def __post_init__(self):
        links = tuple(self.links)
        object.__setattr__(self, "links", links)
        if not links:
            raise ValueError("a deployment needs at least one user link")
        if self.n_bs_antennas < 1:
            raise ValueError("n_bs_antennas must be positive")
        bs = {link.bs_position for link in links}
        if len(bs) != 1:
            raise ValueError("all links must share one base-station position")
        if infer_side(self.surface, links[0].bs_position) is not Side.REFLECTION:
            raise ValueError("the base station must lie on the reflection (-normal) side")
        for k, link in enumerate(links):
            actual = infer_side(self.surface, link.user_position)
            if actual is not link.side:
                raise ValueError(
                    f"user {k} at {link.user_position} is on the {actual.value} side, "
                    f"not {link.side.value}")

    @property
    def bs_position(self) -> np.ndarray:
        return np.asarray(self.links[0].bs_position)

    @property
    def sides(self) -> Tuple[Side, ...]:
        return tuple(link.side for link in self.links)

    def bs_antenna_offsets(self, lam: float) -> np.ndarray:
        spacing = lam / 2 if self.bs_antenna_spacing is None else self.bs_antenna_spacing
        z = (np.arange(self.n_bs_antennas) - (self.n_bs_antennas - 1) / 2) * spacing
        return np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=1)


@dataclass(frozen=True)
class FadingParams:
    """Large- and small-scale fading parameters (linear units)."""

    carrier_wavelength: float
    rician_k: float = 3.0
    pathloss_exponent_bs: float = 2.0
    pathloss_exponent_user: float = 2.0
    reference_gain: float = 1e-3
    direct_link: bool = False
    pathloss_exponent_direct: float = 3.0

    def __post_init__(self):
        if not self.carrier_wavelength > 0:
            raise InvalidWavelength(f"wavelength must be positive, got {self.carrier_wavelength}")
        if not self.rician_k >= 0:
            raise ValueError(f"rician_k must be >= 0, got {self.rician_k}")
        if not self.reference_gain > 0:
            raise ValueError("reference_gain must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    g: np.ndarray
    h: np.ndarray
    d: np.ndarray
    sides: Tuple[Side, ...]

    def __post_init__(self):
        g = np.array(self.g, dtype=complex)
        if g.ndim == 1:
            g = g[:, None]
        h = np.atleast_2d(np.array(self.h, dtype=complex))
        d = np.array(self.d, dtype=complex).reshape(h.shape[0], -1)
        sides = tuple(Side(s) for s in self.sides)
        if h.shape[1] != g.shape[0]:
            raise LengthMismatch(f"h has {h.shape[1]} elements, g has {g.shape[0]}")
        if d.shape != (h.shape[0], g.shape[1]):
            raise LengthMismatch(f"d has shape {d.shape}, expected {(h.shape[0], g.shape[1])}")
        if len(sides) != h.shape[0]:
            raise LengthMismatch("one side per user is required")
        for name, arr in (("g", g), ("h", h), ("d", d)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sides", sides)

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.g.shape[1]

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    def user_on(self, side: Side) -> int:
        return self.sides.index(Side(side))

    @property
    def h_t(self) -> np.ndarray:
        return self.h[self.user_on(Side.TRANSMISSION)]

    @property
    def h_r(self) -> np.ndarray:
        return self.h[self.user_on(Side.REFLECTION)]

    @property
    def d_direct(self) -> np.ndarray:
        return self.d

    def side_mask(self) -> np.ndarray:
        """Boolean per user, True for transmission-side users."""
        return np.array([s is Side.TRANSMISSION for s in self.sides])


def _rician(los, nlos, k):
    if math.isinf(k):
        return los
    return np.sqrt(k / (k + 1)) * los + np.sqrt(1 / (k + 1)) * nlos


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _draw_nlos(rng, m, n, k):
    # fixed draw order keeps far- and near-field realisations on one stream
    g = _cn(rng, (m, n))
    h = _cn(rng, (k, m))
    d = _cn(rng, (k, n))
    return g, h, d


def _far_hop(src_c, src_off, dst_c, dst_off, lam):
    """Plane-wave path lengths between two arrays, shape (n_dst, n_src)."""
    vec = dst_c - src_c
    dist = np.linalg.norm(vec)
    u = vec / dist
    length = dist + (dst_off @ u)[:, None] - (src_off @ u)[None, :]
    return dist, np.exp(-2j * np.pi * length / lam)


def _near_hop(src, dst, lam):
    dist = np.linalg.norm(dst[:, None, :] - src[None, :, :], axis=-1)
    return dist, np.exp(-2j * np.pi * dist / lam)


def _check_far_field(dep: Deployment, lam: float):
    boundary = rayleigh_distance(dep.surface.largest_dimension, lam)
    center = dep.surface.center
    dists = [np.linalg.norm(dep.bs_position - center)]
    dists += [np.linalg.norm(np.asarray(link.user_position) - center) for link in dep.links]
    if min(dists) <= boundary:
        warnings.warn(
            f"link distance {min(dists):.3g} m is inside the Rayleigh distance "
            f"{boundary:.3g} m; far-field model may be inaccurate", RuntimeWarning, stacklevel=3)


def far_field_links(dep: Deployment, fading: FadingParams, seed: int) -> ChannelRealization:
    """Far-field cascaded channels with per-element Rician fading.

    Every hop has amplitude ``sqrt(reference_gain) * d**(-exponent/2)`` at
    the array-centre distance and a plane-wave line-of-sight phase profile.
    """
    lam = fading.carrier_wavelength
    _check_far_field(dep, lam)
    rng = np.random.default_rng(seed)
    surf = dep.surface
    m, n, k = surf.m, dep.n_bs_antennas, len(dep.links)
    g_nlos, h_nlos, d_nlos = _draw_nlos(rng, m, n, k)

    s_c = surf.center
    s_off = surf.positions - s_c
    b_c = dep.bs_position
    b_off = dep.bs_antenna_offsets(lam)
    sq = np.sqrt(fading.reference_gain)

    d1, g_los = _far_hop(b_c, b_off, s_c, s_off, lam)
    g = sq * d1 ** (-fading.pathloss_exponent_bs / 2) * _rician(g_los, g_nlos, fading.rician_k)

    h = np.empty((k, m), dtype=complex)
    d = np.zeros((k, n), dtype=complex)
    for i, link in enumerate(dep.links):
        u = np.asarray(link.user_position)
        d2, los = _far_hop(s_c, s_off, u, np.zeros((1, 3)), lam)
        h[i] = sq * d2 ** (-fading.pathloss_exponent_user / 2) * _rician(los[0], h_nlos[i], fading.rician_k)
        if fading.direct_link:
            d0, los = _far_hop(b_c, b_off, u, np.zeros((1, 3)), lam)
            d[i] = sq * d0 ** (-fading.pathloss_exponent_direct / 2) * _rician(los[0], d_nlos[i], fading.rician_k)
    return ChannelRealization(g, h, d, dep.sides)


def near_field_links(dep: Deployment, fading: FadingParams, seed: int) -> ChannelRealization:
    """Near-field channels built from every element's own distances.

    Amplitude and phase of each element link use the exact element-to-node
    distance; no plane-wave approximation is made.
    """
    lam = fading.carrier_wavelength
    rng = np.random.default_rng(seed)
    surf = dep.surface
    m, n, k = surf.m, dep.n_bs_antennas, len(dep.links)
    g_nlos, h_nlos, d_nlos = _draw_nlos(rng, m, n, k)

    ants = dep.bs_position + dep.bs_antenna_offsets(lam)
    sq = np.sqrt(fading.reference_gain)

    d1, g_los = _near_hop(ants, surf.positions, lam)
    g = sq * d1 ** (-fading.pathloss_exponent_bs / 2) * _rician(g_los, g_nlos, fading.rician_k)

    h = np.empty((k, m), dtype=complex)
    d = np.zeros((k, n), dtype=complex)
    for i, link in enumerate(dep.links):
        u = np.asarray(link.user_position)[None, :]
        d2, los = _near_hop(surf.positions, u, lam)
        h[i] = sq * d2[0] ** (-fading.pathloss_exponent_user / 2) * _rician(los[0], h_nlos[i], fading.rician_k)
        if fading.direct_link:
            d0, los = _near_hop(ants, u, lam)
            d[i] = sq * d0[0] ** (-fading.pathloss_exponent_direct / 2) * _rician(los[0], d_nlos[i], fading.rician_k)
    return ChannelRealization(g, h, d, dep.sides)


def _user_coeffs(real: ChannelRealization, coeffs, user: int) -> np.ndarray:
    side = real.sides[user]
    if isinstance(coeffs, TimeSwitchedCoefficients):
        raise TypeError("pass one slot of time-switched coefficients at a time")
    c = coeffs.t if side is Side.TRANSMISSION else coeffs.r
    c = np.atleast_1d(c)
    if c.shape[0] != real.m:
        raise LengthMismatch(f"{c.shape[0]} coefficients for a {real.m}-element surface")
    return c


def effective_channel(real: ChannelRealization, coeffs: TrCoefficients, user=0) -> np.ndarray:
    """End-to-end channel row ``d_k + sum_m h_km c_m g_m`` of one user.

    ``user`` is a user index or a :class:`Side` (first user on that side).
    Returns an array of length ``n_antennas``.
    """
    if isinstance(user, (Side, str)):
        user = real.user_on(Side(user))
    c = _user_coeffs(real, coeffs, user)
    return real.d[user] + (real.h[user] * c) @ real.g


def effective_channels(real: ChannelRealization, coeffs: TrCoefficients) -> np.ndarray:
    """Effective channel rows of every user, shape ``(K, N)``."""
    mask = real.side_mask()[:, None]
    c = np.where(mask, np.atleast_1d(coeffs.t)[None, :], np.atleast_1d(coeffs.r)[None, :])
    if c.shape[1] != real.m:
        raise LengthMismatch(f"{c.shape[1]} coefficients for a {real.m}-element surface")
    return real.d + (real.h * c) @ real.g
