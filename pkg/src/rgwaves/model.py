"""State spaces, constitutive laws, fluxes and sources of the 4x4 RG system.

Conserved variables are ``(h, hU, hE, h*phi)`` with total energy
``E = U**2/2 + e`` and internal energy ``e = (g' h + (Phi + phi) h**2) / 2``.
Every function accepts scalars or numpy arrays (states stacked along the
first axis for the ``*_array`` helpers), so the finite-volume solver uses
the same formulas as the scalar API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ImaginarySoundSpeed,
    NegativeEnstrophy,
    NonPositiveHeight,
    ZeroEntropy,
)

# Enstrophies recovered from conserved data carry round-off; this much
# negativity is tolerated when validating a primitive state.
ENSTROPHY_TOL = 1e-12


@dataclass(frozen=True)
class PhysParams:
    """Gravity split and friction coefficients.

    g_perp is g*cos(theta), g_parallel is g*sin(theta); c_f is the Chezy
    coefficient and c_t the turbulent coefficient.
    """

    g_perp: float
    g_parallel: float
    c_f: float
    c_t: float = 0.0

    def __post_init__(self):
        if not self.g_perp > 0:
            raise ValueError(f"g_perp must be positive, got {self.g_perp}")
        if not self.g_parallel > 0:
            raise ValueError(f"g_parallel must be positive, got {self.g_parallel}")
        if not self.c_f > 0:
            raise ValueError(f"c_f must be positive, got {self.c_f}")
        if not self.c_t >= 0:
            raise ValueError(f"c_t must be non-negative, got {self.c_t}")

    @classmethod
    def from_angle(cls, g: float, theta: float, c_f: float, c_t: float = 0.0):
        return cls(g * np.cos(theta), g * np.sin(theta), c_f, c_t)

    def equilibrium_velocity(self, h):
        """Uniform-flow velocity sqrt(g_parallel h / c_f)."""
        return np.sqrt(self.g_parallel * np.asarray(h, dtype=float) / self.c_f)

    def equilibrium_height(self, c):
        """Height h0 = c_f c^2 / g_parallel of the uniform flow moving at c."""
        return self.c_f * c * c / self.g_parallel

    def to_dict(self):
        return {"g_perp": self.g_perp, "g_parallel": self.g_parallel,
                "c_f": self.c_f, "c_t": self.c_t}


def _check_height(h):
    if np.any(~(np.asarray(h) > 0)):
        raise NonPositiveHeight(f"height must be positive, got min {np.min(h)!r}")


@dataclass(frozen=True)
class PrimitiveState:
    """(h, U, Phi, phi); fields may be floats or equally shaped arrays."""

    h: float
    u: float
    phi_large: float = 0.0
    phi_small: float = 0.0

    def __post_init__(self):
        _check_height(self.h)
        if np.any(np.asarray(self.phi_large) < -ENSTROPHY_TOL) or np.any(
            np.asarray(self.phi_small) < -ENSTROPHY_TOL
        ):
            raise NegativeEnstrophy("enstrophies must be non-negative")

    def as_array(self):
        return np.array(np.broadcast_arrays(
            *(np.asarray(v, dtype=float) for v in
              (self.h, self.u, self.phi_large, self.phi_small))))

    @property
    def total_enstrophy(self):
        return self.phi_large + self.phi_small


@dataclass(frozen=True)
class ConservedState:
    """(h, hU, hE, h*phi)."""

    q1: float
    q2: float
    q3: float
    q4: float

    def __post_init__(self):
        _check_height(self.q1)

    def as_array(self):
        return np.array(np.broadcast_arrays(
            *(np.asarray(v, dtype=float) for v in
              (self.q1, self.q2, self.q3, self.q4))))

    @classmethod
    def from_array(cls, q):
        q = np.asarray(q, dtype=float)
        return cls(*(q[i] if q.ndim > 1 else float(q[i]) for i in range(4)))


# ---------------------------------------------------------------------------
# array-level kernels; W = (h, U, Phi, phi), Q = (h, hU, hE, h phi)
# ---------------------------------------------------------------------------

def internal_energy(h, total_enstrophy, p: PhysParams):
    return 0.5 * (p.g_perp * h + total_enstrophy * h * h)


def pressure(h, total_enstrophy, p: PhysParams):
    return 0.5 * p.g_perp * h * h + total_enstrophy * h ** 3


def conserved_from_primitive(W, p: PhysParams):
    h, u, Phi, phi = W
    e = internal_energy(h, Phi + phi, p)
    return np.array([h, h * u, h * (0.5 * u * u + e), h * phi])


def primitive_from_conserved(Q, p: PhysParams):
    h = Q[0]
    u = Q[1] / h
    e = Q[2] / h - 0.5 * u * u
    phi = Q[3] / h
    Phi = (2.0 * e - p.g_perp * h) / (h * h) - phi
    return np.array([h, u, Phi, phi])


def flux_array(Q, p: PhysParams, W=None):
    if W is None:
        W = primitive_from_conserved(Q, p)
    h, u, Phi, phi = W
    pr = pressure(h, Phi + phi, p)
    return np.array([Q[1], Q[1] * u + pr, (Q[2] + pr) * u, Q[3] * u])


def friction_coefficient(Phi, phi, p: PhysParams, noise=0.0):
    """Mixed friction C; equals c_f where Phi + phi vanishes.

    ``noise`` is the round-off floor of Phi: values within it count as zero,
    otherwise a Phi of -1e-14 with phi = 0 would switch C to c_t.
    """
    Phi = np.where(np.abs(Phi) <= noise, 0.0, Phi)
    S = np.asarray(Phi + phi, dtype=float)
    safe = np.where(S == 0.0, 1.0, S)
    C = (p.c_f * phi + p.c_t * Phi) / safe
    return np.where(S == 0.0, p.c_f, C)


def enstrophy_noise(Q, W, p: PhysParams):
    """Round-off floor of Phi recovered from conserved variables."""
    h, u = W[0], W[1]
    scale = 2.0 * np.abs(Q[2]) / h + u * u + p.g_perp * h
    return 16.0 * np.finfo(float).eps * scale / (h * h)


def source_array(Q, p: PhysParams, W=None):
    if W is None:
        W = primitive_from_conserved(Q, p)
    h, u, Phi, phi = W
    C = friction_coefficient(Phi, phi, p, enstrophy_noise(Q, W, p))
    drive = p.g_parallel * h
    mom = drive - C * np.abs(u) * u
    ener = (drive - p.c_f * u * np.abs(u)) * u
    zero = np.zeros_like(mom)
    return np.array([zero, mom, ener, zero])


def sound_speed_array(h, total_enstrophy, p: PhysParams):
    rad = p.g_perp * h + 3.0 * total_enstrophy * h * h
    return np.sqrt(np.maximum(rad, 0.0))


# ---------------------------------------------------------------------------
# state-level API
# ---------------------------------------------------------------------------

def to_conserved(s: PrimitiveState, p: PhysParams) -> ConservedState:
    return ConservedState.from_array(conserved_from_primitive(s.as_array(), p))


def to_primitive(q: ConservedState, p: PhysParams) -> PrimitiveState:
    h, u, Phi, phi = primitive_from_conserved(q.as_array(), p)
    if np.ndim(h) == 0:
        h, u, Phi, phi = float(h), float(u), float(Phi), float(phi)
    return PrimitiveState(h, u, Phi, phi)


def _as_conserved_array(q):
    if isinstance(q, ConservedState):
        return q.as_array()
    Q = np.asarray(q, dtype=float)
    _check_height(Q[0])
    return Q


def flux(q, p: PhysParams):
    """Physical flux (hU, hU^2 + p, hUE + Up, hU phi)."""
    return flux_array(_as_conserved_array(q), p)


def source(q, p: PhysParams):
    """Zero-order forcing (0, g_par h - C|U|U, (g_par h - c_f U|U|)U, 0)."""
    return source_array(_as_conserved_array(q), p)


def sound_speed(s: PrimitiveState, p: PhysParams):
    """sqrt(g' h + 3 (Phi + phi) h^2)."""
    rad = p.g_perp * s.h + 3.0 * s.total_enstrophy * s.h ** 2
    if np.any(np.asarray(rad) <= 0):
        raise ImaginarySoundSpeed(f"radicand {np.min(rad)!r} is not positive")
    return np.sqrt(rad)


def sound_speed_from_energy(s: PrimitiveState, p: PhysParams):
    """Equivalent form sqrt(6e - 2 g' h) of the sound speed."""
    e = internal_energy(s.h, s.total_enstrophy, p)
    rad = 6.0 * e - 2.0 * p.g_perp * s.h
    if np.any(np.asarray(rad) <= 0):
        raise ImaginarySoundSpeed(f"radicand {np.min(rad)!r} is not positive")
    return np.sqrt(rad)


def characteristics(s: PrimitiveState, p: PhysParams):
    """Ordered characteristic speeds (U - a, U, U, U + a)."""
    a = sound_speed(s, p)
    return (s.u - a, s.u, s.u, s.u + a)


def entropy(s: PrimitiveState):
    """Specific entropy S = (2e - g'h)/h^2, i.e. the total enstrophy."""
    return s.phi_large + s.phi_small


def entropy_production(s: PrimitiveState, p: PhysParams):
    """Rate dS/dt along particle paths forced by the friction terms.

    Combining the energy balance with U times the momentum balance gives
    h^3/2 dS/dt = (C - c_f)|U|^3, hence
    dS/dt = 2 (1 - phi/S) (c_t - c_f) |U|^3 / h^3.
    """
    S = entropy(s)
    if np.any(np.asarray(S) == 0):
        raise ZeroEntropy("entropy production undefined at S = 0")
    return 2.0 * (1.0 - s.phi_small / S) * (p.c_t - p.c_f) * np.abs(s.u) ** 3 / s.h ** 3


def froude(s: PrimitiveState, p: PhysParams):
    """Local Froude number U / a."""
    return s.u / sound_speed(s, p)


def froude_endstate(h0, phi0, p: PhysParams):
    """Froude number of the uniform flow of height h0 and enstrophy phi0."""
    return np.sqrt(p.g_parallel / (p.c_f * (p.g_perp + 3.0 * h0 * phi0)))
