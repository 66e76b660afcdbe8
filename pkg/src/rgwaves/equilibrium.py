"""Formal equilibrium system: the Burgers-type law for h and the
linearly degenerate phi-contact, with their exact Riemann solution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonPositiveHeight
from .model import PhysParams, froude_endstate, sound_speed_array


@dataclass(frozen=True)
class EquilibriumState:
    h: float
    phi: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise NonPositiveHeight(f"height must be positive, got {self.h}")


def _positive(h):
    if np.any(~(np.asarray(h) > 0)):
        raise NonPositiveHeight("height must be positive")


def u_of_h(h, p: PhysParams):
    _positive(h)
    return np.sqrt(p.g_parallel * h / p.c_f)


def q_of_h(h, p: PhysParams):
    _positive(h)
    return np.sqrt(p.g_parallel * h ** 3 / p.c_f)


def alpha_star(h, p: PhysParams):
    """Equilibrium characteristic speed dq/dh = 1.5 u(h)."""
    return 1.5 * u_of_h(h, p)


def h_of_alpha_star(speed, p: PhysParams):
    """Inverse of alpha_star; used inside rarefaction fans."""
    s = np.asarray(speed, dtype=float)
    return p.c_f * (2.0 * s / 3.0) ** 2 / p.g_parallel


@dataclass(frozen=True)
class Shock:
    speed: float


@dataclass(frozen=True)
class Rarefaction:
    left_edge_speed: float
    right_edge_speed: float


@dataclass(frozen=True)
class EquilibriumRiemannSolution:
    left: EquilibriumState
    right: EquilibriumState
    contact_speed: float
    second_wave: Optional[object]  # Shock, Rarefaction, or None if h_L == h_R
    intermediate_state: EquilibriumState
    params: PhysParams

    @property
    def is_shock(self):
        return isinstance(self.second_wave, Shock)

    def wave_speeds(self):
        if self.second_wave is None:
            return (self.contact_speed,)
        if self.is_shock:
            return (self.contact_speed, self.second_wave.speed)
        return (self.contact_speed, self.second_wave.left_edge_speed,
                self.second_wave.right_edge_speed)

    def rarefaction_height(self, xi):
        """h(x/t) inside the fan, by inverting alpha_star exactly."""
        return h_of_alpha_star(xi, self.params)

    def sample(self, xi):
        """(h, phi) of the self-similar solution at xi = x/t."""
        xi = np.asarray(xi, dtype=float)
        hL, hR = self.left.h, self.right.h
        h = np.full_like(xi, hL)
        phi = np.where(xi < self.contact_speed, self.left.phi, self.right.phi)
        wave = self.second_wave
        if isinstance(wave, Shock):
            h = np.where(xi < wave.speed, hL, hR)
        elif isinstance(wave, Rarefaction):
            fan = self.rarefaction_height(np.clip(
                xi, wave.left_edge_speed, wave.right_edge_speed))
            h = np.where(xi <= wave.left_edge_speed, hL,
                         np.where(xi >= wave.right_edge_speed, hR, fan))
        return h, phi


def riemann_solve(left: EquilibriumState, right: EquilibriumState,
                  p: PhysParams) -> EquilibriumRiemannSolution:
    """Contact in phi at u(h_L), then a shock (h_L > h_R) or rarefaction."""
    hL, hR = left.h, right.h
    contact = float(u_of_h(hL, p))
    if hL == hR:
        wave = None
    elif hL > hR:
        speed = (q_of_h(hR, p) - q_of_h(hL, p)) / (hR - hL)
        wave = Shock(float(speed))
    else:
        wave = Rarefaction(float(alpha_star(hL, p)), float(alpha_star(hR, p)))
    return EquilibriumRiemannSolution(
        left=left, right=right, contact_speed=contact, second_wave=wave,
        intermediate_state=EquilibriumState(hL, right.phi), params=p)


def subcharacteristic_check(h0, phi0, p: PhysParams) -> bool:
    """True iff U0 - a < alpha_* < U0 + a at the uniform flow (h0, phi0)."""
    u0 = u_of_h(h0, p)
    a = sound_speed_array(h0, phi0, p)
    ast = alpha_star(h0, p)
    return bool(u0 - a < ast < u0 + a)


def subcharacteristic_via_froude(h0, phi0, p: PhysParams) -> bool:
    return bool(froude_endstate(h0, phi0, p) < 2.0)
