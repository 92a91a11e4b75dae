"""Closed-form energy accounting for information engines and generators.

Energies are returned in absolute units (``kT`` times nats).  Use
:func:`to_bits` to express an energy in units of ``kT ln 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

LN2 = math.log(2.0)

# Beliefs are clamped into [CLAMP, 1 - CLAMP] before they are used as a strategy.
CLAMP = 1e-12


@dataclass(frozen=True)
class ThermalContext:
    kT: float = 1.0

    def __post_init__(self):
        if not (self.kT > 0 and math.isfinite(self.kT)):
            raise ValueError(f"kT must be positive and finite, got {self.kT!r}")


def _check_pair(pair, name, interior=True):
    a, b = float(pair[0]), float(pair[1])
    if abs(a + b - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1, got {a} + {b}")
    lo_ok = (a > 0 and b > 0) if interior else (a >= 0 and b >= 0)
    if not lo_ok:
        raise ValueError(f"{name} components out of range: {(a, b)}")
    return a, b


@dataclass(frozen=True)
class Belief:
    """Probability ``r1`` that the favored outcome occurs."""

    r1: float

    def __post_init__(self):
        if not 0.0 <= self.r1 <= 1.0:
            raise ValueError(f"r1 must lie in [0, 1], got {self.r1}")

    @property
    def r2(self) -> float:
        return 1.0 - self.r1

    @property
    def pair(self) -> tuple[float, float]:
        return (self.r1, self.r2)


class Handedness(Enum):
    FAVORS_0 = 0
    FAVORS_1 = 1


@dataclass(frozen=True)
class EngineConfig:
    """An information-to-energy converter.

    ``prior`` is the environment's partition (P1, P2), ``strategy`` the
    engine's own partition (Q1, Q2).  Index 0 of each pair is the favored
    compartment, i.e. the outcome named by ``handedness``.
    """

    prior: tuple[float, float] = (0.5, 0.5)
    strategy: tuple[float, float] = (0.5, 0.5)
    handedness: Handedness = Handedness.FAVORS_0

    def __post_init__(self):
        object.__setattr__(self, "prior", _check_pair(self.prior, "prior"))
        object.__setattr__(self, "strategy", _check_pair(self.strategy, "strategy"))

    def compartment(self, outcome: int) -> int:
        """Index into prior/strategy for a realized bit."""
        if outcome not in (0, 1):
            raise ValueError(f"outcome must be a bit, got {outcome!r}")
        return 0 if outcome == self.handedness.value else 1


@dataclass(frozen=True)
class BandModel:
    mean_band_length: float
    measurement_period: int
    error_rate: float = 0.0

    def __post_init__(self):
        if self.mean_band_length < 1:
            raise ValueError("mean band length must be >= 1")
        if int(self.measurement_period) != self.measurement_period or self.measurement_period < 1:
            raise ValueError("measurement period must be a positive integer")
        if not 0.0 <= self.error_rate < 1.0:
            raise ValueError("error rate must lie in [0, 1)")


def to_bits(energy: float, ctx: ThermalContext) -> float:
    return energy / (ctx.kT * LN2)


def bit_energy(ctx: ThermalContext) -> float:
    """Work extractable from one perfectly known bit, ``kT ln 2``."""
    return ctx.kT * LN2


def outcome_yield(ctx: ThermalContext, engine: EngineConfig, outcome: int) -> float:
    i = engine.compartment(outcome)
    return ctx.kT * math.log(engine.strategy[i] / engine.prior[i])


def expected_yield(ctx: ThermalContext, engine: EngineConfig, belief: Belief) -> float:
    """Average yield when the favored outcome occurs with probability ``belief.r1``."""
    (p1, p2), (q1, q2) = engine.prior, engine.strategy
    total = 0.0
    for r, q, p in ((belief.r1, q1, p1), (belief.r2, q2, p2)):
        if r > 0:
            total += r * math.log(q / p)
    return ctx.kT * total


def yield_grid(ctx: ThermalContext, belief: Belief, q1, p1) -> np.ndarray:
    """Expected yield over arrays of strategies ``q1`` and priors ``p1`` (broadcast)."""
    q1, p1 = np.asarray(q1, dtype=float), np.asarray(p1, dtype=float)
    r1, r2 = belief.pair
    out = np.zeros(np.broadcast(q1, p1).shape)
    if r1 > 0:
        out = out + r1 * np.log(q1 / p1)
    if r2 > 0:
        out = out + r2 * np.log((1.0 - q1) / (1.0 - p1))
    return ctx.kT * out


def optimal_strategy(belief: Belief) -> tuple[float, float]:
    r1 = min(max(belief.r1, CLAMP), 1.0 - CLAMP)
    return (r1, 1.0 - r1)


def kl_gain(r, p) -> float:
    """Kullback-Leibler divergence I(R|P) in nats, with 0 ln 0 = 0."""
    r1, r2 = _check_pair(r, "r", interior=False)
    p1, p2 = _check_pair(p, "p")
    total = 0.0
    for ri, pi in ((r1, p1), (r2, p2)):
        if ri > 0:
            total += ri * math.log(ri / pi)
    # rounding can push R == P a hair below zero
    return max(total, 0.0)


def binary_entropy(r1: float) -> float:
    """Shannon entropy in nats of a two-outcome distribution."""
    h = 0.0
    for r in (r1, 1.0 - r1):
        if r > 0:
            h -= r * math.log(r)
    return h


def generator_cost(ctx: ThermalContext, belief: Belief) -> float:
    """Minimal work to create a cell whose content is described by ``belief``."""
    return ctx.kT * binary_entropy(belief.r1)


def minimax_value(ctx: ThermalContext, belief: Belief):
    """Saddle value of the yield over strategy (max) and prior (min).

    Returns ``(value, strategy, prior)``; the saddle sits at Q = P = R.
    """
    if not 0.0 < belief.r1 < 1.0:
        raise ValueError("minimax requires an interior belief")
    q = belief.pair
    engine = EngineConfig(prior=q, strategy=q)
    return expected_yield(ctx, engine, belief), q, q


def band_loss(ctx: ThermalContext, model: BandModel) -> float:
    """Loss per band for a swap-and-measure policy with period I."""
    n, i = model.mean_band_length, model.measurement_period
    return (n / i + i / 2.0) * bit_energy(ctx)


def optimal_measurement_period(mean_band_length: float) -> int:
    """Integer period minimizing :func:`band_loss`; ties go to the smaller period."""
    if mean_band_length < 1:
        raise ValueError("mean band length must be >= 1")
    x = math.sqrt(2.0 * mean_band_length)
    candidates = {max(1, math.floor(x)), max(1, math.ceil(x))}
    return min(sorted(candidates), key=lambda i: mean_band_length / i + i / 2.0)


def small_error_loss_rate(eps: float) -> float:
    """Order of the per-bit loss caused by an error fraction ``eps`` (nats)."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    if eps == 0.0:
        return 0.0
    return eps * math.log(1.0 / eps)


def saddle_expansion(ctx: ThermalContext, belief: Belief, p, q) -> float:
    """Quadratic approximation of the yield near Q = P = R.

    ``p`` and ``q`` are perturbation pairs of the prior and strategy; each
    must sum to zero.
    """
    r1, r2 = belief.pair
    p1, p2 = float(p[0]), float(p[1])
    q1, q2 = float(q[0]), float(q[1])
    if abs(p1 + p2) > 1e-12 or abs(q1 + q2) > 1e-12:
        raise ValueError("perturbations must sum to zero")
    for base, d in ((r1, p1), (r2, p2), (r1, q1), (r2, q2)):
        if not 0.0 < base + d < 1.0:
            raise ValueError("perturbed probability leaves (0, 1)")
    return ctx.kT * ((p1 * p1 - q1 * q1) / (2 * r1) + (p2 * p2 - q2 * q2) / (2 * r2))
