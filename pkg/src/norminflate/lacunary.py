"""Lacunary wave construction: frequencies, velocity directions, initial data.

The initial data pair concentrates on a geometric ladder of frequencies
``kbar_i = 2^{i-1} K`` along the third axis.  Density waves sit exactly on
``k_i' = (0, 0, kbar_i)``; velocity waves are shifted by ``eta = (0, 1, 0)``
to ``k_i = k_i' + eta`` and carry the direction ``v_i = (0, 1/2, -1/(2
kbar_i))``, chosen so that ``v_i . k_i = 0`` while ``v_i . k_i' = -1/2``.
Those relations are exact in rational arithmetic and are verified as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fields import Frequency, TrigField, divergence, leray_project

__all__ = [
    "ETA",
    "LacunaryParams",
    "WaveTriple",
    "ConstructionReport",
    "params_from_rule",
    "make_frequencies",
    "make_initial_data",
    "verify_construction",
]

ETA: Frequency = (0, 1, 0)

# Largest ladder frequency we will materialize as a field; beyond this the
# squared magnitude leaves float64 range.
_KBAR_LIMIT = 1 << 500


@dataclass(frozen=True)
class LacunaryParams:
    """Parameters of the construction.

    r : number of waves (>= 1)
    beta : amplitude exponent; the data carry the prefactor r^{-beta}
    K : base frequency of the ladder (integer >= 2)
    nu : inflation-time exponent; the target time is T = r^{-nu}
    delta : small bookkeeping exponent in the remainder bounds, in (0, 0.2]
    s : smoothness magnitude of the negative-order norms (> 0)
    """

    r: int
    beta: float
    K: int
    nu: float
    delta: float = 0.01
    s: float = 0.5

    def __post_init__(self) -> None:
        if not isinstance(self.r, int) or self.r < 1:
            raise ValueError("r must be an integer >= 1")
        if not isinstance(self.K, int) or self.K < 2:
            raise ValueError("K must be an integer >= 2")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if not (0.0 < self.delta <= 0.2):
            raise ValueError("delta must lie in (0, 0.2]")
        if self.s <= 0:
            raise ValueError("s must be positive")
        floor = max(0.0, 0.5 - 0.75 * self.nu)
        if self.beta <= floor:
            raise ValueError(
                f"beta={self.beta} violates beta > max(0, 1/2 - (3/4) nu) = {floor}"
            )

    @property
    def T(self) -> float:
        """Target inflation time r^{-nu}."""
        return float(self.r) ** (-self.nu)

    @property
    def amplitude(self) -> float:
        """Common data prefactor r^{-beta}."""
        return float(self.r) ** (-self.beta)


def params_from_rule(r: int, nu: float = 0.2, delta: float = 0.01, s: float = 0.5) -> LacunaryParams:
    """Parameters from the single-exponent rule.

    ``beta = 1/2 - nu/2`` and ``K = max(2, round(r^{nu/2}))``; the
    inflation time is then ``T = r^{-nu}``.
    """
    beta = 0.5 - nu / 2.0
    K = max(2, round(float(r) ** (nu / 2.0)))
    return LacunaryParams(r=r, beta=beta, K=K, nu=nu, delta=delta, s=s)


@dataclass(frozen=True)
class WaveTriple:
    """One rung of the ladder: density frequency, velocity frequency, direction."""

    index: int
    kbar: int
    kprime: Frequency
    k: Frequency
    v: tuple[Fraction, Fraction, Fraction]

    def v_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.v])

    def k_norm(self) -> float:
        """|k| = sqrt(kbar^2 + 1)."""
        return math.sqrt(float(self.kbar * self.kbar + 1))

    def kprime_norm(self) -> float:
        return float(self.kbar)


def make_frequencies(params: LacunaryParams) -> list[WaveTriple]:
    """Build the r wave triples for the given parameters.

    Raises a parameter error when the top frequency 2^{r-1} K exceeds the
    float-representable envelope (its square must fit in float64 for the
    field algebra downstream).
    """
    top = (1 << (params.r - 1)) * params.K
    if top > _KBAR_LIMIT:
        raise ValueError(
            f"top frequency 2^{params.r - 1}*{params.K} exceeds the materializable "
            f"bound 2^500; use the closed-form evaluators for parameters this large"
        )
    triples = []
    for i in range(1, params.r + 1):
        kbar = (1 << (i - 1)) * params.K
        kprime: Frequency = (0, 0, kbar)
        k: Frequency = (0, 1, kbar)
        v = (Fraction(0), Fraction(1, 2), Fraction(-1, 2 * kbar))
        triples.append(WaveTriple(index=i, kbar=kbar, kprime=kprime, k=k, v=v))
    return triples


def make_initial_data(params: LacunaryParams) -> tuple[TrigField, TrigField]:
    """Initial velocity and density fields.

    u0 = r^{-beta} sum_i |k_i| cos(k_i . x) v_i   (divergence-free)
    rho0 = r^{-beta} sum_i |k_i'| cos(k_i' . x)
    """
    amp = params.amplitude
    u_terms = []
    rho_terms = []
    for triple in make_frequencies(params):
        u_terms.append(
            (triple.k, amp * triple.k_norm() * triple.v_float(), np.zeros(3))
        )
        rho_terms.append((triple.kprime, amp * triple.kprime_norm(), 0.0))
    return TrigField("vector", u_terms), TrigField("scalar", rho_terms)


@dataclass(frozen=True)
class ConstructionReport:
    """Outcome of the exact construction checks.

    The boolean fields are exact rational identities; the deviation field
    reports max_j (|k_j| - |k_j'|) / |k_j'|, which is bounded by
    1/(2 K^2) but never asserted against it.
    """

    orthogonality_exact: bool
    self_pairing_exact: bool
    cross_pairing_exact: bool
    eta_pairing_exact: bool
    divergence_free: bool
    projection_neutral_density: bool
    frequency_deviation: float
    deviation_bound: float

    @property
    def ok(self) -> bool:
        return (
            self.orthogonality_exact
            and self.self_pairing_exact
            and self.cross_pairing_exact
            and self.eta_pairing_exact
            and self.divergence_free
            and self.projection_neutral_density
        )


def _dot(v: tuple[Fraction, Fraction, Fraction], k: Frequency) -> Fraction:
    return v[0] * k[0] + v[1] * k[1] + v[2] * k[2]


def verify_construction(params: LacunaryParams) -> ConstructionReport:
    """Check the construction's exact identities and report the frequency
    deviation of the shifted waves.

    Verified in exact arithmetic: v_i . k_i = 0, v_i . k_i' = -1/2,
    v_i . k_j' = -kbar_j / (2 kbar_i), v_i . eta = 1/2, and the derived
    v_i . k_j = v_i . k_j' + 1/2.  On the field side: u0 is symbolically
    divergence-free and the Leray projection of rho0 e3 vanishes.
    """
    triples = make_frequencies(params)
    orthogonality = all(_dot(t.v, t.k) == 0 for t in triples)
    self_pairing = all(_dot(t.v, t.kprime) == Fraction(-1, 2) for t in triples)
    cross_pairing = all(
        _dot(ti.v, tj.kprime) == Fraction(-tj.kbar, 2 * ti.kbar)
        and _dot(ti.v, tj.k) == _dot(ti.v, tj.kprime) + Fraction(1, 2)
        for ti in triples
        for tj in triples
    )
    eta_pairing = all(_dot(t.v, ETA) == Fraction(1, 2) for t in triples)

    u0, rho0 = make_initial_data(params)
    # the symbolic coefficients vanish; float rounding of 1/(2 kbar) can
    # leave ulp-size residue when K is not a power of two, so compare
    # against the natural coefficient scale
    div_scale = sum(params.amplitude * t.k_norm() ** 2 for t in triples)
    div_u0 = divergence(u0)
    divergence_free = div_u0.is_zero() or div_u0.l1_coefficients() <= 1e-12 * div_scale
    rho0_e3 = TrigField(
        "vector",
        [(m.freq, np.array([0.0, 0.0, float(m.cos_coeff)]),
          np.array([0.0, 0.0, float(m.sin_coeff)])) for m in rho0.modes],
    )
    projected = leray_project(rho0_e3)
    projection_neutral = (
        projected.is_zero()
        or projected.l1_coefficients() <= 1e-12 * rho0.l1_coefficients()
    )

    deviation = max(t.k_norm() / t.kprime_norm() - 1.0 for t in triples)
    return ConstructionReport(
        orthogonality_exact=orthogonality,
        self_pairing_exact=self_pairing,
        cross_pairing_exact=cross_pairing,
        eta_pairing_exact=eta_pairing,
        divergence_free=divergence_free,
        projection_neutral_density=projection_neutral,
        frequency_deviation=deviation,
        deviation_bound=1.0 / (2.0 * params.K * params.K),
    )
