"""Exact trigonometric-polynomial fields on the 3-torus.

A :class:`TrigField` is a finite sum of ``cos(k.x)`` / ``sin(k.x)`` modes
with integer frequency vectors and scalar or 3-vector coefficients.  All
algebra on these fields (heat flow, Leray projection, differentiation,
advection products) is exact up to floating-point rounding of the
coefficients; no grids are involved until a norm is requested.

Frequencies are stored as canonical representatives of ``{k, -k}`` (first
nonzero entry positive); cosine coefficients are even under the flip and
sine coefficients odd, so every trigonometric polynomial has exactly one
stored form.  Integer frequencies may be arbitrarily large Python ints;
conversions to float are guarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "Frequency",
    "Mode",
    "TrigField",
    "TGridSpec",
    "LinfEstimate",
    "BesovEstimate",
    "heat",
    "leray_project",
    "divergence",
    "gradient",
    "advect",
    "linf_norm",
    "linf_norm_multi",
    "besov_norm",
]

Frequency = tuple[int, int, int]

# Modes whose heat decay exceeds e^{-50} are invisible at double precision
# relative to every advertised tolerance; norms drop them before gridding.
_HEAT_CUTOFF = 50.0

# Default cap on total grid points for L-infinity evaluation.
_GRID_POINT_CAP = 1 << 22


def _canonical(k: Frequency) -> tuple[Frequency, bool]:
    """Return the canonical representative of {k, -k} and whether k flipped."""
    for component in k:
        if component > 0:
            return k, False
        if component < 0:
            return (-k[0], -k[1], -k[2]), True
    return k, False


def _sqnorm(k: Frequency) -> int:
    return k[0] * k[0] + k[1] * k[1] + k[2] * k[2]


def _safe_float(value: int | float) -> float:
    try:
        return float(value)
    except OverflowError:
        return math.inf


class Mode(NamedTuple):
    """One canonical mode: coefficients of cos(freq.x) and sin(freq.x)."""

    freq: Frequency
    cos_coeff: np.ndarray
    sin_coeff: np.ndarray


class LinfEstimate(NamedTuple):
    """Bracket for a supremum norm.

    ``value`` is a grid maximum and hence a lower bound of the true
    supremum; ``upper`` is the coefficient l1 sum (per-mode amplitudes
    combined across components), an upper bound.
    """

    value: float
    upper: float


@dataclass(frozen=True)
class BesovEstimate:
    """Heat-flow characterization of a negative-smoothness norm.

    ``value`` is the grid supremum of ``t^{s/2} ||e^{tD}f||_inf`` (a lower
    bound of the true norm), attained at ``argmax_t``; ``upper`` is the
    matching l1-coefficient bracket.  ``at_endpoint`` flags an argmax on
    the boundary of the scanned window, where the sup may be escaping.
    """

    value: float
    argmax_t: float
    s: float
    at_endpoint: bool
    upper: float


@dataclass(frozen=True)
class TGridSpec:
    """Logarithmic time grid used when scanning heat-flow suprema."""

    n: int = 400
    t_min: float = 1e-8
    t_max: float = 4.0
    refine_rounds: int = 3

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("time grid needs at least two points")
        if not (0.0 < self.t_min < self.t_max):
            raise ValueError("need 0 < t_min < t_max")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be nonnegative")

    def times(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.n)


class TrigField:
    """Immutable trigonometric polynomial with scalar or vector coefficients.

    Parameters
    ----------
    arity : {"scalar", "vector"}
        Scalar fields carry shape-() coefficients, vector fields shape-(3,).
    terms : iterable of (frequency, cos_coeff, sin_coeff)
        Frequencies are integer 3-tuples in any orientation; terms are
        canonicalized and merged.  Exact-zero modes are dropped.
    """

    __slots__ = ("arity", "_modes")

    def __init__(
        self,
        arity: str,
        terms: Iterable[tuple[Frequency, np.ndarray | float, np.ndarray | float]] = (),
    ) -> None:
        if arity not in ("scalar", "vector"):
            raise ValueError(f"unknown arity {arity!r}")
        shape = () if arity == "scalar" else (3,)
        merged: dict[Frequency, list[np.ndarray]] = {}
        for freq, cos_c, sin_c in terms:
            key = (int(freq[0]), int(freq[1]), int(freq[2]))
            cos_arr = np.asarray(cos_c, dtype=float)
            sin_arr = np.asarray(sin_c, dtype=float)
            if cos_arr.shape != shape or sin_arr.shape != shape:
                raise ValueError(
                    f"coefficient shape {cos_arr.shape}/{sin_arr.shape} does not "
                    f"match arity {arity!r}"
                )
            key, flipped = _canonical(key)
            if flipped:
                sin_arr = -sin_arr
            if key == (0, 0, 0):
                # sin(0.x) vanishes identically
                sin_arr = np.zeros(shape)
            slot = merged.get(key)
            if slot is None:
                merged[key] = [cos_arr.copy(), sin_arr.copy()]
            else:
                slot[0] = slot[0] + cos_arr
                slot[1] = slot[1] + sin_arr
        object.__setattr__(self, "arity", arity)
        object.__setattr__(
            self,
            "_modes",
            {
                k: (c, s)
                for k, (c, s) in sorted(merged.items())
                if np.any(c != 0.0) or np.any(s != 0.0)
            },
        )

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("TrigField is immutable")

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, arity: str = "scalar") -> "TrigField":
        return cls(arity)

    @classmethod
    def wave(
        cls,
        freq: Frequency,
        cos_coeff: np.ndarray | float = 0.0,
        sin_coeff: np.ndarray | float = 0.0,
    ) -> "TrigField":
        """Single-mode field; arity inferred from the coefficient shape."""
        arity = "vector" if np.shape(cos_coeff) == (3,) or np.shape(sin_coeff) == (3,) else "scalar"
        shape = (3,) if arity == "vector" else ()
        return cls(
            arity,
            [(freq, np.broadcast_to(np.asarray(cos_coeff, float), shape).copy(),
              np.broadcast_to(np.asarray(sin_coeff, float), shape).copy())],
        )

    # -- inspection -----------------------------------------------------------

    @property
    def modes(self) -> list[Mode]:
        return [Mode(k, c.copy(), s.copy()) for k, (c, s) in self._modes.items()]

    @property
    def n_modes(self) -> int:
        return len(self._modes)

    @property
    def support(self) -> frozenset[Frequency]:
        return frozenset(self._modes)

    def coefficient(self, freq: Frequency) -> tuple[np.ndarray, np.ndarray]:
        """Cos/sin coefficients at the canonical representative of freq."""
        shape = () if self.arity == "scalar" else (3,)
        key, flipped = _canonical((int(freq[0]), int(freq[1]), int(freq[2])))
        pair = self._modes.get(key)
        if pair is None:
            return np.zeros(shape), np.zeros(shape)
        cos_c, sin_c = pair[0].copy(), pair[1].copy()
        return (cos_c, -sin_c) if flipped else (cos_c, sin_c)

    def is_zero(self) -> bool:
        return not self._modes

    def max_axis_freq(self) -> tuple[int, int, int]:
        """Componentwise maximum of |k| over the support (0 for empty)."""
        out = [0, 0, 0]
        for k in self._modes:
            for axis in range(3):
                magnitude = abs(k[axis])
                if magnitude > out[axis]:
                    out[axis] = magnitude
        return out[0], out[1], out[2]

    def l1_coefficients(self) -> float:
        """Sum of per-mode amplitudes, an upper bound for the sup norm."""
        total = 0.0
        for cos_c, sin_c in self._modes.values():
            total += math.sqrt(float(np.sum(cos_c * cos_c) + np.sum(sin_c * sin_c)))
        return total

    # -- linear algebra -------------------------------------------------------

    def _check_compatible(self, other: "TrigField") -> None:
        if not isinstance(other, TrigField):
            raise TypeError("expected a TrigField")
        if other.arity != self.arity:
            raise ValueError("arity mismatch")

    def __add__(self, other: "TrigField") -> "TrigField":
        self._check_compatible(other)
        terms = [(k, c, s) for k, (c, s) in self._modes.items()]
        terms += [(k, c, s) for k, (c, s) in other._modes.items()]
        return TrigField(self.arity, terms)

    def __sub__(self, other: "TrigField") -> "TrigField":
        return self + (-1.0) * other

    def __rmul__(self, scalar: float) -> "TrigField":
        scalar = float(scalar)
        return TrigField(
            self.arity,
            [(k, scalar * c, scalar * s) for k, (c, s) in self._modes.items()],
        )

    def __mul__(self, scalar: float) -> "TrigField":
        return self.__rmul__(scalar)

    def __neg__(self) -> "TrigField":
        return (-1.0) * self

    # -- pointwise evaluation -------------------------------------------------

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at explicit points, shape (n, 3) -> (n,) or (n, 3).

        Frequencies must fit in float64; intended for moderate modes.
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (n, 3)")
        shape = (pts.shape[0],) if self.arity == "scalar" else (pts.shape[0], 3)
        out = np.zeros(shape)
        for k, (cos_c, sin_c) in self._modes.items():
            phase = pts @ np.array([float(k[0]), float(k[1]), float(k[2])])
            if self.arity == "scalar":
                out += float(cos_c) * np.cos(phase) + float(sin_c) * np.sin(phase)
            else:
                out += np.outer(np.cos(phase), cos_c) + np.outer(np.sin(phase), sin_c)
        return out

    def values_on_grid(self, shape: tuple[int, int, int]) -> np.ndarray:
        """Sample on the uniform grid x_j = 2 pi j / n per axis.

        Uses exact integer phase reduction, so arbitrarily large integer
        frequencies are handled without precision loss.  Returns an array
        of shape ``shape`` (scalar) or ``(3, *shape)`` (vector).
        """
        components = _grid_components(self, shape)
        return components[0] if self.arity == "scalar" else components

    def __repr__(self) -> str:
        return f"TrigField(arity={self.arity!r}, n_modes={self.n_modes})"


# -- exact operators ---------------------------------------------------------


def heat(f: TrigField, t: float, prune_below: float = 0.0) -> TrigField:
    """Apply the heat semigroup: multiply each mode by exp(-t |k|^2).

    Modes whose resulting amplitude is at or below ``prune_below`` are
    dropped.  ``t`` must be nonnegative; ``t = 0`` returns the field
    unchanged up to pruning.
    """
    if t < 0:
        raise ValueError("heat flow requires t >= 0")
    terms = []
    for k, (cos_c, sin_c) in f._modes.items():
        if t == 0.0:
            decay = 1.0
        else:
            k2 = _sqnorm(k)
            exponent = t * _safe_float(k2)
            decay = 0.0 if exponent > 745.0 else math.exp(-exponent)
        cos_new = decay * cos_c
        sin_new = decay * sin_c
        amplitude = math.sqrt(float(np.sum(cos_new**2) + np.sum(sin_new**2)))
        if amplitude > prune_below:
            terms.append((k, cos_new, sin_new))
    return TrigField(f.arity, terms)


def _heat_pruned(f: TrigField, t: float) -> TrigField:
    """Heat flow that drops modes with t|k|^2 beyond the double-precision
    visibility cutoff; used internally by the norm scanners."""
    terms = []
    for k, (cos_c, sin_c) in f._modes.items():
        exponent = t * _safe_float(_sqnorm(k))
        if exponent > _HEAT_CUTOFF:
            continue
        decay = math.exp(-exponent)
        terms.append((k, decay * cos_c, decay * sin_c))
    return TrigField(f.arity, terms)


def leray_project(f: TrigField) -> TrigField:
    """Project a vector field onto its divergence-free part, mode by mode.

    Each coefficient v at frequency k maps to v - (v.khat) khat; the zero
    frequency is untouched.  Gradients are annihilated exactly up to
    rounding.
    """
    if f.arity != "vector":
        raise ValueError("Leray projection acts on vector fields")
    terms = []
    for k, (cos_c, sin_c) in f._modes.items():
        if k == (0, 0, 0):
            terms.append((k, cos_c, sin_c))
            continue
        kf = np.array([_safe_float(k[0]), _safe_float(k[1]), _safe_float(k[2])])
        khat = kf / math.sqrt(float(kf @ kf))
        terms.append(
            (k, cos_c - (cos_c @ khat) * khat, sin_c - (sin_c @ khat) * khat)
        )
    return TrigField("vector", terms)


def divergence(f: TrigField) -> TrigField:
    """Exact divergence of a vector field."""
    if f.arity != "vector":
        raise ValueError("divergence acts on vector fields")
    terms = []
    for k, (cos_c, sin_c) in f._modes.items():
        kf = np.array([_safe_float(k[0]), _safe_float(k[1]), _safe_float(k[2])])
        # d/dx_i cos -> -k_i sin, d/dx_i sin -> +k_i cos
        terms.append((k, float(sin_c @ kf), -float(cos_c @ kf)))
    return TrigField("scalar", terms)


def gradient(f: TrigField) -> TrigField | list[TrigField]:
    """Gradient of a scalar field (one vector field) or of a vector field
    (a list of three vector fields, one per component)."""
    if f.arity == "vector":
        return [gradient(component) for component in _components(f)]
    terms = []
    for k, (cos_c, sin_c) in f._modes.items():
        kf = np.array([_safe_float(k[0]), _safe_float(k[1]), _safe_float(k[2])])
        terms.append((k, float(sin_c) * kf, -float(cos_c) * kf))
    return TrigField("vector", terms)


def _components(f: TrigField) -> list[TrigField]:
    return [
        TrigField(
            "scalar",
            [(k, c[i], s[i]) for k, (c, s) in f._modes.items()],
        )
        for i in range(3)
    ]


def _product_terms(
    c1: np.ndarray, s1: np.ndarray, c2: np.ndarray, s2: np.ndarray
) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Coefficients of a mode product at frequencies p+q and p-q.

    Inputs are the cos/sin coefficients of modes at p and q (any shapes
    that broadcast under multiplication, e.g. outer products prepared by
    the caller).  Output order: ((cos+, sin+), (cos-, sin-)).
    """
    plus = ((c1 * c2 - s1 * s2) / 2.0, (s1 * c2 + c1 * s2) / 2.0)
    minus = ((c1 * c2 + s1 * s2) / 2.0, (s1 * c2 - c1 * s2) / 2.0)
    return plus, minus


def advect(u: TrigField, f: TrigField) -> TrigField:
    """Exact advection term u . grad f.

    ``u`` must be a vector field; ``f`` may be scalar or vector (applied
    componentwise).  The result has at most 2 |u| |f| modes.
    """
    if u.arity != "vector":
        raise ValueError("advecting velocity must be a vector field")
    if f.arity == "vector":
        parts = [advect(u, component) for component in _components(f)]
        terms = []
        for k in sorted(set().union(*[p.support for p in parts])):
            cos_c = np.array([float(p.coefficient(k)[0]) for p in parts])
            sin_c = np.array([float(p.coefficient(k)[1]) for p in parts])
            terms.append((k, cos_c, sin_c))
        return TrigField("vector", terms)
    terms = []
    for p, (cu, su) in u._modes.items():
        for q, (cf, sf) in f._modes.items():
            qf = np.array([_safe_float(q[0]), _safe_float(q[1]), _safe_float(q[2])])
            # grad f at q: cos coeff sf*q, sin coeff -cf*q; dot with u mode
            c2, s2 = float(sf) * qf, -float(cf) * qf
            plus, minus = _product_terms(cu, su, c2, s2)
            for sign, (cos_c, sin_c) in ((1, plus), (-1, minus)):
                m = (p[0] + sign * q[0], p[1] + sign * q[1], p[2] + sign * q[2])
                terms.append((m, float(np.sum(cos_c)), float(np.sum(sin_c))))
    return TrigField("scalar", terms)


# -- norms -------------------------------------------------------------------


def _axis_size(max_freq: int) -> int:
    if max_freq == 0:
        return 1
    n = max(16, 4 * max_freq)
    return ((n + 3) // 4) * 4


def _grid_shape(fields: list[TrigField], point_cap: int) -> tuple[int, int, int]:
    max_freqs = [0, 0, 0]
    for f in fields:
        for axis, value in enumerate(f.max_axis_freq()):
            max_freqs[axis] = max(max_freqs[axis], value)
    sizes = [_axis_size(m) for m in max_freqs]
    # shrink the largest axes until the total grid fits the cap; sizes stay
    # multiples of 4 so the result remains a valid lower bound
    while sizes[0] * sizes[1] * sizes[2] > point_cap:
        largest = max(range(3), key=lambda i: sizes[i])
        if sizes[largest] <= 16:
            break
        sizes[largest] = max(16, ((sizes[largest] // 2 + 3) // 4) * 4)
    return sizes[0], sizes[1], sizes[2]


def _grid_components(f: TrigField, shape: tuple[int, int, int]) -> np.ndarray:
    """Sample all components of ``f`` on the uniform grid of ``shape``.

    Phases are reduced modulo the axis length in exact integer arithmetic
    before conversion to float, so huge frequencies stay exact.
    """
    n_comp = 1 if f.arity == "scalar" else 3
    out = np.zeros((n_comp,) + tuple(shape))
    for k, (cos_c, sin_c) in f._modes.items():
        wave = np.ones(shape, dtype=complex)
        for axis in range(3):
            n_axis = shape[axis]
            residue = k[axis] % n_axis
            phases = 2.0 * math.pi * ((residue * np.arange(n_axis)) % n_axis) / n_axis
            exp_axis = np.exp(1j * phases)
            broadcast = [1, 1, 1]
            broadcast[axis] = n_axis
            wave = wave * exp_axis.reshape(broadcast)
        cos_vals, sin_vals = wave.real, wave.imag
        if f.arity == "scalar":
            out[0] += float(cos_c) * cos_vals + float(sin_c) * sin_vals
        else:
            for i in range(3):
                out[i] += cos_c[i] * cos_vals + sin_c[i] * sin_vals
    return out


def linf_norm(f: TrigField, point_cap: int = _GRID_POINT_CAP) -> LinfEstimate:
    """Bracket the supremum norm of a field.

    Returns a grid maximum (lower bound; exact for single-mode fields and
    whenever every frequency divides the axis maximum) together with the
    coefficient l1 upper bound.
    """
    return linf_norm_multi([f], point_cap)


def linf_norm_multi(fields: list[TrigField], point_cap: int = _GRID_POINT_CAP) -> LinfEstimate:
    """Bracket sup_x of the joint Euclidean magnitude of several fields.

    All components of all fields are stacked into one vector before the
    pointwise magnitude; used for gradient norms where nine components
    combine.
    """
    fields = [f for f in fields if not f.is_zero()]
    if not fields:
        return LinfEstimate(0.0, 0.0)
    shape = _grid_shape(fields, point_cap)
    squares = np.zeros(shape)
    for f in fields:
        components = _grid_components(f, shape)
        squares += np.sum(components**2, axis=0)
    lower = math.sqrt(float(squares.max()))
    # sup of the stacked magnitude <= quadrature sum of per-field l1 brackets
    upper = math.sqrt(sum(f.l1_coefficients() ** 2 for f in fields))
    return LinfEstimate(lower, upper)


def besov_norm(
    f: TrigField,
    s: float,
    tgrid: TGridSpec | None = None,
    point_cap: int = _GRID_POINT_CAP,
    scan_slack: float = 0.0,
) -> BesovEstimate:
    """Negative-smoothness norm via the heat-flow characterization.

    Scans ``t^{s/2} ||e^{tD} f||_inf`` over a logarithmic time grid, with
    local refinement around the argmax.  The field must have no zero-mode
    (mean-zero requirement); ``s`` must be positive.  A positive
    ``scan_slack`` stops the scan once every remaining candidate's
    coefficient bound is within that relative slack of the running max;
    the value stays a certified lower bound, short of the sup by at most
    the slack plus the coefficient-bound gap.
    """
    if s <= 0:
        raise ValueError("smoothness s must be positive")
    if scan_slack < 0:
        raise ValueError("scan slack must be nonnegative")
    if tgrid is None:
        tgrid = TGridSpec()
    if f.is_zero():
        return BesovEstimate(0.0, math.nan, s, False, 0.0)
    if (0, 0, 0) in f._modes:
        raise ValueError("field has a nonzero mean; the norm requires mean zero")

    amplitudes = np.array(
        [
            math.sqrt(float(np.sum(c * c) + np.sum(sin * sin)))
            for c, sin in f._modes.values()
        ]
    )
    sqnorms = np.array([min(_safe_float(_sqnorm(k)), 1e300) for k in f._modes])

    def upper_at(ts: np.ndarray) -> np.ndarray:
        exponents = np.outer(ts, sqnorms)
        decays = np.exp(-np.clip(exponents, None, 745.0)) * (exponents <= 745.0)
        return ts ** (s / 2.0) * (decays @ amplitudes)

    best_value = -math.inf
    best_t = math.nan
    bracket = 0.0

    def scan(ts: np.ndarray) -> None:
        nonlocal best_value, best_t, bracket
        uppers = upper_at(ts)
        bracket = max(bracket, float(np.max(uppers)))
        for idx in np.argsort(-uppers):
            if uppers[idx] <= best_value * (1.0 + scan_slack):
                break
            t = float(ts[idx])
            lower = t ** (s / 2.0) * linf_norm(_heat_pruned(f, t), point_cap).value
            if lower > best_value:
                best_value = lower
                best_t = t

    master = tgrid.times()
    scan(master)
    at_endpoint = bool(
        np.isclose(best_t, master[0]) or np.isclose(best_t, master[-1])
    )
    ratio = (tgrid.t_max / tgrid.t_min) ** (1.0 / (tgrid.n - 1))
    for _ in range(tgrid.refine_rounds):
        if at_endpoint:
            break
        local = np.geomspace(best_t / ratio, best_t * ratio, 21)
        scan(local)
        ratio = ratio ** (1.0 / 10.0)
    return BesovEstimate(best_value, best_t, s, at_endpoint, max(bracket, best_value))
