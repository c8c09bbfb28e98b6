"""Exact trigonometric field algebra: construction, operators, norms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from norminflate.fields import (
    BesovEstimate,
    TGridSpec,
    TrigField,
    advect,
    besov_norm,
    divergence,
    gradient,
    heat,
    leray_project,
    linf_norm,
    linf_norm_multi,
)

RNG = np.random.default_rng(7)


def random_points(n: int = 100) -> np.ndarray:
    return RNG.uniform(0.0, 2.0 * math.pi, size=(n, 3))


def random_field(arity: str, n_modes: int = 3, kmax: int = 4) -> TrigField:
    terms = []
    for _ in range(n_modes):
        k = tuple(int(x) for x in RNG.integers(-kmax, kmax + 1, size=3))
        if k == (0, 0, 0):
            k = (1, 0, 0)
        if arity == "vector":
            terms.append((k, RNG.normal(size=3), RNG.normal(size=3)))
        else:
            terms.append((k, RNG.normal(), RNG.normal()))
    return TrigField(arity, terms)


small_coeff = st.floats(
    min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False
)
small_freq = st.tuples(
    st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4)
).filter(lambda k: k != (0, 0, 0))


@st.composite
def scalar_fields(draw):
    n = draw(st.integers(1, 3))
    terms = [
        (draw(small_freq), draw(small_coeff), draw(small_coeff)) for _ in range(n)
    ]
    return TrigField("scalar", terms)


class TestTrigFieldConstruction:
    def test_unknown_arity(self):
        with pytest.raises(ValueError, match="unknown arity"):
            TrigField("tensor")

    def test_coefficient_shape_mismatch(self):
        with pytest.raises(ValueError, match="does not match arity"):
            TrigField("scalar", [((0, 0, 1), np.ones(3), np.zeros(3))])

    def test_opposite_frequencies_merge(self):
        f = TrigField(
            "scalar", [((0, 0, 2), 1.0, 0.5), ((0, 0, -2), 1.0, 0.5)]
        )
        assert f.n_modes == 1
        cos_c, sin_c = f.coefficient((0, 0, 2))
        # cos is even; the sin parts cancel after the sign flip
        assert float(cos_c) == 2.0
        assert float(sin_c) == 0.0

    def test_canonical_lookup_flips_sin(self):
        f = TrigField("scalar", [((0, 0, 2), 1.0, 0.5)])
        cos_c, sin_c = f.coefficient((0, 0, -2))
        assert float(cos_c) == 1.0
        assert float(sin_c) == -0.5

    def test_exact_zero_modes_dropped(self):
        f = TrigField("scalar", [((0, 1, 0), 1.0, 0.0), ((0, 1, 0), -1.0, 0.0)])
        assert f.is_zero()

    def test_zero_frequency_sin_vanishes(self):
        f = TrigField("scalar", [((0, 0, 0), 2.0, 3.0)])
        cos_c, sin_c = f.coefficient((0, 0, 0))
        assert float(cos_c) == 2.0
        assert float(sin_c) == 0.0

    def test_immutable(self):
        f = TrigField.zero()
        with pytest.raises(AttributeError, match="immutable"):
            f.arity = "vector"

    def test_arity_mismatch_add(self):
        with pytest.raises(ValueError, match="arity mismatch"):
            TrigField.zero("scalar") + TrigField.zero("vector")

    def test_linear_ops_preserve_function(self):
        f = random_field("scalar")
        g = random_field("scalar")
        pts = random_points()
        combo = 2.0 * f - 0.5 * g
        expected = 2.0 * f.evaluate(pts) - 0.5 * g.evaluate(pts)
        np.testing.assert_allclose(combo.evaluate(pts), expected, atol=1e-10)


class TestHeat:
    def test_identity_at_zero(self):
        f = random_field("vector")
        g = heat(f, 0.0)
        assert g.support == f.support
        for k in f.support:
            np.testing.assert_array_equal(g.coefficient(k)[0], f.coefficient(k)[0])

    def test_single_mode_decay(self):
        f = TrigField.wave((0, 1, 2), cos_coeff=1.0)
        g = heat(f, 0.2)
        cos_c, _ = g.coefficient((0, 1, 2))
        assert math.isclose(float(cos_c), math.exp(-1.0), rel_tol=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError, match="requires t >= 0"):
            heat(TrigField.zero(), -0.1)

    @settings(max_examples=25, deadline=None)
    @given(
        f=scalar_fields(),
        t1=st.floats(0.0, 2.0, allow_nan=False),
        t2=st.floats(0.0, 2.0, allow_nan=False),
    )
    def test_semigroup(self, f, t1, t2):
        lhs = heat(heat(f, t1), t2)
        rhs = heat(f, t1 + t2)
        assert lhs.support == rhs.support
        for k in rhs.support:
            a = float(lhs.coefficient(k)[0])
            b = float(rhs.coefficient(k)[0])
            assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-300)

    def test_pruning_drops_small_modes(self):
        f = TrigField.wave((0, 0, 8), cos_coeff=1.0)
        assert heat(f, 1.0, prune_below=1e-3).is_zero()


class TestLerayProjection:
    def test_divergence_free_unchanged(self):
        f = TrigField.wave((0, 1, 4), cos_coeff=np.array([0.0, 4.0, -1.0]))
        g = leray_project(f)
        np.testing.assert_allclose(
            g.coefficient((0, 1, 4))[0], [0.0, 4.0, -1.0], atol=1e-12
        )

    def test_gradient_annihilated(self):
        k = (1, 2, -2)
        f = TrigField.wave(k, sin_coeff=np.array(k, dtype=float))
        assert leray_project(f).l1_coefficients() < 1e-12

    def test_random_gradients_annihilated(self):
        for _ in range(5):
            q = random_field("scalar")
            g = leray_project(gradient(q))
            assert g.l1_coefficients() <= 1e-12 * max(q.l1_coefficients(), 1.0)

    def test_idempotent(self):
        f = random_field("vector")
        once = leray_project(f)
        twice = leray_project(once)
        for k in once.support:
            np.testing.assert_allclose(
                twice.coefficient(k)[0], once.coefficient(k)[0], atol=1e-12
            )

    def test_divergence_symbolically_zero(self):
        f = random_field("vector")
        assert divergence(leray_project(f)).l1_coefficients() < 1e-12

    def test_scalar_input_rejected(self):
        with pytest.raises(ValueError, match="vector fields"):
            leray_project(random_field("scalar"))

    def test_zero_frequency_untouched(self):
        f = TrigField("vector", [((0, 0, 0), np.array([1.0, 2.0, 3.0]), np.zeros(3))])
        np.testing.assert_array_equal(
            leray_project(f).coefficient((0, 0, 0))[0], [1.0, 2.0, 3.0]
        )


class TestDivergence:
    def test_general_mode(self):
        v = np.array([1.0, -2.0, 0.5])
        k = (0, 1, 4)
        f = TrigField.wave(k, cos_coeff=v)
        # div(v cos(k.x)) = -(v.k) sin(k.x)
        _, sin_c = divergence(f).coefficient(k)
        assert math.isclose(float(sin_c), -float(v @ np.array(k)), rel_tol=1e-12)

    def test_orthogonal_mode_vanishes(self):
        f = TrigField.wave((0, 1, 4), cos_coeff=np.array([0.0, 4.0, -1.0]))
        assert divergence(f).is_zero()


class TestAdvect:
    def test_product_to_sum_expansion(self):
        # u = v cos(k_i.x) against f = cos(k_j'.x):
        # u.grad f = -(v.k_j')/2 [sin((k_i+k_j').x) + sin((k_j'-k_i).x)]
        v = np.array([0.0, 0.5, -0.125])
        ki = (0, 1, 4)
        kj = (0, 0, 8)
        u = TrigField.wave(ki, cos_coeff=v)
        f = TrigField.wave(kj, cos_coeff=1.0)
        result = advect(u, f)
        coupling = -float(v @ np.array(kj)) / 2.0
        _, sin_plus = result.coefficient((0, 1, 12))
        _, sin_diff = result.coefficient((0, -1, 4))
        assert math.isclose(float(sin_plus), coupling, rel_tol=1e-12)
        assert math.isclose(float(sin_diff), coupling, rel_tol=1e-12)

    def test_self_interaction_vanishes(self):
        v = np.array([0.0, 0.5, -0.125])
        u = TrigField.wave((0, 1, 4), cos_coeff=v)
        assert advect(u, u).is_zero()

    def test_zero_inputs(self):
        u = random_field("vector")
        assert advect(u, TrigField.zero("scalar")).is_zero()
        assert advect(TrigField("vector"), random_field("scalar")).is_zero()

    def test_scalar_velocity_rejected(self):
        with pytest.raises(ValueError, match="vector field"):
            advect(random_field("scalar"), random_field("scalar"))

    def test_bilinear_in_each_argument(self):
        u1, u2 = random_field("vector"), random_field("vector")
        f = random_field("scalar")
        pts = random_points()
        lhs = advect(u1 + 2.0 * u2, f).evaluate(pts)
        rhs = advect(u1, f).evaluate(pts) + 2.0 * advect(u2, f).evaluate(pts)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_matches_pointwise_product_rule(self):
        u = random_field("vector", n_modes=2)
        f = random_field("scalar", n_modes=2)
        pts = random_points(40)
        grads = gradient(f)
        expected = np.sum(u.evaluate(pts) * grads.evaluate(pts), axis=1)
        np.testing.assert_allclose(advect(u, f).evaluate(pts), expected, atol=1e-9)


class TestLinfNorm:
    def test_single_sine_amplitude(self):
        est = linf_norm(TrigField.wave((0, 0, 5), sin_coeff=3.0))
        assert abs(est.value - 3.0) <= 1e-10

    def test_aligned_cosines(self):
        f = TrigField.wave((0, 0, 1), cos_coeff=1.0) + TrigField.wave(
            (0, 0, 2), cos_coeff=1.0
        )
        est = linf_norm(f)
        assert abs(est.value - 2.0) <= 1e-10

    def test_bracket(self):
        f = random_field("vector")
        est = linf_norm(f)
        assert 0.0 < est.value <= est.upper + 1e-12
        assert math.isclose(est.upper, f.l1_coefficients(), rel_tol=1e-12)

    def test_empty_field(self):
        est = linf_norm(TrigField.zero("vector"))
        assert est.value == 0.0 and est.upper == 0.0

    def test_multi_shares_grid(self):
        fields = [random_field("scalar") for _ in range(3)]
        est = linf_norm_multi(fields)
        assert est.value <= sum(linf_norm(f).value for f in fields) + 1e-12


class TestTGridSpec:
    def test_validation(self):
        with pytest.raises(ValueError, match="at least two points"):
            TGridSpec(n=1)
        with pytest.raises(ValueError, match="t_min < t_max"):
            TGridSpec(t_min=2.0, t_max=1.0)
        with pytest.raises(ValueError, match="nonnegative"):
            TGridSpec(refine_rounds=-1)

    def test_times_geomspaced(self):
        times = TGridSpec(n=5, t_min=1e-4, t_max=1.0).times()
        np.testing.assert_allclose(times, np.geomspace(1e-4, 1.0, 5))


class TestBesovNorm:
    def test_single_low_mode_calculus_value(self):
        # sup_t t^{1/2} e^{-t} = (2e)^{-1/2} at t = 1/2
        est = besov_norm(TrigField.wave((0, 1, 0), sin_coeff=1.0), 1.0)
        assert abs(est.value - math.sqrt(0.5 * math.exp(-1.0))) <= 1e-4
        assert abs(est.argmax_t - 0.5) <= 0.05
        assert not est.at_endpoint

    def test_homogeneity_exact(self):
        f = random_field("scalar")
        base = besov_norm(f, 0.5)
        scaled = besov_norm(3.0 * f, 0.5)
        assert scaled.value == 3.0 * base.value
        assert scaled.argmax_t == base.argmax_t

    def test_value_within_bracket(self):
        f = random_field("scalar", n_modes=4)
        est = besov_norm(f, 1.0)
        assert 0.0 < est.value <= est.upper

    def test_mean_zero_required(self):
        f = TrigField("scalar", [((0, 0, 0), 1.0, 0.0)])
        with pytest.raises(ValueError, match="mean zero"):
            besov_norm(f, 1.0)

    def test_order_positive(self):
        with pytest.raises(ValueError, match="must be positive"):
            besov_norm(random_field("scalar"), 0.0)

    def test_scan_slack_nonnegative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            besov_norm(random_field("scalar"), 1.0, scan_slack=-0.1)

    def test_scan_slack_stays_certified(self):
        f = random_field("scalar", n_modes=4)
        exact = besov_norm(f, 1.0)
        slack = besov_norm(f, 1.0, scan_slack=0.05)
        assert slack.value <= exact.value + 1e-15
        assert slack.value >= exact.value / 1.06

    def test_zero_field(self):
        est = besov_norm(TrigField.zero("scalar"), 1.0)
        assert est.value == 0.0 and math.isnan(est.argmax_t)

    @settings(max_examples=15, deadline=None)
    @given(f=scalar_fields(), c=st.floats(0.1, 8.0, allow_nan=False))
    def test_homogeneity_property(self, f, c):
        if f.is_zero():
            return
        grid = TGridSpec(n=60, refine_rounds=1)
        base = besov_norm(f, 1.0, grid)
        scaled = besov_norm(c * f, 1.0, grid)
        assert math.isclose(scaled.value, c * base.value, rel_tol=1e-12, abs_tol=1e-300)
