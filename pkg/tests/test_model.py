import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foodchain.model import (AXIOM_GRID, DomainError, Kind, ModelParams, NoSolutionError,
                             PreconditionError, ResponseSpec, char_coeffs, check_response,
                             invert_bracketed, jacobian, rhs)
from foodchain.equilibria import interior_equilibria

H1 = ResponseSpec.holling2(4.98, 6.2)
IV1 = ResponseSpec.ivlev(0.67, 5.349)

positive = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)
args = st.floats(min_value=0.0, max_value=30.0, allow_nan=False)


def holling_ref(a, b, u):
    return a * u / (1 + b * u)


def ivlev_ref(a, b, u):
    return a * (1 - math.exp(-b * u))


def central(f, u, h=1e-6):
    return (f(u + h) - f(u - h)) / (2 * h)


class TestResponses:
    def test_holling_examples(self):
        assert H1(0.0) == 0.0
        assert H1(1.0) == pytest.approx(4.98 / 7.2, rel=1e-15)
        assert H1.initial_slope() == 4.98
        assert H1.asymptote() == pytest.approx(4.98 / 6.2)

    def test_ivlev_examples(self):
        assert IV1(0.0) == 0.0
        assert IV1(1e4) == pytest.approx(0.67, rel=1e-15)
        assert IV1.asymptote() == 0.67
        assert IV1.initial_slope() == pytest.approx(0.67 * 5.349, rel=1e-15)
        assert IV1.initial_slope() == pytest.approx(3.58383, abs=1e-12)

    @given(a=positive, b=positive, u=args)
    def test_eval_matches_closed_forms(self, a, b, u):
        assert ResponseSpec.holling2(a, b)(u) == pytest.approx(holling_ref(a, b, u), rel=1e-12,
                                                               abs=1e-300)
        # the naive oracle loses ~eps * a absolute accuracy to cancellation
        assert ResponseSpec.ivlev(a, b)(u) == pytest.approx(ivlev_ref(a, b, u), rel=1e-12,
                                                            abs=4e-16 * a)

    @pytest.mark.parametrize("spec", [H1, IV1, ResponseSpec.holling2(0.46, 2.0),
                                      ResponseSpec.ivlev(0.1647, 2.457)])
    @pytest.mark.parametrize("u", [0.01, 0.1, 0.5, 1.0, 3.0])
    def test_derivatives_against_finite_differences(self, spec, u):
        # absolute floor: round-off of a 1e-6 central difference is ~eps / h
        assert spec.deriv(u) == pytest.approx(central(spec.eval, u), rel=1e-7, abs=1e-9)
        assert spec.deriv2(u) == pytest.approx(central(spec.deriv, u), rel=1e-6, abs=1e-8)
        assert spec.tilde_deriv(u) == pytest.approx(central(spec.tilde, u), rel=1e-6, abs=1e-8)

    def test_tilde_examples(self):
        # 4.98 / (1 + 6.2 * 0.16) = 4.98 / 1.992 = 2.5
        assert H1.tilde(0.16) == pytest.approx(2.5, rel=1e-14)
        assert H1.tilde(0.16) == pytest.approx(H1(0.16) / 0.16, rel=1e-14)

    @pytest.mark.parametrize("spec", [H1, IV1])
    def test_tilde_continuous_at_zero(self, spec):
        assert spec.tilde(0.0) == pytest.approx(spec.initial_slope(), rel=1e-15)
        for u in (1e-3, 1e-6, 1e-9, 1e-12):
            assert spec.tilde(u) == pytest.approx(spec.initial_slope(), rel=10 * u * spec.p2)
        # one-sided derivative limit
        assert spec.tilde_deriv(0.0) == pytest.approx(central(spec.tilde, 1e-6, 1e-7), rel=1e-4)

    def test_ivlev_tilde_series_branch_matches_direct_formula(self):
        for u in (5e-9, 1e-8, 2e-8, 1e-5, 2e-5, 1e-4):
            direct = IV1(u) / u if u > 1e-7 else None
            if direct is not None:
                assert IV1.tilde(u) == pytest.approx(direct, rel=1e-9)
            assert IV1.tilde(u) == pytest.approx(-0.67 * math.expm1(-5.349 * u) / u, rel=1e-12)

    def test_inverse_examples(self):
        assert H1.inverse(0.4) == pytest.approx(0.16, abs=1e-12)
        assert IV1.inverse(0.4) == pytest.approx(math.log(1 / (1 - 0.4 / 0.67)) / 5.349, abs=1e-12)
        assert IV1.inverse(0.4) == pytest.approx(0.1699113392, abs=1e-10)

    @pytest.mark.parametrize("spec", [H1, IV1])
    def test_inverse_outside_range(self, spec):
        for v in (spec.asymptote(), 1.5 * spec.asymptote(), 0.0, -0.1):
            with pytest.raises(NoSolutionError):
                spec.inverse(v)

    @settings(max_examples=200)
    @given(a=positive, b=positive, frac=st.floats(min_value=1e-6, max_value=1 - 1e-6))
    def test_inverse_round_trip(self, a, b, frac):
        for spec in (ResponseSpec.holling2(a, b), ResponseSpec.ivlev(a, b)):
            v = frac * spec.asymptote()
            u = spec.inverse(v)
            assert u > 0
            assert spec(u) == pytest.approx(v, rel=1e-9)
            assert u == pytest.approx(invert_bracketed(spec.eval, v, tol=1e-14),
                                      rel=1e-8, abs=1e-12)

    @pytest.mark.parametrize("method", ["eval", "deriv", "deriv2", "tilde", "tilde_deriv"])
    def test_negative_argument_rejected(self, method):
        with pytest.raises(DomainError):
            getattr(H1, method)(-1e-3)
        with pytest.raises(DomainError):
            getattr(IV1, method)(float("nan"))

    @pytest.mark.parametrize("p1,p2", [(0, 1), (-1, 1), (1, 0), (1, -2), (math.inf, 1)])
    def test_nonpositive_parameters_rejected(self, p1, p2):
        with pytest.raises(DomainError):
            ResponseSpec.holling2(p1, p2)

    @settings(max_examples=100)
    @given(a=positive, b=positive)
    def test_axioms_hold_for_any_positive_parameters(self, a, b):
        # pointwise conditions only; the decay proxy depends on how far the grid reaches
        for spec in (ResponseSpec.holling2(a, b), ResponseSpec.ivlev(a, b)):
            bad = check_response(spec, grid=(0.0, 0.1, 1.0, 5.0))
            assert [m for m in bad if "decay" not in m] == []

    @pytest.mark.parametrize("spec", [H1, IV1, ResponseSpec.holling2(0.46, 2.0),
                                      ResponseSpec.ivlev(0.1647, 2.457)])
    def test_axiom_grid(self, spec):
        assert check_response(spec) == []
        assert AXIOM_GRID == (0.0, 1e-4, 1e-2, 0.1, 0.5, 1.0, 5.0, 50.0)

    def test_axiom_checker_detects_violation(self):
        # a response with a vanishing asymptote scale so tilde(50) does not decay
        slow = ResponseSpec.holling2(1.0, 1e-4)
        assert any("decay" in m for m in check_response(slow))


class TestParams:
    def test_json_round_trip(self, family):
        assert ModelParams.from_json(family.to_json()) == family
        d = json.loads(family.to_json())
        assert set(d) == {"f1", "f2", "d1", "d2"}
        assert set(d["f1"]) == {"kind", "p1", "p2"}

    def test_unknown_keys_rejected(self, holling):
        d = holling.to_dict()
        d["extra"] = 1
        with pytest.raises(DomainError):
            ModelParams.from_dict(d)
        d = holling.to_dict()
        d["f1"]["shape"] = 2
        with pytest.raises(DomainError):
            ModelParams.from_dict(d)

    def test_bad_kind_and_types(self, holling):
        d = holling.to_dict()
        d["f1"]["kind"] = "holling3"
        with pytest.raises(DomainError):
            ModelParams.from_dict(d)
        d = holling.to_dict()
        d["d1"] = "0.4"
        with pytest.raises(DomainError):
            ModelParams.from_dict(d)

    def test_d2_optional_with_default(self, holling):
        d = holling.to_dict()
        del d["d2"]
        assert ModelParams.from_dict(d, d2_default=0.09).d2 == 0.09
        with pytest.raises(DomainError):
            ModelParams.from_dict(d)

    def test_negative_mortality_rejected(self):
        with pytest.raises(DomainError):
            ModelParams(H1, IV1, -0.4, 0.1)

    def test_packed_layout(self, holling):
        p = holling.packed()
        assert p.tolist() == [0, 4.98, 6.2, 0, 0.46, 2.0, 0.4, 0.1]
        assert Kind.IVLEV.code == 1


class TestVectorField:
    def rhs_ref(self, params, s):
        x, y, z = s
        f1, f2 = params.f1, params.f2
        return np.array([x - x * x - f1(x) * y, f1(x) * y - params.d1 * y - f2(y) * z,
                         f2(y) * z - params.d2 * z])

    def test_rhs_matches_formula(self, family, rng):
        for s in rng.uniform(0, 1.5, size=(20, 3)):
            np.testing.assert_allclose(rhs(family, s), self.rhs_ref(family, s), rtol=1e-14,
                                       atol=1e-15)

    @settings(max_examples=50)
    @given(d1=st.floats(0.01, 2.0), d2=st.floats(0.01, 2.0))
    def test_trivial_points_are_equilibria(self, d1, d2):
        p = ModelParams(H1, IV1, d1, d2)
        assert np.max(np.abs(rhs(p, (0, 0, 0)))) == 0.0
        assert np.max(np.abs(rhs(p, (1, 0, 0)))) < 1e-12

    def test_boundary_point_is_equilibrium(self, holling):
        assert np.max(np.abs(rhs(holling, (0.16, 0.336, 0.0)))) < 1e-12

    def test_jacobian_finite_differences(self, family, rng):
        for s in rng.uniform(0, 1.5, size=(20, 3)):
            J = jacobian(family, s)
            h = 1e-6
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                lo = s - e
                lo[j] = max(lo[j], 0.0)
                col = (self.rhs_ref(family, s + e) - self.rhs_ref(family, lo)) / (s[j] + h - lo[j])
                scale = np.maximum(np.abs(J[:, j]), 1.0)
                assert np.max(np.abs(J[:, j] - col) / scale) < 1e-5

    def test_jacobian_at_trivial_points(self, family):
        np.testing.assert_allclose(jacobian(family, (0, 0, 0)),
                                   np.diag([1.0, -family.d1, -family.d2]), atol=0)
        J1 = jacobian(family, (1, 0, 0))
        assert np.allclose(np.tril(J1, -1), 0.0)
        np.testing.assert_allclose(np.diag(J1), [-1.0, family.f1(1.0) - family.d1, -family.d2],
                                   rtol=1e-14)

    def test_negative_state_rejected(self, holling):
        with pytest.raises(DomainError):
            rhs(holling, (0.1, -0.1, 0.2))


class TestCharCoeffs:
    def test_cubic_matches_eigenvalues(self, family):
        for d2 in np.linspace(0.096, 0.104, 9):
            p = family.with_d2(d2)
            for e in interior_equilibria(p):
                c = char_coeffs(p, e.coords)
                lam = np.linalg.eigvals(jacobian(p, e.coords))
                scale = np.abs(lam) ** 3 + abs(c.P2) * np.abs(lam) ** 2 + abs(c.P1) * np.abs(lam) + abs(c.P0)
                assert np.all(np.abs(c(lam)) / scale < 1e-8)
                # and against numpy's characteristic polynomial (independent oracle)
                np.testing.assert_allclose(np.poly(jacobian(p, e.coords))[1:], [c.P2, c.P1, c.P0],
                                           rtol=1e-9, atol=1e-12)

    def test_branch_signs(self, family):
        p = family.with_d2(0.1)
        lower, upper = interior_equilibria(p)
        assert char_coeffs(p, lower.coords).P0 < 0
        assert char_coeffs(p, upper.coords).P0 > 0

    def test_requires_equilibrium(self, holling):
        with pytest.raises(PreconditionError):
            char_coeffs(holling, (0.5, 0.4, 0.8))
        with pytest.raises(PreconditionError):
            char_coeffs(holling, (0.16, 0.336, 0.0))  # not interior

    def test_monotone_in_d2_along_upper_branch(self, family):
        from foodchain.equilibria import upper_interior
        lo = 0.0925 if family.f1.kind is Kind.HOLLING2 else 0.0955
        P1, P2 = [], []
        for d2 in np.linspace(lo, 0.104, 30):
            p = family.with_d2(d2)
            c = char_coeffs(p, upper_interior(p).coords)
            P1.append(c.P1)
            P2.append(c.P2)
        assert np.all(np.diff(P1) > 0)
        assert np.all(np.diff(P2) < 0)
