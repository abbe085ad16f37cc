import math
import random
from fractions import Fraction

import pytest

from dyadint import expr as E
from dyadint.calculus import (
    fubini_check,
    make_plan,
    newton_leibniz_check,
    parameter_integral,
    repeated_integral,
    y_simple_region,
)
from dyadint.errors import PreconditionError
from dyadint.expr import parse_expr, permute_axes
from dyadint.geometry import DyadicCube
from dyadint.integrate import integrate, jordan_measure
from dyadint.intervals import Interval
from dyadint.oracles import from_expr

from conftest import assert_encloses, random_tame_expr, random_dyadic_box


class TestNewtonLeibniz:
    def test_two_x(self):
        chk = newton_leibniz_check("2*x1", "x1^2", 0.0, 1.0, epsilon=1e-6)
        assert chk.contained
        assert chk.nl_value == 1.0
        assert_encloses(chk.enclosure, 1)
        assert chk.derivative_warnings == ()

    def test_cosine(self):
        chk = newton_leibniz_check("cos(x1)", "sin(x1)", 0.0, 1.5707963, epsilon=1e-5)
        assert chk.contained
        assert abs(chk.nl_value - 1.0) < 1e-6

    def test_constant_offset_cancels(self):
        chk = newton_leibniz_check("1", "x1 + 5", 0.0, 1.0, epsilon=1e-6)
        assert chk.contained
        assert chk.nl_value == 1.0
        assert chk.enclosure == Interval(1.0, 1.0)

    def test_wrong_antiderivative_is_flagged_not_raised(self):
        chk = newton_leibniz_check("2*x1", "x1^3 + x1", 0.0, 1.0, epsilon=1e-4)
        assert not chk.contained
        assert chk.derivative_warnings  # the F' spot check also complains

    def test_requires_a_less_than_b(self):
        with pytest.raises(PreconditionError):
            newton_leibniz_check("x1", "x1^2/2", 1.0, 0.0)

    def test_json_payload(self):
        chk = newton_leibniz_check("1", "x1", 0.0, 0.5, epsilon=1e-6)
        obj = chk.to_json()
        assert obj["contained"] is True
        assert obj["nl_value"] == 0.5
        assert obj["report"]["schema"] == "dyadint/1"


class TestParameterIntegral:
    def test_triangle_oracle_integrates_to_half(self):
        plan = make_plan("1", "0", "x1", 0.0, 1.0, epsilon=1e-2)
        res = repeated_integral(plan)
        assert res.report.verdict.status == "integrable"
        assert_encloses(res.enclosure, Fraction(1, 2))

    def test_constant_slice_value(self):
        oracle = parameter_integral("x2", "0", "1", 0.0, 1.0, inner_epsilon=1e-3)
        for cube in (DyadicCube(1, (0,)), DyadicCube(2, (2,))):
            b = oracle.bounds(cube)
            assert b.contains(0.5)
            assert b.width < 0.1

    def test_u_above_v_rejected(self):
        with pytest.raises(PreconditionError):
            parameter_integral("1", "1", "0", 0.0, 1.0)

    def test_moving_limits_are_sound(self, rng):
        # phi(x) = int_0^x y dy = x^2 / 2; sample against oracle bounds
        oracle = parameter_integral("x2", "0", "x1", 0.0, 1.0, inner_epsilon=1e-3)
        for _ in range(25):
            k = rng.randrange(1, 5)
            n = rng.randrange(0, 2 ** k)
            b = oracle.bounds(DyadicCube(k, (n,)))
            for _ in range(5):
                x = (n + rng.random()) * 2.0 ** -k
                assert b.lo - 1e-12 <= x * x / 2 <= b.hi + 1e-12


class TestRepeatedIntegral:
    def test_product_of_unit_indicators(self):
        # f(x, y) = chi_[0,1)(x) * chi_[0,1)(y) expressed as a restricted
        # constant: the repeated integral equals the area 1
        plan = make_plan("1", "0", "1", 0.0, 1.0, epsilon=1e-3)
        res = repeated_integral(plan)
        assert_encloses(res.enclosure, 1)

    def test_xy(self):
        plan = make_plan("x1*x2", "0", "1", 0.0, 1.0, epsilon=1e-2)
        res = repeated_integral(plan)
        assert_encloses(res.enclosure, Fraction(1, 4))

    def test_triangle(self):
        plan = make_plan("1", "0", "x1", 0.0, 1.0, epsilon=1e-2)
        assert_encloses(repeated_integral(plan).enclosure, Fraction(1, 2))

    def test_triple_integral_plan(self):
        # volume under z = x + y over the unit square: 1
        plan = make_plan("1", "0", "x1 + x2", outer_box="[0,1]x[0,1]", epsilon=0.15)
        res = repeated_integral(plan)
        assert_encloses(res.enclosure, 1)


class TestFubini:
    def test_xy_box(self):
        fr = fubini_check("x1*x2", box="[0,1)x[0,1)", epsilon=1e-2)
        assert fr.overlap and not fr.critical
        assert_encloses(fr.direct, Fraction(1, 4))
        assert_encloses(fr.repeated, Fraction(1, 4))
        assert fr.swap_overlap

    def test_sum_box(self):
        fr = fubini_check("x1 + x2", box="[0,1)x[0,1)", epsilon=2e-2)
        assert fr.overlap
        assert_encloses(fr.direct, 1)
        assert_encloses(fr.repeated, 1)

    def test_disk_slices(self):
        fr = fubini_check(
            "1", u="-sqrt(1 - x1^2)", v="sqrt(1 - x1^2)", a=-1.0, b=1.0, epsilon=0.05
        )
        assert fr.overlap
        assert fr.direct.contains(math.pi)
        assert fr.repeated.contains(math.pi)

    def test_order_swap_on_asymmetric_box(self):
        fr = fubini_check("x1^2*x2", box="[0,1)x[0,2)", epsilon=3e-2)
        assert fr.overlap and fr.swap_overlap
        assert_encloses(fr.direct, Fraction(2, 3))

    def test_json_payload(self):
        fr = fubini_check("x1*x2", box="[0,1)x[0,1)", epsilon=2e-2)
        obj = fr.to_json()
        assert obj["overlap"] is True
        assert obj["schema"] == "dyadint/1"
        assert "swapped" in obj

    def test_y_simple_region_matches_jordan(self):
        region = y_simple_region("0", "x1", 0.0, 1.0)
        rep = jordan_measure(region, epsilon=2e-2, k_max=9)
        assert_encloses(rep.enclosure, Fraction(1, 2))


class TestRepeatedIntegralAlgebra:
    def test_product_separation_fuzz(self, rng):
        # repeated integral of phi(x) psi(y) overlaps the product of the
        # two 1-D enclosures
        box = random_dyadic_box(rng, 1, span=1, level=0)
        for _ in range(6):
            phi = random_tame_expr(rng, 1, box, depth=2)
            psi = random_tame_expr(rng, 1, box, depth=2)
            f = E.Mul(phi, permute_axes(psi, {1: 2}))
            blo = box.lowers[0].to_float()
            bhi = box.uppers[0].to_float()
            plan = make_plan(f, str(blo), str(bhi), blo, bhi, epsilon=5e-2)
            rep = repeated_integral(plan).enclosure
            e_phi = integrate(from_expr(phi, box), epsilon=1e-2).enclosure
            e_psi = integrate(from_expr(psi, box), epsilon=1e-2).enclosure
            corners = [
                a * b
                for a in (e_phi.lo, e_phi.hi)
                for b in (e_psi.lo, e_psi.hi)
            ]
            prod = Interval(min(corners) - 1e-9, max(corners) + 1e-9)
            assert rep.intersects(prod), (f, rep, prod)

    def test_repeated_linearity(self, rng):
        box = random_dyadic_box(rng, 2, span=1, level=0)
        lo_f = box.lowers[0].to_float()
        hi_f = box.uppers[0].to_float()
        for _ in range(4):
            f = random_tame_expr(rng, 2, box, depth=2)
            g = random_tame_expr(rng, 2, box, depth=2)
            alpha = Fraction(rng.randint(-3, 3))
            beta = Fraction(rng.randint(-3, 3))
            combo = E.Add(E.Mul(E.Const(alpha), f), E.Mul(E.Const(beta), g))
            mk = lambda e: repeated_integral(
                make_plan(e, str(lo_f), str(hi_f), lo_f, hi_f, epsilon=5e-2)
            ).enclosure
            rc = mk(combo)
            rf, rg = mk(f), mk(g)
            cands = [
                float(alpha) * a + float(beta) * b
                for a in (rf.lo, rf.hi)
                for b in (rg.lo, rg.hi)
            ]
            want = Interval(min(cands) - 1e-9, max(cands) + 1e-9)
            assert rc.intersects(want)

    def test_repeated_monotonicity(self, rng):
        box = random_dyadic_box(rng, 2, span=1, level=0)
        lo_f = box.lowers[0].to_float()
        hi_f = box.uppers[0].to_float()
        for _ in range(4):
            f = random_tame_expr(rng, 2, box, depth=2)
            h = random_tame_expr(rng, 2, box, depth=2)
            g = E.Add(f, E.Abs(h))  # g >= f pointwise
            mk = lambda e: repeated_integral(
                make_plan(e, str(lo_f), str(hi_f), lo_f, hi_f, epsilon=5e-2)
            ).enclosure
            rf, rg = mk(f), mk(g)
            assert rf.lo <= rg.hi + 1e-9
