import math
import random
from fractions import Fraction

import numpy as np
import pytest

from dyadint.errors import DimensionError, ParseError, PreconditionError
from dyadint.expr import eval_point, parse_expr
from dyadint.geometry import Box, DyadicCube, parse_box
from dyadint.intervals import Interval
from dyadint.oracles import (
    Classification,
    Region,
    absolute,
    add,
    from_expr,
    indicator,
    lipschitz_compose,
    maximum,
    minimum,
    mul,
    neg_part,
    parse_oracle,
    pos_part,
    region_from_box,
    region_from_json,
    restrict,
    scale,
    zero,
)

from conftest import random_dyadic_box, random_tame_expr

DISK = Region(
    parse_box("[-1,1]x[-1,1]"),
    ((parse_expr("x1^2 + x2^2 - 1", 2), False),),
)


class TestFromExpr:
    def test_identity_on_unit_interval(self):
        o = from_expr("x1", "[0,1)")
        assert o.bounds(DyadicCube(0, (0,))) == Interval(0.0, 1.0)

    def test_outside_support_is_zero(self):
        o = from_expr("x1", "[0,1)")
        assert o.bounds(DyadicCube(0, (2,))) == Interval(0.0, 0.0)

    def test_interior_constant(self):
        o = from_expr("1", "[0,1)x[0,1)")
        assert o.bounds(DyadicCube(1, (1, 1))) == Interval(1.0, 1.0)

    def test_edge_straddle_hulls_zero(self):
        o = from_expr("1", "[0,1)")
        # the level-0 cube [1,2) only touches the support closure: zero
        assert o.bounds(DyadicCube(0, (1,))) == Interval(0.0, 0.0)
        # a cube straddling the right edge hulls with 0
        o2 = from_expr("1", "[0,3/2^1)")  # [0, 1.5)
        assert o2.bounds(DyadicCube(0, (1,))) == Interval(0.0, 1.0)

    def test_closed_support_keeps_edge_value(self):
        o = from_expr("x1", "[0,1]")
        last = o.bounds(DyadicCube(2, (3,)))  # [0.75, 1) inside [0, 1]
        assert last == Interval(0.75, 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            from_expr("x2", "[0,1)")


class TestIndicator:
    def test_disk_inside(self):
        assert DISK.classify(DyadicCube(1, (0, 0))) is Classification.INSIDE
        assert indicator(DISK).bounds(DyadicCube(1, (0, 0))) == Interval(1.0, 1.0)

    def test_disk_boundary(self):
        assert DISK.classify(DyadicCube(1, (1, 1))) is Classification.BOUNDARY
        assert indicator(DISK).bounds(DyadicCube(1, (1, 1))) == Interval(0.0, 1.0)

    def test_outside_bbox(self):
        assert indicator(DISK).bounds(DyadicCube(0, (5, 5))) == Interval(0.0, 0.0)

    def test_box_region_exact(self):
        r = region_from_box("[0,1)x[0,1)")
        assert r.classify(DyadicCube(1, (0, 1))) is Classification.INSIDE
        assert r.classify(DyadicCube(0, (1, 0))) is Classification.OUTSIDE

    def test_strict_constraint(self):
        r = Region(parse_box("[-1,1]"), ((parse_expr("x1", 1), True),))  # x < 0
        assert r.classify(DyadicCube(1, (-2,))) is Classification.INSIDE
        assert r.classify(DyadicCube(1, (0,))) is Classification.OUTSIDE
        assert r.classify(DyadicCube(1, (-1,))) is Classification.BOUNDARY

    def test_classification_trichotomy_sampling(self, rng):
        ind = indicator(DISK)
        for _ in range(150):
            k = rng.randrange(1, 6)
            corner = (rng.randrange(-(2 ** k), 2 ** k), rng.randrange(-(2 ** k), 2 ** k))
            cube = DyadicCube(k, corner)
            cls = DISK.classify(cube)
            blo, bhi = cube.float_bounds()
            samples = [
                [rng.uniform(blo[j], bhi[j]) for j in range(2)] for _ in range(20)
            ]
            inside = [DISK.contains_point(p) for p in samples]
            if cls is Classification.INSIDE:
                assert all(inside)
            elif cls is Classification.OUTSIDE:
                assert not any(inside)

    def test_boundary_volume_shrinks_with_level(self):
        # outer-minus-inner volume of the disk's boundary cubes decays
        totals = []
        for k in range(2, 11):
            blo = []
            n = 2 ** k
            count = 0
            corners = [(i, j) for i in range(-n, n) for j in range(-n, n)]
            codes = DISK.classify_arrays(
                *_bounds_arrays(corners, k), closed=False
            )
            count = int((codes == Classification.BOUNDARY.value).sum())
            totals.append(count * 4.0 ** -k)
        assert all(b <= a for a, b in zip(totals, totals[1:]))
        assert totals[-1] < 0.05


def _bounds_arrays(corners, k):
    c = np.array(corners, dtype=np.float64)
    return np.ldexp(c, -k).T, np.ldexp(c + 1, -k).T


class TestCombinators:
    def test_f_minus_f_contains_zero(self):
        f = from_expr("x1", "[0,1)")
        s = add(f, f, 1.0, -1.0)
        for k in range(4):
            for n in range(2 ** k):
                assert s.bounds(DyadicCube(k, (n,))).contains(0.0)

    def test_pos_part_of_negative_range(self):
        pp = pos_part(from_expr("x1", "[-1,1)"))
        assert pp.bounds(DyadicCube(0, (-1,))) == Interval(0.0, 0.0)

    def test_neg_part(self):
        np_ = neg_part(from_expr("x1", "[-1,1)"))
        assert np_.bounds(DyadicCube(0, (-1,))) == Interval(0.0, 1.0)
        assert np_.bounds(DyadicCube(1, (1,))).hi == 0.0

    def test_restrict_one_is_indicator(self, rng):
        r = region_from_box("[0,1)x[0,1)")
        a = restrict(from_expr("1", "[-2,2)x[-2,2)"), r)
        b = indicator(r)
        for _ in range(60):
            k = rng.randrange(0, 4)
            corner = (rng.randrange(-(2 ** k) * 2, 2 ** k * 2),
                      rng.randrange(-(2 ** k) * 2, 2 ** k * 2))
            cube = DyadicCube(k, corner)
            assert a.bounds(cube) == b.bounds(cube)

    def test_mul_support_is_intersection(self):
        f = from_expr("1", "[0,2)")
        g = from_expr("1", "[1,3)")
        prod = mul(f, g)
        assert prod.support.to_literal() == "[1,2)"
        assert prod.bounds(DyadicCube(1, (1,))) == Interval(0.0, 0.0)

    def test_per_cube_subadditivity(self, rng):
        # per-cube upper bound of f+g never exceeds the sum of bounds
        for _ in range(40):
            dim = rng.randint(1, 2)
            box = random_dyadic_box(rng, dim)
            f = from_expr(random_tame_expr(rng, dim, box), box)
            g = from_expr(random_tame_expr(rng, dim, box), box)
            s = add(f, g)
            for _ in range(10):
                k = rng.randrange(0, 4)
                corner = tuple(rng.randrange(-8 << k, 8 << k) for _ in range(dim))
                cube = DyadicCube(k, corner)
                bs = s.bounds(cube)
                bf, bg = f.bounds(cube), g.bounds(cube)
                assert bs.hi <= bf.hi + bg.hi + 1e-9 * (1 + abs(bs.hi))
                assert bs.lo >= bf.lo + bg.lo - 1e-9 * (1 + abs(bs.lo))

    def test_scale_and_minmax(self):
        f = from_expr("x1", "[0,1)")
        half = scale(f, 0.5)
        assert half.bounds(DyadicCube(0, (0,))) == Interval(0.0, 0.5)
        m = maximum(f, scale(f, -1.0))
        assert m.bounds(DyadicCube(0, (0,))) == Interval(0.0, 1.0)
        mn = minimum(f, zero(1))
        assert mn.bounds(DyadicCube(0, (0,))).hi == 0.0

    def test_oracle_soundness_sampling(self, rng):
        for _ in range(40):
            dim = rng.randint(1, 2)
            box = random_dyadic_box(rng, dim)
            e = random_tame_expr(rng, dim, box)
            o = absolute(from_expr(e, box))
            blo, bhi = box.float_bounds()
            for _ in range(10):
                k = rng.randrange(0, 4)
                p = [rng.uniform(blo[j], bhi[j]) for j in range(dim)]
                from dyadint.geometry import cube_containing

                cube = cube_containing(p, k)
                b = o.bounds(cube)
                v = abs(eval_point(e, p))
                assert b.lo <= v <= b.hi


class TestLipschitzCompose:
    def test_square_of_identity(self):
        o = lipschitz_compose("x1^2", from_expr("x1", "[0,1)"))
        assert o.bounds(DyadicCube(0, (0,))) == Interval(0.0, 1.0)
        assert o.lipschitz_constant >= 2.0

    def test_abs_compose(self, rng):
        inner = from_expr("x1 - 1/2", "[0,1)")
        o = lipschitz_compose("abs(x1)", inner)
        for _ in range(50):
            k = rng.randrange(0, 5)
            n = rng.randrange(0, 2 ** k)
            cube = DyadicCube(k, (n,))
            b = o.bounds(cube)
            ib = inner.bounds(cube)
            assert b.lo >= -1e-15
            assert b.hi >= max(abs(ib.lo), abs(ib.hi)) - 1e-12

    def test_rejects_nonvanishing_phi(self):
        with pytest.raises(PreconditionError):
            lipschitz_compose("x1 + 1", from_expr("x1", "[0,1)"))

    def test_rejects_unbounded_derivative(self):
        with pytest.raises(PreconditionError):
            lipschitz_compose("sqrt(abs(x1))", from_expr("x1", "[0,1)"))


class TestRegionJson:
    def test_roundtrip(self):
        obj = {
            "dim": 2,
            "bbox": "[-1,1]x[-1,1]",
            "constraints": [{"expr": "x1^2 + x2^2 - 1", "strict": False}],
        }
        r = region_from_json(obj)
        assert r.classify(DyadicCube(1, (0, 0))) is Classification.INSIDE

    def test_malformed(self):
        with pytest.raises(ParseError):
            region_from_json({"dim": 2, "bbox": "[0,1)"})


class TestPipelineSyntax:
    def test_nested_pipeline(self):
        o = parse_oracle("restrict(expr(x1*x2, [0,2)x[0,2)), [0,1)x[0,1))")
        assert o.bounds(DyadicCube(1, (0, 0))).hi <= 0.25 + 1e-12
        assert o.bounds(DyadicCube(0, (1, 1))) == Interval(0.0, 0.0)

    def test_add_with_weights(self):
        o = parse_oracle("add(expr(x1, [0,1)), expr(x1, [0,1)), 1, -1)")
        assert o.bounds(DyadicCube(2, (1,))).contains(0.0)

    def test_compose(self):
        o = parse_oracle("compose(x1^2, expr(x1, [0,1)))")
        assert o.bounds(DyadicCube(0, (0,))) == Interval(0.0, 1.0)

    def test_bad_pipeline(self):
        with pytest.raises(ParseError):
            parse_oracle("frobnicate(x1)")
