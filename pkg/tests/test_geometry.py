import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadint.errors import ParseError
from dyadint.geometry import (
    Box,
    DyadicCube,
    DyadicRational,
    LEVEL_CAP,
    children,
    corner_blocks,
    count_cubes,
    cube_containing,
    cubes_intersecting,
    parse_box,
    volume,
)


class TestDyadicRational:
    def test_parsing(self):
        assert DyadicRational.from_string("0.375").as_fraction() == Fraction(3, 8)
        assert DyadicRational.from_string("3/2^4").as_fraction() == Fraction(3, 16)
        assert DyadicRational.from_string("-5").as_fraction() == -5
        with pytest.raises(ParseError):
            DyadicRational.from_string("0.1")  # not exactly dyadic
        with pytest.raises(ParseError):
            DyadicRational.from_string("1/3")

    def test_normalization(self):
        assert DyadicRational(4, 1) == DyadicRational(2, 0)
        assert DyadicRational(6, 3) == DyadicRational(3, 2)
        assert DyadicRational(0, 7).exp == 0

    @given(st.integers(-10**6, 10**6), st.integers(0, 40),
           st.integers(-10**6, 10**6), st.integers(0, 40))
    @settings(max_examples=200, deadline=None)
    def test_arithmetic_matches_fractions(self, n1, e1, n2, e2):
        a = DyadicRational(n1, e1)
        b = DyadicRational(n2, e2)
        assert (a + b).as_fraction() == a.as_fraction() + b.as_fraction()
        assert (a - b).as_fraction() == a.as_fraction() - b.as_fraction()
        assert (a * b).as_fraction() == a.as_fraction() * b.as_fraction()
        assert (a < b) == (a.as_fraction() < b.as_fraction())

    @given(st.integers(-10**6, 10**6), st.integers(0, 30), st.integers(0, 35))
    @settings(max_examples=200, deadline=None)
    def test_scaled_floor(self, n, e, k):
        a = DyadicRational(n, e)
        q = a.as_fraction() * (1 << k)
        assert a.scaled_floor(k) == q.numerator // q.denominator
        assert a.scaled_is_integer(k) == (q.denominator == 1)

    def test_from_float_is_exact(self):
        x = 1.5707963
        assert float(DyadicRational.from_float(x).as_fraction()) == x


class TestChildren:
    def test_1d_bisection(self):
        kids = children(DyadicCube(0, (0,)))
        assert kids == [DyadicCube(1, (0,)), DyadicCube(1, (1,))]

    def test_2d_four_squares(self):
        kids = children(DyadicCube(0, (0, 0)))
        assert {c.corner for c in kids} == {(0, 0), (1, 0), (0, 1), (1, 1)}
        assert all(c.level == 1 for c in kids)
        # enumeration order is lexicographic by corner
        assert [c.corner for c in kids] == sorted(c.corner for c in kids)

    def test_3d_volumes_sum_to_parent(self):
        cube = DyadicCube(2, (1, -3, 5))
        kids = children(cube)
        assert len(kids) == 8
        total = sum((c.volume().as_fraction() for c in kids), Fraction(0))
        assert total == cube.volume().as_fraction()

    def test_partition_identity_deep(self):
        cube = DyadicCube(1, (3, -1))
        frontier = [cube]
        for _ in range(3):
            frontier = [kid for c in frontier for kid in children(c)]
        assert sum((c.volume().as_fraction() for c in frontier), Fraction(0)) \
            == cube.volume().as_fraction()
        # pairwise disjoint at the final level: corners unique
        assert len({c.corner for c in frontier}) == len(frontier)

    def test_translation_commutes(self):
        base = DyadicCube(2, (1, 2))
        shifted = DyadicCube(2, (1 + 4, 2 - 8))  # translate by (1, -2)
        kids_base = children(base)
        kids_shift = children(shifted)
        for cb, cs in zip(kids_base, kids_shift):
            assert cs.corner == (cb.corner[0] + 8, cb.corner[1] - 16)


class TestCubeContaining:
    def test_half(self):
        assert cube_containing([0.5], 0).corner == (0,)

    def test_left_endpoint_inclusion(self):
        assert cube_containing([1.0], 0).corner == (1,)

    def test_negative(self):
        c = cube_containing([-0.25], 2)
        assert c.corner == (-1,)

    def test_membership_property(self, rng):
        for _ in range(200):
            k = rng.randrange(0, 8)
            p = [DyadicRational(rng.randint(-1000, 1000), rng.randrange(0, 10))
                 for _ in range(rng.randrange(1, 4))]
            cube = cube_containing(p, k)
            assert cube.contains(p)


class TestCubesIntersecting:
    def test_unit_interval_semiclosed(self):
        assert count_cubes(parse_box("[0,1)"), 3) == 8

    def test_unit_interval_closed(self):
        cubes = list(cubes_intersecting(parse_box("[0,1]"), 3))
        assert len(cubes) == 9
        assert cubes[-1].corner == (8,)

    def test_quarter_square(self):
        cubes = list(cubes_intersecting(parse_box("[0.25,0.75)x[0.25,0.75)"), 1))
        assert {c.corner for c in cubes} == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_lexicographic_order(self):
        corners = [c.corner for c in cubes_intersecting(parse_box("[0,1)x[0,1)"), 1)]
        assert corners == sorted(corners)

    def test_count_bound(self, rng):
        for _ in range(100):
            box = parse_box("[0,1)x[0,2)")
            k = rng.randrange(0, 6)
            n = count_cubes(box, k)
            assert n <= (2 ** k + 1) * (2 ** (k + 1) + 1)

    def test_corner_blocks_match_iterator(self):
        box = parse_box("[-0.5,1)x[0,0.75)")
        for k in range(4):
            from_iter = [c.corner for c in cubes_intersecting(box, k)]
            from_blocks = [tuple(row) for blk in corner_blocks(box, k, chunk=3)
                           for row in blk.tolist()]
            assert from_iter == from_blocks

    def test_degenerate_closed_point(self):
        box = Box.closed([0, 0], [0, 0])
        assert count_cubes(box, 5) == 1
        box_semi = Box.semiclosed([0, 0], [0, 0])
        assert count_cubes(box_semi, 5) == 0


class TestVolume:
    def test_unit_cube(self):
        assert volume(parse_box("[0,1)x[0,1)x[0,1)")) == 1

    def test_product(self):
        assert volume(parse_box("[0,0.5)x[0,0.25)")).as_fraction() == Fraction(1, 8)

    def test_degenerate(self):
        assert volume(parse_box("[1,1]x[0,2)")) == 0


class TestBox:
    def test_parse_closures(self):
        b = parse_box("[0,1)x(0,1]x[2,3]")
        assert b.closures == ((True, False), (False, True), (True, True))

    def test_parse_rejects_nondyadic(self):
        with pytest.raises(ParseError):
            parse_box("[0,0.2)")

    def test_intersect_hull(self):
        a = parse_box("[0,2)x[0,2)")
        b = parse_box("[1,3)x[1,3)")
        i = a.intersect(b)
        assert i.to_literal() == "[1,2)x[1,2)"
        h = a.hull(b)
        assert h.to_literal() == "[0,3)x[0,3)"
        assert a.intersect(parse_box("[5,6)x[5,6)")) is None

    def test_literal_roundtrip(self):
        for text in ("[0,1)", "[-0.5,0.75]x(0,1)", "[3/2^2,7/2^2)"):
            b = parse_box(text)
            assert parse_box(b.to_literal()) == b

    def test_cap(self):
        with pytest.raises(Exception):
            DyadicCube(LEVEL_CAP + 1, (0,))
