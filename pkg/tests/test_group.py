"""Exact checks of the quaternionic Heisenberg group structure."""

import random
from fractions import Fraction

import pytest

from qcheat.group import (
    GroupPoint,
    dilate,
    group_inverse,
    group_mul,
    identity_point,
    make_quaternionic_spec,
    make_step_two_spec,
    spec_from_json,
    spec_to_json,
)


def mat_mul(a, b):
    m = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(m)) for j in range(m)] for i in range(m)]


def rand_point(spec, rng):
    x = tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for _ in range(spec.m))
    z = tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for _ in range(spec.r))
    return GroupPoint(x=x, z=z)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_quaternionic_matrix_identities(n):
    spec = make_quaternionic_spec(n)
    m = spec.m
    minus_id = [[-1 if i == j else 0 for j in range(m)] for i in range(m)]
    for Ji in spec.J:
        assert all(Ji[i][j] == -Ji[j][i] for i in range(m) for j in range(m))
        assert mat_mul(Ji, Ji) == minus_id
    assert mat_mul(mat_mul(spec.J[0], spec.J[1]), spec.J[2]) == minus_id
    for i in range(3):
        for j in range(3):
            if i != j:
                anti = mat_mul(spec.J[i], spec.J[j])
                anti2 = mat_mul(spec.J[j], spec.J[i])
                assert all(
                    anti[a][b] + anti2[a][b] == 0 for a in range(m) for b in range(m)
                )


def test_frame_convention_entry():
    # I_1 X_1 = X_2 forces I^1_{12} = +1
    spec = make_quaternionic_spec(1)
    assert spec.J[0][0][1] == 1


def test_hausdorff_dimension_and_haar():
    assert make_quaternionic_spec(2).Q == 14
    spec = make_quaternionic_spec(1)
    assert spec.Q == 10
    coeff, power = spec.haar_factor_exact
    assert coeff == Fraction(1, 512) and power == Fraction(-3, 2)
    assert spec.haar_factor == pytest.approx(1.0 / 512.0)


def test_rejects_bad_level():
    with pytest.raises(ValueError):
        make_quaternionic_spec(0)


def test_identity_and_inverse():
    spec = make_quaternionic_spec(1)
    rng = random.Random(7)
    e = identity_point(spec)
    for _ in range(50):
        h = rand_point(spec, rng)
        assert group_mul(spec, h, e) == h
        assert group_mul(spec, e, h) == h
        assert group_mul(spec, h, group_inverse(h)) == e
        assert group_mul(spec, group_inverse(h), h) == e


def test_associativity_random_triples():
    spec = make_quaternionic_spec(1)
    rng = random.Random(11)
    for _ in range(1000):
        a, b, c = (rand_point(spec, rng) for _ in range(3))
        assert group_mul(spec, group_mul(spec, a, b), c) == group_mul(
            spec, a, group_mul(spec, b, c)
        )


def test_dimension_mismatch_rejected():
    spec = make_quaternionic_spec(1)
    bad = GroupPoint(x=(Fraction(1),) * 3, z=(Fraction(0),) * 3)
    with pytest.raises(ValueError):
        group_mul(spec, bad, identity_point(spec))


def test_dilation_is_automorphism():
    spec = make_quaternionic_spec(1)
    rng = random.Random(13)
    for lam in (Fraction(1), Fraction(2), Fraction(3, 2)):
        for _ in range(30):
            h, hp = rand_point(spec, rng), rand_point(spec, rng)
            lhs = dilate(spec, lam, group_mul(spec, h, hp))
            rhs = group_mul(spec, dilate(spec, lam, h), dilate(spec, lam, hp))
            assert lhs == rhs
    h = rand_point(spec, rng)
    assert dilate(spec, 1, h) == h
    assert dilate(spec, 2, h).z == tuple(4 * v for v in h.z)
    with pytest.raises(ValueError):
        dilate(spec, 0, h)
    with pytest.raises(ValueError):
        dilate(spec, -1, h)


def test_generic_step_two_spec():
    heis = make_step_two_spec([[[0, 1], [-1, 0]]])
    assert heis.m == 2 and heis.r == 1 and heis.Q == 4
    with pytest.raises(ValueError):
        make_step_two_spec([[[0, 1], [1, 0]]])  # not skew


def test_json_round_trip():
    spec = make_quaternionic_spec(1)
    text = spec_to_json(spec)
    back = spec_from_json(text)
    assert back == spec
    assert '"1/1"' in text and '"-1/1"' in text
