"""Step-two Carnot groups in exponential coordinates.

The central example is the quaternionic Heisenberg group: R^{4n} x R^3 with
brackets encoded by three skew matrices whose entries are the components
I^i_{ab} = <I_i e_a, e_b> of the almost complex structures.  Structure
constants are exact fractions so group-law and bracket identities can be
asserted without floating-point noise; numeric code pulls a float view.

Group law, dilations and measure normalization:

    (x, z) * (x', z') = (x + x', z_i + z'_i + 2 sum_{ab} J^i_{ab} x_a x'_b)
    delta_lam(x, z)   = (lam x, lam^2 z)
    haar density      = 1 / (8 (16n)^{3/2})   against Lebesgue dx dz
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "GroupSpec",
    "GroupPoint",
    "make_quaternionic_spec",
    "make_step_two_spec",
    "group_mul",
    "group_inverse",
    "dilate",
    "spec_to_json",
    "spec_from_json",
]


def _as_fraction_matrix(rows):
    return tuple(tuple(Fraction(v) for v in row) for row in rows)


def _mat_mul(a, b):
    m = len(a)
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(m)) for j in range(m))
        for i in range(m)
    )


def _is_skew(a):
    m = len(a)
    return all(a[i][j] == -a[j][i] for i in range(m) for j in range(m))


def _is_minus_identity(a):
    m = len(a)
    return all(a[i][j] == (-1 if i == j else 0) for i in range(m) for j in range(m))


@dataclass(frozen=True)
class GroupSpec:
    """A step-two Carnot group R^m x R^r with vertical bracket matrices J.

    J[i][a][b] holds the exact rational component I^i_{ab}; for the
    quaternionic spec these satisfy (J^i)^2 = J^1 J^2 J^3 = -Id.
    """

    m: int
    r: int
    J: tuple  # r skew m x m matrices of Fraction
    n: int | None = None  # quaternionic level, if applicable
    quaternionic: bool = False

    def __post_init__(self):
        if self.m < 1 or self.r < 1:
            raise ValueError("need m >= 1 horizontal and r >= 1 vertical directions")
        if len(self.J) != self.r:
            raise ValueError("expected %d bracket matrices, got %d" % (self.r, len(self.J)))
        for Ji in self.J:
            if len(Ji) != self.m or any(len(row) != self.m for row in Ji):
                raise ValueError("bracket matrices must be %d x %d" % (self.m, self.m))
            if not _is_skew(Ji):
                raise ValueError("bracket matrices must be skew-symmetric")
        if self.quaternionic:
            if self.n is None or self.m != 4 * self.n or self.r != 3:
                raise ValueError("quaternionic spec needs m = 4n, r = 3")
            for Ji in self.J:
                if not _is_minus_identity(_mat_mul(Ji, Ji)):
                    raise ValueError("(J^i)^2 = -Id fails")
            if not _is_minus_identity(_mat_mul(_mat_mul(self.J[0], self.J[1]), self.J[2])):
                raise ValueError("J^1 J^2 J^3 = -Id fails")

    @property
    def dim(self):
        return self.m + self.r

    @property
    def Q(self):
        """Homogeneous (Hausdorff) dimension m + 2r."""
        return self.m + 2 * self.r

    @property
    def haar_factor_exact(self):
        """Nilpotentized Popp density against Lebesgue as (coefficient, power of n).

        Value is coeff * n**power; for the quaternionic group this is
        1/(8*(16n)^{3/2}) = (1/512) * n^{-3/2}.
        """
        if not self.quaternionic:
            raise ValueError("exact haar factor only defined for the quaternionic spec")
        return (Fraction(1, 512), Fraction(-3, 2))

    @property
    def haar_factor(self):
        coeff, power = self.haar_factor_exact
        return float(coeff) * float(self.n) ** float(power)

    def J_float(self):
        """Float view of the bracket matrices, shape (r, m, m)."""
        return np.array([[[float(v) for v in row] for row in Ji] for Ji in self.J])

    def bracket_b_matrices(self):
        """Vertical bracket components b^i_{ab} = -2 I^i_{ab} of an adapted frame.

        This is the sign convention of the Popp computation (b = -2 g(I X, X));
        the group law itself carries +2 I^i_{ab}.
        """
        return tuple(
            tuple(tuple(-2 * v for v in row) for row in Ji) for Ji in self.J
        )


@dataclass(frozen=True)
class GroupPoint:
    """A point (x, z) in exponential coordinates; identity is (0, 0)."""

    x: tuple
    z: tuple

    def as_floats(self):
        return np.array([float(v) for v in self.x]), np.array([float(v) for v in self.z])


def identity_point(spec):
    return GroupPoint(x=(0,) * spec.m, z=(0,) * spec.r)


# Component arrays of the three almost complex structures on one quaternionic
# block, in the frame convention I_i X_{4k+1} = X_{4k+i+1}.  These are the
# transposed right-multiplication matrices; with them the *arrays* satisfy
# J^1 J^2 J^3 = -Id (the operator identity I_1 I_2 I_3 = -Id holds for the
# transposes).
_QUATERNION_BLOCKS = (
    ((0, 1, 0, 0), (-1, 0, 0, 0), (0, 0, 0, -1), (0, 0, 1, 0)),
    ((0, 0, 1, 0), (0, 0, 0, 1), (-1, 0, 0, 0), (0, -1, 0, 0)),
    ((0, 0, 0, 1), (0, 0, -1, 0), (0, 1, 0, 0), (-1, 0, 0, 0)),
)


def make_quaternionic_spec(n):
    """Quaternionic Heisenberg group of level n (dimension 4n + 3)."""
    if not isinstance(n, int) or n < 1:
        raise ValueError("quaternionic level n must be a positive integer")
    m = 4 * n
    J = []
    for i in range(3):
        block = _QUATERNION_BLOCKS[i]
        rows = []
        for a in range(m):
            row = [Fraction(0)] * m
            if True:
                k, a4 = divmod(a, 4)
                for b4 in range(4):
                    v = block[a4][b4]
                    if v:
                        row[4 * k + b4] = Fraction(v)
            rows.append(tuple(row))
        J.append(tuple(rows))
    return GroupSpec(m=m, r=3, J=tuple(J), n=n, quaternionic=True)


def make_step_two_spec(J):
    """Generic step-two spec from a list of skew rational matrices."""
    J = tuple(_as_fraction_matrix(Ji) for Ji in J)
    if not J:
        raise ValueError("need at least one bracket matrix")
    return GroupSpec(m=len(J[0]), r=len(J), J=J)


def group_mul(spec, h, hp):
    """Group product h * hp; exact when the coordinates are exact."""
    if len(h.x) != spec.m or len(hp.x) != spec.m or len(h.z) != spec.r or len(hp.z) != spec.r:
        raise ValueError("point dimensions do not match the spec")
    x = tuple(a + b for a, b in zip(h.x, hp.x))
    z = []
    for i in range(spec.r):
        Ji = spec.J[i]
        acc = h.z[i] + hp.z[i]
        for a in range(spec.m):
            ha = h.x[a]
            if ha:
                row = Ji[a]
                acc = acc + 2 * ha * sum(row[b] * hp.x[b] for b in range(spec.m) if row[b])
        z.append(acc)
    return GroupPoint(x=x, z=tuple(z))


def group_inverse(h):
    return GroupPoint(x=tuple(-v for v in h.x), z=tuple(-v for v in h.z))


def dilate(spec, lam, h):
    """Anisotropic dilation delta_lam(x, z) = (lam x, lam^2 z), lam > 0."""
    if not lam > 0:
        raise ValueError("dilation parameter must be positive")
    return GroupPoint(x=tuple(lam * v for v in h.x), z=tuple(lam * lam * v for v in h.z))


def spec_to_json(spec):
    """Serialize a spec to a JSON document with rationals as "p/q" strings."""
    doc = {
        "n": spec.n,
        "m": spec.m,
        "r": spec.r,
        "quaternionic": spec.quaternionic,
        "J": [
            [[("%d/%d" % (v.numerator, v.denominator)) for v in row] for row in Ji]
            for Ji in spec.J
        ],
    }
    return json.dumps(doc, sort_keys=True)


def spec_from_json(text):
    doc = json.loads(text)
    J = tuple(
        tuple(tuple(Fraction(v) for v in row) for row in Ji) for Ji in doc["J"]
    )
    return GroupSpec(
        m=doc["m"], r=doc["r"], J=J, n=doc.get("n"), quaternionic=doc.get("quaternionic", False)
    )
