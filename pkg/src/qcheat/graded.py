"""Exact calculus of polynomial vector fields and 1-forms with anisotropic weights.

Coordinates split into m horizontal variables of weight 1 and r vertical
variables of weight 2.  Monomial weight is sum(exp_x) + 2 sum(exp_z); the
coordinate directions carry weight -1 / -2 as vector fields and +1 / +2 as
1-forms, so every object decomposes into eigenparts of the Lie derivative
along the grading generator P = sum x_a d/dx_a + 2 sum z_i d/dz_i.

Coefficients live in a pluggable commutative ring: exact rationals for
group-level identities, the free tensor-symbol ring for the curvature layer.
Equality is syntactic after dropping zero terms, so all identity checks are
exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "Poly",
    "GradedVectorField",
    "GradedForm",
    "euler_field",
    "left_invariant_frame",
    "homogeneous_part",
    "homogeneous_orders",
    "lie_bracket",
    "pair",
    "lie_derivative_poly",
    "lie_derivative_form",
    "frame_inversion",
    "format_poly",
]


def _is_zero(c):
    return c == 0


class Poly:
    """Sparse polynomial: dict of exponent tuples to ring coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        t = {}
        if terms:
            for e, c in terms.items():
                if not _is_zero(c):
                    t[e] = c
        self.terms = t

    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    @classmethod
    def constant(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars, a, one=Fraction(1)):
        e = [0] * nvars
        e[a] = 1
        return cls(nvars, {tuple(e): one})

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.nvars == other.nvars and self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __add__(self, other):
        t = dict(self.terms)
        for e, c in other.terms.items():
            s = t.get(e)
            s = c if s is None else s + c
            if _is_zero(s):
                t.pop(e, None)
            else:
                t[e] = s
        out = Poly(self.nvars)
        out.terms = t
        return out

    def __neg__(self):
        out = Poly(self.nvars)
        out.terms = {e: -c for e, c in self.terms.items()}
        return out

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        t = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                c = c1 * c2
                s = t.get(e)
                s = c if s is None else s + c
                if _is_zero(s):
                    t.pop(e, None)
                else:
                    t[e] = s
        out = Poly(self.nvars)
        out.terms = t
        return out

    def scale(self, c):
        if _is_zero(c):
            return Poly(self.nvars)
        out = Poly(self.nvars)
        out.terms = {}
        for e, v in self.terms.items():
            s = v * c
            if not _is_zero(s):
                out.terms[e] = s
        return out

    def diff(self, a):
        t = {}
        for e, c in self.terms.items():
            k = e[a]
            if k:
                e2 = list(e)
                e2[a] = k - 1
                t[tuple(e2)] = c * k
        out = Poly(self.nvars)
        out.terms = t
        return out

    def subs_values(self, values):
        """Evaluate at a point (list of ring elements), staying in the ring."""
        total = None
        for e, c in self.terms.items():
            v = c
            for a, k in enumerate(e):
                for _ in range(k):
                    v = v * values[a]
            total = v if total is None else total + v
        return total

    def map_coeffs(self, fn):
        out = Poly(self.nvars)
        for e, c in self.terms.items():
            v = fn(c)
            if not _is_zero(v):
                out.terms[e] = v
        return out


def _weights(m, r):
    return (1,) * m + (2,) * r


def monomial_weight(e, weights):
    return sum(k * w for k, w in zip(e, weights))


@dataclass(frozen=True)
class GradedVectorField:
    """Vector field sum_a comps[a] d/dxi_a; direction a has weight -weights[a]."""

    m: int
    r: int
    comps: tuple  # nvars Polys

    @property
    def nvars(self):
        return self.m + self.r

    @property
    def weights(self):
        return _weights(self.m, self.r)

    def is_zero(self):
        return all(p.is_zero() for p in self.comps)

    def apply(self, f):
        """Derivation on a polynomial: sum_a comps[a] * df/dxi_a."""
        out = Poly.zero(self.nvars)
        for a, p in enumerate(self.comps):
            if not p.is_zero():
                out = out + p * f.diff(a)
        return out

    def __add__(self, other):
        return GradedVectorField(
            self.m, self.r, tuple(a + b for a, b in zip(self.comps, other.comps))
        )

    def __neg__(self):
        return GradedVectorField(self.m, self.r, tuple(-p for p in self.comps))

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return GradedVectorField(self.m, self.r, tuple(p.scale(c) for p in self.comps))

    def mul_poly(self, f):
        return GradedVectorField(self.m, self.r, tuple(f * p for p in self.comps))


@dataclass(frozen=True)
class GradedForm:
    """1-form sum_a comps[a] dxi_a; direction a has weight +weights[a]."""

    m: int
    r: int
    comps: tuple

    @property
    def nvars(self):
        return self.m + self.r

    @property
    def weights(self):
        return _weights(self.m, self.r)

    def is_zero(self):
        return all(p.is_zero() for p in self.comps)

    def __add__(self, other):
        return GradedForm(self.m, self.r, tuple(a + b for a, b in zip(self.comps, other.comps)))

    def __neg__(self):
        return GradedForm(self.m, self.r, tuple(-p for p in self.comps))

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return GradedForm(self.m, self.r, tuple(p.scale(c) for p in self.comps))

    def mul_poly(self, f):
        return GradedForm(self.m, self.r, tuple(f * p for p in self.comps))


def zero_vf(m, r):
    nv = m + r
    return GradedVectorField(m, r, tuple(Poly.zero(nv) for _ in range(nv)))


def zero_form(m, r):
    nv = m + r
    return GradedForm(m, r, tuple(Poly.zero(nv) for _ in range(nv)))


def basis_vf(m, r, a, one=Fraction(1)):
    nv = m + r
    comps = [Poly.zero(nv) for _ in range(nv)]
    comps[a] = Poly.constant(nv, one)
    return GradedVectorField(m, r, tuple(comps))


def basis_form(m, r, a, one=Fraction(1)):
    nv = m + r
    comps = [Poly.zero(nv) for _ in range(nv)]
    comps[a] = Poly.constant(nv, one)
    return GradedForm(m, r, tuple(comps))


def euler_field(m, r, one=Fraction(1)):
    """Grading generator P = sum x_a d/dx_a + 2 sum z_i d/dz_i."""
    nv = m + r
    comps = []
    for a in range(nv):
        w = 1 if a < m else 2
        comps.append(Poly.variable(nv, a, one * w))
    return GradedVectorField(m, r, tuple(comps))


def left_invariant_frame(spec, scalar=Fraction):
    """Left-invariant frame of the tangent group.

    X_a = d/dx_a + 2 sum_{b,i} I^i_{ba} x_b d/dz_i   (order -1)
    V_i = 2 d/dz_i                                   (order -2)

    `scalar` lifts exact rationals into the coefficient ring.
    """
    m, r = spec.m, spec.r
    nv = m + r
    Xs = []
    for a in range(m):
        comps = [Poly.zero(nv) for _ in range(nv)]
        comps[a] = Poly.constant(nv, scalar(1))
        for i in range(r):
            coeffs = {}
            for b in range(m):
                v = spec.J[i][b][a]
                if v:
                    e = [0] * nv
                    e[b] = 1
                    coeffs[tuple(e)] = scalar(2 * v)
            comps[m + i] = comps[m + i] + Poly(nv, coeffs)
        Xs.append(GradedVectorField(m, r, tuple(comps)))
    Vs = []
    for i in range(r):
        comps = [Poly.zero(nv) for _ in range(nv)]
        comps[m + i] = Poly.constant(nv, scalar(2))
        Vs.append(GradedVectorField(m, r, tuple(comps)))
    return Xs, Vs


def lie_bracket(X, Y):
    """Coordinate Lie bracket [X, Y]; order-additive on homogeneous fields."""
    nv = X.nvars
    comps = []
    for a in range(nv):
        comps.append(X.apply(Y.comps[a]) - Y.apply(X.comps[a]))
    return GradedVectorField(X.m, X.r, tuple(comps))


def pair(omega, X):
    """Pointwise pairing <omega, X> as a polynomial."""
    out = Poly.zero(X.nvars)
    for wa, xa in zip(omega.comps, X.comps):
        if not (wa.is_zero() or xa.is_zero()):
            out = out + wa * xa
    return out


def lie_derivative_poly(X, f):
    return X.apply(f)


def lie_derivative_form(X, omega):
    """(L_X omega)_a = X(omega_a) + sum_b omega_b d(X_b)/dxi_a."""
    nv = X.nvars
    comps = []
    for a in range(nv):
        p = X.apply(omega.comps[a])
        for b in range(nv):
            xb = X.comps[b]
            if not (omega.comps[b].is_zero() or xb.is_zero()):
                p = p + omega.comps[b] * xb.diff(a)
        comps.append(p)
    return GradedForm(X.m, X.r, tuple(comps))


def homogeneous_part(obj, l, m=None, r=None):
    """Component of homogeneous order l (Lie-derivative eigenvalue along P).

    Accepts fields, forms, or plain polynomials (the latter need the m/r
    split since functions carry no direction weights).
    """
    if isinstance(obj, Poly):
        if m is None or r is None:
            raise TypeError("polynomial input needs the m/r weight split")
        return _poly_weight_part(obj, _weights(m, r), l)
    w = obj.weights
    if isinstance(obj, GradedVectorField):
        comps = []
        for a, p in enumerate(obj.comps):
            want = l + w[a]
            comps.append(_poly_weight_part(p, w, want))
        return GradedVectorField(obj.m, obj.r, tuple(comps))
    if isinstance(obj, GradedForm):
        comps = []
        for a, p in enumerate(obj.comps):
            want = l - w[a]
            comps.append(_poly_weight_part(p, w, want))
        return GradedForm(obj.m, obj.r, tuple(comps))
    raise TypeError("unsupported object: %r" % type(obj))


def poly_part(f, m, r, l):
    """Weight-l homogeneous part of a polynomial (functions have order = weight)."""
    return _poly_weight_part(f, _weights(m, r), l)


def _poly_weight_part(p, weights, want):
    out = Poly(p.nvars)
    for e, c in p.terms.items():
        if monomial_weight(e, weights) == want:
            out.terms[e] = c
    return out


def homogeneous_orders(obj):
    """Sorted list of orders on which the object has nonzero components."""
    w = obj.weights
    orders = set()
    if isinstance(obj, GradedVectorField):
        for a, p in enumerate(obj.comps):
            for e in p.terms:
                orders.add(monomial_weight(e, w) - w[a])
    elif isinstance(obj, GradedForm):
        for a, p in enumerate(obj.comps):
            for e in p.terms:
                orders.add(monomial_weight(e, w) + w[a])
    else:
        raise TypeError("unsupported object: %r" % type(obj))
    return sorted(orders)


def frame_inversion(theta_exp, eta_exp, frame_x, frame_v, max_order, one=Fraction(1)):
    """Invert a coframe expansion against the nilpotent frame.

    theta_exp[g] / eta_exp[i] map homogeneous order -> GradedForm for the
    horizontal / vertical coframe expansions (orders absent from the dict are
    zero; theta starts at 1, eta at 2).  frame_x / frame_v are the order -1 /
    -2 nilpotent frame fields.  Returns, for every frame element (first the m
    horizontal targets X_a, then the r vertical targets V_i), the coefficient
    table of its expansion

        E = sum_g s[g, l] Xtilde_g + sum_j r[j, l] Vtilde_j

    as dicts {(g, l): Poly} / {(j, l): Poly} with l = 0..max_order, following
    the duality recursion order by order (r first, then s, at each l).
    Requires the coframe and frame to be dual at lowest order.
    """
    m, r = len(frame_x), len(frame_v)
    nv = frame_x[0].nvars

    def pairing(form_table, order, field):
        form = form_table.get(order)
        if form is None:
            return Poly.zero(nv)
        return pair(form, field)

    # duality at lowest order
    for g in range(m):
        for b in range(m):
            want = Poly.constant(nv, one) if g == b else Poly.zero(nv)
            if pairing(theta_exp[g], 1, frame_x[b]) != want:
                raise ValueError("theta^(1) and the horizontal frame are not dual")
        for j in range(r):
            if not pairing(theta_exp[g], 1, frame_v[j]).is_zero():
                raise ValueError("theta^(1) must annihilate the vertical frame")
    for i in range(r):
        for j in range(r):
            want = Poly.constant(nv, one) if i == j else Poly.zero(nv)
            if pairing(eta_exp[i], 2, frame_v[j]) != want:
                raise ValueError("eta^(2) and the vertical frame are not dual")

    results = []
    for target in range(m + r):
        s = {}
        rr = {}
        for g in range(m):
            s[(g, 0)] = (
                Poly.constant(nv, one) if (target < m and g == target) else Poly.zero(nv)
            )
        for j in range(r):
            rr[(j, 0)] = (
                Poly.constant(nv, one)
                if (target >= m and j == target - m)
                else Poly.zero(nv)
            )
        for l in range(1, max_order + 1):
            for i in range(r):
                acc = Poly.zero(nv)
                for mm in range(l):
                    for b in range(m):
                        if not s[(b, mm)].is_zero():
                            acc = acc + s[(b, mm)] * pairing(eta_exp[i], l - mm + 1, frame_x[b])
                    for j in range(r):
                        if not rr[(j, mm)].is_zero():
                            acc = acc + rr[(j, mm)] * pairing(eta_exp[i], l - mm + 2, frame_v[j])
                rr[(i, l)] = -acc
            for g in range(m):
                acc = Poly.zero(nv)
                for mm in range(l):
                    for b in range(m):
                        if not s[(b, mm)].is_zero():
                            acc = acc + s[(b, mm)] * pairing(theta_exp[g], l - mm + 1, frame_x[b])
                for mm in range(l + 1):
                    for j in range(r):
                        if not rr[(j, mm)].is_zero():
                            acc = acc + rr[(j, mm)] * pairing(theta_exp[g], l - mm + 2, frame_v[j])
                s[(g, l)] = -acc
        results.append({"s": s, "r": rr})
    return results


def format_poly(p, m, r):
    """Deterministic text rendering for golden tests."""
    if p.is_zero():
        return "0"
    names = ["x%d" % (a + 1) for a in range(m)] + ["z%d" % (i + 1) for i in range(r)]
    weights = _weights(m, r)
    keys = sorted(p.terms, key=lambda e: (monomial_weight(e, weights), e))
    parts = []
    for e in keys:
        c = p.terms[e]
        factors = []
        for a, k in enumerate(e):
            if k == 1:
                factors.append(names[a])
            elif k > 1:
                factors.append("%s^%d" % (names[a], k))
        mono = "*".join(factors) if factors else "1"
        parts.append("(%s)*%s" % (c, mono))
    return " + ".join(parts)
