"""Truncated multivariate Taylor polynomials.

A jet stores the coefficients ``c[a]`` of ``sum_a c[a] h^a`` for exponent
vectors ``a`` inside a box ``0 <= a <= n`` (componentwise).  Products are
truncated to the box, which is all that is needed to read off the single
mixed derivative ``d^n`` at the end: every monomial outside the box either
has an exponent too large in some variable or can never be multiplied back
into the box.
"""
from itertools import product
from math import factorial

import numpy as np


class TaylorJet:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    # -- constructors --------------------------------------------------------
    @classmethod
    def constant(cls, box, value):
        c = np.zeros(tuple(n + 1 for n in box))
        c[(0,) * len(box)] = value
        return cls(c)

    @classmethod
    def variable(cls, box, i, value=0.0):
        """The jet of ``value + h_i``."""
        jet = cls.constant(box, value)
        if box[i] >= 1:
            idx = [0] * len(box)
            idx[i] = 1
            jet.c[tuple(idx)] = 1.0
        return jet

    # -- queries -------------------------------------------------------------
    @property
    def box(self):
        return tuple(s - 1 for s in self.c.shape)

    @property
    def value(self):
        return float(self.c.flat[0])

    def coefficient(self, exps):
        return float(self.c[tuple(exps)])

    def derivative(self, exps):
        """Mixed partial derivative ``d^exps`` at the expansion point."""
        return self.coefficient(exps) * float(np.prod([factorial(e) for e in exps]))

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, TaylorJet):
            return TaylorJet(self.c + other.c)
        out = self.c.copy()
        out.flat[0] += other
        return TaylorJet(out)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, s):
        return TaylorJet(self.c * s)

    def __mul__(self, other):
        if not isinstance(other, TaylorJet):
            return TaylorJet(self.c * other)
        return TaylorJet(_truncated_product(self.c, other.c))

    def __neg__(self):
        return TaylorJet(-self.c)

    def compose(self, coeffs):
        """``f(self)`` given ``coeffs[k]`` of ``f(v + h) = sum_k coeffs[k] h^k`` at ``v = self.value``."""
        h = self.c.copy()
        h.flat[0] = 0.0
        out = np.zeros_like(h)
        out.flat[0] = coeffs[-1]
        for a in coeffs[-2::-1]:
            out = _truncated_product(out, h)
            out.flat[0] += a
        return TaylorJet(out)


def _truncated_product(a, b):
    out = np.zeros_like(a)
    shape = a.shape
    for idx in zip(*np.nonzero(a)):
        src = tuple(slice(0, s - i) for s, i in zip(shape, idx))
        dst = tuple(slice(i, s) for s, i in zip(shape, idx))
        out[dst] += a[idx] * b[src]
    return out


def jet_mean(jets):
    acc = jets[0].c.copy()
    for j in jets[1:]:
        acc += j.c
    return TaylorJet(acc / len(jets))


def total_degree(box):
    return int(sum(box))


def box_monomials(box):
    return product(*(range(n + 1) for n in box))
