"""Dual activations.

A dual activation is the map ``t -> E[phi(z1) phi(z2)]`` for standard
Gaussians with correlation ``t``.  Only the dual is ever needed: kernels are
built by composing duals along the architecture graph, and the spectral
machinery needs their Taylor coefficients at (and around) a point.

Every shipped dual is normalized so that ``phi*(1) = 1``.
"""
from dataclasses import dataclass
from math import factorial, pi
from typing import NamedTuple

import numpy as np

# codes shared with the compiled kernels
IDENTITY, GAUSSIAN, CENTERED_EXP, POLY, RELU = range(5)
_CODES = {"identity": IDENTITY, "gaussian": GAUSSIAN,
          "centered_exp": CENTERED_EXP, "poly": POLY, "relu": RELU}


class DualClass(NamedTuple):
    kind: str          # identity | admissible | semi_admissible | poly_admissible | inadmissible
    order: int = 0     # J for poly_admissible

    def __str__(self):
        if self.kind == "poly_admissible":
            return f"poly_admissible({self.order})"
        return self.kind

    def supports_degree(self, n):
        """True if a node with this class can create interactions of total degree ``n``."""
        if self.kind in ("admissible", "semi_admissible"):
            return True
        return self.kind == "poly_admissible" and n <= self.order


@dataclass(frozen=True)
class DualActivation:
    name: str
    gamma: float = 0.0
    order: int = 0

    # -- values -------------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        g = self.gamma
        if self.name == "identity":
            return t.copy()
        if self.name == "gaussian":
            return np.exp(g * (t - 1.0))
        if self.name == "centered_exp":
            return np.expm1(g * t) / np.expm1(g)
        if self.name == "poly":
            return np.polynomial.polynomial.polyval(t, self.poly_coeffs())
        if self.name == "relu":
            t = np.clip(t, -1.0, 1.0)
            return (np.sqrt(1.0 - t * t) + (pi - np.arccos(t)) * t) / pi
        raise ValueError(f"unknown dual {self.name!r}")

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        g = self.gamma
        if self.name == "identity":
            return np.ones_like(t)
        if self.name == "gaussian":
            return g * np.exp(g * (t - 1.0))
        if self.name == "centered_exp":
            return g * np.exp(g * t) / np.expm1(g)
        if self.name == "poly":
            c = self.poly_coeffs()
            return np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(c))
        if self.name == "relu":
            return (pi - np.arccos(np.clip(t, -1.0, 1.0))) / pi
        raise ValueError(f"unknown dual {self.name!r}")

    # -- Taylor data ---------------------------------------------------------
    def poly_coeffs(self):
        """Monomial coefficients of the polynomial dual (degree ``order``)."""
        g = self.gamma
        c = np.array([0.0] + [g ** j / factorial(j) for j in range(1, self.order + 1)])
        return c / c.sum()

    def taylor(self, j):
        """j-th Taylor coefficient of phi* at 0."""
        return float(self.taylor_at(0.0, j)[j])

    def taylor_coeffs(self, n):
        return self.taylor_at(0.0, n)

    def taylor_at(self, c, n):
        """Coefficients ``a_0..a_n`` of ``phi*(c + h) = sum a_j h^j``."""
        c = float(c)
        g = self.gamma
        j = np.arange(n + 1)
        fact = np.array([float(factorial(i)) for i in range(n + 1)])
        if self.name == "identity":
            out = np.zeros(n + 1)
            out[0] = c
            if n >= 1:
                out[1] = 1.0
            return out
        if self.name == "gaussian":
            return np.exp(g * (c - 1.0)) * g ** j / fact
        if self.name == "centered_exp":
            out = np.exp(g * c) * g ** j / (fact * np.expm1(g))
            out[0] = np.expm1(g * c) / np.expm1(g)
            return out
        if self.name == "poly":
            a = self.poly_coeffs()
            out = np.zeros(n + 1)
            for k in range(min(n, self.order) + 1):
                out[k] = sum(a[i] * _binom(i, k) * c ** (i - k) for i in range(k, self.order + 1))
            return out
        if self.name == "relu":
            return _relu_taylor(c, n)
        raise ValueError(f"unknown dual {self.name!r}")

    # -- misc ----------------------------------------------------------------
    @property
    def cls(self):
        return classify(self)

    @property
    def code(self):
        return _CODES[self.name]

    @property
    def spec(self):
        if self.name in ("identity", "relu"):
            return self.name
        if self.name == "poly":
            return f"poly:{self.order}:{self.gamma!r}"
        return f"{self.name}:{self.gamma!r}"

    def __str__(self):
        return self.spec


def _binom(n, k):
    return factorial(n) // (factorial(k) * factorial(n - k))


def _series_pow(u, alpha, n):
    """Taylor coefficients of ``u(h)**alpha`` from those of ``u`` (u[0] > 0)."""
    u = list(u) + [0.0] * (n + 1 - len(u))
    f = [u[0] ** alpha]
    for k in range(1, n + 1):
        s = 0.0
        for j in range(1, k + 1):
            s += ((alpha + 1.0) * j - k) * u[j] * f[k - j]
        f.append(s / (k * u[0]))
    return np.array(f)


def _relu_taylor(c, n):
    out = np.zeros(n + 1)
    cc = min(max(c, -1.0), 1.0)
    out[0] = (np.sqrt(1.0 - cc * cc) + (pi - np.arccos(cc)) * cc) / pi
    if n >= 1:
        out[1] = (pi - np.arccos(cc)) / pi
    if n >= 2:
        if abs(cc) >= 1.0:
            raise ValueError("relu dual is not analytic at |t| = 1")
        # phi*'' = (1 - t^2)^(-1/2) / pi
        s = _series_pow([1.0 - cc * cc, -2.0 * cc, -1.0], -0.5, n - 2) / pi
        for k in range(2, n + 1):
            out[k] = s[k - 2] / (k * (k - 1))
    return out


# -- constructors -------------------------------------------------------------

def identity_dual():
    return DualActivation("identity")


def gaussian_dual(gamma=1.0):
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return DualActivation("gaussian", float(gamma))


def centered_exp_dual(gamma=1.0):
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return DualActivation("centered_exp", float(gamma))


def poly_dual(J, gamma=1.0):
    if int(J) != J or J < 1:
        raise ValueError("J must be an integer >= 1")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if J == 1:
        return identity_dual()
    return DualActivation("poly", float(gamma), int(J))


def relu_dual():
    return DualActivation("relu")


def classify(dual, max_order=12, tol=1e-12):
    """Strongest admissibility class consistent with the Taylor data at 0.

    Coefficients are compared through the derivatives ``j! a_j`` so that the
    factorial decay of the series does not masquerade as truncation.
    """
    a = dual.taylor_coeffs(max_order)
    d = np.array([a[j] * factorial(j) for j in range(max_order + 1)])
    nz = np.abs(d) > tol
    if not nz[0] and nz[1] and abs(d[1] - 1.0) <= tol and not nz[2:].any():
        return DualClass("identity")
    pos = d[1:] > tol
    if pos.all():
        return DualClass("admissible" if not nz[0] else "semi_admissible")
    # leading run of positive coefficients followed by exact zeros
    J = int(np.argmin(pos))
    if J >= 1 and not nz[J + 1:].any():
        return DualClass("poly_admissible", J)
    return DualClass("inadmissible")


def parse_dual(text):
    """Parse ``gaussian:1.0``, ``centered_exp:1.0``, ``poly:6:1.0``, ``identity`` or ``relu``."""
    parts = [s.strip() for s in str(text).strip().split(":")]
    name = parts[0].lower()
    try:
        if name == "identity" and len(parts) == 1:
            return identity_dual()
        if name == "relu" and len(parts) == 1:
            return relu_dual()
        if name in ("gaussian", "centered_exp") and len(parts) <= 2:
            gamma = float(parts[1]) if len(parts) == 2 else 1.0
            return gaussian_dual(gamma) if name == "gaussian" else centered_exp_dual(gamma)
        if name == "poly" and len(parts) in (2, 3):
            gamma = float(parts[2]) if len(parts) == 3 else 1.0
            return poly_dual(int(parts[1]), gamma)
    except ValueError as exc:
        raise ValueError(f"bad dual spec {text!r}: {exc}") from None
    raise ValueError(f"bad dual spec {text!r}; expected one of gaussian:G, "
                     "centered_exp:G, poly:J:G, identity, relu")


SHIPPED = ("identity", "gaussian:1.0", "centered_exp:1.0", "poly:6:1.0", "relu")
