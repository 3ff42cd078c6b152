"""Spherical harmonics toolbox.

Legendre polynomials in ``d`` dimensions (Gegenbauer polynomials normalized
by ``P_r(1) = 1``), harmonic dimension counts, quadrature under the weight
``(1 - t^2)^((d - 3)/2)``, explicit real bases on the circle and the 2-sphere
for addition-theorem checks, and zonal harmonics on radius-``sqrt(d)`` spheres.
"""
from math import comb, factorial, lgamma, pi, exp, sqrt

import numpy as np
from scipy import special


def surface_area(d):
    """Area of the unit sphere S^{d-1} in R^d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return 2.0 * exp(0.5 * d * np.log(pi) - lgamma(0.5 * d))


def area_ratio(d):
    """``|S_{d-1}| / |S_{d-2}|`` computed in log space (no underflow at large d)."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return exp(0.5 * np.log(pi) + lgamma(0.5 * (d - 1)) - lgamma(0.5 * d))


def harmonic_count(d, r):
    """Dimension N(d, r) of degree-``r`` spherical harmonics on S^{d-1}."""
    d, r = int(d), int(r)
    if d < 2 or r < 0:
        raise ValueError("need d >= 2 and r >= 0")
    if r == 0:
        return 1
    return (2 * r + d - 2) * comb(d + r - 3, r - 1) // r


def gegenbauer_eval(d, r, t):
    """Normalized Legendre polynomial P_r in dimension ``d`` (three-term recurrence)."""
    t = np.asarray(t, dtype=float)
    p_prev, p = np.ones_like(t), t.copy()
    if r == 0:
        return p_prev
    for n in range(1, r):
        p_prev, p = p, ((2 * n + d - 2) * t * p - n * p_prev) / (n + d - 2)
    return p


def gegenbauer_all(d, R, t):
    """Stack of P_0..P_R evaluated at ``t`` (shape ``(R + 1,) + t.shape``)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((R + 1,) + t.shape)
    out[0] = 1.0
    if R >= 1:
        out[1] = t
    for n in range(1, R):
        out[n + 1] = ((2 * n + d - 2) * t * out[n] - n * out[n - 1]) / (n + d - 2)
    return out


def _falling(x, k):
    out = 1.0
    for i in range(k):
        out *= x - i
    return out


def rodrigues_eval(d, r, t):
    """P_r from the Rodrigues formula, expanded by Leibniz' rule.

    ``P_r = c_r (1-t^2)^(-a) D^r (1-t^2)^(r+a)`` with ``a = (d-3)/2``; writing
    ``(1-t^2)^b = (1-t)^b (1+t)^b`` leaves the polynomial
    ``sum_j C(r,j) (-1)^j (b)_j (b)_{r-j} (1-t)^{r-j} (1+t)^j``.
    """
    t = np.asarray(t, dtype=float)
    b = r + (d - 3) / 2.0
    acc = np.zeros_like(t)
    for j in range(r + 1):
        acc += comb(r, j) * (-1) ** j * _falling(b, j) * _falling(b, r - j) \
            * (1 - t) ** (r - j) * (1 + t) ** j
    return acc / ((-1) ** r * _falling(b, r) * 2.0 ** r)


class GegenbauerBasis:
    """Monomial coefficient tables of P_0..P_R in dimension ``d``."""

    def __init__(self, d, R):
        if d < 2 or R < 0:
            raise ValueError("need d >= 2 and R >= 0")
        self.d, self.R = int(d), int(R)
        P = np.polynomial.polynomial
        coeffs = [np.array([1.0]), np.array([0.0, 1.0])]
        for n in range(1, R):
            nxt = P.polysub((2 * n + d - 2) * P.polymulx(coeffs[n]), n * coeffs[n - 1]) / (n + d - 2)
            coeffs.append(nxt)
        self.coeffs = [np.pad(c, (0, R + 1 - len(c))) for c in coeffs[:R + 1]]

    def __call__(self, r, t):
        return np.polynomial.polynomial.polyval(t, self.coeffs[r])

    def weight(self, t):
        return (1.0 - np.asarray(t) ** 2) ** ((self.d - 3) / 2.0)


def jacobi_rule(d, n=200):
    """Gauss-Jacobi nodes and weights for the weight ``(1-t^2)^((d-3)/2)`` on [-1, 1]."""
    a = (d - 3) / 2.0
    return special.roots_jacobi(n, a, a)


def gegenbauer_inner(d, r, s, n=200):
    """Quadrature value of the weighted integral of P_r P_s."""
    x, w = jacobi_rule(d, n)
    return float(np.sum(w * gegenbauer_eval(d, r, x) * gegenbauer_eval(d, s, x)))


def gegenbauer_norm(d, r):
    """Exact weighted integral of P_r^2: |S_{d-1}| / (N(d, r) |S_{d-2}|)."""
    return area_ratio(d) / harmonic_count(d, r)


# -- explicit real bases -----------------------------------------------------

def real_harmonics(d, r, xi):
    """Real orthonormal degree-``r`` basis on the unit sphere, d in {2, 3}.

    Normalized against the uniform probability measure, so that
    ``sum_l Y_l(a) Y_l(b) = N(d, r) P_r(a . b)``.  Returns shape ``(N, n)``.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if d == 2:
        th = np.arctan2(xi[:, 1], xi[:, 0])
        if r == 0:
            return np.ones((1, len(xi)))
        return np.sqrt(2.0) * np.stack([np.cos(r * th), np.sin(r * th)])
    if d == 3:
        z = np.clip(xi[:, 2], -1.0, 1.0)
        ph = np.arctan2(xi[:, 1], xi[:, 0])
        rows = [np.sqrt(2 * r + 1) * special.eval_legendre(r, z)]
        for m in range(1, r + 1):
            c = np.sqrt(2.0 * (2 * r + 1) * factorial(r - m) / factorial(r + m))
            plm = special.lpmv(m, r, z)
            rows.append(c * plm * np.cos(m * ph))
            rows.append(c * plm * np.sin(m * ph))
        return np.stack(rows)
    raise ValueError("explicit bases are shipped for d in {2, 3} only")


def sphere_sample(n, d, rng, radius=1.0):
    g = rng.standard_normal((n, d))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def addition_theorem_check(d, r, trials=100, seed=0):
    """Max deviation between P_r(a . b) and the basis sum over random unit pairs."""
    if d not in (2, 3):
        raise ValueError("addition theorem check needs d in {2, 3}")
    rng = np.random.default_rng(seed)
    a = sphere_sample(trials, d, rng)
    b = sphere_sample(trials, d, rng)
    lhs = gegenbauer_eval(d, r, np.clip(np.sum(a * b, axis=1), -1.0, 1.0))
    rhs = np.sum(real_harmonics(d, r, a) * real_harmonics(d, r, b), axis=0) / harmonic_count(d, r)
    return float(np.max(np.abs(lhs - rhs)))


def zonal_harmonic(d, r, e, xi):
    """Unit-norm zonal harmonic ``sqrt(N(d,r)) P_r(<xi, e>/sqrt(d))`` on the radius-sqrt(d) sphere."""
    e = np.asarray(e, dtype=float)
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    t = np.asarray(xi, dtype=float) @ e / sqrt(d)
    return sqrt(harmonic_count(d, r)) * gegenbauer_eval(d, r, np.clip(t, -1.0, 1.0))


def correlation_sample(n, d, rng):
    """Samples of ``<a, b>`` for independent uniform unit vectors in R^d."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return 2.0 * rng.beta((d - 1) / 2.0, (d - 1) / 2.0, size=n) - 1.0
