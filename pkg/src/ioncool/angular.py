"""Clebsch-Gordan coefficients for half-integer and integer momenta (Racah formula)."""

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt


def _is_int(x) -> bool:
    return Fraction(x).denominator == 1


@lru_cache(maxsize=None)
def _cg(j1, m1, j2, m2, j, m) -> float:
    if m1 + m2 != m:
        return 0.0
    if not (abs(j1 - j2) <= j <= j1 + j2) or not _is_int(j1 + j2 + j):
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0
    f = lambda x: factorial(int(x))  # noqa: E731
    pref = (2 * j + 1) * f(j1 + j2 - j) * f(j1 - j2 + j) * f(-j1 + j2 + j) / f(j1 + j2 + j + 1)
    pref *= f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j + m) * f(j - m)
    total = 0.0
    k = 0
    while True:
        dens = [k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k]
        if dens[1] < 0 or dens[2] < 0 or dens[3] < 0:
            break
        if min(dens) >= 0:
            prod = 1
            for d in dens:
                prod *= f(d)
            total += (-1) ** k / prod
        k += 1
    return sqrt(pref) * total


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1; j2 m2 | j m> with the Condon-Shortley phase convention."""
    args = tuple(Fraction(x).limit_denominator(2) for x in (j1, m1, j2, m2, j, m))
    if not all(_is_int(2 * a) for a in args):
        raise ValueError(f"angular momenta must be multiples of 1/2: {args}")
    return _cg(*args)


def dipole_cg(j_lower, m_lower, j_upper, m_upper) -> float:
    """Coupling factor <J_l m_l; 1 q | J_u m_u> for an E1 transition, q = m_u - m_l.

    Summing the squares over all lower sublevels (and q) gives 1 for every upper
    sublevel, so the same factors set decay branching within one lower level.
    """
    q = Fraction(m_upper) - Fraction(m_lower)
    if abs(q) > 1:
        return 0.0
    return clebsch_gordan(j_lower, m_lower, 1, q, j_upper, m_upper)
