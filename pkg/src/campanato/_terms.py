"""Sparse term-table arithmetic shared by the group law and polynomials.

A term table maps an exponent tuple to a coefficient (Fraction or float).
Exact zeros are dropped so rational computations stay canonical.
"""

from __future__ import annotations

from fractions import Fraction


def poly_add(p: dict, q: dict, scale=Fraction(1)) -> None:
    """In place p += scale*q."""
    for mono, c in q.items():
        new = p.get(mono, 0) + scale * c
        if new:
            p[mono] = new
        else:
            p.pop(mono, None)


def poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            mono = tuple(a + b for a, b in zip(m1, m2))
            new = out.get(mono, 0) + c1 * c2
            if new:
                out[mono] = new
            else:
                out.pop(mono, None)
    return out


def poly_pow(p: dict, n: int, nvars: int) -> dict:
    out = {(0,) * nvars: Fraction(1)}
    for _ in range(n):
        out = poly_mul(out, p)
    return out


def poly_scale(p: dict, c) -> dict:
    if not c:
        return {}
    return {mono: c * v for mono, v in p.items()}
