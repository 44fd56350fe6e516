"""Carnot groups in exponential coordinates of the first kind.

A group is built from strata dimensions and structure constants, validated
exactly (antisymmetry, Jacobi, grading, bracket generation), and equipped
with the polynomial group law obtained by truncating the
Baker-Campbell-Hausdorff series at the step of the group.  The law is
computed symbolically once, with rational coefficients, and compiled to a
term table that evaluates on numpy arrays.

Convention: exp(A)exp(B) = exp(A + B + [A,B]/2 + ...).  Inversion is
coordinate negation; dilations scale coordinate i by lambda**d_i.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "CarnotGroup",
    "GroupValidationError",
    "JacobiViolation",
    "GradingViolation",
    "GenerationFailure",
    "validate_group",
    "group_from_spec",
    "load_group",
    "BUILTIN_GROUPS",
]


class GroupValidationError(ValueError):
    """Structure constants do not define a stratified nilpotent algebra."""


class JacobiViolation(GroupValidationError):
    pass


class GradingViolation(GroupValidationError):
    pass


class GenerationFailure(GroupValidationError):
    pass


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, np.floating):
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational structure constant")


# ---------------------------------------------------------------------------
# polynomial term tables
#
# A polynomial in 2N variables (x_1..x_N, y_1..y_N) is a dict mapping the
# exponent tuple (len 2N) to a Fraction.  The group law is one such dict per
# output coordinate.
# ---------------------------------------------------------------------------


def _poly_add(p: dict, q: dict, scale: Fraction) -> None:
    """In place p += scale*q, dropping exact zeros."""
    for mono, c in q.items():
        new = p.get(mono, Fraction(0)) + scale * c
        if new:
            p[mono] = new
        else:
            p.pop(mono, None)


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            mono = tuple(a + b for a, b in zip(m1, m2))
            new = out.get(mono, Fraction(0)) + c1 * c2
            if new:
                out[mono] = new
            else:
                out.pop(mono, None)
    return out


class _LawTable:
    """Compiled group law: z_k(x, y) as term tables, rational and float."""

    def __init__(self, coord_polys: list[dict]):
        self.coord_polys = coord_polys
        n = len(coord_polys)
        self._compiled = []
        for k, poly in enumerate(coord_polys):
            exps = np.array(sorted(poly.keys()), dtype=np.int64).reshape(len(poly), 2 * n)
            coeffs = np.array([float(poly[tuple(e)]) for e in exps])
            self._compiled.append((exps, coeffs))

    def eval_exact(self, a: Sequence, b: Sequence) -> tuple:
        """Group product with scalar (possibly Fraction) coordinates."""
        vals = tuple(a) + tuple(b)
        out = []
        for poly in self.coord_polys:
            acc = 0
            for mono, c in poly.items():
                term = c
                for v, e in zip(vals, mono):
                    if e:
                        term = term * v**e
                acc = acc + term
            out.append(acc)
        return tuple(out)

    def eval_many(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vectorized group product; a, b broadcastable arrays of shape (..., N)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a, b = np.broadcast_arrays(a, b)
        n = a.shape[-1]
        out = np.empty_like(a)
        for k, (exps, coeffs) in enumerate(self._compiled):
            acc = np.zeros(a.shape[:-1])
            for row, c in zip(exps, coeffs):
                term = np.full(a.shape[:-1], c)
                for i in range(n):
                    e = row[i]
                    if e == 1:
                        term = term * a[..., i]
                    elif e > 1:
                        term = term * a[..., i] ** e
                for j in range(n):
                    e = row[n + j]
                    if e == 1:
                        term = term * b[..., j]
                    elif e > 1:
                        term = term * b[..., j] ** e
                acc += term
            out[..., k] = acc
        return out


# ---------------------------------------------------------------------------
# Dynkin's form of the BCH series
# ---------------------------------------------------------------------------


def _bracket_vec(u: list[dict], v: list[dict], brackets, n: int) -> list[dict]:
    """Lie bracket of algebra-valued polynomials, via the structure constants."""
    out: list[dict] = [{} for _ in range(n)]
    for (i, j), comps in brackets.items():
        if not u[i] or not v[j]:
            continue
        prod = _poly_mul(u[i], v[j])
        if not prod:
            continue
        for k, c in comps.items():
            _poly_add(out[k], prod, c)
    return out


def _dynkin_sequences(step: int):
    """Yield (pairs, total_degree) with pairs = ((r1,s1),...,(rn,sn)), each
    pair nonzero, sum of degrees <= step."""

    def rec(prefix: list, budget: int):
        if prefix:
            yield tuple(prefix), step - budget
        if budget == 0:
            return
        for r in range(budget + 1):
            for t in range(budget - r + 1):
                if r + t == 0:
                    continue
                prefix.append((r, t))
                yield from rec(prefix, budget - r - t)
                prefix.pop()

    yield from rec([], step)


def _bch_law(strata: Sequence[int], brackets, d: Sequence[int]) -> list[dict]:
    """Coordinates of log(exp(A)exp(B)) truncated at the group's step."""
    step = len(strata)
    n = len(d)

    def letter(is_a: bool) -> list[dict]:
        vec = [{} for _ in range(n)]
        for i in range(n):
            mono = [0] * (2 * n)
            mono[i if is_a else n + i] = 1
            vec[i][tuple(mono)] = Fraction(1)
        return vec

    lett_a = letter(True)
    lett_b = letter(False)

    z: list[dict] = [{} for _ in range(n)]
    for pairs, degree in _dynkin_sequences(step):
        word: list[bool] = []
        for r, t in pairs:
            word.extend([True] * r)
            word.extend([False] * t)
        if len(word) >= 2 and word[-1] == word[-2]:
            continue  # innermost [X,X] = 0
        nested = lett_a if word[-1] else lett_b
        for is_a in reversed(word[:-1]):
            nested = _bracket_vec(lett_a if is_a else lett_b, nested, brackets, n)
        if not any(nested):
            continue
        m = len(pairs)
        denom = degree
        for r, t in pairs:
            denom *= math.factorial(r) * math.factorial(t)
        scale = Fraction((-1) ** (m - 1), m * denom)
        for k in range(n):
            _poly_add(z[k], nested[k], scale)
    return z


# ---------------------------------------------------------------------------
# exact linear algebra for the validation rank check
# ---------------------------------------------------------------------------


def _rank_exact(rows: list[list[Fraction]]) -> int:
    rows = [list(r) for r in rows if any(r)]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    col = 0
    while rank < len(rows) and col < ncols:
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if pivot is None:
            col += 1
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pv = rows[rank][col]
        for r in range(rank + 1, len(rows)):
            if rows[r][col]:
                f = rows[r][col] / pv
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
        col += 1
    return rank


# ---------------------------------------------------------------------------
# the group object
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CarnotGroup:
    """Validated stratified group. Immutable; all operations are pure."""

    name: str
    strata: tuple[int, ...]
    step: int
    N: int
    d: tuple[int, ...]  # homogeneity of each coordinate
    h: tuple[int, ...]  # cumulative strata dimensions h_1..h_s
    Q: int
    brackets: Mapping[tuple[int, int], Mapping[int, Fraction]] = field(repr=False)
    law: _LawTable = field(repr=False)

    # -- group operations ---------------------------------------------------

    def multiply(self, a, b):
        """Group product a*b.

        Scalar sequences multiply exactly (Fractions stay Fractions); numpy
        arrays of shape (..., N) multiply vectorized in float.
        """
        if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
            return self.law.eval_many(a, b)
        if len(a) != self.N or len(b) != self.N:
            raise ValueError(f"expected points of dimension {self.N}")
        return self.law.eval_exact(a, b)

    def inverse(self, a):
        if isinstance(a, np.ndarray):
            return -a
        if len(a) != self.N:
            raise ValueError(f"expected a point of dimension {self.N}")
        return tuple(-v for v in a)

    def identity(self) -> tuple:
        return (0,) * self.N

    def dilate(self, lam, x):
        """Anisotropic dilation delta_lam; coordinate i scales by lam**d_i."""
        if not lam > 0:
            raise ValueError("dilation factor must be positive")
        if isinstance(x, np.ndarray):
            scale = np.array([float(lam) ** di for di in self.d])
            return x * scale
        if len(x) != self.N:
            raise ValueError(f"expected a point of dimension {self.N}")
        return tuple(v * lam**di for v, di in zip(x, self.d))

    def left_translate(self, g, pts):
        """g * pts for an array of points."""
        return self.law.eval_many(np.asarray(g, dtype=float), pts)

    # -- derived structure ---------------------------------------------------

    def stratum_of(self, i: int) -> int:
        """Stratum index (1-based) of basis coordinate i (0-based)."""
        return self.d[i]

    def left_invariant_fields(self) -> list[list[dict]]:
        """Coefficient polynomials of the left-invariant frame.

        Returns fields[i][j] = coefficient of d/dx_j in X_i, as a term table
        {exponent tuple (len N): Fraction}; X_i f(x) = (d/dt) f(x * t e_i)
        at t = 0, read off the group law.
        """
        fields = []
        for i in range(self.N):
            row = []
            for j in range(self.N):
                coeff: dict = {}
                for mono, c in self.law.coord_polys[j].items():
                    ymono = mono[self.N :]
                    if sum(ymono) == 1 and ymono[i] == 1:
                        coeff[mono[: self.N]] = c
                row.append(coeff)
            fields.append(row)
        return fields

    def describe(self) -> str:
        d = ",".join(str(v) for v in self.d)
        return f"N={self.N} s={self.step} Q={self.Q} d=({d})"


# ---------------------------------------------------------------------------
# validation and construction
# ---------------------------------------------------------------------------


def _normalize_brackets(raw, N: int, tol: Fraction):
    """Antisymmetrize the raw table; check consistency when both (i,j) and
    (j,i) are supplied."""
    table: dict[tuple[int, int], dict[int, Fraction]] = {}
    for (i, j), comps in raw.items():
        if not (0 <= i < N and 0 <= j < N):
            raise GroupValidationError(f"bracket index ({i + 1},{j + 1}) out of range")
        comps = {k: _as_fraction(c) for k, c in comps.items() if _as_fraction(c)}
        for k in comps:
            if not 0 <= k < N:
                raise GroupValidationError(f"bracket target {k + 1} out of range")
        if i == j:
            if comps:
                raise GroupValidationError(f"[X{i + 1},X{i + 1}] must vanish")
            continue
        table.setdefault((i, j), {})
        for k, c in comps.items():
            prev = table[(i, j)].get(k)
            if prev is not None and abs(prev - c) > tol:
                raise GroupValidationError(f"inconsistent duplicate bracket ({i + 1},{j + 1})")
            table[(i, j)][k] = c
        mirrored = {k: -c for k, c in comps.items()}
        if (j, i) in table:
            keys = set(table[(j, i)]) | set(mirrored)
            for k in keys:
                if abs(table[(j, i)].get(k, Fraction(0)) - mirrored.get(k, Fraction(0))) > tol:
                    raise GroupValidationError(
                        f"antisymmetry violated between ({i + 1},{j + 1}) and ({j + 1},{i + 1})"
                    )
        else:
            table[(j, i)] = mirrored
    return {ij: comps for ij, comps in table.items() if comps}


def _bracket_of_vectors(u: dict[int, Fraction], v: dict[int, Fraction], brackets):
    out: dict[int, Fraction] = {}
    for i, ci in u.items():
        for j, cj in v.items():
            for k, c in brackets.get((i, j), {}).items():
                val = out.get(k, Fraction(0)) + ci * cj * c
                if val:
                    out[k] = val
                else:
                    out.pop(k, None)
    return out


def validate_group(strata: Sequence[int], brackets, name: str = "custom") -> CarnotGroup:
    """Build a CarnotGroup from strata dimensions and structure constants.

    Parameters
    ----------
    strata : sequence of positive ints, the dimensions m_1..m_s.
    brackets : mapping (i, j) -> {k: coeff} with 0-based basis indices,
        giving [X_i, X_j] = sum_k coeff * X_k.  Only one orientation of each
        pair is required; the other is filled by antisymmetry.

    Raises
    ------
    GradingViolation, JacobiViolation, GenerationFailure
        Checked exactly in rational arithmetic when the constants are
        int/Fraction, with tolerance 1e-10 otherwise.
    """
    strata = tuple(int(m) for m in strata)
    if not strata or any(m <= 0 for m in strata):
        raise GroupValidationError("strata dimensions must be positive")
    step = len(strata)
    N = sum(strata)
    h = tuple(itertools.accumulate(strata))
    d = tuple(j + 1 for j, m in enumerate(strata) for _ in range(m))
    Q = sum((j + 1) * m for j, m in enumerate(strata))

    exact = all(
        isinstance(c, (int, Fraction, np.integer))
        for comps in brackets.values()
        for c in comps.values()
    )
    tol = Fraction(0) if exact else Fraction(1, 10**10)

    table = _normalize_brackets(brackets, N, tol)

    # grading: [V_a, V_b] lands in V_{a+b}, empty past the step
    for (i, j), comps in table.items():
        target = d[i] + d[j]
        for k, c in comps.items():
            if abs(c) <= tol:
                continue
            if target > step or d[k] != target:
                raise GradingViolation(
                    f"[X{i + 1},X{j + 1}] hits X{k + 1} (stratum {d[k]}), "
                    f"expected stratum {target}"
                )

    # Jacobi identity on all basis triples
    for a in range(N):
        for b in range(a + 1, N):
            for c in range(b + 1, N):
                acc: dict[int, Fraction] = {}
                for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
                    inner = table.get((y, z), {})
                    for k, val in _bracket_of_vectors({x: Fraction(1)}, inner, table).items():
                        cur = acc.get(k, Fraction(0)) + val
                        if cur:
                            acc[k] = cur
                        else:
                            acc.pop(k, None)
                bad = {k: v for k, v in acc.items() if abs(v) > tol}
                if bad:
                    raise JacobiViolation(
                        f"Jacobi identity fails on (X{a + 1},X{b + 1},X{c + 1}): "
                        f"residual {bad}"
                    )

    # generation: brackets of V_1 with V_a must span V_{a+1}
    for a in range(1, step):
        lo_prev = 0 if a == 1 else h[a - 2]
        rows = []
        for i in range(0, h[0]):
            for j in range(lo_prev, h[a - 1]):
                comps = table.get((i, j), {})
                rows.append([comps.get(k, Fraction(0)) for k in range(h[a - 1], h[a])])
        if _rank_exact(rows) < strata[a]:
            raise GenerationFailure(
                f"[V_1, V_{a}] does not span V_{a + 1} (dimension {strata[a]})"
            )

    law_polys = _bch_law(strata, table, d)
    # linear part must be x + y; every term must be weight-homogeneous
    for k, poly in enumerate(law_polys):
        for mono, coeff in poly.items():
            w = sum(e * di for e, di in zip(mono[:N], d)) + sum(
                e * di for e, di in zip(mono[N:], d)
            )
            assert w == d[k], "BCH term violates dilation homogeneity"
        lin_x = tuple(1 if m == k else 0 for m in range(N)) + (0,) * N
        lin_y = (0,) * N + tuple(1 if m == k else 0 for m in range(N))
        assert poly.get(lin_x) == 1 and poly.get(lin_y) == 1

    return CarnotGroup(
        name=name,
        strata=strata,
        step=step,
        N=N,
        d=d,
        h=h,
        Q=Q,
        brackets=table,
        law=_LawTable(law_polys),
    )


def group_from_spec(spec: Mapping) -> CarnotGroup:
    """Build a group from the JSON specification format:
    {"strata": [m1,...,ms], "brackets": [{"i":1,"j":2,"coeffs":{"3":1.0}}, ...]}
    (indices 1-based in the file)."""
    strata = spec["strata"]
    brackets: dict[tuple[int, int], dict[int, Fraction]] = {}
    for entry in spec.get("brackets", []):
        i, j = int(entry["i"]) - 1, int(entry["j"]) - 1
        comps = {int(k) - 1: v for k, v in entry["coeffs"].items()}
        key = (i, j)
        if key in brackets:
            raise GroupValidationError(f"duplicate bracket entry ({i + 1},{j + 1})")
        brackets[key] = {k: _as_fraction(v) for k, v in comps.items()}
    return validate_group(strata, brackets, name=str(spec.get("name", "custom")))


def _euclidean(n: int) -> CarnotGroup:
    return validate_group([n], {}, name=f"euclidean:{n}")


def _heisenberg(n: int) -> CarnotGroup:
    brackets = {(i, n + i): {2 * n: Fraction(1)} for i in range(n)}
    return validate_group([2 * n, 1], brackets, name=f"heisenberg:{n}")


def _engel() -> CarnotGroup:
    brackets = {(0, 1): {2: Fraction(1)}, (0, 2): {3: Fraction(1)}}
    return validate_group([2, 1, 1], brackets, name="engel")


BUILTIN_GROUPS = {
    "euclidean": _euclidean,
    "heisenberg": _heisenberg,
    "engel": _engel,
}


def load_group(key: str) -> CarnotGroup:
    """Load a named group: "euclidean:n", "heisenberg:n", "engel"."""
    base, _, arg = key.partition(":")
    base = base.strip().lower()
    if base not in BUILTIN_GROUPS:
        raise KeyError(f"unknown group {key!r}; known: {sorted(BUILTIN_GROUPS)}")
    if base == "engel":
        if arg:
            raise KeyError("engel takes no parameter")
        return _engel()
    if not arg:
        raise KeyError(f"group {base!r} needs a dimension parameter, e.g. {base}:1")
    n = int(arg)
    if n <= 0:
        raise KeyError("group dimension parameter must be positive")
    return BUILTIN_GROUPS[base](n)
