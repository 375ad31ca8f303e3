"""Exact rational reproduction of the one-dimensional degenerate example

    u(t) = int_0^t int_0^s chi_Omega(tau) dtau ds,   Omega = union of intervals I_j,

where the density of Omega near 0 tends to zero so that u(r) = o(r^2).
Everything here is Fraction arithmetic; no floats are involved.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

DEFAULT_J = 12


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return Fraction(int(v[0]), int(v[1]))
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"cannot read {v!r} as an exact rational")


@dataclass(frozen=True)
class IntervalFamily:
    """Disjoint open intervals (a_j, b_j), ordered so that b_{j+1} <= a_j."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple((_frac(a), _frac(b)) for a, b in self.intervals)
        for a, b in ivs:
            if not (0 < a < b):
                raise ValueError(f"interval ({a}, {b}) must satisfy 0 < a < b")
        for (a0, _), (_, b1) in zip(ivs, ivs[1:]):
            if b1 > a0:
                raise ValueError(f"intervals overlap or are out of order near {a0}")
        object.__setattr__(self, "intervals", ivs)

    def __len__(self):
        return len(self.intervals)

    def measure(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    @classmethod
    def from_json(cls, text: str) -> "IntervalFamily":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("family JSON must be a list of [[num, den], [num, den]] pairs")
        return cls(tuple((_frac(a), _frac(b)) for a, b in data))

    def to_json(self) -> str:
        return json.dumps(
            [[[a.numerator, a.denominator], [b.numerator, b.denominator]] for a, b in self.intervals]
        )


def geometric_family(J: int = DEFAULT_J) -> IntervalFamily:
    """I_j = (4^-j, 4^-j + 8^-j), j = 1..J."""
    return IntervalFamily(tuple(
        (Fraction(1, 4**j), Fraction(1, 4**j) + Fraction(1, 8**j)) for j in range(1, J + 1)
    ))


def density(family: IntervalFamily, r) -> Fraction:
    """|Omega cap (0, r)| / r. Reflecting Omega evenly gives the same value for (-r, r)."""
    r = _frac(r)
    if r <= 0:
        raise ValueError("r must be positive")
    total = Fraction(0)
    for a, b in family.intervals:
        if a < r:
            total += min(b, r) - a
    return total / r


def u_value(family: IntervalFamily, t) -> Fraction:
    """u(t) = int_0^t (t - tau) chi_Omega(tau) dtau, summed interval by interval."""
    t = _frac(t)
    if t < 0:
        raise ValueError("t must be >= 0")
    total = Fraction(0)
    for a, b in family.intervals:
        if a < t:
            c = min(b, t)
            total += ((t - a) ** 2 - (t - c) ** 2) / 2
    return total


def verify_o_r2(family: IntervalFamily, radii) -> list:
    """Rows (r, u(r)/r^2, density(r)) for decreasing radii.

    Raises AssertionError if u(r)/r^2 exceeds density(r) anywhere; that bound
    holds because t - tau <= t under the integral.
    """
    radii = [_frac(r) for r in radii]
    if any(r1 >= r0 for r0, r1 in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    rows = []
    for r in radii:
        ratio = u_value(family, r) / r**2
        dens = density(family, r)
        if ratio > dens:
            raise AssertionError(f"u(r)/r^2 = {ratio} exceeds density {dens} at r = {r}")
        rows.append((r, ratio, dens))
    return rows


def strictly_decreasing(values) -> bool:
    values = list(values)
    return all(b < a for a, b in zip(values, values[1:]))


def fraction_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def write_report(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u_over_r2", "density"])
        for r, ratio, dens in rows:
            w.writerow([fraction_str(r), fraction_str(ratio), fraction_str(dens)])
