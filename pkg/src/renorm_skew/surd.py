"""Exact arithmetic in real quadratic fields.

A :class:`Surd` is the number ``(a + b*sqrt(D)) / c`` with integer ``a, b``,
positive ``c`` and squarefree ``D > 1``. Every order comparison reduces to
integer inequalities, so floors, ceilings and fractional parts are exact.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import total_ordering
from typing import Union

from .errors import InvalidInput

Number = Union[int, Fraction, "Surd"]

_SURD_RE = re.compile(
    r"""^\s*\(?\s*(?P<a>[+-]?\d+)?\s*
        (?:(?P<bsign>[+-])\s*(?:(?P<b>\d+)\s*\*\s*)?sqrt\(\s*(?P<D>\d+)\s*\))?
        \s*\)?\s*(?:/\s*(?P<c>[+-]?\d+))?\s*$""",
    re.VERBOSE,
)


def _squarefree_split(D: int) -> tuple[int, int]:
    """Return ``(s, r)`` with ``D = s**2 * r`` and ``r`` squarefree."""
    s, r = 1, D
    p = 2
    while p * p <= r:
        while r % (p * p) == 0:
            r //= p * p
            s *= p
        p += 1 if p == 2 else 2
    return s, r


def _sign_of(a: int, b: int, D: int) -> int:
    """Exact sign of ``a + b*sqrt(D)``."""
    sa = (a > 0) - (a < 0)
    sb = (b > 0) - (b < 0)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    # opposite signs: compare a**2 with b**2 * D
    lhs, rhs = a * a, b * b * D
    if lhs == rhs:
        return 0
    return sa if lhs > rhs else sb


@total_ordering
class Surd:
    """Canonical element ``(a + b*sqrt(D)) / c`` of ``Q(sqrt(D))``.

    Instances are immutable. Use :func:`surd_normalize` (or the constructor,
    which normalizes) to build one. Rational values keep their field tag ``D``
    but compare equal to any rational of the same value.
    """

    __slots__ = ("_a", "_b", "_c", "_D")

    def __init__(self, a: int, b: int = 0, c: int = 1, D: int = 2) -> None:
        if c == 0:
            raise InvalidInput("surd denominator must be nonzero")
        if D <= 0:
            raise InvalidInput("surd radicand must be positive")
        s, D = _squarefree_split(int(D))
        a, b, c = int(a), int(b) * s, int(c)
        if D == 1:
            a, b = a + b, 0
            D = 1
        if c < 0:
            a, b, c = -a, -b, -c
        g = math.gcd(math.gcd(a, b), c)
        if g > 1:
            a, b, c = a // g, b // g, c // g
        self._a, self._b, self._c, self._D = a, b, c, D

    # -- accessors ---------------------------------------------------------
    @property
    def a(self) -> int:
        return self._a

    @property
    def b(self) -> int:
        return self._b

    @property
    def c(self) -> int:
        return self._c

    @property
    def D(self) -> int:
        return self._D

    @property
    def is_rational(self) -> bool:
        return self._b == 0

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self._a, self._b, self._c, self._D)

    @classmethod
    def parse(cls, text: str) -> "Surd":
        """Parse ``(a+b*sqrt(D))/c``; ``a``, ``b*`` and ``/c`` are optional."""
        m = _SURD_RE.match(text)
        if not m or (m.group("a") is None and m.group("D") is None):
            raise InvalidInput(f"cannot parse surd {text!r}")
        a = int(m.group("a") or 0)
        c = int(m.group("c") or 1)
        if m.group("D") is None:
            return cls(a, 0, c, 2)
        b = int(m.group("b") or 1)
        if m.group("bsign") == "-":
            b = -b
        return cls(a, b, c, int(m.group("D")))

    # -- coercion ----------------------------------------------------------
    def _lift(self, other: object) -> "Surd | None":
        if isinstance(other, Surd):
            if other._b != 0 and self._b != 0 and other._D != self._D:
                raise InvalidInput("surds from different quadratic fields")
            return other
        if isinstance(other, int):
            return Surd(other, 0, 1, self._D)
        if isinstance(other, Fraction):
            return Surd(other.numerator, 0, other.denominator, self._D)
        return None

    def _field(self, other: "Surd") -> int:
        return self._D if self._b != 0 else other._D

    # -- arithmetic --------------------------------------------------------
    def __neg__(self) -> "Surd":
        return Surd(-self._a, -self._b, self._c, self._D)

    def __add__(self, other: object) -> "Surd":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return Surd(
            self._a * o._c + o._a * self._c,
            self._b * o._c + o._b * self._c,
            self._c * o._c,
            self._field(o),
        )

    __radd__ = __add__

    def __sub__(self, other: object) -> "Surd":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: object) -> "Surd":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other: object) -> "Surd":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        D = self._field(o)
        return Surd(
            self._a * o._a + self._b * o._b * D,
            self._a * o._b + self._b * o._a,
            self._c * o._c,
            D,
        )

    __rmul__ = __mul__

    def inverse(self) -> "Surd":
        norm = self._a * self._a - self._b * self._b * self._D
        if norm == 0:
            raise ZeroDivisionError("surd is zero")
        return Surd(self._c * self._a, -self._c * self._b, norm, self._D)

    def __truediv__(self, other: object) -> "Surd":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other: object) -> "Surd":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def conjugate(self) -> "Surd":
        return Surd(self._a, -self._b, self._c, self._D)

    # -- order ---------------------------------------------------------------
    def sign(self) -> int:
        return _sign_of(self._a, self._b, self._D)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction, Surd)):
            try:
                o = self._lift(other)
            except InvalidInput:
                return False
            return (self - o).sign() == 0
        return NotImplemented

    def __lt__(self, other: object) -> bool:
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() < 0

    def __hash__(self) -> int:
        if self._b == 0:
            return hash(Fraction(self._a, self._c))
        return hash(self.as_tuple())

    def __bool__(self) -> bool:
        return self._a != 0 or self._b != 0

    def __floor__(self) -> int:
        """Exact ``floor`` by isolating ``b*sqrt(D)`` between integers."""
        a, b, c, D = self.as_tuple()
        if b == 0:
            return a // c
        r = math.isqrt(b * b * D)
        # sqrt is irrational here, so b*sqrt(D) lies strictly inside (r, r+1)
        n = a + r if b > 0 else a - r - 1
        return n // c

    def __ceil__(self) -> int:
        if self._b == 0:
            return -((-self._a) // self._c)
        return math.floor(self) + 1

    def __float__(self) -> float:
        if self._b == 0:
            return self._a / self._c
        # exact rounding via a scaled integer square root
        bits = 80
        s = math.isqrt(self._b * self._b * self._D << (2 * bits))
        num = (self._a << bits) + (s if self._b > 0 else -s)
        return num / (self._c << bits)

    def __repr__(self) -> str:
        return f"Surd({self._a}, {self._b}, {self._c}, {self._D})"

    def __str__(self) -> str:
        if self._b == 0:
            return str(Fraction(self._a, self._c))
        return f"({self._a}{self._b:+d}*sqrt({self._D}))/{self._c}"


def surd_normalize(a: int, b: int, c: int, D: int) -> Surd:
    """Canonical :class:`Surd` equal to ``(a + b*sqrt(D)) / c``.

    Raises
    ------
    InvalidInput
        If ``c == 0`` or ``D <= 0``.
    """
    return Surd(a, b, c, D)


def surd_floor_frac(x: Surd) -> tuple[int, Surd]:
    """Return ``(floor(x), x - floor(x))`` using exact comparisons."""
    n = math.floor(x)
    return n, x - n
