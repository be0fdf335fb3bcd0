"""Arithmetic in the field M = C(p)[s] / (s^2 - p/(1-p)).

Elements are stored as ``a + b*s`` where ``a`` and ``b`` are rational
functions of ``p`` with complex coefficients.  On the unit interval ``s`` is
the positive root ``sqrt(p/(1-p))``.

Coefficients are 128-bit complex floats (gmpy2 ``mpc``).  The extra
precision keeps Euclid's gcd reliable, so every rational part is held with
a monic denominator coprime to its numerator.  Element-level zero tests use
the coarser ``ZERO_TOL`` because inputs usually come from double-precision
constants.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import CapacityError, EvaluationError, FieldDomainError

PRECISION = 128
ZERO_TOL = 1e-12
DEFAULT_DEGREE_CAP = 64

_settings = threading.local()


def get_degree_cap() -> int:
    return getattr(_settings, "cap", DEFAULT_DEGREE_CAP)


@contextlib.contextmanager
def degree_cap(cap: int):
    """Temporarily change the maximum polynomial degree (per thread)."""
    old = get_degree_cap()
    _settings.cap = int(cap)
    try:
        yield
    finally:
        _settings.cap = old


def _prec():
    # gmpy2 contexts are per thread and start at 53 bits
    ctx = gmpy2.get_context()
    if ctx.precision != PRECISION:
        ctx.precision = PRECISION
        ctx.real_prec = PRECISION
        ctx.imag_prec = PRECISION


_prec()
_ZERO_C = mpc(0)
_ONE_C = mpc(1)
# below this fraction of the summands, a sum is cancellation noise
CANCEL_TOL = mpfr("1e-30")
GCD_TOL = mpfr("1e-24")
SQRT2 = gmpy2.sqrt(mpfr(2))
INV_SQRT2 = 1 / SQRT2

_NUMBER = (int, float, complex, mpc, type(mpfr(0)), np.number)


def high_precision(x) -> mpc:
    """Convert a number to a 128-bit complex coefficient."""
    _prec()
    if isinstance(x, mpc):
        return x
    if isinstance(x, type(mpfr(0))):
        return mpc(x)
    c = complex(x)
    return mpc(c.real, c.imag)


# ---------------------------------------------------------------------------
# dense polynomial helpers: tuples of mpc, ascending degree

def _trim(c) -> tuple:
    c = list(c)
    if not c:
        return ()
    scale = max(abs(x) for x in c)
    if scale == 0:
        return ()
    tol = scale * CANCEL_TOL
    while c and abs(c[-1]) <= tol:
        c.pop()
    return tuple(c)


def _add(a: tuple, b: tuple, sign: int = 1) -> tuple:
    n = max(len(a), len(b))
    out = []
    for i in range(n):
        x = a[i] if i < len(a) else _ZERO_C
        y = b[i] if i < len(b) else _ZERO_C
        if sign < 0:
            y = -y
        z = x + y
        if abs(z) <= CANCEL_TOL * (abs(x) + abs(y)):
            z = _ZERO_C
        out.append(z)
    return _trim(out)


def _mul(a: tuple, b: tuple) -> tuple:
    if not a or not b:
        return ()
    out = [_ZERO_C] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _trim(out)


def _scale(a: tuple, c) -> tuple:
    return _trim(x * c for x in a)


def _divmod(a: tuple, b: tuple) -> tuple[tuple, tuple]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = list(a)
    db = len(b) - 1
    if len(a) <= db:
        return (), tuple(a)
    q = [_ZERO_C] * (len(a) - db)
    inv_lead = 1 / b[-1]
    for k in range(len(a) - len(b), -1, -1):
        c = a[k + db] * inv_lead
        q[k] = c
        if c == 0:
            continue
        for j in range(len(b)):
            a[k + j] -= c * b[j]
    return tuple(q), tuple(a[:db])


def _max_abs(a: tuple):
    return max(abs(x) for x in a) if a else mpfr(0)


def _monic(a: tuple) -> tuple:
    inv = 1 / a[-1]
    return tuple(x * inv for x in a)


def _normalized(a: tuple) -> tuple:
    m = _max_abs(a)
    return tuple(x / m for x in a)


def poly_gcd(a: tuple, b: tuple, tol=None) -> tuple:
    """Monic gcd of two nonzero coefficient tuples (Euclid).

    Remainders are rescaled to unit max-norm and coefficients below ``tol``
    (default ``GCD_TOL``) of the dividend count as cancelled.  A candidate
    is kept only if it divides both inputs to a matching tolerance.
    """
    _prec()
    tol = GCD_TOL if tol is None else mpfr(tol)
    if len(a) <= 1 or len(b) <= 1:
        return (_ONE_C,)
    x, y = _normalized(a), _normalized(b)
    if len(x) < len(y):
        x, y = y, x
    while True:
        _, r = _divmod(x, y)
        scale = max(_max_abs(x), mpfr(1))
        r = list(r)
        while r and abs(r[-1]) <= tol * scale:
            r.pop()
        if not r:
            g = _monic(y)
            break
        x, y = y, _normalized(tuple(r))
    if len(g) == 1:
        return (_ONE_C,)
    for src in (a, b):
        _, rem = _divmod(src, g)
        if rem and _max_abs(rem) > tol * 1e4 * _max_abs(src):
            return (_ONE_C,)
    return g


def _coeffs(x) -> tuple:
    if isinstance(x, Poly):
        return x.coeffs
    if isinstance(x, _NUMBER):
        return _trim((high_precision(x),))
    return _trim(high_precision(c) for c in x)


class Poly:
    """Immutable dense polynomial in p with ascending ``mpc`` coefficients."""

    __slots__ = ("coeffs", "_fast")

    def __init__(self, coeffs: Iterable = ()):
        _prec()
        c = _coeffs(coeffs)
        if len(c) - 1 > get_degree_cap():
            raise CapacityError(f"polynomial degree {len(c) - 1} exceeds cap {get_degree_cap()}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "_fast", None)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    def is_zero(self) -> bool:
        return not self.coeffs

    def as_complex(self) -> np.ndarray:
        if self._fast is None:
            object.__setattr__(self, "_fast", np.array([complex(c) for c in self.coeffs], dtype=complex))
        return self._fast

    def __call__(self, x):
        """Evaluate; scalars use full precision, arrays use doubles."""
        if np.ndim(x) == 0:
            _prec()
            xv = high_precision(x)
            acc = _ZERO_C
            for c in reversed(self.coeffs):
                acc = acc * xv + c
            return complex(acc)
        x = np.asarray(x)
        acc = np.zeros(x.shape, dtype=complex)
        for c in self.as_complex()[::-1]:
            acc = acc * x + c
        return acc

    def __add__(self, other):
        return Poly(_add(self.coeffs, _coeffs(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return Poly(_add(self.coeffs, _coeffs(other), -1))

    def __rsub__(self, other):
        return Poly(_add(_coeffs(other), self.coeffs, -1))

    def __neg__(self):
        return Poly(tuple(-c for c in self.coeffs))

    def __mul__(self, other):
        return Poly(_mul(self.coeffs, _coeffs(other)))

    __rmul__ = __mul__

    def __divmod__(self, other):
        q, r = _divmod(self.coeffs, _coeffs(other))
        return Poly(q), Poly(r)

    def conj(self) -> "Poly":
        return Poly(tuple(c.conjugate() for c in self.coeffs))

    def max_abs(self) -> float:
        return float(_max_abs(self.coeffs))

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(complex(c) for c in self.coeffs))

    def __repr__(self):
        return f"Poly({[complex(c) for c in self.coeffs]})"


def _as_poly(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, _NUMBER):
        return Poly((x,))
    return Poly(x)


class RationalFn:
    """num/den with monic denominator and gcd(num, den) = 1."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=(1,), *, reduce: bool = True):
        n, d = _as_poly(num), _as_poly(den)
        if d.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if n.is_zero():
            n, d = Poly(), Poly((1,))
        else:
            if reduce and d.degree > 0 and n.degree > 0:
                g = poly_gcd(n.coeffs, d.coeffs)
                if len(g) > 1:
                    n = Poly(_divmod(n.coeffs, g)[0])
                    d = Poly(_divmod(d.coeffs, g)[0])
            if d.coeffs[-1] != 1:
                inv = 1 / d.coeffs[-1]
                n = Poly(_scale(n.coeffs, inv))
                d = Poly(_monic(d.coeffs))
        object.__setattr__(self, "num", n)
        object.__setattr__(self, "den", d)

    def __setattr__(self, name, value):
        raise AttributeError("RationalFn is immutable")

    @classmethod
    def const(cls, c) -> "RationalFn":
        return cls((c,))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_constant(self) -> bool:
        return self.num.degree <= 0 and self.den.degree == 0

    def negligible(self) -> bool:
        """Zero test at the element tolerance ``ZERO_TOL``."""
        if self.num.is_zero():
            return True
        return self.num.max_abs() < ZERO_TOL * max(1.0, self.den.max_abs())

    def __add__(self, other: "RationalFn") -> "RationalFn":
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.den == other.den:
            return RationalFn(self.num + other.num, self.den)
        g = poly_gcd(self.den.coeffs, other.den.coeffs)
        if len(g) > 1:
            q1 = Poly(_divmod(self.den.coeffs, g)[0])
            q2 = Poly(_divmod(other.den.coeffs, g)[0])
            return RationalFn(self.num * q2 + other.num * q1, q1 * other.den)
        return RationalFn(self.num * other.den + other.num * self.den, self.den * other.den)

    def __neg__(self):
        return RationalFn(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "RationalFn") -> "RationalFn":
        if self.is_zero() or other.is_zero():
            return RationalFn(())
        n1, d1 = self.num.coeffs, self.den.coeffs
        n2, d2 = other.num.coeffs, other.den.coeffs
        # cross-cancel first so degrees stay small
        g1 = poly_gcd(n1, d2)
        if len(g1) > 1:
            n1, d2 = _divmod(n1, g1)[0], _divmod(d2, g1)[0]
        g2 = poly_gcd(n2, d1)
        if len(g2) > 1:
            n2, d1 = _divmod(n2, g2)[0], _divmod(d1, g2)[0]
        return RationalFn(Poly(_mul(n1, n2)), Poly(_mul(d1, d2)), reduce=False)

    def scale(self, c) -> "RationalFn":
        return RationalFn(self.num * c, self.den, reduce=False)

    def inv(self) -> "RationalFn":
        if self.is_zero():
            raise FieldDomainError("inverse of zero rational function")
        return RationalFn(self.den, self.num, reduce=False)

    def conj(self) -> "RationalFn":
        return RationalFn(self.num.conj(), self.den.conj(), reduce=False)

    def __call__(self, p):
        d = self.den(p)
        mag = np.abs(self.den.as_complex())
        ref = sum(m * np.abs(p) ** k for k, m in enumerate(mag))
        if np.any(np.abs(d) <= 1e-13 * ref):
            raise EvaluationError(p)
        return self.num(p) / d

    def __eq__(self, other):
        if not isinstance(other, RationalFn):
            return NotImplemented
        return (self - other).negligible()

    __hash__ = None

    def __repr__(self):
        return f"RationalFn({self.num!r}, {self.den!r})"


_ZERO = RationalFn(())
_ONE = RationalFn((1,))
P_RATIONAL = RationalFn((0, 1))
# s^2 = p / (1 - p)
S_SQUARED = RationalFn((0, 1), (1, -1))
_P_POLY = Poly((0, 1))
_ONE_MINUS_P = Poly((1, -1))


class FieldElement:
    """``a + b*s`` with ``s = sqrt(p/(1-p))``; immutable."""

    __slots__ = ("a", "b")

    def __init__(self, a: RationalFn | None = None, b: RationalFn | None = None):
        object.__setattr__(self, "a", a if a is not None else _ZERO)
        object.__setattr__(self, "b", b if b is not None else _ZERO)

    def __setattr__(self, name, value):
        raise AttributeError("FieldElement is immutable")

    @classmethod
    def const(cls, c) -> "FieldElement":
        return cls(RationalFn((c,)))

    @classmethod
    def p(cls) -> "FieldElement":
        return cls(P_RATIONAL)

    @classmethod
    def s(cls) -> "FieldElement":
        return cls(_ZERO, _ONE)

    @classmethod
    def rational(cls, num: Sequence, den: Sequence = (1,)) -> "FieldElement":
        return cls(RationalFn(num, den))

    @classmethod
    def coerce(cls, x) -> "FieldElement":
        if isinstance(x, FieldElement):
            return x
        if isinstance(x, RationalFn):
            return cls(x)
        if isinstance(x, _NUMBER):
            return cls.const(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to FieldElement")

    def is_zero(self) -> bool:
        return self.a.negligible() and self.b.negligible()

    def is_rational(self) -> bool:
        return self.b.is_zero()

    def is_constant(self) -> bool:
        return self.b.is_zero() and self.a.is_constant()

    def constant_value(self) -> complex:
        if not self.is_constant():
            raise ValueError("element depends on p")
        return complex(self.a.num.coeffs[0]) if not self.a.is_zero() else 0j

    def __add__(self, other):
        try:
            other = FieldElement.coerce(other)
        except TypeError:
            return NotImplemented
        return FieldElement(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(-self.a, -self.b)

    def __sub__(self, other):
        try:
            other = FieldElement.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return FieldElement.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, _NUMBER):
            c = high_precision(other)
            if c == 0:
                return FieldElement()
            return FieldElement(self.a.scale(c), self.b.scale(c))
        try:
            other = FieldElement.coerce(other)
        except TypeError:
            return NotImplemented
        a = self.a * other.a + self.b * other.b * S_SQUARED
        b = self.a * other.b + self.b * other.a
        return FieldElement(a, b)

    __rmul__ = __mul__

    def inv(self) -> "FieldElement":
        if self.is_zero():
            raise FieldDomainError("the zero element of M has no inverse")
        if self.b.is_zero():
            return FieldElement(self.a.inv())
        if self.a.is_zero():
            # 1/(b s) = s / (b p/(1-p))
            return FieldElement(_ZERO, (self.b * S_SQUARED).inv())
        # (a - b s) / (a^2 - b^2 p/(1-p)) with denominators cleared in one go
        an, ad = self.a.num, self.a.den
        bn, bd = self.b.num, self.b.den
        norm = an * an * bd * bd * _ONE_MINUS_P - bn * bn * ad * ad * _P_POLY
        if norm.is_zero():
            raise FieldDomainError("element norm vanished")
        a = RationalFn(an * ad * bd * bd * _ONE_MINUS_P, norm)
        b = RationalFn(-(bn * bd * ad * ad * _ONE_MINUS_P), norm)
        return FieldElement(a, b)

    def __truediv__(self, other):
        return self * FieldElement.coerce(other).inv()

    def __rtruediv__(self, other):
        return FieldElement.coerce(other) * self.inv()

    def conj(self) -> "FieldElement":
        return FieldElement(self.a.conj(), self.b.conj())

    def mod_squared(self) -> "FieldElement":
        return self * self.conj()

    def __call__(self, p):
        return field_eval(self, p)

    def __eq__(self, other):
        try:
            other = FieldElement.coerce(other)
        except TypeError:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        return f"FieldElement(a={self.a!r}, b={self.b!r})"


def canonical(x: FieldElement) -> FieldElement:
    """Re-normalize both parts (monic denominators, gcd removed)."""
    return FieldElement(RationalFn(x.a.num, x.a.den), RationalFn(x.b.num, x.b.den))


def field_add(x: FieldElement, y: FieldElement) -> FieldElement:
    return x + y


def field_mul(x: FieldElement, y: FieldElement) -> FieldElement:
    return x * y


def field_inv(x: FieldElement) -> FieldElement:
    return x.inv()


def field_mod_squared(x: FieldElement) -> FieldElement:
    """``|x|^2``; conjugation acts on coefficients since s is real on (0,1)."""
    return x.mod_squared()


def s_value(p):
    """Positive branch of sqrt(p/(1-p)); ``inf`` at p=1."""
    arr = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sqrt(arr / (1.0 - arr))


def field_eval(x: FieldElement, p):
    """Evaluate ``a(p) + b(p)*sqrt(p/(1-p))`` for p in [0, 1].

    Raises :class:`EvaluationError` at poles, including ``p = 1`` whenever
    the ``s`` part is nonzero.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise EvaluationError(p, f"p={p!r} is outside [0, 1]")
    scalar = arr.ndim == 0
    pv = float(arr) if scalar else arr
    val = x.a(pv) if not x.a.is_zero() else (0j if scalar else np.zeros(arr.shape, complex))
    if not x.b.is_zero():
        if np.any(arr == 1.0):
            raise EvaluationError(p, "s is unbounded at p=1")
        val = val + x.b(pv) * s_value(pv)
    return complex(val) if scalar else val
