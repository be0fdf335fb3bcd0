"""Coin functions q(p) obtained by post-selecting Bernoulli states.

A coin function is stored twice: as the field elements sum |h_j|^2 over
the head set and the accepted set, and as a real form

    q(p) = (A(p) + B(p) w) / (C(p) + E(p) w),   w = sqrt(p (1 - p)),

obtained by writing s = w / (1 - p) and clearing denominators.  The real
form stays finite at p = 1 and is what the numerical checks evaluate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import reduce

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FieldDomainError, SingularityError
from .field import FieldElement, Poly, RationalFn, high_precision, poly_gcd
from .state import StateVector, _index, apply_operator, make_quoin, u_a

# coefficient-level gcd tolerance for forms built from double constants
FORM_GCD_TOL = 1e-9
# a denominator below this fraction of its coefficient mass counts as zero
SINGULAR_TOL = 1e-11
ZERO_THRESHOLD = 1e-10
N_GRID = 10_001
ORDER_DISTANCES = np.geomspace(1e-2, 1e-5, 8)
ORDER_SLACK = 0.05
WITNESS_DELTA = 1e-2

_W2 = np.array([0.0, 1.0, -1.0])  # w^2 = p - p^2


def _pmul(a, b):
    if len(a) == 0 or len(b) == 0:
        return np.zeros(0)
    return np.convolve(a, b)


def _padd(a, b, sign=1.0):
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[: len(a)] += a
    out[: len(b)] += sign * np.asarray(b)
    return _ptrim(out)


def _ptrim(a, rel=1e-14):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return a
    scale = np.max(np.abs(a))
    if scale == 0:
        return np.zeros(0)
    k = len(a)
    while k and abs(a[k - 1]) <= rel * scale:
        k -= 1
    return a[:k]


def _mass(poly, p):
    if len(poly) == 0:
        return np.zeros_like(p)
    return np.polynomial.polynomial.polyval(p, np.abs(poly))


def _val(poly, p):
    if len(poly) == 0:
        return np.zeros_like(p)
    return np.polynomial.polynomial.polyval(p, poly)


def _to_mp(poly):
    return tuple(high_precision(float(c)) for c in poly)


def _common_gcd(polys, tol=FORM_GCD_TOL):
    nonzero = [_to_mp(q) for q in polys if len(q)]
    if not nonzero:
        return None
    g = nonzero[0]
    for q in nonzero[1:]:
        if len(g) <= 1:
            break
        g = poly_gcd(g, q, tol)
    if len(g) <= 1:
        return None
    return np.array([complex(c).real for c in g])


def _divide_out(polys, g):
    out = []
    for q in polys:
        if len(q) == 0:
            out.append(q)
            continue
        quo, _ = np.polynomial.polynomial.polydiv(q, g)
        out.append(_ptrim(quo))
    return out


@dataclass(frozen=True)
class RealForm:
    """(A + B w) / (C + E w) with real ascending coefficient arrays."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray

    def parts(self):
        return [self.A, self.B, self.C, self.E]

    def numerator(self, p, w):
        return _val(self.A, p) + _val(self.B, p) * w

    def denominator(self, p, w):
        return _val(self.C, p) + _val(self.E, p) * w

    def conditioning(self, p, w):
        """|den| relative to the magnitude of its terms (0 means singular)."""
        mass = _mass(self.C, p) + _mass(self.E, p) * w
        den = np.abs(self.denominator(p, w))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(mass > 0, den / np.where(mass > 0, mass, 1.0), 0.0)

    def reduced(self) -> "RealForm":
        g = _common_gcd(self.parts())
        if g is None:
            return self
        return RealForm(*_divide_out(self.parts(), g))

    def to_dict(self):
        return {k: [float(x) for x in getattr(self, k)] for k in "ABCE"}


def _lcm(polys):
    """Least common multiple of monic mpc polynomials."""
    out = (high_precision(1),)
    for q in polys:
        g = poly_gcd(out, q)
        quot = divmod(Poly(q), Poly(g))[0]
        out = (Poly(out) * quot).coeffs
    return out


def _real(poly: Poly) -> np.ndarray:
    c = poly.as_complex()
    if c.size and np.max(np.abs(c.imag)) > 1e-8 * max(1.0, np.max(np.abs(c.real))):
        raise ValueError("coin function parts are not real-valued")
    return _ptrim(c.real)


def real_form(num: FieldElement, den: FieldElement) -> RealForm:
    """Convert a ratio of real-valued elements of M to the (p, w) form."""
    rats = [num.a, num.b, den.a, den.b]
    lcm = Poly(_lcm([r.den.coeffs for r in rats if not r.is_zero()]))
    one_minus_p = Poly((1, -1))

    def part(r: RationalFn, times_1mp: bool):
        if r.is_zero():
            return Poly()
        q, _ = divmod(lcm, r.den)
        out = r.num * q
        return out * one_minus_p if times_1mp else out

    # x (1-p) = a (1-p) + b w
    A = _real(part(num.a, True))
    B = _real(part(num.b, False))
    C = _real(part(den.a, True))
    E = _real(part(den.b, False))
    return _strip_one_minus_p(RealForm(A, B, C, E))


def _strip_one_minus_p(form: RealForm) -> RealForm:
    """Divide out (1-p) while every part vanishes at p = 1."""
    parts = form.parts()
    while True:
        nonzero = [q for q in parts if len(q)]
        if not nonzero:
            return RealForm(*parts)
        if any(abs(np.sum(q)) > 1e-12 * np.sum(np.abs(q)) for q in nonzero):
            return RealForm(*parts)
        parts = [_ptrim(np.polynomial.polynomial.polydiv(q, [1.0, -1.0])[0]) if len(q) else q for q in parts]


@dataclass
class CoinFunction:
    """q(p) = sum_{j in head} |h_j|^2 / sum_{i in all} |h_i|^2."""

    numerator: FieldElement | None
    denominator: FieldElement | None
    basis_all: tuple = ()
    basis_head: tuple = ()
    domain: tuple = (0.0, 1.0)
    forms: list = field(default_factory=list)
    extended: bool = False
    name: str = ""

    def values(self, p, strict: bool = True):
        """Vectorized evaluation; singular points raise (strict) or give nan."""
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 0
        pa = np.atleast_1d(p)
        lo, hi = self.domain
        if np.any(pa < lo - 1e-15) or np.any(pa > hi + 1e-15):
            raise ValueError(f"p outside the domain [{lo}, {hi}]")
        w = np.sqrt(np.clip(pa * (1.0 - pa), 0.0, None))
        best = np.full(pa.shape, -1.0)
        out = np.full(pa.shape, np.nan)
        for form in self.forms:
            cond = form.conditioning(pa, w)
            take = cond > best
            with np.errstate(invalid="ignore", divide="ignore"):
                v = form.numerator(pa, w) / form.denominator(pa, w)
            out = np.where(take, v, out)
            best = np.where(take, cond, best)
        bad = best <= SINGULAR_TOL
        if np.any(bad):
            if strict:
                raise SingularityError(float(pa[bad][0]))
            out = np.where(bad, np.nan, out)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def __call__(self, p):
        return self.values(p)

    def to_dict(self):
        return {
            "name": self.name,
            "basis_all": list(self.basis_all),
            "basis_head": list(self.basis_head),
            "domain": list(self.domain),
            "extended": self.extended,
            "forms": [f.to_dict() for f in self.forms],
        }


def coin_from_elements(num: FieldElement, den: FieldElement, domain=(0.0, 1.0), name="", basis_all=(), basis_head=()):
    if den.is_zero():
        raise FieldDomainError("coin function with identically zero denominator")
    return CoinFunction(num, den, tuple(basis_all), tuple(basis_head), tuple(domain), [real_form(num, den)], False, name)


def coin_from_polys(A, C, B=(), E=(), domain=(0.0, 1.0), name=""):
    """Coin directly from real (p, w) coefficients (ascending order)."""
    form = RealForm(_ptrim(A), _ptrim(B), _ptrim(C), _ptrim(E))
    if len(form.C) == 0 and len(form.E) == 0:
        raise FieldDomainError("coin function with identically zero denominator")
    return CoinFunction(None, None, (), (), tuple(domain), [form], False, name)


def coin_from_state(state: StateVector, basis_all, basis_head, domain=(0.0, 1.0), name="") -> CoinFunction:
    """Post-select a symbolic state on ``basis_all`` and call ``basis_head`` heads."""
    if not state.symbolic:
        raise TypeError("coin_from_state needs a symbolic state")
    basis_all, basis_head = list(basis_all), list(basis_head)
    if not basis_all or not basis_head:
        raise ValueError("basis sets must be nonempty")
    n = state.n_qubits
    all_idx = [_index(b, n) for b in basis_all]
    head_idx = [_index(b, n) for b in basis_head]
    if not set(head_idx) <= set(all_idx):
        raise ValueError("head set must be a subset of the accepted set")
    sq = {i: state.amps[i].mod_squared() for i in all_idx}
    num = reduce(lambda x, y: x + y, (sq[i] for i in head_idx))
    den = reduce(lambda x, y: x + y, (sq[i] for i in all_idx))
    return coin_from_elements(num, den, domain, name, basis_all, basis_head)


def eval_coin(f: CoinFunction, p) -> float:
    return f.values(p)


def extend_common_zeros(f: CoinFunction) -> CoinFunction:
    """Remove factors shared by numerator and denominator.

    Three equivalent forms are kept: the gcd-reduced original, the form
    rationalized by the conjugate C - E w, and that form rewritten over the
    conjugate of its numerator.  Evaluation uses whichever form has the
    best-conditioned denominator at each point.
    """
    base = f.forms[0]
    if len(base.C) == 0 and len(base.E) == 0:
        raise FieldDomainError("identically zero denominator")
    f0 = base.reduced()
    A, B, C, E = f0.parts()
    # (A + Bw)(C - Ew) / (C^2 - E^2 w^2)
    A3 = _padd(_pmul(A, C), _pmul(_pmul(B, E), _W2), -1.0)
    B3 = _padd(_pmul(B, C), _pmul(A, E), -1.0)
    P2 = _padd(_pmul(C, C), _pmul(_pmul(E, E), _W2), -1.0)
    forms = [f0]
    if len(P2):
        f1 = RealForm(A3, B3, P2, np.zeros(0)).reduced()
        forms.append(f1)
        A3, B3, P2 = f1.A, f1.B, f1.C
        # (A3 + B3 w) / P2 = (A3^2 - B3^2 w^2) / (P2 (A3 - B3 w))
        P3 = _padd(_pmul(A3, A3), _pmul(_pmul(B3, B3), _W2), -1.0)
        if len(P3):
            f2 = RealForm(P3, np.zeros(0), _pmul(P2, A3), -_pmul(P2, B3)).reduced()
            forms.append(f2)
    return CoinFunction(f.numerator, f.denominator, f.basis_all, f.basis_head, f.domain, forms, True, f.name)


# ---------------------------------------------------------------------------
# named coins and closed forms

def f_c_coin() -> CoinFunction:
    """(2p-1)^2 / (1 + (2p-1)^2) from the example-coin state."""
    from .construct import example_coin_circuit

    state, _ = example_coin_circuit(None)
    return coin_from_state(state, [0, 1], [0], name="f_c")


def f_a_coin(a: float) -> CoinFunction:
    """Head on |1> after U_a acts on a quoin."""
    state = apply_operator(make_quoin(None), u_a(a), [0])
    return coin_from_state(state, [0, 1], [1], name=f"f_a({a:g})")


def g_coin() -> CoinFunction:
    """4p(1-p): the |01> share of the accepted set {01, 10} of psi_2."""
    from .construct import psi2_state

    return coin_from_state(psi2_state(None), ["01", "10"], ["01"], name="g")


def f_wedge_coin() -> CoinFunction:
    return coin_from_polys([0.0, 2.0], [1.0], domain=(0.0, 0.5), name="f_wedge")


def constant_coin(c: float) -> CoinFunction:
    return coin_from_polys([c], [1.0], name=f"const({c:g})")


def f_a_eval(a: float, p):
    """|sqrt(a(1-p)) - sqrt(p(1-a))|^2."""
    return (np.sqrt(a * (1.0 - p)) - np.sqrt(p * (1.0 - a))) ** 2


def f_c_eval(p):
    x = (2.0 * np.asarray(p, dtype=float) - 1.0) ** 2
    return x / (1.0 + x)


def _homogeneous(h):
    if isinstance(h, float) and math.isinf(h):
        return 1.0, 0.0
    return complex(h), 1.0


def success_prob_surface(kind: str, h1, h2) -> float:
    """Pr_m or Pr_a for inputs |h1>, |h2>; ``inf`` means the state |0>."""
    a0, a1 = _homogeneous(h1)
    b0, b1 = _homogeneous(h2)
    norm = (abs(a0) ** 2 + abs(a1) ** 2) * (abs(b0) ** 2 + abs(b1) ** 2)
    if kind == "multiply":
        return (abs(a0 * b0) ** 2 + abs(a1 * b1) ** 2) / (8.0 * norm)
    if kind == "add":
        # with unit denominators: (|h1+h2|^2 + 1) / (16 (|h1|^2+1)(|h2|^2+1))
        return (abs(a0 * b1 + a1 * b0) ** 2 + abs(a1 * b1) ** 2) / (16.0 * norm)
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# feasibility checks

@dataclass
class CbfVerdict:
    passes: bool
    minimum: float
    maximum: float
    argmin: float
    argmax: float
    reason: str = ""

    def to_dict(self):
        return asdict(self)


def _grid(f: CoinFunction, n=N_GRID):
    lo, hi = f.domain
    return np.linspace(lo, hi, n)


def cbf_check(f: CoinFunction, n_grid: int = N_GRID) -> CbfVerdict:
    """Classical constructibility on the domain: continuous, bounded away from 0 and 1.

    The polynomial-boundary condition holds automatically for this class of
    functions once the minimum is positive, so only the range is scanned.
    """
    grid = _grid(f, n_grid)
    v = f.values(grid, strict=False)
    if np.any(np.isnan(v)):
        bad = float(grid[np.isnan(v)][0])
        return CbfVerdict(False, math.nan, math.nan, bad, bad, f"undefined at p={bad:.6g}; extend common zeros first")
    i, j = int(np.argmin(v)), int(np.argmax(v))
    lo, hi = float(v[i]), float(v[j])
    reasons = []
    if lo <= ZERO_THRESHOLD:
        reasons.append(f"reaches 0 at p={grid[i]:.6g}")
    if hi >= 1.0 - ZERO_THRESHOLD:
        reasons.append(f"reaches 1 at p={grid[j]:.6g}")
    return CbfVerdict(not reasons, lo, hi, float(grid[i]), float(grid[j]), "; ".join(reasons))


@dataclass
class Contact:
    """A zero (or one) of f: estimated order and witness f >= c |p-z|^exponent."""

    location: float
    order: float | None
    exponent: int | None
    slopes: list
    c: float | None
    delta: float | None

    def to_dict(self):
        return asdict(self)


@dataclass
class SpbVerdict:
    status: str  # "pass", "fail" or "inconclusive"
    zeros: list
    ones: list
    failure_reason: str = ""

    @property
    def passes(self) -> bool:
        return self.status == "pass"

    def to_dict(self):
        return {
            "status": self.status,
            "passes": self.passes,
            "zeros": [z.to_dict() for z in self.zeros],
            "ones": [w.to_dict() for w in self.ones],
            "failure_reason": self.failure_reason,
        }


def _refine(g, a, b, x0, lo, hi):
    """Sharpen a contact point by bisecting on the sign of g'."""
    h = 1e-7

    def slope(x):
        return g(min(x + h, hi)) - g(max(x - h, lo))

    left, right = max(x0 - 1e-4, lo), min(x0 + 1e-4, hi)
    sl, sr = slope(left), slope(right)
    if not (sl < 0 < sr):
        return x0
    while right - left > 1e-12:
        mid = 0.5 * (left + right)
        if slope(mid) < 0:
            left = mid
        else:
            right = mid
    return 0.5 * (left + right)


def _locate(g, grid, vals):
    """Points where g (>= 0) touches zero, refined from grid local minima."""
    found = []
    n = len(grid)
    lo, hi = grid[0], grid[-1]
    for i in range(n):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i < n - 1 else np.inf
        if vals[i] > 1e-3 or vals[i] > left or vals[i] > right:
            continue
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
        res = minimize_scalar(
            lambda x: math.sqrt(max(g(x), 0.0)),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-14},
        )
        cands = [(math.sqrt(max(g(x), 0.0)), x) for x in (res.x, a, b, grid[i])]
        _, z = min(cands)
        if lo < z < hi:
            z = _refine(g, a, b, z, lo, hi)
        if g(z) < ZERO_THRESHOLD and not any(abs(z - y) < 1e-6 for y in found):
            found.append(float(z))
    return found


def _order_at(g, z, lo, hi):
    """Log-log slope of g on each available side of z.

    Interior contacts of a nonnegative function in this class have even
    order.  At an endpoint only one side exists and any finite multiple of
    1/2 is acceptable, because the bound asks for f >= c |p - z|^(2k) only.
    """
    slopes, samples = [], []
    for side in (-1.0, 1.0):
        pts = z + side * ORDER_DISTANCES
        if pts.min() < lo or pts.max() > hi:
            continue
        y = np.array([g(x) for x in pts])
        if np.any(y <= 0) or not np.all(np.isfinite(y)):
            return None, slopes, "non-positive values near the contact point"
        slopes.append(float(np.polyfit(np.log(ORDER_DISTANCES), np.log(y), 1)[0]))
        samples.append(y)
    if not slopes:
        return None, slopes, "no room to estimate the order"
    interior = len(slopes) == 2
    step = 1.0 if interior else 0.5
    order = round(slopes[0] / step) * step
    if any(abs(s - order) > ORDER_SLACK for s in slopes):
        return None, slopes, "order estimate did not settle"
    if order <= 0:
        return None, slopes, "order estimate is not positive"
    if interior and int(order) % 2:
        return order, slopes, f"odd order {order:g} at an interior point"
    exponent = 2 * math.ceil(order / 2)
    c = 0.5 * min(float(np.min(y / ORDER_DISTANCES ** exponent)) for y in samples)
    return order, slopes, (exponent, c)


def spb_check(f: CoinFunction, n_grid: int = N_GRID) -> SpbVerdict:
    """Simple-and-poly-bounded test on the domain.

    Zeros of f and of 1 - f are located on a grid and refined.  The order
    at each is the log-log slope over distances 1e-2 .. 1e-5 and must sit
    within 0.05 of an even integer (or of a multiple of 1/2 at an endpoint).
    Witnesses satisfy f >= c |p - z|^exponent on the sampled points with
    |p - z| <= delta.
    """
    lo, hi = f.domain
    grid = np.linspace(lo, hi, n_grid)
    v = f.values(grid, strict=False)
    if np.any(np.isnan(v)):
        bad = float(grid[np.isnan(v)][0])
        return SpbVerdict("inconclusive", [], [], f"undefined at p={bad:.6g}; extend common zeros first")

    def safe(h):
        def g(x):
            try:
                return h(f.values(x))
            except SingularityError:
                return math.nan
        return g

    out = {}
    for key, h, vals in (("zeros", lambda y: y, v), ("ones", lambda y: 1.0 - y, 1.0 - v)):
        g = safe(h)
        # several grid points sitting exactly on the bound: a continuum, not isolated contacts
        if np.count_nonzero(vals <= 0.0) > 2:
            return SpbVerdict("fail", [], [], f"{key} do not form a finite set")
        pts = _locate(g, grid, vals)
        if len(pts) > 50:
            return SpbVerdict("fail", [], [], f"{key} do not form a finite set")
        contacts = []
        for z in pts:
            order, slopes, info = _order_at(g, z, lo, hi)
            if order is None:
                return SpbVerdict("inconclusive", [], [], f"at p={z:.6g}: {info}")
            if isinstance(info, str):
                return SpbVerdict("fail", [], [], f"at p={z:.6g}: {info}")
            exponent, c = info
            contacts.append(Contact(z, order, exponent, slopes, c, WITNESS_DELTA))
        out[key] = contacts
    return SpbVerdict("pass", out["zeros"], out["ones"])


# all accepted amplitudes except the last vanish together at p = 1/2
def common_zero_example_coin() -> CoinFunction:
    """h = (1-2p, (1-2p)^2 (1-3p), (1-2p)(1-4p)^2, 1), accept {0,1,2}, heads {0,1}."""
    P = FieldElement.p()
    u = 1 - 2 * P
    amps = [u, u * u * (1 - 3 * P), u * (1 - 4 * P) * (1 - 4 * P), FieldElement.const(1)]
    state = StateVector(np.array(amps, dtype=object))
    return coin_from_state(state, [0, 1, 2], [0, 1], name="s")


__all__ = [
    "RealForm",
    "CoinFunction",
    "CbfVerdict",
    "SpbVerdict",
    "Contact",
    "real_form",
    "coin_from_elements",
    "coin_from_polys",
    "coin_from_state",
    "eval_coin",
    "extend_common_zeros",
    "f_c_coin",
    "f_a_coin",
    "g_coin",
    "f_wedge_coin",
    "constant_coin",
    "f_a_eval",
    "f_c_eval",
    "success_prob_surface",
    "cbf_check",
    "spb_check",
    "common_zero_example_coin",
]
