"""Evolution families ``U(t, s)`` generated by ``A(t) = sum_k a_k(t) M_k``."""

from dataclasses import dataclass, field
import math
import threading

import numpy as np

from .errors import NonCommuting, StepTooLarge
from .linalg import as_matrix, frobenius, identity, matrix_exp, opnorm

COMMUTE_RTOL = 1e-10
TOL_SEMIGROUP = 1e-8
DEFAULT_STEPS = 2048


@dataclass(frozen=True)
class Coefficient:
    """Scalar coefficient function: ``const(c)``, ``sin``, ``cos`` or
    ``poly(c0, ..., cd)``."""

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("const", "sin", "cos", "poly"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        params = tuple(complex(p) for p in self.params)
        if self.kind == "const" and len(params) != 1:
            raise ValueError("const needs exactly one value")
        if self.kind == "poly" and not params:
            raise ValueError("poly needs at least one coefficient")
        object.__setattr__(self, "params", params)

    @classmethod
    def const(cls, c):
        return cls("const", (c,))

    @classmethod
    def poly(cls, *coeffs):
        return cls("poly", tuple(coeffs))

    def __call__(self, t):
        if self.kind == "const":
            return self.params[0]
        if self.kind == "sin":
            return math.sin(t)
        if self.kind == "cos":
            return math.cos(t)
        return sum(c * t ** k for k, c in enumerate(self.params))

    def integral(self, s, t):
        """Exact ``\\int_s^t a(tau) dtau``."""
        if self.kind == "const":
            return self.params[0] * (t - s)
        if self.kind == "sin":
            return math.cos(s) - math.cos(t)
        if self.kind == "cos":
            return math.sin(t) - math.sin(s)
        return sum(c * (t ** (k + 1) - s ** (k + 1)) / (k + 1)
                   for k, c in enumerate(self.params))

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "const":
            out["c"] = [self.params[0].real, self.params[0].imag]
        elif self.kind == "poly":
            out["c"] = [[p.real, p.imag] for p in self.params]
        return out


@dataclass(frozen=True)
class GeneratorSpec:
    dim: int
    terms: tuple
    T: float = 1.0

    def __post_init__(self):
        terms = tuple((coef, as_matrix(m, "generator term")) for coef, m in self.terms)
        for _, m in terms:
            if m.shape[0] != self.dim:
                raise ValueError(f"term has dimension {m.shape[0]}, expected {self.dim}")
        if not self.T > 0:
            raise ValueError("time horizon T must be positive")
        object.__setattr__(self, "terms", terms)

    @property
    def matrices(self):
        return [m for _, m in self.terms]

    @property
    def commuting(self):
        ms = self.matrices
        for i, a in enumerate(ms):
            for b in ms[i + 1:]:
                bound = COMMUTE_RTOL * opnorm(a) * opnorm(b)
                if opnorm(a @ b - b @ a) > bound:
                    return False
        return True

    def generator(self, t):
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for coef, m in self.terms:
            out += coef(t) * m
        return out

    def check_times(self, *times):
        for t in times:
            if abs(t) > self.T * (1 + 1e-12):
                raise ValueError(f"time {t} outside [-{self.T}, {self.T}]")


def propagate(spec, t, s, h=None):
    """``U(t, s)`` by fixed-step classical RK4 on ``dU/dtau = A(tau) U``.

    The step count is ``ceil(|t - s| / h)`` so the last step lands exactly on
    ``t``; integration runs backward when ``t < s``.  Raises StepTooLarge if
    ``||A(tau)|| * h > 1`` anywhere on the grid.
    """
    spec.check_times(t, s)
    n = spec.dim
    u = identity(n)
    if t == s:
        return u
    if h is None:
        h = spec.T / DEFAULT_STEPS
    steps = max(1, math.ceil(abs(t - s) / h - 1e-9))
    dt = (t - s) / steps
    for k in range(steps):
        tau = s + k * dt
        a0 = spec.generator(tau)
        a1 = spec.generator(tau + dt / 2)
        a2 = spec.generator(tau + dt)
        if frobenius(a0) * abs(dt) > 1 and opnorm(a0) * abs(dt) > 1:
            raise StepTooLarge(f"||A({tau:.4g})|| * h = {opnorm(a0) * abs(dt):.3g} > 1")
        k1 = a0 @ u
        k2 = a1 @ (u + 0.5 * dt * k1)
        k3 = a1 @ (u + 0.5 * dt * k2)
        k4 = a2 @ (u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def closed_form(spec, t, s):
    """Exact ``exp(sum_k (\\int_s^t a_k) M_k)`` for a commuting spec."""
    if not spec.commuting:
        raise NonCommuting("closed form needs pairwise commuting generator terms")
    spec.check_times(t, s)
    n = spec.dim
    if t == s:
        return identity(n)
    exponent = np.zeros((n, n), dtype=np.complex128)
    for coef, m in spec.terms:
        exponent += coef.integral(s, t) * m
    return matrix_exp(exponent)


_family_ids = iter(range(1, 1 << 62))


@dataclass(eq=False)
class EvolutionFamily:
    """Two-parameter family evaluated on demand and memoized by time pair.

    ``method`` is ``"closed_form"`` or ``"rk4"`` (with step ``h``).
    """

    spec: GeneratorSpec
    method: str = "closed_form"
    h: float = None
    name: str = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.method not in ("closed_form", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "closed_form" and not self.spec.commuting:
            raise NonCommuting("closed_form method needs a commuting generator")
        if self.method == "rk4" and self.h is None:
            self.h = self.spec.T / DEFAULT_STEPS
        if self.name is None:
            self.name = f"family-{next(_family_ids)}"

    @property
    def dim(self):
        return self.spec.dim

    @property
    def T(self):
        return self.spec.T

    def generator(self, t):
        return self.spec.generator(t)

    def _evaluate(self, t, s):
        if self.method == "closed_form":
            return closed_form(self.spec, t, s)
        return propagate(self.spec, t, s, self.h)

    def __call__(self, t, s):
        t, s = float(t), float(s)
        if t == s:
            return identity(self.dim)
        key = (t, s)
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            hit = self._evaluate(t, s)
            hit.setflags(write=False)
            with self._lock:
                self._cache[key] = hit
        return hit


@dataclass(eq=False)
class ProductFamily(EvolutionFamily):
    """``W(t, s) = U1(t, s) U2(t, s)`` for families commuting pointwise."""

    first: EvolutionFamily = None
    second: EvolutionFamily = None

    def __post_init__(self):
        if self.name is None:
            self.name = f"{self.first.name}*{self.second.name}"

    def _evaluate(self, t, s):
        return self.first(t, s) @ self.second(t, s)


def product_family(f1, f2, samples=None, rtol=COMMUTE_RTOL):
    """Pointwise product family, after checking ``U1(t,r) U2(t,r) =
    U2(t,r) U1(t,r)`` on sampled pairs (NonCommuting otherwise)."""
    if f1.dim != f2.dim:
        raise ValueError("families have different dimensions")
    T = min(f1.T, f2.T)
    if samples is None:
        grid = np.linspace(-T, T, 5)
        samples = [(t, r) for t in grid for r in grid if t != r]
    for t, r in samples:
        a, b = f1(t, r), f2(t, r)
        if opnorm(a @ b - b @ a) > rtol * opnorm(a) * opnorm(b):
            raise NonCommuting(f"U1 and U2 do not commute at ({t}, {r})")
    spec = GeneratorSpec(f1.dim, f1.spec.terms + f2.spec.terms, T)
    method = "rk4" if "rk4" in (f1.method, f2.method) else "closed_form"
    h = f1.h if f1.method == "rk4" else f2.h
    return ProductFamily(spec=spec, method=method, h=h, first=f1, second=f2)


def verify_semigroup(fam, triples):
    """Largest of ``||U(t,r)U(r,s) - U(t,s)||`` and ``||U(s,t)U(t,s) - I||``
    over the triples."""
    eye = identity(fam.dim)
    worst = 0.0
    for t, r, s in triples:
        worst = max(worst, opnorm(fam(t, r) @ fam(r, s) - fam(t, s)))
        worst = max(worst, opnorm(fam(s, t) @ fam(t, s) - eye))
    return worst
