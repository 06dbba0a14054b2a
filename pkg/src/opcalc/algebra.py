"""Closure identities and axiom checks for spaces of operator logarithms.

Two sets are exercised:

* ``k Log U(t, s)`` with ``k`` complex, a normed vector space when the
  logarithms commute;
* ``Kc Log(U(t, s) + K)`` with ``Kc`` in the commutant of the logarithms, a
  module over the bounded operators.

Every sum identity is gated by :func:`branch_wrap_detect`: when principal
arguments add up outside (-pi, pi] the identity fails by a multiple of
``2 pi i`` and that defect is reported instead.
"""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .calculus import DEFAULT_NODES, principal_arg, principal_log
from .errors import BranchWrap, Defective, NonCommuting, NotInCommutant
from .linalg import eig_oracle, identity, opnorm, solve_linear

COMMUTE_RTOL = 1e-10
JOINT_DIAG_RTOL = 1e-8
WRAP_STRUCTURE_TOL = 1e-6


# --------------------------------------------------------------------------
# branch wrap detection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WrapReport:
    wrap_flag: bool
    angle_sums: np.ndarray
    windings: tuple

    @property
    def expected_defect(self):
        """Eigenvalues that ``sum Log F_i - Log prod F_i`` must have."""
        return 2j * math.pi * np.asarray(self.windings, dtype=float)


def _joint_eigenbasis(factors):
    combo = sum(complex(1.0 + 0.37 * (i + 1), 0.61 * (i + 1) ** 0.5) * f
                for i, f in enumerate(factors))
    try:
        return eig_oracle(combo).vectors
    except Defective as exc:
        raise Defective(f"factors are not simultaneously diagonalizable: {exc}") from exc


def branch_wrap_detect(factors):
    """Sum the principal arguments of the factors' eigenvalues along each
    joint eigendirection; a sum outside (-pi, pi] is a wrap."""
    factors = [np.asarray(f, dtype=np.complex128) for f in factors]
    v = _joint_eigenbasis(factors)
    sums = np.zeros(v.shape[0])
    for f in factors:
        d = solve_linear(v, f @ v)
        diag = np.diag(d)
        off = opnorm(d - np.diag(diag))
        if off > JOINT_DIAG_RTOL * (1.0 + opnorm(d)):
            raise Defective(f"joint eigenbasis leaves off-diagonal mass {off:.3e}")
        sums = sums + principal_arg(diag)
    windings = tuple(int(-math.floor((math.pi - x) / (2 * math.pi))) for x in sums)
    return WrapReport(any(k != 0 for k in windings), sums, windings)


# --------------------------------------------------------------------------
# sum identities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityResult:
    name: str
    residual: float
    scale: float
    wrap: WrapReport
    defect_eigenvalues: np.ndarray
    K_norm: float = 0.0

    @property
    def threshold(self):
        return 1e-8 * self.scale

    @property
    def wrap_structure_ok(self):
        """Defect eigenvalues lie within 1e-6 of 2 pi i Z."""
        lam = self.defect_eigenvalues
        k = np.rint(lam.imag / (2 * math.pi))
        return bool(np.all(np.abs(lam - 2j * math.pi * k) <= WRAP_STRUCTURE_TOL))

    @property
    def diagnosis(self):
        k = np.rint(self.defect_eigenvalues.imag / (2 * math.pi)).astype(int)
        return "defect eigenvalues ~ 2*pi*i*" + "[" + " ".join(str(x) for x in sorted(k)) + "]"


def _check_commute(a, b, what, rtol=COMMUTE_RTOL):
    if opnorm(a @ b - b @ a) > rtol * opnorm(a) * opnorm(b):
        raise NonCommuting(f"{what} do not commute")


def _evaluate(name, lhs, target, factors, nodes, check_wrap, K_norm=0.0):
    wrap = branch_wrap_detect(factors)
    logs = [principal_log(m, nodes=nodes) for m in lhs]
    rhs = principal_log(target, nodes=nodes)
    defect = sum(logs) - rhs
    scale = 1.0 + max(opnorm(x) for x in logs + [rhs])
    result = IdentityResult(
        name=name,
        residual=opnorm(defect),
        scale=scale,
        wrap=wrap,
        defect_eigenvalues=np.linalg.eigvals(defect),
        K_norm=K_norm,
    )
    if wrap.wrap_flag and check_wrap:
        raise BranchWrap(f"{name}: principal arguments wrap ({result.diagnosis})", result)
    return result


def sum_chain_identity(fam, t, r, s, nodes=DEFAULT_NODES, check_wrap=True):
    """``Log U(t,r) + Log U(r,s) = Log U(t,s)``."""
    u_tr, u_rs = fam(t, r), fam(r, s)
    return _evaluate("eq4_chain", [u_tr, u_rs], fam(t, s), [u_tr, u_rs], nodes, check_wrap)


def sum_commuting_identity(f1, f2, t, r, nodes=DEFAULT_NODES, check_wrap=True):
    """``Log U1(t,r) + Log U2(t,r) = Log(U1(t,r) U2(t,r))``."""
    u1, u2 = f1(t, r), f2(t, r)
    _check_commute(u1, u2, "U1(t,r) and U2(t,r)")
    return _evaluate("eq5_commuting", [u1, u2], u1 @ u2, [u1, u2], nodes, check_wrap)


def shifted_sum_identity(families, times, K, variant="chain", nodes=DEFAULT_NODES,
                         check_wrap=True):
    """Sum identities for logarithms shifted by a commuting bounded ``K``.

    chain:     Log(U(t,r)+K) + Log(U(r,s)+K) = Log(U(t,s) + K U(t,r) + K U(r,s) + K^2)
    commuting: Log(U1+K) + Log(U2+K) = Log(U1 U2 + K U1 + K U2 + K^2), at (t, r)
    """
    K = np.asarray(K, dtype=np.complex128)
    k_norm = opnorm(K)
    if variant == "chain":
        fam = families
        t, r, s = times
        u1, u2 = fam(t, r), fam(r, s)
        for u in (u1, u2):
            _check_commute(K, u, "K and the family")
        target = fam(t, s) + K @ u1 + K @ u2 + K @ K
        name = "eq6_shifted_chain"
    elif variant == "commuting":
        f1, f2 = families
        t, r = times[:2]
        u1, u2 = f1(t, r), f2(t, r)
        _check_commute(u1, u2, "U1(t,r) and U2(t,r)")
        for u in (u1, u2):
            _check_commute(K, u, "K and the families")
        target = u1 @ u2 + K @ u1 + K @ u2 + K @ K
        name = "eq7_shifted_commuting"
    else:
        raise ValueError(f"unknown variant {variant!r}")
    lhs = [u1 + K, u2 + K]
    return _evaluate(name, lhs, target, lhs, nodes, check_wrap, k_norm)


def large_shift_ok(K, us):
    """Large-shift rule: ``||K^-1||^-1 >= 2 (1 + max ||U||)`` and the spectrum
    of ``K`` lies to the right of ``max ||U||``, so every ``U + K`` (with
    commuting ``U``) has spectrum in the open right half-plane."""
    bound = max(opnorm(u) for u in us)
    sigma_min = float(np.linalg.svd(K, compute_uv=False).min())
    return sigma_min >= 2.0 * (1.0 + bound) and float(np.linalg.eigvals(K).real.min()) > bound


def polynomial_in(m, coeffs):
    """``sum_k c_k m^k`` by Horner."""
    m = np.asarray(m, dtype=np.complex128)
    out = np.zeros_like(m)
    eye = identity(m.shape[0])
    for c in reversed(list(coeffs)):
        out = out @ m + complex(c) * eye
    return out


# --------------------------------------------------------------------------
# elements and the module action
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LogElement:
    """``value = multiplier @ Log(base + shift)``; ``scalar`` is set for
    elements of the form ``k Log U`` (zero shift)."""

    value: np.ndarray
    core: np.ndarray
    base: np.ndarray
    shift: np.ndarray
    multiplier: np.ndarray
    scalar: complex = None
    provenance: tuple = ()
    norm_bound: float = None

    @property
    def dim(self):
        return self.value.shape[0]


def log_element(fam, t, s, k=1.0, nodes=DEFAULT_NODES):
    """``k Log U(t, s)``."""
    u = fam(t, s)
    n = fam.dim
    core = principal_log(u, nodes=nodes)
    k = complex(k)
    return LogElement(k * core, core, u, np.zeros((n, n), dtype=np.complex128),
                      k * identity(n), k, (fam.name, t, s))


def shifted_log_element(fam, t, s, K, multiplier=None, nodes=DEFAULT_NODES):
    """``Kc Log(U(t, s) + K)``; ``Kc`` defaults to the identity."""
    u = fam(t, s)
    K = np.asarray(K, dtype=np.complex128)
    core = principal_log(u + K, nodes=nodes)
    elem = LogElement(core, core, u, K, identity(fam.dim), None, (fam.name, t, s))
    return elem if multiplier is None else module_action(multiplier, elem)


def module_action(cal_k, elem, rtol=COMMUTE_RTOL):
    """``cal_k . elem``; ``cal_k`` must commute with the element's logarithm."""
    cal_k = np.asarray(cal_k, dtype=np.complex128)
    gap = opnorm(cal_k @ elem.core - elem.core @ cal_k)
    if gap > rtol * opnorm(cal_k) * opnorm(elem.core):
        raise NotInCommutant(f"commutator norm {gap:.3e} exceeds tolerance")
    return LogElement(
        value=cal_k @ elem.value,
        core=elem.core,
        base=elem.base,
        shift=elem.shift,
        multiplier=cal_k @ elem.multiplier,
        scalar=None,
        provenance=elem.provenance,
        norm_bound=opnorm(cal_k) * opnorm(elem.value),
    )


@dataclass(frozen=True)
class CommutantBasis:
    generators: tuple
    degree: int

    def max_commutator(self, logs):
        worst = 0.0
        for g in self.generators:
            for lg in logs:
                scale = max(opnorm(g) * opnorm(lg), np.finfo(float).tiny)
                worst = max(worst, opnorm(g @ lg - lg @ g) / scale)
        return worst


def commutant_basis(matrices, degree=4):
    """Identity plus powers ``M^1 .. M^degree`` of each generator matrix."""
    matrices = [np.asarray(m, dtype=np.complex128) for m in matrices]
    n = matrices[0].shape[0]
    gens = [identity(n)]
    for m in matrices:
        p = identity(n)
        for _ in range(degree):
            p = p @ m
            gens.append(p.copy())
    return CommutantBasis(tuple(gens), degree)


# --------------------------------------------------------------------------
# axiom checks
# --------------------------------------------------------------------------

VECTOR_AXIOMS = (
    "add_commutative", "add_associative", "additive_identity", "additive_inverse",
    "scalar_unit", "scalar_compatible", "distributive_vectors", "distributive_scalars",
    "norm_definite", "norm_homogeneous", "norm_triangle",
)
MODULE_AXIOMS = ("module_unit", "module_associative", "module_distributive_algebra",
                 "module_distributive_elements", "module_submultiplicative")


@dataclass
class AxiomReport:
    residuals: dict = field(default_factory=dict)

    def record(self, name, value):
        self.residuals[name] = max(self.residuals.get(name, 0.0), float(value))

    def worst(self, names):
        return max((self.residuals[n] for n in names if n in self.residuals), default=0.0)

    @property
    def vector_residual(self):
        return self.worst(VECTOR_AXIOMS)

    @property
    def module_residual(self):
        return self.worst(MODULE_AXIOMS)

    def passed(self, vector_tol=1e-12, module_tol=1e-10, zero_tol=1e-12, containment_tol=1e-14):
        return (self.vector_residual <= vector_tol
                and self.module_residual <= module_tol
                and self.residuals.get("zero_element", 0.0) <= zero_tol
                and self.residuals.get("containment", 0.0) <= containment_tol)


def _rel(x, y, *operands):
    scale = 1.0 + max([opnorm(x), opnorm(y)] + [opnorm(o) for o in operands])
    return opnorm(x - y) / scale


def space_axioms_check(sample, scalars, algebra=None, nodes=DEFAULT_NODES):
    """Check vector-space (and, given ``algebra``, module) axioms on a sample.

    Residuals are relative to ``1 + `` the largest operand norm.  Elements that
    carry a scalar are also rebuilt with zero shift and multiplier ``k I`` to
    confirm that the scalar set sits inside the shifted set.
    """
    report = AxiomReport()
    if not sample:
        return report
    n = sample[0].dim
    if any(e.dim != n for e in sample):
        raise ValueError("sample elements have different dimensions")
    vals = [e.value for e in sample]
    zero = principal_log(identity(n), nodes=nodes)
    report.record("zero_element", opnorm(zero))

    for a in vals:
        report.record("additive_identity", _rel(a + zero, a, a))
        report.record("additive_inverse", opnorm(a + (-1.0) * a) / (1.0 + opnorm(a)))
        report.record("scalar_unit", _rel(1.0 * a, a))
        nrm = opnorm(a)
        report.record("norm_definite", float((nrm == 0.0) != (not np.any(a))))
    for a, b in itertools.product(vals, repeat=2):
        report.record("add_commutative", _rel(a + b, b + a))
        na, nb, nab = opnorm(a), opnorm(b), opnorm(a + b)
        report.record("norm_triangle", max(0.0, nab - na - nb) / (1.0 + na + nb))
    for a, b, c in itertools.product(vals, repeat=3):
        report.record("add_associative", _rel((a + b) + c, a + (b + c), a, b, c))
    for alpha in scalars:
        alpha = complex(alpha)
        for a in vals:
            report.record("norm_homogeneous",
                          abs(opnorm(alpha * a) - abs(alpha) * opnorm(a)) / (1.0 + abs(alpha) * opnorm(a)))
            for beta in scalars:
                beta = complex(beta)
                report.record("scalar_compatible", _rel((alpha * beta) * a, alpha * (beta * a)))
                report.record("distributive_scalars",
                              _rel((alpha + beta) * a, alpha * a + beta * a, alpha * a, beta * a))
        for a, b in itertools.product(vals, repeat=2):
            report.record("distributive_vectors",
                          _rel(alpha * (a + b), alpha * a + alpha * b, alpha * a, alpha * b))

    for e in sample:
        if e.scalar is None:
            continue
        rebuilt = principal_log(e.base + np.zeros_like(e.base), nodes=nodes)
        as_module = (e.scalar * identity(n)) @ rebuilt
        report.record("containment", opnorm(as_module - e.value) / (1.0 + opnorm(e.value)))

    if algebra is not None:
        eye = identity(n)
        algebra = [np.asarray(k, dtype=np.complex128) for k in algebra]
        acts = [[module_action(k, e) for k in algebra] for e in sample]
        for ei, e in enumerate(sample):
            report.record("module_unit", _rel(module_action(eye, e).value, e.value))
            for i, k1 in enumerate(algebra):
                act = acts[ei][i]
                report.record("module_submultiplicative",
                              max(0.0, opnorm(act.value) - act.norm_bound) / (1.0 + act.norm_bound))
                for j, k2 in enumerate(algebra):
                    lhs = module_action(k1 @ k2, e).value
                    rhs = module_action(k1, acts[ei][j]).value
                    report.record("module_associative", _rel(lhs, rhs))
                    lhs = module_action(k1 + k2, e).value
                    rhs = act.value + acts[ei][j].value
                    report.record("module_distributive_algebra", _rel(lhs, rhs))
        for i, k1 in enumerate(algebra):
            for ei, fi in itertools.product(range(len(sample)), repeat=2):
                lhs = k1 @ (sample[ei].value + sample[fi].value)
                rhs = acts[ei][i].value + acts[fi][i].value
                report.record("module_distributive_elements", _rel(lhs, rhs))
    return report
