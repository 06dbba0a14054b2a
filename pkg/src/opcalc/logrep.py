"""Logarithmic representation of a generator: ``a(t, s) = Log(U(t, s) + kappa I)``.

Provides the round trip ``U = exp(a) - kappa I``, recovery of ``A(t)`` from
``(I + kappa U(s, t)) d/dt a(t, s)``, and a comparison of ``a`` with the
integral ``\\int_s^t (I + kappa U(s, tau))^-1 A(tau) dtau``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .calculus import (
    DEFAULT_NODES,
    SpectralCertificate,
    auto_contour,
    choose_kappa,
    log_with_certificate,
    principal_log_scalar,
)
from .errors import BranchCutIntersection, BranchInconsistency
from .linalg import eigenvalues, identity, matrix_exp, opnorm, solve_linear

SIMPSON_POINTS = 129


@dataclass(frozen=True)
class LogRepresentation:
    kappa: complex
    t: float
    s: float
    a: np.ndarray
    family_ref: str
    certificate: SpectralCertificate
    contour: object = None

    @property
    def a_norm(self):
        return opnorm(self.a)


def compute_a(fam, t, s, kappa=None, contour=None, nodes=DEFAULT_NODES):
    """``a(t, s) = Log(U(t, s) + kappa I)``; ``kappa=None`` picks one from the
    ladder."""
    fam.spec.check_times(t, s)
    u = fam(t, s)
    if kappa is None:
        kappa, _ = choose_kappa(u, nodes=nodes)
    kappa = complex(kappa)
    shifted = u + kappa * identity(fam.dim)
    a, cert, used = log_with_certificate(shifted, contour, nodes)
    if not cert.valid_for_log:
        raise BranchCutIntersection(f"kappa={kappa} is not admissible at ({t}, {s})")
    return LogRepresentation(kappa, float(t), float(s), a, fam.name, cert, used)


def reconstruct_U(rep):
    """``exp(a) - kappa I``."""
    return matrix_exp(rep.a) - rep.kappa * identity(rep.a.shape[0])


def generator_from_logrep(fam, t, s, kappa=None, h=None, nodes=DEFAULT_NODES):
    """Central-difference realization of ``(I + kappa U(s,t)) d/dt Log(U(t,s) + kappa I)``.

    One contour, built from the spectra at ``t - h``, ``t`` and ``t + h``, is
    shared by both logarithms so the stencil never straddles two branches.
    """
    if h is None:
        h = 1e-3 * fam.T
    fam.spec.check_times(t - h, t + h, s)
    n = fam.dim
    eye = identity(n)
    if kappa is None:
        kappa, _ = choose_kappa(fam(t, s), nodes=nodes)
    kappa = complex(kappa)
    plus = fam(t + h, s) + kappa * eye
    minus = fam(t - h, s) + kappa * eye
    centre = fam(t, s) + kappa * eye
    eigs = np.concatenate([eigenvalues(m) for m in (minus, centre, plus)])
    scale = max(opnorm(m) for m in (minus, centre, plus))
    contour = auto_contour(eigs=eigs, scale=scale, nodes=nodes)

    a_plus, cert_p, _ = log_with_certificate(plus, contour)
    a_minus, cert_m, _ = log_with_certificate(minus, contour)
    if not (cert_p.valid_for_log and cert_m.valid_for_log):
        raise BranchCutIntersection(f"kappa={kappa} not admissible across the stencil at t={t}")
    jump = opnorm(a_plus - a_minus)
    if jump > math.pi:
        raise BranchInconsistency(f"principal branch jumps by {jump:.3g} across [t-h, t+h]")
    return (eye + kappa * fam(s, t)) @ ((a_plus - a_minus) / (2.0 * h))


@dataclass(frozen=True)
class IntegralCheck:
    discrepancy: float
    wrap_flag: bool
    windings: tuple
    defect_eigenvalues: np.ndarray
    integral: np.ndarray
    a_ts: np.ndarray


def simpson_weights(a, b, points):
    if points < 3 or points % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of points >= 3")
    w = np.ones(points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (b - a) / (3.0 * (points - 1))


def integral_representation_check(fam, t, s, kappa=0.0, points=SIMPSON_POINTS,
                                  nodes=DEFAULT_NODES):
    """Compare ``Q = \\int_s^t (I + kappa U(s,tau))^-1 A(tau) dtau`` (composite
    Simpson) with ``a(t,s) - a(s,s)``.

    A defect whose eigenvalues sit at nonzero multiples of ``2 pi i`` is the
    signature of the principal branch wrapping; it is reported, not raised.
    """
    fam.spec.check_times(t, s)
    kappa = complex(kappa)
    n = fam.dim
    eye = identity(n)
    taus = np.linspace(s, t, points)
    weights = simpson_weights(s, t, points)
    q = np.zeros((n, n), dtype=np.complex128)
    for tau, w in zip(taus, weights):
        q += w * solve_linear(eye + kappa * fam(s, tau), fam.generator(tau))

    a_ts = compute_a(fam, t, s, kappa, nodes=nodes).a
    a_ss = principal_log_scalar(1.0 + kappa) * eye
    defect = q - (a_ts - a_ss)
    lam = eigenvalues(defect)
    windings = tuple(int(k) for k in np.rint(lam.imag / (2 * math.pi)))
    return IntegralCheck(
        discrepancy=opnorm(defect),
        wrap_flag=any(k != 0 for k in windings),
        windings=windings,
        defect_eigenvalues=lam,
        integral=q,
        a_ts=a_ts,
    )
