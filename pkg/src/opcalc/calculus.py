"""Holomorphic functional calculus by contour quadrature.

``f(A) = 1/(2 pi i) \\oint f(z) (zI - A)^-1 dz`` is evaluated with the
trapezoidal rule on circles or axis-aligned ellipses.  A contour argument may
also be a sequence of disjoint curves (a cycle), which is how spectra that
straddle the negative real axis are handled for the principal logarithm
without winding around the cut.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    AmbiguousCount,
    BranchCutIntersection,
    ContourInvalid,
    NoAdmissibleKappa,
)
from .linalg import as_matrix, eigenvalues, identity, lu_factor, lu_solve, opnorm

DEFAULT_NODES = 256
MIN_NODES = 16
COUNT_TOL = 0.1
KAPPA_CLEARANCE = 0.1
# eigenvalues closer than this (relative to 1 + ||A||) count as on the cut
CUT_EPS = 1e-10


def cut_distance(z):
    """Distance from each point of ``z`` to the branch cut (-inf, 0]."""
    z = np.asarray(z, dtype=np.complex128)
    return np.where(z.real >= 0, np.abs(z), np.abs(z.imag))


def principal_arg(z):
    """Argument in (-pi, pi]; a signed zero imaginary part never yields -pi."""
    a = np.angle(np.asarray(z, dtype=np.complex128))
    return np.where(a <= -math.pi, math.pi, a)


def principal_log_scalar(z):
    z = np.asarray(z, dtype=np.complex128)
    return np.log(np.abs(z)) + 1j * principal_arg(z)


@dataclass(frozen=True)
class Contour:
    """Positively oriented circle or axis-aligned ellipse with ``nodes``
    trapezoidal quadrature points."""

    kind: str
    center: complex
    radius: float = None
    semi_axes: tuple = None
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if self.kind == "circle":
            if self.radius is None or not self.radius > 0:
                raise ValueError("circle radius must be positive")
        elif self.kind == "ellipse":
            if self.semi_axes is None or len(self.semi_axes) != 2:
                raise ValueError("ellipse needs two semi-axes")
            if not (self.semi_axes[0] > 0 and self.semi_axes[1] > 0):
                raise ValueError("ellipse semi-axes must be positive")
        else:
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if int(self.nodes) < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes, got {self.nodes}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "nodes", int(self.nodes))

    @classmethod
    def circle(cls, center, radius, nodes=DEFAULT_NODES):
        return cls("circle", center, radius=float(radius), nodes=nodes)

    @classmethod
    def ellipse(cls, center, a, b, nodes=DEFAULT_NODES):
        return cls("ellipse", center, semi_axes=(float(a), float(b)), nodes=nodes)

    @property
    def axes(self):
        if self.kind == "circle":
            return self.radius, self.radius
        return self.semi_axes

    def with_nodes(self, nodes):
        if self.kind == "circle":
            return Contour.circle(self.center, self.radius, nodes)
        return Contour.ellipse(self.center, *self.semi_axes, nodes)

    def quadrature(self):
        """Nodes ``z_j`` and weights ``w_j`` with
        ``1/(2 pi i) \\oint g dz ~ sum_j w_j g(z_j)``."""
        a, b = self.axes
        theta = 2.0 * math.pi * np.arange(self.nodes) / self.nodes
        c, s = np.cos(theta), np.sin(theta)
        z = self.center + a * c + 1j * b * s
        w = (b * c + 1j * a * s) / self.nodes
        return z, w

    def sample(self, m=4096):
        a, b = self.axes
        theta = 2.0 * math.pi * np.arange(m) / m
        return self.center + a * np.cos(theta) + 1j * b * np.sin(theta)

    def contains(self, z):
        a, b = self.axes
        d = np.asarray(z, dtype=np.complex128) - self.center
        return (d.real / a) ** 2 + (d.imag / b) ** 2 < 1.0

    def crosses_cut(self):
        if self.kind == "circle":
            return bool(cut_distance(self.center) <= self.radius)
        p = self.sample()
        if np.any(cut_distance(p) == 0):
            return True
        q = np.roll(p, -1)
        flip = (p.imag * q.imag <= 0) & (p.imag != q.imag)
        x = p.real - p.imag * (q.real - p.real) / np.where(flip, q.imag - p.imag, 1.0)
        return bool(np.any(flip & (x <= 0)))

    def to_dict(self):
        out = {"kind": self.kind, "center": [self.center.real, self.center.imag],
               "nodes": self.nodes}
        if self.kind == "circle":
            out["radius"] = self.radius
        else:
            out["semi_axes"] = list(self.semi_axes)
        return out

    @classmethod
    def from_dict(cls, d):
        center = complex(*d["center"])
        nodes = d.get("nodes", DEFAULT_NODES)
        if d["kind"] == "circle":
            return cls.circle(center, d["radius"], nodes)
        return cls.ellipse(center, *d["semi_axes"], nodes)


def _components(contour):
    if isinstance(contour, Contour):
        return (contour,)
    comps = tuple(contour)
    if not comps or not all(isinstance(c, Contour) for c in comps):
        raise TypeError("contour must be a Contour or a non-empty sequence of them")
    return comps


def with_nodes(contour, nodes):
    comps = tuple(c.with_nodes(nodes) for c in _components(contour))
    return comps[0] if len(comps) == 1 else comps


@dataclass(frozen=True)
class SpectralCertificate:
    dim: int
    enclosed_count: int
    cut_clearance: float
    count_error: float = 0.0
    wrap_flag: bool = False
    method: str = "oracle"

    @property
    def valid_for_log(self):
        return self.enclosed_count == self.dim and self.cut_clearance > 0


# --------------------------------------------------------------------------
# quadrature engine
# --------------------------------------------------------------------------

_FUNCTIONS = {
    "log": principal_log_scalar,
    "identity": lambda z: z,
    "exp": np.exp,
    "one": np.ones_like,
}


def _resolve_function(f):
    if callable(f):
        return f, False
    try:
        return _FUNCTIONS[f], f == "log"
    except KeyError:
        raise ValueError(f"unknown function id {f!r}") from None


def _tree_sum(terms):
    """Fixed-order pairwise reduction over the leading axis."""
    while terms.shape[0] > 1:
        m = terms.shape[0]
        even = terms[: m - (m % 2)]
        paired = even[0::2] + even[1::2]
        terms = np.concatenate([paired, terms[m - 1:]]) if m % 2 else paired
    return terms[0]


def _resolvents(a, comps):
    zs, ws = zip(*(c.quadrature() for c in comps))
    z = np.concatenate(zs)
    w = np.concatenate(ws)
    n = a.shape[0]
    shifted = z[:, None, None] * identity(n)[None] - a[None]
    res = lu_solve(lu_factor(shifted), identity(n))
    return z, w, res


def _certify(a, w, res):
    n = a.shape[0]
    raw = _tree_sum((w * np.trace(res, axis1=1, axis2=2))[:, None, None])[0, 0]
    count = int(round(raw.real))
    err = abs(raw - count)
    if err >= COUNT_TOL:
        raise AmbiguousCount(f"argument-principle value {raw:.6g} is not near an integer")
    clearance = float(cut_distance(eigenvalues(a)).min())
    return SpectralCertificate(n, count, clearance, float(err))


def validate_contour(a, contour, for_log=False):
    """Argument-principle eigenvalue count inside ``contour`` plus the
    spectrum's clearance from the cut."""
    a = as_matrix(a)
    comps = _components(contour)
    if for_log and any(c.crosses_cut() for c in comps):
        raise BranchCutIntersection("contour intersects the branch cut (-inf, 0]")
    _, w, res = _resolvents(a, comps)
    return _certify(a, w, res)


def _dunford(f, a, contour):
    a = as_matrix(a)
    fn, for_log = _resolve_function(f)
    comps = _components(contour)
    if for_log and any(c.crosses_cut() for c in comps):
        raise BranchCutIntersection("contour intersects the branch cut (-inf, 0]")
    z, w, res = _resolvents(a, comps)
    cert = _certify(a, w, res)
    if cert.enclosed_count != a.shape[0]:
        raise ContourInvalid(
            f"contour encloses {cert.enclosed_count} of {a.shape[0]} eigenvalues"
        )
    coef = w * np.asarray(fn(z), dtype=np.complex128)
    return _tree_sum(coef[:, None, None] * res), cert


def dunford_apply(f, a, contour):
    """``f(a)`` by trapezoidal quadrature of the Dunford-Riesz integral.

    ``f`` is one of ``"log"``, ``"identity"``, ``"exp"``, ``"one"`` or a
    vectorized callable.  The contour must enclose the whole spectrum.
    """
    return _dunford(f, a, contour)[0]


# --------------------------------------------------------------------------
# contour selection
# --------------------------------------------------------------------------

def _cut_samples(scale, foot):
    far = -np.logspace(-8, 8, 1601) * (1.0 + scale)
    return np.concatenate([[0.0, min(foot, 0.0)], far]).astype(np.complex128)


def convergence_factor(contour, singular_points):
    """Geometric rate ``q`` of the trapezoidal error ``O(q**N)``.

    Each curve is pulled back to the unit circle through
    ``z = c + (a+b)/2 w + (a-b)/2 / w``; a singularity at ``|w| = rho``
    contributes ``rho`` if inside the unit circle and ``1/rho`` otherwise.
    """
    pts = np.asarray(singular_points, dtype=np.complex128)
    worst = 0.0
    for comp in _components(contour):
        a, b = comp.axes
        p, q = (a + b) / 2.0, (a - b) / 2.0
        d = pts - comp.center
        disc = np.sqrt(d * d - 4.0 * p * q)
        roots = np.abs(np.concatenate([(d + disc) / (2 * p), (d - disc) / (2 * p)]))
        rates = np.where(roots < 1.0, roots, 1.0 / np.maximum(roots, 1e-300))
        worst = max(worst, float(rates.max()))
    return worst


def _encloses_once(comps, eigs):
    inside = np.sum([c.contains(eigs) for c in comps], axis=0)
    return bool(np.all(inside == 1))


def _disjoint(comps):
    for i, ci in enumerate(comps):
        for cj in comps[i + 1:]:
            if abs(ci.center - cj.center) <= max(ci.axes) + max(cj.axes):
                return False
    return True


def _linkage_groups(eigs):
    """Single-linkage clusters: points join when closer than half their
    distance to the cut."""
    cd = cut_distance(eigs)
    m = len(eigs)
    label = list(range(m))

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if abs(eigs[i] - eigs[j]) <= 0.5 * min(cd[i], cd[j]):
                label[find(i)] = find(j)
    groups = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _disc(pts):
    c = pts.mean()
    return c, float(np.abs(pts - c).max())


def _room(c, discs, skip):
    room = float(cut_distance(c))
    for j, (cj, sj) in enumerate(discs):
        if j not in skip:
            room = min(room, abs(cj - c) - sj)
    return room


def _greedy_groups(eigs, slack=1.5):
    """Agglomerate nearest clusters while the merged disc keeps ``slack``
    times its radius free of the cut and of every other cluster."""
    groups = [[i] for i in range(len(eigs))]
    while len(groups) > 1:
        discs = [_disc(eigs[g]) for g in groups]
        pairs = sorted(
            (abs(discs[i][0] - discs[j][0]), i, j)
            for i in range(len(groups)) for j in range(i + 1, len(groups))
        )
        for _, i, j in pairs:
            c, spread = _disc(eigs[groups[i] + groups[j]])
            if _room(c, discs, (i, j)) > slack * spread:
                groups[i] = groups[i] + groups[j]
                del groups[j]
                break
        else:
            break
    return groups


def _cycle(eigs, groups, nodes):
    """One circle per group; ``None`` when some group cannot be isolated."""
    discs = [_disc(eigs[g]) for g in groups]
    comps = []
    for i, (c, spread) in enumerate(discs):
        # radii below the arithmetic mean of spread and room keep circles apart
        room = _room(c, discs, (i,))
        if spread >= room:
            return None
        inner = max(spread, 0.2 * room)
        comps.append(Contour.circle(c, math.sqrt(inner * room), nodes))
    return tuple(comps)


def auto_contour(a=None, *, eigs=None, scale=None, for_log=True, nodes=DEFAULT_NODES):
    """Pick a contour enclosing the spectrum of ``a`` (or of the supplied
    eigenvalue set).

    The first choice is the circle about the eigenvalue centroid with radius
    ``1.25 * max|lambda - centroid| + 0.05 * ||A||``.  For the logarithm it is
    kept when it clears the cut and converges fast enough at ``nodes``;
    otherwise the best of a geometric-mean circle, a spectrum-hugging ellipse
    and a cycle of per-cluster circles is used.
    """
    if eigs is None:
        a = as_matrix(a)
        eigs = eigenvalues(a)
    eigs = np.atleast_1d(np.asarray(eigs, dtype=np.complex128))
    if scale is None:
        scale = opnorm(a) if a is not None else float(np.abs(eigs).max())

    centroid = eigs.mean()
    maxdist = float(np.abs(eigs - centroid).max())
    radius = 1.25 * maxdist + 0.05 * scale
    if radius <= 0:
        radius = 0.05
    base = Contour.circle(centroid, radius, nodes)
    if not for_log:
        return base

    clearance = float(cut_distance(eigs).min())
    if clearance <= CUT_EPS * (1.0 + scale):
        raise BranchCutIntersection(
            f"eigenvalue within {clearance:.3e} of the branch cut"
        )
    singular = np.concatenate([eigs, _cut_samples(scale, centroid.real)])
    q_target = 10.0 ** (-15.0 / nodes)

    def rate(cand):
        comps = _components(cand)
        if any(c.crosses_cut() for c in comps):
            return math.inf
        if not _encloses_once(comps, eigs) or not _disjoint(comps):
            return math.inf
        foot = min(c.center.real for c in comps)
        pts = np.concatenate([eigs, _cut_samples(scale, foot)]) if foot < 0 else singular
        return convergence_factor(cand, pts)

    q_base = rate(base)
    if q_base <= q_target:
        return base

    candidates = [base]
    reach = float(cut_distance(centroid))
    if maxdist < reach:
        candidates.append(Contour.circle(centroid, math.sqrt(max(maxdist, 0.25 * reach) * reach), nodes))
    lo = np.array([eigs.real.min(), eigs.imag.min()])
    hi = np.array([eigs.real.max(), eigs.imag.max()])
    mid = complex((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2)
    half = (hi - lo) / 2
    for frac in (0.5, 0.25, 0.1):
        margin = frac * clearance
        candidates.append(
            Contour.ellipse(mid, math.sqrt(2) * half[0] + margin,
                            math.sqrt(2) * half[1] + margin, nodes)
        )
    for groups in (_linkage_groups(eigs), _greedy_groups(eigs)):
        cycle = _cycle(eigs, groups, nodes)
        if cycle is not None:
            candidates.append(cycle[0] if len(cycle) == 1 else cycle)

    rates = [rate(c) for c in candidates]
    best = int(np.argmin(rates))
    if not rates[best] < 1.0:
        raise BranchCutIntersection("no admissible contour separates the spectrum from the cut")
    return candidates[best]


def log_with_certificate(a, contour=None, nodes=DEFAULT_NODES):
    """Principal logarithm together with its certificate and the contour used."""
    a = as_matrix(a)
    if contour is None:
        contour = auto_contour(a, nodes=nodes)
    value, cert = _dunford("log", a, contour)
    return value, cert, contour


def principal_log(a, contour=None, nodes=DEFAULT_NODES):
    """Principal branch ``Log a`` via the Dunford-Riesz integral."""
    return log_with_certificate(a, contour, nodes)[0]


def kappa_ladder():
    """0, 1, 2, 4, ..., 1024, then +-2i, +-4i, ..., +-1024i."""
    ladder = [0j] + [complex(2.0 ** k) for k in range(11)]
    for k in range(1, 11):
        ladder += [complex(0, 2.0 ** k), complex(0, -(2.0 ** k))]
    return ladder


def kappa_admissible(u, kappa, u_norm=None):
    u = as_matrix(u)
    if u_norm is None:
        u_norm = opnorm(u)
    clearance = cut_distance(eigenvalues(u) + kappa).min()
    return bool(clearance >= KAPPA_CLEARANCE * (1.0 + u_norm))


def choose_kappa(u, nodes=DEFAULT_NODES):
    """First ``kappa`` on the ladder whose shift ``u + kappa I`` keeps the
    spectrum at least ``0.1 (1 + ||u||)`` away from the cut.

    Returns ``(kappa, certificate)``.
    """
    u = as_matrix(u)
    u_norm = opnorm(u)
    eigs = eigenvalues(u)
    n = u.shape[0]
    for kappa in kappa_ladder():
        if cut_distance(eigs + kappa).min() >= KAPPA_CLEARANCE * (1.0 + u_norm):
            shifted = u + kappa * identity(n)
            contour = auto_contour(shifted, nodes=nodes)
            return kappa, validate_contour(shifted, contour, for_log=True)
    raise NoAdmissibleKappa("kappa ladder exhausted")
