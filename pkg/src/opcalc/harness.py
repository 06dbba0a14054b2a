"""Scenario configs in, verification reports out.

A config is one JSON document: either a single scenario object or
``{"scenarios": [...]}``.  Generator matrices live in external files in the
text format of :mod:`opcalc.linalg`, resolved relative to the config file.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import json
import math
import os
from importlib import resources

import jsonschema
import numpy as np

from . import algebra, logrep
from .calculus import (
    DEFAULT_NODES,
    Contour,
    auto_contour,
    choose_kappa,
    principal_log,
    principal_log_scalar,
    with_nodes,
)
from .errors import ConfigInvalid, OpcalcError
from .evolution import Coefficient, EvolutionFamily, GeneratorSpec, closed_form, verify_semigroup
from .linalg import eig_oracle, identity, opnorm, read_matrix, write_matrix

CHECKS = (
    "eq4_chain", "eq5_commuting", "eq6_shifted_chain", "eq7_shifted_commuting",
    "thm1_axioms", "thm2_module", "wrap_detect",
    "roundtrip", "generator_recovery", "integral_repr", "semigroup",
)
CSV_COLUMNS = ("id", "check", "t", "r", "s", "kappa_re", "kappa_im", "K_norm", "N", "h",
               "residual", "threshold", "status", "diagnosis")
PROFILES = ("right-half-plane", "near-cut", "rotational")

_COMPLEX = {"oneOf": [
    {"type": "number"},
    {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
]}
_GENERATOR = {
    "type": "object",
    "required": ["dim", "terms", "T"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1, "maximum": 16},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "terms": {"type": "array", "items": {
            "type": "object",
            "required": ["coef", "matrix_file"],
            "properties": {
                "coef": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["const", "sin", "cos", "poly"]},
                        "c": {"anyOf": [_COMPLEX, {"type": "array", "items": _COMPLEX}]},
                    },
                },
                "matrix_file": {"type": "string"},
            },
        }},
    },
}
SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["id", "generator", "times", "checks"],
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "generator": _GENERATOR,
        "second_generator": _GENERATOR,
        "method": {"enum": ["closed_form", "rk4"]},
        "rk4_step": {"type": "number", "exclusiveMinimum": 0},
        "times": {"type": "array", "minItems": 1, "items": {
            "type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
        "kappa_policy": {"oneOf": [
            {"const": "auto"},
            {"type": "object", "required": ["fixed"], "properties": {"fixed": _COMPLEX},
             "additionalProperties": False},
        ]},
        "K_policy": {"oneOf": [
            {"const": "zero"},
            {"type": "object", "required": ["scalar"], "properties": {"scalar": _COMPLEX},
             "additionalProperties": False},
            {"type": "object", "required": ["poly"],
             "properties": {"poly": {"type": "array", "items": _COMPLEX, "minItems": 1}},
             "additionalProperties": False},
        ]},
        "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
        "quadrature_nodes": {"type": "integer", "minimum": 16},
        "fd_step": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "contour": {
            "type": "object",
            "required": ["kind", "center"],
            "properties": {
                "kind": {"enum": ["circle", "ellipse"]},
                "center": _COMPLEX,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "semi_axes": {"type": "array", "items": {"type": "number"}},
                "nodes": {"type": "integer", "minimum": 16},
            },
        },
    },
}


def _complex(v):
    return complex(*v) if isinstance(v, (list, tuple)) else complex(v)


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


@dataclass
class Scenario:
    id: str
    generator: GeneratorSpec
    times: list
    checks: list
    second_generator: GeneratorSpec = None
    method: str = "closed_form"
    rk4_step: float = None
    kappa: complex = None
    K_policy: tuple = ("zero", None)
    quadrature_nodes: int = DEFAULT_NODES
    fd_step: float = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    contour: Contour = None

    def family(self, second=False):
        spec = self.second_generator if second else self.generator
        return EvolutionFamily(spec, self.method, self.rk4_step,
                               name=f"{self.id}/{'U2' if second else 'U1'}")

    def shift_matrix(self):
        kind, value = self.K_policy
        n = self.generator.dim
        if kind == "zero":
            return np.zeros((n, n), dtype=np.complex128)
        if kind == "scalar":
            return value * identity(n)
        base = self.generator.matrices[0] if self.generator.terms else np.zeros((n, n))
        return algebra.polynomial_in(base, value)


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------

def _pointer(path):
    return "/" + "/".join(str(p) for p in path)


def _parse_generator(d, base_dir, where):
    terms = []
    for i, term in enumerate(d["terms"]):
        coef = term["coef"]
        kind = coef["kind"]
        if kind == "const":
            params = (_complex(coef.get("c", 1.0)),)
        elif kind == "poly":
            if "c" not in coef:
                raise ConfigInvalid("poly coefficient needs 'c'", f"{where}/terms/{i}/coef")
            raw = coef["c"]
            params = tuple(_complex(x) for x in (raw if isinstance(raw, list) else [raw]))
        else:
            params = ()
        path = os.path.join(base_dir, term["matrix_file"])
        m = read_matrix(path)
        if m.shape[0] != d["dim"]:
            raise ConfigInvalid(f"matrix has dimension {m.shape[0]}, expected {d['dim']}",
                                f"{where}/terms/{i}/matrix_file")
        terms.append((Coefficient(kind, params), m))
    return GeneratorSpec(d["dim"], terms, float(d["T"]))


def parse_scenario(d, base_dir=".", where=""):
    err = jsonschema.exceptions.best_match(
        jsonschema.Draft7Validator(SCENARIO_SCHEMA).iter_errors(d))
    if err is not None:
        path = list(err.absolute_path)
        if err.validator == "required" and isinstance(err.instance, dict):
            path += [k for k in err.validator_value if k not in err.instance][:1]
        raise ConfigInvalid(err.message, where + _pointer(path))
    gen = _parse_generator(d["generator"], base_dir, f"{where}/generator")
    second = None
    if "second_generator" in d:
        second = _parse_generator(d["second_generator"], base_dir, f"{where}/second_generator")
        if second.dim != gen.dim:
            raise ConfigInvalid("second_generator dimension differs", f"{where}/second_generator/dim")
    kp = d.get("kappa_policy", "auto")
    kappa = None if kp == "auto" else _complex(kp["fixed"])
    K = d.get("K_policy", "zero")
    if K == "zero":
        k_policy = ("zero", None)
    elif "scalar" in K:
        k_policy = ("scalar", _complex(K["scalar"]))
    else:
        k_policy = ("poly", tuple(_complex(c) for c in K["poly"]))
    for i, (t, r, s) in enumerate(d["times"]):
        if max(abs(t), abs(r), abs(s)) > gen.T:
            raise ConfigInvalid(f"time outside [-T, T] with T={gen.T}", f"{where}/times/{i}")
    contour = None
    if "contour" in d:
        try:
            c = dict(d["contour"])
            c["center"] = _pair(_complex(c["center"]))
            contour = Contour.from_dict(c)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigInvalid(str(exc), f"{where}/contour") from None
    return Scenario(
        id=d["id"],
        generator=gen,
        times=[tuple(float(x) for x in tr) for tr in d["times"]],
        checks=list(d["checks"]),
        second_generator=second,
        method=d.get("method", "closed_form"),
        rk4_step=d.get("rk4_step"),
        kappa=kappa,
        K_policy=k_policy,
        quadrature_nodes=d.get("quadrature_nodes", DEFAULT_NODES),
        fd_step=d.get("fd_step"),
        seed=d.get("seed", 0),
        tolerances=dict(d.get("tolerances", {})),
        contour=contour,
    )


def load_config(path):
    """Parse and validate a config file into a list of scenarios."""
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"not valid JSON: {exc}", "/") from None
    if isinstance(doc, dict) and "scenarios" in doc:
        if not isinstance(doc["scenarios"], list) or not doc["scenarios"]:
            raise ConfigInvalid("'scenarios' must be a non-empty array", "/scenarios")
        items = [(d, f"/scenarios/{i}") for i, d in enumerate(doc["scenarios"])]
    else:
        items = [(doc, "")]
    scenarios = [parse_scenario(d, base_dir, where) for d, where in items]
    ids = [s.id for s in scenarios]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ConfigInvalid(f"duplicate scenario id {dupes[0]!r}", "/scenarios")
    return scenarios


def bundled_config(name="rotation_wrap"):
    """Path of a config shipped with the package."""
    return str(resources.files("opcalc") / "scenarios" / f"{name}.json")


# --------------------------------------------------------------------------
# running checks
# --------------------------------------------------------------------------

@dataclass
class ReportRow:
    id: str
    check: str
    t: float = None
    r: float = None
    s: float = None
    kappa: complex = 0j
    K_norm: float = 0.0
    N: int = DEFAULT_NODES
    h: float = None
    residual: float = math.nan
    threshold: float = math.nan
    status: str = "pass"
    diagnosis: str = ""

    def as_csv(self):
        def num(x):
            return "" if x is None else repr(float(x))

        return [self.id, self.check, num(self.t), num(self.r), num(self.s),
                num(complex(self.kappa).real), num(complex(self.kappa).imag), num(self.K_norm),
                str(self.N), num(self.h), num(self.residual), num(self.threshold),
                self.status, self.diagnosis]


def _graded(row, strict_wrap=False):
    if row.status.startswith("skipped") or row.status == "wrap":
        if row.status == "wrap" and strict_wrap:
            row.status = "fail"
        return row
    ok = row.residual <= row.threshold
    row.status = "pass" if ok else "fail"
    return row


def _identity_row(base, result, tol, strict_wrap, wrapped):
    base.residual = result.residual
    base.threshold = tol * result.scale
    base.K_norm = result.K_norm
    if wrapped:
        base.diagnosis = result.diagnosis
        base.status = "wrap" if result.wrap_structure_ok else "fail"
        return _graded(base, strict_wrap)
    return _graded(base)


class _Runner:
    def __init__(self, sc, strict_wrap):
        self.sc = sc
        self.strict_wrap = strict_wrap
        self.nodes = sc.quadrature_nodes
        self.fam = sc.family()
        self.fam2 = sc.family(second=True) if sc.second_generator is not None else None
        self.h = sc.fd_step if sc.fd_step is not None else 1e-3 * sc.generator.T
        self.rows = []

    def tol(self, check, default):
        return float(self.sc.tolerances.get(check, default))

    def row(self, check, **kw):
        kw.setdefault("N", self.nodes)
        return ReportRow(self.sc.id, check, **kw)

    def kappa_for(self, u):
        if self.sc.kappa is not None:
            return self.sc.kappa
        return choose_kappa(u, nodes=self.nodes)[0]

    def guarded(self, row, fn):
        try:
            out = fn(row)
        except OpcalcError as exc:
            row.status = f"skipped({type(exc).__name__})"
            row.diagnosis = str(exc).replace("\n", " ")
            out = row
        self.rows.append(out)

    # each check appends rows -------------------------------------------

    def eq4_chain(self):
        tol = self.tol("eq4_chain", 1e-8)
        for t, r, s in self.sc.times:
            def go(row, t=t, r=r, s=s):
                res = algebra.sum_chain_identity(self.fam, t, r, s, self.nodes, check_wrap=False)
                return _identity_row(row, res, tol, self.strict_wrap, res.wrap.wrap_flag)
            self.guarded(self.row("eq4_chain", t=t, r=r, s=s), go)

    def eq5_commuting(self):
        tol = self.tol("eq5_commuting", 1e-8)
        for t, r, _ in self.sc.times:
            row = self.row("eq5_commuting", t=t, r=r)
            if self.fam2 is None:
                row.status = "skipped(no second_generator)"
                self.rows.append(row)
                continue

            def go(row, t=t, r=r):
                res = algebra.sum_commuting_identity(self.fam, self.fam2, t, r, self.nodes,
                                                     check_wrap=False)
                return _identity_row(row, res, tol, self.strict_wrap, res.wrap.wrap_flag)
            self.guarded(row, go)

    def eq6_shifted_chain(self):
        tol = self.tol("eq6_shifted_chain", 1e-8)
        K = self.sc.shift_matrix()
        for t, r, s in self.sc.times:
            def go(row, t=t, r=r, s=s):
                res = algebra.shifted_sum_identity(self.fam, (t, r, s), K, "chain",
                                                   self.nodes, check_wrap=False)
                return _identity_row(row, res, tol, self.strict_wrap, res.wrap.wrap_flag)
            self.guarded(self.row("eq6_shifted_chain", t=t, r=r, s=s, K_norm=opnorm(K)), go)

    def eq7_shifted_commuting(self):
        tol = self.tol("eq7_shifted_commuting", 1e-8)
        K = self.sc.shift_matrix()
        for t, r, _ in self.sc.times:
            row = self.row("eq7_shifted_commuting", t=t, r=r, K_norm=opnorm(K))
            if self.fam2 is None:
                row.status = "skipped(no second_generator)"
                self.rows.append(row)
                continue

            def go(row, t=t, r=r):
                res = algebra.shifted_sum_identity((self.fam, self.fam2), (t, r), K,
                                                   "commuting", self.nodes, check_wrap=False)
                return _identity_row(row, res, tol, self.strict_wrap, res.wrap.wrap_flag)
            self.guarded(row, go)

    def _scalars(self):
        rng = np.random.default_rng(self.sc.seed)
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        return [1.0, -2.5, 0j] + [complex(x) for x in z]

    def thm1_axioms(self):
        def go(_):
            sample = []
            for t, r, s in self.sc.times:
                for a, b in ((t, r), (r, s), (t, s)):
                    sample.append(algebra.log_element(self.fam, a, b, 1.0, self.nodes))
            rep = algebra.space_axioms_check(sample, self._scalars(), nodes=self.nodes)
            for sub, value, tol in (
                ("vector", rep.vector_residual, self.tol("thm1_axioms", 1e-12)),
                ("zero", rep.residuals["zero_element"], 1e-12),
                ("containment", rep.residuals.get("containment", 0.0), 1e-14),
            ):
                self.rows.append(_graded(self.row(f"thm1_axioms.{sub}", residual=value,
                                                  threshold=tol)))
            return None

        self._guard_block("thm1_axioms", go)

    def thm2_module(self):
        K = self.sc.shift_matrix()

        def go(_):
            sample = []
            for t, r, s in self.sc.times:
                for a, b in ((t, r), (r, s), (t, s)):
                    sample.append(algebra.shifted_log_element(self.fam, a, b, K, nodes=self.nodes))
            basis = algebra.commutant_basis(self.sc.generator.matrices or [np.zeros_like(K)])
            rep = algebra.space_axioms_check(sample, self._scalars(), algebra=basis.generators,
                                             nodes=self.nodes)
            comm = basis.max_commutator([e.core for e in sample])
            for sub, value, tol in (
                ("vector", rep.vector_residual, 1e-12),
                ("module", rep.module_residual, self.tol("thm2_module", 1e-10)),
                ("commutant", comm, 1e-10),
            ):
                self.rows.append(_graded(self.row(f"thm2_module.{sub}", residual=value,
                                                  threshold=tol, K_norm=opnorm(K))))
            return None

        self._guard_block("thm2_module", go)

    def _guard_block(self, check, fn):
        try:
            fn(None)
        except OpcalcError as exc:
            self.rows.append(self.row(check, status=f"skipped({type(exc).__name__})",
                                      diagnosis=str(exc).replace("\n", " ")))

    def wrap_detect(self):
        for t, r, s in self.sc.times:
            def go(row, t=t, r=r, s=s):
                rep = algebra.branch_wrap_detect([self.fam(t, r), self.fam(r, s)])
                row.residual = float(np.abs(rep.angle_sums).max())
                row.threshold = math.pi
                if rep.wrap_flag:
                    row.status = "wrap"
                    row.diagnosis = "windings " + " ".join(str(k) for k in sorted(rep.windings))
                return _graded(row, self.strict_wrap)
            self.guarded(self.row("wrap_detect", t=t, r=r, s=s), go)

    def _pairs(self):
        seen = []
        for t, r, s in self.sc.times:
            for p in ((t, r), (r, s), (t, s)):
                if p not in seen:
                    seen.append(p)
        return seen

    def roundtrip(self):
        tol = self.tol("roundtrip", 1e-9)
        for t, s in self._pairs():
            def go(row, t=t, s=s):
                u = self.fam(t, s)
                kappa = self.kappa_for(u)
                row.kappa = kappa
                contour = with_nodes(self.sc.contour, self.nodes) if self.sc.contour else None
                rep = logrep.compute_a(self.fam, t, s, kappa, contour, self.nodes)
                row.residual = opnorm(logrep.reconstruct_U(rep) - u)
                row.threshold = tol * (1 + abs(kappa)) * opnorm(u)
                return _graded(row)
            self.guarded(self.row("roundtrip", t=t, s=s), go)

    def generator_recovery(self):
        tol = self.tol("generator_recovery", 1e-5)
        T = self.sc.generator.T
        for t, _, s in self.sc.times:
            row = self.row("generator_recovery", t=t, s=s, h=self.h)
            if abs(t) + self.h > T:
                row.status = "skipped(stencil outside [-T, T])"
                self.rows.append(row)
                continue

            def go(row, t=t, s=s):
                kappa = self.kappa_for(self.fam(t, s))
                row.kappa = kappa
                a_rec = logrep.generator_from_logrep(self.fam, t, s, kappa, self.h, self.nodes)
                a_true = self.fam.generator(t)
                row.residual = opnorm(a_rec - a_true)
                # central-difference truncation grows like h^2 ||A||^3
                row.threshold = tol * max(1.0, opnorm(a_true)) ** 3
                return _graded(row)
            self.guarded(row, go)

    def integral_repr(self):
        tol = self.tol("integral_repr", 1e-6)
        for t, _, s in self.sc.times:
            def go(row, t=t, s=s):
                kappa = self.sc.kappa if self.sc.kappa is not None else 0j
                row.kappa = kappa
                chk = logrep.integral_representation_check(self.fam, t, s, kappa,
                                                           nodes=self.nodes)
                row.residual = chk.discrepancy
                row.threshold = tol
                if chk.wrap_flag:
                    lam = chk.defect_eigenvalues
                    k = np.rint(lam.imag / (2 * math.pi))
                    structured = np.all(np.abs(lam - 2j * math.pi * k) <= 1e-6)
                    row.status = "wrap" if structured else "fail"
                    row.diagnosis = ("defect eigenvalues ~ 2*pi*i*["
                                     + " ".join(str(x) for x in sorted(chk.windings)) + "]")
                return _graded(row, self.strict_wrap)
            self.guarded(self.row("integral_repr", t=t, s=s), go)

    def semigroup(self):
        tol = self.tol("semigroup", 1e-8)
        for t, r, s in self.sc.times:
            def go(row, t=t, r=r, s=s):
                row.residual = verify_semigroup(self.fam, [(t, r, s)])
                scale = max(opnorm(self.fam(t, s)), opnorm(self.fam(s, t)), 1.0)
                row.threshold = tol * scale
                return _graded(row)
            self.guarded(self.row("semigroup", t=t, r=r, s=s), go)


def run_scenario(sc, strict_wrap=False):
    """Run every listed check of one scenario; returns report rows."""
    runner = _Runner(sc, strict_wrap)
    for check in sc.checks:
        getattr(runner, check)()
    return runner.rows


def _run_one(args):
    sc, strict_wrap = args
    return run_scenario(sc, strict_wrap)


def run_scenarios(scenarios, workers=1, strict_wrap=False):
    """Rows of all scenarios, merged in (scenario id, check) order."""
    jobs = [(sc, strict_wrap) for sc in scenarios]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_one, jobs))
    else:
        parts = [_run_one(j) for j in jobs]
    rows = [row for part in parts for row in part]
    rows.sort(key=lambda row: (row.id, row.check))
    return rows


def report_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv())
    return buf.getvalue()


def summarize(rows):
    checks = {}
    for row in rows:
        entry = checks.setdefault(row.check, {"max_residual": None, "pass": 0, "fail": 0,
                                              "wrap": 0, "skipped": 0})
        key = "skipped" if row.status.startswith("skipped") else row.status
        entry[key] += 1
        if not math.isnan(row.residual) and key != "skipped":
            prev = entry["max_residual"]
            entry["max_residual"] = row.residual if prev is None else max(prev, row.residual)
    failed = sum(e["fail"] for e in checks.values())
    return {"rows": len(rows), "fail_rows": failed, "exit_code": 1 if failed else 0,
            "checks": checks}


def write_reports(rows, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_csv(rows))
    summary = summarize(rows)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def run_config(path, out_dir, workers=1, strict_wrap=False):
    """Load, run and write reports; returns the summary (``exit_code`` 0 or 1)."""
    scenarios = load_config(path)
    rows = run_scenarios(scenarios, workers, strict_wrap)
    return write_reports(rows, out_dir)


# --------------------------------------------------------------------------
# seeded ensembles
# --------------------------------------------------------------------------

def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def _spectrum(rng, n, profile):
    sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
    if profile == "right-half-plane":
        return rng.uniform(0.2, 1.0, n) + 1j * rng.uniform(-0.5, 0.5, n)
    if profile == "near-cut":
        return rng.uniform(0.2, 0.6, n) + 1j * sign * rng.uniform(2.2, 2.9, n)
    if profile == "rotational":
        return 1j * sign * rng.uniform(1.5, 3.0, n)
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")


def generate_ensemble(seed, count, dim, profile="right-half-plane", T=1.0):
    """Deterministic commuting scenarios.

    Returns ``(scenarios, matrices)``: scenario dicts in config form and a map
    from matrix file name to matrix.  Each scenario's generator is
    ``M1 + sin(t) M2`` with ``M1, M2`` sharing one random unitary eigenbasis;
    the second generator (used by eq5/eq7) shares it too.
    """
    if not 1 <= dim <= 16:
        raise ValueError("dim must be in [1, 16]")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    rng = np.random.default_rng(seed)
    scenarios, matrices = [], {}
    for i in range(count):
        sid = f"{profile}-s{seed}-{i:03d}"
        q = random_unitary(rng, dim)

        def conj(diag):
            return q @ np.diag(diag) @ q.conj().T

        m1 = conj(_spectrum(rng, dim, profile))
        m2 = conj(0.5 * _spectrum(rng, dim, profile))
        m3 = conj(_spectrum(rng, dim, profile))
        names = {f"{sid}_M1.mat": m1, f"{sid}_M2.mat": m2, f"{sid}_N1.mat": m3}
        matrices.update(names)
        times = np.round(rng.uniform(-0.9 * T, 0.9 * T, size=(3, 3)), 6).tolist()

        gen = {"dim": dim, "T": T, "terms": [
            {"coef": {"kind": "const", "c": [1.0, 0.0]}, "matrix_file": f"{sid}_M1.mat"},
            {"coef": {"kind": "sin"}, "matrix_file": f"{sid}_M2.mat"},
        ]}
        second = {"dim": dim, "T": T, "terms": [
            {"coef": {"kind": "const", "c": [1.0, 0.0]}, "matrix_file": f"{sid}_N1.mat"},
        ]}
        if i % 2 == 0:
            k_policy = {"scalar": [5.0, 0.0]}
        else:
            spec1 = GeneratorSpec(dim, [(Coefficient.const(1), m1), (Coefficient("sin"), m2)], T)
            spec2 = GeneratorSpec(dim, [(Coefficient.const(1), m3)], T)
            bound = 0.0
            for t, r, s in times:
                for a, b in ((t, r), (r, s), (t, s)):
                    bound = max(bound, opnorm(closed_form(spec1, a, b)),
                                opnorm(closed_form(spec2, a, b)))
            c1, c2 = 0.5, 0.25
            tail = opnorm(c1 * m1 + c2 * m1 @ m1)
            c0 = math.ceil(2.0 * (1.0 + bound) + tail + 1.0)
            k_policy = {"poly": [[float(c0), 0.0], [c1, 0.0], [c2, 0.0]]}
        scenarios.append({
            "id": sid,
            "generator": gen,
            "second_generator": second,
            "times": times,
            "kappa_policy": "auto",
            "K_policy": k_policy,
            "checks": list(CHECKS),
            "quadrature_nodes": DEFAULT_NODES,
            "fd_step": 1e-3 * T,
            "seed": int(seed) * 1000 + i,
            "tolerances": {},
        })
    return scenarios, matrices


def write_ensemble(out_dir, scenarios, matrices, name="ensemble.json"):
    os.makedirs(out_dir, exist_ok=True)
    for fname in sorted(matrices):
        write_matrix(os.path.join(out_dir, fname), matrices[fname])
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"scenarios": scenarios}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# --------------------------------------------------------------------------
# convergence studies
# --------------------------------------------------------------------------

@dataclass
class StudyReport:
    scenario: str
    sweep: str
    values: list
    residuals: list
    slope: float = None
    ratios: list = None

    def table(self):
        lines = [f"# {self.scenario} sweep={self.sweep}", f"{self.sweep},residual"]
        lines += [f"{v!r},{r!r}" for v, r in zip(self.values, self.residuals)]
        if self.sweep == "fd_step":
            lines.append("slope," + ("undefined" if self.slope is None else repr(self.slope)))
        else:
            lines.append("ratios," + " ".join(repr(x) for x in self.ratios))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {"scenario": self.scenario, "sweep": self.sweep, "values": self.values,
                "residuals": self.residuals, "slope": self.slope, "ratios": self.ratios}


def loglog_slope(xs, ys):
    """Least-squares slope of ``log y`` against ``log x``; None for fewer than
    two points."""
    if len(xs) < 2:
        return None
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def convergence_study(sc, sweep, values):
    """Residual table over quadrature node counts or finite-difference steps,
    evaluated at the scenario's first (t, s) pair."""
    values = list(values)
    steps = np.diff(values)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("sweep values must be strictly monotone")
    fam = sc.family()
    t, _, s = sc.times[0]
    residuals = []
    if sweep == "nodes":
        u = fam(t, s)
        kappa = sc.kappa if sc.kappa is not None else choose_kappa(u)[0]
        m = u + kappa * identity(fam.dim)
        oracle = eig_oracle(m).apply(principal_log_scalar)
        base = sc.contour if sc.contour is not None else auto_contour(m)
        for n_nodes in values:
            est = principal_log(m, with_nodes(base, int(n_nodes)))
            residuals.append(opnorm(est - oracle))
        ratios = [a / b if b > 0 else math.inf for a, b in zip(residuals, residuals[1:])]
        return StudyReport(sc.id, sweep, [int(v) for v in values], residuals, None, ratios)
    if sweep == "fd_step":
        kappa = sc.kappa if sc.kappa is not None else choose_kappa(fam(t, s))[0]
        exact = fam.generator(t)
        for h in values:
            a_rec = logrep.generator_from_logrep(fam, t, s, kappa, float(h), sc.quadrature_nodes)
            residuals.append(opnorm(a_rec - exact))
        return StudyReport(sc.id, sweep, [float(v) for v in values], residuals,
                           loglog_slope(values, residuals))
    raise ValueError(f"unknown sweep {sweep!r}")
