"""End-to-end acceptance checks; each prints one pass/fail line in the summary."""

import math
import tempfile

import numpy as np

from opcalc import algebra, harness
from opcalc.calculus import Contour, auto_contour, cut_distance, principal_log, validate_contour
from opcalc.evolution import Coefficient, EvolutionFamily, GeneratorSpec
from opcalc.linalg import eig_oracle, opnorm
from opcalc.logrep import compute_a, generator_from_logrep, integral_representation_check, reconstruct_U

import conftest
from conftest import with_spectrum


def report(number, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def ensemble(seed, count, dim, profile, checks):
    scenarios, matrices = harness.generate_ensemble(seed, count, dim, profile)
    scenarios = [dict(doc, checks=checks) for doc in scenarios]
    with tempfile.TemporaryDirectory() as tmp:
        return harness.load_config(harness.write_ensemble(tmp, scenarios, matrices))


def rows_for(scenarios, strict_wrap=False):
    rows = []
    for sc in scenarios:
        rows.extend(harness.run_scenario(sc, strict_wrap))
    return rows


def test_criterion_1_roundtrip():
    worst, pairs = 0.0, 0
    for sc in ensemble(101, 100, 3, "right-half-plane", ["roundtrip"]):
        fam = sc.family()
        for t, s in {(t, s) for t, r, s in sc.times} | {(t, r) for t, r, _ in sc.times}:
            u = fam(t, s)
            rep = compute_a(fam, t, s)
            bound = 1e-9 * (1 + abs(rep.kappa)) * opnorm(u)
            worst = max(worst, opnorm(reconstruct_U(rep) - u) / bound)
            pairs += 1
    report(1, worst <= 1.0, f"roundtrip worst residual/bound = {worst:.2e} over {pairs} pairs")


def test_criterion_2_generator_recovery():
    rng = np.random.default_rng(202)
    hs = [1e-2, 5e-3, 2.5e-3]
    slopes, worst_abs = [], 0.0
    for kind, kappa in (("const", 1.0), ("sin", 0.0), ("sin", 1.0)):
        for _ in range(4):
            lam = rng.uniform(-0.6, 0.6, 3) + 1j * rng.uniform(-0.6, 0.6, 3)
            m = with_spectrum(rng, lam)
            coef = Coefficient.const(1) if kind == "const" else Coefficient("sin")
            fam = EvolutionFamily(GeneratorSpec(3, ((coef, m),), T=1.0))
            t, s = 0.6, -0.3
            errs = [opnorm(generator_from_logrep(fam, t, s, kappa, h) - fam.generator(t))
                    for h in hs]
            slopes.append(harness.loglog_slope(hs, errs))
            err = opnorm(generator_from_logrep(fam, t, s, kappa, 1e-3 * fam.T) - fam.generator(t))
            worst_abs = max(worst_abs, err)
    ok = all(1.9 <= x <= 2.1 for x in slopes) and worst_abs < 1e-5
    report(2, ok, f"slopes in [{min(slopes):.3f}, {max(slopes):.3f}], "
                  f"max error at h=1e-3 T = {worst_abs:.2e}")


def test_criterion_3_sum_identities():
    rows = []
    for profile in harness.PROFILES:
        rows += rows_for(ensemble(303, 8, 4, profile, ["eq4_chain", "eq5_commuting"]))
    free = [r for r in rows if r.status != "wrap"]
    wrap_free_ok = all(r.status == "pass" and r.residual <= r.threshold for r in free)

    (sc,) = harness.load_config(harness.bundled_config("rotation_wrap"))
    fam = sc.family()
    targets = np.array([0, 2j * math.pi, -2j * math.pi])
    far, wraps = 0.0, 0
    for t, r, s in sc.times:
        res = algebra.sum_chain_identity(fam, t, r, s, sc.quadrature_nodes, check_wrap=False)
        if res.wrap.wrap_flag:
            wraps += 1
            for lam in res.defect_eigenvalues:
                far = max(far, float(np.min(np.abs(lam - targets))))
    ok = wrap_free_ok and wraps > 0 and far <= 1e-6
    worst = max(r.residual / r.threshold for r in free)
    report(3, ok, f"{len(free)} wrap-free rows, worst residual/threshold = {worst:.2e}; "
                  f"{wraps} rotation wraps, defect eigenvalues within {far:.1e} of {{0, +-2 pi i}}")


def test_criterion_4_shifted_identities():
    scenarios = ensemble(404, 50, 3, "right-half-plane", ["eq6_shifted_chain",
                                                          "eq7_shifted_commuting"])
    large_ok = True
    for sc in scenarios:
        if sc.K_policy[0] == "poly":
            fam, fam2 = sc.family(), sc.family(second=True)
            us = [f(a, b) for f in (fam, fam2) for t, r, s in sc.times
                  for a, b in ((t, r), (r, s), (t, s))]
            large_ok = large_ok and algebra.large_shift_ok(sc.shift_matrix(), us)
    rows = rows_for(scenarios)
    kinds = {sc.K_policy[0] for sc in scenarios}
    worst = max(r.residual for r in rows)
    ok = (large_ok and kinds == {"scalar", "poly"}
          and all(r.status == "pass" for r in rows) and worst <= 1e-8)
    report(4, ok, f"{len(rows)} rows with K = 5I and polynomial K, max residual = {worst:.2e}")


def test_criterion_5_axioms():
    scalars = [1.0, -2.5, 0.0, 0.3 + 1.7j, -1j]
    worst = {"vector": 0.0, "module": 0.0, "zero": 0.0, "containment": 0.0}
    for sc in ensemble(505, 4, 3, "right-half-plane", ["roundtrip"]):
        fam = sc.family()
        ks = [1.0, 2.0 - 0.5j]
        sample = [algebra.log_element(fam, a, b, k, sc.quadrature_nodes)
                  for (t, r, s), k in zip(sc.times, ks * 2) for a, b in ((t, r), (t, s))]
        rep = algebra.space_axioms_check(sample, scalars)
        K = sc.shift_matrix()
        shifted = [algebra.shifted_log_element(fam, a, b, K) for t, r, s in sc.times
                   for a, b in ((t, r), (r, s))]
        basis = algebra.commutant_basis(sc.generator.matrices, degree=2)
        mod = algebra.space_axioms_check(shifted, scalars, algebra=basis.generators)
        worst["vector"] = max(worst["vector"], rep.vector_residual, mod.vector_residual)
        worst["module"] = max(worst["module"], mod.module_residual)
        worst["zero"] = max(worst["zero"], rep.residuals["zero_element"])
        worst["containment"] = max(worst["containment"], rep.residuals["containment"])
    tols = {"vector": 1e-12, "module": 1e-10, "zero": 1e-12, "containment": 1e-14}
    ok = all(worst[k] <= tols[k] for k in tols)
    report(5, ok, ", ".join(f"{k} {worst[k]:.1e} <= {tols[k]:.0e}" for k in tols))


def _clear_spectrum(rng, n):
    out = []
    while len(out) < n:
        z = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        if cut_distance(z) >= 0.5 and all(abs(z - w) > 0.1 for w in out):
            out.append(z)
    return np.array(out)


def test_criterion_6_oracle_equivalence():
    rng = np.random.default_rng(606)
    worst, counts_ok = 0.0, True
    for _ in range(100):
        n = int(rng.integers(1, 9))
        lam = _clear_spectrum(rng, n)
        a = with_spectrum(rng, lam)
        ref = eig_oracle(a).apply(np.log)
        got = principal_log(a, nodes=256)
        worst = max(worst, opnorm(got - ref) / max(1.0, opnorm(ref)))
        counts_ok &= validate_contour(a, auto_contour(a, nodes=256)).enclosed_count == n
        # a circle around part of the spectrum, placed in the widest relative gap
        c = lam[0]
        dist = np.append(np.sort(np.abs(lam - c)), 2 * np.abs(lam - c).max() + 1)
        k = int(np.argmax(dist[1:] / np.maximum(dist[:-1], 0.05)))
        radius = 0.5 * (max(dist[k], 0.05) + dist[k + 1])
        circle = Contour.circle(c, radius, 256)
        counts_ok &= validate_contour(a, circle).enclosed_count == int(np.sum(circle.contains(lam)))
    report(6, worst <= 1e-10 and counts_ok,
           f"max relative Log error vs eig oracle = {worst:.2e} at N = 256; counts exact: {counts_ok}")


def test_criterion_7_quadrature_doubling():
    rng = np.random.default_rng(707)
    ratios, floor = [], 0.0
    for _ in range(60):
        n = int(rng.integers(2, 9))
        c = rng.uniform(1, 4)
        lam = c + 0.5 * c * np.exp(1j * rng.uniform(-math.pi, math.pi, n))
        a = with_spectrum(rng, lam)
        ref = eig_oracle(a).apply(np.log)
        e64, e128 = (opnorm(principal_log(a, Contour.circle(c, 0.75 * c, nodes)) - ref)
                     for nodes in (64, 128))
        ratios.append(e64 / max(e128, 1e-300))
        floor = max(floor, e128)
    worst = min(ratios)
    report(7, worst >= 10, f"64 -> 128 nodes reduces the Log error by at least {worst:.1e}x "
                           f"(128-node error <= {floor:.1e})")


def test_criterion_8_integral_caveat():
    worst = 0.0
    for sc in ensemble(808, 6, 3, "right-half-plane", ["roundtrip"]):
        fam = sc.family()
        for t, _, s in sc.times:
            chk = integral_representation_check(fam, t, s)
            assert not chk.wrap_flag
            worst = max(worst, chk.discrepancy)
    (sc,) = harness.load_config(harness.bundled_config("rotation_wrap"))
    rot = integral_representation_check(sc.family(), 1.0, -1.0)
    ok = worst <= 1e-6 and rot.wrap_flag and abs(rot.discrepancy - 2 * math.pi) < 1e-6
    report(8, ok, f"wrap-free discrepancy <= {worst:.1e}; rotation discrepancy "
                  f"{rot.discrepancy:.9f} (2 pi = {2 * math.pi:.9f}), wrap_flag={rot.wrap_flag}")


def test_criterion_9_determinism(tmp_path):
    scenarios, matrices = [], {}
    for profile in harness.PROFILES:
        s, m = harness.generate_ensemble(909, 1, 3, profile)
        scenarios += s
        matrices.update(m)
    config = harness.write_ensemble(tmp_path / "cfg", scenarios, matrices)
    runs = [("a", 1), ("b", 1), ("c", 2)]
    for name, workers in runs:
        harness.run_config(config, tmp_path / name, workers)
    blobs = [(tmp_path / name / "report.csv").read_bytes() for name, _ in runs]
    ok = blobs[0] == blobs[1] == blobs[2]
    report(9, ok, f"report.csv byte-identical across repeat and workers=2 runs "
                  f"({len(blobs[0])} bytes)")
