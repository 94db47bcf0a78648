"""Bundled verification suite.

Each check below pins one acceptance property of the library at a fixed
size, tolerance and seed.  ``run_suite`` executes all of them, returns a
machine-readable result and (optionally) writes it as canonical JSON.
The checks are deliberately self-contained so the same functions back
both the ``suite`` CLI subcommand and the acceptance test module.
"""

from __future__ import annotations

import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._jsonutil import canonical_dumps, dump_json
from .calculus import compare_symbols, cv_bound_check, extract_symbol
from .core import make_grid
from .operator import FIOSpec, apply, assemble, compose_ffstar
from .oscillatory import CutoffSpec, IBPSpec, cutoff_independence_test, \
    osc_integral
from .phase import QuadraticPhase, check_separation, validate_G, \
    validate_H_via_lemma
from .presets import amplitude_preset, bundled_test_fields, phase_preset
from .spectral import rank_truncation_curve, spectrum

DEFAULT_SEED = 1234
RUNTIME_BUDGET_S = 600.0

_GRID_L = 12.0
_GRID_N = 512


def _grid(n=_GRID_N, L=_GRID_L):
    return make_grid(1, L, n)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: dict
    expected: str
    tolerance: str
    runtime_s: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name} ({self.runtime_s:.1f}s)"


def _rel_l2(a, b):
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)
                         / np.sum(np.abs(b) ** 2)))


def check_identity_reproduction(seed=DEFAULT_SEED) -> CheckResult:
    """F_h with S = x.theta, a = 1 reproduces band-limited inputs."""
    t0 = time.time()
    grid = _grid()
    ident = phase_preset("identity")
    one = amplitude_preset("one")
    fields = bundled_test_fields(grid)
    errs = {}
    for h in (1.0, 0.5, 0.1):
        M = assemble(FIOSpec(ident, one, h), grid, grid)
        for i, f in enumerate(fields):
            out = apply(M, f)
            errs[f"h={h}/field{i}"] = _rel_l2(out.values, f.values)
    worst = max(errs.values())
    return CheckResult(
        "identity-reproduction", worst <= 1e-3,
        {"worst_rel_l2": worst, "errors": errs},
        "relative L2 error <= 1e-3 for 3 bundled fields, h in {1,0.5,0.1}",
        "1e-3", time.time() - t0)


def check_chirp_identity(seed=DEFAULT_SEED) -> CheckResult:
    """S = x.theta + x^2/2 acts as multiplication by the unit chirp."""
    t0 = time.time()
    grid = _grid()
    chirp = phase_preset("chirp")
    one = amplitude_preset("one")
    fields = bundled_test_fields(grid)
    x = grid.axis
    errs = {}
    for h in (1.0, 0.5, 0.1):
        M = assemble(FIOSpec(chirp, one, h), grid, grid)
        factor = np.exp(1j * x ** 2 / (2.0 * h))
        for i, f in enumerate(fields):
            out = apply(M, f)
            errs[f"h={h}/field{i}"] = _rel_l2(out.values, factor * f.values)
    worst = max(errs.values())
    return CheckResult(
        "chirp-identity", worst <= 1e-3,
        {"worst_rel_l2": worst},
        "pointwise match to e^{ix^2/(2h)} phi within 1e-3 relative L2",
        "1e-3", time.time() - t0)


def check_fresnel_unitarity(seed=DEFAULT_SEED) -> CheckResult:
    """Free-propagator phase: interior singular values sit at 1."""
    t0 = time.time()
    grid = _grid()
    fres = phase_preset("fresnel")
    one = amplitude_preset("one")
    measured = {}
    ok = True
    for h in (0.5, 0.25):
        rep = spectrum(assemble(FIOSpec(fres, one, h), grid, grid))
        s = rep.singular_values
        plateau = int(np.sum(s >= 0.5 * s[0]))
        interior = s[:max(1, int(0.8 * plateau))]
        measured[f"h={h}"] = {"s_min": float(interior.min()),
                              "s_max": float(interior.max()),
                              "plateau_count": plateau,
                              "verdict": rep.verdict}
        ok = ok and 0.99 <= interior.min() and interior.max() <= 1.01
    return CheckResult(
        "fresnel-unitarity", ok, measured,
        "interior singular values in [0.99, 1.01] for h in {0.5, 0.25}",
        "[0.99, 1.01]", time.time() - t0)


def _symbol_runs(h_list, theta_target=10.0 / 3.0, L=_GRID_L):
    runs = []
    for h in h_list:
        spacing = 0.5 * h / theta_target
        n = int(np.ceil(2 * L / spacing)) + 1
        runs.append((h, make_grid(1, L, n)))
    return runs


def check_symbol_identity(seed=DEFAULT_SEED, det_bias=1.0) -> CheckResult:
    """Extracted vs predicted symbol for a = lam^-1, S = x.theta:
    O(h) error decay with slope >= 0.8 and small error at h = 0.1."""
    t0 = time.time()
    ident = phase_preset("identity")
    lam1 = amplitude_preset("lambda_m", m=-1.0)
    rep = compare_symbols(ident, lam1, _symbol_runs((0.4, 0.2, 0.1)),
                          det_bias=det_bias)
    err_at_01 = rep.errors[-1]
    ok = bool(rep.passed and err_at_01 <= 5e-2
              and all(np.diff(rep.errors) < 0))
    return CheckResult(
        "symbol-identity", ok,
        {"errors": rep.errors, "slope": rep.slope,
         "trusted": rep.trusted_box},
        "errors decreasing over h in {0.4,0.2,0.1}, slope >= 0.8, "
        "error(h=0.1) <= 5e-2",
        "slope >= 0.8; 5e-2", time.time() - t0)


def check_determinant_factor(seed=DEFAULT_SEED,
                             det_convention: str = "inverse") -> CheckResult:
    """S = 2x.theta vs S = x.theta: extracted symbols differ by the
    mixed-Hessian determinant factor 1/2; the extracted scaled symbol
    also matches its predicted value (the hook ``det_convention`` flips
    the predicted determinant power for fault injection)."""
    t0 = time.time()
    h = 0.1
    grid = _grid()
    one = amplitude_preset("one")
    c1 = compose_ffstar(FIOSpec(phase_preset("identity"), one, h),
                        grid, grid, route="direct")
    c2 = compose_ffstar(FIOSpec(phase_preset("scaled", factor=2.0), one, h),
                        grid, grid, route="direct")
    e1 = extract_symbol(c1, h)
    e2 = extract_symbol(c2, h)
    xi_lim = 0.6 * min(c1.metadata["theta_grid"]["half_width"],
                       2 * c2.metadata["theta_grid"]["half_width"])
    xm = np.abs(e1.x_nodes) <= 0.6 * grid.half_width
    m = np.abs(e1.xi_nodes) <= xi_lim
    ratio = (e2.values[np.ix_(xm, m)].real
             / e1.values[np.ix_(xm, m)].real)
    power = -1.0 if det_convention == "inverse" else 1.0
    predicted = 2.0 ** power / 1.0
    pred_dev = float(np.max(np.abs(e2.values[np.ix_(xm, m)].real
                                   - predicted)))
    ok = bool(0.475 <= ratio.min() and ratio.max() <= 0.525
              and pred_dev <= 0.05)
    return CheckResult(
        "determinant-factor", ok,
        {"ratio_min": float(ratio.min()), "ratio_max": float(ratio.max()),
         "predicted_scaled_symbol": predicted,
         "max_deviation_from_predicted": pred_dev},
        "extracted symbols differ by 1/2 within 5% at h=0.1 and match "
        "the predicted determinant factor",
        "0.5 +- 5%", time.time() - t0)


def check_uniform_boundedness(seed=DEFAULT_SEED) -> CheckResult:
    """Operator norms across h stay below (gamma Q_k)^(1/2); the
    symbol-sup-1 amplitude also stays below 1.05."""
    t0 = time.time()
    grid = _grid()
    ident = phase_preset("identity")
    measured = {}
    ok = True
    for m in (0.0, -1.0):
        amp = amplitude_preset("one") if m == 0.0 \
            else amplitude_preset("lambda_m", m=m)
        res = cv_bound_check(ident, amp, [1.0, 0.5, 0.1], grid, grid)
        measured[f"m={m}"] = {"norms": res.norms, "bound": res.bound,
                              "Q": res.seminorm, "gamma": res.gamma,
                              "k": res.k}
        ok = ok and res.passed
        if m == -1.0:
            ok = ok and max(res.norms.values()) <= 1.05
    return CheckResult(
        "uniform-boundedness", ok, measured,
        "max_h |F_h| <= (gamma Q_k)^(1/2) for m in {0,-1}; "
        "|F_h| <= 1.05 for m=-1",
        "(gamma*Q)^0.5; 1.05", time.time() - t0)


def check_compactness_evidence(seed=DEFAULT_SEED) -> CheckResult:
    """a = lam^-1: decaying spectrum stable under refinement, monotone
    rank-truncation curve; a = 1 contrast stays flat."""
    t0 = time.time()
    h = 0.5
    grid = _grid()
    ident = phase_preset("identity")
    lam1 = amplitude_preset("lambda_m", m=-1.0)
    M = assemble(FIOSpec(ident, lam1, h), grid, grid)
    rep = spectrum(M)
    s = rep.singular_values
    strictly_dec = bool(np.all(np.diff(s[:100]) < 0))
    ratio50 = float(s[49] / s[0])

    # Refinement at the same continuum operator: theta box pinned.
    tmeta = M.metadata["theta_grid"]
    tg = make_grid(tmeta["dim"], tmeta["half_width"],
                   tmeta["points_per_axis"])
    M2 = assemble(FIOSpec(ident, lam1, h, theta_grid=tg),
                  make_grid(1, _GRID_L, 2 * _GRID_N),
                  make_grid(1, _GRID_L, 2 * _GRID_N))
    rep2 = spectrum(M2)
    exp_change = abs(rep2.decay_exponent - rep.decay_exponent) \
        / abs(rep.decay_exponent)

    curve = rank_truncation_curve(M, list(range(0, 200, 10)))
    vals = [v for _, v in curve["curve"]]
    monotone = all(vals[i + 1] <= vals[i] + 1e-15
                   for i in range(len(vals) - 1))
    to_zero = vals[-1] <= 1e-6 * s[0]

    contrast = spectrum(assemble(FIOSpec(ident, amplitude_preset("one"), h),
                                 grid, grid))
    ok = bool(strictly_dec and ratio50 <= 0.2 and s[0] <= 1.05
              and exp_change <= 0.10 and monotone and to_zero
              and rep.verdict == "compact-evidence"
              and contrast.verdict == "noncompact-evidence")
    return CheckResult(
        "compactness-evidence", ok,
        {"s1": float(s[0]), "s50_over_s1": ratio50,
         "strictly_decreasing": strictly_dec,
         "decay_exponent": rep.decay_exponent,
         "exponent_change_on_doubling": float(exp_change),
         "rank_curve_monotone_to_zero": bool(monotone and to_zero),
         "verdict": rep.verdict, "contrast_verdict": contrast.verdict},
        "strict decay, s50/s1 <= 0.2, exponent stable within 10% under "
        "grid doubling, rank curve monotone to 0; a=1 contrast flat",
        "0.2; 10%", time.time() - t0)


def check_cutoff_independence(seed=DEFAULT_SEED) -> CheckResult:
    """Gaussian vs cosine-bump cutoffs agree on the three oracles."""
    t0 = time.time()
    cut = CutoffSpec(k_max=14)
    measured = {}
    ok = True

    # Oracle 1: linear phase, Gaussian amplitude.
    g1 = make_grid(1, 24.0, 4001)
    r1 = cutoff_independence_test(
        lambda t: 2.0 * t[..., 0], lambda t: np.exp(-t[..., 0] ** 2),
        1.0, g1, cut)
    target1 = np.sqrt(np.pi) * np.exp(-1.0)
    measured["gaussian-linear"] = {
        "status": r1.status, "discrepancy": r1.discrepancy,
        "error_vs_analytic": abs(r1.value_a - target1)}
    ok = ok and r1.status == "pass" and \
        r1.discrepancy <= 1e-6 * (1 + abs(r1.value_a))

    # Oracle 2: quadratic phase, unit amplitude (needs the IBP rewrite).
    g2 = make_grid(1, 24.0, 12001)
    h = 0.5
    r2 = cutoff_independence_test(
        lambda t: t[..., 0] ** 2 / 2.0,
        lambda t: np.ones(t.shape[:-1]), h, g2, cut,
        IBPSpec(enabled=True, q=2), phase_grad=lambda t: t)
    target2 = np.sqrt(2 * np.pi * h) * np.exp(1j * np.pi / 4)
    measured["fresnel"] = {
        "status": r2.status, "discrepancy": r2.discrepancy,
        "error_vs_analytic": abs(r2.value_a - target2)}
    ok = ok and r2.status == "pass" and \
        r2.discrepancy <= 1e-6 * (1 + abs(r2.value_a))

    # Oracle 3: zero amplitude.
    r3 = cutoff_independence_test(
        lambda t: t[..., 0], lambda t: np.zeros(t.shape[:-1]), 1.0, g1, cut)
    measured["zero"] = {"status": r3.status, "discrepancy": r3.discrepancy}
    ok = ok and r3.status == "pass" and r3.discrepancy == 0.0
    return CheckResult(
        "cutoff-independence", bool(ok), measured,
        "gaussian and cosine-bump cutoffs agree to <= 1e-6 relative on "
        "the three oscillatory-integral oracles",
        "1e-6 relative", time.time() - t0)


def check_hypothesis_validation(seed=DEFAULT_SEED) -> CheckResult:
    """Quadratic family: invertible B passes (G1)-(G3) and the lemma
    route; B = 0 fails (G3) with a witness; separation constants exact
    for linear phases."""
    t0 = time.time()
    measured = {}
    qp = QuadraticPhase([[0.3]], [[1.2]], [[-0.4]]).to_phase_spec("quad")
    g_rep = validate_G(qp, k=3, seed=seed)
    h_rep = validate_H_via_lemma(qp, seed=seed)
    measured["quadratic"] = {
        "G_passed": g_rep.passed, "H_passed": h_rep.passed,
        "delta0_est": g_rep.result("G3").constant}
    ok = g_rep.passed and h_rep.passed
    ok = ok and abs(g_rep.result("G3").constant - 1.2) <= 1e-10

    b0 = QuadraticPhase([[1.0]], [[0.0]], [[0.0]]).to_phase_spec("B0")
    rep0 = validate_G(b0, seed=seed)
    g3 = rep0.result("G3")
    measured["B0"] = {"G3_verdict": g3.verdict, "delta0_est": g3.constant,
                      "witness": g3.witness}
    ok = ok and (not g3.verdict) and g3.constant == 0.0 \
        and g3.witness is not None

    c2_cases = {
        "identity": (phase_preset("identity"), 1.0),
        "scaled2": (phase_preset("scaled", factor=2.0), 0.5),
        "fresnel": (phase_preset("fresnel"), 1.0),
    }
    for name, (ph, expect) in c2_cases.items():
        c2 = check_separation(ph, seed=seed)["C2"]
        measured[f"C2/{name}"] = c2
        ok = ok and abs(c2 - expect) <= 1e-6
    return CheckResult(
        "hypothesis-validation", bool(ok), measured,
        "quadratic family with invertible B passes (G1)-(G3) and the "
        "lemma route; B=0 fails (G3) with witness; C2 exact to 1e-6",
        "1e-6 on C2", time.time() - t0)


def _determinism_probe(seed: int) -> str:
    """Cheap seeded sub-pipeline serialized canonically (byte-compared
    across repeated runs)."""
    qp = QuadraticPhase([[0.0]], [[1.0]], [[0.0]]).to_phase_spec("probe")
    rep = validate_G(qp, k=2, seed=seed)
    sep = check_separation(qp, samples=2000, seed=seed)
    grid = make_grid(1, 8.0, 96)
    M = assemble(FIOSpec(qp, amplitude_preset("lambda_m", m=-1.0), 0.5),
                 grid, grid)
    s = spectrum(M).singular_values[:8]
    return canonical_dumps({
        "validation": rep.to_jsonable(), "C2": sep["C2"],
        "singular_values": [f"{v:.17g}" for v in s]})


def check_determinism_and_runtime(seed=DEFAULT_SEED,
                                  elapsed_before: float = 0.0) -> CheckResult:
    """Re-run a seeded sub-pipeline and byte-compare its canonical
    serialization; fold in the runtime budget for the whole suite."""
    t0 = time.time()
    a = _determinism_probe(seed)
    b = _determinism_probe(seed)
    deterministic = a == b
    runtime_total = elapsed_before + (time.time() - t0)
    ok = bool(deterministic and runtime_total <= RUNTIME_BUDGET_S)
    return CheckResult(
        "determinism-and-runtime", ok,
        {"probe_bytes_equal": deterministic,
         "suite_runtime_s": runtime_total},
        "identical seeded reruns byte-identical; full suite within the "
        "runtime budget",
        f"{RUNTIME_BUDGET_S:.0f}s", time.time() - t0)


_CHECKS = (
    check_identity_reproduction,
    check_chirp_identity,
    check_fresnel_unitarity,
    check_symbol_identity,
    check_determinant_factor,
    check_uniform_boundedness,
    check_compactness_evidence,
    check_cutoff_independence,
    check_hypothesis_validation,
)


@dataclass(frozen=True)
class SuiteResult:
    checks: tuple
    overall: bool
    environment: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "checks": [{"name": c.name, "passed": c.passed,
                        "measured": c.measured, "expected": c.expected,
                        "tolerance": c.tolerance,
                        "runtime_s": round(c.runtime_s, 3)}
                       for c in self.checks],
            "overall": self.overall,
            "environment": self.environment,
        }

    def to_json(self) -> str:
        return canonical_dumps(self.to_jsonable())


def run_suite(seed: int = DEFAULT_SEED, out_path: str | None = None,
              echo=print, det_convention: str = "inverse") -> SuiteResult:
    """Run every acceptance check once, in order, collecting failures
    instead of aborting.  ``det_convention`` is a fault-injection hook
    ("direct" flips the determinant power in the predicted symbol and
    must make the determinant-factor check fail)."""
    t_start = time.time()
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for fn in _CHECKS:
            if fn is check_determinant_factor:
                res = fn(seed=seed, det_convention=det_convention)
            else:
                res = fn(seed=seed)
            results.append(res)
            if echo:
                echo(res.line())
        res = check_determinism_and_runtime(
            seed=seed, elapsed_before=time.time() - t_start)
        results.append(res)
        if echo:
            echo(res.line())
    overall = all(r.passed for r in results)
    env = {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "seed": seed,
        "det_convention": det_convention,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "total_runtime_s": round(time.time() - t_start, 3),
        "cpu_count": os.cpu_count(),
    }
    suite = SuiteResult(tuple(results), overall, env)
    if out_path:
        dump_json(suite.to_jsonable(), out_path)
    return suite
