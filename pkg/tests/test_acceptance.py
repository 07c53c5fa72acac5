"""Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.

Run on its own with ``python3 -m pytest tests/test_acceptance.py -s`` or as
part of the full suite; the summary lines are also printed at the end of the
pytest session.
"""
import time
from functools import lru_cache

import numpy as np
import pytest

from wco.calculus import compute_h
from wco.cli import main as cli_main
from wco.generators import generate_instance
from wco.operator import (
    L2Vector,
    WcOperator,
    adjoint_apply,
    h_n_recurrence,
    power_weight,
)
from wco.scenario import save_scenario
from wco.selftest import run_selftest
from wco.structure import injectivity_report, is_hyponormal, is_quasinormal
from wco.subnormality import (
    MAIN1_CONDITIONS,
    ProbabilityFamily,
    build_extension,
    certify_subnormal,
    intertwining_residual,
    lemma_cc_equivalences,
    main1_battery,
    moments_check,
    product_h,
    solve_cc,
    verify_cc,
)

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@lru_cache(maxsize=None)
def random_corpus() -> tuple:
    """1000 random instances, 1..12 atoms, mu in (0.1, 10), ~20% zero weights."""
    return tuple(generate_instance("random", 1 + i % 12, i).instance for i in range(1000))


@lru_cache(maxsize=None)
def quasinormal_corpus() -> tuple:
    return tuple(generate_instance("quasinormal", 1 + i % 12, 10_000 + i).instance for i in range(200))


def commutator_norm(a: np.ndarray) -> float:
    m = a.conj().T @ a
    return float(np.linalg.norm(a @ m - m @ a, 2))


def random_family(inst, rng) -> ProbabilityFamily:
    pool = np.concatenate([[0.0], compute_h(inst).values, rng.uniform(0, 4, 2)])
    measures = []
    for _ in range(inst.n):
        k = int(rng.integers(1, 3))
        p = rng.dirichlet(np.ones(k))
        p[-1] = 1 - p[:-1].sum()
        measures.append(list(zip(rng.choice(pool, k), p)))
    return ProbabilityFamily.from_measures(inst.space, measures, norm_tol=1e-9)


def test_criterion_01_polar_modulus_oracle():
    start = time.perf_counter()
    worst = 0.0
    for inst in random_corpus():
        a = WcOperator(inst).matrix
        vals, vecs = np.linalg.eigh(a.conj().T @ a)
        root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
        worst = max(worst, float(np.max(np.abs(root - np.diag(np.sqrt(compute_h(inst).values))))))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-9 and elapsed < 10.0,
           f"max |sqrt(A*A) - diag(h^1/2)| = {worst:.2e} (<= 1e-9), 1000 instances in {elapsed:.2f}s (< 10s)")


def test_criterion_02_adjoint_oracle():
    rng = np.random.default_rng(2)
    worst = 0.0
    for inst in random_corpus():
        op = WcOperator(inst)
        a = op.matrix
        for _ in range(5):
            f = L2Vector(op.space, rng.standard_normal(inst.n) + 1j * rng.standard_normal(inst.n))
            got = adjoint_apply(op, f, check=False).coords
            worst = max(worst, float(np.max(np.abs(got - a.conj().T @ f.coords))))
    record(2, worst <= 1e-10, f"max |C*f - A* coords(f)| = {worst:.2e} over 5000 vectors (<= 1e-10)")


def test_criterion_03_quasinormal_two_routes():
    disagreements, positives = 0, 0
    corpus = random_corpus() + quasinormal_corpus()
    for inst in corpus:
        op = WcOperator(inst)
        h_route = is_quasinormal(op, check=False).value
        positives += h_route
        disagreements += h_route != (commutator_norm(op.matrix) <= 1e-9)
    record(3, disagreements == 0,
           f"{disagreements} disagreements on 1000 random + 200 quasinormal instances "
           f"({positives} quasinormal), commutator threshold 1e-9")


def test_criterion_04_power_recurrence():
    worst_h, worst_m = 0.0, 0.0
    for inst in random_corpus():
        a = WcOperator(inst).matrix
        for n in range(7):
            p = power_weight(inst, n, check=False)
            direct = compute_h(p).values
            rec = h_n_recurrence(inst, n)
            scale = np.maximum(np.maximum(np.abs(direct), np.abs(rec)), 1e-300)
            worst_h = max(worst_h, float(np.max(np.abs(direct - rec) / scale)))
            an = np.linalg.matrix_power(a, n)
            bn = WcOperator(p).matrix
            worst_m = max(worst_m, float(np.max(np.abs(an - bn)) / max(1.0, np.max(np.abs(an)))))
    record(4, worst_h <= 1e-9 and worst_m <= 1e-9,
           f"h_n recurrence vs direct: max rel dev {worst_h:.2e}; A^n vs matrix(phi^n, w_n): {worst_m:.2e} (<= 1e-9, n <= 6)")


def test_criterion_05_cc_pipeline_on_quasinormal():
    fails = []
    worst = {"cc": 0.0, "H": 0.0, "ucu": 0.0}
    for k, inst in enumerate(quasinormal_corpus()):
        h = compute_h(inst).values
        fam = ProbabilityFamily.dirac(inst.space, h)
        cc = verify_cc(inst, fam)
        worst["cc"] = max(worst["cc"], cc.max_residual)
        battery = main1_battery(inst, fam).main1_battery
        ext = build_extension(inst, fam)
        expected = np.array([t if h[x] > 0 else 0.0 for x, t in ext.pairs])
        worst["H"] = max(worst["H"], float(np.max(np.abs(product_h(ext) - expected))))
        worst["ucu"] = max(worst["ucu"], intertwining_residual(ext))
        ok = (cc.satisfied and cc.max_residual <= 1e-10 and len(set(battery.values())) == 1
              and set(battery) == set(MAIN1_CONDITIONS) and is_quasinormal(ext.operator).value)
        if not ok:
            fails.append(k)
    ok = not fails and worst["H"] <= 1e-10 and worst["ucu"] <= 1e-10
    record(5, ok, f"200 quasinormal instances, {len(fails)} failures; max CC residual {worst['cc']:.2e}, "
                  f"max |H - chi t| {worst['H']:.2e}, max intertwining {worst['ucu']:.2e}")


def test_criterion_06_moments_on_certified():
    certified, worst, failed = 0, 0.0, 0
    corpus = random_corpus()[::5] + quasinormal_corpus() + tuple(
        generate_instance(kind, 1 + i % 12, i).instance
        for kind in ("multiplication", "cycle", "truncated-shift") for i in range(40))
    for inst in corpus:
        cert = certify_subnormal(inst)
        if not cert.certified:
            continue
        certified += 1
        rep = moments_check(inst, cert.family, 6, cc_tol=cert.cc.tolerance)
        worst = max(worst, rep.max_deviation)
        failed += not rep.passed
    record(6, failed == 0 and certified > 0,
           f"{certified} certified instances, {failed} moment failures, max rel deviation {worst:.2e} (<= 1e-9, n <= 6)")


def test_criterion_07_negative_control(tmp_path, capsys):
    sc = generate_instance("collapse", 2, 0)
    inst = sc.instance
    op = WcOperator(inst)
    hyp = is_hyponormal(op).value
    quasi = is_quasinormal(op).value
    inj = injectivity_report(op)
    rng = np.random.default_rng(7)
    grids = [[0.0], [9.0], [0.0, 9.0], [0, 1, 2, 3, 4, 5, 6, 9], [0, 0.5, 1, 2, 4.5, 9, 18, 81]]
    grids += [list(rng.uniform(0, 20, int(rng.integers(1, 9)))) for _ in range(40)]
    grids += [list(np.concatenate([[0.0, 9.0], rng.uniform(0, 20, int(rng.integers(0, 7)))])) for _ in range(40)]
    feasible = sum(solve_cc(inst, g).feasible for g in grids)
    path = tmp_path / "collapse.json"
    save_scenario(sc, path)
    code = cli_main(["certify", "--scenario", str(path), "--format", "json"])
    out = capsys.readouterr().out
    cites = "h = 0 on {w != 0}" in out
    ok = (not hyp and not quasi and not any(inj.conditions.values()) and inj.agree
          and feasible == 0 and code == 1 and cites)
    record(7, ok, f"hyponormal={hyp}, quasinormal={quasi}, injectivity conditions all false={not any(inj.conditions.values())}, "
                  f"feasible grids {feasible}/{len(grids)}, certify exit {code}, reason cites h=0 on support={cites}")


def test_criterion_08_multiplication_normality():
    bad = []
    worst = 0.0
    for i in range(100):
        inst = generate_instance("multiplication", 1 + i % 12, 500 + i).instance
        cert = certify_subnormal(inst)
        target = np.abs(inst.w) ** 2
        dirac = all(cert.family.measure(x) == [(pytest.approx(target[x], rel=1e-15), 1.0)] for x in range(inst.n))
        a = WcOperator(inst).matrix
        comm = float(np.linalg.norm(a.conj().T @ a - a @ a.conj().T, 2))
        worst = max(worst, comm)
        if not (cert.certified and cert.adjoint_certified and cert.normal and dirac and comm <= 1e-12):
            bad.append(i)
    record(8, not bad, f"100 diagonal instances, {len(bad)} failures; P = delta_|w|^2, M_w and its adjoint certified, "
                       f"normal flagged; max ||A*A - AA*|| = {worst:.2e} (<= 1e-12)")


def test_criterion_09_equivalence_classes():
    rng = np.random.default_rng(9)
    splits_inj, splits_cc, families = 0, 0, 0
    for inst in random_corpus() + quasinormal_corpus():
        op = WcOperator(inst)
        splits_inj += not injectivity_report(op, check=False).agree
        for fam in (random_family(inst, rng), ProbabilityFamily.dirac(inst.space, compute_h(inst).values)):
            families += 1
            splits_cc += len(set(lemma_cc_equivalences(inst, fam).values())) != 1
    record(9, splits_inj == 0 and splits_cc == 0,
           f"injectivity five-way splits {splits_inj}/1200, CC four-way splits {splits_cc}/{families}")


def test_criterion_10_solver_and_selftest():
    unsound, missed, returned = 0, 0, 0
    for inst in random_corpus()[::4]:
        sol = solve_cc(inst, np.concatenate([[0.0], compute_h(inst).values]))
        if sol.feasible:
            returned += 1
            unsound += not verify_cc(inst, sol.family, tol=1e-8).satisfied
    for inst in quasinormal_corpus():
        grid = np.concatenate([[0.0, 1.0], compute_h(inst).values])
        sol = solve_cc(inst, grid)
        missed += not sol.feasible
        if sol.feasible:
            returned += 1
            unsound += not verify_cc(inst, sol.family, tol=1e-8).satisfied
    start = time.perf_counter()
    summary = run_selftest(500)
    elapsed = time.perf_counter() - start
    ok = unsound == 0 and missed == 0 and summary["failed"] == 0 and elapsed < 60
    record(10, ok, f"{returned} returned families, {unsound} fail re-verification at 1e-8; "
                   f"{missed}/200 quasinormal instances reported infeasible; selftest 500 instances, "
                   f"{summary['failed']} failed checks, {elapsed:.1f}s (< 60s)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
