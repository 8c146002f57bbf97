"""Acceptance checks 1-12 at their stated tolerances.

Each test prints a ``CRITERION n PASS|FAIL`` line (visible under ``pytest -v``
and when the file is run as a script) before asserting.
"""
import json
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import lambertw

from systems import ROOT, area_grid, exhaustive_oracle, random_grid, reference

from modalwadc.delay import delayed_spectrum, track_modes
from modalwadc.errors import NoFeasibleDesign
from modalwadc.estimation import (CovarianceBlocks, estimate_jacobian, estimate_model,
                                  lyapunov_solve)
from modalwadc.grid import build_state_matrices
from modalwadc.modal import generator_participation, modal_decomposition, mode_metrics
from modalwadc.reports import mode_comparison
from modalwadc.simulation import emulate_pmu, simulate_linear
from modalwadc.wadc import (control_matrix, first_order_eigenvalues,
                            gain_matrix, predicted_shift, select_generators, track_eigenvalues,
                            verify_design)

SEEDS = range(20)
SIGMA_D = 2.5          # the shipped scenario's damping coefficient
SCENARIOS = ROOT / "scenarios"


def report(n, passed, detail, capsys):
    with capsys.disabled():
        print(f"\nCRITERION {n:2d} {'PASS' if passed else 'FAIL'}: {detail}")


@pytest.fixture(scope="module")
def ref():
    model, lin = reference()
    return model, lin, modal_decomposition(lin.A)


@pytest.fixture(scope="module")
def estimates(ref):
    """Twenty independent 180 s / 60 Hz identifications of the reference grid."""
    model, lin, _ = ref
    t = time.perf_counter()
    out = []
    for seed in SEEDS:
        sim_seed, pmu_seed = np.random.SeedSequence(seed).spawn(2)
        traj = simulate_linear(lin, 180.0, 1e-3, sim_seed)
        data = emulate_pmu(traj, 60.0, 1e-3, 1e-6, seed=pmu_seed)
        est = estimate_model(data, model.M, model.D)
        out.append((est, modal_decomposition(est.A_P)))
    return out, time.perf_counter() - t


@pytest.fixture(scope="module")
def designs(estimates):
    out = []
    for est, sol in estimates[0]:
        try:
            des = select_generators(est.A_P, sol, sol.critical(), sigma_d=SIGMA_D)
        except NoFeasibleDesign as exc:
            des = exc.best
        out.append(des)
    return out


def test_criterion_01_exact_identity(capsys):
    rng = np.random.default_rng(1)
    t = time.perf_counter()
    errs = []
    for n in (2, 4, 8):
        model, delta = random_grid(n, rng, infinite_bus=True)
        lin = build_state_matrices(model, delta)
        C = lyapunov_solve(lin.A, lin.B)
        J = estimate_jacobian(model.M, model.D, CovarianceBlocks.from_full(C))
        errs.append(np.linalg.norm(J - lin.J_true) / np.linalg.norm(lin.J_true))
    elapsed = time.perf_counter() - t
    ok = max(errs) <= 1e-9 and elapsed < 1.0
    report(1, ok, f"max rel error {max(errs):.2e} (<= 1e-9), {elapsed:.3f} s (< 1 s)", capsys)
    assert ok


def test_criterion_02_lyapunov_residual(capsys):
    rng = np.random.default_rng(2)
    worst, worst_cross = 0.0, 0.0
    for size in np.linspace(2, 32, 20).astype(int):
        A = rng.standard_normal((size, size))
        A -= (np.linalg.eigvals(A).real.max() + rng.uniform(0.1, 1.0)) * np.eye(size)
        B = rng.standard_normal((size, rng.integers(1, size + 1)))
        Q = B @ B.T
        C = lyapunov_solve(A, B)
        worst = max(worst, np.linalg.norm(A @ C + C @ A.T + Q) / np.linalg.norm(Q))
        C2 = lyapunov_solve(A, B, method="schur")
        worst_cross = max(worst_cross, np.linalg.norm(C - C2) / np.linalg.norm(C))
    ok = worst <= 1e-10
    report(2, ok, f"worst relative residual {worst:.2e} (<= 1e-10) over 20 systems up to 32; "
                  f"Kronecker vs Bartels-Stewart {worst_cross:.1e}", capsys)
    assert ok


def test_criterion_03_statistical_estimation(ref, estimates, capsys):
    _, _, true = ref
    runs, elapsed = estimates
    f_err, z_err = [], []
    for _, sol in runs:
        rows = mode_comparison(true, sol)
        f_err.append([r["f_err_pct"] for r in rows])
        z_err.append([r["zeta_err_pct"] for r in rows])
    f_med = np.median(np.array(f_err), axis=0)
    z_med = np.median(np.array(z_err), axis=0)
    ok = f_med.max() <= 10 and z_med.max() <= 25 and elapsed < 120
    report(3, ok, f"median f error per mode {np.round(f_med, 2).tolist()} % (<= 10), "
                  f"median zeta error {np.round(z_med, 2).tolist()} % (<= 25), {elapsed:.1f} s", capsys)
    assert ok


def test_criterion_04_closed_loop_goal(ref, designs, capsys):
    _, lin, true = ref
    crit = true.critical()
    passes = sum(verify_design(lin.A, d, true, crit)["passed"] for d in designs)
    ok = passes >= 18
    report(4, ok, f"{passes}/20 seeds meet zeta >= 0.10 and t_S <= 10 s on eig(A_true + BcK)", capsys)
    assert ok


def test_criterion_05_minimality(estimates, designs, capsys):
    mismatch, smaller_outside = [], []
    for seed, ((est, sol), des) in enumerate(zip(estimates[0], designs)):
        found = exhaustive_oracle(est.A_P, SIGMA_D)
        oracle = found[0] if found else None
        got = des.n_m if des.passed else None
        if oracle != got:
            mismatch.append((seed, got, oracle))
        wide = exhaustive_oracle(est.A_P, SIGMA_D, unrestricted=True)
        if wide and (oracle is None or wide[0] < oracle):
            smaller_outside.append((seed, wide[0]))
    ok = not mismatch
    report(5, ok, f"selected n_m equals the exhaustive minimum on {20 - len(mismatch)}/20 seeds"
                  + (f"; mismatches (seed, got, oracle) {mismatch}" if mismatch else "")
                  + f"; a search over all generators finds a smaller set on {len(smaller_outside)}/20"
                  + (f" {smaller_outside}" if smaller_outside else ""), capsys)
    assert ok


def test_criterion_06_decoupling_orders(ref, capsys):
    _, lin, sol = ref
    crit = sol.critical()
    Bc = control_matrix((3, 4, 5), sol.m)
    crit_cols = {c for k in crit for c in (sol.modes[k].plus, sol.modes[k].minus)}
    non = [k for k in range(len(sol.modes)) if k not in crit]
    literal = all(predicted_shift(sol, k, Bc, crit, 2.0) == sol.modes[k].lam for k in non)
    shifts, pred_err = [], []
    for s in (0.25, 0.5, 1.0):
        dA = Bc @ gain_matrix(Bc, sol, crit, s)
        tracked = track_eigenvalues(first_order_eigenvalues(sol, dA), np.linalg.eigvals(lin.A + dA))
        shifts.append(max(abs(tracked[i] - sol.eigvals[i])
                          for i in range(len(tracked)) if i not in crit_cols))
        pred = [predicted_shift(sol, k, Bc, crit, s) for k in crit]
        got = [tracked[sol.modes[k].plus] for k in crit]
        pred_err.append(max(abs(a - b) for a, b in zip(got, pred)))
    ratios = [shifts[1] / shifts[0], shifts[2] / shifts[1]] if min(shifts) > 0 else [np.inf, np.inf]
    ok = literal and all(2.5 <= r <= 6 for r in ratios)
    report(6, ok, f"first-order literal equality {literal}; max non-critical shift at sigma "
                  f"0.25/0.5/1.0 = {', '.join(f'{x:.1e}' for x in shifts)}, doubling ratios "
                  f"{np.round(ratios, 2).tolist()} (need [2.5, 6]); critical prediction error ratios "
                  f"{pred_err[1] / pred_err[0]:.2f}, {pred_err[2] / pred_err[1]:.2f}", capsys)
    assert ok


def test_criterion_07_projector_exactness(ref, capsys):
    _, lin, sol = ref
    crit = sol.critical()
    sig = [1.0, 1.5, 2.0][:len(crit)]
    N = lin.A.shape[0]
    K = gain_matrix(np.eye(N), sol, crit, sig)
    expected = sol.eigvals.copy()
    for k, s in zip(crit, sig):
        expected[sol.modes[k].plus] -= s
        expected[sol.modes[k].minus] -= s
    got = track_eigenvalues(expected, np.linalg.eigvals(lin.A + K))
    dev = np.max(np.abs(got - expected))
    ok = dev <= 1e-8
    report(7, ok, f"max deviation from the shifted spectrum {dev:.2e} (<= 1e-8)", capsys)
    assert ok


def test_criterion_08_participation(ref, capsys):
    rng = np.random.default_rng(8)
    mats = [ref[1].A] + [rng.standard_normal((10, 10)) for _ in range(5)]
    sum_dev, scale_dev = 0.0, 0.0
    for A in mats:
        sol = modal_decomposition(A)
        sums = (sol.Phi * sol.Psi.T).sum(axis=0)
        sum_dev = max(sum_dev, np.max(np.abs(sums - 1)))
        c = rng.uniform(0.1, 10, len(sums)) * np.exp(1j * rng.uniform(0, 2 * np.pi, len(sums)))
        cols = [md.plus for md in sol.modes]
        P = np.abs((sol.Phi * c)[:, cols] * (sol.Psi / c[:, None])[cols, :].T)
        scale_dev = max(scale_dev, np.max(np.abs(P - sol.participation)))
    ok = sum_dev <= 1e-8 and scale_dev <= 1e-8
    report(8, ok, f"participation sums deviate {sum_dev:.1e} from 1, rescaling changes "
                  f"magnitudes by {scale_dev:.1e}", capsys)
    assert ok


def _run_cli(args):
    return subprocess.run([sys.executable, "-m", "modalwadc.cli", *args], capture_output=True, text=True)


def test_criterion_09_missing_pmu(ref, tmp_path, capsys):
    _, _, true = ref
    totals = sum(generator_participation(true, k) for k, md in enumerate(true.modes)
                 if md.band == "inter-area")
    masked = f"G{int(np.argmin(totals)) + 1}"
    cfg = json.loads((SCENARIOS / "missing_pmu.json").read_text())
    least = masked not in cfg["pmu"]["available"] and len(cfg["pmu"]["available"]) == true.m - 1
    proc = _run_cli(["run", "--config", str(SCENARIOS / "missing_pmu.json"), "--out", str(tmp_path)])
    rows = json.loads((tmp_path / "modes_estimated.json").read_text())["comparison"]
    med = float(np.median([r["f_err_pct"] for r in rows]))
    ok = least and proc.returncode == 0 and med <= 15
    report(9, ok, f"{masked} masked (least participating: {least}); median f error {med:.2f} % "
                  f"(<= 15), exit code {proc.returncode}", capsys)
    assert ok


def test_criterion_10_delay(estimates, designs, capsys):
    s = delayed_spectrum(np.zeros((1, 1)), np.eye(1), -np.eye(1), 1.0, N=32).rightmost[0]
    w = complex(lambertw(-1))
    lambert_err = abs(complex(s.real, abs(s.imag)) - complex(w.real, abs(w.imag)))
    zero_err, zeta_change = 0.0, 0.0
    for (est, _), des in zip(estimates[0], designs):
        A_cl = est.A_P + des.Bc @ des.K
        s0 = delayed_spectrum(est.A_P, des.Bc, des.K, 0.0).rightmost
        zero_err = max(zero_err, np.max(np.abs(np.sort_complex(s0)
                                               - np.sort_complex(np.linalg.eigvals(A_cl)))))
        base = track_modes(des.lam_cl, s0)
        moved = track_modes(base, delayed_spectrum(est.A_P, des.Bc, des.K, 0.010).rightmost)
        zeta_change = max(zeta_change, max(abs(mode_metrics(a)[1] - mode_metrics(b)[1])
                                           for a, b in zip(base, moved)))
    ok = zero_err <= 1e-8 and lambert_err <= 1e-3 and zeta_change <= 0.01
    report(10, ok, f"tau=0 vs eig(A_cl) {zero_err:.1e} (<= 1e-8); Lambert-W root {s:.5f} error "
                   f"{lambert_err:.1e} (<= 1e-3); max designed-mode zeta change at 10 ms "
                   f"{zeta_change:.4f} (<= 0.01), 20 seeds", capsys)
    assert ok


def test_criterion_11_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = _run_cli(["run", "--config", str(SCENARIOS / "reference.json"), "--out", str(out)])
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir() if p.name != "timing.json")
    differ = [f for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    ok = not differ and len(files) >= 8
    report(11, ok, f"{len(files) - len(differ)}/{len(files)} report files byte-identical across reruns",
           capsys)
    assert ok


def test_criterion_12_selection_time(capsys):
    times = []
    for seed in range(5):
        model, delta = area_grid(4, 4, seed=seed)
        lin = build_state_matrices(model, delta)
        sol = modal_decomposition(lin.A)
        t = time.perf_counter()
        select_generators(lin.A, sol, sol.critical(), sigma_d=2.0)
        times.append(time.perf_counter() - t)
    ok = max(times) < 1.0
    report(12, ok, f"selection at n = 16 took {min(times):.3f}-{max(times):.3f} s (< 1 s)", capsys)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
