"""Command-line front end: ``relaxator --scenario run.yaml --out results``."""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .bath import kms_violation
from .checks import constraint_suite
from .core import bohr_decompose
from .exact import (ExactLiouvillian, correlated_part, evolve_total, initial_correlation_exact,
                    random_density, random_total_system, schur_identity_error)
from .markov import markov_liouvillian, secular_liouvillian
from .pauli import detailed_balance_check, gibbs, pauli_rates, stationary_pauli
from .qubit import (QubitModel, comparison_table, diag_coupling_analytics, format_table,
                    markov_qubit_rates, offdiag_coupling_analytics)
from .response import chi_open, kk_check
from .scenario import (Scenario, ScenarioError, build_bath, matrix, omega_grid, operator, parse_scenario,
                       time_grid)
from .spectral import effective_modes, evolve_laplace_grid, evolve_residues, stationary_state
from .weak import WeakCouplingModel, liouvillian_weak

FMT = "%.17g"


class Report:
    """Collects PASS/FAIL/INFO lines; any FAIL makes the run exit nonzero."""

    def __init__(self):
        self.lines: list[str] = []
        self.failed = False

    def check(self, name: str, value: float, tol: float, above: bool = False):
        ok = bool(value >= tol) if above else bool(value < tol)
        rel = ">=" if above else "<"
        self.lines.append(f"{name}: {'PASS' if ok else 'FAIL'} (value {value:.3e}, need {rel} {tol:.1e})")
        self.failed |= not ok
        return ok

    def flag(self, name: str, ok: bool, detail: str):
        self.lines.append(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        self.failed |= not ok

    def info(self, name: str, text: str):
        self.lines.append(f"{name}: INFO {text}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _write_csv(path: Path, header: list[str], rows):
    rows = np.asarray(rows, float)
    np.savetxt(path, rows.reshape(-1, len(header)), fmt=FMT, delimiter=",", header=",".join(header), comments="")


def _rho_columns(d):
    cols = []
    for m in range(d):
        for n in range(d):
            cols += [f"re_rho_{m}{n}", f"im_rho_{m}{n}"]
    return cols


def _rho_rows(times, rho):
    flat = rho.reshape(rho.shape[0], -1)
    parts = np.empty((flat.shape[0], 2 * flat.shape[1]))
    parts[:, 0::2] = flat.real
    parts[:, 1::2] = flat.imag
    return np.column_stack([times, parts])


# -- generator construction -------------------------------------------------------------

def build_generator(sc: Scenario):
    """(FL, bath, model_or_qubit) for weak-coupling runs."""
    bath = build_bath(sc)
    if sc.is_qubit:
        q = sc.qubit
        qm = QubitModel(q["omega0"], q["S_g"], q["S_e"], q["S_eg"], bath)
        FL = qm.liouvillian(q["form"])
        model = WeakCouplingModel(sc.H, sc.couplings, bath)
    else:
        qm = None
        model = WeakCouplingModel(sc.H, sc.couplings, bath)
        FL = liouvillian_weak(model)
    limit = sc.run.get("limit", "none")
    if limit == "markov":
        FL = markov_liouvillian(FL)
    elif limit == "secular":
        FL = secular_liouvillian(model)
    elif limit != "none":
        raise ScenarioError("run.limit", "must be none, markov or secular")
    return FL, bath, model, qm


def _default_rho0(sc: Scenario, d: int):
    if "rho0" in sc.run:
        rho = matrix(sc.run["rho0"], "run.rho0")
        if rho.shape != (d, d):
            raise ScenarioError("run.rho0", f"shape {rho.shape} does not match the model ({d}x{d})")
        if abs(np.trace(rho) - 1) > 1e-10 or np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ScenarioError("run.rho0", "not a density matrix")
        return rho
    # equal superposition of all energy eigenstates
    U = np.linalg.eigh(sc.H)[1]
    v = U.sum(axis=1) / np.sqrt(d)
    return np.outer(v, v.conj())


def _generator_checks(rep: Report, FL, bath, sc: Scenario):
    d = FL.dim
    spec = bohr_decompose(sc.H)
    omegas = np.unique(np.round(np.concatenate([[0.0], spec.frequencies[spec.frequencies > 0],
                                                 [0.5 * float(np.ptp(spec.energies)) + 0.1]]), 12))
    uniform = bath.mode == "uniform"
    cr = constraint_suite(FL, omegas, uniform=uniform)
    rep.check("trace_conservation", cr.trace, 1e-10)
    rep.check("hermiticity_L", cr.herm_L, 1e-9)
    rep.check("hermiticity_shift", cr.herm_H, 1e-9)
    rep.check("hermiticity_relaxator", cr.herm_G, 1e-9)
    if uniform:
        rep.check("relaxator_positivity", cr.positivity, -1e-9, above=True)
        rep.check("relaxator_evenness", cr.evenness, 1e-9)
        rep.check("shift_at_zero", cr.shift0, 1e-7)
    if bath.thermal:
        rep.check("kms", kms_violation(bath), 1e-8)
    rep.info("dimension", str(d))


def _state_checks(rep: Report, traj):
    rep.check("state_hermiticity", traj.max_antihermitian(), 1e-9)
    rep.check("state_trace", traj.max_trace_error(), 1e-7)
    rep.check("state_positivity", traj.min_eigenvalue(), -1e-7, above=True)


# -- run kinds ---------------------------------------------------------------------------

def run_exact_check(sc: Scenario, out: Path, rep: Report, seed: int, eps: float | None, verify: bool):
    m = sc.model
    d_s = int(m.get("d_s", 2))
    d_e = int(m.get("d_e", 4))
    n_c = int(m.get("n_couplings", 1))
    strength = float(m.get("strength", 0.5))
    n_sys = int(sc.run.get("n_systems", 1))
    n_z = int(sc.run.get("n_z", 10))
    rng = np.random.default_rng(seed)
    worst = 0.0
    systems = []
    for _ in range(n_sys):
        ts = random_total_system(d_s, d_e, rng, n_couplings=n_c, strength=strength)
        systems.append(ts)
        FL = ExactLiouvillian(ts, float(sc.run.get("broadening", 1e-2)))
        for _ in range(n_z):
            z = rng.uniform(-3, 3) + 1j * 10 ** rng.uniform(-3, 0)
            worst = max(worst, schur_identity_error(ts, z, FL.ex))
    rep.check("schur_identity", worst, float(sc.run.get("tol", 1e-9)))
    ts = systems[0]
    FL = ExactLiouvillian(ts, float(sc.run.get("broadening", 1e-2)))
    cr = constraint_suite(FL, [0.0, 0.7, 1.9], uniform=True)
    rep.check("trace_conservation", cr.trace, 1e-10)
    rep.check("hermiticity_L", cr.herm_L, 1e-9)
    rep.check("relaxator_positivity", cr.positivity, -1e-9, above=True)
    rep.check("relaxator_evenness", cr.evenness, 1e-9)
    if not sc.run.get("dynamics", True):
        return
    times = time_grid(sc.run)
    rho_tot = random_density(ts.d_s * ts.d_e, rng)
    rho_s, corr = correlated_part(ts, rho_tot)
    ref = evolve_total(ts, rho_tot, times)
    traj = evolve_laplace_grid(FL, rho_s, times, eps=eps,
                               rho0_of_z=lambda z: initial_correlation_exact(ts, corr, z, FL.ex),
                               rho0_moments=FL.rho0_moments(corr))
    rep.check("reduced_dynamics", float(np.max(np.abs(traj.rho - ref))), 1e-6)
    _state_checks(rep, traj)
    if not verify:
        _write_csv(out / "trajectory.csv", ["t"] + _rho_columns(ts.d_s), _rho_rows(times, traj.rho))


def run_evolve(sc, out, rep, FL, eps, verify):
    d = FL.dim
    rho0 = _default_rho0(sc, d)
    times = time_grid(sc.run)
    method = sc.run.get("method", "laplace")
    if method not in ("laplace", "residues", "both"):
        raise ScenarioError("run.method", "must be laplace, residues or both")
    traj = None
    if method in ("laplace", "both"):
        traj = evolve_laplace_grid(FL, rho0, times, eps=eps)
        rep.info("laplace_error_estimate", f"{traj.error_estimate:.3e}")
    if method in ("residues", "both"):
        res = evolve_residues(effective_modes(FL), rho0, times)
        if traj is not None:
            dev = float(np.max(np.abs(res.rho - traj.rho)))
            rep.check("residues_vs_laplace", dev, float(sc.run.get("tol", 1e-6)))
        else:
            traj = res
    _state_checks(rep, traj)
    if not verify:
        _write_csv(out / "trajectory.csv", ["t"] + _rho_columns(d), _rho_rows(times, traj.rho))


def _mode_rows(ms, rho0):
    rows = []
    for k, m in enumerate(ms.modes):
        a = m.residue * np.vdot(m.left, rho0.reshape(-1)) * m.right
        rows.append([k, m.omega, m.delta, np.linalg.norm(a)])
    return rows


def run_spectrum(sc, out, rep, FL, verify):
    ms = effective_modes(FL)
    rep.info("zero_multiplicity", str(ms.zero_multiplicity))
    rep.flag("modes_converged", not ms.flagged, f"{len(ms.flagged)} flagged of {len(ms.modes)}")
    rep.info("completeness_error", f"{ms.completeness_error():.3e}")
    if not verify:
        rho0 = _default_rho0(sc, FL.dim)
        _write_csv(out / "modes.csv", ["k", "omega_k", "delta_k", "norm_A_k"], _mode_rows(ms, rho0))
    return ms


def run_stationary(sc, out, rep, FL, verify):
    st = stationary_state(FL)
    rep.info("stationary_multiplicity", str(st.degeneracy))
    if st.degenerate:
        rep.info("stationary_state", "degenerate zero mode; no unique stationary state returned")
        return st
    rep.check("stationary_residual", st.residual, 1e-9)
    ev = np.linalg.eigvalsh(0.5 * (st.rho + st.rho.conj().T))
    rep.check("stationary_positivity", float(ev.min()), -1e-9, above=True)
    if not verify:
        d = FL.dim
        rows = [[r, s, st.rho[r, s].real, st.rho[r, s].imag] for r in range(d) for s in range(d)]
        _write_csv(out / "stationary.csv", ["r", "s", "re_rho", "im_rho"], rows)
    return st


def run_pauli(sc, out, rep, FL, bath, verify):
    spec = bohr_decompose(sc.H)
    pr = pauli_rates(FL.relaxator(0.0), spec, bath.temperature if bath.thermal else None)
    ps = stationary_pauli(pr)
    rows = []
    if bath.thermal:
        bal = detailed_balance_check(pr)
        rep.check("detailed_balance", bal.max_violation, 1e-6)
        rows = [[r, n, W, ratio] for r, n, W, ratio, _ in bal.rows]
        if ps.p is not None:
            rep.check("gibbs_populations", float(np.max(np.abs(ps.p - gibbs(pr.energies, bath.temperature)))), 1e-7)
    else:
        W = pr.W
        rows = [[r, n, W[r, n], W[n, r] / W[r, n] if W[r, n] else np.nan]
                for r in range(pr.dim) for n in range(pr.dim) if r != n]
    rep.info("irreducible", str(ps.irreducible))
    if not verify:
        _write_csv(out / "pauli.csv", ["r", "n", "W", "balance_ratio"], rows)


def run_response(sc, out, rep, FL, eps, verify):
    d = FL.dim
    st = stationary_state(FL)
    if st.degenerate:
        rep.flag("unique_stationary_state", False, f"degeneracy {st.degeneracy}")
        return
    default = "sx" if d == 2 else None
    A = operator(sc.run, "A", d, default)
    B = operator(sc.run, "B", d, default)
    scale = max(float(np.ptp(np.linalg.eigvalsh(sc.H))), 1e-12)
    omega = omega_grid(sc.run, scale)
    chi = chi_open(FL, st, A, B, omega, eta=0.0 if eps is None else eps)
    kk = kk_check(chi)
    rep.check("kramers_kronig", kk.real_deviation, float(sc.run.get("tol", 1e-3)))
    rep.info("kramers_kronig_inverse", f"{kk.imag_deviation:.3e}")
    rep.info("edge_fraction", f"{kk.edge_fraction:.3e}")
    if not verify:
        s = max(float(np.max(np.abs(chi.values))), 1e-300)
        dev = np.abs(kk.reconstructed_real - chi.real) / s
        _write_csv(out / "chi.csv", ["omega", "re_chi", "im_chi", "kk_deviation"],
                   np.column_stack([omega, chi.real, chi.imag, dev]))


def run_qubit_demo(sc, out, rep, FL, qm: QubitModel, verify):
    form = sc.qubit["form"]
    ms = effective_modes(FL)
    tol = float(sc.run.get("tol", 1e-6))
    rows = []
    if qm.S_eg == 0:
        an = diag_coupling_analytics(qm, form)
        num = max((m for m in ms.modes if m.omega > 0), key=lambda m: m.omega)
        rows += [("omega_+", an.z["+"].real, num.omega), ("tau_dec", an.tau_dec, 1 / num.delta)]
        rep.flag("zero_multiplicity", ms.zero_multiplicity == 2, f"{ms.zero_multiplicity} (expected 2)")
    elif qm.S_g == 0 and qm.S_e == 0:
        an = offdiag_coupling_analytics(qm, form)
        coh = max((m for m in ms.modes if m.omega > 0), key=lambda m: m.omega)
        pop = [m for m in ms.modes if abs(m.omega) < 1e-9 and m.delta > 1e-12]
        rows += [("rho_e_inf", an.rho_e_inf, ms.stationary[1, 1].real),
                 ("omega_2", an.aux["omega2"], coh.omega),
                 ("tau_dec", an.tau_dec, 1 / coh.delta)]
        if pop:
            rows.append(("tau_r_diag", an.tau_r_diag, 1 / pop[0].delta))
        rep.flag("zero_multiplicity", ms.zero_multiplicity == 1, f"{ms.zero_multiplicity} (expected 1)")
    else:
        rep.info("analytics", "closed forms cover purely diagonal or purely off-diagonal coupling only")
    mr = markov_qubit_rates(qm)
    L0 = markov_liouvillian(FL).L
    lam = np.linalg.eigvals(L0)
    if mr.tau_r is not None:
        pops = lam[np.abs(lam.real) < 1e-9]
        pops = pops[np.abs(pops) > 1e-12]
        if pops.size:
            rows.append(("tau_r_markov", mr.tau_r, 1 / float(-pops.imag.max())))
    table = comparison_table(rows)
    for name, a, n, dev in table:
        rep.check(f"oracle_{name}", dev, tol)
    rep.info("table", "\n" + format_table(table))
    if not verify:
        rho0 = _default_rho0(sc, 2)
        _write_csv(out / "modes.csv", ["k", "omega_k", "delta_k", "norm_A_k"], _mode_rows(ms, rho0))


def run_scenario(sc: Scenario, out: Path, seed: int = 0, eps: float | None = None, verify: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    rep = Report()
    rep.info("kind", sc.kind)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if sc.kind == "exact-check":
                run_exact_check(sc, out, rep, seed, eps, verify)
            else:
                FL, bath, model, qm = build_generator(sc)
                _generator_checks(rep, FL, bath, sc)
                if not verify:
                    if sc.kind == "evolve":
                        run_evolve(sc, out, rep, FL, eps, verify)
                    elif sc.kind == "spectrum":
                        run_spectrum(sc, out, rep, FL, verify)
                    elif sc.kind == "stationary":
                        run_stationary(sc, out, rep, FL, verify)
                    elif sc.kind == "pauli":
                        run_pauli(sc, out, rep, FL, bath, verify)
                    elif sc.kind == "response":
                        run_response(sc, out, rep, FL, eps, verify)
                    elif sc.kind == "qubit-demo":
                        run_qubit_demo(sc, out, rep, FL, qm, verify)
        for w in caught:
            rep.info("warning", str(w.message))
    except ScenarioError:
        raise
    except Exception as exc:  # module errors get scenario context and a FAIL line
        rep.flag("run", False, f"{sc.kind} on {sc.path or 'scenario'}: {type(exc).__name__}: {exc}")
    (out / "report.txt").write_text(rep.text())
    return 1 if rep.failed else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="relaxator", description="Relaxator Liouville dynamics from a scenario file.")
    ap.add_argument("--scenario", required=True, help="YAML scenario file")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, default=0, help="64-bit seed for random models")
    ap.add_argument("--eps", type=float, default=None,
                    help="Laplace contour offset (evolve, exact-check) or broadening (response)")
    ap.add_argument("--verify", action="store_true", help="run the invariant suite only")
    args = ap.parse_args(argv)
    if not 0 <= args.seed < 2 ** 64:
        ap.error("--seed must be an unsigned 64-bit integer")
    try:
        sc = parse_scenario(args.scenario)
        out = Path(args.out if args.out is not None else sc.output["dir"])
        status = run_scenario(sc, out, args.seed, args.eps, args.verify)
    except ScenarioError as exc:
        print(f"relaxator: scenario error: {exc}", file=sys.stderr)
        return 2
    print((out / "report.txt").read_text(), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
