"""Scenario files: YAML description of model, bath, run and output.

Schema version 1::

    schema: 1
    model:
      preset: qubit            # or: H + couplings, or preset: random (exact-check)
      omega0: 1.0
      S_g: 0.0
      S_e: 0.0
      S_eg: [1.0, 0.0]         # complex entries as [re, im]
      T: 1.0                   # qubit preset only: builds a table bath when no bath block is given
      gamma0: 0.1
      tau_e: 0.5
    bath:
      type: bosonic | table | exact
      T: 1.0
      p: 1                     # bosonic
      kappa: 0.1               # bosonic, |kappa(Omega)|^2 = kappa^2 e^{-Omega/cutoff}
      cutoff: 5.0              # bosonic, defaults to omega_max / 8
      samples: [[0.0, 0.1], ...]   # table, rows [Omega, gamma]
      grid: {n: 8001, omega_max: 40.0}
    run:
      kind: exact-check | evolve | spectrum | stationary | pauli | response | qubit-demo
    output:
      dir: out
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bath import (BathCorrelation, gamma_bosonic, gamma_from_env_exact, gamma_phenomenological,
                   lorentzian, s_from_gamma, uniform_grid)
from .core import is_hermitian
from .weak import qubit_coupling, qubit_hamiltonian

SCHEMA_VERSION = 1
RUN_KINDS = ("exact-check", "evolve", "spectrum", "stationary", "pauli", "response", "qubit-demo")
WEAK_KINDS = ("evolve", "spectrum", "stationary", "pauli", "response", "qubit-demo")
BATH_TYPES = ("bosonic", "table", "exact")


class ScenarioError(ValueError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


@dataclass
class Scenario:
    schema: int
    kind: str
    model: dict
    bath: dict | None
    run: dict
    output: dict
    H: np.ndarray | None = None
    couplings: list = field(default_factory=list)
    qubit: dict | None = None
    path: str | None = None

    @property
    def is_qubit(self) -> bool:
        return self.qubit is not None


# -- value parsing ---------------------------------------------------------------

def _number(v, key) -> float:
    if isinstance(v, bool):
        raise ScenarioError(key, "expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            pass
    raise ScenarioError(key, f"expected a number, got {v!r}")


def _complex(v, key) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ScenarioError(key, "complex entries are [re, im] pairs")
        return complex(_number(v[0], key), _number(v[1], key))
    return complex(_number(v, key))


def matrix(v, key, hermitian=True) -> np.ndarray:
    if not isinstance(v, (list, tuple)) or not v or not all(isinstance(r, (list, tuple)) for r in v):
        raise ScenarioError(key, "expected a matrix given as a list of rows")
    n = len(v[0])
    if any(len(r) != n for r in v):
        raise ScenarioError(key, "rows have different lengths")
    M = np.array([[_complex(x, f"{key}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(v)])
    if M.shape[0] != M.shape[1]:
        raise ScenarioError(key, f"matrix is {M.shape[0]}x{M.shape[1]}, expected square")
    if hermitian and not is_hermitian(M):
        raise ScenarioError(key, "matrix is not Hermitian")
    return M


def _get(d: dict, name: str, key: str, default=None, required=False):
    if name in d:
        return d[name]
    if required:
        raise ScenarioError(f"{key}.{name}" if key else name, "missing required key")
    return default


# -- blocks ----------------------------------------------------------------------

def _parse_model(m, kind):
    if not isinstance(m, dict):
        raise ScenarioError("model", "expected a mapping")
    preset = m.get("preset")
    if preset == "qubit":
        q = {
            "omega0": _number(_get(m, "omega0", "model", 1.0), "model.omega0"),
            "S_g": _number(_get(m, "S_g", "model", 0.0), "model.S_g"),
            "S_e": _number(_get(m, "S_e", "model", 0.0), "model.S_e"),
            "S_eg": _complex(_get(m, "S_eg", "model", [1.0, 0.0]), "model.S_eg"),
            "T": _number(_get(m, "T", "model", 1.0), "model.T"),
            "gamma0": _number(_get(m, "gamma0", "model", 0.1), "model.gamma0"),
            "tau_e": _number(_get(m, "tau_e", "model", 0.5), "model.tau_e"),
            "form": _get(m, "form", "model", "generic"),
        }
        if q["omega0"] <= 0:
            raise ScenarioError("model.omega0", "must be positive")
        if q["form"] not in ("generic", "printed"):
            raise ScenarioError("model.form", "must be 'generic' or 'printed'")
        H = qubit_hamiltonian(q["omega0"])
        return H, [qubit_coupling(q["S_g"], q["S_e"], q["S_eg"])], q
    if preset == "random":
        if kind != "exact-check":
            raise ScenarioError("model.preset", "'random' is only available for exact-check runs")
        return None, [], None
    if preset is not None:
        raise ScenarioError("model.preset", f"unknown preset {preset!r}")
    H = matrix(_get(m, "H", "model", required=True), "H")
    cs = _get(m, "couplings", "model", [])
    if not isinstance(cs, list):
        raise ScenarioError("couplings", "expected a list of matrices")
    couplings = []
    for k, c in enumerate(cs):
        S = matrix(c, f"couplings[{k}]")
        if S.shape != H.shape:
            raise ScenarioError(f"couplings[{k}]", f"shape {S.shape} does not match H {H.shape}")
        couplings.append(S)
    return H, couplings, None


def _parse_bath(b, n_channels):
    if not isinstance(b, dict):
        raise ScenarioError("bath", "expected a mapping")
    t = _get(b, "type", "bath", required=True)
    if t not in BATH_TYPES:
        raise ScenarioError("bath.type", f"must be one of {', '.join(BATH_TYPES)}")
    grid = b.get("grid", {}) or {}
    T = _number(b["T"], "bath.T") if "T" in b else None
    if T is None and (t != "exact" or "rho_env" not in b):
        raise ScenarioError("bath.T", "missing required key")
    if T is not None and not T > 0:
        raise ScenarioError("bath.T", "must be positive")
    out = {
        "type": t,
        "T": T,
        "n": int(_number(grid.get("n", 8001), "bath.grid.n")),
        "omega_max": _number(grid.get("omega_max", 40.0), "bath.grid.omega_max"),
    }
    if out["n"] < 16:
        raise ScenarioError("bath.grid.n", "need at least 16 grid points")
    if t == "bosonic":
        out["p"] = _number(_get(b, "p", "bath", 1), "bath.p")
        out["kappa"] = _number(_get(b, "kappa", "bath", required=True), "bath.kappa")
        out["cutoff"] = _number(_get(b, "cutoff", "bath", out["omega_max"] / 8), "bath.cutoff")
        if out["cutoff"] <= 0:
            raise ScenarioError("bath.cutoff", "must be positive")
    elif t == "table":
        rows = _get(b, "samples", "bath", required=True)
        try:
            arr = np.array([[_number(x, "bath.samples") for x in r] for r in rows])
        except TypeError:
            raise ScenarioError("bath.samples", "expected rows of [Omega, gamma]") from None
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ScenarioError("bath.samples", "expected rows of [Omega, gamma]")
        out["samples"] = arr
    else:
        out["H_env"] = matrix(_get(b, "H_env", "bath", required=True), "bath.H_env")
        Bs = _get(b, "B", "bath", required=True)
        out["B"] = [matrix(x, f"bath.B[{k}]") for k, x in enumerate(Bs)]
        for k, B in enumerate(out["B"]):
            if B.shape != out["H_env"].shape:
                raise ScenarioError(f"bath.B[{k}]", "shape does not match H_env")
        out["eps"] = _number(_get(b, "eps", "bath", 0.05), "bath.eps")
        if "rho_env" in b:
            out["rho_env"] = matrix(b["rho_env"], "bath.rho_env")
        else:
            E, U = np.linalg.eigh(out["H_env"])
            w = np.exp(-(E - E.min()) / T)
            out["rho_env"] = U @ np.diag(w / w.sum()) @ U.conj().T
        if len(out["B"]) != n_channels:
            raise ScenarioError("bath.B", f"{len(out['B'])} bath operators for {n_channels} couplings")
    return out


def _parse_run(r):
    if not isinstance(r, dict):
        raise ScenarioError("run", "expected a mapping")
    kind = _get(r, "kind", "run", required=True)
    if kind not in RUN_KINDS:
        raise ScenarioError("run.kind", f"must be one of {', '.join(RUN_KINDS)}")
    return kind


def build_bath(sc: Scenario) -> BathCorrelation:
    """BathCorrelation (with s) described by the scenario."""
    if sc.bath is None:
        q = sc.qubit
        if q is None:
            raise ScenarioError("bath", "bath required")
        grid = uniform_grid(40.0, 8001)
        return s_from_gamma(gamma_phenomenological(lorentzian(q["gamma0"], q["tau_e"]), q["T"], grid))
    b = sc.bath
    grid = uniform_grid(b["omega_max"], b["n"])
    if b["type"] == "bosonic":
        k, wc = b["kappa"], b["cutoff"]
        bc = gamma_bosonic(b["p"], lambda w: k * np.exp(-w / (2 * wc)), b["T"], grid)
    elif b["type"] == "table":
        bc = gamma_phenomenological(b["samples"], b["T"], grid)
    else:
        bc = gamma_from_env_exact(b["H_env"], b["B"], b["rho_env"], b["eps"], grid)
    return s_from_gamma(bc)


def parse_scenario_text(text: str, path: str | None = None) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ScenarioError("syntax", f"{where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario", "top level must be a mapping")
    if "schema" not in doc:
        raise ScenarioError("schema", "missing required key")
    if doc["schema"] != SCHEMA_VERSION:
        raise ScenarioError("schema", f"unsupported schema version {doc['schema']!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - {"schema", "model", "bath", "run", "output"}
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown top-level key")
    kind = _parse_run(doc.get("run"))
    model = doc.get("model")
    if model is None:
        raise ScenarioError("model", "missing required key")
    H, couplings, qubit = _parse_model(model, kind)
    bath = None
    if doc.get("bath") is not None:
        bath = _parse_bath(doc["bath"], len(couplings))
    elif kind in WEAK_KINDS and qubit is None:
        raise ScenarioError("bath", "bath required")
    if kind == "qubit-demo" and qubit is None:
        raise ScenarioError("model.preset", "qubit-demo needs the qubit preset")
    if kind in WEAK_KINDS and not couplings:
        raise ScenarioError("couplings", "at least one coupling operator is required")
    if qubit is not None and bath is not None and bath["type"] == "exact":
        raise ScenarioError("bath.type", "the qubit preset needs a bosonic or table bath")
    output = doc.get("output") or {}
    if not isinstance(output, dict):
        raise ScenarioError("output", "expected a mapping")
    output = {"dir": str(output.get("dir", "out"))}
    return Scenario(SCHEMA_VERSION, kind, model, bath, dict(doc["run"]), output, H, couplings, qubit, path)


def parse_scenario(path) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError("scenario", f"file not found: {p}")
    return parse_scenario_text(p.read_text(), str(p))


# -- run-block helpers -------------------------------------------------------------

def time_grid(run: dict) -> np.ndarray:
    t = run.get("times", {"t_max": 10.0, "n": 101})
    if isinstance(t, list):
        return np.array([_number(x, "run.times") for x in t])
    t_max = _number(t.get("t_max", 10.0), "run.times.t_max")
    n = int(_number(t.get("n", 101), "run.times.n"))
    if t_max <= 0 or n < 2:
        raise ScenarioError("run.times", "need t_max > 0 and n >= 2")
    return np.linspace(0.0, t_max, n)


def omega_grid(run: dict, scale: float) -> np.ndarray:
    w = run.get("omega", {})
    lo = _number(w.get("min", -8 * scale), "run.omega.min")
    hi = _number(w.get("max", 8 * scale), "run.omega.max")
    n = int(_number(w.get("n", 16001), "run.omega.n"))
    if hi <= lo or n < 5:
        raise ScenarioError("run.omega", "need max > min and n >= 5")
    return np.linspace(lo, hi, n)


def operator(run: dict, name: str, d: int, default=None) -> np.ndarray:
    v = run.get(name, default)
    if v is None:
        raise ScenarioError(f"run.{name}", "missing required key")
    if isinstance(v, str):
        named = {
            "sx": np.array([[0, 1], [1, 0]], complex),
            "sy": np.array([[0, -1j], [1j, 0]], complex),
            "sz": np.array([[1, 0], [0, -1]], complex),
        }
        if v not in named or d != 2:
            raise ScenarioError(f"run.{name}", f"unknown operator name {v!r}")
        return named[v]
    M = matrix(v, f"run.{name}")
    if M.shape != (d, d):
        raise ScenarioError(f"run.{name}", f"shape {M.shape} does not match the model ({d}x{d})")
    return M
