"""Closed-form results for a qubit weakly coupled to a thermal bath.

H = (w0/2) s3, S = S_g P_g + S_e P_e + S_eg s+ + conj(S_eg) s-. All
frequency-dependent quantities are evaluated from the bath tables through
g = s - i gamma. ``form="generic"`` keeps g(x) and g*(-x) separate, the form
in which the numerical generator is built; ``form="printed"`` substitutes
g*(-x) = -e^{-x/T} g(x).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .bath import BathCorrelation
from .weak import QubitLiouvillian, qubit_coupling, qubit_hamiltonian, qubit_operators


@dataclass
class QubitModel:
    omega0: float
    S_g: float
    S_e: float
    S_eg: complex
    bath: BathCorrelation

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if not self.bath.thermal:
            raise ValueError("qubit model needs a thermal bath")
        if self.bath.K != 1:
            raise ValueError("qubit model needs a scalar bath (K = 1)")
        if self.bath.s is None:
            raise ValueError("bath s missing; call s_from_gamma first")
        self.S_g, self.S_e, self.S_eg = float(self.S_g), float(self.S_e), complex(self.S_eg)

    @property
    def T(self) -> float:
        return self.bath.temperature

    @property
    def H(self) -> np.ndarray:
        return qubit_hamiltonian(self.omega0)

    @property
    def S(self) -> np.ndarray:
        return qubit_coupling(self.S_g, self.S_e, self.S_eg)

    @property
    def operators(self):
        """(P_g, P_e, s+, s-, s3)."""
        return qubit_operators()

    def liouvillian(self, form: str = "generic") -> QubitLiouvillian:
        return QubitLiouvillian(self.omega0, self.S_g, self.S_e, self.S_eg, self.bath, form)

    def g(self, x):
        x = np.asarray(x, float)
        return self.bath.g_at(x.reshape(-1))[:, 0, 0].reshape(x.shape)

    def gamma(self, x):
        x = np.asarray(x, float)
        return self.bath.gamma_at(x.reshape(-1))[:, 0, 0].reshape(x.shape).real

    def gminus(self, x, form: str = "generic"):
        """g*(-x), or its thermal substitute -e^{-x/T} g(x)."""
        if form == "printed":
            return -np.exp(-np.asarray(x, float) / self.T) * self.g(x)
        return np.conj(self.g(-np.asarray(x, float)))

    def weight(self, x, form: str = "generic"):
        """g(x) - g*(-x); equals g(x)(1 + e^{-x/T}) in the printed form."""
        return self.g(x) - self.gminus(x, form)


@dataclass
class AnalyticResult:
    case: str
    lambdas: dict[str, Callable]
    z: dict[str, complex] = field(default_factory=dict)
    tau_dec: float | None = None
    tau_r: float | None = None
    tau_r_diag: float | None = None
    rho_e_inf: float | None = None
    aux: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


def _check_form(form):
    if form not in ("generic", "printed"):
        raise ValueError("form must be 'generic' or 'printed'")


def _fixed_points(F, lo, hi, n=2001):
    """All roots of F on [lo, hi] found by sign changes on an n-point scan."""
    x = np.linspace(lo, hi, n)
    y = np.array([F(v) for v in x])
    roots = [float(x[i]) for i in np.flatnonzero(y == 0)]
    for i in np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0):
        roots.append(brentq(F, x[i], x[i + 1], xtol=1e-14, rtol=1e-15))
    return sorted(roots)


def _scan_window(qm, center):
    # keep every g argument (w - w0, w + w0) inside the bath grid
    half = min(0.5 * qm.omega0, qm.bath.omega_max - abs(center) - qm.omega0 - qm.bath.h)
    return center - half, center + half


# -- case (I): diagonal coupling -----------------------------------------------

def diag_coupling_analytics(qm: QubitModel, form: str = "generic") -> AnalyticResult:
    """Pure decoherence for S = S_g P_g + S_e P_e.

    lambda_+(w) = w0 + (S_e - S_g)(S_e g(w - w0) + S_g g*(w0 - w)) on s+ and
    lambda_-(w) = -w0 + (S_g - S_e)(S_g g(w + w0) + S_e g*(-w - w0)) on s-;
    sigma_3 and every unit-trace diagonal state are zero modes. The effective
    frequency solves w = Re lambda_+(w); every fixed point found in a window
    around w0 is reported in ``aux["fixed_points"]``. ``tau_dec`` is taken at
    the fixed point closest to w0.
    """
    _check_form(form)
    if qm.S_eg != 0:
        raise ValueError("diagonal-coupling analytics need S_eg = 0")
    if qm.S_e == qm.S_g:
        raise ValueError("S_e = S_g: the coupling is a multiple of the identity and has no effect")
    w0, Sg, Se = qm.omega0, qm.S_g, qm.S_e

    def lam_p(w):
        x = np.asarray(w, float) - w0
        return w0 + (Se - Sg) * (Se * qm.g(x) + Sg * qm.gminus(x, form))

    def lam_m(w):
        y = np.asarray(w, float) + w0
        return -w0 + (Sg - Se) * (Sg * qm.g(y) + Se * qm.gminus(y, form))

    fps = _fixed_points(lambda w: float(lam_p(w).real) - w, *_scan_window(qm, w0))
    if not fps:
        raise ValueError("no solution of w = Re lambda_+(w) near w0")
    wp = min(fps, key=lambda v: abs(v - w0))
    zp = complex(lam_p(wp))
    flags = []
    delta = -zp.imag
    gamma0 = float(qm.gamma(0.0))
    if gamma0 <= 1e-10 * float(np.max(np.abs(qm.bath.gamma))):
        gamma0 = 0.0
    if gamma0 == 0.0 and abs(wp - w0) < 1e-9 * w0:
        flags.append("gamma(0) = 0: no decoherence")
        tau = np.inf
    elif delta <= 0:
        raise ValueError(f"decoherence rate {delta:.3g} is not positive; sign convention conflict")
    else:
        tau = 1.0 / delta
    P_g, P_e, sp, sm, s3 = qm.operators
    aux = {
        "fixed_points": fps,
        "tau_dec_zero_shift": np.inf if gamma0 == 0 else 1.0 / (gamma0 * (Se - Sg) ** 2),
        "right": {"R1": s3, "R2": sp, "R3": sm},
        "left": {"L0": np.eye(2, dtype=complex), "L2": sp, "L3": sm},
        "zero_modes": lambda rho_e: (rho_e * (P_e - P_g) + P_g, -rho_e * (P_g + P_e) + P_e),
    }
    return AnalyticResult("diagonal", {"+": lam_p, "-": lam_m},
                          {"+": zp, "-": -np.conj(zp)}, tau_dec=tau, aux=aux, flags=flags)


# -- case (II): off-diagonal coupling ------------------------------------------

def qubit_f(qm: QubitModel, omega, form: str = "generic"):
    """f(w) = |S_eg|^2 (g(w) - g*(-w)), i.e. |S_eg|^2 g(w)(1 + e^{-w/T}) in the printed form."""
    return abs(qm.S_eg) ** 2 * qm.weight(omega, form)


def shift_dz0(f, omega0):
    """dz0 = sqrt(w0^2 + f^2) - w0 on the branch that vanishes with f.

    Also returns (phi, phi_tilde) with tan phi = Re f / (-Im f) and
    w0 + dz0 = w0 (1 + |f|^4/w0^4 - 2 |f|^2 cos(2 phi)/w0^2)^{1/4} e^{-i phi_tilde/2}.
    """
    f = np.asarray(f, complex)
    phi = np.arctan2(f.real, -f.imag)
    a2 = np.abs(f) ** 2
    mod = (1 + a2 ** 2 / omega0 ** 4 - 2 * a2 * np.cos(2 * phi) / omega0 ** 2) ** 0.25
    phit = np.arctan2(a2 * np.sin(2 * phi), omega0 ** 2 - a2 * np.cos(2 * phi))
    dz0 = omega0 * mod * np.exp(-0.5j * phit) - omega0
    return dz0, phi, phit


def offdiag_eigenoperators(qm: QubitModel, omega: float, form: str = "generic"):
    """Right/left eigenoperators of the coherence block at frequency omega.

    R2 ~ s+ + r2 s-, R3 ~ s- + r3 s+ with r2 = -f S_ge^2/(|S|^2 (2 w0 + dz0)),
    r3 = f S_eg^2/(|S|^2 (2 w0 + dz0)), each normalized by (1 + |r|^2)^{-1/2}.
    Left partners follow from c2* = b3/det, d2* = -a3/det (and the mirror
    for L3) with R_k = a_k s+ + b_k s-, det = a2 b3 - a3 b2.
    """
    f = complex(qubit_f(qm, omega, form))
    dz0 = complex(shift_dz0(f, qm.omega0)[0])
    S2 = abs(qm.S_eg) ** 2
    den = S2 * (2 * qm.omega0 + dz0)
    r2 = -f * np.conj(qm.S_eg) ** 2 / den
    r3 = f * qm.S_eg ** 2 / den
    n2, n3 = 1 / np.sqrt(1 + abs(r2) ** 2), 1 / np.sqrt(1 + abs(r3) ** 2)
    a2, b2 = n2, n2 * r2
    a3, b3 = n3 * r3, n3
    det = a2 * b3 - a3 * b2
    c2, d2 = np.conj(b3 / det), np.conj(-a3 / det)
    c3, d3 = np.conj(-b2 / det), np.conj(a2 / det)
    _, _, sp, sm, _ = qm.operators
    right = {"R2": a2 * sp + b2 * sm, "R3": a3 * sp + b3 * sm}
    left = {"L2": c2 * sp + d2 * sm, "L3": c3 * sp + d3 * sm}
    return right, left


def offdiag_coupling_analytics(qm: QubitModel, form: str = "generic") -> AnalyticResult:
    """Populations and coherences for S = S_eg s+ + conj(S_eg) s-.

    Zero mode rho_e(w), population eigenvalue lambda_1(w), coherence
    eigenvalues lambda_{2,3}(w) = f(w) +- (w0 + dz0(w)) and the effective
    coherence frequency w2 = Re lambda_2(w2) with tau_dec = 1/(-Im lambda_2(w2)).
    """
    _check_form(form)
    if qm.S_eg == 0:
        raise ValueError("off-diagonal analytics need S_eg != 0")
    if qm.S_g != 0 or qm.S_e != 0:
        raise ValueError("off-diagonal analytics need S_g = S_e = 0")
    w0, T = qm.omega0, qm.T
    S2 = abs(qm.S_eg) ** 2

    def rho_e(w):
        w = np.asarray(w, float)
        xp, xm = w + w0, w - w0
        num = qm.g(xm) - qm.gminus(xp, form)
        den = qm.g(xp) - qm.gminus(xm, form) + num
        return num / den

    def lam1(w):
        w = np.asarray(w, float)
        return S2 * (qm.weight(w + w0, form) + qm.weight(w - w0, form))

    def lam2(w):
        f = qubit_f(qm, w, form)
        return f + w0 + shift_dz0(f, w0)[0]

    def lam3(w):
        f = qubit_f(qm, w, form)
        return f - w0 - shift_dz0(f, w0)[0]

    fps = _fixed_points(lambda w: float(lam2(w).real) - w, *_scan_window(qm, w0))
    if not fps:
        raise ValueError("no solution of w = Re lambda_2(w) near w0")
    w2 = min(fps, key=lambda v: abs(v - w0))
    z2 = complex(lam2(w2))
    if z2.imag >= 0:
        raise ValueError(f"coherence decay rate {-z2.imag:.3g} is not positive")
    z1 = complex(lam1(0.0))
    f2 = complex(qubit_f(qm, w2, form))
    dz0, phi, phit = shift_dz0(f2, w0)
    right, left = offdiag_eigenoperators(qm, w2, form)
    gw0 = float(qm.gamma(w0))
    aux = {
        "fixed_points": fps,
        "omega2": w2,
        "f": f2,
        "dz0": complex(dz0),
        "phi": float(phi),
        "phi_tilde": float(phit),
        "rho_e": rho_e,
        "right": right,
        "left": left,
    }
    return AnalyticResult(
        "offdiagonal",
        {"0": lambda w: np.zeros_like(np.asarray(w, float)), "1": lam1, "2": lam2, "3": lam3},
        {"0": 0j, "1": z1, "2": z2, "3": -np.conj(z2)},
        tau_dec=-1.0 / z2.imag,
        tau_r_diag=1.0 / (2 * S2 * gw0 * (1 + np.exp(-w0 / T))),
        rho_e_inf=float(rho_e(0.0).real),
        aux=aux,
    )


# -- Markov limit --------------------------------------------------------------

def markov_qubit_rates(qm: QubitModel) -> AnalyticResult:
    """Rate constants of the frozen generator L(0) and its relaxation times.

    a_e = |S_eg|^2 (1 + e^{-w0/T}), b_e = S_eg (S_g - S_e e^{-w0/T}),
    a_eg = (S_g - S_e)(S_g - S_e e^{-w0/T}), b_eg = (S_g - S_e) S_eg (1 + e^{-w0/T}).
    tau_r is reported for S_eg != 0 and tau_dec for purely diagonal or
    purely off-diagonal S.
    """
    w0, T = qm.omega0, qm.T
    Sg, Se, Seg = qm.S_g, qm.S_e, qm.S_eg
    S2 = abs(Seg) ** 2
    b = np.exp(-w0 / T)
    gw0 = float(qm.gamma(w0))
    gam0 = float(qm.gamma(0.0))
    aux = {
        "a_e": S2 * (1 + b),
        "b_e": Seg * (Sg - Se * b),
        "a_eg": (Sg - Se) * (Sg - Se * b),
        "b_eg": (Sg - Se) * Seg * (1 + b),
        "rho_c": b / (1 + b),
        "gamma0": gam0,
        "gamma_w0": gw0,
        "g_w0": complex(qm.g(w0)),
    }
    res = AnalyticResult("markov", {}, aux=aux, rho_e_inf=b / (1 + b))
    if S2 > 0:
        res.tau_r = 1.0 / (2 * gw0 * S2 * (1 + b))
    if Seg == 0 and Sg != Se:
        rate = gw0 * (Sg - Se) * (Sg - Se * b)
        if rate <= 0:
            raise ValueError(f"decoherence rate {rate:.3g} is not positive; sign convention conflict")
        res.tau_dec = 1.0 / rate
        # coherence eigenvalue of L(0): w0 + (S_e - S_g)(S_e g(-w0) + S_g g*(w0))
        res.z["+"] = complex(w0 + (Se - Sg) * (Se * qm.g(-w0) + Sg * np.conj(qm.g(w0))))
    elif Sg == 0 and Se == 0 and S2 > 0:
        a = 2 * gam0 * S2
        res.tau_dec = np.inf if a == 0 else (1.0 / a if a < w0 else 1.0 / (a - np.sqrt(a * a - w0 * w0)))
        aux["coherence_rate"] = a
    if S2 == 0 and Sg == Se:
        res.flags.append("no effective coupling: unitary precession only")
    return res


def markov_qubit_trajectory(qm: QubitModel, rho0, times) -> np.ndarray:
    """Closed-form solution of d rho/dt = -i L(0) rho for the decoupled cases.

    Diagonal S: rho_e constant, rho_eg(t) = rho_eg(0) exp(-i z_+ t).
    Off-diagonal S: rho_e relaxes exponentially with tau_r to rho_c, and
    (x, x*) with x = rho_eg obeys x' = -i w0 x - a x + 2 gamma(0) S_eg^2 x*,
    a = 2 gamma(0) |S_eg|^2, solved with the 2x2 exponential in closed form.
    """
    rho0 = np.asarray(rho0, complex)
    t = np.asarray(times, float)
    w0 = qm.omega0
    Sg, Se, Seg = qm.S_g, qm.S_e, qm.S_eg
    mr = markov_qubit_rates(qm)
    re0, x0 = rho0[1, 1].real, rho0[1, 0]
    if Seg == 0:
        z = mr.z.get("+", complex(w0))
        re = np.full(t.shape, re0)
        x = x0 * np.exp(-1j * z * t)
    elif Sg == 0 and Se == 0:
        rc = mr.aux["rho_c"]
        re = rc + (re0 - rc) * np.exp(-t / mr.tau_r)
        a = mr.aux["coherence_rate"]
        c = 2 * mr.aux["gamma0"] * Seg ** 2
        kap = np.sqrt(complex(a * a - w0 * w0))
        # exp(Mt) = e^{-at} (cosh(kt) + sinh(kt)/k (M + a)), M + a = [[-i w0, c], [c*, i w0]]
        ch = np.cosh(kap * t)
        sh = t.astype(complex) if kap == 0 else np.sinh(kap * t) / kap
        x = np.exp(-a * t) * (ch * x0 + sh * (-1j * w0 * x0 + c * np.conj(x0)))
    else:
        raise ValueError("populations and coherences are coupled: no decoupled closed form")
    out = np.zeros(t.shape + (2, 2), complex)
    out[..., 1, 1] = re
    out[..., 0, 0] = 1 - re
    out[..., 1, 0] = x
    out[..., 0, 1] = np.conj(x)
    return out


# -- comparison ----------------------------------------------------------------

def comparison_table(rows) -> list[tuple[str, float, float, float]]:
    """rows of (quantity, analytic, numeric) -> (quantity, analytic, numeric, relative deviation)."""
    out = []
    for name, a, n in rows:
        a, n = float(a), float(n)
        if np.isinf(a) and np.isinf(n):
            dev = 0.0
        else:
            dev = abs(n - a) / max(abs(a), 1e-300)
        out.append((name, a, n, dev))
    return out


def format_table(table) -> str:
    lines = [f"{'quantity':<16}{'analytic':>24}{'numeric':>24}{'rel.dev':>12}"]
    for name, a, n, dev in table:
        lines.append(f"{name:<16}{a:>24.15g}{n:>24.15g}{dev:>12.3g}")
    return "\n".join(lines)
