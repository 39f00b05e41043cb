"""Environmental correlation functions gamma_kk'(Omega) and their partners s_kk'(Omega).

Conventions: ``g(Omega) = s(Omega) - i gamma(Omega)`` with
``g(z) = (1/pi) int dTheta gamma(Theta) / (z - Theta)`` for ``Im z > 0``; on the
real axis ``s`` is the principal value of that integral. Positive Omega is
energy given to the environment (emission).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import expit

THERMAL = "thermal"
UNIFORM = "uniform"


class GridRangeError(ValueError):
    """Frequency requested outside the tabulated bath grid."""


def uniform_grid(omega_max: float, n: int = 4097) -> np.ndarray:
    """Symmetric grid on [-omega_max, omega_max]; odd n puts Omega = 0 on a node."""
    if n < 3 or omega_max <= 0:
        raise ValueError("need n >= 3 and omega_max > 0")
    return np.linspace(-omega_max, omega_max, n)


def default_omega_max(bohr_max: float, T: float | None) -> float:
    scale = bohr_max
    if T is not None and np.isfinite(T):
        scale = max(scale, 5 * T)
    return 8 * max(scale, 1e-12)


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def principal_value(f, grid) -> np.ndarray:
    """P int f(Theta)/(Omega_i - Theta) dTheta at every grid node Omega_i.

    Singularity subtraction: the regular part (f(Theta) - f(Omega))/(Omega - Theta)
    is integrated with the trapezoid rule (its value at Theta = Omega is
    -f'(Omega), from central differences) and the subtracted piece is added
    back analytically as f(Omega) ln|(Omega + M)/(M - Omega)|. ``f`` may carry
    trailing dimensions.
    """
    grid = np.asarray(grid, float)
    f = np.asarray(f)
    n = grid.size
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-9, atol=0):
        raise ValueError("principal_value needs a uniform grid")
    a, b = grid[0], grid[-1]
    w = _trapezoid_weights(n, h)
    fr = f.reshape(n, -1)

    offsets = np.arange(-(n - 1), n) * h
    kern = np.zeros(2 * n - 1)
    nz = offsets != 0
    kern[nz] = 1.0 / offsets[nz]
    # conv[i] = sum_j w_j f_j / (Omega_i - Omega_j), j != i
    conv = fftconvolve(w[:, None] * fr, kern[:, None], mode="full", axes=0)[n - 1 : 2 * n - 1]
    wsum = np.convolve(w, kern, mode="full")[n - 1 : 2 * n - 1]
    deriv = np.gradient(fr, h, axis=0)

    # log|(Omega - a)/(b - Omega)|; endpoint distances clipped to h/2
    da = np.maximum(grid - a, h / 2)
    db = np.maximum(b - grid, h / 2)
    logterm = np.log(da / db)

    out = conv - fr * wsum[:, None] - w[:, None] * deriv + fr * logterm[:, None]
    return out.reshape(f.shape)


def hilbert(f, grid) -> np.ndarray:
    """(1/pi) P int f(Theta)/(Omega - Theta) dTheta on the grid nodes."""
    return principal_value(f, grid) / np.pi


def _as_matrix_table(gamma, n):
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.ndim == 1:
        gamma = gamma[:, None, None]
    if gamma.ndim != 3 or gamma.shape[0] != n or gamma.shape[1] != gamma.shape[2]:
        raise ValueError(f"gamma table must have shape (n, K, K), got {gamma.shape}")
    return gamma


@dataclass(frozen=True)
class BathCorrelation:
    """Tabulated gamma_kk'(Omega) (and optionally s_kk'(Omega)) on a uniform grid.

    ``temperature`` is ``np.inf`` for an infinite-temperature/unspecified
    bath. ``mode`` is ``"thermal"`` (KMS enforced), ``"uniform"`` (even gamma)
    or ``None``.
    """

    grid: np.ndarray
    gamma: np.ndarray
    temperature: float = np.inf
    mode: str | None = None
    s: np.ndarray | None = None
    truncation_estimate: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.grid, float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "gamma", _as_matrix_table(self.gamma, grid.size))
        if self.s is not None:
            object.__setattr__(self, "s", _as_matrix_table(self.s, grid.size))
        if self.mode not in (None, THERMAL, UNIFORM):
            raise ValueError(f"unknown bath mode {self.mode!r}")
        if self.mode == THERMAL and not (self.temperature > 0):
            raise ValueError("thermal bath needs T > 0")
        if self.mode == UNIFORM and np.allclose(grid, -grid[::-1], atol=1e-12 * grid[-1]):
            G = self.gamma
            odd = np.max(np.abs(np.swapaxes(G[::-1], 1, 2) - G))
            if odd > 1e-10 * max(1.0, float(np.max(np.abs(G)))):
                raise ValueError(f"uniform bath needs gamma_k'k(-Omega) = gamma_kk'(Omega); violation {odd:.3g}")
        object.__setattr__(self, "_phi", self._kms_even_table())

    def _kms_even_table(self):
        """phi = gamma (1 + e^{-Omega/T}), with phi_k'k(-Omega) = phi_kk'(Omega).

        For thermal baths on symmetric grids gamma is interpolated through phi,
        so interpolated values obey KMS exactly.
        """
        if self.mode != THERMAL or not np.allclose(self.grid, -self.grid[::-1], atol=1e-12 * self.grid[-1]):
            return None
        g = self.grid
        with np.errstate(over="ignore"):
            fac = 1 + np.exp(-np.clip(g, 0, None) / self.temperature)
        phi = self.gamma * fac[:, None, None]
        neg = g < 0
        phi[neg] = np.swapaxes(phi[::-1][neg], 1, 2)
        return phi

    @property
    def K(self) -> int:
        return self.gamma.shape[1]

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def omega_max(self) -> float:
        return float(self.grid[-1])

    @property
    def thermal(self) -> bool:
        return self.mode == THERMAL

    def _interp(self, table, omega):
        omega = np.asarray(omega, float)
        lo, hi = self.grid[0], self.grid[-1]
        tol = 1e-9 * (hi - lo)
        if np.any(omega < lo - tol) or np.any(omega > hi + tol):
            raise GridRangeError(
                f"frequency outside bath grid [{lo:g}, {hi:g}]: "
                f"{omega.min():g}..{omega.max():g}"
            )
        x = np.clip((omega - lo) / self.h, 0, self.grid.size - 1)
        i = np.minimum(np.floor(x).astype(int), self.grid.size - 2)
        t = (x - i)[..., None, None]
        return (1 - t) * table[i] + t * table[i + 1]

    def gamma_at(self, omega) -> np.ndarray:
        """Interpolated gamma(omega), shape (..., K, K).

        Linear in gamma, or for thermal baths linear in the KMS-even function
        gamma (1 + e^{-Omega/T}).
        """
        if self._phi is None:
            return self._interp(self.gamma, omega)
        w = np.asarray(omega, float)
        return self._interp(self._phi, w) * expit(w / self.temperature)[..., None, None]

    def s_at(self, omega) -> np.ndarray:
        if self.s is None:
            raise ValueError("principal-value part s missing; call s_from_gamma first")
        return self._interp(self.s, omega)

    def g_at(self, omega) -> np.ndarray:
        """g = s - i gamma on the real axis."""
        return self.s_at(omega) - 1j * self.gamma_at(omega)

    def g_complex(self, z) -> np.ndarray:
        """g(z) = (1/pi) int gamma(Theta)/(z - Theta) for Im z > 0.

        Exact for the piecewise-linear interpolant of the table (zero outside
        the grid). With u_j = z - Theta_j and psi(u) = u log u the integral is
        gamma_0 log u_0 - gamma_N log u_N + (1/h) sum_j D_j psi(u_j) + gamma_0 - gamma_N,
        where D_j are second differences of the table (one-sided at the ends).
        """
        z = np.asarray(z, complex)
        if np.any(z.imag <= 0):
            raise ValueError("g_complex needs Im z > 0")
        grid, h = self.grid, self.h
        flat = z.reshape(-1)
        g2 = self.gamma.reshape(grid.size, -1)
        d2 = np.empty_like(g2)
        d2[1:-1] = g2[2:] - 2 * g2[1:-1] + g2[:-2]
        d2[0] = g2[1] - g2[0]
        d2[-1] = g2[-2] - g2[-1]
        step = self._lattice_step(flat)
        if step:
            out = self._lattice_sum(flat, step, d2)
        else:
            keep = np.any(d2 != 0, axis=1)
            nodes, dk = grid[keep], d2[keep]
            out = np.empty((flat.size, g2.shape[1]), complex)
            chunk = max(1, 4_000_000 // max(nodes.size, 1))
            for start in range(0, flat.size, chunk):
                u = flat[start : start + chunk, None] - nodes[None, :]
                out[start : start + chunk] = (u * np.log(u)) @ dk / h
        ua = np.log(flat - grid[0])[:, None]
        ub = np.log(flat - grid[-1])[:, None]
        out += ua * g2[0] - ub * g2[-1] + (g2[0] - g2[-1])
        return (out / np.pi).reshape(z.shape + (self.K, self.K))

    def _lattice_step(self, flat) -> int:
        """k if flat is z0 + m k h (m = 0, 1, ...) for integer k != 0, else 0."""
        if flat.size < 256 or np.ptp(flat.imag) != 0:
            return 0
        dz = np.diff(flat.real)
        k = dz[0] / self.h
        kr = round(k)
        if kr == 0 or abs(k - kr) > 1e-9 * abs(kr) or np.ptp(dz) > 1e-9 * self.h:
            return 0
        return int(kr)

    def _lattice_sum(self, flat, k, d2):
        """(1/h) sum_j D_j psi(z_m - Theta_j) for lattice points by one FFT convolution."""
        if k < 0:
            return self._lattice_sum(flat[::-1], -k, d2)[::-1]
        h, N = self.h, self.grid.size
        c = flat[0] - self.grid[0]
        n_max = (flat.size - 1) * k
        ell = np.arange(-(N - 1), n_max + 1)
        u = c + ell * h
        psi = u * np.log(u)
        conv = fftconvolve(psi[:, None], d2, axes=0)
        return conv[N - 1 : N + n_max : k] / h

    def moment0(self) -> np.ndarray:
        """int gamma(Theta) dTheta (trapezoid), the 1/z coefficient of pi*g(z)."""
        return np.trapezoid(self.gamma, self.grid, axis=0)

    def with_s(self) -> "BathCorrelation":
        return s_from_gamma(self)


def _check_table(bc: BathCorrelation, tol=1e-10):
    G = bc.gamma
    herm = np.max(np.abs(G - np.conj(np.swapaxes(G, 1, 2))))
    scale = max(np.max(np.abs(G)), 1e-300)
    if herm > tol * max(scale, 1.0):
        raise ValueError("gamma(Omega) is not Hermitian")
    ev = np.linalg.eigvalsh(0.5 * (G + np.conj(np.swapaxes(G, 1, 2))))
    if ev.min() < -tol * max(scale, 1.0):
        raise ValueError("gamma(Omega) is not positive semi-definite")


def kms_violation(bc: BathCorrelation, table: str = "gamma") -> float:
    """max |X_k'k(-Omega) - c e^{-Omega/T} X_kk'(Omega)| over the grid.

    For ``table="gamma"`` c = 1 (KMS of gamma); for ``table="s"`` c = -1,
    the relation the paper also states for s. The grid must be symmetric.
    """
    X = bc.gamma if table == "gamma" else bc.s
    sign = 1.0 if table == "gamma" else -1.0
    if X is None:
        raise ValueError("table missing")
    if not np.allclose(bc.grid, -bc.grid[::-1]):
        raise ValueError("KMS check needs a symmetric grid")
    boltz = np.exp(-bc.grid / bc.temperature)[:, None, None]
    mirrored = np.swapaxes(X[::-1], 1, 2)
    lhs = mirrored
    rhs = sign * boltz * X
    # only compare where both sides are representable
    ok = np.isfinite(rhs).all(axis=(1, 2))
    return float(np.max(np.abs(lhs[ok] - rhs[ok]))) if ok.any() else 0.0


def bose(omega, T):
    omega = np.asarray(omega, float)
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / np.expm1(omega / T)


def gamma_bosonic(p: float, kappa, T: float, grid) -> BathCorrelation:
    """Linear coupling to independent bosonic modes.

    gamma(Omega) = pi nu(|Omega|) |kappa(|Omega|)|^2 (1 + N(Omega)) for Omega > 0 and
    ... N(|Omega|) for Omega < 0, with nu(Omega) = Omega^p. ``kappa`` is a callable
    or a constant. At Omega = 0 the limit is taken: it is pi |kappa(0)|^2 T for
    p = 1 and 0 for p > 1.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    if p < 1:
        raise ValueError("density exponent p must be >= 1")
    grid = np.asarray(grid, float)
    kap = kappa if callable(kappa) else (lambda w, c=float(kappa): np.full_like(w, c))
    a = np.abs(grid)
    k2 = np.abs(np.asarray(kap(a), dtype=complex)) ** 2
    gam = np.zeros_like(grid)
    pos = grid > 0
    neg = grid < 0
    gam[pos] = np.pi * a[pos] ** p * k2[pos] * (1 + bose(a[pos], T))
    gam[neg] = np.pi * a[neg] ** p * k2[neg] * bose(a[neg], T)
    zero = grid == 0
    if np.any(zero):
        gam[zero] = np.pi * k2[zero] * T if p == 1 else 0.0
    bc = BathCorrelation(grid, gam, temperature=T, mode=THERMAL)
    _check_table(bc)
    return bc


def gamma_phenomenological(samples, T: float | None, grid, mode: str = THERMAL) -> BathCorrelation:
    """Extend non-negative samples of gamma(Omega >= 0) to the full grid.

    ``samples`` is either a callable gamma(Omega) for Omega >= 0 or an array of
    ``[Omega, gamma]`` rows (linear interpolation, zero beyond the last row).
    Thermal mode uses gamma(-Omega) = e^{-Omega/T} gamma(Omega); uniform mode
    makes gamma even.
    """
    grid = np.asarray(grid, float)
    a = np.abs(grid)
    if callable(samples):
        vals = np.asarray(samples(a), float)
    else:
        rows = np.asarray(samples, float)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError("samples must be rows of [Omega, gamma]")
        if np.any(rows[:, 0] < 0):
            raise ValueError("samples must be given for Omega >= 0")
        order = np.argsort(rows[:, 0])
        rows = rows[order]
        vals = np.interp(a, rows[:, 0], rows[:, 1], left=rows[0, 1], right=0.0)
    if np.any(vals < 0):
        raise ValueError("negative gamma samples")
    if mode == THERMAL:
        if T is None or not T > 0:
            raise ValueError("thermal extension needs T > 0")
        gam = np.where(grid >= 0, vals, np.exp(-a / T) * vals)
        bc = BathCorrelation(grid, gam, temperature=T, mode=THERMAL)
    elif mode == UNIFORM:
        bc = BathCorrelation(grid, vals, temperature=np.inf if T is None else T, mode=UNIFORM)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    _check_table(bc)
    return bc


def lorentzian(gamma0: float, tau_e: float, center: float = 0.0) -> Callable:
    """gamma0 / (1 + ((Omega - center) tau_e)^2), handy phenomenological shape."""
    return lambda w: gamma0 / (1 + ((np.asarray(w) - center) * tau_e) ** 2)


def s_from_gamma(bc: BathCorrelation, edge_tol: float = 1e-6) -> BathCorrelation:
    """Fill s_kk'(Omega) = (1/pi) P int gamma_kk'(Theta)/(Omega - Theta) dTheta."""
    G = bc.gamma
    scale = max(np.max(np.abs(G)), 1e-300)
    edge = max(np.max(np.abs(G[0])), np.max(np.abs(G[-1]))) / scale
    if edge > edge_tol:
        warnings.warn(
            f"gamma not decayed at grid edge (relative {edge:.2e}); s carries truncation error",
            RuntimeWarning,
            stacklevel=2,
        )
    s = hilbert(G, bc.grid)
    # s is Hermitian as a K x K matrix because gamma is
    s = 0.5 * (s + np.conj(np.swapaxes(s, 1, 2)))
    return replace(bc, s=s, truncation_estimate=float(edge))


def correlation_function(bc: BathCorrelation, t) -> np.ndarray:
    """C_kk'(t) = (1/pi) int dOmega e^{-i Omega t} gamma_kk'(Omega)."""
    t = np.atleast_1d(np.asarray(t, float))
    wg = _trapezoid_weights(bc.grid.size, bc.h)[:, None] * bc.gamma.reshape(bc.grid.size, -1)
    out = np.empty((t.size, wg.shape[1]), complex)
    chunk = max(1, 2_000_000 // bc.grid.size)
    for s in range(0, t.size, chunk):
        out[s:s + chunk] = np.exp(-1j * np.outer(t[s:s + chunk], bc.grid)) @ wg
    return out.reshape(t.size, bc.K, bc.K) / np.pi


def correlation_time(bc: BathCorrelation, k: int = 0, t_max: float | None = None, n_t: int = 4001) -> float:
    """int_0^inf |C_kk(t)| dt / |C_kk(0)|, the decay time of the correlation."""
    if t_max is None:
        t_max = np.pi / bc.h
    t = np.linspace(0, t_max, n_t)
    C = np.abs(correlation_function(bc, t)[:, k, k])
    return float(np.trapezoid(C, t) / C[0])


def gamma_from_env_exact(H_env, B_list, rho_env, eps: float, grid) -> BathCorrelation:
    """gamma_kk'(Omega) = pi <dB_k delta_eps(Omega - L_env) dB_k'>_env for a finite environment.

    <X Y>_env = Tr(X Y rho_env), dB = B - <B>, and delta_eps is a Lorentzian of
    half-width eps. Also fills s with the matching broadened principal part,
    so that g(Omega) = Tr[dB_k (Omega + i eps - L_env)^{-1} (dB_k' rho_env)].
    """
    if not eps > 0:
        raise ValueError("broadening eps must be positive")
    H_env = np.asarray(H_env, complex)
    rho_env = np.asarray(rho_env, complex)
    grid = np.asarray(grid, float)
    E, U = np.linalg.eigh(H_env)
    dB = []
    for B in B_list:
        B = np.asarray(B, complex)
        mean = np.trace(B @ rho_env)
        dB.append(U.conj().T @ (B - mean * np.eye(B.shape[0])) @ U)
    rho_e = U.conj().T @ rho_env @ U
    K = len(dB)
    nu = E[:, None] - E[None, :]  # nu[a, b] = E_a - E_b
    # weight[k, l, a, b] = (dB_k)_ba (dB_l rho)_ab
    w = np.einsum("kba,lab->klab", np.array(dB), np.array([X @ rho_e for X in dB]))
    denom = grid[:, None, None] + 1j * eps - nu[None]
    g = np.einsum("klab,nab->nkl", w, 1.0 / denom)
    # split g = s - i gamma with s, gamma Hermitian matrices
    gamma = 0.5j * (g - np.conj(np.swapaxes(g, 1, 2)))
    s = 0.5 * (g + np.conj(np.swapaxes(g, 1, 2)))
    return BathCorrelation(grid, gamma, temperature=np.inf, mode=None, s=s)
