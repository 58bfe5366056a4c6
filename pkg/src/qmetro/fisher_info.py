"""Fisher information functionals for states, measurements and channels.

State-level quantities (``qfi_state``, ``sld``, ``classical_fi``, ``povm_fi``,
``bures_distance``) follow the standard eigendecomposition formulas.  The
channel QFI comes in two flavours:

* ancilla-assisted, ``4 min_h || sum_j B_j(h)^dag B_j(h) ||`` over Hermitian
  gauge matrices ``h`` with ``B_j(h) = dK_j - i sum_i h_ji K_i``: a convex
  minimization of a largest eigenvalue, solved here by annealed smoothing
  plus accelerated gradient descent with random restarts;
* ancilla-free, ``4 sup_psi min_h Tr(psi sum_j B_j^dag B_j)``: the inner
  minimum is an exact linear least-squares problem for each pure input, and
  the outer supremum is taken over a sphere grid with local refinement.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .channel_model import OneParamChannel
from .qubit_core import (
    DensityState,
    DomainError,
    PauliTransferMap,
    ValidationError,
    require_hermitian,
)

__all__ = [
    "Povm",
    "GaugeMatrix",
    "ChannelQfiResult",
    "ConvergenceError",
    "RankDeficiencyWarning",
    "qfi_state",
    "qfi_bloch",
    "sld",
    "classical_fi",
    "povm_fi",
    "bures_distance",
    "channel_qfi_ancilla",
    "channel_qfi_no_ancilla",
    "eta_bound",
    "eta_estimate",
]

EIG_PAIR_CUTOFF = 1e-12


class ConvergenceError(RuntimeError):
    """Gauge minimization failed to self-validate across restarts."""

    def __init__(self, message, best_value=None, gap=None):
        super().__init__(message)
        self.best_value = best_value
        self.gap = gap


class RankDeficiencyWarning(RuntimeWarning):
    """The derivative has weight on eigenvalue pairs excluded by the cutoff."""


@dataclass(frozen=True, init=False)
class Povm:
    """PSD elements summing to the identity."""

    elements: tuple

    def __init__(self, elements):
        mats = tuple(require_hermitian(m, atol=1e-10, name="POVM element") for m in elements)
        dim = mats[0].shape[0]
        for m in mats:
            if np.linalg.eigvalsh(m).min() < -1e-10:
                raise ValidationError("POVM element is not PSD within 1e-10")
        if np.linalg.norm(sum(mats) - np.eye(dim)) > 1e-10:
            raise ValidationError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", mats)

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True)
class GaugeMatrix:
    """Hermitian matrix parameterizing equivalent Kraus representations."""

    h: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h", require_hermitian(self.h, name="gauge matrix"))


@dataclass(frozen=True)
class ChannelQfiResult:
    value: float
    h_opt: GaugeMatrix


# ---------------------------------------------------------------------------
# State QFI
# ---------------------------------------------------------------------------


def qfi_state(s: DensityState) -> float:
    """QFI from the eigendecomposition of rho.

    ``F = 2 sum_{i,j: li+lj > eps} |<i|drho|j>|^2 / (li + lj)``.  If ``drho``
    carries weight on excluded pairs a :class:`RankDeficiencyWarning` is
    issued.
    """
    lam, vecs = np.linalg.eigh(s.rho)
    d = vecs.conj().T @ s.drho @ vecs
    pair_sums = lam[:, None] + lam[None, :]
    mask = pair_sums > EIG_PAIR_CUTOFF
    f = 2.0 * float(np.sum(np.abs(d[mask]) ** 2 / pair_sums[mask]))
    skipped = float(np.sum(np.abs(d[~mask]) ** 2))
    if skipped > 1e-18:
        warnings.warn(
            "derivative has weight on eigenvalue pairs below the cutoff; QFI may be underestimated",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return f


def qfi_bloch(b) -> float:
    """Closed-form qubit QFI ``||dv||^2 + (v.dv)^2 / (1 - ||v||^2)``.

    Accepts a :class:`~qmetro.qubit_core.BlochState` or a ``(v, dv)`` pair.
    On the Bloch sphere (``||v|| = 1``) the derivative must be tangent
    (``|v.dv| <= 1e-9``) and the formula reduces to ``||dv||^2``.
    """
    v = np.asarray(b.v if hasattr(b, "v") else b[0], dtype=float)
    dv = np.asarray(b.dv if hasattr(b, "dv") else b[1], dtype=float)
    nv2 = float(v @ v)
    if nv2 > 1.0 + 1e-10:
        raise DomainError("Bloch vector outside the unit ball")
    radial = float(v @ dv)
    gap = 1.0 - nv2
    if gap <= 1e-14:
        if abs(radial) > 1e-9:
            raise DomainError(
                f"pure state with radial derivative {radial:.3e}: family leaves the Bloch ball"
            )
        return float(dv @ dv)
    return float(dv @ dv) + radial * radial / gap


def sld(s: DensityState) -> np.ndarray:
    """Symmetric logarithmic derivative: ``(L rho + rho L)/2 = drho`` on the support."""
    lam, vecs = np.linalg.eigh(s.rho)
    d = vecs.conj().T @ s.drho @ vecs
    pair_sums = lam[:, None] + lam[None, :]
    l_eig = np.zeros_like(d)
    mask = pair_sums > EIG_PAIR_CUTOFF
    l_eig[mask] = 2.0 * d[mask] / pair_sums[mask]
    skipped = float(np.sum(np.abs(d[~mask]) ** 2))
    if skipped > 1e-18:
        warnings.warn(
            "derivative mixes into the kernel of rho; SLD restricted to the support",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return vecs @ l_eig @ vecs.conj().T


def classical_fi(p: np.ndarray, dp: np.ndarray) -> float:
    """``sum_{i: p_i > 0} dp_i^2 / p_i`` for an outcome distribution."""
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    if p.shape != dp.shape:
        raise ValidationError("p and dp must have the same length")
    if p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-12:
        raise ValidationError("p is not a probability vector")
    if abs(dp.sum()) > 1e-10:
        raise ValidationError("dp must sum to zero")
    mask = p > 1e-15
    if np.any(np.abs(dp[~mask]) > 1e-12):
        warnings.warn(
            "zero-probability outcomes with nonzero derivative were excluded",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return float(np.sum(dp[mask] ** 2 / p[mask]))


def povm_fi(s: DensityState, m: Povm) -> float:
    """Classical FI of measuring ``s`` with the POVM; never exceeds the QFI."""
    p = np.array([np.trace(s.rho @ e).real for e in m])
    dp = np.array([np.trace(s.drho @ e).real for e in m])
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    return classical_fi(p, dp)


def _psd_sqrt(op: np.ndarray) -> np.ndarray:
    lam, vecs = np.linalg.eigh(op)
    return (vecs * np.sqrt(np.clip(lam, 0.0, None))) @ vecs.conj().T


def bures_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """``sqrt(2 (1 - Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))))``.

    The fidelity is evaluated as the nuclear norm of
    ``sqrt(rho1) sqrt(rho2)``, which is better conditioned for nearly
    rank-deficient states than diagonalizing the triple product.
    """
    rho1 = require_hermitian(rho1, atol=1e-10, name="rho1")
    rho2 = require_hermitian(rho2, atol=1e-10, name="rho2")
    fid = float(np.linalg.svd(_psd_sqrt(rho1) @ _psd_sqrt(rho2), compute_uv=False).sum())
    return float(np.sqrt(max(2.0 * (1.0 - fid), 0.0)))


# ---------------------------------------------------------------------------
# Gauge minimization (ancilla-assisted channel QFI)
# ---------------------------------------------------------------------------


def _herm_from_params(x: np.ndarray, r: int) -> np.ndarray:
    h = np.zeros((r, r), dtype=complex)
    h[np.diag_indices(r)] = x[:r]
    iu = np.triu_indices(r, 1)
    n_off = len(iu[0])
    re = x[r : r + n_off]
    im = x[r + n_off : r + 2 * n_off]
    h[iu] = re + 1j * im
    h[(iu[1], iu[0])] = re - 1j * im
    return h


class _GaugeObjective:
    """lambda_max of ``W(h) = sum_j B_j(h)^dag B_j(h)`` and its smoothed gradient."""

    def __init__(self, k_ops: np.ndarray, dk_ops: np.ndarray):
        self.k = np.asarray(k_ops, dtype=complex)
        self.dk = np.asarray(dk_ops, dtype=complex)
        self.r = self.k.shape[0]
        self.n_params = self.r * self.r
        self._iu = np.triu_indices(self.r, 1)

    def _stack(self, h: np.ndarray) -> np.ndarray:
        return self.dk - 1j * np.einsum("ji,iab->jab", h, self.k)

    def value(self, x: np.ndarray) -> float:
        b = self._stack(_herm_from_params(x, self.r))
        w = np.einsum("jab,jac->bc", b.conj(), b)
        return float(np.linalg.eigvalsh(w)[-1])

    def smooth(self, x: np.ndarray, tau: float):
        """Log-sum-exp smoothing of lambda_max; returns (value, gradient)."""
        b = self._stack(_herm_from_params(x, self.r))
        w = np.einsum("jab,jac->bc", b.conj(), b)
        lam, vecs = np.linalg.eigh(w)
        top = lam[-1]
        wts = np.exp((lam - top) / tau)
        total = wts.sum()
        f = top + tau * np.log(total)
        p_mat = (vecs * (wts / total)) @ vecs.conj().T
        c = np.einsum("iab,jac,cb->ji", self.k.conj(), b, p_mat)
        iu = self._iu
        grad = np.concatenate(
            [
                -2.0 * np.imag(np.diagonal(c)),
                -2.0 * np.imag(c[iu] + c[(iu[1], iu[0])]),
                2.0 * np.real(c[iu] - c[(iu[1], iu[0])]),
            ]
        )
        return f, grad


def _agd(obj: _GaugeObjective, x0: np.ndarray, tau: float, max_iter: int = 2000) -> np.ndarray:
    """Nesterov descent with backtracking and adaptive restart on the smoothed objective.

    Stops once the best value improves by less than 1e-10 relative over a
    window of 50 iterations.
    """
    x = x0.copy()
    y = x0.copy()
    lips = 1.0
    t_mom = 1.0
    best = np.inf
    stalled = 0
    for _ in range(max_iter):
        fy, gy = obj.smooth(y, tau)
        while True:
            x_new = y - gy / lips
            fx, _ = obj.smooth(x_new, tau)
            step = x_new - y
            if fx <= fy + gy @ step + 0.5 * lips * (step @ step) + 1e-18 or lips > 1e18:
                break
            lips *= 2.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x_new + ((t_mom - 1.0) / t_new) * (x_new - x)
        x, t_mom = x_new, t_new
        lips = max(lips / 1.5, 1e-12)
        if fx < best * (1.0 - 1e-10) - 1e-300:
            best = fx
            stalled = 0
        else:
            best = min(best, fx)
            stalled += 1
        if stalled >= 50:
            break
        if fx > fy:
            y = x.copy()
            t_mom = 1.0
    return x


def channel_qfi_ancilla(
    ch: OneParamChannel, seed: int = 0, restarts: int = 10
) -> ChannelQfiResult:
    """Ancilla-assisted channel QFI ``4 min_h || sum_j B_j(h)^dag B_j(h) ||``.

    The convex objective is annealed through a log-sum-exp smoothing ladder
    (``tau`` from 1e-1 to 1e-9 of the problem scale) and each stage is solved
    by accelerated first-order descent; ``restarts`` random initial gauges
    guard against premature stalls.  Raises :class:`ConvergenceError` when the
    restarts disagree beyond 1e-7 relative.
    """
    k_ops = np.array([p.k for p in ch.kraus])
    dk_ops = np.array([p.dk for p in ch.kraus])
    obj = _GaugeObjective(k_ops, dk_ops)
    rng = np.random.default_rng(seed)
    scale = max(obj.value(np.zeros(obj.n_params)), 1e-30)
    if scale < 1e-24:
        return ChannelQfiResult(0.0, GaugeMatrix(np.zeros((obj.r, obj.r))))
    h_scale = np.sqrt(scale)
    taus = scale * np.logspace(-1, -9, 9)
    values = []
    best_val, best_x = np.inf, None
    for trial in range(max(restarts, 1)):
        x = (
            np.zeros(obj.n_params)
            if trial == 0
            else rng.normal(scale=h_scale, size=obj.n_params)
        )
        for tau in taus:
            x = _agd(obj, x, tau)
        val = obj.value(x)
        values.append(val)
        if val < best_val:
            best_val, best_x = val, x
    spread = (max(values) - min(values)) / max(min(values), 1e-30)
    if spread > 1e-7:
        raise ConvergenceError(
            f"gauge minimization restarts disagree (relative spread {spread:.2e})",
            best_value=4.0 * best_val,
            gap=spread,
        )
    return ChannelQfiResult(4.0 * best_val, GaugeMatrix(_herm_from_params(best_x, obj.r)))


# ---------------------------------------------------------------------------
# Ancilla-free channel QFI
# ---------------------------------------------------------------------------


def _inner_min(k_ops: np.ndarray, dk_ops: np.ndarray, psi: np.ndarray) -> float:
    """Exact ``min_h Tr(psi sum_j B_j^dag B_j)`` for a pure input (least squares).

    For fixed ``|psi>`` the objective is ``sum_j ||dK_j psi - i sum_i h_ji K_i psi||^2``,
    a real linear least-squares problem in the entries of Hermitian ``h``.
    """
    r = k_ops.shape[0]
    y = (dk_ops @ psi).reshape(-1)
    xs = k_ops @ psi  # shape (r, d)
    d = xs.shape[1]
    iu, ju = np.triu_indices(r, 1)
    cols = []
    for i in range(r):  # diagonal params
        col = np.zeros((r, d), dtype=complex)
        col[i] = -1j * xs[i]
        cols.append(col.reshape(-1))
    for i, j in zip(iu, ju):  # real off-diagonal params
        col = np.zeros((r, d), dtype=complex)
        col[i] = -1j * xs[j]
        col[j] = -1j * xs[i]
        cols.append(col.reshape(-1))
    for i, j in zip(iu, ju):  # imaginary off-diagonal params
        col = np.zeros((r, d), dtype=complex)
        col[i] = xs[j]
        col[j] = -xs[i]
        cols.append(col.reshape(-1))
    a = np.column_stack(cols)
    a_real = np.vstack([a.real, a.imag])
    y_real = np.concatenate([y.real, y.imag])
    # rcond truncates noise directions of the (possibly rank-deficient) design
    # matrix; keeping them blows up the solution and corrupts the residual
    sol = np.linalg.lstsq(a_real, -y_real, rcond=1e-12)[0]
    return float(np.linalg.norm(a_real @ sol + y_real) ** 2)


def _sphere_grid(n: int) -> np.ndarray:
    """Fibonacci grid of pure-state angles (theta, phi)."""
    idx = np.arange(n) + 0.5
    theta = np.arccos(1.0 - 2.0 * idx / n)
    phi = np.pi * (1.0 + np.sqrt(5.0)) * idx
    return np.column_stack([theta, phi % (2.0 * np.pi)])


def channel_qfi_no_ancilla(ch: OneParamChannel, grid: int = 400) -> float:
    """Ancilla-free channel QFI ``4 sup_psi min_h Tr(psi . )`` for a qubit channel.

    The inner minimization is exact for each pure input; the outer supremum
    uses a Fibonacci sphere grid followed by Nelder-Mead refinement from the
    best grid points.
    """
    if ch.dim != 2:
        raise ValidationError("channel_qfi_no_ancilla expects a qubit channel")
    k_ops = np.array([p.k for p in ch.kraus])
    dk_ops = np.array([p.dk for p in ch.kraus])

    def psi_of(angles):
        th, ph = angles
        return np.array([np.cos(th / 2.0), np.exp(1j * ph) * np.sin(th / 2.0)])

    def neg_obj(angles):
        return -_inner_min(k_ops, dk_ops, psi_of(angles))

    pts = _sphere_grid(grid)
    vals = np.array([-neg_obj(p) for p in pts])
    order = np.argsort(vals)[::-1]
    best = vals[order[0]]
    for start in order[:3]:
        res = minimize(
            neg_obj,
            pts[start],
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 400},
        )
        best = max(best, -res.fun)
    return 4.0 * float(best)


# ---------------------------------------------------------------------------
# QFI contraction coefficient
# ---------------------------------------------------------------------------


def eta_bound(ptm: PauliTransferMap) -> float:
    """Trace-norm contraction coefficient: the largest singular value of T.

    For qubit channels this upper-bounds the QFI contraction coefficient; it
    is below 1 exactly for strictly contractive channels.
    """
    return float(np.linalg.svd(ptm.T, compute_uv=False).max())


def eta_estimate(ptm: PauliTransferMap, trials: int, seed: int = 0) -> float:
    """Sampled lower estimate of ``sup F(N(sigma_theta)) / F(sigma_theta)``.

    States are drawn with ``||v|| <= 0.99`` and a unit derivative whose
    radial component is projected out near the boundary, keeping the family
    inside the Bloch ball and the ratio well conditioned.
    """
    if trials < 1:
        raise DomainError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        radius = 0.99 * rng.uniform() ** (1.0 / 3.0)
        v = radius * direction
        dv = rng.normal(size=3)
        dv /= np.linalg.norm(dv)
        if radius > 0.95:
            dv = dv - (direction @ dv) * direction
            norm = np.linalg.norm(dv)
            if norm < 1e-12:
                continue
            dv /= norm
        denom = qfi_bloch((v, dv))
        if denom < 1e-12:
            continue
        num = qfi_bloch((ptm.apply_bloch(v), ptm.T @ dv))
        best = max(best, num / denom)
    return best
