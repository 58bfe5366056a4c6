"""Simulators for the metrological strategies compared in the worked example.

Every protocol propagates a Bloch vector and its parameter derivative
analytically (finite differences are reserved for test oracles).  For a
dephasing family the one-step update under a control ``(t_k, T_k)`` is

    ``v_k  = t_k + T_k M v_{k-1}``
    ``dv_k = T_k D v_{k-1} + T_k M dv_{k-1}``

with ``M = diag(1-2p, 1-2p, 1)`` and the drive matrix ``D`` assembled from
``Tr(G± {X,Y,Z})`` and ``pdot``.  The QEC protocol is the exception: it
propagates the full two-qubit density matrix and its derivative through the
repetition-code recovery channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel_model import (
    DephasingFamily,
    NotApplicableError,
    OneParamChannel,
)
from .fisher_info import Povm, povm_fi, qfi_bloch, qfi_state
from .qubit_core import (
    I2,
    X,
    Y,
    Z,
    BlochState,
    DensityState,
    DomainError,
    PauliTransferMap,
    ValidationError,
    bloch_to_density,
    choi_from_ptm,
    ptm_derivative_from_kraus,
    ptm_from_kraus,
    validate_cptp,
)

__all__ = [
    "ControlSequence",
    "ProtocolResult",
    "BlochKernel",
    "simulate_sequence",
    "sql_control_ptm",
    "sql_protocol",
    "sql_asymptotic",
    "repeated_measurement",
    "spam_fi",
    "spam_povm",
    "qec_repetition_sim",
    "qec_analytic",
    "no_control_fixed_point",
    "SQL_VARIANTS",
]

SQL_VARIANTS = ("g0x", "g0y", "g1x", "g1y")


@dataclass(frozen=True, init=False)
class ControlSequence:
    """Constant or per-step interleaved controls as Pauli transfer maps."""

    maps: tuple
    constant: bool

    def __init__(self, maps, constant: bool | None = None):
        if isinstance(maps, PauliTransferMap):
            maps = (maps,)
            constant = True
        else:
            maps = tuple(maps)
            if constant is None:
                constant = len(maps) == 1
        if not maps:
            raise ValidationError("ControlSequence needs at least one map")
        for m in maps:
            if not m.validated:
                report = validate_cptp(choi_from_ptm(m))
                if not (report.is_cp and report.is_tp):
                    raise ValidationError("control map is not CPTP")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "constant", bool(constant))

    @staticmethod
    def identity() -> "ControlSequence":
        return ControlSequence(PauliTransferMap.identity())

    def at(self, k: int) -> PauliTransferMap:
        if self.constant:
            return self.maps[0]
        return self.maps[k]

    def require_length(self, n: int):
        if not self.constant and len(self.maps) < n:
            raise ValidationError(f"need {n} controls, have {len(self.maps)}")


@dataclass(frozen=True)
class ProtocolResult:
    """Outcome of one protocol run."""

    n: int
    qfi_or_fi: float
    meta: dict = field(default_factory=dict)
    terminal: BlochState | None = None
    trajectory: tuple | None = None

    def __post_init__(self):
        if self.qfi_or_fi < -1e-12:
            raise ValidationError("qfi_or_fi must be nonnegative")

    def csv_row(self, protocol: str) -> str:
        parts = [protocol, str(self.n)]
        parts += [f"{key}={self.meta[key]!r}" for key in sorted(self.meta)]
        parts.append(format(self.qfi_or_fi, ".17g"))
        return ",".join(parts)


@dataclass(frozen=True)
class BlochKernel:
    """Bloch-space data (T, dT; t, dt) of a one-parameter qubit channel at theta=0."""

    t: np.ndarray
    T: np.ndarray
    dt: np.ndarray
    dT: np.ndarray

    @staticmethod
    def from_family(fam: DephasingFamily) -> "BlochKernel":
        p = fam.p
        m = np.diag([1.0 - 2.0 * p, 1.0 - 2.0 * p, 1.0])
        gp, gm = fam.g_plus, fam.g_minus
        tx, ty, tz = (np.trace(gm @ s).real for s in (X, Y, Z))
        px, py = (np.trace(gp @ s).real for s in (X, Y))
        d = np.array(
            [
                [-2.0 * fam.pdot, -tz, ty],
                [tz, -2.0 * fam.pdot, -tx],
                [-py, px, 0.0],
            ]
        )
        return BlochKernel(np.zeros(3), m, np.zeros(3), d)

    @staticmethod
    def from_channel(ch: OneParamChannel) -> "BlochKernel":
        if ch.dim != 2:
            raise ValidationError("BlochKernel needs a qubit channel")
        ptm = ptm_from_kraus(ch.kraus_set())
        dt, dT = ptm_derivative_from_kraus((p.k, p.dk) for p in ch.kraus)
        return BlochKernel(ptm.t, ptm.T, dt, dT)

    def step(self, control: PauliTransferMap, v: np.ndarray, dv: np.ndarray):
        """One channel application followed by the control (value and derivative)."""
        v_mid = self.t + self.T @ v
        dv_mid = self.dt + self.dT @ v + self.T @ dv
        return control.t + control.T @ v_mid, control.T @ dv_mid


def _kernel_of(fam) -> BlochKernel:
    if isinstance(fam, DephasingFamily):
        return BlochKernel.from_family(fam)
    if isinstance(fam, OneParamChannel):
        return BlochKernel.from_channel(fam)
    if isinstance(fam, BlochKernel):
        return fam
    raise ValidationError(f"unsupported channel description: {type(fam).__name__}")


def simulate_sequence(
    fam,
    controls: ControlSequence,
    v0: BlochState,
    n: int,
    record_trajectory: bool = False,
) -> ProtocolResult:
    """Propagate (v, dv) through ``n`` channel applications with interleaved controls.

    Returns the QFI of the terminal state.  Trajectory recording is opt-in so
    that long runs stay allocation-light.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    kernel = _kernel_of(fam)
    controls.require_length(n)
    v = np.array(v0.v, dtype=float)
    dv = np.array(v0.dv, dtype=float)
    traj = [BlochState(v.copy(), dv.copy())] if record_trajectory else None
    for k in range(n):
        v, dv = kernel.step(controls.at(k), v, dv)
        if record_trajectory:
            traj.append(BlochState(v.copy(), dv.copy()))
    return ProtocolResult(
        n=n,
        qfi_or_fi=qfi_bloch((v, dv)),
        terminal=BlochState(v, dv),
        trajectory=tuple(traj) if record_trajectory else None,
    )


# ---------------------------------------------------------------------------
# The SQL-achieving unitary-control protocol
# ---------------------------------------------------------------------------


def _variant_trace(fam: DephasingFamily, variant: str) -> float:
    table = {
        "g0x": (fam.g0, X),
        "g0y": (fam.g0, Y),
        "g1x": (fam.g1, X),
        "g1y": (fam.g1, Y),
    }
    if variant not in table:
        raise DomainError(f"variant must be one of {SQL_VARIANTS}, got {variant!r}")
    g, s = table[variant]
    return float(np.trace(g @ s).real)


def sql_control_ptm(variant: str, phi: float) -> PauliTransferMap:
    """Bloch rotation of the constant control ``exp(-i phi A / 2)`` (times Z for G1 variants)."""
    c, s = np.cos(phi), np.sin(phi)
    if variant in ("g0x", "g1x"):
        rot = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    else:
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if variant in ("g1x", "g1y"):
        rot = rot @ np.diag([-1.0, -1.0, 1.0])
    return PauliTransferMap(np.zeros(3), rot, validated=True)


def sql_protocol(
    fam: DephasingFamily,
    n: int,
    w: float,
    variant: str = "g0x",
    z0: float = 1.0,
    v0: BlochState | None = None,
) -> ProtocolResult:
    """Constant-unitary-control protocol achieving the SQL when RGNKS holds.

    Applies ``U = exp(-i sqrt(w/n) A / 2)`` (``A`` the variant's Pauli axis,
    with an extra Z factor for the G1 variants) after each channel use,
    starting from ``(0, 0, z0)``.
    """
    if w <= 0.0:
        raise DomainError("w must be positive")
    if not 0.0 < z0 <= 1.0:
        raise DomainError("z0 must lie in (0, 1]")
    if n < 1:
        raise DomainError("n must be at least 1")
    if abs(_variant_trace(fam, variant)) < 1e-12:
        raise NotApplicableError(f"variant {variant}: the driving trace vanishes, no signal")
    control = ControlSequence(sql_control_ptm(variant, np.sqrt(w / n)))
    start = v0 if v0 is not None else BlochState(np.array([0.0, 0.0, z0]), np.zeros(3))
    result = simulate_sequence(fam, control, start, n)
    return ProtocolResult(
        n=result.n,
        qfi_or_fi=result.qfi_or_fi,
        meta={"w": w, "variant": variant, "z0": z0},
        terminal=result.terminal,
    )


def sql_asymptotic(fam: DephasingFamily, w: float, variant: str = "g0x", z0: float = 1.0) -> float:
    """Leading QFI-per-step coefficient of the unitary-control protocol.

    For the G0 variants:
    ``((1-p)^2/p^2) w / (z0^{-2} e^{(1-p) w / p} - 1) Tr(G0 A)^2``;
    for the G1 variants the roles of ``p`` and ``1-p`` swap.
    """
    if w <= 0.0:
        raise DomainError("w must be positive")
    if not 0.0 < z0 <= 1.0:
        raise DomainError("z0 must lie in (0, 1]")
    tr = _variant_trace(fam, variant)
    if abs(tr) < 1e-12:
        raise NotApplicableError(f"variant {variant}: the driving trace vanishes, no signal")
    p = fam.p
    if variant.startswith("g0"):
        ratio, expo = (1.0 - p) / p, (1.0 - p) * w / p
    else:
        ratio, expo = p / (1.0 - p), p * w / (1.0 - p)
    return float(ratio**2 * w / (np.exp(expo) / z0**2 - 1.0) * tr * tr)


# ---------------------------------------------------------------------------
# Repeated measurement and SPAM-noisy readout
# ---------------------------------------------------------------------------


def repeated_measurement(
    fam: DephasingFamily, n: int, interval: int, v0: BlochState | None = None
) -> ProtocolResult:
    """Reset-and-measure protocol: optimal measurement every ``interval`` steps.

    The FI is the number of completed intervals times the QFI accumulated in
    one interval; remainder steps are dropped and recorded in the metadata.
    """
    if interval < 1:
        raise DomainError("interval must be at least 1")
    if n < 0:
        raise DomainError("n must be nonnegative")
    start = v0 if v0 is not None else BlochState(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    per_interval = simulate_sequence(fam, ControlSequence.identity(), start, interval)
    blocks = n // interval
    return ProtocolResult(
        n=n,
        qfi_or_fi=blocks * per_interval.qfi_or_fi,
        meta={
            "interval": interval,
            "blocks": blocks,
            "remainder": n % interval,
            "per_interval_qfi": per_interval.qfi_or_fi,
        },
    )


def spam_fi(
    fam: DephasingFamily,
    n: int,
    w: float,
    q: float,
    variant: str = "g0x",
) -> float:
    """FI of the unitary-control protocol under SPAM noise of rate ``q``.

    The input state is ``(1-q)|0><0| + q|1><1|`` and the readout is the fixed
    binary POVM ``{M, I - M}`` with ``M = (1-q)|0><0| + q|1><1|``.
    """
    if not 0.0 <= q <= 0.5:
        raise DomainError("q must lie in [0, 1/2]")
    z0 = 1.0 - 2.0 * q
    if z0 <= 0.0:
        return 0.0  # input is maximally mixed and the POVM element is I/2
    result = sql_protocol(fam, n, w, variant=variant, z0=z0)
    return povm_fi(bloch_to_density(result.terminal), spam_povm(q))


def spam_povm(q: float) -> Povm:
    """The fixed SPAM readout POVM ``{(1-q)|0><0| + q|1><1|, complement}``."""
    m = (1.0 - q) * np.array([[1, 0], [0, 0]], dtype=complex) + q * np.array(
        [[0, 0], [0, 1]], dtype=complex
    )
    return Povm([m, I2 - m])


# ---------------------------------------------------------------------------
# Two-qubit repetition-code QEC protocol
# ---------------------------------------------------------------------------


def qec_repetition_sim(p: float, n: int) -> ProtocolResult:
    """Error-corrected estimation of the dephasing + X-rotation channel.

    Input ``(|+>|0>_A + |->|1>_A)/sqrt(2)``; each step applies the channel to
    the probe qubit, measures the syndrome ``X x Z_A`` and applies
    ``Z x I`` on outcome -1.  The recovery is realized as the deterministic
    sum over syndrome branches, and the terminal QFI reproduces
    ``4 (1-2p)^2 n^2``.
    """
    if not 0.0 < p <= 0.5:
        raise DomainError("p must lie in (0, 1/2]")
    if n < 0:
        raise DomainError("n must be nonnegative")
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    e0 = np.array([1.0, 0.0])
    e1 = np.array([0.0, 1.0])
    psi0 = (np.kron(plus, e0) + np.kron(minus, e1)) / np.sqrt(2.0)
    rho = np.outer(psi0, psi0.conj()).astype(complex)
    drho = np.zeros((4, 4), dtype=complex)
    z1 = np.kron(Z, I2)
    x1 = np.kron(X, I2)
    syndrome = np.kron(X, Z)
    lam, vecs = np.linalg.eigh(syndrome)
    p_plus = vecs[:, lam > 0] @ vecs[:, lam > 0].conj().T
    p_minus = vecs[:, lam < 0] @ vecs[:, lam < 0].conj().T

    def dephase(op):
        return (1.0 - p) * op + p * (z1 @ op @ z1)

    def recover(op):
        return p_plus @ op @ p_plus + z1 @ (p_minus @ op @ p_minus) @ z1

    for _ in range(n):
        mid = dephase(rho)
        dmid = dephase(drho) - 1j * (x1 @ mid - mid @ x1)
        rho = recover(mid)
        drho = recover(dmid)
    qfi = qfi_state(DensityState(rho, drho))
    return ProtocolResult(n=n, qfi_or_fi=qfi, meta={"p": p, "code": "two_qubit_repetition"})


def qec_analytic(p: float, n: int) -> float:
    """Heisenberg-limited QFI ``4 (1-2p)^2 n^2`` of the repetition-code protocol."""
    if not 0.0 < p <= 0.5:
        raise DomainError("p must lie in (0, 1/2]")
    if n < 0:
        raise DomainError("n must be nonnegative")
    return 4.0 * (1.0 - 2.0 * p) ** 2 * n * n


def no_control_fixed_point(fam: DephasingFamily, z0: float = 1.0) -> float:
    """Large-n QFI constant of the control-free, measurement-free protocol.

    From ``v = (0, 0, z0)`` the transverse derivative converges to the fixed
    point of ``dv -> d + (1-2p) dv``, giving
    ``z0^2 (Tr(G- X)^2 + Tr(G- Y)^2) / (4 p^2)``.
    """
    gm = fam.g_minus
    tx = np.trace(gm @ X).real
    ty = np.trace(gm @ Y).real
    return float(z0 * z0 * (tx * tx + ty * ty) / (4.0 * fam.p * fam.p))
