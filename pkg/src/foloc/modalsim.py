"""Closed-form modal response of a stable LTI system to sinusoidal forcing.

The system ``x' = A x + B u``, ``y = C x`` starts at rest and input ``l``
carries ``P sin(w_d t)``. Diagonalizing ``A`` splits each output into

* one term per real eigenvalue (decaying exponential plus a forced sinusoid),
* one "beat" term per complex-conjugate pair,
* for pairs whose frequency sits near the forcing frequency, the resonance
  approximation ``P |a| / sigma (1 - exp(-sigma t)) sin(w_d t + angle(a))``,

where ``a = c_k r_i l_i b_l`` is the modal residue. Stacking the resonance
terms of all outputs gives a matrix that factors through two time functions,
hence has rank at most two per resonant pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

POOR_DAMPING_RATIO = 0.05


class ModalError(ValueError):
    pass


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        B = np.array(self.B, dtype=float)
        C = np.array(self.C, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ModalError(f"A must be square, got {A.shape}")
        if B.ndim == 1:
            B = B.reshape(n, -1)
        if C.ndim == 1:
            C = C.reshape(-1, n)
        if B.shape[0] != n or C.shape[1] != n:
            raise ModalError(f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
        for name, M in (("A", A), ("B", B), ("C", C)):
            if not np.all(np.isfinite(M)):
                raise ModalError(f"{name} has non-finite entries")
            M.flags.writeable = False
        lam = np.linalg.eigvals(A)
        if np.any(lam.real >= 0):
            raise ModalError(f"system is not stable: max Re(lambda) = {lam.real.max():.3g}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def transfer(self, s: complex, k: int, l: int) -> complex:
        """Direct resolvent evaluation ``c_k (sI - A)^-1 b_l``."""
        n = self.n_states
        x = np.linalg.solve(s * np.eye(n) - self.A, self.B[:, l].astype(complex))
        return complex(self.C[k] @ x)


@dataclass(frozen=True)
class EigenStructure:
    """Eigenvalues with right (columns) and left (rows) eigenvectors, ``L R = I``.

    ``real_idx`` and ``pair_idx`` index the real eigenvalues and one
    representative (positive imaginary part) of each conjugate pair. The
    resonance split into ``beat_idx`` and ``resonant_idx`` is filled by
    :func:`classify_modes`.
    """

    lambdas: np.ndarray
    right_vecs: np.ndarray
    left_vecs: np.ndarray
    real_idx: tuple
    pair_idx: tuple
    omega_d: float | None = None
    target_idx: int | None = None
    kappa: float | None = None
    beat_idx: tuple | None = None
    resonant_idx: tuple | None = None
    reconstruction_error: float = 0.0

    @property
    def classified(self) -> bool:
        return self.beat_idx is not None

    def sigma(self, i: int) -> float:
        return -float(self.lambdas[i].real)

    def omega(self, i: int) -> float:
        return float(self.lambdas[i].imag)


def eigendecompose(sys: LtiSystem, omega_d: float | None = None, *, kappa: float | None = None,
                   omega_target: float | None = None, distinct_tol: float = 1e-9) -> EigenStructure:
    """Diagonalize ``A`` and index its real eigenvalues and conjugate pairs.

    Right eigenvectors have unit 2-norm; left eigenvectors are the rows of
    the inverse of the right-eigenvector matrix. If ``omega_d`` is given, the
    modes are also classified as beat or resonant (see :func:`classify_modes`).
    """
    A = sys.A
    lam, R = np.linalg.eig(A)
    scale = max(float(np.max(np.abs(lam))), np.finfo(float).tiny)
    n = lam.size
    if n > 1:
        gaps = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= distinct_tol * scale:
            raise ModalError("distinct-eigenvalue assumption violated "
                             f"(closest pair {gaps.min():.3g} apart)")
    imag_tol = 1e-12 * scale
    real_mask = np.abs(lam.imag) <= imag_tol
    lam = np.where(real_mask, lam.real + 0j, lam)
    R = R.astype(complex)
    R[:, real_mask] = R[:, real_mask].real
    R /= np.linalg.norm(R, axis=0)
    Lv = np.linalg.inv(R)
    recon = R @ np.diag(lam) @ Lv
    err = float(np.linalg.norm(recon - A) / max(np.linalg.norm(A), np.finfo(float).tiny))
    real_idx = tuple(int(i) for i in np.flatnonzero(real_mask))
    pair_idx = tuple(int(i) for i in np.flatnonzero(lam.imag > imag_tol))
    if len(real_idx) + 2 * len(pair_idx) != n:
        raise ModalError("eigenvalues of a real matrix failed to pair into conjugates")
    eig = EigenStructure(lam, R, Lv, real_idx, pair_idx, reconstruction_error=err)
    if omega_d is not None:
        eig = classify_modes(eig, omega_d, kappa=kappa, omega_target=omega_target)
    return eig


def resonance_target(eig: EigenStructure, omega_d: float,
                     max_damping: float = POOR_DAMPING_RATIO) -> int | None:
    """Index of the poorly damped pair whose frequency is nearest ``omega_d``."""
    best = None
    for i in eig.pair_idx:
        lam = eig.lambdas[i]
        if -lam.real / abs(lam) >= max_damping:
            continue
        gap = abs(lam.imag - abs(omega_d))
        if best is None or gap < best[0]:
            best = (gap, i)
    return None if best is None else best[1]


def default_kappa(sigma_target: float, omega_target: float) -> float:
    return 0.5 * sigma_target + 0.02 * omega_target


def classify_modes(eig: EigenStructure, omega_d: float, *, kappa: float | None = None,
                   omega_target: float | None = None) -> EigenStructure:
    """Split the conjugate pairs into beat modes and resonant modes.

    A pair is resonant when its frequency lies within ``kappa`` of the target
    frequency. The target defaults to the poorly damped pair nearest the
    forcing frequency; with no such pair nothing is resonant.
    """
    target = None
    if omega_target is None:
        target = resonance_target(eig, omega_d)
        if target is not None:
            omega_target = eig.omega(target)
    if omega_target is None:
        return replace(eig, omega_d=float(omega_d), target_idx=None, kappa=kappa,
                       beat_idx=eig.pair_idx, resonant_idx=())
    if kappa is None:
        if target is None:
            target = min(eig.pair_idx, key=lambda i: abs(eig.omega(i) - omega_target),
                         default=None)
        sigma_t = eig.sigma(target) if target is not None else 0.0
        kappa = default_kappa(sigma_t, omega_target)
    if kappa < 0:
        raise ModalError(f"kappa must be nonnegative, got {kappa}")
    resonant = tuple(i for i in eig.pair_idx if abs(eig.omega(i) - omega_target) <= kappa)
    beat = tuple(i for i in eig.pair_idx if i not in resonant)
    return replace(eig, omega_d=float(omega_d), target_idx=target, kappa=float(kappa),
                   beat_idx=beat, resonant_idx=resonant)


def transfer_residues(sys: LtiSystem, eig: EigenStructure, k: int, l: int) -> np.ndarray:
    """Residues ``c_k r_i l_i b_l`` of the transfer function, one per eigenvalue."""
    if not 0 <= k < sys.n_outputs or not 0 <= l < sys.n_inputs:
        raise IndexError(f"output {k} / input {l} out of range")
    return (sys.C[k] @ eig.right_vecs) * (eig.left_vecs @ sys.B[:, l])


def residue_matrix(sys: LtiSystem, eig: EigenStructure, l: int,
                   outputs: Sequence[int] | None = None) -> np.ndarray:
    """Residues for several outputs at once, shape ``(len(outputs), n)``."""
    outputs = range(sys.n_outputs) if outputs is None else list(outputs)
    if not 0 <= l < sys.n_inputs:
        raise IndexError(f"input {l} out of range")
    Cr = sys.C[list(outputs)] @ eig.right_vecs
    return Cr * (eig.left_vecs @ sys.B[:, l])[None, :]


@dataclass(frozen=True)
class ForcedInput:
    """Periodic injection on input ``input_index``: sum of ``P sin(omega t + theta)``."""

    input_index: int
    components: tuple

    def __post_init__(self):
        comps = tuple((float(P), float(w), float(th)) for P, w, th in self.components)
        if not comps:
            raise ModalError("forcing needs at least one frequency component")
        for P, w, _ in comps:
            if P == 0 or w == 0:
                raise ModalError("forcing amplitude and frequency must be nonzero")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, input_index: int, P: float, omega: float, theta: float = 0.0):
        return cls(input_index, ((P, omega, theta),))

    @property
    def amplitude(self) -> float:
        return self.components[0][0]

    @property
    def omega(self) -> float:
        return self.components[0][1]

    def signal(self, t):
        t = np.asarray(t, dtype=float)
        return sum(P * np.sin(w * t + th) for P, w, th in self.components)


def sample_times(duration_s: float, fs: float) -> np.ndarray:
    """``0, 1/fs, ..., floor(duration * fs) / fs``."""
    if fs <= 0 or duration_s < 0:
        raise ModalError("need fs > 0 and duration >= 0")
    return np.arange(int(math.floor(duration_s * fs + 1e-9)) + 1) / fs


# -- per-mode closed forms ---------------------------------------------------

def _check_pole(lam: complex, omega: float):
    if abs(lam * lam + omega * omega) <= 1e-14 * max(abs(lam) ** 2, omega ** 2):
        raise ModalError(f"forcing frequency {omega} hits a removable singularity at lambda={lam}")


def pole_response(a: complex, lam: complex, P: float, omega: float, theta: float, t) -> np.ndarray:
    """Zero-state response of ``a / (s - lam)`` to ``P sin(omega t + theta)``, complex valued.

    Summing over all eigenvalues (including conjugates) gives a real signal.
    """
    _check_pole(lam, omega)
    t = np.asarray(t, dtype=float)
    el = np.exp(lam * t)
    plus = np.exp(1j * theta) * (np.exp(1j * omega * t) - el) / (1j * omega - lam)
    minus = np.exp(-1j * theta) * (np.exp(-1j * omega * t) - el) / (-1j * omega - lam)
    return a * P * (plus - minus) / 2j


def real_phase(lam: float, omega: float) -> float:
    """Phase of the forced sinusoid produced by a real eigenvalue."""
    return float(np.angle(-lam - 1j * omega))


def real_mode_component(a: float, lam: float, P: float, omega: float, t) -> np.ndarray:
    """Response through a real eigenvalue to ``P sin(omega t)``."""
    _check_pole(lam, omega)
    a = float(np.real(a))
    lam = float(np.real(lam))
    t = np.asarray(t, dtype=float)
    den = lam * lam + omega * omega
    return (a * P * omega / den * np.exp(lam * t)
            + a * P / math.sqrt(den) * np.sin(omega * t + real_phase(lam, omega)))


@dataclass(frozen=True)
class PairPhases:
    theta: float   # angle of the residue
    psi: float     # transient phase shift
    phi: float     # forced-response denominator phase
    alpha: float   # forced-response numerator phase
    transient_amp: float
    forced_amp: float


def pair_phases(a: complex, lam: complex, P: float, omega: float) -> PairPhases:
    sigma, wi = -lam.real, lam.imag
    theta = float(np.angle(a))
    mag = abs(a)
    c, s = math.cos(theta), math.sin(theta)
    psi = float(np.angle(sigma ** 2 + omega ** 2 - wi ** 2 - 2j * sigma * wi))
    phi = float(np.angle(sigma ** 2 - omega ** 2 + wi ** 2 - 2j * omega * sigma))
    alpha = float(np.angle(omega * c + 1j * (sigma * c - wi * s)))
    tr = 2 * P * omega * mag / math.hypot(sigma ** 2 + omega ** 2 - wi ** 2, 2 * wi * sigma)
    fo = (2 * P * mag * math.hypot(omega * c, sigma * c - wi * s)
          / math.hypot(sigma ** 2 - omega ** 2 + wi ** 2, 2 * omega * sigma))
    return PairPhases(theta, psi, phi, alpha, tr, fo)


def beat_component(a: complex, lam: complex, P: float, omega: float, t) -> np.ndarray:
    """Response through a conjugate pair (representative ``lam``) to ``P sin(omega t)``."""
    _check_pole(lam, omega)
    t = np.asarray(t, dtype=float)
    ph = pair_phases(a, lam, P, omega)
    return (ph.transient_amp * np.exp(lam.real * t) * np.cos(lam.imag * t + ph.theta - ph.psi)
            + ph.forced_amp * np.cos(omega * t + ph.phi - ph.alpha))


def resonance_component(a: complex, lam: complex, P: float, omega: float, t) -> np.ndarray:
    """Near-resonance approximation of :func:`beat_component`."""
    sigma = -lam.real
    t = np.asarray(t, dtype=float)
    return P * abs(a) / sigma * (1 - np.exp(-sigma * t)) * np.sin(omega * t + np.angle(a))


def resonance_envelope(a: complex, lam: complex, P: float, t) -> np.ndarray:
    sigma = -lam.real
    return P * abs(a) / sigma * (1 - np.exp(-sigma * np.asarray(t, dtype=float)))


# -- multi-output assembly ---------------------------------------------------

@dataclass(frozen=True)
class ModalComponents:
    """Per-output, per-mode time series of a forced response.

    ``real``: (outputs, len(real_idx), T); ``beat``: exact pair terms for every
    pair, (outputs, len(pair_idx), T); ``resonance``: the approximation for
    the resonant pairs only, (outputs, len(resonant_idx), T).
    """

    t: np.ndarray
    outputs: tuple
    real_idx: tuple
    pair_idx: tuple
    beat_idx: tuple
    resonant_idx: tuple
    residues: np.ndarray
    real: np.ndarray
    beat: np.ndarray
    resonance: np.ndarray
    omega_d: float
    amplitude: float
    real_phases: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)

    def _pairs(self, which) -> np.ndarray:
        cols = [self.pair_idx.index(i) for i in which]
        return self.beat[:, cols].sum(axis=1)

    def total(self) -> np.ndarray:
        """Exact response: every real term plus every pair term."""
        return self.real.sum(axis=1) + self.beat.sum(axis=1)

    def approximate(self) -> np.ndarray:
        """Three-class decomposition with the resonance approximation."""
        return self.resonance_free() + self.resonance.sum(axis=1)

    def resonance_free(self) -> np.ndarray:
        return self.real.sum(axis=1) + self._pairs(self.beat_idx)

    def resonant_exact(self) -> np.ndarray:
        return self._pairs(self.resonant_idx)


def _require_single(forcing: ForcedInput):
    if len(forcing.components) != 1 or forcing.components[0][2] != 0.0:
        raise ModalError("modal decomposition needs a single zero-phase forcing component")


def simulate_modal(sys: LtiSystem, eig: EigenStructure, forcing: ForcedInput,
                   outputs: Sequence[int] | int | None = None, duration_s: float = 40.0,
                   fs: float = 60.0) -> ModalComponents:
    """Sample every modal component of the chosen outputs on ``[0, duration_s]``."""
    _require_single(forcing)
    P, w, _ = forcing.components[0]
    if not eig.classified:
        eig = classify_modes(eig, w)
    if outputs is None:
        outputs = range(sys.n_outputs)
    elif isinstance(outputs, (int, np.integer)):
        outputs = [int(outputs)]
    outputs = tuple(int(k) for k in outputs)
    t = sample_times(duration_s, fs)
    res = residue_matrix(sys, eig, forcing.input_index, outputs)
    m, T = len(outputs), t.size
    real = np.zeros((m, len(eig.real_idx), T))
    beat = np.zeros((m, len(eig.pair_idx), T))
    reso = np.zeros((m, len(eig.resonant_idx), T))
    phases = {}
    real_phases = {i: real_phase(eig.lambdas[i].real, w) for i in eig.real_idx}
    for r in range(m):
        for j, i in enumerate(eig.real_idx):
            real[r, j] = real_mode_component(res[r, i], eig.lambdas[i], P, w, t)
        for j, i in enumerate(eig.pair_idx):
            beat[r, j] = beat_component(res[r, i], eig.lambdas[i], P, w, t)
            phases[outputs[r], i] = pair_phases(res[r, i], eig.lambdas[i], P, w)
        for j, i in enumerate(eig.resonant_idx):
            reso[r, j] = resonance_component(res[r, i], eig.lambdas[i], P, w, t)
    return ModalComponents(t, outputs, eig.real_idx, eig.pair_idx, eig.beat_idx,
                           eig.resonant_idx, res, real, beat, reso, w, P,
                           real_phases=real_phases, phases=phases)


def resonance_free(components: ModalComponents) -> np.ndarray:
    """Real-eigenvalue terms plus non-resonant beat terms, per output."""
    return components.resonance_free()


def resonance_factors(sys: LtiSystem, eig: EigenStructure, forcing: ForcedInput,
                      outputs: Sequence[int] | None = None, duration_s: float = 40.0,
                      fs: float = 60.0):
    """Factors ``G`` (outputs x 2p) and ``F`` (2p x T) with ``Y_R = G @ F``.

    For each resonant pair ``i``: ``g1 = E cos(theta)``, ``g2 = E sin(theta)``,
    ``f1 = (1 - exp(-sigma t)) sin(w_d t)``, ``f2 = (1 - exp(-sigma t)) cos(w_d t)``
    with ``E = P |a| / sigma``.
    """
    _require_single(forcing)
    P, w, _ = forcing.components[0]
    if not eig.classified:
        eig = classify_modes(eig, w)
    if not eig.resonant_idx:
        raise ModalError(f"no resonance component under kappa={eig.kappa}")
    outputs = range(sys.n_outputs) if outputs is None else list(outputs)
    t = sample_times(duration_s, fs)
    res = residue_matrix(sys, eig, forcing.input_index, outputs)
    G, F = [], []
    for i in eig.resonant_idx:
        sigma = eig.sigma(i)
        E = P * np.abs(res[:, i]) / sigma
        theta = np.angle(res[:, i])
        G += [E * np.cos(theta), E * np.sin(theta)]
        ramp = 1 - np.exp(-sigma * t)
        F += [ramp * np.sin(w * t), ramp * np.cos(w * t)]
    return np.column_stack(G), np.vstack(F)


def resonance_matrix(sys: LtiSystem, eig: EigenStructure, forcing: ForcedInput,
                     outputs: Sequence[int] | None = None, duration_s: float = 40.0,
                     fs: float = 60.0) -> np.ndarray:
    """Rows are the sampled resonance components of each output."""
    _require_single(forcing)
    P, w, _ = forcing.components[0]
    if not eig.classified:
        eig = classify_modes(eig, w)
    if not eig.resonant_idx:
        raise ModalError(f"no resonance component under kappa={eig.kappa}")
    outputs = range(sys.n_outputs) if outputs is None else list(outputs)
    t = sample_times(duration_s, fs)
    res = residue_matrix(sys, eig, forcing.input_index, outputs)
    YR = np.zeros((res.shape[0], t.size))
    for r in range(res.shape[0]):
        for i in eig.resonant_idx:
            YR[r] += resonance_component(res[r, i], eig.lambdas[i], P, w, t)
    return YR


def singular_value_ratio(M, index: int = 2) -> float:
    """``sigma_{index+1} / sigma_1``; zero when the matrix has fewer singular values."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size <= index or s[0] == 0:
        return 0.0
    return float(s[index] / s[0])


def forced_response(sys: LtiSystem, forcing: ForcedInput, t, eig: EigenStructure | None = None,
                    outputs: Sequence[int] | None = None) -> np.ndarray:
    """Exact zero-state output for any number of forcing components (superposition)."""
    eig = eig or eigendecompose(sys)
    outputs = range(sys.n_outputs) if outputs is None else list(outputs)
    res = residue_matrix(sys, eig, forcing.input_index, outputs)
    t = np.asarray(t, dtype=float)
    y = np.zeros((res.shape[0], t.size))
    for P, w, th in forcing.components:
        for i in eig.real_idx:
            y += np.real(res[:, [i]] * pole_response(1.0, eig.lambdas[i], P, w, th, t)[None, :])
        for i in eig.pair_idx:
            y += 2 * np.real(res[:, [i]] * pole_response(1.0, eig.lambdas[i], P, w, th, t)[None, :])
    return y
