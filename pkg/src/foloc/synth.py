"""Synthetic test systems and planted instances with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurements import Channel, MeasurementMatrix, VOLTAGE_MAGNITUDE, normalize
from .modalsim import ForcedInput, LtiSystem, forced_response, sample_times
from .topology import Topology, argmax_entry, vicinity_set


def _pair_block(sigma, omega):
    return np.array([[-sigma, omega], [-omega, -sigma]])


def _block_diag(blocks):
    n = sum(b.shape[0] for b in blocks)
    A = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        A[i:i + k, i:i + k] = b
        i += k
    return A


def _similarity(rng, n, max_cond=50.0):
    while True:
        T = rng.standard_normal((n, n))
        if np.linalg.cond(T) < max_cond:
            return T


def _scatter(rng, lo, hi, avoid, gap):
    while True:
        w = rng.uniform(lo, hi)
        if all(abs(w - a) > gap for a in avoid):
            return w


def random_resonant_system(rng, n_states=None, n_outputs=None, detune=0.0):
    """Random stable system with exactly one poorly damped pair, forced at its frequency.

    ``n_states`` in [6, 12] and ``n_outputs`` in [5, 20] unless given. Other
    pairs are well damped and at least 1 rad/s away from the resonant one;
    the remaining states are real. Returns ``(system, forcing)``.
    """
    n = int(n_states if n_states is not None else rng.integers(6, 13))
    m = int(n_outputs if n_outputs is not None else rng.integers(5, 21))
    w_r = rng.uniform(2.0, 8.0)
    sigma_r = rng.uniform(0.005, 0.03) * w_r
    blocks = [_pair_block(sigma_r, w_r)]
    freqs = [w_r]
    n_pairs = int(rng.integers(0, (n - 2) // 2 + 1))
    for _ in range(n_pairs):
        w = _scatter(rng, 0.5, 12.0, freqs, 1.0)
        freqs.append(w)
        blocks.append(_pair_block(rng.uniform(0.1, 0.5) * w, w))
    n_real = n - 2 - 2 * n_pairs
    rates = []
    for _ in range(n_real):
        rates.append(_scatter(rng, 0.2, 5.0, rates, 0.05))
    blocks += [np.array([[-r]]) for r in rates]
    D = _block_diag(blocks)
    T = _similarity(rng, n)
    A = T @ D @ np.linalg.inv(T)
    B = rng.standard_normal((n, 1))
    C = rng.standard_normal((m, n))
    forcing = ForcedInput.single(0, 1.0, w_r + detune * sigma_r)
    return LtiSystem(A, B, C), forcing


def random_topology(rng, buses, extra_lines=None) -> Topology:
    """Random spanning tree over ``buses`` plus a few chords; always connected."""
    buses = list(buses)
    order = list(rng.permutation(buses))
    lines = [(int(order[i]), int(order[rng.integers(0, i)])) for i in range(1, len(order))]
    n_extra = int(extra_lines if extra_lines is not None else len(buses) // 3)
    have = {frozenset(e) for e in lines}
    for _ in range(10 * n_extra):
        if n_extra == 0:
            break
        a, b = (int(x) for x in rng.choice(buses, 2, replace=False))
        if frozenset((a, b)) not in have:
            have.add(frozenset((a, b)))
            lines.append((a, b))
            n_extra -= 1
    return Topology(buses, lines)


@dataclass(frozen=True)
class SyntheticCase:
    Y: MeasurementMatrix
    topology: Topology
    source_bus: int
    loudest_bus: int
    system: LtiSystem
    forcing: ForcedInput
    resonant_bus: int


def resonance_case(rng, n_buses=None, n_global_pairs=2, duration_s=10.0, fs=60.0,
                   coupling=(0.3, 0.8)) -> SyntheticCase:
    """Bus network under resonance with a known forced-oscillation source.

    Each bus has a local first-order state seen only by its own measurement.
    The forcing drives the source bus's local state directly and reaches a
    lightly damped inter-area pair through a weak coupling. The inter-area
    pair is visible at every bus, most strongly at ``resonant_bus``, so the
    loudest measurement may sit away from the source.
    """
    m = int(n_buses if n_buses is not None else rng.integers(8, 15))
    w_r = rng.uniform(2.0, 8.0)
    sigma_r = rng.uniform(0.005, 0.02) * w_r
    blocks = [_pair_block(sigma_r, w_r)]
    freqs = [w_r]
    for _ in range(n_global_pairs):
        w = _scatter(rng, 1.0, 12.0, freqs, 1.0)
        freqs.append(w)
        blocks.append(_pair_block(rng.uniform(0.1, 0.3) * w, w))
    n_mod = 2 + 2 * n_global_pairs
    local = rng.uniform(2.0, 6.0, size=m)
    blocks.append(np.diag(-local))
    D = _block_diag(blocks)
    n = D.shape[0]

    src, res_bus = (int(x) for x in rng.choice(m, 2, replace=False))
    B = np.zeros((n, 1))
    B[0:2, 0] = rng.uniform(*coupling) * rng.standard_normal(2)
    B[2:n_mod, 0] = 0.3 * rng.standard_normal(n_mod - 2)
    B[n_mod + src, 0] = local[src]

    C = np.zeros((m, n))
    shape = rng.uniform(0.4, 0.9, size=m)
    shape[res_bus] = 1.0
    angle = rng.uniform(0, 2 * np.pi, size=m)
    C[:, 0] = shape * np.cos(angle)
    C[:, 1] = shape * np.sin(angle)
    C[:, 2:n_mod] = 0.3 * rng.standard_normal((m, n_mod - 2))
    C[np.arange(m), n_mod + np.arange(m)] = 1.0

    T = _similarity(rng, n, max_cond=100.0)
    Ti = np.linalg.inv(T)
    system = LtiSystem(T @ D @ Ti, T @ B, C @ Ti)
    forcing = ForcedInput.single(0, 1.0, w_r)
    t = sample_times(duration_s, fs)
    y = forced_response(system, forcing, t)
    channels = tuple(Channel(k + 1, VOLTAGE_MAGNITUDE) for k in range(m))
    Y = MeasurementMatrix(channels, y, fs)
    topo = random_topology(rng, [ch.bus_id for ch in channels])
    p, _ = argmax_entry(normalize(Y).data)
    return SyntheticCase(Y, topo, src + 1, channels[p].bus_id, system, forcing, res_bus + 1)


def counter_intuitive_suite(n_cases: int = 20, seed=0, n0: int = 0, max_tries: int = 1000,
                            **kwargs) -> list:
    """Resonance cases whose loudest normalized channel lies outside the source vicinity."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(max_tries):
        case = resonance_case(rng, **kwargs)
        if case.loudest_bus not in vicinity_set(case.topology, case.source_bus, n0):
            cases.append(case)
            if len(cases) == n_cases:
                return cases
    raise RuntimeError(f"only {len(cases)} counter-intuitive cases in {max_tries} draws")


def planted_low_rank_sparse(rng, n_rows=200, n_cols=None, rank=5, density=0.05, magnitude=1.0):
    """``(L0, S0)``: Gaussian-factor rank-``rank`` matrix and random-sign sparse matrix."""
    n_cols = n_rows if n_cols is None else n_cols
    L0 = rng.standard_normal((n_rows, rank)) @ rng.standard_normal((rank, n_cols))
    mask = rng.random((n_rows, n_cols)) < density
    S0 = np.where(mask, magnitude * rng.choice([-1.0, 1.0], size=(n_rows, n_cols)), 0.0)
    return L0, S0


def case_description(case: SyntheticCase, duration_s=None):
    """System-file view of a synthetic case (for ``foloc simulate``)."""
    from .systemfile import SystemDescription

    return SystemDescription(
        system=case.system, channels=case.Y.channels, forcing=case.forcing,
        topology=case.topology, duration_s=case.Y.duration_s if duration_s is None else duration_s,
        fs_hz=case.Y.sample_rate_hz, source_bus=case.source_bus,
    )
