"""Command-line entry point: ``foloc <subcommand> [options]``.

Exit status: 0 success, 1 failed check (verify-rank), 2 input error,
3 RPCA did not converge (results are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import measurements as ms
from .localize import LocalizeConfig, add_noise, evaluate, locate
from .modalsim import (classify_modes, eigendecompose, forced_response, resonance_matrix,
                       sample_times, simulate_modal)
from .rpca import RpcaConfig, rpca_exact_alm, default_xi
from .systemfile import load_system, load_topology
from .topology import vicinity_set

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3

DEFAULTS = {
    "window_s": 10.0,
    "xi": "auto",
    "tol": 1e-7,
    "max_iters": 500,
    "top_k": 5,
    "n0": 0,
    "seed": 0,
}


class InputError(Exception):
    pass


def _xi(text):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"xi must be 'auto' or a positive number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError("xi must be positive")
    return value


def _snr(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _effective(args) -> dict:
    """Merge flags over the optional config file over the built-in defaults."""
    merged = dict(DEFAULTS)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            file_cfg = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{cfg_path}: {exc}") from None
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise InputError(f"{cfg_path}: unknown config keys {sorted(unknown)}")
        merged.update(file_cfg)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _localize_config(eff: dict) -> LocalizeConfig:
    xi = None if eff["xi"] == "auto" else float(eff["xi"])
    try:
        return LocalizeConfig(window_s=float(eff["window_s"]), xi=xi,
                              rpca=RpcaConfig(tol_primal=float(eff["tol"]),
                                              max_outer_iters=int(eff["max_iters"])),
                              top_k=int(eff["top_k"]))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _read(path) -> ms.MeasurementMatrix:
    try:
        return ms.read_csv(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except ms.MeasurementError as exc:
        raise InputError(str(exc)) from None


def _write_text(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_long_csv(path, times, channels, rows):
    lines = ["time,channel,value"]
    for ch, row in zip(channels, rows):
        lines.extend(f"{t!r},{ch},{float(v)!r}" for t, v in zip(times.tolist(), row))
    Path(path).write_text("\n".join(lines) + "\n")


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    desc = load_system(args.input)
    if desc.forcing is None:
        raise InputError(f"{args.input}: no 'forcing' section")
    duration = args.duration_s if args.duration_s is not None else desc.duration_s
    fs = args.fs if args.fs is not None else desc.fs_hz
    t = sample_times(duration, fs)
    eig = eigendecompose(desc.system)
    y = forced_response(desc.system, desc.forcing, t, eig=eig)
    Y = ms.MeasurementMatrix(desc.channels, y, fs)
    if args.snr_db is not None:
        Y = add_noise(Y, args.snr_db, seed=args.seed if args.seed is not None else 0)
    ms.write_csv(Y, args.output)
    if args.components_dir:
        out = Path(args.components_dir)
        out.mkdir(parents=True, exist_ok=True)
        comps = simulate_modal(desc.system, classify_modes(eig, desc.forcing.omega),
                               desc.forcing, duration_s=duration, fs=fs)
        names = [str(ch) for ch in desc.channels]
        _write_long_csv(out / "real.csv", t, names, comps.real.sum(axis=1))
        _write_long_csv(out / "beat.csv", t, names, comps.resonance_free() - comps.real.sum(axis=1))
        _write_long_csv(out / "resonance.csv", t, names, comps.resonance.sum(axis=1))
        _write_long_csv(out / "resonance_free.csv", t, names, comps.resonance_free())
    return EXIT_OK


def cmd_localize(args) -> int:
    eff = _effective(args)
    cfg = _localize_config(eff)
    Y = _read(args.input)
    if args.demean:
        Y = ms.demean(Y)
    rep = locate(Y, cfg)
    doc = rep.to_dict()
    doc["config"]["demean"] = bool(args.demean)
    if args.topology:
        topo = load_topology(args.topology)
        doc["n0"] = int(eff["n0"])
        doc["vicinity"] = sorted(vicinity_set(topo, rep.source_bus, int(eff["n0"])))
    _write_text(args.output, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_decompose(args) -> int:
    eff = _effective(args)
    cfg = _localize_config(eff)
    Y = _read(args.input)
    Y = Y.head(cfg.n_columns(Y.sample_rate_hz))
    M = Y if args.no_normalize else ms.normalize(Y)
    xi = cfg.xi if cfg.xi is not None else default_xi(*M.shape)
    res = rpca_exact_alm(M.data, RpcaConfig(xi=xi, tol_primal=cfg.rpca.tol_primal,
                                            max_outer_iters=cfg.rpca.max_outer_iters))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    ms.write_csv(M.with_data(res.L), out / "L.csv")
    ms.write_csv(M.with_data(res.S), out / "S.csv")
    summary = {k: (float(f"{v:.12g}") if isinstance(v, float) else v)
               for k, v in res.summary().items()}
    (out / "rpca.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_verify_rank(args) -> int:
    desc = load_system(args.input)
    if desc.forcing is None:
        raise InputError(f"{args.input}: no 'forcing' section")
    duration = args.duration_s if args.duration_s is not None else 40.0
    fs = args.fs if args.fs is not None else desc.fs_hz
    eig = eigendecompose(desc.system, desc.forcing.omega)
    YR = resonance_matrix(desc.system, eig, desc.forcing, duration_s=duration, fs=fs)
    s = np.linalg.svd(YR, compute_uv=False)
    ratio = float(s[2] / s[0]) if s.size > 2 and s[0] > 0 else 0.0
    ok = ratio < args.threshold
    print(f"resonance matrix: {YR.shape[0]} x {YR.shape[1]}, resonant modes {list(eig.resonant_idx)}")
    for i, v in enumerate(s[:min(6, s.size)], start=1):
        print(f"sigma_{i} = {v:.6e}")
    print(f"sigma_3/sigma_1 = {ratio:.3e} (threshold {args.threshold:g})")
    print("PASS: rank <= 2" if ok else "FAIL: rank > 2")
    return EXIT_OK if ok else EXIT_FAILED_CHECK


def _read_manifest(path, default_topology):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    cases = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise InputError(f"{path}: line {lineno}: expected '<csv> <topology|-> <true bus>'")
        csv_path, topo_path, bus = parts
        try:
            bus = int(bus)
        except ValueError:
            raise InputError(f"{path}: line {lineno}: bad bus id {bus!r}") from None
        Y = _read(path.parent / csv_path)
        if topo_path == "-":
            topo = default_topology
        else:
            topo = load_topology(path.parent / topo_path)
        cases.append((Y, topo, bus))
    if not cases:
        raise InputError(f"{path}: manifest lists no cases")
    return cases


def cmd_evaluate(args) -> int:
    eff = _effective(args)
    cfg = _localize_config(eff)
    default_topo = load_topology(args.topology) if args.topology else None
    suite = _read_manifest(args.suite, default_topo)
    summary = evaluate(suite, cfg, n0=int(eff["n0"]))
    doc = summary.to_dict()
    doc["config"] = {k: (float(f"{v:.12g}") if isinstance(v, float) else v)
                     for k, v in cfg.to_dict().items()}
    _write_text(args.output, json.dumps(doc, indent=2) + "\n")
    all_conv = all(v.converged for v in summary.verdicts)
    return EXIT_OK if all_conv else EXIT_NONCONVERGED


def cmd_add_noise(args) -> int:
    Y = _read(args.input)
    noisy = add_noise(Y, args.snr_db, seed=args.seed if args.seed is not None else 0)
    ms.write_csv(noisy, args.output)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _solver_flags(p):
    p.add_argument("--window-s", dest="window_s", type=float, help="window length T0 (default 10)")
    p.add_argument("--xi", type=_xi, help="sparsity weight or 'auto' (default auto)")
    p.add_argument("--tol", type=float, help="relative primal residual tolerance (default 1e-7)")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="outer ALM iterations (default 500)")
    p.add_argument("--top-k", dest="top_k", type=int, help="ranking depth (default 5)")
    p.add_argument("--config", help="JSON file with default option values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="foloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="system file -> measurement CSV")
    p.add_argument("--input", required=True, help="system description JSON")
    p.add_argument("--output", required=True, help="measurement CSV to write")
    p.add_argument("--duration-s", dest="duration_s", type=float)
    p.add_argument("--fs", type=float, help="sampling rate in Hz")
    p.add_argument("--components-dir", dest="components_dir",
                   help="also write per-class modal components (time,channel,value CSVs)")
    p.add_argument("--snr-db", dest="snr_db", type=_snr)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("localize", help="measurement CSV -> JSON report")
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="report path (default stdout)")
    p.add_argument("--topology", help="topology JSON; adds the identified bus's vicinity")
    p.add_argument("--n0", type=int, help="vicinity radius in lines (default 0)")
    p.add_argument("--demean", action="store_true", help="subtract each channel's mean first")
    _solver_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("decompose", help="measurement CSV -> L.csv, S.csv")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--no-normalize", dest="no_normalize", action="store_true")
    _solver_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify-rank", help="rank of the resonance component matrix")
    p.add_argument("--input", required=True, help="system description JSON")
    p.add_argument("--duration-s", dest="duration_s", type=float, help="default 40")
    p.add_argument("--fs", type=float)
    p.add_argument("--threshold", type=float, default=1e-10)
    p.set_defaults(func=cmd_verify_rank)

    p = sub.add_parser("evaluate", help="run a suite manifest")
    p.add_argument("--suite", required=True, help="manifest: '<csv> <topology|-> <true bus>' per line")
    p.add_argument("--output", help="summary path (default stdout)")
    p.add_argument("--topology", help="topology used for manifest entries given as '-'")
    p.add_argument("--n0", type=int)
    _solver_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("add-noise", help="add white noise at a given SNR")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--snr-db", dest="snr_db", type=_snr, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_add_noise)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"foloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"foloc {args.command}: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
