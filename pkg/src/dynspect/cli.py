"""Command-line workflows: simulate, reconstruct, evaluate, sweep.

Every command is a pure function of (config, flags, seed); reruns produce
byte-identical outputs.  Exit codes: 0 success, 2 usage error, 3 data or
lineage error, 4 solver nonconvergence (results still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import arrayio, metrics
from .kinetics import ConcentrationMatrix, Phantom, make_phantom
from .recon import SolverConfig, reconstruct, reconstruct_baseline_em
from .sim import AcquisitionSchedule, Sinogram, monte_carlo, poissonize, schedule_preset, simulate_clean
from .tomo import ImageGeometry
from .varmodel import ObjectiveParams

FRAME_TIMES = (1, 5, 10, 15, 25, 50, 90)

DEFAULT_CONFIG = {
    "phantom": "heart_circles",
    "n1": 64,
    "n2": 64,
    "M": 90,
    "K": 4,
    "schedule": "rotate2",
    "bins_per_head": 95,
    "noise": "none",          # none | poisson | montecarlo
    "noise_scale": 1.0,       # poisson: expected counts per intensity unit
    "mc_lambda": 20000.0,
    "seed": 0,
    "alpha": 0.1,
    "beta": 0.1,
    "delta": 0.5,
    "damping": 0.9,
    "outer": 1000,
    "inner": 10000,
    "outer_tol": 1e-6,
    "inner_tol": 1e-8,
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        try:
            cfg.update(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _schedule(cfg: dict) -> AcquisitionSchedule:
    return schedule_preset(cfg["schedule"], int(cfg["M"]), int(cfg["bins_per_head"]))


def _solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(
        outer_max=int(cfg["outer"]),
        inner_max=int(cfg["inner"]),
        damping=float(cfg["damping"]),
        outer_tol=float(cfg["outer_tol"]),
        inner_tol=float(cfg["inner_tol"]),
        params=ObjectiveParams(alpha=float(cfg["alpha"]), beta=float(cfg["beta"]),
                               delta=float(cfg["delta"])),
        seed=int(cfg["seed"]),
    )


def cmd_simulate(cfg: dict, out_dir: Path) -> int:
    geom = ImageGeometry(int(cfg["n1"]), int(cfg["n2"]))
    try:
        ph = make_phantom(cfg["phantom"], geom, int(cfg["M"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sched = _schedule(cfg)
    sino = simulate_clean(ph, sched)
    noise = cfg["noise"]
    if noise == "poisson":
        sino = poissonize(sino, float(cfg["noise_scale"]), int(cfg["seed"]))
    elif noise == "montecarlo":
        sino = monte_carlo(ph, sched, lam=float(cfg["mc_lambda"]), seed=int(cfg["seed"]))
    elif noise != "none":
        raise UsageError(f"unknown noise mode {noise!r}")

    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, arr in (("sinogram.dspt", sino.data),
                      ("phantom_regions.dspt", ph.region_map.astype(np.int32))):
        arrayio.write_array(out_dir / name, arr)
        files.append(out_dir / name)
    arrayio.write_csv(out_dir / "curves.csv",
                      ["t"] + [f"region_{k}" for k in range(ph.K)],
                      [[t] + list(ph.curves.values[t]) for t in range(ph.M)])
    files.append(out_dir / "curves.csv")
    arrayio.write_manifest(out_dir / "manifest.json", cfg, files)
    return 0


def _load_sinogram(sim_dir: Path, cfg: dict) -> Sinogram:
    path = sim_dir / "sinogram.dspt"
    if not path.exists():
        raise DataError(f"missing sinogram at {path}")
    data = arrayio.read_array(path)
    sched = _schedule(cfg)
    if data.shape != (sched.m, sched.M):
        raise DataError(
            f"sinogram shape {data.shape} does not match schedule ({sched.m}, {sched.M})")
    return Sinogram(data=data, schedule=sched)


def cmd_reconstruct(cfg: dict, sim_dir: Path, out_dir: Path, baseline: bool) -> int:
    sim_manifest = sim_dir / "manifest.json"
    if sim_manifest.exists():
        recorded = arrayio.read_manifest(sim_manifest)["files"].get("sinogram.dspt")
        actual = arrayio.file_sha256(sim_dir / "sinogram.dspt")
        if recorded is not None and recorded != actual:
            raise DataError("sinogram does not match its manifest hash")
        sim_cfg = arrayio.read_manifest(sim_manifest)["config"]
        for key in ("M", "schedule", "bins_per_head", "n1", "n2"):
            cfg[key] = sim_cfg[key]
    sino = _load_sinogram(sim_dir, cfg)
    geom = ImageGeometry(int(cfg["n1"]), int(cfg["n2"]))
    solver = _solver_config(cfg)
    K = int(cfg["K"])
    if baseline:
        state = reconstruct_baseline_em(sino, geom, K, solver)
    else:
        state = reconstruct(sino, geom, K, solver)

    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    arrayio.write_array(out_dir / "U.dspt", state.U)
    files.append(out_dir / "U.dspt")
    arrayio.write_array(out_dir / "labels.dspt", state.hardened().astype(np.int32))
    files.append(out_dir / "labels.dspt")
    arrayio.write_csv(out_dir / "C.csv",
                      ["t"] + [f"region_{k}" for k in range(K)],
                      [[t] + list(state.C[t]) for t in range(state.C.shape[0])])
    files.append(out_dir / "C.csv")
    arrayio.write_csv(out_dir / "trace.csv",
                      ["outer_iter", "kl", "tv", "l1", "temporal", "total"],
                      [[i, o["kl"], o["tv"], o["l1"], o["temporal"], o["total"]]
                       for i, o in enumerate(state.objective_trace)])
    files.append(out_dir / "trace.csv")
    frames = state.U @ state.C.T
    for t in FRAME_TIMES:
        if t <= sino.schedule.M:
            name = f"frame_t{t:03d}.dspt"
            arrayio.write_array(out_dir / name,
                                frames[:, t - 1].reshape(geom.n1, geom.n2))
            files.append(out_dir / name)
    run_cfg = dict(cfg)
    run_cfg["baseline"] = baseline
    run_cfg["sinogram_sha256"] = arrayio.file_sha256(sim_dir / "sinogram.dspt")
    arrayio.write_manifest(out_dir / "manifest.json", run_cfg, files)
    return 0 if state.converged or state.iterations < solver.outer_max else 4


def cmd_evaluate(recon_dir: Path, sim_dir: Path, out_path: Path) -> int:
    recon_manifest = arrayio.read_manifest(recon_dir / "manifest.json")
    recorded = recon_manifest["config"].get("sinogram_sha256")
    if recorded is not None:
        actual = arrayio.file_sha256(sim_dir / "sinogram.dspt")
        if recorded != actual:
            raise DataError("reconstruction was not produced from this sinogram")

    sim_cfg = arrayio.read_manifest(sim_dir / "manifest.json")["config"]
    geom = ImageGeometry(int(sim_cfg["n1"]), int(sim_cfg["n2"]))
    region_map = arrayio.read_array(sim_dir / "phantom_regions.dspt")
    curve_rows = (sim_dir / "curves.csv").read_text().strip().splitlines()[1:]
    curves = np.array([[float(v) for v in row.split(",")[1:]] for row in curve_rows])
    ph = Phantom(geom=geom, region_map=region_map,
                 curves=ConcentrationMatrix(curves), name=sim_cfg["phantom"])

    U = arrayio.read_array(recon_dir / "U.dspt")
    c_rows = (recon_dir / "C.csv").read_text().strip().splitlines()[1:]
    C = np.array([[float(v) for v in row.split(",")[1:]] for row in c_rows])
    report = metrics.evaluate(U, C, ph)
    arrayio.write_csv(
        out_path,
        ["l2_per_pixel_per_step", "misclassification_rate", "kl_data_fit"]
        + [f"curve_rmse_region_{k}" for k in range(ph.K)],
        [[report.l2_per_pixel_per_step, report.misclassification_rate,
          report.kl_data_fit] + list(report.per_region_curve_rmse)],
    )
    return 0


def cmd_sweep(cfg: dict, sim_dir: Path, param: str, grid: list[float], out_path: Path) -> int:
    if param not in ("alpha", "beta", "delta"):
        raise UsageError(f"sweep parameter must be alpha, beta, or delta, got {param!r}")
    if not grid:
        raise UsageError("sweep grid is empty")
    sim_cfg = arrayio.read_manifest(sim_dir / "manifest.json")["config"]
    for key in ("M", "schedule", "bins_per_head", "n1", "n2", "phantom"):
        cfg[key] = sim_cfg[key]
    sino = _load_sinogram(sim_dir, cfg)
    geom = ImageGeometry(int(cfg["n1"]), int(cfg["n2"]))
    ph = make_phantom(cfg["phantom"], geom, int(cfg["M"]))
    rows = metrics.sweep(param, grid, sino, geom, int(cfg["K"]), _solver_config(cfg), ph)
    arrayio.write_csv(out_path, [param, "image_error"], rows)
    return 0


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--phantom")
    p.add_argument("--schedule")
    p.add_argument("--noise")
    p.add_argument("--noise-scale", dest="noise_scale", type=float)
    p.add_argument("--mc-lambda", dest="mc_lambda", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--bins-per-head", dest="bins_per_head", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--damping", type=float)
    p.add_argument("--outer", type=int)
    p.add_argument("--inner", type=int)
    p.add_argument("--outer-tol", dest="outer_tol", type=float)
    p.add_argument("--inner-tol", dest="inner_tol", type=float)
    p.add_argument("--threads", type=int,
                   help="worker thread hint; overrides DYNSPECT_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynspect",
                                     description="dynamic SPECT simulation and reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic acquisition")
    _add_config_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("reconstruct", help="reconstruct a simulated acquisition")
    _add_config_flags(p)
    p.add_argument("--data", required=True, help="directory written by simulate")
    p.add_argument("--out", required=True)
    p.add_argument("--baseline-em", action="store_true",
                   help="unregularized alternating EM baseline")

    p = sub.add_parser("evaluate", help="compare a reconstruction to ground truth")
    p.add_argument("--recon", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="image error over a regularization grid")
    _add_config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--out", required=True)
    return parser


def _overrides(args) -> dict:
    keys = ("phantom", "schedule", "noise", "noise_scale", "mc_lambda", "seed",
            "n1", "n2", "M", "K", "bins_per_head", "alpha", "beta", "delta",
            "damping", "outer", "inner", "outer_tol", "inner_tol")
    return {k: getattr(args, k, None) for k in keys}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    threads = getattr(args, "threads", None)
    if threads is None:
        threads = os.environ.get("DYNSPECT_THREADS")
    if threads is not None:
        os.environ["OMP_NUM_THREADS"] = str(threads)

    try:
        if args.command == "simulate":
            cfg = load_config(args.config, _overrides(args))
            return cmd_simulate(cfg, Path(args.out))
        if args.command == "reconstruct":
            cfg = load_config(args.config, _overrides(args))
            return cmd_reconstruct(cfg, Path(args.data), Path(args.out), args.baseline_em)
        if args.command == "evaluate":
            return cmd_evaluate(Path(args.recon), Path(args.data), Path(args.out))
        if args.command == "sweep":
            cfg = load_config(args.config, _overrides(args))
            try:
                grid = [float(v) for v in args.grid.split(",") if v != ""]
            except ValueError as exc:
                raise UsageError(f"malformed grid {args.grid!r}") from exc
            return cmd_sweep(cfg, Path(args.data), args.param, grid, Path(args.out))
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
