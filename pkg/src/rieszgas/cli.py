"""Batch experiment driver.

Subcommands: minimize | scan | lattice | partition | regime.  Each reads a
flat key-value config (--config), writes machine-readable outputs under
--out, and is byte-for-byte deterministic for a fixed manifest and build.
Exit codes: 0 success, 2 validation error, 3 numeric error.  Set RIESZ_LOG
to debug/info/warning to control verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import backend
from .errors import (DomainError, GeometryError, NormalizationError,
                     NumericError, RieszgasError, UnsupportedModelError)
from .geometry import Hyperrectangle, ScreeningRegime, screening_regime_check, subdivide
from .kernels import KernelSpec
from .manifest import (get_typed, load_config, manifest_hash, write_csv,
                       write_json)

log = logging.getLogger("rieszgas")

_VALIDATION_ERRORS = (DomainError, GeometryError, UnsupportedModelError,
                      NormalizationError, ValueError, KeyError)


def _setup_logging() -> None:
    level = os.environ.get("RIESZ_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s: %(message)s")


def _kernel_from_cfg(cfg: dict) -> KernelSpec:
    kind = get_typed(cfg, "kind", str, required=True)
    if kind == "log1d":
        return KernelSpec.log1d()
    if kind == "log2d":
        return KernelSpec.log2d()
    if kind == "riesz":
        return KernelSpec.riesz(get_typed(cfg, "d", int, required=True),
                                get_typed(cfg, "s", float, required=True))
    raise ValueError(f"unknown kernel kind {kind!r}")


def _model_from_cfg(cfg: dict):
    from .model import GasModel, QuadraticPotential

    spec = _kernel_from_cfg(cfg)
    pot_name = get_typed(cfg, "potential", str, default="quadratic")
    if pot_name != "quadratic":
        raise UnsupportedModelError(
            f"CLI potential catalogue: quadratic only (got {pot_name!r})")
    a = get_typed(cfg, "potential_a", float, default=1.0)
    n = get_typed(cfg, "n", int, required=True)
    return GasModel(spec, QuadraticPotential(a), n)


def _opts_from_cfg(cfg: dict, seed: int):
    from .minimize import MinimizeOptions

    return MinimizeOptions(
        max_iters=get_typed(cfg, "max_iters", int, default=2000),
        grad_tol=get_typed(cfg, "grad_tol", float, default=1e-5),
        step0=get_typed(cfg, "step0", float, default=1e-3),
        shrink=get_typed(cfg, "shrink", float, default=0.5),
        armijo_c=get_typed(cfg, "armijo_c", float, default=1e-4),
        restarts=get_typed(cfg, "restarts", int, default=1),
        seed=seed,
    )


def cmd_minimize(cfg: dict, out: Path, seed: int, threads: int) -> int:
    from .minimize import hamiltonian, initial_configuration, local_minimize

    model = _model_from_cfg(cfg)
    opts = _opts_from_cfg(cfg, seed)
    mhash = manifest_hash({**cfg, "seed": seed, "command": "minimize"})
    config0 = initial_configuration(model, seed)
    best, trace = local_minimize(model, config0, opts)

    d = best.d
    write_csv(out / "points.csv", [f"x{i}" for i in range(d)],
              best.points.tolist(), mhash)
    write_csv(out / "trace.csv", ["iter", "energy", "grad_inf", "step"],
              [(i, e, g, s) for i, (e, g, s) in
               enumerate(zip(trace.energies, trace.grad_norms, trace.steps))],
              mhash)
    write_json(out / "manifest.json", {
        "command": "minimize", "config": cfg, "seed": seed,
        "backend": backend.backend_name(), "status": trace.status,
        "iterations": trace.iterations, "final_energy": trace.final_energy,
        "final_hamiltonian": hamiltonian(model, best),
    }, mhash)
    log.info("minimize: %s after %d iterations", trace.status, trace.iterations)
    return 0


def cmd_scan(cfg: dict, out: Path, seed: int, threads: int,
             points_path: Path) -> int:
    from .diagnostics import (discrepancy_scan, disjoint_window_centers,
                              equidistribution_scan, number_variance)
    from .field import FieldContext
    from .model import (DENSITY_CATALOGUE, Configuration, blow_up,
                        equilibrium_measure)

    model = _model_from_cfg(cfg)
    mhash = manifest_hash({**cfg, "seed": seed, "command": "scan"})
    pts = _read_points_csv(points_path, model.kernel.d)
    config = Configuration(pts)
    mu = equilibrium_measure(model)
    wanted = get_typed(cfg, "density", str)
    if wanted is not None:
        if wanted not in DENSITY_CATALOGUE:
            raise UnsupportedModelError(
                f"unknown density id {wanted!r}; catalogue: {DENSITY_CATALOGUE}")
        if wanted != mu.profile:
            raise UnsupportedModelError(
                f"model's equilibrium measure is {mu.profile!r}, "
                f"config requests {wanted!r}")
    config_b, mu_b = blow_up(config, mu)

    from .geometry import min_separation
    sizes = get_typed(cfg, "window_sizes", list, default=[2.0, 3.0, 4.0])
    eta_factor = get_typed(cfg, "eta_factor", float, default=0.25)
    margin = get_typed(cfg, "margin", float, default=max(sizes))
    r0 = min_separation(config_b.points)
    eta = min(eta_factor * r0, 0.49)

    center = np.zeros(model.kernel.d)
    disc = discrepancy_scan(config_b, mu_b, center, sizes,
                            centers_per_axis=get_typed(
                                cfg, "centers_per_axis", int, default=3),
                            margin=margin)
    write_json(out / "discrepancy.json", disc.as_dict(), mhash)
    write_csv(out / "discrepancy_windows.csv",
              [f"c{i}" for i in range(model.kernel.d)] + ["ell", "count",
                                                          "discrepancy"],
              [list(r.center) + [r.ell, r.count, r.discrepancy]
               for r in disc.rows], mhash)

    ctx = FieldContext(spec=model.kernel, charges=config_b.points,
                       background=mu_b, eta=eta)
    results = {}
    for ell in sizes:
        centers = disjoint_window_centers(mu_b, ell, spacing=ell + 1.5,
                                          margin=margin)
        if centers.shape[0] == 0:
            continue
        workers = threads if threads > 0 else (os.cpu_count() or 1)
        scan = equidistribution_scan(ctx, centers, ell, workers=workers)
        results[f"ell={ell:g}"] = scan.as_dict()
        write_csv(out / f"equidistribution_ell{ell:g}.csv",
                  [f"c{i}" for i in range(model.kernel.d)]
                  + ["ell", "w_eta", "per_volume", "count", "discrepancy"],
                  [list(r.center) + [r.ell, r.w_eta, r.per_volume, r.count,
                                     "" if r.discrepancy is None else r.discrepancy]
                   for r in scan.rows], mhash)
        _write_jsonl(out / f"window_reports_ell{ell:g}.jsonl",
                     [r.as_dict() for r in scan.rows], mhash)
    write_json(out / "equidistribution.json",
               {"eta": eta, "scans": results}, mhash)

    var_ell = get_typed(cfg, "variance_ell", float, default=max(sizes))
    sigma2, counts = number_variance(
        config_b, mu_b, var_ell,
        num_centers=get_typed(cfg, "variance_centers", int, default=64),
        seed=seed)
    write_json(out / "variance.json",
               {"ell": var_ell, "sigma2": sigma2,
                "counts": counts.tolist()}, mhash)
    return 0


def cmd_lattice(cfg: dict, out: Path, seed: int, threads: int) -> int:
    from .diagnostics import lattice_decay_fit

    spec = _kernel_from_cfg(cfg)
    ts = get_typed(cfg, "t_values", list, default=[0.5, 0.75, 1.0, 1.25, 1.5])
    radius = get_typed(cfg, "radius", float, default=100.0)
    mhash = manifest_hash({**cfg, "seed": seed, "command": "lattice"})
    basis = np.eye(spec.d)
    rep = lattice_decay_fit(basis, spec, ts, radius=radius)
    write_json(out / "lattice_decay.json", {
        "exponent": rep.exponent, "constant": rep.constant, "r2": rep.r2,
        "bound_exponent": rep.bound_exponent, "bound_ok": rep.bound_ok,
        "t_values": list(rep.t_values), "c2_values": list(rep.c2_values),
    }, mhash)
    write_csv(out / "vertical_profile.csv", ["t", "C2"],
              list(zip(rep.t_values, rep.c2_values)), mhash)
    return 0


def _write_jsonl(path: Path, rows, mhash: str) -> None:
    import json

    lines = [json.dumps({"manifest_hash": mhash}, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def cmd_partition(cfg: dict, out: Path, seed: int, threads: int) -> int:
    lo = get_typed(cfg, "box_lo", list, required=True)
    hi = get_typed(cfg, "box_hi", list, required=True)
    face = get_typed(cfg, "face", int, default=0)
    density_id = get_typed(cfg, "density", str, default="uniform")
    mhash = manifest_hash({**cfg, "seed": seed, "command": "partition"})
    box = Hyperrectangle.from_bounds(lo, hi)

    if density_id == "uniform":
        base = lambda p: np.ones(p.shape[0])
    elif density_id == "wavy":
        amp = get_typed(cfg, "wavy_amp", float, default=0.3)
        freq = get_typed(cfg, "wavy_freq", float, default=1.0)
        base = lambda p: 1.0 + amp * np.sin(freq * p[:, 0])
    else:
        raise ValueError(f"unknown partition density {density_id!r}")

    from .geometry import _box_mass
    total = _box_mass(base, box.lo, box.hi)
    scale = round(total) / total
    if round(total) < 1:
        raise GeometryError("box has less than unit mass; enlarge it")
    rho = lambda p: scale * base(p)
    cells = subdivide(box, rho, face)
    d = box.d
    header = [f"lo{i}" for i in range(d)] + [f"hi{i}" for i in range(d)]
    rows = [list(c.lo) + list(c.hi) for c in cells]
    write_csv(out / "partition.csv", header, rows, mhash)
    return 0


def cmd_regime(cfg: dict, out: Path, seed: int, threads: int) -> int:
    k = get_typed(cfg, "k", int, required=True)
    reg = ScreeningRegime(
        d=get_typed(cfg, "d", int, required=True), k=k,
        b=get_typed(cfg, "b", float), delta=get_typed(cfg, "delta", float),
        theta=get_typed(cfg, "theta", float),
        eps1=get_typed(cfg, "eps1", float), eps2=get_typed(cfg, "eps2", float),
        L=get_typed(cfg, "L", float), gamma=get_typed(cfg, "gamma", float),
        c0=get_typed(cfg, "c0", float, default=1.0))
    report = screening_regime_check(reg)
    mhash = manifest_hash({**cfg, "seed": seed, "command": "regime"})
    write_json(out / "regime.json", report.as_dict(), mhash)
    print("pass" if report.ok else "fail")
    for name, ok, detail in report.conditions:
        print(f"  [{'ok' if ok else 'FAIL'}] {name}: {detail}")
    return 0


def _read_points_csv(path: Path, d: int) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or line.startswith("x") or not line.strip():
            continue
        rows.append([float(v) for v in line.split(",")])
    pts = np.asarray(rows, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"points file has shape {pts.shape}, expected (n, {d})")
    return pts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rieszgas", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="flat key=value file")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="overrides the manifest seed")
    common.add_argument("--threads", type=int, default=0,
                        help="worker threads (0 = available parallelism)")
    sub.add_parser("minimize", parents=[common])
    scan = sub.add_parser("scan", parents=[common])
    scan.add_argument("--points", required=True, help="points CSV from minimize")
    sub.add_parser("lattice", parents=[common])
    sub.add_parser("partition", parents=[common])
    sub.add_parser("regime", parents=[common])
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else get_typed(
            cfg, "seed", int, default=0)
        threads = args.threads
        if args.command == "minimize":
            return cmd_minimize(cfg, out, seed, threads)
        if args.command == "scan":
            return cmd_scan(cfg, out, seed, threads, Path(args.points))
        if args.command == "lattice":
            return cmd_lattice(cfg, out, seed, threads)
        if args.command == "partition":
            return cmd_partition(cfg, out, seed, threads)
        if args.command == "regime":
            return cmd_regime(cfg, out, seed, threads)
        raise ValueError(f"unknown command {args.command!r}")
    except _VALIDATION_ERRORS as exc:
        log.error("validation error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, RieszgasError) as exc:
        log.error("numeric error: %s", exc)
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
