"""Command-line front end.

Four subcommands: ``classify`` a kernel matrix file, ``density`` sweeps,
``sample`` batches, and ``verify`` experiments, all driven by JSON configs
with explicit seeds.  Every run prints a result record embedding the fully
materialized config (defaults filled in) and the seed, so any output can
be reproduced from its own record; bulk numerics go to CSV with 17
significant digits.

Exit codes: 0 success / verification passed, 1 verification failed,
2 input or parse error, 3 numerical failure, 4 evaluation-cost guard.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, density, functions, kernels, markov, samplers, verify
from .errors import CostGuardExceeded, ParseError, PermlabError
from .matio import fmt, matrix_from_obj, read_matrix
from .rng import substream

EXIT_VERIFY_FAIL = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_COST = 4


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc


def _emit(record: dict, out_path: str | None = None) -> None:
    text = json.dumps(record, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _kernel_from_cfg(cfg: dict) -> np.ndarray:
    if "kernel_file" in cfg:
        return read_matrix(cfg["kernel_file"])
    if "kernel" in cfg:
        return matrix_from_obj(cfg["kernel"])
    if "model" in cfg and "h" in cfg:
        model = markov.model_from_obj(cfg["model"])
        return markov.green_kernel(markov.killed_laplacian(model.Q, np.asarray(cfg["h"], float))).G
    raise ParseError("config needs 'kernel', 'kernel_file', or 'model' + 'h'")


def _function_from_cfg(obj, n: int) -> functions.TestFunction:
    if obj is None or obj == "one":
        return functions.const_one(n)
    if isinstance(obj, str):
        obj = {"kind": obj}
    kind = obj.get("kind", "one")
    if kind in ("one", "const"):
        return functions.const_one(n)
    if kind == "exp_linear":
        return functions.exp_linear(np.asarray(obj.get("lam", [0.5] * n), float))
    if kind == "poly":
        return functions.poly(obj["terms"], n)
    if kind == "smoothstep_product":
        return functions.smoothstep_product(
            np.asarray(obj.get("s", [1.0] * n), float), float(obj.get("eps", 0.5))
        )
    raise ParseError(f"unknown test function kind {kind!r}")


def _sampler_from_cfg(cfg: dict, seed: int):
    """Returns (claimed kernel, alpha, provenance, draw(size, rng))."""
    kind = cfg.get("sampler", "gaussian")
    if kind == "gaussian":
        G = _kernel_from_cfg(cfg)
        return G, 1.0, "gaussian_psd", lambda m, rng: samplers.sample_permanental_psd(G, m, rng)
    if kind == "k_permanental":
        G = _kernel_from_cfg(cfg)
        k = int(cfg.get("k", 2))
        return (
            G,
            float(k),
            f"k_permanental(k={k})",
            lambda m, rng: samplers.sample_k_permanental(G, k, m, rng),
        )
    if kind == "loop_soup":
        model = markov.model_from_obj(cfg["model"])
        h = np.asarray(cfg["h"], float)
        Qh = markov.killed_laplacian(model.Q, h)
        G = markov.green_kernel(Qh).G
        tables = samplers.LoopSoupTables.build(Qh)
        return (
            G,
            1.0,
            "loop_soup",
            lambda m, rng: samplers.sample_loop_soup_generator(Qh, m, rng, tables=tables),
        )
    if kind == "conditioned_chi2":
        G = _kernel_from_cfg(cfg)
        a, r = int(cfg["a"]), float(cfg["r"])
        keep = [i for i in range(G.shape[0]) if i != a]
        Q = -np.linalg.inv(G)
        claimed = np.linalg.inv(-Q[np.ix_(keep, keep)]) if r == 0 else None
        return (
            claimed,
            1.0,
            "conditioned_chi2",
            lambda m, rng: samplers.sample_conditioned_chi2(G, a, r, m, rng),
        )
    if kind == "rejection_band":
        model = markov.model_from_obj(cfg["model"])
        a, r = int(cfg["a"]), float(cfg["r"])
        h, band = float(cfg.get("h", 1.0)), float(cfg.get("band", 0.02))
        return (
            None,
            1.0,
            "rejection_band",
            lambda m, rng: samplers.sample_conditioned_rejection(model, a, r, h, band, m, rng)[0],
        )
    raise ParseError(f"unknown sampler kind {kind!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_classify(args) -> int:
    G = read_matrix(args.matrix)
    report = kernels.classify_kernel(G, tol=args.tol)
    _emit({"command": "classify", "input": args.matrix, "tol": args.tol, "report": report.to_dict()})
    return 0


def _l_grid_from_cfg(cfg: dict, n: int) -> np.ndarray:
    grid = cfg.get("l_grid")
    if grid is None:
        axis = np.linspace(0.2, 2.0, 5)
        grid = {"per_dim": [axis.tolist()] * n}
    if "points" in grid:
        pts = np.asarray(grid["points"], float)
        if pts.ndim != 2 or pts.shape[1] != n:
            raise ParseError(f"l_grid points must be rows of length {n}")
        return pts
    axes = [np.asarray(ax, float) for ax in grid["per_dim"]]
    if len(axes) != n:
        raise ParseError(f"l_grid per_dim needs {n} axes")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def cmd_density(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    G = _kernel_from_cfg(cfg)
    n = G.shape[0]
    grid = density.AngularGrid(
        K=int(cfg.get("K", 64)),
        reduced=bool(cfg.get("reduced", True)),
        cost_cap=int(cfg.get("cost_cap", density.DEFAULT_COST_CAP)),
    )
    pts = _l_grid_from_cfg(cfg, n)
    report = kernels.classify_kernel(G)
    use_series = report.is_inverse_m_matrix and cfg.get("series", True)
    trunc = density.SeriesTruncation(int(cfg.get("series_degree", 24)))
    out_path = args.out or cfg.get("out", "density_sweep.csv")
    rows = []
    for l in pts:
        q = density.density_quadrature(G, l, grid)
        s = density.density_series(G, l, trunc) if use_series else None
        rows.append((l, q.value, s.value if s else float("nan"), q.imag_residue))
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(",".join([f"l{i+1}" for i in range(n)] + ["rho_quad", "rho_series", "residue"]) + "\n")
        for l, vq, vs, res in rows:
            fh.write(",".join([fmt(x) for x in l] + [fmt(vq), fmt(vs), fmt(res)]) + "\n")
    echoed = dict(cfg)
    echoed.update({"seed": seed, "K": grid.K, "reduced": grid.reduced, "out": out_path})
    _emit(
        {
            "command": "density",
            "version": __version__,
            "config": echoed,
            "n_points": len(rows),
            "series_used": bool(use_series),
            "certified_family": report.certified_family,
            "out": out_path,
        }
    )
    return 0


def cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    n_samples = int(cfg.get("n_samples", 1000))
    _, _, provenance, draw = _sampler_from_cfg(cfg, seed)
    X = draw(n_samples, substream(seed, "sample", cfg.get("sampler", "gaussian")))
    out_path = args.out or cfg.get("out", "samples.csv")
    n = X.shape[1]
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(",".join([f"l{i+1}" for i in range(n)] + ["provenance"]) + "\n")
        for row in X:
            fh.write(",".join(fmt(x) for x in row) + f",{provenance}\n")
    echoed = dict(cfg)
    echoed.update({"seed": seed, "n_samples": n_samples, "out": out_path})
    _emit(
        {
            "command": "sample",
            "version": __version__,
            "config": echoed,
            "provenance": provenance,
            "n_samples": n_samples,
            "out": out_path,
        }
    )
    return 0


def _run_verify_task(cfg: dict, seed: int, threads: int) -> verify.VerifyReport:
    kind = cfg.get("kind")
    N = int(cfg.get("N", 100_000))
    if kind == "laplace":
        scfg = cfg.get("sampler_config", cfg)
        G_claimed, alpha, _, draw = _sampler_from_cfg(scfg, seed)
        G = matrix_from_obj(cfg["claimed_kernel"]) if "claimed_kernel" in cfg else G_claimed
        if G is None:
            raise ParseError("laplace verification needs a claimed kernel")
        lam = np.asarray(cfg["lambda_grid"], float) if "lambda_grid" in cfg else None
        return verify.verify_laplace(
            G, draw, lam, n_samples=N, seed=seed, alpha=float(cfg.get("alpha", alpha)), threads=threads
        )
    if kind == "lejan":
        scfg = cfg.get("sampler_config", cfg)
        G, _, _, draw = _sampler_from_cfg(scfg, seed)
        f = _function_from_cfg(cfg.get("f"), G.shape[0])
        return verify.verify_lejan(G, f, draw, n_samples=N, seed=seed, k=int(cfg.get("k", 1)))
    model = markov.model_from_obj(cfg["model"]) if "model" in cfg else None
    if kind == "dynkin":
        u = _function_from_cfg(cfg.get("u"), model.n)
        return verify.verify_dynkin(model, np.asarray(cfg["h"], float), int(cfg["a"]), u, N, seed)
    if kind == "rayknight":
        return verify.verify_ray_knight(
            model,
            int(cfg["a"]),
            float(cfg.get("h", 1.0)),
            float(cfg["r"]),
            n_samples=N,
            seed=seed,
            band=float(cfg.get("band", 0.02)),
            ks_threshold=float(cfg.get("ks_threshold", 0.02)),
        )
    if kind == "eisenbaum":
        u = _function_from_cfg(cfg.get("u"), model.n)
        h = cfg["h"]
        h = float(h) if np.isscalar(h) else np.asarray(h, float)
        return verify.verify_eisenbaum(
            model,
            h,
            int(cfg["a"]),
            float(cfg["r"]),
            u,
            n_outer=int(cfg.get("N_outer", 20_000)),
            m_inner=int(cfg.get("M_inner", 32)),
            seed=seed,
        )
    if kind == "ward":
        u = _function_from_cfg(cfg.get("u"), model.n)
        return verify.verify_ward(
            model,
            np.asarray(cfg["h"], float),
            int(cfg["a"]),
            int(cfg["b"]),
            u,
            n_samples=N,
            seed=seed,
            t_max=cfg.get("t_max"),
        )
    if kind == "kahane":
        fam_cfg = cfg["family"]
        if fam_cfg["type"] == "sub_stochastic":
            fam = verify.SubStochasticFamily(
                matrix_from_obj(fam_cfg["P0"]), matrix_from_obj(fam_cfg["P1"]), float(fam_cfg["s"])
            )
            n = fam.P0.shape[0]
        elif fam_cfg["type"] == "linear":
            fam = verify.LinearKernelFamily(
                matrix_from_obj(fam_cfg["G0"]), matrix_from_obj(fam_cfg["G1"])
            )
            n = np.asarray(fam.G0).shape[0]
        else:
            raise ParseError(f"unknown family type {fam_cfg['type']!r}")
        f = _function_from_cfg(cfg.get("f"), n)
        grid = np.asarray(cfg.get("alpha_grid", np.linspace(0, 1, 11).tolist()), float)
        return verify.check_kahane(fam, f, grid, n_samples=N, seed=seed, k=int(cfg.get("k", 1)))
    if kind == "slepian":
        return verify.check_slepian(
            matrix_from_obj(cfg["G0"]), matrix_from_obj(cfg["G1"]), n_samples=N, seed=seed
        )
    if kind == "tail":
        return verify.check_tail_bound(
            model,
            int(cfg["a"]),
            float(cfg["r"]),
            tuple(cfg.get("lambda_grid", (1.0, 2.0, 4.0, 8.0))),
            n_samples=N,
            seed=seed,
        )
    if kind == "cover":
        return verify.estimate_cover_time(
            model, n_samples=N, seed=seed, a=int(cfg.get("a", 0)), threads=threads
        )
    raise ParseError(f"unknown verification kind {kind!r}")


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    tasks = cfg["suite"] if "suite" in cfg else [cfg]
    t0 = time.monotonic()
    reports = []
    for i, task in enumerate(tasks):
        task_seed = int(task.get("seed", seed + i))
        reports.append(_run_verify_task(task, task_seed, args.threads))
    passed = all(r.passed for r in reports)
    echoed = dict(cfg)
    echoed["seed"] = seed
    record = {
        "command": "verify",
        "version": __version__,
        "config": echoed,
        "wall_time_s": round(time.monotonic() - t0, 3),
        "threads": args.threads,
        "reports": [r.to_dict() for r in reports],
        "passed": passed,
    }
    _emit(record, args.out)
    return 0 if passed else EXIT_VERIFY_FAIL


def _default_threads() -> int:
    env = os.environ.get("PERMLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="permlab", description=__doc__)
    p.add_argument("--version", action="version", version=f"permlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="structural classification of a kernel matrix")
    c.add_argument("matrix", help="CSV or JSON matrix file")
    c.add_argument("--tol", type=float, default=kernels.DEFAULT_TOL)
    c.set_defaults(fn=cmd_classify)

    for name, fn, hlp in [
        ("density", cmd_density, "evaluate density sweeps to CSV"),
        ("sample", cmd_sample, "draw a sample batch to CSV"),
        ("verify", cmd_verify, "run verification experiments"),
    ]:
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=True, help="JSON config path")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--threads", type=int, default=_default_threads())
        s.add_argument("--out", default=None, help="output path")
        s.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CostGuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COST
    except PermlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
