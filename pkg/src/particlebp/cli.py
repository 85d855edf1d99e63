"""Config-driven command line front end.

Subcommands: denoise, track, mh-sweep, diagnose.  All parameters come from a
JSON config file; the flags --seed, --sampler, --workers and --out override
their config keys.  The default output root is the PARTICLEBP_OUT environment
variable (falling back to "./out").  Every command validates its full config
before running anything, so config errors never leave partial outputs, and
every command is a pure function of (config, seed): reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import denoise as denoise_app
from . import diagnostics, engine, tracking
from .engine import AnnealingSchedule, EngineConfig, derive_rng
from .pgm import write_pgm

ENV_OUT = "PARTICLEBP_OUT"


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _annealing(block) -> AnnealingSchedule | None:
    if block is None:
        return None
    return AnnealingSchedule(
        float(block["t_start"]), float(block["t_end"]), int(block["steps"])
    )


def _engine_config(cfg: dict, seed: int, sampler: str | None, workers: int | None,
                   dims: int, mcmc_steps: int | None = None) -> EngineConfig:
    """EngineConfig from the config's "engine" block plus CLI overrides."""
    eng = dict(cfg.get("engine", {}))
    sampler = sampler or eng.get("sampler", "slice")
    iterations = int(eng.get("iterations", 10))
    steps = int(mcmc_steps if mcmc_steps is not None else eng.get("mcmc_steps", 10))
    particles = int(eng.get("particles", 5))
    ann = dict(eng.get("annealing", {}))
    ann.setdefault("steps", iterations)
    schedule = _annealing(ann) if ann.get("t_start") is not None else None
    mh_sigmas = None
    polar = ()
    if {"mh": "metropolis-hastings"}.get(sampler, sampler) == "metropolis-hastings":
        if dims == 1:
            sigma = float(eng.get("mh_sigma", 0.5))
            mh_sigmas = (sigma,)
        else:
            sxy = float(eng.get("mh_sigma_xy", 0.5))
            sr = float(eng.get("mh_sigma_r", 0.05))
            sphi = float(eng.get("mh_sigma_phi", 0.05))
            mh_sigmas = (sxy, sxy, sr, sphi)
            polar = ((2, 3),)
    return EngineConfig(
        iterations=iterations,
        mcmc_steps=steps,
        particles=particles,
        sampler=sampler,
        mh_sigmas=mh_sigmas,
        mh_polar_pairs=polar,
        annealing=schedule,
        seed=seed,
        trace_iterations=frozenset(int(n) for n in cfg.get("trace_iterations", [])),
        workers=workers if workers is not None else int(eng.get("workers", 1)),
    )


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e


def _resolve_out(cfg: dict, flag: str | None) -> Path:
    root = flag or cfg.get("out") or os.environ.get(ENV_OUT) or "out"
    return Path(root)


def _resolve_seed(cfg: dict, flag: int | None) -> int:
    return int(flag if flag is not None else cfg.get("seed", 0))


# ---------------------------------------------------------------- denoise

def _trace_rows(sampler: str, traces: dict, trace_nodes: int):
    rows = []
    for n in sorted(traces):
        chains = traces[n]  # (S, p, M, 1)
        for s in range(min(trace_nodes, chains.shape[0])):
            for i in range(chains.shape[1]):
                for m in range(chains.shape[2]):
                    rows.append((sampler, n, s, i, m, float(chains[s, i, m, 0])))
    return rows


def cmd_denoise(cfg: dict, seed: int, sampler: str | None, workers: int | None,
                out: Path) -> int:
    size = int(cfg.get("image_size", 64))
    instances = int(cfg.get("instances", 10))
    sigma = float(cfg.get("noise_sigma", 0.05))
    theta = tuple(float(t) for t in cfg.get("theta", denoise_app.DEFAULT_THETA))
    trace_nodes = int(cfg.get("trace_nodes", 8))
    write_images = bool(cfg.get("write_images", True))
    _require(size >= 2, "image_size must be >= 2")
    _require(instances >= 1, "instances must be >= 1")
    _require(sigma >= 0, "noise_sigma must be >= 0")
    _require(len(theta) == 3 and all(t > 0 for t in theta), "theta must be 3 positive values")
    econf0 = _engine_config(cfg, seed, sampler, workers, dims=1)

    clean = denoise_app.make_test_image(size)
    loss_rows, summary_rows, trace_rows, losses_map, losses_mean = [], [], [], [], []
    images = []
    for k in range(instances):
        noisy = denoise_app.add_noise(clean, sigma, derive_rng(seed, engine.PURPOSE_NOISE, k))
        econf = dataclasses.replace(econf0, seed=seed + k)
        res = denoise_app.denoise(noisy, econf, theta, truth=clean)
        loss_rows.append((k, res.losses["map"], res.losses["mean"], res.losses["noisy"]))
        losses_map.append(res.losses["map"])
        losses_mean.append(res.losses["mean"])
        for s in res.run.summaries:
            summary_rows.append((k, s.iteration, s.temperature, s.mean_disbelief, s.acceptance_rate))
        if k == 0 and res.run.traces:
            trace_rows = _trace_rows(econf.sampler, res.run.traces, trace_nodes)
        if write_images:
            images.append((k, noisy, res.map_image, res.mean_image))

    out.mkdir(parents=True, exist_ok=True)
    if write_images:
        write_pgm(out / "clean.pgm", clean)
        for k, noisy, map_img, mean_img in images:
            write_pgm(out / f"noisy_{k:02d}.pgm", noisy)
            write_pgm(out / f"map_{k:02d}.pgm", map_img)
            write_pgm(out / f"mean_{k:02d}.pgm", mean_img)
    _write_csv(out / "losses.csv", ("instance", "loss_map", "loss_mean", "loss_noisy"), loss_rows)
    _write_csv(
        out / "risk.csv",
        ("estimator", "risk"),
        [("map", float(np.mean(losses_map))), ("mean", float(np.mean(losses_mean)))],
    )
    _write_csv(
        out / "summaries.csv",
        ("instance", "iteration", "temperature", "mean_disbelief", "acceptance_rate"),
        summary_rows,
    )
    if trace_rows:
        _write_csv(
            out / "traces.csv",
            ("sampler", "iteration", "node", "particle", "step", "value"),
            trace_rows,
        )
    return 0


# ------------------------------------------------------------------ track

def _scene_from_config(cfg: dict, seed: int) -> tuple[tracking.MeshScene, bool]:
    sc = dict(cfg.get("scene", {}))
    scene = tracking.generate_scene(
        rows=int(sc.get("rows", 5)),
        cols=int(sc.get("cols", 5)),
        spacing=float(sc.get("spacing", 60.0)),
        origin=tuple(sc.get("origin", (300.0, 150.0))),
        n_frames=int(sc.get("frames", 8)),
        translate=tuple(sc.get("translate", (4.0, 2.0))),
        rotate=float(sc.get("rotate", 0.02)),
        scale=float(sc.get("scale", 0.01)),
        deform=float(sc.get("deform", 0.5)),
        obs_noise=float(sc.get("obs_noise", 1.0)),
        width=float(sc.get("width", 960.0)),
        height=float(sc.get("height", 540.0)),
        seed=seed,
    )
    return scene, bool(sc.get("ambiguous", False))


def cmd_track(cfg: dict, seed: int, sampler: str | None, workers: int | None,
              out: Path) -> int:
    alpha = float(cfg.get("alpha", 20.0))
    _require(alpha > 0, "alpha must be > 0")
    m_values = [int(m) for m in cfg.get("m_values", [2, 3, 4, 5])]
    _require(len(m_values) >= 1 and all(m >= 1 for m in m_values), "m_values must be >= 1")
    samplers = [sampler] if sampler else list(cfg.get("samplers", ["slice", "metropolis-hastings"]))
    scene, ambiguous = _scene_from_config(cfg, seed)

    error_rows, summary_rows = [], []
    for sam in samplers:
        for m in m_values:
            econf = _engine_config(cfg, seed, sam, workers, dims=4, mcmc_steps=m)
            res = tracking.track(scene, econf, alpha, ambiguous)
            for f in range(res.errors.shape[0]):
                for s in range(res.errors.shape[1]):
                    error_rows.append((econf.sampler, m, f, s, float(res.errors[f, s])))
            q = res.quantiles
            summary_rows.append(
                (econf.sampler, m, res.rmsd, q["q10"], q["q25"], q["q50"], q["q75"], q["q90"])
            )

    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "errors.csv", ("sampler", "mcmc_steps", "frame", "node", "error"), error_rows)
    _write_csv(
        out / "summary.csv",
        ("sampler", "mcmc_steps", "rmsd", "q10", "q25", "q50", "q75", "q90"),
        summary_rows,
    )
    return 0


# --------------------------------------------------------------- mh-sweep

def cmd_mh_sweep(cfg: dict, seed: int, sampler: str | None, workers: int | None,
                 out: Path) -> int:
    mode = cfg.get("mode", "denoise")
    _require(mode in ("denoise", "track"), "mode must be 'denoise' or 'track'")
    if sampler is not None:
        _require({"mh": "metropolis-hastings"}.get(sampler, sampler) == "metropolis-hastings",
                 "mh-sweep only sweeps metropolis-hastings")

    if mode == "denoise":
        grid = [float(s) for s in cfg.get("sigma_grid", [])]
        _require(len(grid) >= 1 and all(s > 0 for s in grid), "need a non-empty positive sigma_grid")
        size = int(cfg.get("image_size", 64))
        instances = int(cfg.get("instances", 10))
        nsigma = float(cfg.get("noise_sigma", 0.05))
        theta = tuple(float(t) for t in cfg.get("theta", denoise_app.DEFAULT_THETA))
        clean = denoise_app.make_test_image(size)
        noisies = [
            denoise_app.add_noise(clean, nsigma, derive_rng(seed, engine.PURPOSE_NOISE, k))
            for k in range(instances)
        ]
        rows = []
        for sig in grid:
            swept = dict(cfg)
            swept["engine"] = {**cfg.get("engine", {}), "mh_sigma": sig}
            losses = []
            for k, noisy in enumerate(noisies):
                econf = _engine_config(swept, seed + k, "metropolis-hastings", workers, dims=1)
                res = denoise_app.denoise(noisy, econf, theta, truth=clean)
                losses.append(res.losses["map"])
            rows.append((sig, float(np.mean(losses))))
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "sweep.csv", ("sigma", "risk"), rows)
        return 0

    alpha = float(cfg.get("alpha", 20.0))
    _require(alpha > 0, "alpha must be > 0")
    eng = cfg.get("engine", {})
    grids = {
        "mh_sigma_xy": [float(s) for s in cfg.get("sigma_xy_grid", [eng.get("mh_sigma_xy", 0.5)])],
        "mh_sigma_r": [float(s) for s in cfg.get("sigma_r_grid", [eng.get("mh_sigma_r", 0.05)])],
        "mh_sigma_phi": [float(s) for s in cfg.get("sigma_phi_grid", [eng.get("mh_sigma_phi", 0.05)])],
    }
    for name, g in grids.items():
        _require(len(g) >= 1 and all(s > 0 for s in g), f"grid for {name} must be non-empty and positive")
    scene, ambiguous = _scene_from_config(cfg, seed)
    if bool(cfg.get("full_grid", False)):
        combos = [
            (xy, r, phi)
            for xy in grids["mh_sigma_xy"]
            for r in grids["mh_sigma_r"]
            for phi in grids["mh_sigma_phi"]
        ]
    else:
        # vary one parameter at a time about the engine-block baseline
        base = (grids["mh_sigma_xy"][0], grids["mh_sigma_r"][0], grids["mh_sigma_phi"][0])
        combos = []
        for i, key in enumerate(("mh_sigma_xy", "mh_sigma_r", "mh_sigma_phi")):
            for v in grids[key]:
                combo = list(base)
                combo[i] = v
                if tuple(combo) not in combos:
                    combos.append(tuple(combo))
    rows = []
    for xy, r, phi in combos:
        swept = dict(cfg)
        swept["engine"] = {**eng, "mh_sigma_xy": xy, "mh_sigma_r": r, "mh_sigma_phi": phi}
        econf = _engine_config(swept, seed, "metropolis-hastings", workers, dims=4)
        res = tracking.track(scene, econf, alpha, ambiguous)
        rows.append((xy, r, phi, res.rmsd))
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", ("sigma_xy", "sigma_r", "sigma_phi", "rmsd"), rows)
    return 0


# --------------------------------------------------------------- diagnose

def _read_traces(path: Path):
    """traces.csv -> ordered {(sampler, iteration, node, particle): [values]}."""
    chains: dict[tuple, list] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        need = {"sampler", "iteration", "node", "particle", "step", "value"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise ConfigError(f"{path}: not a trace CSV (missing columns)")
        for row in reader:
            key = (row["sampler"], int(row["iteration"]), int(row["node"]), int(row["particle"]))
            chains.setdefault(key, []).append(float(row["value"]))
    return chains


def cmd_diagnose(cfg: dict, seed: int, sampler: str | None, workers: int | None,
                 out: Path) -> int:
    paths = [Path(p) for p in cfg.get("traces", [])]
    _require(len(paths) >= 1, "need at least one trace file in 'traces'")
    for p in paths:
        _require(p.is_file(), f"trace file not found: {p}")
    k_max = int(cfg.get("k_max", 20))
    _require(k_max >= 1, "k_max must be >= 1")

    chains: dict[tuple, list] = {}
    for p in paths:
        for key, vals in _read_traces(p).items():
            chains.setdefault(key, []).extend(vals)

    header = ["kind", "sampler", "iteration", "node", "particle"] + [
        f"rho_{k}" for k in range(1, k_max + 1)
    ]
    rows = []
    failed = False
    groups: dict[tuple, list] = {}
    for (sam, it, node, particle), vals in chains.items():
        x = np.asarray(vals, dtype=float)
        if len(x) - len(x) // 2 < 4:
            rows.append(["error", sam, it, node, particle] + ["nan"] * k_max)
            failed = True
            continue
        rho = diagnostics.autocorrelation(x, k_max)
        rows.append(["chain", sam, it, node, particle] + [float(r) for r in rho[1:]])
        groups.setdefault((sam, it), []).append(rho[1:])
    for (sam, it), rhos in sorted(groups.items()):
        mean = np.mean(np.stack(rhos), axis=0)
        rows.append(["mean", sam, it, "", ""] + [float(r) for r in mean])

    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "autocorrelation.csv", header, rows)
    if failed:
        print("diagnose: some chains too short after burn-in", file=sys.stderr)
        return 1
    return 0


# ------------------------------------------------------------------- main

_COMMANDS = {
    "denoise": cmd_denoise,
    "track": cmd_track,
    "mh-sweep": cmd_mh_sweep,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="particlebp")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--sampler", default=None,
                       choices=["slice", "metropolis-hastings", "mh"],
                       help="override config sampler")
        p.add_argument("--workers", type=int, default=None, help="engine worker count")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        seed = _resolve_seed(cfg, args.seed)
        out = _resolve_out(cfg, args.out)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("workers must be >= 1")
        return _COMMANDS[args.command](cfg, seed, args.sampler, args.workers, out)
    except (ConfigError, ValueError, OSError) as e:
        print(f"particlebp {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
