"""Command-line interface.

Subcommands: analyze, compare, curve, hier, simulate, recover, replay.
Every run writes ``<command>_manifest.json`` to its output directory listing
the arguments, resolved seed and SHA-256 digests of inputs and outputs;
``replay`` re-executes a manifest and checks the digests match.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, formats
from .hierarchical import (DegenerateCovarianceError, HierarchicalError, credible_ellipse,
                           default_axes, hyper_posterior, predict_next_player)
from .ingest import MalformedInningsError, career_summary, parse_innings_file, serialize_innings
from .model import BattingParams, InningsCounts
from .nested import NestedSamplingError, NSConfig
from .player import (PARAMS, analyze_player, bayes_factor_vs_constant, compare_players, derive_seed,
                     predictive_effective_average, summarize)
from .simulate import CensorModel, recovery_experiment, simulate_career

log = logging.getLogger("hazard_bayes")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_MALFORMED = 4
EXIT_SAMPLER = 5
EXIT_INVALID = 6
EXIT_REPLAY_MISMATCH = 7

SEED_ENV = "HAZARD_BAYES_SEED"
DEFAULT_PARTICLES = 1000
DEFAULT_MCMC_STEPS = 1000


class ReplayMismatch(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{SEED_ENV}={env!r} is not an integer") from None


def _existing_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _config(args) -> NSConfig:
    return NSConfig(n_particles=args.particles, mcmc_steps=args.mcmc_steps, seed=args.seed)


def _summary_payload(rows) -> dict:
    return {name: row.to_dict() for name, row in rows.items()}


# --- analyze ---------------------------------------------------------------

def _analyze_one(job):
    player_id, records, config, n_samples = job
    counts = InningsCounts(records)
    post = analyze_player(counts, config, player_id=player_id, n_samples=n_samples)
    ev = bayes_factor_vs_constant(counts, config, varying=post)
    return post, ev


def cmd_analyze(args, ctx):
    data_path = _existing_file(args.data)
    ctx.inputs.append(data_path)
    parsed = parse_innings_file(data_path.read_text(encoding="utf-8"))
    if not parsed.players:
        raise MalformedInningsError([])
    players = list(parsed.players.items())
    if args.player:
        players = [(n, r) for n, r in players if n in set(args.player)]
        if not players:
            raise ValueError(f"none of {args.player} found in {data_path}")
    slugs = _unique_slugs([n for n, _ in players])
    jobs = []
    for i, ((name, records), slug) in enumerate(zip(players, slugs)):
        cfg = NSConfig(args.particles, args.mcmc_steps, seed=derive_seed(args.seed, i))
        jobs.append((slug, records, cfg, args.samples))
    workers = args.workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_analyze_one, jobs))
    else:
        results = [_analyze_one(j) for j in jobs]

    table = []
    for (name, records), (post, ev) in zip(players, results):
        slug = post.player_id
        rows = summarize(post)
        career = career_summary(records)
        formats.write_posterior_csv(ctx.output(f"{slug}_posterior.csv"), post)
        formats.write_json(ctx.output(f"{slug}_summary.json"), {
            "player": name,
            "params": _summary_payload(rows),
            "career": {
                "innings": career.innings, "not_outs": career.not_outs, "runs": career.runs,
                "high_score": str(career.high_score), "average": career.average_2dp,
                "hundreds": career.hundreds, "fifties": career.fifties,
            },
        })
        formats.write_json(ctx.output(f"{slug}_evidence.json"), {
            "player": name,
            "log_z": post.log_evidence, "log_z_err": post.log_evidence_err,
            "log_z0": ev.log_z0, "log_z0_err": ev.log_z0_err,
            "log_bayes_factor": ev.log_bayes_factor, "log_bayes_factor_err": ev.log_bayes_factor_err,
            "n_innings": post.n_innings, "n_not_out": post.n_not_out,
            "seed": post.config.seed,
            "diagnostics": post.diagnostics,
        })
        table.append((name, rows, ev))
    for name, rows, ev in table:
        cells = "  ".join(f"{k}={rows[k]}" for k in PARAMS)
        print(f"{name}: {cells}  log(Z/Z0)={ev.log_bayes_factor:.2f}")
    ctx.config = {"particles": args.particles, "mcmc_steps": args.mcmc_steps, "samples": args.samples,
                  "skipped_rows": parsed.rows_skipped}


def _unique_slugs(names):
    out, seen = [], {}
    for n in names:
        s = formats.slugify(n)
        if s in seen:
            seen[s] += 1
            s = f"{s}_{seen[s]}"
        else:
            seen[s] = 0
        out.append(s)
    return out


# --- compare / curve -------------------------------------------------------

def cmd_compare(args, ctx):
    a_path, b_path = _existing_file(args.a), _existing_file(args.b)
    ctx.inputs += [a_path, b_path]
    a, b = formats.read_posterior_csv(a_path), formats.read_posterior_csv(b_path)
    prob = compare_players(a, b, args.param, seed=args.seed)
    formats.write_json(ctx.output("comparison.json"), {
        "a": a.player_id, "b": b.player_id, "param": args.param, "p_a_greater": prob,
    })
    print(f"P({args.param}[{a.player_id}] > {args.param}[{b.player_id}]) = {prob:.4f}")


def cmd_curve(args, ctx):
    path = _existing_file(args.posterior)
    ctx.inputs.append(path)
    post = formats.read_posterior_csv(path)
    curve = predictive_effective_average(post, args.x_max)
    formats.write_curve_csv(ctx.output(f"{post.player_id}_curve.csv"), curve)
    print(f"{post.player_id}: predictive effective average {curve.predictive[0]:.2f} at 0 runs, "
          f"{curve.predictive[-1]:.2f} at {args.x_max}")


# --- hier ------------------------------------------------------------------

def cmd_hier(args, ctx):
    directory = Path(args.posteriors_dir)
    if not directory.is_dir():
        raise FileNotFoundError(f"posterior directory not found: {directory}")
    files = sorted(directory.glob(f"*{formats.POSTERIOR_SUFFIX}"))
    if not files:
        raise FileNotFoundError(f"no *{formats.POSTERIOR_SUFFIX} files in {directory}")
    ctx.inputs += files
    players = [formats.read_posterior_csv(f) for f in files]
    nu_axis, sigma_axis = default_axes(args.grid_nu, args.grid_sigma)
    grid = hyper_posterior(players, nu_axis, sigma_axis)
    rng = np.random.default_rng(args.seed)
    pred = predict_next_player(grid, args.draws, rng)

    formats.write_grid_csv(ctx.output("hypergrid.csv"), grid)
    formats.write_json(ctx.output("marginals.json"), {
        "nu": {"axis": grid.nu_axis.tolist(), "mass": grid.nu_marginal.tolist(),
               "summary": grid.nu_summary().to_dict()},
        "sigma": {"axis": grid.sigma_axis.tolist(), "mass": grid.sigma_marginal.tolist(),
                  "summary": grid.sigma_summary().to_dict()},
        "players": [p.player_id for p in players],
    })
    formats.write_json(ctx.output("next_player.json"), {
        "draws": args.draws, "params": _summary_payload(pred.summary),
    })
    formats.write_rows(ctx.output("next_player_samples.csv"), formats.POSTERIOR_COLUMNS,
                       (map(float, r) for r in np.column_stack([pred.natural, pred.internal[:, 0],
                                                               pred.internal[:, 2]])))
    e68 = credible_ellipse(pred.natural[:, :2], 0.68)
    e95 = credible_ellipse(pred.natural[:, :2], 0.95)
    ellipses = {f"{e.level:.2f}": {"center": list(e.center), "semi_axes": list(e.semi_axes),
                                   "angle": e.angle} for e in (e68, e95)}
    points = []
    for p in players:
        m = [float(np.median(p.mu1)), float(np.median(p.mu2))]
        points.append({"player": p.player_id, "mu1_median": m[0], "mu2_median": m[1],
                       "inside68": bool(e68.contains(m)[0]), "inside95": bool(e95.contains(m)[0])})
    formats.write_json(ctx.output("ellipses.json"), {"plane": ["mu1", "mu2"], "ellipses": ellipses,
                                                     "players": points})
    print(f"nu = {grid.nu_summary()}  sigma = {grid.sigma_summary()}")
    print("next player: " + "  ".join(f"{k}={pred.summary[k]}" for k in PARAMS))
    ctx.config = {"grid_nu": args.grid_nu, "grid_sigma": args.grid_sigma, "draws": args.draws}


# --- simulate / recover ----------------------------------------------------

def _true_params(args) -> BattingParams:
    return BattingParams(args.mu1, args.mu2, args.L)


def _censor(args) -> CensorModel:
    return CensorModel(args.censor_prob, mechanism=args.censor_mode.replace("-", "_"))


def cmd_simulate(args, ctx):
    p = _true_params(args)
    rng = np.random.default_rng(args.seed)
    career = simulate_career(p, args.n, _censor(args), rng)
    name = args.out or "simulated.csv"
    text = f"# simulated mu1={p.mu1!r} mu2={p.mu2!r} L={p.L!r} seed={args.seed}\n"
    text += serialize_innings({args.player: career})
    ctx.output(name).write_text(text, encoding="utf-8")
    c = career_summary(career)
    print(f"wrote {c.innings} innings ({c.not_outs} not out, average {c.average_2dp}) "
          f"to {ctx.out_dir / name}")


def cmd_recover(args, ctx):
    p = _true_params(args)
    report = recovery_experiment(p, args.n, _config(args), args.repeats, np.random.default_rng(args.seed),
                                 _censor(args), workers=args.workers or 1)
    rows = []
    for r in report.rows:
        c68, c95 = r.covered(68), r.covered(95)
        row = [r.repeat, r.seed]
        for k in PARAMS:
            row += [r.medians[k], *r.ci95[k], int(c68[k]), int(c95[k])]
        rows.append(row)
    header = ["repeat", "seed"]
    for k in PARAMS:
        header += [f"{k}_median", f"{k}_lo95", f"{k}_hi95", f"{k}_in68", f"{k}_in95"]
    formats.write_rows(ctx.output("recovery.csv"), header, rows)
    formats.write_json(ctx.output("recovery.json"), {
        "truth": dict(zip(PARAMS, p.as_tuple())), "n_innings": args.n, "repeats": args.repeats,
        "coverage68": report.coverage(68), "coverage95": report.coverage(95),
    })
    for k in PARAMS:
        print(f"{k}: 68% coverage {report.coverage(68)[k]:.2f}, 95% coverage {report.coverage(95)[k]:.2f}")


# --- replay ----------------------------------------------------------------

def cmd_replay(args, ctx):
    manifest_path = _existing_file(args.manifest)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for path, digest in manifest["inputs"].items():
        if not Path(path).is_file():
            raise FileNotFoundError(f"manifest input missing: {path}")
        if formats.sha256_file(path) != digest:
            raise ReplayMismatch(f"input {path} changed since the recorded run")
    work = Path(tempfile.mkdtemp(prefix="replay_"))
    here = Path.cwd()
    try:
        os.chdir(manifest["cwd"])
        code = run(list(manifest["argv"]) + ["--out-dir", str(work)])
        if code != EXIT_OK:
            raise ReplayMismatch(f"replayed command exited with code {code}")
        bad = [name for name, digest in manifest["outputs"].items()
               if formats.sha256_file(work / name) != digest]
    finally:
        os.chdir(here)
        shutil.rmtree(work, ignore_errors=True)
    if bad:
        raise ReplayMismatch(f"outputs differ from the recorded run: {', '.join(bad)}")
    print(f"replay of {manifest['command']} reproduced {len(manifest['outputs'])} output(s) exactly")


# --- plumbing --------------------------------------------------------------

class RunContext:
    def __init__(self, command: str, out_dir: Path):
        self.command = command
        self.out_dir = out_dir
        self.inputs: list[Path] = []
        self.outputs: list[str] = []
        self.config: dict = {}

    def output(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out_dir / name

    def write_manifest(self, argv, seed, started, finished):
        formats.write_json(self.out_dir / f"{self.command}_manifest.json", {
            "command": self.command,
            "argv": argv,
            "cwd": str(Path.cwd()),
            "seed": seed,
            "config": self.config,
            "version": __version__,
            "inputs": {str(p.resolve()): formats.sha256_file(p) for p in self.inputs},
            "outputs": {name: formats.sha256_file(self.out_dir / name) for name in self.outputs},
            "started": started,
            "finished": finished,
        })


def _add_sampler_args(p, particles=DEFAULT_PARTICLES, steps=DEFAULT_MCMC_STEPS):
    p.add_argument("--particles", type=int, default=particles, help="nested sampling particles")
    p.add_argument("--mcmc-steps", type=int, default=steps, help="MCMC steps per NS iteration")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hazard-bayes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out-dir", default=".", help="directory for outputs and the run manifest")
        p.add_argument("--seed", type=int, default=None, help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")

    p = sub.add_parser("analyze", help="fit players in an innings CSV")
    p.add_argument("--data", required=True, help="innings CSV (player,score)")
    p.add_argument("--player", action="append", help="restrict to this player (repeatable)")
    p.add_argument("--samples", type=int, default=2000, help="equal-weight posterior draws to keep")
    p.add_argument("--workers", type=int, default=0, help="worker processes (default: one per player)")
    _add_sampler_args(p)
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="P(param of A > param of B) from two posterior files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--param", choices=PARAMS + ("C", "D"), default="mu2")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("curve", help="predictive effective-average curve with credible bands")
    p.add_argument("--posterior", required=True)
    p.add_argument("--x-max", type=int, default=300)
    common(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("hier", help="pool posterior files into a (nu, sigma) hyperposterior")
    p.add_argument("--posteriors-dir", "--data", dest="posteriors_dir", required=True)
    p.add_argument("--grid-nu", type=int, default=200)
    p.add_argument("--grid-sigma", type=int, default=200)
    p.add_argument("--draws", type=int, default=100_000, help="next-player predictive draws")
    common(p)
    p.set_defaults(func=cmd_hier)

    p = sub.add_parser("simulate", help="simulate a career as an innings CSV")
    for name in ("--mu1", "--mu2", "--L"):
        p.add_argument(name, type=float, required=True)
    p.add_argument("--n", type=int, required=True, help="number of innings")
    p.add_argument("--censor-prob", type=float, default=0.0)
    p.add_argument("--censor-mode", choices=("closure", "at-score"), default="closure",
                   help="how not-outs arise (default: team innings closure)")
    p.add_argument("--player", default="simulated")
    p.add_argument("--out", default=None, help="output file name inside --out-dir")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="parameter-recovery coverage experiment")
    for name in ("--mu1", "--mu2", "--L"):
        p.add_argument(name, type=float, required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--censor-prob", type=float, default=0.1)
    p.add_argument("--censor-mode", choices=("closure", "at-score"), default="closure",
                   help="how not-outs arise (default: team innings closure)")
    p.add_argument("--workers", type=int, default=1)
    _add_sampler_args(p, 100, 100)
    common(p)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("replay", help="re-run a manifest and verify its outputs")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_replay, out_dir=None, seed=None)
    return parser


def _error_code(exc: BaseException) -> int:
    if isinstance(exc, FileNotFoundError):
        return EXIT_MISSING_FILE
    if isinstance(exc, (MalformedInningsError, formats.FormatError)):
        return EXIT_MALFORMED
    if isinstance(exc, NestedSamplingError):
        return EXIT_SAMPLER
    if isinstance(exc, ReplayMismatch):
        return EXIT_REPLAY_MISMATCH
    if isinstance(exc, (ValueError, HierarchicalError, DegenerateCovarianceError)):
        return EXIT_INVALID
    return EXIT_ERROR


def _recorded_argv(argv: list[str], seed) -> list[str]:
    # drop --out-dir so replays can redirect output; pin the resolved seed
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out-dir":
            skip = True
            continue
        if tok.startswith("--out-dir="):
            continue
        out.append(tok)
    if seed is not None and "--seed" not in out and not any(t.startswith("--seed=") for t in out):
        out += ["--seed", str(seed)]
    return out


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command != "replay":
            args.seed = _resolve_seed(args.seed)
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
        else:
            out_dir = Path(".")
        ctx = RunContext(args.command, out_dir)
        started = dt.datetime.now(dt.timezone.utc).isoformat()
        args.func(args, ctx)
        if args.command != "replay":
            finished = dt.datetime.now(dt.timezone.utc).isoformat()
            ctx.write_manifest(_recorded_argv(argv, args.seed), args.seed, started, finished)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        print(f"hazard-bayes {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return _error_code(exc)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
