"""Command line entry point.

    eemcs run <ee|mcs|compare|kernel-lab> --config PATH --seed N --out DIR [--jobs N] [--trace]

Exit codes: 0 when every check passes, 1 when a check fails or a run
aborts, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import estimate, kernel_lab
from .config import ConfigError, RunConfig, emit_config, load_config
from .ee import EEConfig, check_buffer_partition, run_ladder
from .mcs import default_min_stage_steps, run_mcs
from .streams import SAMPLER_CODES

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("ee", "mcs", "compare", "kernel-lab")
BUILTIN_SCENARIOS = ("limit-kernel", "product-convergence", "setwise", "occupation")


class CheckFailure(RuntimeError):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eemcs", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run a sampler, the comparison or the kernel lab")
    r.add_argument("command", choices=COMMANDS)
    r.add_argument("--config", required=True, help="key = value config file")
    r.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for replications")
    r.add_argument("--trace", action="store_true", help="also write full per-step traces")
    return p


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _seed_for(cfg: RunConfig, sampler: str):
    return np.random.SeedSequence([cfg.seed, SAMPLER_CODES[sampler]])


def _require_sampler(cfg: RunConfig, command: str) -> None:
    if not cfg.has_sampler:
        raise ConfigError([f"{command}: the config has no model"])


def cmd_ee(cfg: RunConfig, out: str, trace: bool) -> int:
    _require_sampler(cfg, "ee")
    model, ladder = cfg.build_model(), cfg.build_ladder()
    props = cfg.build_proposals(ladder)
    N = cfg.n_values[0]
    run = run_ladder(model, ladder, EEConfig(p_ee=cfg.p_ee, burn_in_N=cfg.burn_in_N,
                                             flatten=cfg.flatten),
                     props, n_steps=N, rng=_seed_for(cfg, "EE"), s0=cfg.s0)
    samples = run.samples()
    samples.to_csv(os.path.join(out, "samples.csv"))
    p_hat = estimate.ring_probs_from_samples(samples, ladder.n_rings, chain=0)
    sources = estimate.choose_sources(samples, ladder.n_rings, ladder.n_temps,
                                      cfg.min_ring_samples)
    X0 = samples.x[samples.chain == 0]
    rows = []
    for name in cfg.active_functionals:
        g = estimate.FUNCTIONALS[name][1]
        est = estimate.ring_decomposed_estimate(samples, g, p_hat, model, ladder, sources=sources)
        rows.append([name, _fmt(est.combined), _fmt(float(np.mean(g(X0, model)))),
                     _fmt(est.coverage)])
    _write_rows(os.path.join(out, "estimates.csv"),
                ["functional", "estimate", "plain_estimate", "coverage"], rows)
    _write_rows(os.path.join(out, "ring_probs.csv"), ["ring", "p_hat"],
                [[j, _fmt(p)] for j, p in enumerate(p_hat)])
    if trace:
        b = run.buffers
        _write_rows(os.path.join(out, "trace.csv"),
                    ["chain", "step", "ring", "kind", "energy"]
                    + [f"x{k}" for k in range(model.dimension)],
                    ([c, k, int(b.hist_ring[c, k]), int(b.hist_kind[c, k]), _fmt(b.hist_h[c, k])]
                     + [_fmt(v) for v in b.hist_x[c, k]]
                     for c in range(run.n_chains) for k in range(int(run.n_steps[c]))))
    print(f"ee: {run.n_chains} chains, N = {N}, backend {run.backend}, "
          f"{run.clamps} energies clamped to the lowest ring")
    if not check_buffer_partition(run.buffers, ladder):
        raise CheckFailure("ee: ring buffers do not partition the chain histories")
    return EXIT_OK


def cmd_mcs(cfg: RunConfig, out: str, trace: bool) -> int:
    _require_sampler(cfg, "mcs")
    model, ladder = cfg.build_model(), cfg.build_ladder()
    props = cfg.build_proposals(ladder)
    N = cfg.n_values[0]
    run = run_mcs(model, ladder, proposals=props, theta=cfg.theta, gamma0=cfg.gamma0, c=cfg.c,
                  n_steps=ladder.n_temps * N, rng=_seed_for(cfg, "MCS"), s0=cfg.s0,
                  min_stage_steps=default_min_stage_steps(ladder, cfg.min_stage_factor))
    run.write_weights(os.path.join(out, "weights.csv"))
    if trace:
        run.write_trace(os.path.join(out, "trace.csv"))
    print(f"mcs: {run.n_steps} steps, {run.table.stage_index} stage advances, "
          f"backend {run.backend}")
    if run.burn_in is None:
        raise CheckFailure("mcs: no flat-histogram stage advance within the step budget")
    samples = run.samples()
    samples.to_csv(os.path.join(out, "samples.csv"))
    p_hat = estimate.ring_probs_from_weights(run.table)
    sources = estimate.choose_sources(samples, ladder.n_rings, ladder.n_temps,
                                      cfg.min_ring_samples)
    rows = []
    for name in cfg.active_functionals:
        est = estimate.ring_decomposed_estimate(samples, estimate.FUNCTIONALS[name][1], p_hat,
                                                model, ladder, sources=sources)
        rows.append([name, _fmt(est.combined), _fmt(est.coverage)])
    _write_rows(os.path.join(out, "estimates.csv"), ["functional", "estimate", "coverage"], rows)
    _write_rows(os.path.join(out, "ring_probs.csv"), ["ring", "p_hat"],
                [[j, _fmt(p)] for j, p in enumerate(p_hat)])
    return EXIT_OK


def cmd_compare(cfg: RunConfig, out: str, jobs: int) -> int:
    _require_sampler(cfg, "compare")
    model, ladder = cfg.build_model(), cfg.build_ladder()
    props = cfg.build_proposals(ladder)
    settings = cfg.settings()
    ee_res, mc_res = [], []
    for k, N in enumerate(cfg.n_values):
        for sampler, bucket in (("EE", ee_res), ("MCS", mc_res)):
            bucket.append(estimate.replication_experiment(
                model, ladder, settings, sampler, cfg.replications, cfg.seed, N, n_index=k,
                functionals=cfg.active_functionals, jobs=jobs, proposals=props))
        print(f"compare: N = {N} done ({cfg.replications} replications per sampler)")
    table = estimate.comparison_table(ee_res, mc_res)
    table.to_csv(os.path.join(out, "comparison.csv"))
    estimate.write_raw_estimates(os.path.join(out, "raw_estimates.csv"), ee_res + mc_res)
    _write_rows(os.path.join(out, "sigma.csv"), ["N", "sampler"] + table.labels,
                [[r.N, r.sampler] + [_fmt(s) for s in r.sigma] for r in ee_res + mc_res])
    with open(os.path.join(out, "comparison.csv")) as fh:
        sys.stdout.write(fh.read())
    bad = [(N, lab) for N, vals in table.rows.items()
           for lab, v in zip(table.labels, vals) if not math.isfinite(v)]
    if bad:
        raise CheckFailure(f"estimate: undefined improvement entries {bad}")
    return EXIT_OK


def cmd_kernel_lab(cfg: RunConfig, out: str) -> int:
    names = BUILTIN_SCENARIOS if cfg.scenario in (None, "all") else (cfg.scenario,)
    reports = []
    for name in names:
        params = {"seed": cfg.seed}
        if cfg.kernel_file is not None:
            params["kernel_file"] = cfg.kernel_file
        rep = kernel_lab.run_scenario(name, **params)
        reports.append(rep)
        print(f"[{name}]")
        print(rep.summary())
    with open(os.path.join(out, "kernel_lab.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "check", "passed", "value", "threshold", "detail"])
        for rep in reports:
            for c in rep.checks:
                w.writerow([rep.scenario, c.name, int(c.passed), repr(c.value),
                            repr(c.threshold), c.detail])
    failed = [f"{r.scenario}/{c.name}" for r in reports for c in r.checks if not c.passed]
    if failed:
        raise CheckFailure(f"kernel-lab: failed checks {failed}")
    return EXIT_OK


def run(command: str, cfg: RunConfig, out: str, jobs: int = 1, trace: bool = False) -> int:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.txt"), "w") as fh:
        fh.write(emit_config(cfg))
    if command == "ee":
        return cmd_ee(cfg, out, trace)
    if command == "mcs":
        return cmd_mcs(cfg, out, trace)
    if command == "compare":
        return cmd_compare(cfg, out, jobs)
    return cmd_kernel_lab(cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise ConfigError([f"config: cannot read {args.config}: {exc.strerror}"]) from exc
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError(["seed: must be an unsigned 64-bit integer"])
            cfg = replace(cfg, seed=args.seed)
        out = args.out if args.out is not None else cfg.out
        if out is None:
            raise ConfigError(["out: give --out or set out in the config"])
        if args.jobs < 1:
            raise ConfigError(["jobs: must be at least 1"])
        if args.command == "kernel-lab" and cfg.scenario == "custom" and not cfg.kernel_file:
            raise ConfigError(["kernel_file: required by the custom scenario"])
        return run(args.command, cfg, out, args.jobs, args.trace)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckFailure, RuntimeError, ValueError, OSError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
