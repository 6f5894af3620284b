"""Command-line front end.

Subcommands: certify, transitive, invariance, simulate, replay. Exit codes:
0 overall pass, 1 usage/config error, 2 hypothesis or condition failure,
3 invariance escape witnesses.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import reports
from .certify import certify
from .config import RunConfig, load_config
from .dynamics import SelectorPolicy, integrate
from .errors import BasincertError, ConfigError, PreconditionFailed, SchemaMismatch
from .fields import distance_field
from .invariant import verify_forward_invariance
from .transitivity import certify_transitive, check_transitivity_conditions

ENV_OUT = "BASINCERT_OUT"

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS_FAIL = 2
EXIT_INVARIANCE_WITNESS = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        raise ConfigError("<usage>", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="basincert",
                     description="Sampling-based Lyapunov stability certification "
                                 "for differential inclusions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("certify", "full certification: hypotheses, construction, trajectories"),
        ("transitive", "two-stage certification through an intermediate set"),
        ("invariance", "forward-invariance stress test of the configured region"),
        ("simulate", "integrate and export trajectories, no certification"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output directory "
                       f"(default: ${ENV_OUT} or ./basincert_out)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--grid", type=float, default=None, help="grid spacing h")
        p.add_argument("--dt", type=float, default=None, help="integration step")
        p.add_argument("--horizon", type=float, default=None,
                       help="time horizon (T for invariance/simulate, "
                            "convergence horizon for certify)")
        p.add_argument("--starts", type=int, default=None,
                       help="number of start points for invariance verification")
        p.add_argument("--policy", default=None,
                       choices=["first", "mixture", "random", "adversarial", "all"])
    rp = sub.add_parser("replay", help="re-run recorded witnesses deterministically")
    rp.add_argument("--certificate", required=True, help="path to certificate.json")
    rp.add_argument("--config", default=None, help="config file to hash-check")
    return parser


def _apply_flags(config: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.grid is not None:
        if args.grid <= 0:
            raise ConfigError("--grid", "must be positive")
        updates["h"] = args.grid
    if args.dt is not None:
        if args.dt <= 0:
            raise ConfigError("--dt", "must be positive")
        updates["dt"] = args.dt
    if args.starts is not None:
        updates["n_starts_inv"] = args.starts
    if args.horizon is not None:
        if config.mode in ("invariance",):
            updates["T_inv"] = args.horizon
        else:
            updates["T_conv"] = args.horizon
    if args.policy is not None and args.policy != "all":
        updates["policies"] = (args.policy,)
    if args.horizon is not None and config.mode == "simulate":
        config.sim_T = args.horizon
    if updates:
        config.params = replace(config.params, **updates)
        seed = updates.get("seed")
        if seed is not None:
            config.seed = seed
        for inst in (config.instance, config.transitivity):
            if inst is not None:
                inst.params = config.params
    if args.out is not None:
        config.output_dir = args.out
    return config


def execute(config: RunConfig, outdir: str | None):
    """Run the configured mode; returns (certificate payload, exit code).

    With outdir=None nothing is written (used by replay's deterministic
    re-run); otherwise certificate.json, witnesses.csv, trajectories/ and
    plotdata/ land there atomically.
    """
    if config.mode == "certify":
        cert = certify(config.instance)
        payload = reports.certificate_payload(cert, config)
        code = _certificate_exit(payload)
    elif config.mode == "transitive":
        conditions = check_transitivity_conditions(config.transitivity)
        if any(not v.passed for v in conditions.values()):
            payload = {
                "schema_version": reports.SCHEMA_VERSION,
                "mode": config.mode,
                "instance": config.name,
                "overall": "fail",
                "claim": "not certified (transitivity conditions failed)",
                "hypotheses": {},
                "transitivity": {
                    "conditions": {k: v.to_dict() for k, v in conditions.items()},
                },
                "seed": config.seed,
                "config": config.raw,
                "config_hash": config.hash(),
                "created_at": datetime.now(timezone.utc).isoformat(),
            }
            code = EXIT_HYPOTHESIS_FAIL
            cert = None
        else:
            cert = certify_transitive(config.transitivity)
            payload = reports.certificate_payload(cert, config)
            code = _certificate_exit(payload)
    elif config.mode == "invariance":
        inst = config.instance
        report = verify_forward_invariance(
            inst.inclusion, inst.xprime, n_starts=inst.params.n_starts_inv,
            T=inst.params.T_inv, dt=inst.params.dt, policies=inst.params.policies,
            h=inst.params.h, seed=inst.params.seed, target=inst.target)
        payload = reports.invariance_payload(report, config)
        code = EXIT_PASS if report.invariant else EXIT_INVARIANCE_WITNESS
        cert = None
    elif config.mode == "simulate":
        payload = _simulate_payload(config)
        code = EXIT_PASS
        cert = None
    else:  # unreachable: parse_config validated the mode
        raise ConfigError("mode", f"unhandled mode {config.mode!r}")

    if outdir is not None:
        reports.write_certificate(payload, outdir)
        reports.write_witnesses_csv(payload, outdir)
        try:
            if config.mode == "simulate":
                _write_sim_trajectories(config, outdir)
            elif config.instance is not None:
                reports.export_trajectories(config, outdir)
                reports.write_plotdata(config,
                                       cert if config.mode == "certify" else None,
                                       outdir)
                reports.write_overlay(config, outdir)
        except BasincertError as exc:
            # The certificate and witnesses are already on disk; a dynamic
            # that cannot be integrated to the export horizon (e.g. it blows
            # out of the domain) should not void them.
            print(f"warning: trajectory/plot export incomplete: {exc}",
                  file=sys.stderr)
    return payload, code


def _certificate_exit(payload: dict) -> int:
    hyps = payload.get("hypotheses") or {}
    if any(v and v.get("status") == "fail" for v in hyps.values()):
        return EXIT_HYPOTHESIS_FAIL
    trans = (payload.get("transitivity") or {}).get("conditions") or {}
    if any(v.get("status") == "fail" for v in trans.values()):
        return EXIT_HYPOTHESIS_FAIL
    inv = payload.get("invariance") or {}
    if inv.get("witnesses"):
        return EXIT_INVARIANCE_WITNESS
    return EXIT_PASS if payload.get("overall") == "pass" else EXIT_HYPOTHESIS_FAIL


def _simulate_payload(config: RunConfig) -> dict:
    inst = config.instance
    starts = config.starts
    if starts is None:
        rng = np.random.default_rng(config.seed)
        pool = inst.xprime.sample(inst.params.h)
        if len(pool) == 0:
            raise PreconditionFailed("no sample points to start trajectories from")
        idx = rng.integers(0, len(pool), size=config.n_sim_starts)
        starts = pool[idx]
        config.starts = starts
    return {
        "schema_version": reports.SCHEMA_VERSION,
        "mode": "simulate",
        "instance": config.name,
        "overall": "pass",
        "claim": f"simulated {len(starts)} starts over T={config.sim_T}",
        "hypotheses": {},
        "n_starts": int(len(starts)),
        "T": config.sim_T,
        "seed": config.seed,
        "config": config.raw,
        "config_hash": config.hash(),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def _write_sim_trajectories(config: RunConfig, outdir: str):
    inst = config.instance
    d_star = distance_field(inst.target, h=inst.params.h)
    fields = {"W": inst.W, "W_tilde": inst.W_tilde, "dist": d_star}
    for pol in inst.params.policies:
        policy = (SelectorPolicy("adversarial", d_star) if pol == "adversarial"
                  else SelectorPolicy(pol))
        for i, x0 in enumerate(config.starts):
            traj = integrate(inst.inclusion, x0, config.sim_T, inst.params.dt,
                             policy=policy, seed=inst.params.seed + i)
            reports.write_trajectory_csv(traj, outdir, f"{policy.kind}_{i:03d}",
                                         fields=fields)


def _resolve_outdir(config: RunConfig) -> str:
    return (config.output_dir or os.environ.get(ENV_OUT) or "./basincert_out")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "replay":
            try:
                ok, message = reports.replay(args.certificate, args.config)
            except FileNotFoundError as exc:
                raise ConfigError("<file>", str(exc)) from exc
            print(("replay ok: " if ok else "replay FAILED: ") + message)
            return EXIT_PASS if ok else EXIT_HYPOTHESIS_FAIL
        config = load_config(args.config)
        config = _apply_flags(config, args)
        outdir = _resolve_outdir(config)
        payload, code = execute(config, outdir)
        print(f"[{config.mode}] {payload.get('instance', config.name)}: "
              f"{payload.get('overall')} — {payload.get('claim', '')}")
        print(f"artifacts in {outdir} (exit {code})")
        return code
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BasincertError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS_FAIL


if __name__ == "__main__":
    sys.exit(main())
