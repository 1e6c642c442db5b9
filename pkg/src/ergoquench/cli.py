"""Command-line front end.

Subcommands:
  run       full experiment for one config (optionally a batch of seeds)
  spectrum  spectral diagnostics only
  oracle    Monte-Carlo moment estimates against the analytic predictions

Output directory precedence: --out flag, then the ERGOQUENCH_OUTPUT_DIR
environment variable, then output_dir from the config file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .ergodic_ensemble import second_moment_expectation
from .errors import PipelineError
from .experiment import (ExperimentConfig, diagonalize_split_halves,
                         find_product_eigenstates, prepare_protocol_state,
                         run_experiment, write_artifacts)
from .haar_oracle import estimate_moments
from .spectral import cluster_sectors, diagonalize, level_spacing_ratio
from .spin_chain import (build_basis, build_hamiltonian,
                         build_projector_observable, draw_disorder, symmetrized)

ENV_OUTPUT_DIR = "ERGOQUENCH_OUTPUT_DIR"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergoquench",
        description="Equilibration of disordered XXX chains vs ensemble predictions")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full experiment")
    p_run.add_argument("--config", required=True, help="path to a JSON config")
    p_run.add_argument("--realizations", type=int, default=None,
                       help="batch over this many consecutive disorder seeds")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_spec = sub.add_parser("spectrum", help="spectral diagnostics only")
    p_spec.add_argument("--config", required=True)
    p_spec.set_defaults(func=cmd_spectrum)

    p_orc = sub.add_parser("oracle", help="Monte-Carlo moment estimates")
    p_orc.add_argument("--config", required=True)
    p_orc.add_argument("--order", type=int, required=True)
    p_orc.add_argument("--samples", type=int, required=True)
    p_orc.set_defaults(func=cmd_oracle)
    return parser


def _load_config(path) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_file(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise PipelineError("config", str(exc)) from exc


def _resolve_out_dir(args, config: ExperimentConfig) -> str:
    if getattr(args, "out", None):
        return args.out
    return os.environ.get(ENV_OUTPUT_DIR) or config.output_dir


def cmd_run(args) -> int:
    config = _load_config(args.config)
    out_root = _resolve_out_dir(args, config)
    if args.realizations is None:
        result = run_experiment(config)
        write_artifacts(result, out_root)
        print(f"run: seed {config.disorder_seed} done in "
              f"{result.report.runtime_seconds:.1f} s -> {out_root}")
        return 0

    if args.realizations < 1:
        raise PipelineError("config", "--realizations must be >= 1")
    seeds = [config.disorder_seed + k for k in range(args.realizations)]
    ratios = []
    for seed in seeds:
        cfg = dataclasses.replace(config, disorder_seed=seed)
        result = run_experiment(cfg)
        write_artifacts(result, os.path.join(out_root, f"seed_{seed}"))
        ratios.append(result.report.spectral["r_mean"])
        print(f"run: seed {seed} done in "
              f"{result.report.runtime_seconds:.1f} s, r_mean={ratios[-1]:.4f}")
    aggregate = {
        "seeds": seeds,
        "r_mean_per_seed": ratios,
        "r_mean_average": float(np.mean(ratios)),
        "r_mean_std": float(np.std(ratios, ddof=1)) if len(ratios) > 1 else 0.0,
    }
    path = os.path.join(out_root, "aggregate.json")
    with open(path, "w") as f:
        json.dump(aggregate, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    print(f"run: batch of {len(seeds)} seeds -> {path}")
    return 0


def cmd_spectrum(args) -> int:
    config = _load_config(args.config)
    basis = build_basis(config.L, config.total_sz)
    disorder = draw_disorder(config.L, config.h, config.disorder_seed)
    eig = diagonalize(build_hamiltonian(basis, config.J, disorder))
    e = eig.energies
    width = float(e[-1] - e[0])
    tol = (config.degeneracy_tol if config.degeneracy_tol is not None
           else 1e-8 * width)
    partition = cluster_sectors(e, tol)
    print(json.dumps({
        "dim": basis.dim,
        "e_min": float(e[0]),
        "e_max": float(e[-1]),
        "spectral_width": width,
        "r_mean": level_spacing_ratio(e),
        "degeneracy_tol": tol,
        "n_sectors": partition.n_sectors,
    }, indent=2, sort_keys=True))
    return 0


def cmd_oracle(args) -> int:
    if args.order < 1:
        raise PipelineError("config", f"--order must be >= 1, got {args.order}")
    if args.samples < 2:
        raise PipelineError("config", f"--samples must be >= 2, got {args.samples}")
    config = _load_config(args.config)
    # reuse the pipeline up to state preparation, skipping the dynamics
    basis = build_basis(config.L, config.total_sz)
    disorder = draw_disorder(config.L, config.h, config.disorder_seed)
    half = config.L // 2
    eig = diagonalize(build_hamiltonian(basis, config.J, disorder))
    e = eig.energies
    tol = (config.degeneracy_tol if config.degeneracy_tol is not None
           else 1e-8 * float(e[-1] - e[0]))
    partition = cluster_sectors(e, tol)
    ham_right = build_hamiltonian(basis, config.J, disorder,
                                  bond_range=(half, config.L - 2),
                                  field_sites=(half, config.L - 1))
    splits = diagonalize_split_halves(config.L, config.J, disorder, config.total_sz)
    prod1 = find_product_eigenstates(splits, basis, "near_min",
                                     (float(e[0]), float(e[-1])))
    prod2 = find_product_eigenstates(splits, basis, "near_max",
                                     (float(e[0]), float(e[-1])))
    phi1 = eig.vector_to_eigenbasis(prod1.vector)
    phi2 = eig.vector_to_eigenbasis(prod2.vector)
    observables = {
        "H_R": symmetrized(eig.to_eigenbasis(ham_right.entries)),
        "Q": build_projector_observable(phi1, phi2),
    }

    out: dict = {"order": args.order, "n_samples": args.samples,
                 "protocols": {}}
    for protocol in config.protocols:
        rho0 = prepare_protocol_state(phi1, phi2, protocol)
        block = {}
        for name, obs in observables.items():
            est = estimate_moments(rho0, partition, [obs] * args.order,
                                   order=args.order, n_samples=args.samples,
                                   seed=config.disorder_seed)[0]
            entry = {"estimate": est.value, "std_error": est.std_error}
            if args.order <= 2:
                pred = second_moment_expectation(rho0, partition, obs, obs)
                entry["analytic"] = (pred.mean_a if args.order == 1
                                     else pred.second_moment)
            block[name] = entry
        out["protocols"][protocol] = block
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything unexpected still gets a stage tag
        print(f"error: [unexpected] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
