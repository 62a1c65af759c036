"""Command-line front end.

Subcommands: train, sweep-mse, shatter, sharpness, vgnorm, hardfn-verify,
rates.  Every invocation writes its artifacts plus a manifest (config, its
hash, library versions, file hashes) into --out.  Exit codes: 0 success,
2 invalid config or arguments, 3 run failure (including a failed
verification in hardfn-verify).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from .harness import (
    ShatterConfig,
    SweepConfig,
    preset_epochs,
    run_cell_with_log,
    run_mse_sweep,
    run_shattering_experiment,
    write_manifest,
)
from .hardfn import (
    atom_l2_constants,
    atom_l2_norm,
    ball_volume,
    build_hard_family,
    indistinguishable_probability,
    indistinguishable_probability_mc,
    member_values,
    pairwise_sq_distances,
    varshamov_gilbert,
)
from .nets import save_checkpoint
from .numerics import derive_rng, sample_uniform_ball
from .rates import exponent_table_to_csv
from .sharpness import regularity_certificate
from .training import TrainConfig, train_log_to_csv

__all__ = ["ConfigError", "main"]


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


_CONFIG_ERRORS = (ConfigError, ValueError, TypeError, KeyError, OSError)


def _merge(defaults: dict, override: dict, context: str) -> dict:
    unknown = sorted(set(override) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown {context} keys: {unknown}")
    merged = dict(defaults)
    merged.update(override)
    return merged


_TRAIN_DEFAULTS = {
    "eta": 0.1,
    "epochs": 100,
    "epoch_preset": None,
    "weight_decay": 0.0,
    "decay_biases": True,
    "clip_threshold": 50.0,
    "sharpness_every": 0,
    "telemetry_rel_tol": 1e-6,
    "telemetry_max_iters": 5000,
}


def _train_config(raw: dict, seed: int) -> TrainConfig:
    merged = _merge(_TRAIN_DEFAULTS, raw, "train")
    preset = merged.pop("epoch_preset")
    if preset is not None:
        merged["epochs"] = preset_epochs(preset, merged["eta"])
    return TrainConfig(seed=seed, **merged)


def _cell_sweep_config(raw: dict, args) -> SweepConfig:
    defaults = {"d": 2, "n": 32, "width_rule": 4, "sigma": 0.5, "holdout_size": 10000, "train": {}}
    merged = _merge(defaults, raw, "config")
    return SweepConfig(
        dims=(merged["d"],),
        sample_sizes=(merged["n"],),
        train=_train_config(merged["train"], args.seed),
        sigma=merged["sigma"],
        seeds_per_cell=1,
        width_rule=merged["width_rule"],
        holdout_size=merged["holdout_size"],
        master_seed=args.seed,
    )


def _dump_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_train(raw: dict, args):
    return _cell_sweep_config(raw, args)


def _execute_train(cfg: SweepConfig, args) -> int:
    d, n = cfg.dims[0], cfg.sample_sizes[0]
    record, log, _ = run_cell_with_log(cfg, d, n, 0)
    out = args.out
    train_log_to_csv(log, os.path.join(out, "training_log.csv"))
    save_checkpoint(log.net, os.path.join(out, "checkpoint.bin"))
    _dump_json(os.path.join(out, "record.json"), dataclasses.asdict(record))
    write_manifest(
        out,
        {"command": "train", **cfg.as_dict()},
        ["training_log.csv", "checkpoint.bin", "record.json"],
    )
    print(
        f"trained d={d} n={n} width={record.width}: "
        f"final_loss={record.final_train_loss:.6g} sharpness={record.final_sharpness:.6g}"
    )
    return 0


def _prepare_sweep(raw: dict, args):
    defaults = {
        "dims": [1, 5],
        "sample_sizes": [32, 64, 128],
        "sigma": 1.0,
        "seeds_per_cell": 5,
        "width_rule": 4,
        "mse_mode": "both",
        "holdout_size": 10000,
        "train": {},
    }
    merged = _merge(defaults, raw, "config")
    return SweepConfig(
        dims=tuple(merged["dims"]),
        sample_sizes=tuple(merged["sample_sizes"]),
        train=_train_config(merged["train"], args.seed),
        sigma=merged["sigma"],
        seeds_per_cell=merged["seeds_per_cell"],
        width_rule=merged["width_rule"],
        mse_mode=merged["mse_mode"],
        holdout_size=merged["holdout_size"],
        master_seed=args.seed,
        output_dir=args.out,
    )


def _execute_sweep(cfg: SweepConfig, args) -> int:
    result = run_mse_sweep(cfg, threads=args.threads)
    for mode, per_d in sorted(result.slopes.items()):
        for d, slope in sorted(per_d.items()):
            shown = "n/a" if slope is None else f"{slope:.4f}"
            print(f"slope[{mode}] d={d}: {shown}")
    print(f"{len(result.records)} records, {len(result.failures)} failures -> {args.out}")
    if not result.records:
        print("every cell failed", file=sys.stderr)
        return 3
    return 0


def _prepare_shatter(raw: dict, args):
    defaults = {
        "d": 10,
        "n": 512,
        "width": 2048,
        "sigma": 1.0,
        "epochs": 20000,
        "eta_large": 0.9,
        "eta_decay": 0.01,
        "weight_decay": 0.1,
        "clip_threshold": 10.0,
        "sharpness_every": 0,
        "telemetry_rel_tol": 1e-6,
        "telemetry_max_iters": 5000,
    }
    merged = _merge(defaults, raw, "config")
    return ShatterConfig(master_seed=args.seed, output_dir=args.out, **merged)


def _execute_shatter(cfg: ShatterConfig, args) -> int:
    result = run_shattering_experiment(cfg)
    for arm in ("large_step", "weight_decay"):
        rec = getattr(result, arm)
        print(
            f"{arm}: train_mse={2.0 * rec.final_train_loss:.4f} "
            f"median_activation={rec.median_activation:.4f} "
            f"sparse_share={rec.sparse_neuron_share:.4f} sharpness={rec.final_sharpness:.4g}"
        )
    print(f"artifacts -> {args.out}")
    return 0


def _prepare_sharpness(raw: dict, args):
    defaults = {
        "d": 2,
        "n": 32,
        "width_rule": 4,
        "sigma": 0.5,
        "holdout_size": 10000,
        "train": {},
        "certificate_rel_tol": 1e-10,
        "certificate_max_iters": 20000,
    }
    merged = _merge(defaults, raw, "config")
    cell_raw = {k: merged[k] for k in ("d", "n", "width_rule", "sigma", "holdout_size", "train")}
    return _cell_sweep_config(cell_raw, args), merged


def _execute_sharpness(prepared, args) -> int:
    cfg, merged = prepared
    d, n = cfg.dims[0], cfg.sample_sizes[0]
    record, log, data = run_cell_with_log(cfg, d, n, 0)
    cert = regularity_certificate(
        log.net,
        data,
        rel_tol=merged["certificate_rel_tol"],
        max_iters=merged["certificate_max_iters"],
        rng=derive_rng(args.seed, 99),
    )
    out = args.out
    save_checkpoint(log.net, os.path.join(out, "checkpoint.bin"))
    _dump_json(
        os.path.join(out, "sharpness.json"),
        {
            "sharpness": cert.lambda_max,
            "gauss_newton_sharpness": cert.gauss_newton_lambda_max,
            "certificate": dataclasses.asdict(cert),
            "record": dataclasses.asdict(record),
        },
    )
    write_manifest(
        out,
        {"command": "sharpness", **cfg.as_dict()},
        ["checkpoint.bin", "sharpness.json"],
    )
    print(
        f"sharpness={cert.lambda_max:.6g} certificate_holds={cert.holds} "
        f"term_a_holds={cert.term_a_holds}"
    )
    return 0


def _prepare_vgnorm(raw: dict, args):
    merged = _merge({"code_length": 16, "target": None}, raw, "config")
    if merged["code_length"] < 8:
        raise ConfigError(f"code_length must be >= 8, got {merged['code_length']}")
    return merged


def _execute_vgnorm(merged: dict, args) -> int:
    k = merged["code_length"]
    family = varshamov_gilbert(k, rng=derive_rng(args.seed, 0), target=merged["target"])
    diffs = family.bits[:, None, :] != family.bits[None, :, :]
    pair_dist = diffs.sum(axis=2)
    audit = int(pair_dist[np.triu_indices(family.size, k=1)].min()) if family.size > 1 else k
    required_distance = math.ceil(k / 8)
    required_size = merged["target"] or math.ceil(2 ** (k / 8))
    passed = audit >= required_distance and family.size >= required_size
    payload = {
        "code_length": k,
        "size": family.size,
        "min_distance": family.min_distance,
        "audit_min_distance": audit,
        "required_min_distance": required_distance,
        "required_size": required_size,
        "pass": passed,
    }
    _dump_json(os.path.join(args.out, "vgnorm.json"), payload)
    write_manifest(args.out, {"command": "vgnorm", "seed": args.seed, **merged}, ["vgnorm.json"])
    print(f"code_length={k}: size={family.size} min_distance={audit} pass={passed}")
    return 0 if passed else 3


def _prepare_hardfn(raw: dict, args):
    defaults = {
        "d": 3,
        "eps": 0.2,
        "n_atoms": None,
        "amplitude": 1.0,
        "pair": [0, 1],
        "n_obs": 50,
        "mc_trials": 20000,
        "l2_samples": 200000,
    }
    merged = _merge(defaults, raw, "config")
    if len(merged["pair"]) != 2:
        raise ConfigError("pair must hold exactly two member indices")
    return merged


def _execute_hardfn(merged: dict, args) -> int:
    d, eps = merged["d"], merged["eps"]
    family = build_hard_family(
        derive_rng(args.seed, 0), d, eps, merged["n_atoms"], merged["amplitude"]
    )
    i, j = merged["pair"]
    if not (0 <= i < family.size and 0 <= j < family.size):
        raise ConfigError(f"pair {merged['pair']} out of range for family of size {family.size}")

    lo, hi = atom_l2_constants(d)
    atom = atom_l2_norm(d, eps)
    scale = eps ** ((d + 5) / 2)
    atom_pass = lo * scale * (1.0 - 1e-9) <= atom <= hi * scale * (1.0 + 1e-9)

    closed_dist = float(pairwise_sq_distances(family)[i, j])
    mc_rng = derive_rng(args.seed, 1)
    points = sample_uniform_ball(mc_rng, d, merged["l2_samples"])
    gap = member_values(family, i, points) - member_values(family, j, points)
    vol = ball_volume(d)
    mc_dist = float(np.mean(gap**2) * vol)
    dist_se = float(np.std(gap**2) * vol / np.sqrt(merged["l2_samples"]))
    dist_pass = abs(closed_dist - mc_dist) <= 4.0 * dist_se

    hamming = int(np.sum(family.code.bits[i] != family.code.bits[j]))
    q_closed = indistinguishable_probability(d, eps, hamming, merged["n_obs"])
    q_mc = indistinguishable_probability_mc(
        derive_rng(args.seed, 2), family, i, j, merged["n_obs"], merged["mc_trials"]
    )
    q_se = float(np.sqrt(max(q_closed * (1.0 - q_closed), 1e-12) / merged["mc_trials"]))
    q_pass = abs(q_closed - q_mc) <= 4.0 * q_se

    payload = {
        "family_size": family.size,
        "n_atoms": family.n_atoms,
        "atom_l2": {"value": atom, "lower": lo * scale, "upper": hi * scale, "pass": atom_pass},
        "pair_sq_distance": {
            "closed_form": closed_dist,
            "monte_carlo": mc_dist,
            "standard_error": dist_se,
            "pass": dist_pass,
        },
        "indistinguishable_probability": {
            "closed_form": q_closed,
            "monte_carlo": q_mc,
            "standard_error": q_se,
            "pass": q_pass,
        },
        "pass": atom_pass and dist_pass and q_pass,
    }
    _dump_json(os.path.join(args.out, "hardfn.json"), payload)
    write_manifest(
        args.out, {"command": "hardfn-verify", "seed": args.seed, **merged}, ["hardfn.json"]
    )
    print(
        f"atom_l2 pass={atom_pass}, pair_distance pass={dist_pass}, "
        f"indistinguishability pass={q_pass}"
    )
    return 0 if payload["pass"] else 3


def _prepare_rates(raw: dict, args):
    merged = _merge({"dims": list(range(1, 11))}, raw, "config")
    if not merged["dims"] or min(merged["dims"]) < 1:
        raise ConfigError("dims must be a nonempty list of positive integers")
    return merged


def _execute_rates(merged: dict, args) -> int:
    path = os.path.join(args.out, "rates.csv")
    exponent_table_to_csv(path, merged["dims"])
    write_manifest(args.out, {"command": "rates", **merged}, ["rates.csv"])
    print(f"wrote exponent table for d in {merged['dims']} -> {path}")
    return 0


_COMMANDS = {
    "train": (_prepare_train, _execute_train),
    "sweep-mse": (_prepare_sweep, _execute_sweep),
    "shatter": (_prepare_shatter, _execute_shatter),
    "sharpness": (_prepare_sharpness, _execute_sharpness),
    "vgnorm": (_prepare_vgnorm, _execute_vgnorm),
    "hardfn-verify": (_prepare_hardfn, _execute_hardfn),
    "rates": (_prepare_rates, _execute_rates),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relulab",
        description="Sharpness, variation norms, hard families, scaling sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_lines = {
        "train": "train one network on synthetic linear-target data",
        "sweep-mse": "run the (d, n, seed) sweep and fit log-log MSE slopes",
        "shatter": "paired large-step vs weight-decay comparison",
        "sharpness": "train a cell, then measure sharpness and the certificate",
        "vgnorm": "build and audit a separated sign family",
        "hardfn-verify": "closed-form vs Monte Carlo checks on a hard family",
        "rates": "write the predicted-exponent table",
    }
    for name, text in help_lines.items():
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        cmd.add_argument("--config", default=None, help="path to a JSON config file")
        cmd.add_argument("--out", default="relulab-out", help="output directory")
        cmd.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    prepare, execute = _COMMANDS[args.command]
    try:
        if args.config is None:
            raw = {}
        else:
            with open(args.config) as fh:
                raw = json.load(fh)
            if not isinstance(raw, dict):
                raise ConfigError("config file must hold a JSON object")
        if args.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {args.threads}")
        prepared = prepare(raw, args)
        os.makedirs(args.out, exist_ok=True)
    except _CONFIG_ERRORS as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        return execute(prepared, args)
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
