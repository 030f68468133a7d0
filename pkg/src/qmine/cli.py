"""Command-line harness for entropy/QMI experiments and verification.

Commands: estimate-entropy, estimate-qmi, rank-sweep, depth-sweep,
verify. Every experiment key can come from a flag or a ``key = value``
config file (flag beats file beats default; the seed additionally falls
back to the QMINE_SEED environment variable). Each run writes its fully
resolved configuration next to its outputs, and identical flags plus
seed give byte-identical CSV output.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numeric abort during training.
"""

from __future__ import annotations

import argparse
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import qmatrix, states, verify
from .errors import QmineError
from .qdvr import QdvrConfig, qdvr_scale
from .states import DensityMatrix
from .trainer import (
    TrainConfig,
    TrainingAborted,
    TrainRecord,
    copy_budget,
    estimate_mutual_information,
    train_entropy,
    write_history_csv,
)

LN2 = math.log(2.0)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Config resolution: flag > file > (env for seed) > default.
# ---------------------------------------------------------------------------


def _parse_c(text: str):
    if text == "auto":
        return "auto"
    return float(text)


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise QmineError(f"expected a comma-separated integer list, got {text!r}") from exc


def _parse_optional_str(text: str):
    return text if text != "" else None


_BASE_KEYS = [
    # (name, parser, default, help)
    ("depth", int, 10, "circuit depth D (4*n*D parameters)"),
    ("rank_t", int, None, "witness rank (default: rank of the target state)"),
    ("epsilon", float, 0.1, "target accuracy in nats"),
    ("c", _parse_c, "auto", "trace scale: a number, or 'auto' for 2*r*n + r*ln(1/eps)"),
    ("lr", float, 0.05, "learning rate"),
    ("iters", int, 2000, "iteration budget"),
    ("optimizer", str, "adaptive-moment", "adaptive-moment or plain-gradient"),
    ("seed", int, 0, "run seed (QMINE_SEED is the fallback default)"),
    ("shots", int, 0, "0 = exact expectations; >0 = sampled loss telemetry"),
    ("report_every", int, 1, "history row every this many iterations"),
    ("plateau", int, 0, "stop after this many unimproved iterations (0 = off)"),
    ("log_base", str, "e", "'e' reports nats, '2' reports bits"),
]

SCHEMAS = {
    "estimate-entropy": [
        ("qubits", int, 4, "number of qubits n (dimension 2^n)"),
        ("rank", int, 1, "rank of the generated random state"),
        ("state", _parse_optional_str, None, "load the state from a matrix file instead"),
        *_BASE_KEYS,
    ],
    "estimate-qmi": [
        ("qubits_a", int, 2, "qubits of subsystem A"),
        ("qubits_b", int, 2, "qubits of subsystem B"),
        ("rank_ab", _parse_int_list, (1,), "joint-state rank, or comma list for a table"),
        ("state", _parse_optional_str, None, "load the joint state from a matrix file"),
        *_BASE_KEYS,
    ],
    "rank-sweep": [
        ("qubits", int, 5, "number of qubits n"),
        ("rank", int, 8, "rank of the generated random state"),
        ("rank_t_list", _parse_int_list, None, "witness ranks to sweep (required)"),
        ("c_max", float, 80.0, "cap applied to the auto-derived trace scale"),
        ("jobs", int, 0, "parallel sweep points (0 = machine parallelism)"),
        *_BASE_KEYS,
    ],
    "depth-sweep": [
        ("qubits", int, 5, "number of qubits n"),
        ("rank", int, 8, "rank of the generated random state"),
        ("depth_list", _parse_int_list, None, "circuit depths to sweep (required)"),
        ("c_max", float, 80.0, "cap applied to the auto-derived trace scale"),
        ("jobs", int, 0, "parallel sweep points (0 = machine parallelism)"),
        *_BASE_KEYS,
    ],
}


def _read_config_file(path: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise QmineError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, value = text.split("=", 1)
            raw[key.strip()] = value.strip()
    return raw


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    schema = SCHEMAS[command]
    known = {name for name, *_ in schema}
    file_raw: dict[str, str] = {}
    if getattr(args, "config", None):
        file_raw = _read_config_file(args.config)
        unknown = sorted(set(file_raw) - known)
        if unknown:
            raise QmineError(f"unknown config keys in {args.config}: {', '.join(unknown)}")
    cfg = {}
    for name, parse, default, _help in schema:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            cfg[name] = flag_value
        elif name in file_raw:
            cfg[name] = parse(file_raw[name])
        elif name == "seed" and os.environ.get("QMINE_SEED"):
            cfg[name] = int(os.environ["QMINE_SEED"])
        else:
            cfg[name] = default
    if cfg.get("log_base") not in ("e", "2"):
        raise QmineError(f"log_base must be 'e' or '2', got {cfg.get('log_base')!r}")
    if cfg.get("optimizer") not in ("adaptive-moment", "plain-gradient"):
        raise QmineError(f"unknown optimizer {cfg.get('optimizer')!r}")
    return cfg


def _format_cfg_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return _fmt(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def write_resolved_config(path, command: str, cfg: dict) -> None:
    lines = [f"# resolved configuration for: {command}"]
    for name, *_ in SCHEMAS[command]:
        lines.append(f"{name} = {_format_cfg_value(cfg[name])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Experiment execution.
# ---------------------------------------------------------------------------


def _load_state(path: str) -> tuple[DensityMatrix, int, float]:
    rho = DensityMatrix(qmatrix.load_matrix(path))
    qubits = int(round(math.log2(rho.dim)))
    if 2**qubits != rho.dim:
        raise QmineError(f"state file dimension {rho.dim} is not a power of two")
    return rho, qubits, states.von_neumann_entropy(rho)


def _make_train_config(cfg: dict, rank_t: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["lr"],
        iterations=cfg["iters"],
        optimizer=cfg["optimizer"],
        seed=cfg["seed"],
        shots=cfg["shots"],
        report_every=cfg["report_every"],
        epsilon=cfg["epsilon"],
        rank_t=rank_t,
        plateau_patience=cfg["plateau"] or None,
    )


def _resolve_c(cfg: dict, rank_t: int, qubits: int) -> float:
    if cfg["c"] != "auto":
        return float(cfg["c"])
    c = qdvr_scale(rank_t, qubits, min(cfg["epsilon"], 1.0))
    cap = cfg.get("c_max")
    return min(c, cap) if cap else c


def run_entropy_experiment(cfg: dict) -> dict:
    """Execute one entropy estimation; returns results plus resolved keys."""
    if cfg.get("state"):
        rho, qubits, exact = _load_state(cfg["state"])
        rank = rho.numerical_rank()
    else:
        qubits, rank = cfg["qubits"], cfg["rank"]
        spectral = states.random_density(2**qubits, rank, cfg["seed"])
        rho, exact = spectral.to_density(), spectral.entropy
    rank_t = cfg["rank_t"] if cfg["rank_t"] is not None else rank
    c = _resolve_c(cfg, rank_t, qubits)
    train_cfg = _make_train_config(cfg, rank_t)
    qdvr_cfg = QdvrConfig(epsilon=cfg["epsilon"], c=c, rank_t=rank_t)
    estimate, history = train_entropy(rho, qubits, cfg["depth"], train_cfg, qdvr_cfg, exact)
    n_params = 4 * qubits * cfg["depth"]
    resolved = dict(cfg)
    resolved.update(qubits=qubits, rank=rank, rank_t=rank_t, c=c)
    return {
        "estimate": estimate,
        "exact": exact,
        "history": history,
        "qubits": qubits,
        "n_params": n_params,
        "c": c,
        "resolved": resolved,
    }


def iterations_to_one_percent(history: list[TrainRecord], exact: float) -> int:
    threshold = 0.01 * abs(exact) if abs(exact) > 1e-12 else 0.01
    for rec in history:
        if rec.abs_error <= threshold:
            return rec.iteration
    return -1


def _report_scale(cfg: dict) -> tuple[float, str]:
    if cfg["log_base"] == "2":
        return 1.0 / LN2, "bits"
    return 1.0, "nats"


def _write_entropy_outputs(out: Path, command: str, res: dict) -> None:
    write_history_csv(out / "history.csv", res["history"])
    write_resolved_config(out / "config.resolved", command, res["resolved"])
    cfg = res["resolved"]
    scale, unit = _report_scale(cfg)
    estimate, exact = res["estimate"], res["exact"]
    abs_err = abs(estimate - exact)
    rel_err = abs_err / exact if exact > 1e-12 else math.inf
    budget = copy_budget(res["c"], cfg["epsilon"], res["n_params"], 1)
    best_iter = min(res["history"], key=lambda r: r.loss).iteration
    lines = [
        f"unit = {unit}",
        f"estimate = {_fmt(estimate * scale)}",
        f"exact = {_fmt(exact * scale)}",
        f"abs_error = {_fmt(abs_err * scale)}",
        f"rel_error = {_fmt(rel_err)}",
        f"best_iteration = {best_iter}",
        f"iterations_run = {res['history'][-1].iteration + 1}",
        f"iterations_to_1pct = {iterations_to_one_percent(res['history'], exact)}",
        f"c = {_fmt(res['c'])}",
        f"epsilon = {_fmt(cfg['epsilon'])}",
        f"rank_t = {cfg['rank_t']}",
        f"n_params = {res['n_params']}",
        f"copies_budget = {budget.copies_estimate}",
    ]
    with open(out / "result.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_estimate_entropy(args: argparse.Namespace) -> int:
    cfg = resolve_config("estimate-entropy", args)
    out = _ensure_out(args)
    res = run_entropy_experiment(cfg)
    _write_entropy_outputs(out, "estimate-entropy", res)
    print(f"estimate = {res['estimate']:.10g}  exact = {res['exact']:.10g}  -> {out}")
    return 0


# ---------------------------------------------------------------------------
# QMI estimation.
# ---------------------------------------------------------------------------


def _qmi_state_seed(seed: int, rank: int) -> int:
    return int(np.random.SeedSequence([seed, rank]).generate_state(1)[0])


def cmd_estimate_qmi(args: argparse.Namespace) -> int:
    cfg = resolve_config("estimate-qmi", args)
    out = _ensure_out(args)
    d_a, d_b = 2 ** cfg["qubits_a"], 2 ** cfg["qubits_b"]
    qubits = cfg["qubits_a"] + cfg["qubits_b"]
    scale, unit = _report_scale(cfg)
    c_override = None if cfg["c"] == "auto" else float(cfg["c"])

    rows = []
    if cfg.get("state"):
        rho_ab, file_qubits, _ = _load_state(cfg["state"])
        if file_qubits != qubits:
            raise QmineError(
                f"state file has {file_qubits} qubits, split asks for {qubits}"
            )
        targets = [(rho_ab.numerical_rank(), rho_ab)]
    else:
        targets = []
        for rank in cfg["rank_ab"]:
            spectral = states.random_density(d_a * d_b, rank, _qmi_state_seed(cfg["seed"], rank))
            targets.append((rank, spectral.to_density()))

    for rank, rho_ab in targets:
        rank_t = cfg["rank_t"] if cfg["rank_t"] is not None else rho_ab.numerical_rank()
        train_cfg = _make_train_config(cfg, rank_t)
        if c_override is not None:
            train_cfg = TrainConfig(
                **{**train_cfg.__dict__, "c_override": c_override}
            )
        result = estimate_mutual_information(
            rho_ab, d_a, d_b, cfg["depth"], train_cfg, c_cap=cfg.get("c_max")
        )
        rank_dir = out / f"rank_{rank}"
        rank_dir.mkdir(parents=True, exist_ok=True)
        write_history_csv(rank_dir / "history_product.csv", result.product_history)
        write_history_csv(rank_dir / "history_joint.csv", result.joint_history)
        err_rate = (
            abs(result.qmi_estimate - result.exact_qmi) / result.exact_qmi * 100.0
            if result.exact_qmi > 1e-12
            else math.inf
        )
        rows.append((rank, result.exact_qmi * scale, result.qmi_estimate * scale, err_rate))

    header = f"{'rank':>4} {'qmi':>12} {'estimation':>12} {'error_rate_pct':>14}"
    lines = [f"# unit = {unit}", header]
    for rank, exact_v, est_v, rate in rows:
        lines.append(f"{rank:>4} {exact_v:>12.7f} {est_v:>12.7f} {rate:>14.3f}")
    with open(out / "qmi.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    write_resolved_config(out / "config.resolved", "estimate-qmi", cfg)
    for line in lines[1:]:
        print(line)
    return 0


# ---------------------------------------------------------------------------
# Sweeps.
# ---------------------------------------------------------------------------


def _sweep_point(payload: tuple) -> dict:
    """Worker for one sweep point: runs it and writes its output files."""
    command, point_cfg, out_dir = payload
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = run_entropy_experiment(point_cfg)
    _write_entropy_outputs(out, command, res)
    budget = copy_budget(res["c"], point_cfg["epsilon"], res["n_params"], 1)
    return {
        "final_error": abs(res["estimate"] - res["exact"]),
        "n_params": res["n_params"],
        "iters_1pct": iterations_to_one_percent(res["history"], res["exact"]),
        "copies_budget": budget.copies_estimate,
    }


def _run_sweep(command: str, sweep_key: str, point_key: str, args: argparse.Namespace) -> int:
    cfg = resolve_config(command, args)
    if cfg[sweep_key] is None:
        raise QmineError(f"--{sweep_key.replace('_', '-')} is required for {command}")
    out = _ensure_out(args)
    values = cfg[sweep_key]

    payloads = []
    for value in values:
        point_cfg = {k: v for k, v in cfg.items() if k not in (sweep_key, "jobs")}
        point_cfg[point_key] = value
        point_cfg.setdefault("state", None)
        payloads.append(
            ("estimate-entropy", point_cfg, str(out / f"point_{point_key}_{value}"))
        )

    jobs = cfg["jobs"] or os.cpu_count() or 1
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]

    lines = ["sweep_value,n_params,final_error,iterations_to_1pct,copies_budget"]
    for value, row in zip(values, results):
        lines.append(
            f"{value},{row['n_params']},{_fmt(row['final_error'])},"
            f"{row['iters_1pct']},{row['copies_budget']}"
        )
    with open(out / "summary.csv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    write_resolved_config(out / "config.resolved", command, cfg)
    for line in lines:
        print(line)
    return 0


def cmd_rank_sweep(args: argparse.Namespace) -> int:
    return _run_sweep("rank-sweep", "rank_t_list", "rank_t", args)


def cmd_depth_sweep(args: argparse.Namespace) -> int:
    return _run_sweep("depth-sweep", "depth_list", "depth", args)


# ---------------------------------------------------------------------------
# Verification.
# ---------------------------------------------------------------------------


def cmd_verify(args: argparse.Namespace) -> int:
    corrupt = "shift_invariance" if args.self_test_fail else None
    results = verify.run_all(args.trials, args.seed, args.max_qubits, corrupt=corrupt)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Parser assembly.
# ---------------------------------------------------------------------------


def _add_schema_flags(parser: argparse.ArgumentParser, command: str) -> None:
    for name, parse, default, help_text in SCHEMAS[command]:
        flag = "--" + name.replace("_", "-")
        shown = "auto" if name == "c" and default == "auto" else default
        parser.add_argument(
            flag, dest=name, type=parse, default=None,
            help=f"{help_text} (default: {shown})",
        )
    parser.add_argument("--config", help="key = value config file (flags win)")
    parser.add_argument("--out", required=True, help="output directory")


def _ensure_out(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmine",
        description="Variational von Neumann entropy / quantum mutual "
        "information estimation with exact oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-entropy", help="train the entropy estimator on one state")
    _add_schema_flags(p, "estimate-entropy")
    p.set_defaults(func=cmd_estimate_entropy)

    p = sub.add_parser("estimate-qmi", help="estimate quantum mutual information")
    _add_schema_flags(p, "estimate-qmi")
    p.set_defaults(func=cmd_estimate_qmi)

    p = sub.add_parser("rank-sweep", help="sweep the witness rank at fixed state")
    _add_schema_flags(p, "rank-sweep")
    p.set_defaults(func=cmd_rank_sweep)

    p = sub.add_parser("depth-sweep", help="sweep the circuit depth at fixed state")
    _add_schema_flags(p, "depth-sweep")
    p.set_defaults(func=cmd_depth_sweep)

    p = sub.add_parser("verify", help="run the numeric verification suite")
    p.add_argument("--trials", type=int, default=50, help="instances per check (default: 50)")
    p.add_argument(
        "--seed", type=int,
        default=int(os.environ.get("QMINE_SEED", "0")),
        help="base seed; trial i uses seed+i (default: 0 or QMINE_SEED)",
    )
    p.add_argument("--max-qubits", type=int, default=5, help="largest system size (default: 5)")
    p.add_argument(
        "--self-test-fail", action="store_true",
        help="corrupt one tolerance to prove the harness can fail",
    )
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TrainingAborted as exc:
        print(f"error: training aborted: {exc}", flush=True)
        return 3
    except (QmineError, OSError) as exc:
        print(f"error: {exc}", flush=True)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
