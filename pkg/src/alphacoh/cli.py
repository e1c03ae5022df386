"""Command-line interface: compute measures, sweep alpha, verify, search, replay.

Everything is emitted as flat delimited records (CSV by default, JSON with
--format json; the two carry identical values). Floats are serialized with
full round-trip precision so a rerun with the same seed is byte-identical.

Exit codes: 0 success (for search-violation: witness found), 1 property
failure or violation not confirmed, 2 bad usage or input validation,
3 search budget exhausted without a witness.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .channels import apply_channel, is_incoherent, load_channel, save_channel
from .coherence import (
    ALPHA_KINDS,
    MEASURE_KINDS,
    ORACLE_RESOLUTION,
    brute_force_min,
    coherence_alpha,
    measure_value,
    tsallis_coherence,
)
from .divergence import near_one
from .harness import (
    ALL_CHECKS,
    TrialConfig,
    rebuild_witness,
    run_suite,
    search_violation,
    _strong_mono_stats,
)
from .states import load_state, random_density, save_state, substream

SCHEMA_VERSION = 1
LN2 = math.log(2.0)
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_EXHAUSTED = 3

VERIFY_COLUMNS = (
    "check_name", "dim", "alpha", "kind", "lhs", "rhs",
    "margin", "passed", "seed", "trial", "degenerate", "error",
)
COMPUTE_COLUMNS = ("measure", "dim", "alpha", "value", "units", "seed")
ORACLE_COLUMNS = (
    "dim", "alpha", "state_index", "closed_form", "oracle_value",
    "abs_diff", "resolution", "seed",
)
REPLAY_COLUMNS = (
    "kind", "dim", "alpha", "coherence_before", "average_after",
    "gap", "violation", "channel_incoherent",
)

# |closed form - grid oracle| must stay under factor * resolution
ORACLE_BOUND_FACTOR = {2: 20.0, 3: 10.0}


class UsageError(Exception):
    """Input or configuration rejected; maps to exit code 2."""


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(records: list[dict], columns, fmt: str, out_path: str | None) -> None:
    """Write records as CSV (fixed header) or JSON ({"schema": 1, "records": [...]})."""
    if fmt == "csv":
        lines = [",".join(columns)]
        lines.extend(",".join(_cell(r.get(c)) for c in columns) for r in records)
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "schema": SCHEMA_VERSION,
            "records": [{c: r.get(c) for c in columns} for r in records],
        }
        text = json.dumps(payload, indent=1) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("COHERENCE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"COHERENCE_SEED must be an integer, got {env!r}")
    return 0


# the entropy-limit argument behind the bits factor only covers the
# divergence-derived kinds; l1, skew, and c2 are plain numbers
CONVERTIBLE_KINDS = frozenset({"alpha", "tsallis", "relent"})


def _convert_units(kind: str, value: float, units: str) -> tuple[float, str]:
    if kind not in CONVERTIBLE_KINDS:
        return value, "dimensionless"
    return (value / LN2, "bits") if units == "bits" else (value, "nats")


def _parse_alpha_range(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--alpha-range expects lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--alpha-range expects numbers, got {text!r}")
    if step <= 0.0:
        raise UsageError(f"--alpha-range step must be positive, got {step}")
    if hi < lo:
        raise UsageError(f"--alpha-range is empty: lo {lo} > hi {hi}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = [lo + i * step for i in range(count)]
    if not grid:
        raise UsageError("--alpha-range produced an empty grid")
    for a in grid:
        if a <= 0.0 or a > 2.0:
            raise UsageError(f"alpha {a} outside (0, 2]")
    return grid


def _measure_rows(rho, kinds, alphas, units, seed, emit_delta) -> tuple[list[dict], tuple]:
    d = rho.shape[0]
    rows = []
    for kind in kinds:
        if kind in ALPHA_KINDS:
            for alpha in alphas:
                result = coherence_alpha(rho, alpha) if kind == "alpha" else tsallis_coherence(rho, alpha)
                value, unit_label = _convert_units(kind, result.value, units)
                row = {
                    "measure": kind,
                    "dim": d,
                    "alpha": float(alpha),
                    "value": value,
                    "units": unit_label,
                    "seed": seed,
                }
                if emit_delta:
                    row["delta"] = _delta_cell(result.optimal_delta)
                rows.append(row)
        else:
            value, unit_label = _convert_units(kind, measure_value(kind, rho), units)
            row = {
                "measure": kind,
                "dim": d,
                "alpha": None,
                "value": value,
                "units": unit_label,
                "seed": seed,
            }
            if emit_delta:
                row["delta"] = None
            rows.append(row)
    columns = COMPUTE_COLUMNS + ("delta",) if emit_delta else COMPUTE_COLUMNS
    return rows, columns


def _delta_cell(delta) -> str | None:
    if delta is None:
        return None
    return ";".join(repr(float(x)) for x in delta)


def cmd_compute(args) -> int:
    rho = load_state(args.state)
    seed = _resolve_seed(args)
    kinds = args.kind or list(MEASURE_KINDS)
    alphas = args.alpha or [1.0]
    rows, columns = _measure_rows(rho, kinds, alphas, args.units, seed, args.emit_delta)
    _emit(rows, columns, args.format, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    rho = load_state(args.state)
    seed = _resolve_seed(args)
    grid = _parse_alpha_range(args.alpha_range)
    kinds = args.kind or list(ALPHA_KINDS)
    for kind in kinds:
        if kind not in ALPHA_KINDS:
            raise UsageError(f"sweep covers the alpha families {ALPHA_KINDS}, got {kind!r}")
    rows = []
    for alpha in grid:  # ordered by alpha; alpha ~ 1 flows through the analytic limit
        for kind in kinds:
            result = coherence_alpha(rho, alpha) if kind == "alpha" else tsallis_coherence(rho, alpha)
            value, unit_label = _convert_units(kind, result.value, args.units)
            row = {
                "measure": kind,
                "dim": rho.shape[0],
                "alpha": float(alpha),
                "value": value,
                "units": unit_label,
                "seed": seed,
            }
            if args.emit_delta:
                row["delta"] = _delta_cell(result.optimal_delta)
            rows.append(row)
    columns = COMPUTE_COLUMNS + ("delta",) if args.emit_delta else COMPUTE_COLUMNS
    _emit(rows, columns, args.format, args.out)
    return EXIT_OK


def _config_from_args(args) -> TrialConfig:
    fields = {
        "dims": args.dim or (2, 3, 4),
        "alphas": args.alpha or (0.1, 0.25, 0.5, 0.75, 0.9, 1.1, 1.5, 2.0),
        "trials_per_cell": args.trials,
        "n_kraus_range": _parse_kraus_range(args.n_kraus),
        "master_seed": _resolve_seed(args),
        "tolerance": args.tol,
        "rank_policy": args.rank_policy,
        "checks": args.check or ALL_CHECKS,
        "kind": args.kind,
    }
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
        unknown = set(overrides) - set(fields)
        if unknown:
            raise UsageError(f"{args.config}: unknown config keys {sorted(unknown)}")
        fields.update(overrides)  # config file wins over flags
    try:
        return TrialConfig(**fields)
    except ValueError as exc:
        raise UsageError(str(exc))


def _parse_kraus_range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise UsageError(f"--n-kraus expects N or LO:HI, got {text!r}")
    return lo, hi


def cmd_verify(args) -> int:
    cfg = _config_from_args(args)
    summary = run_suite(cfg, workers=args.workers)
    if args.out:
        rows = [
            {
                "check_name": r.check_name,
                "dim": r.dim,
                "alpha": r.alpha,
                "kind": r.kind,
                "lhs": r.lhs,
                "rhs": r.rhs,
                "margin": r.margin,
                "passed": r.passed,
                "seed": r.seed,
                "trial": r.trial,
                "degenerate": r.degenerate,
                "error": r.error,
            }
            for r in summary.records
        ]
        _emit(rows, VERIFY_COLUMNS, args.format, args.out)
    name_width = max(len(name) for name in summary.stats)
    print(f"{'check':<{name_width}}  {'trials':>7} {'pass':>7} {'fail':>5} {'degen':>5}  worst_margin")
    for name, stats in summary.stats.items():
        worst = "" if math.isinf(stats.worst_margin) else repr(stats.worst_margin)
        print(
            f"{name:<{name_width}}  {stats.trials:>7} {stats.passes:>7} "
            f"{stats.failures:>5} {stats.degenerate:>5}  {worst}"
        )
    verdict = "PASS" if summary.all_passed else "FAIL"
    print(f"verdict: {verdict} (seed {cfg.master_seed}, {summary.runtime_s:.1f} s)")
    if not summary.all_passed:
        failures = [r for r in summary.records if not r.passed]
        clean = [r for r in failures if not r.error]  # genuine margins beat error sentinels
        worst = min(clean or failures, key=lambda r: r.margin)
        print(
            f"worst failure: {worst.check_name} d={worst.dim} alpha={worst.alpha} "
            f"kind={worst.kind} margin={worst.margin!r} trial={worst.trial}"
        )
        if worst.check_name in ("strong_monotonicity", "monotonicity") and not worst.error:
            _print_violation_report(cfg, worst)
    return EXIT_OK if summary.all_passed else EXIT_FAILURE


def _print_violation_report(cfg, record) -> None:
    """Replay the failing trial's draws and render the witness numbers."""
    rho, ch = rebuild_witness(cfg, record)
    if record.check_name == "strong_monotonicity":
        before, after, gap = _strong_mono_stats(record.kind, rho, ch, record.alpha)
        after_label = "selective average"
    else:
        before = measure_value(record.kind, rho, record.alpha)
        after = measure_value(record.kind, apply_channel(ch, rho), record.alpha)
        gap = after - before
        after_label = "channel output"
    print("violation witness (replayed from the record's substream):")
    print(f"  kind={record.kind} dim={record.dim} alpha={record.alpha} trial={record.trial}")
    print(f"  coherence before   : {before!r}")
    print(f"  {after_label:19s}: {after!r}")
    print(f"  gap (after - before): {gap!r}")


def cmd_search_violation(args) -> int:
    seed = _resolve_seed(args)
    report = search_violation(
        args.dim,
        args.trials,
        kind=args.kind,
        alphas=args.alpha or (0.3, 0.5, 1.5, 2.0),
        seed=seed,
    )
    if not report.found:
        print(
            f"no violation found: kind={report.kind} dim={report.dim} "
            f"trials={report.trials_used} best_gap={report.best_gap!r}"
        )
        return EXIT_EXHAUSTED
    os.makedirs(args.out_dir, exist_ok=True)
    state_path = os.path.join(args.out_dir, "witness_state.json")
    channel_path = os.path.join(args.out_dir, "witness_channel.json")
    meta_path = os.path.join(args.out_dir, "witness_meta.json")
    save_state(state_path, report.state)
    save_channel(channel_path, report.channel)
    meta = {
        "schema": SCHEMA_VERSION,
        "kind": report.kind,
        "dim": report.dim,
        "alpha": report.alpha,
        "coherence_before": report.coherence_before,
        "average_after": report.average_after,
        "gap": report.gap,
        "seed": report.seed,
        "trial_index": report.trial_index,
        "trials_used": report.trials_used,
        "refined": report.refined,
        "state_file": state_path,
        "channel_file": channel_path,
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    print(
        f"violation found: kind={report.kind} dim={report.dim} alpha={report.alpha} "
        f"gap={report.gap!r} (trial {report.trial_index}, {report.trials_used} trials used)"
    )
    print(f"witness written: {state_path} {channel_path} {meta_path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    rho = load_state(args.state)
    ch = load_channel(args.channel)
    incoherent = is_incoherent(ch)
    before, after, gap = _strong_mono_stats(args.kind, rho, ch, args.alpha)
    row = {
        "kind": args.kind,
        "dim": rho.shape[0],
        "alpha": args.alpha,
        "coherence_before": before,
        "average_after": after,
        "gap": gap,
        "violation": gap > 1e-6,
        "channel_incoherent": incoherent,
    }
    _emit([row], REPLAY_COLUMNS, args.format, args.out)
    return EXIT_OK if gap > 1e-6 else EXIT_FAILURE


def cmd_oracle_compare(args) -> int:
    if args.dim not in (2, 3):
        raise UsageError(f"oracle comparison supports dim 2 or 3, got {args.dim}")
    seed = _resolve_seed(args)
    resolution = args.resolution if args.resolution is not None else ORACLE_RESOLUTION[args.dim]
    alphas = args.alpha or (0.3, 0.5, 0.7, 1.3, 1.5, 2.0)
    for a in alphas:
        if near_one(a):
            raise UsageError("alpha values within 1e-6 of 1 have no grid oracle")
    bound = ORACLE_BOUND_FACTOR[args.dim] * resolution
    rows = []
    worst = 0.0
    closed_above_oracle = False
    for index in range(args.states):
        rng = substream(seed, index)
        rho = random_density(args.dim, args.dim, rng)  # full rank
        for alpha in alphas:
            closed = coherence_alpha(rho, alpha).value
            oracle, _ = brute_force_min(rho, alpha, resolution)
            diff = abs(closed - oracle)
            worst = max(worst, diff)
            if closed > oracle + 1e-9:
                closed_above_oracle = True
            rows.append(
                {
                    "dim": args.dim,
                    "alpha": float(alpha),
                    "state_index": index,
                    "closed_form": closed,
                    "oracle_value": oracle,
                    "abs_diff": diff,
                    "resolution": resolution,
                    "seed": seed,
                }
            )
    _emit(rows, ORACLE_COLUMNS, args.format, args.out)
    if worst > bound or closed_above_oracle:
        print(
            f"oracle disagreement: worst |diff| {worst!r} (bound {bound!r}), "
            f"closed form above oracle: {closed_above_oracle}",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alphacoh",
        description="Coherence quantifiers from the Tsallis relative alpha entropy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output_flags(p):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", metavar="PATH", help="write records here instead of stdout")
        p.add_argument("--seed", type=int, default=None,
                       help="seed (falls back to COHERENCE_SEED, then 0)")

    p_compute = sub.add_parser("compute", help="evaluate measures on a state file")
    p_compute.add_argument("state", help="state file (JSON: dim + row-major entries)")
    p_compute.add_argument("--kind", action="append", choices=MEASURE_KINDS,
                           help="measure kind, repeatable (default: all)")
    p_compute.add_argument("--alpha", action="append", type=float,
                           help="alpha for the family kinds, repeatable (default: 1.0)")
    p_compute.add_argument("--units", choices=("nats", "bits"), default="nats")
    p_compute.add_argument("--emit-delta", action="store_true",
                           help="include the optimal incoherent populations")
    add_output_flags(p_compute)
    p_compute.set_defaults(func=cmd_compute)

    p_sweep = sub.add_parser("sweep", help="evaluate the families over an alpha grid")
    p_sweep.add_argument("state")
    p_sweep.add_argument("--alpha-range", required=True, metavar="LO:HI:STEP")
    p_sweep.add_argument("--kind", action="append", choices=ALPHA_KINDS,
                         help="family kind, repeatable (default: both)")
    p_sweep.add_argument("--units", choices=("nats", "bits"), default="nats")
    p_sweep.add_argument("--emit-delta", action="store_true")
    add_output_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the randomized inequality suite")
    p_verify.add_argument("--dim", action="append", type=int)
    p_verify.add_argument("--alpha", action="append", type=float)
    p_verify.add_argument("--trials", type=int, default=100, help="trials per (check, dim, alpha) cell")
    p_verify.add_argument("--tol", type=float, default=1e-9)
    p_verify.add_argument("--rank-policy", choices=("full", "mixed-ranks"), default="mixed-ranks")
    p_verify.add_argument("--n-kraus", default="1:4", metavar="LO:HI")
    p_verify.add_argument("--check", action="append", choices=ALL_CHECKS)
    p_verify.add_argument("--kind", default="alpha", choices=MEASURE_KINDS)
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument("--config", metavar="PATH",
                          help="JSON TrialConfig; its keys override the flags")
    add_output_flags(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_search = sub.add_parser("search-violation", help="hunt for a strong-monotonicity violation")
    p_search.add_argument("--dim", type=int, default=2)
    p_search.add_argument("--alpha", action="append", type=float,
                          help="candidate alphas (default: 0.3 0.5 1.5 2.0)")
    p_search.add_argument("--trials", type=int, default=1_000_000)
    p_search.add_argument("--kind", default="tsallis", choices=("tsallis", "alpha"))
    p_search.add_argument("--out-dir", default=".", help="where witness files go")
    add_output_flags(p_search)
    p_search.set_defaults(func=cmd_search_violation)

    p_replay = sub.add_parser("replay", help="recompute a witness gap from its files")
    p_replay.add_argument("--state", required=True)
    p_replay.add_argument("--channel", required=True)
    p_replay.add_argument("--alpha", type=float, required=True)
    p_replay.add_argument("--kind", default="tsallis", choices=("tsallis", "alpha"))
    add_output_flags(p_replay)
    p_replay.set_defaults(func=cmd_replay)

    p_oracle = sub.add_parser("oracle-compare", help="closed form vs simplex grid oracle")
    p_oracle.add_argument("--dim", type=int, default=2)
    p_oracle.add_argument("--alpha", action="append", type=float,
                          help="default: 0.3 0.5 0.7 1.3 1.5 2.0")
    p_oracle.add_argument("--states", type=int, default=200)
    p_oracle.add_argument("--resolution", type=float, default=None,
                          help="grid resolution (default: 1e-4 for d=2, 2e-3 for d=3)")
    add_output_flags(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle_compare)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
