"""Command-line front end: seeded, reproducible experiment runs.

Subcommands:
    game         run the full game + robust verdict over a (theta, eta) grid
    wcurve       tabulate the joint expectation as a function of theta_B
    delta-prime  verdict grid (value, delta_prime, steerable, reason)
    oracle-check agreement report between the geometric criterion and the
                 brute-force feasibility oracle on random records
    tomo         simulate and reconstruct a single-qubit process

All angles are radians on the command line. A flat key=value config file
can preset any flag; explicit flags win. Identical config plus seed gives
byte-identical output files. Exit codes: 0 ok, 2 bad configuration,
3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import counting, criterion, game, quantum, tomography

FLOAT_DIGITS = 12


class ConfigError(ValueError):
    pass


def _fmt(value):
    if isinstance(value, float):
        if math.isnan(value):
            return None
        return float(f"{value:.{FLOAT_DIGITS}g}")
    return value


def _rows_to_json(rows: list[dict]) -> str:
    return json.dumps([{k: _fmt(v) for k, v in row.items()} for row in rows], indent=2) + "\n"


def _rows_to_csv(rows: list[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = list(rows[0].keys()) if rows else []
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if _fmt(row[k]) is None else _fmt(row[k]) for k in header])
    return buffer.getvalue()


def _emit(rows: list[dict], fmt: str, out_path: str | None) -> None:
    text = _rows_to_json(rows) if fmt == "json" else _rows_to_csv(rows)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _parse_grid(spec: str, name: str) -> list[float]:
    try:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError as exc:
        raise ConfigError(f"bad {name} grid '{spec}', expected a:b:n") from exc
    if count < 1:
        raise ConfigError(f"{name} grid is empty")
    return [float(x) for x in np.linspace(lo, hi, count)]


def _grid_from_args(args) -> list[tuple[float, float]]:
    if args.family is None:
        raise ConfigError("provide --family rho1|rho2")
    thetas = [args.theta] if args.theta is not None else None
    etas = [args.eta] if args.eta is not None else None
    if thetas is None:
        if args.theta_grid is None:
            raise ConfigError("provide --theta or --theta-grid")
        thetas = _parse_grid(args.theta_grid, "theta")
    if etas is None:
        if args.eta_grid is None:
            raise ConfigError("provide --eta or --eta-grid")
        etas = _parse_grid(args.eta_grid, "eta")
    return [(t, e) for t in thetas for e in etas]


def _make_state(family: str, theta: float, eta: float) -> quantum.TwoQubitState:
    if family == "rho1":
        return quantum.make_rho1(theta, eta)
    if family == "rho2":
        return quantum.make_rho2(theta, eta)
    raise ConfigError(f"unknown family '{family}'")


def _make_settings(family: str, theta: float, resolution: int) -> game.GameSettings:
    if family == "rho1":
        return game.settings_for_rho1(theta, resolution)
    return game.settings_for_rho2(resolution)


def _counts_from_args(args) -> int | None:
    if args.exact:
        return None
    if args.counts is None:
        raise ConfigError("provide --counts N or --exact")
    if args.counts < 1:
        raise ConfigError("--counts must be positive")
    return args.counts


def _row_seed(base_seed: int, index: int) -> int:
    return counting._mix(base_seed, index)


def _game_row(family, theta, eta, counts, base_seed, index, resolution) -> dict:
    rho = _make_state(family, theta, eta)
    settings = _make_settings(family, theta, resolution)
    row = {
        "family": family,
        "theta": theta,
        "eta": eta,
        "counts": 0 if counts is None else counts,
        "seed": base_seed,
    }
    if counts is None:
        transcript = game.play_game(rho, settings)
        record = None
        if transcript.failure_reason is None:
            record = criterion.build_geometric_record(rho, transcript, settings)
    else:
        try:
            transcript, record = counting.noisy_game(rho, settings, counts, _row_seed(base_seed, index))
        except ValueError:
            transcript = game.play_game(rho, settings)
            record = None
    row.update(
        {
            "p_plus": transcript.p_plus,
            "p_plus_err_prob": transcript.p_plus_err,
            "p_minus": transcript.p_minus,
            "p_minus_err_prob": transcript.p_minus_err,
            "w_max": transcript.w_max,
            "theta_b_star": transcript.theta_b_star,
            "c_lhs": transcript.c_lhs,
            "delta": transcript.delta,
        }
    )
    if record is None:
        row.update(
            {
                "delta_prime": math.nan,
                "steerable": False,
                "reason": transcript.failure_reason or "degenerate-setting",
            }
        )
        return row
    try:
        verdict = criterion.delta_prime(record)
        row.update(
            {
                "delta_prime": verdict.delta_prime,
                "steerable": verdict.steerable,
                "reason": verdict.reason,
            }
        )
    except (criterion.InconsistentRecordError, criterion.DegenerateGeometryError) as exc:
        row.update({"delta_prime": math.nan, "steerable": False, "reason": str(exc)})
    return row


def _run_grid(worker, points):
    with ThreadPoolExecutor() as pool:
        return list(pool.map(worker, points, range(len(points))))


def cmd_game(args) -> int:
    counts = _counts_from_args(args)
    grid = _grid_from_args(args)
    worker = lambda point, index: _game_row(
        args.family, point[0], point[1], counts, args.seed, index, args.scan_resolution
    )
    rows = _run_grid(worker, grid)
    _emit(rows, args.format, args.out)
    return 0


def cmd_wcurve(args) -> int:
    grid = _grid_from_args(args)
    theta_bs = np.linspace(0.0, 2.0 * math.pi, args.theta_b_points, endpoint=False)
    rows = []
    for theta, eta in grid:
        rho = _make_state(args.family, theta, eta)
        settings = _make_settings(args.family, theta, args.scan_resolution)
        for theta_b in theta_bs:
            w_plus = game.w_expectation(rho, settings, +1, float(theta_b))
            w_minus = game.w_expectation(rho, settings, -1, float(theta_b))
            rows.append(
                {
                    "family": args.family,
                    "theta": theta,
                    "eta": eta,
                    "theta_b": float(theta_b),
                    "w_plus": w_plus,
                    "w_minus": w_minus,
                    "w": max(w_plus, w_minus),
                }
            )
    _emit(rows, args.format, args.out)
    return 0


def cmd_delta_prime(args) -> int:
    counts = _counts_from_args(args)
    grid = _grid_from_args(args)

    def worker(point, index):
        full = _game_row(args.family, point[0], point[1], counts, args.seed, index, args.scan_resolution)
        keys = ("family", "theta", "eta", "counts", "seed", "delta", "delta_prime", "steerable", "reason")
        return {k: full[k] for k in keys}

    rows = _run_grid(worker, grid)
    _emit(rows, args.format, args.out)
    return 0


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    band = 2.0 / args.oracle_grid
    rows = []
    disagreements = 0
    checked = 0
    for index in range(args.samples):
        sym = criterion.sample_symmetrized_record(rng)
        value, _, _ = criterion.criterion_value(sym)
        model = criterion.lhs_oracle(sym, grid_n=args.oracle_grid)
        in_band = abs(value) <= band
        agree = (value > 0.0) == (model is None)
        if not in_band:
            checked += 1
            if not agree:
                disagreements += 1
        rows.append(
            {
                "index": index,
                "value": value,
                "model_found": model is not None,
                "in_band": in_band,
                "agree": agree,
            }
        )
    summary = {
        "index": -1,
        "value": float(checked),
        "model_found": disagreements == 0,
        "in_band": False,
        "agree": disagreements == 0,
    }
    _emit(rows + [summary], args.format, args.out)
    if disagreements:
        print(f"oracle disagreement on {disagreements} of {checked} records", file=sys.stderr)
        return 3
    return 0


def _parse_channel(spec: str | None) -> tomography.ChiMatrix:
    if spec is None:
        raise ConfigError("provide --channel")
    if spec == "identity":
        return tomography.identity_chi()
    if spec in ("x", "y", "z"):
        return tomography.pauli_gate_chi(spec)
    if spec.startswith("depolarizing:"):
        return tomography.depolarizing_chi(float(spec.split(":", 1)[1]))
    raise ConfigError(f"unknown channel '{spec}'")


def cmd_tomo(args) -> int:
    chi_true = _parse_channel(args.channel)
    counts = _counts_from_args(args)
    data = tomography.simulate_tomography(chi_true, counts, seed=args.seed)
    result = tomography.reconstruct_chi(data)
    fidelity_identity = tomography.process_fidelity(result.chi, tomography.identity_chi())
    fidelity_true = tomography.process_fidelity(result.chi, chi_true)
    rows = [
        {
            "channel": args.channel,
            "counts": 0 if counts is None else counts,
            "seed": args.seed,
            "converged": result.converged,
            "fidelity_to_identity": fidelity_identity,
            "fidelity_to_true": fidelity_true,
            "chi_real": json.dumps(np.round(result.chi.matrix.real, 10).tolist()),
            "chi_imag": json.dumps(np.round(result.chi.matrix.imag, 10).tolist()),
        }
    ]
    _emit(rows, args.format, args.out)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value file; flags override it")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")


def _add_state_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", choices=("rho1", "rho2"))
    parser.add_argument("--theta", type=float)
    parser.add_argument("--theta-grid", help="a:b:n")
    parser.add_argument("--eta", type=float)
    parser.add_argument("--eta-grid", help="a:b:n")
    parser.add_argument("--counts", type=int)
    parser.add_argument("--exact", action="store_true")
    parser.add_argument("--scan-resolution", type=int, default=721)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steergame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_game = sub.add_parser("game", help="run the steering game over a parameter grid")
    _add_state_args(p_game)
    _add_common(p_game)
    p_game.set_defaults(func=cmd_game)

    p_curve = sub.add_parser("wcurve", help="joint expectation versus Bob's angle")
    _add_state_args(p_curve)
    p_curve.add_argument("--theta-b-points", type=int, default=100)
    _add_common(p_curve)
    p_curve.set_defaults(func=cmd_wcurve)

    p_dp = sub.add_parser("delta-prime", help="robust verdict grid")
    _add_state_args(p_dp)
    _add_common(p_dp)
    p_dp.set_defaults(func=cmd_delta_prime)

    p_oracle = sub.add_parser("oracle-check", help="criterion vs brute-force oracle agreement")
    p_oracle.add_argument("--samples", type=int, default=500)
    p_oracle.add_argument("--oracle-grid", type=int, default=2001)
    _add_common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle_check)

    p_tomo = sub.add_parser("tomo", help="simulate and reconstruct a process matrix")
    p_tomo.add_argument("--channel", help="identity | x | y | z | depolarizing:p")
    p_tomo.add_argument("--counts", type=int)
    p_tomo.add_argument("--exact", action="store_true")
    _add_common(p_tomo)
    p_tomo.set_defaults(func=cmd_tomo)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Read --config key=value pairs into parser defaults; flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    overrides = {}
    try:
        with open(known.config, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"bad config line: {line!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                overrides[key.replace("-", "_")] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for key, value in overrides.items():
        if value.lower() in ("true", "false"):
            overrides[key] = value.lower() == "true"
        else:
            try:
                overrides[key] = int(value)
            except ValueError:
                try:
                    overrides[key] = float(value)
                except ValueError:
                    pass
    for sub_action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        valid = {a.dest for a in sub_action._actions}  # noqa: SLF001
        sub_action.set_defaults(**{k: v for k, v in overrides.items() if k in valid})
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except game.InternalConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
