"""Command-line entry point.

Each subcommand resolves its options as built-in defaults, then the JSON
file given by ``--config``, then explicit flags, and echoes the result as
JSON on stderr. Feeding that JSON back through ``--config`` replays the run.
Exit status: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import ConfigError, SubNyquistError
from .frames import (
    forward_transform, read_frame_csv, read_frame_f64, support_of, write_frame_csv,
    write_frame_f64,
)
from .metrics import evaluate
from .recovery import ALGORITHMS, Exponential, RecoveryConfig, preset_config, recover
from .sampling import apply_mask, gen_mask, read_mask, write_mask
from .siggen import BandPlan, RfSignalSpec, gen_multiband, random_band_plan


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# option name -> (type, default, help); None default means "required or optional as documented"
_RECOVERY_OPTS = {
    "alpha": (float, None, "threshold multiplier (default: algorithm preset, 2.5)"),
    "max_iters": (int, None, "iteration cap (default: 500)"),
    "gamma": (float, None, "relaxation in (0, 2] (default: algorithm preset)"),
    "schedule": (str, None, "adaptive or exponential (default: algorithm preset)"),
    "thr0": (float, None, "initial exponential threshold (default: first adaptive threshold)"),
    "decay": (float, None, "exponential threshold decay in (0, 1)"),
    "overwrite": (bool, None, "overwrite on-mask samples after the last iteration"),
    "stop_rel": (float, None, "relative residual-power change that stops the iteration"),
}

_COMMANDS = {
    "gen": {
        "L": (int, 4096, "frame length"),
        "landau": (float, 0.02, "Landau fraction of the random band plan"),
        "bands": (int, 1, "number of bands"),
        "plan": (str, None, "band plan JSON to use instead of a random plan"),
        "seed": (int, 0, "random seed"),
        "out": (str, None, "output frame (.f64 binary, or .csv)"),
        "plan_out": (str, None, "optional path for the band plan JSON"),
    },
    "sample": {
        "input": (str, None, "input frame"),
        "rate": (float, None, "sampling rate m/L"),
        "m": (int, None, "number of samples (alternative to --rate)"),
        "seed": (int, 0, "random seed"),
        "out": (str, None, "output sampled frame"),
        "mask_out": (str, None, "output mask text file"),
    },
    "recover": {
        "input": (str, None, "sampled frame"),
        "mask": (str, None, "mask text file"),
        "alg": (str, "imat", "imat, hybrid or known-support"),
        "plan": (str, None, "band plan JSON giving the true support"),
        "reference": (str, None, "clean frame to score against"),
        "out": (str, None, "output recovered frame"),
        "trace_out": (str, None, "optional path for the trace CSV"),
        "seed": (int, 0, "unused; accepted for uniform replay"),
        **_RECOVERY_OPTS,
    },
    "sweep": {
        "alg": (str, "imat", "imat, hybrid or known-support"),
        "landau": (_float_list, [0.02], "comma-separated Landau fractions"),
        "rates": (_float_list, None, "comma-separated sampling rates"),
        "trials": (int, 20, "trials per grid point"),
        "success_fraction": (float, 0.9, "fraction of perfect trials counted as success"),
        "snr": (float, None, "input SNR in dB (default: noiseless)"),
        "L": (int, 4096, "frame length"),
        "seed": (int, 0, "base seed"),
        "out": (str, None, "output directory for sweep.csv and summary.csv"),
        **_RECOVERY_OPTS,
    },
    "minrate": {
        "alg": (str, "imat", "imat, hybrid or known-support"),
        "landau": (_float_list, [0.02], "comma-separated Landau fractions"),
        "trials": (int, 20, "trials per probed rate"),
        "success_fraction": (float, 0.9, "fraction of perfect trials counted as success"),
        "L": (int, 4096, "frame length"),
        "seed": (int, 0, "base seed"),
        "out": (str, None, "optional output directory for minrate.csv"),
        **_RECOVERY_OPTS,
    },
    "fig6": {
        "rates": (str, "0.5x,1.3x,0.1,0.2", "rates; a trailing x multiplies the measured Landau fraction"),
        "trials": (int, 10, "trials per rate"),
        "spec": (str, None, "RF signal spec JSON (default: built-in four-carrier spec)"),
        "snr": (float, ex.FIG6_INPUT_SNR_DB, "input SNR in dB"),
        "L": (int, 4096, "frame length"),
        "seed": (int, 0, "base seed"),
        "out": (str, None, "optional output directory for sweep.csv and summary.csv"),
        **_RECOVERY_OPTS,
    },
    "verify-noise": {
        "L": (int, 2048, "frame length"),
        "landau": (float, 0.02, "Landau fraction of the test signal"),
        "rates": (_float_list, [0.05, 0.1, 0.2], "comma-separated sampling rates"),
        "trials": (int, 200, "Monte Carlo trials per rate"),
        "seed": (int, 0, "base seed"),
        "out": (str, None, "optional output directory for noise.json"),
    },
}

_REQUIRED = {
    "gen": ("out",),
    "sample": ("input", "out", "mask_out"),
    "recover": ("input", "mask", "out"),
    "sweep": ("rates", "out"),
    "minrate": (),
    "fig6": (),
    "verify-noise": (),
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="subnyquist", description="Sub-Nyquist multiband recovery toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, opts in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file of option values (flags take precedence)")
        for key, (typ, default, help_) in opts.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=help_)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None, help=help_)
    return parser


def _coerce(command: str, key: str, value):
    typ = _COMMANDS[command][key][0]
    if value is None:
        return None
    try:
        if typ is _float_list:
            return [float(v) for v in value] if isinstance(value, list) else _float_list(value)
        if typ is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if typ is int and (isinstance(value, bool) or int(value) != value):
            raise TypeError
        return typ(value)
    except (TypeError, ValueError, argparse.ArgumentTypeError):
        raise UsageError(f"config field '{key}': cannot interpret {value!r} as {typ.__name__}") from None


def resolve(command: str, args: argparse.Namespace) -> dict:
    opts = _COMMANDS[command]
    file_values = {}
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config}: malformed JSON ({exc})") from None
        if not isinstance(file_values, dict):
            raise UsageError(f"config file {args.config}: expected a JSON object")
        if file_values.get("command", command) != command:
            raise UsageError(f"config file is for command {file_values['command']!r}, not {command!r}")
        file_values.pop("command", None)
        unknown = sorted(set(file_values) - set(opts))
        if unknown:
            raise UsageError(f"config file: unknown key(s) {', '.join(unknown)}")
    resolved = {}
    for key, (_, default, _) in opts.items():
        flag = getattr(args, key)
        if flag is not None:
            resolved[key] = flag
        elif key in file_values:
            resolved[key] = _coerce(command, key, file_values[key])
        else:
            resolved[key] = default
    for key in _REQUIRED[command]:
        if resolved[key] is None:
            raise UsageError(f"--{key.replace('_', '-')} is required for '{command}'")
    return resolved


def _recovery_config(opts: dict, base: RecoveryConfig) -> RecoveryConfig:
    """Apply recovery flags on top of ``base`` and write the result back into ``opts``."""
    data = base.to_dict()
    for key, field_name in (("alpha", "alpha"), ("max_iters", "max_iters"), ("gamma", "gamma"),
                            ("overwrite", "overwrite_samples"), ("stop_rel", "stop_rel_residual")):
        if opts[key] is not None:
            data[field_name] = opts[key]
    schedule = opts["schedule"] or data["schedule"]["kind"]
    if schedule == "adaptive":
        if opts["thr0"] is not None or opts["decay"] is not None:
            raise UsageError("--thr0/--decay only apply to --schedule exponential")
        data["schedule"] = {"kind": "adaptive"}
    elif schedule == "exponential":
        current = data["schedule"] if data["schedule"]["kind"] == "exponential" else {}
        decay = opts["decay"] if opts["decay"] is not None else current.get("decay")
        if decay is None:
            raise UsageError("--schedule exponential needs --decay")
        thr0 = opts["thr0"] if opts["thr0"] is not None else current.get("thr0")
        data["schedule"] = {"kind": "exponential", "thr0": thr0, "decay": decay}
    else:
        raise UsageError(f"--schedule must be adaptive or exponential, got {schedule!r}")
    try:
        config = RecoveryConfig.from_dict(data)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    # echo concrete values so the run replays without relying on presets
    opts.update(alpha=config.alpha, max_iters=config.max_iters, gamma=config.gamma,
                overwrite=config.overwrite_samples, stop_rel=config.stop_rel_residual, schedule=schedule,
                thr0=config.schedule.thr0 if isinstance(config.schedule, Exponential) else None,
                decay=config.schedule.decay if isinstance(config.schedule, Exponential) else None)
    return config


def _check_alg(alg: str) -> None:
    if alg not in ALGORITHMS:
        raise UsageError(f"--alg must be one of {', '.join(ALGORITHMS)}, got {alg!r}")


def _read_frame(path):
    return read_frame_csv(path) if str(path).endswith(".csv") else read_frame_f64(path)


def _write_frame(path, frame):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if str(path).endswith(".csv"):
        write_frame_csv(path, frame)
    else:
        write_frame_f64(path, frame)


def _prepare(command: str, opts: dict):
    """Validate option combinations before any computation; returns a runner."""
    if command == "gen":
        if opts["plan"] is None and not 0 < opts["landau"] < 1:
            raise UsageError("--landau must lie in (0, 1)")
        return lambda: _cmd_gen(opts)
    if command == "sample":
        if (opts["rate"] is None) == (opts["m"] is None):
            raise UsageError("give exactly one of --rate and --m")
        if opts["rate"] is not None and not 0 <= opts["rate"] <= 1:
            raise UsageError("--rate must lie in [0, 1]")
        return lambda: _cmd_sample(opts)
    if command == "recover":
        _check_alg(opts["alg"])
        if opts["alg"] == "known-support" and opts["plan"] is None:
            raise UsageError("--alg known-support needs --plan with the true band plan")
        config = _recovery_config(opts, preset_config(opts["alg"]))
        return lambda: _cmd_recover(opts, config)
    if command in ("sweep", "minrate"):
        _check_alg(opts["alg"])
        config = _recovery_config(opts, preset_config(opts["alg"]))
        try:
            spec = ex.SweepSpec(
                landau_fractions=tuple(opts["landau"]), algorithm=opts["alg"],
                rates=tuple(opts["rates"]) if command == "sweep" else None, L=opts["L"],
                trials_per_point=opts["trials"], success_fraction=opts["success_fraction"],
                config=config, base_seed=opts["seed"], input_snr_db=opts.get("snr"),
            )
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        return (lambda: _cmd_sweep(opts, spec)) if command == "sweep" else (lambda: _cmd_minrate(opts, spec))
    if command == "fig6":
        config = _recovery_config(opts, ex.FIG6_CONFIG)
        rates = []
        for item in str(opts["rates"]).split(","):
            item = item.strip()
            try:
                rates.append(("rel", float(item[:-1])) if item.endswith("x") else ("abs", float(item)))
            except ValueError:
                raise UsageError(f"--rates: cannot parse {item!r}") from None
        if opts["trials"] < 1:
            raise UsageError("--trials must be >= 1")
        return lambda: _cmd_fig6(opts, config, rates)
    if command == "verify-noise":
        if opts["trials"] < 10:
            raise UsageError("--trials must be >= 10")
        if not all(0 < r <= 1 for r in opts["rates"]):
            raise UsageError("--rates must lie in (0, 1]")
        return lambda: _cmd_verify_noise(opts)
    raise UsageError(f"unknown command {command!r}")


def _cmd_gen(opts):
    L = opts["L"]
    if opts["plan"] is not None:
        plan = BandPlan.from_json(Path(opts["plan"]).read_text())
    else:
        plan = random_band_plan(L, opts["landau"], opts["bands"], opts["seed"])
    frame, support = gen_multiband(L, plan, opts["seed"])
    _write_frame(opts["out"], frame)
    if opts["plan_out"]:
        Path(opts["plan_out"]).write_text(plan.to_json() + "\n")
    print(json.dumps({"L": L, "bands": [list(b) for b in plan.bands], "landau_fraction": support.landau_fraction}))


def _cmd_sample(opts):
    frame = _read_frame(opts["input"])
    L = frame.size
    m = opts["m"] if opts["m"] is not None else int(round(opts["rate"] * L))
    mask = gen_mask(L, m, opts["seed"])
    _write_frame(opts["out"], apply_mask(frame, mask))
    Path(opts["mask_out"]).parent.mkdir(parents=True, exist_ok=True)
    write_mask(opts["mask_out"], mask)
    print(json.dumps({"L": L, "m": mask.m, "rate": mask.rate}))


def _cmd_recover(opts, config):
    sampled = _read_frame(opts["input"])
    mask = read_mask(opts["mask"])
    support = None
    if opts["plan"] is not None:
        support = BandPlan.from_json(Path(opts["plan"]).read_text()).support(sampled.size)
    reference = _read_frame(opts["reference"]) if opts["reference"] else None
    estimate, trace = recover(opts["alg"], sampled, mask, config, support=support, reference=reference)
    _write_frame(opts["out"], estimate)
    if opts["trace_out"]:
        Path(opts["trace_out"]).write_text(trace.to_csv())
    summary = {"iterations": len(trace)}
    if reference is not None:
        if support is None:
            X = forward_transform(reference)
            support = support_of(X, 1e-6 * float(np.max(np.abs(X))))
        summary.update(json.loads(evaluate(reference, support, estimate).to_json()))
    print(json.dumps(summary))


def _cmd_sweep(opts, spec):
    result = ex.run_sweep(spec)
    result.write(opts["out"])
    sys.stdout.write(result.summary_csv())


def _cmd_minrate(opts, spec):
    results = [ex.min_rate_search(spec, f) for f in spec.landau_fractions]
    text = ex.minrate_csv(results)
    if opts["out"]:
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "minrate.csv").write_text(text)
    sys.stdout.write(text)


def _cmd_fig6(opts, config, rates):
    spec = ex.DEFAULT_FIG6_SPEC
    if opts["spec"] is not None:
        spec = RfSignalSpec.from_json(Path(opts["spec"]).read_text())
    landau = ex.fig6_landau(spec, opts["L"])
    absolute = [v * landau if kind == "rel" else v for kind, v in rates]
    result = ex.run_fig6(spec, absolute, opts["trials"], opts["seed"], config, L=opts["L"], input_snr_db=opts["snr"])
    if opts["out"]:
        result.write(opts["out"])
    sys.stdout.write(f"# measured landau fraction {landau!r}\n")
    sys.stdout.write(result.summary_csv())


def _cmd_verify_noise(opts):
    stats = ex.run_noise_verification(opts["L"], opts["landau"], opts["rates"], opts["trials"], opts["seed"])
    payload = [s.to_dict() for s in stats]
    if opts["out"]:
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "noise.json").write_text(json.dumps(payload, indent=2) + "\n")
    print("kind,rate,empirical,discrete,ratio")
    for s in stats:
        ratio = s.empirical_noise_variance / s.predicted_variance_discrete if s.predicted_variance_discrete else 0.0
        print(f"{s.kind},{s.rate!r},{s.empirical_noise_variance!r},{s.predicted_variance_discrete!r},{ratio!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(_COMMANDS))
        opts = resolve(args.command, args)
        run = _prepare(args.command, opts)
        ex.worker_count()
    except (UsageError, ConfigError) as exc:
        print(f"subnyquist: usage error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, **opts}, sort_keys=True), file=sys.stderr)
    try:
        run()
    except (SubNyquistError, OSError, json.JSONDecodeError) as exc:
        print(f"subnyquist: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
