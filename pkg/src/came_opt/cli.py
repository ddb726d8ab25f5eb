"""Command-line benchmark harness.

Subcommands: run one training experiment, compare optimizers across seeds,
check analytic gradients against the finite-difference oracle, and render
the optimizer-state memory report for a shape manifest.

Options resolve with precedence flags > config file > defaults. A config
file is flat ``key = value`` text (same keys as the long flag names with
dashes as underscores, ``#`` comments). Failures print a machine-readable
JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Callable, Dict, List, Optional, Sequence

from .memory_model import (
    bundled_manifest,
    load_manifest,
    render_table,
    report,
    scale_manifest,
)
from .optimizers import VARIANTS, InvalidConfig, OptimizerConfig
from .problems import PROBLEM_BUILDERS, build_problem, gradient_report
from .runner import (
    RunConfig,
    atomic_write_text,
    compare,
    run,
    write_compare_outputs,
    write_run_outputs,
)

CONFIG_HELP = (
    "config file: flat 'key = value' lines, '#' comments; keys are the long "
    "flag names with underscores (e.g. clip_d, strict_determinism); "
    "precedence is flags > file > defaults"
)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_seeds(text: str) -> List[int]:
    try:
        return [int(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise InvalidConfig("seeds", f"expected comma-separated integers, got {text!r}") from exc


def _parse_problem_spec(text: str):
    """'name' or 'name:key=value,key=value' with numeric values."""
    name, _, tail = str(text).partition(":")
    args: Dict[str, object] = {}
    if tail:
        for piece in tail.split(","):
            if not piece.strip():
                continue
            key, sep, value = piece.partition("=")
            if not sep:
                raise InvalidConfig(
                    "problem", f"expected key=value in problem args, got {piece!r}"
                )
            key = key.strip()
            value = value.strip()
            try:
                args[key] = int(value)
            except ValueError:
                try:
                    args[key] = float(value)
                except ValueError:
                    raise InvalidConfig(
                        "problem", f"problem argument {key!r} must be numeric, got {value!r}"
                    ) from None
    return name.strip(), args


# Option table per subcommand: name -> (parser from string, default).
_CFG_DEFAULTS = OptimizerConfig()

_HYPER_OPTS: Dict[str, tuple] = {
    "lr": (float, _CFG_DEFAULTS.lr),
    "beta1": (float, _CFG_DEFAULTS.beta1),
    "beta2": (float, _CFG_DEFAULTS.beta2),
    "beta3": (float, _CFG_DEFAULTS.beta3),
    "eps1": (float, _CFG_DEFAULTS.eps1),
    "eps2": (float, _CFG_DEFAULTS.eps2),
    "eps3": (float, _CFG_DEFAULTS.eps3),
    "clip_d": (float, _CFG_DEFAULTS.clip_d),
    "warmup": (int, _CFG_DEFAULTS.warmup_steps),
}

_OPTS: Dict[str, Dict[str, tuple]] = {
    "run": {
        "problem": (str, None),
        "optimizer": (str, "came"),
        "steps": (int, 1000),
        "seed": (int, 0),
        "threshold": (float, None),
        "out": (str, None),
        "strict_determinism": (_parse_bool, False),
        **_HYPER_OPTS,
    },
    "compare": {
        "problem": (str, None),
        "optimizer": (str, "came,adafactor"),
        "steps": (int, 1000),
        "seeds": (str, "0"),
        "threshold": (float, None),
        "out": (str, None),
        **_HYPER_OPTS,
    },
    "grad-check": {
        "problem": (str, None),
        "points": (int, 10),
        "tolerance": (float, 1e-6),
        "seed": (int, 2024),
    },
    "memory": {
        "manifest": (str, "bert-large"),
        "baseline": (str, "adam"),
        "scale": (int, 1),
        "width": (int, 4),
        "out": (str, None),
    },
}


def _load_config_file(path: str, allowed: Dict[str, tuple]) -> Dict[str, object]:
    values: Dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key = key.strip()
            value = value.strip()
            if key not in allowed:
                raise InvalidConfig(key, f"unknown config key at {path}:{lineno}")
            parse = allowed[key][0]
            try:
                values[key] = parse(value)
            except InvalidConfig:
                raise
            except ValueError as exc:
                raise InvalidConfig(key, f"bad value at {path}:{lineno}: {exc}") from exc
    return values


def _resolve(args: argparse.Namespace, command: str) -> Dict[str, object]:
    spec = _OPTS[command]
    merged = {name: default for name, (_, default) in spec.items()}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config, spec))
    for name in spec:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            merged[name] = flag_value
    return merged


def _optimizer_config(opts: Dict[str, object]) -> OptimizerConfig:
    return OptimizerConfig(
        lr=opts["lr"],
        beta1=opts["beta1"],
        beta2=opts["beta2"],
        beta3=opts["beta3"],
        eps1=opts["eps1"],
        eps2=opts["eps2"],
        eps3=opts["eps3"],
        clip_d=opts["clip_d"],
        warmup_steps=opts["warmup"],
    ).validate()


def _require(opts: Dict[str, object], name: str) -> object:
    if opts.get(name) in (None, ""):
        raise InvalidConfig(name, "required but not set")
    return opts[name]


def _cmd_run(args: argparse.Namespace) -> int:
    opts = _resolve(args, "run")
    problem_name, problem_args = _parse_problem_spec(_require(opts, "problem"))
    config = RunConfig(
        problem=problem_name,
        problem_args=problem_args,
        optimizer=str(opts["optimizer"]),
        steps=int(opts["steps"]),
        seed=int(opts["seed"]),
        opt=_optimizer_config(opts),
        threshold=opts["threshold"],
    )
    out_prefix = str(_require(opts, "out"))
    result = run(config)
    paths = write_run_outputs(result, out_prefix, strict=bool(opts["strict_determinism"]))
    thr = result.steps_to_threshold
    print(
        f"final_loss={result.final_loss!r} best_loss={result.best_loss!r} "
        f"steps_to_threshold={'-' if thr is None else thr} "
        f"state_elements={result.state_elements}"
    )
    for kind in ("trace", "summary", "timing"):
        if kind in paths:
            print(f"wrote {kind}: {paths[kind]}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    opts = _resolve(args, "compare")
    problem_name, problem_args = _parse_problem_spec(_require(opts, "problem"))
    optimizers = [o.strip() for o in str(opts["optimizer"]).split(",") if o.strip()]
    if not optimizers:
        raise InvalidConfig("optimizer", "expected a comma-separated optimizer list")
    seeds = _parse_seeds(str(opts["seeds"]))
    if not seeds:
        raise InvalidConfig("seeds", "expected at least one seed")
    opt_cfg = _optimizer_config(opts)
    configs = [
        RunConfig(
            problem=problem_name,
            problem_args=problem_args,
            optimizer=name,
            steps=int(opts["steps"]),
            opt=opt_cfg,
            threshold=opts["threshold"],
        )
        for name in optimizers
    ]
    result = compare(configs, seeds)
    print(result.table())
    if opts["out"]:
        paths = write_compare_outputs(result, str(opts["out"]))
        for kind, path in paths.items():
            print(f"wrote {kind}: {path}")
    return 0


def _cmd_grad_check(args: argparse.Namespace) -> int:
    opts = _resolve(args, "grad-check")
    problem_name, problem_args = _parse_problem_spec(_require(opts, "problem"))
    problem = build_problem(problem_name, problem_args)
    rep = gradient_report(
        problem,
        points=int(opts["points"]),
        tolerance=float(opts["tolerance"]),
        seed=int(opts["seed"]),
    )
    for line in rep.lines():
        print(line)
    if not rep.passed:
        _emit_error(f"gradient check failed for {rep.problem}", parameters=list(rep.failing))
        return 1
    return 0


def _cmd_memory(args: argparse.Namespace) -> int:
    opts = _resolve(args, "memory")
    name = str(opts["manifest"])
    width = int(opts["width"])
    try:
        manifest = bundled_manifest(name, element_width_bytes=width)
    except ValueError:
        manifest = load_manifest(name, element_width_bytes=width)
    if int(opts["scale"]) != 1:
        manifest = scale_manifest(manifest, int(opts["scale"]))
    rep = report(manifest, baseline=str(opts["baseline"]))
    print(render_table(rep))
    if opts["out"]:
        path = f"{opts['out']}_memory.json"
        atomic_write_text(path, rep.to_json() + "\n")
        print(f"wrote report: {path}")
    return 0


def _emit_error(message: str, field: Optional[str] = None, **extra) -> None:
    payload: Dict[str, object] = {"message": message}
    if field is not None:
        payload["field"] = field
    payload.update(extra)
    print(json.dumps({"error": payload}, sort_keys=True), file=sys.stderr)


def _add_common_flags(parser: argparse.ArgumentParser, names: Sequence[str]) -> None:
    flags: Dict[str, tuple] = {
        "problem": ("--problem", str, "problem id, optionally 'id:key=val,...'"),
        "optimizer": ("--optimizer", str, f"one of {', '.join(VARIANTS)} (comma list for compare)"),
        "steps": ("--steps", int, "number of optimization steps"),
        "seed": ("--seed", int, "integer seed (PCG64 stream)"),
        "seeds": ("--seeds", str, "comma-separated seeds for compare"),
        "threshold": ("--threshold", float, "loss threshold for steps-to-threshold"),
        "out": ("--out", str, "output path prefix"),
        "lr": ("--lr", float, "learning rate"),
        "beta1": ("--beta1", float, "momentum decay"),
        "beta2": ("--beta2", float, "second-moment decay"),
        "beta3": ("--beta3", float, "instability decay (came)"),
        "eps1": ("--eps1", float, "second-moment regularizer"),
        "eps2": ("--eps2", float, "instability regularizer (came)"),
        "eps3": ("--eps3", float, "raw-confidence regularizer"),
        "clip_d": ("--clip-d", float, "RMS clip threshold"),
        "warmup": ("--warmup", int, "linear warmup steps"),
        "points": ("--points", int, "number of random check points"),
        "tolerance": ("--tolerance", float, "max allowed relative gradient error"),
        "manifest": ("--manifest", str, "bundled manifest name or file path"),
        "baseline": ("--baseline", str, "baseline optimizer for ratios"),
        "scale": ("--scale", int, "integer factor applied to every manifest dim"),
        "width": ("--width", int, "bytes per state element"),
    }
    for name in names:
        flag, typ, help_text = flags[name]
        parser.add_argument(flag, dest=name, type=typ, default=None, help=help_text)
    parser.add_argument("--config", type=str, default=None, help=CONFIG_HELP)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="came-bench",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run",
        help="train one problem with one optimizer, writing a trace CSV and summary JSON",
        epilog=f"problems: {', '.join(sorted(PROBLEM_BUILDERS))}. {CONFIG_HELP}",
    )
    _add_common_flags(
        p_run,
        ["problem", "optimizer", "steps", "seed", "threshold", "out",
         "lr", "beta1", "beta2", "beta3", "eps1", "eps2", "eps3", "clip_d", "warmup"],
    )
    p_run.add_argument(
        "--strict-determinism",
        dest="strict_determinism",
        action="store_const",
        const=True,
        default=None,
        help="omit wall-clock timing from trace and summary (sidecar CSV instead) "
        "so outputs are byte-identical across reruns",
    )
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser(
        "compare",
        help="run several optimizers over the same problem and seeds",
        epilog="set CAME_OPT_THREADS>1 to run (optimizer, seed) pairs in parallel. "
        + CONFIG_HELP,
    )
    _add_common_flags(
        p_cmp,
        ["problem", "optimizer", "steps", "seeds", "threshold", "out",
         "lr", "beta1", "beta2", "beta3", "eps1", "eps2", "eps3", "clip_d", "warmup"],
    )
    p_cmp.set_defaults(func=_cmd_compare)

    p_grad = sub.add_parser(
        "grad-check",
        help="compare analytic gradients against central finite differences",
    )
    _add_common_flags(p_grad, ["problem", "points", "tolerance", "seed"])
    p_grad.set_defaults(func=_cmd_grad_check)

    p_mem = sub.add_parser(
        "memory",
        help="render the optimizer-state memory report for a shape manifest",
    )
    _add_common_flags(p_mem, ["manifest", "baseline", "scale", "width", "out"])
    p_mem.set_defaults(func=_cmd_memory)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler: Callable[[argparse.Namespace], int] = args.func
    try:
        return handler(args)
    except InvalidConfig as exc:
        _emit_error(str(exc), field=exc.field)
        return 1
    except (ValueError, OSError) as exc:
        _emit_error(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
