"""Command-line entry point.

Every subcommand reads its settings from built-in defaults, then an optional
JSON ``--config`` file, then explicit flags (later wins). Unknown config keys
and invalid values are rejected before any work starts.

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .protocol import Budget, write_trajectories
from .reward import KINDS, RewardScheme
from .sandbox.db import DbParseError, DbValidationError, SandboxDb, load_db, save_db
from .sandbox.generate import SCALES, generate_db
from .sandbox.tools import FailureConfig

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
POLICIES = ("oracle", "random", "silent", "remote", "toy")


class UsageError(Exception):
    pass


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class Opt:
    key: str
    type: Callable[[str], Any]
    default: Any
    help: str
    required: bool = False


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _ratio(s: str) -> tuple[int, int, int]:
    parts = s.split(":")
    try:
        vals = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratio must look like 4:3:3, got {s!r}") from None
    if len(vals) != 3 or any(v < 0 for v in vals) or sum(vals) == 0:
        raise argparse.ArgumentTypeError(f"ratio must be three nonnegative integers, got {s!r}")
    return vals  # type: ignore[return-value]


def _probs(s: str) -> list[float]:
    try:
        return [float(p) for p in s.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"probabilities must be comma-separated numbers, got {s!r}") from None


def _json_obj(s: str) -> dict[str, Any] | None:
    if s in ("", "none", "null"):
        return None
    try:
        v = json.loads(s)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not JSON: {exc}") from None
    if not isinstance(v, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return v


_DB_OPTS = [
    Opt("db", str, None, "database directory (written by gen-db); generated from --db-seed/--scale when absent"),
    Opt("db_seed", int, 0, "seed for an on-the-fly database"),
    Opt("scale", str, "desk", f"scale for an on-the-fly database ({', '.join(SCALES)})"),
]

_RUN_OPTS = _DB_OPTS + [
    Opt("dataset", str, None, "dataset file (written by synth); synthesized on the fly when absent"),
    Opt("n", int, None, "use only the first N queries (or synthesize N)"),
    Opt("policy", str, "oracle", f"policy: {', '.join(POLICIES)}"),
    Opt("checkpoint", str, None, "toy policy checkpoint (written by train-toy)"),
    Opt("url", str, None, "remote policy endpoint; the token comes from TRAVELRL_POLICY_TOKEN"),
    Opt("seed", int, 0, "top-level seed"),
    Opt("failure_p", float, 0.0, "tool failure probability"),
    Opt("scheme", str, "Sum", f"reward scheme ({', '.join(KINDS)})"),
    Opt("workers", int, 0, "worker processes (0 means all logical cores)"),
    Opt("max_tool_calls", int, 60, "tool-call budget per episode"),
    Opt("max_tokens", int, 32000, "context budget per episode in proxy tokens (inference default)"),
    Opt("out", str, "runs/rollout", "output directory"),
]

_TRAIN_OPTS = [
    Opt("seed", int, 0, "top-level seed (mini-task, batches, rollouts, evaluation)"),
    Opt("scheme", str, "Sum", f"reward scheme ({', '.join(KINDS)})"),
    Opt("epochs", int, 5, "training epochs"),
    Opt("updates_per_epoch", int, 60, "updates per epoch"),
    Opt("batch_size", int, 32, "queries per update"),
    Opt("G", int, 8, "group size"),
    Opt("lr", float, 50.0, "gradient-ascent step size"),
    Opt("temperature", float, 1.0, "softmax temperature"),
    Opt("eps_low", float, 0.2, "lower clip bound"),
    Opt("eps_high", float, 0.28, "upper clip bound"),
    Opt("ppo_epochs", int, 1, "gradient steps per collected batch"),
    Opt("dapo", _bool, False, "drop zero-variance groups"),
    Opt("arpo", _json_obj, None, 'entropy branching, e.g. {"entropy_threshold": 0.1, "branch_factor": 2, '
                                 '"global_rollout_budget": 16}'),
    Opt("failure_p", float, 0.0, "tool failure probability during training"),
    Opt("use_tools", _bool, False, "look things up with tools before answering"),
    Opt("eval_every", int, 10, "validate every N updates"),
    Opt("n_train", int, 300, "training queries"),
    Opt("n_val", int, 100, "validation queries"),
    Opt("out", str, "runs/train", "output directory"),
]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "gen-db": ("generate a sandbox database", [
        Opt("seed", int, None, "generator seed", required=True),
        Opt("scale", str, "desk", f"database scale ({', '.join(SCALES)})"),
        Opt("out", str, "runs/db", "output directory"),
    ]),
    "synth": ("synthesize certified queries", _DB_OPTS + [
        Opt("count", int, 1000, "number of queries"),
        Opt("ratio", _ratio, (4, 3, 3), "easy:medium:hard ratio"),
        Opt("seed", int, 0, "sampling seed"),
        Opt("slack", float, 1.3, "budget slack over the cheapest plan"),
        Opt("out", str, "runs/dataset.jsonl", "output dataset file"),
    ]),
    "rollout": ("run a policy once per query and log trajectories", _RUN_OPTS),
    "eval": ("benchmark a policy and write a metrics report", _RUN_OPTS),
    "sft": ("keep successful trajectories and export them as conversations", _RUN_OPTS),
    "train-toy": ("train the toy policy with GRPO on the mini-task", _TRAIN_OPTS),
    "failure-sweep": ("train at several failure probabilities, evaluate each without failures", _TRAIN_OPTS + [
        Opt("probs", _probs, [0.0, 0.01, 0.05, 0.1], "comma-separated failure probabilities"),
    ]),
    "reference": ("print the flag and config-key reference as markdown", []),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="travelrl", description="Travel-planning RL testbed.")
    p.add_argument("--version", action="version", version=f"travelrl {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (help_text, opts) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text, argument_default=argparse.SUPPRESS)
        if opts:
            sp.add_argument("--config", help="JSON file of settings (flags override it)")
        for o in opts:
            shown = "" if o.default is None else f" [default: {_show(o.default)}]"
            sp.add_argument(f"--{o.key.replace('_', '-')}", dest=o.key, type=o.type, help=o.help + shown)
    return p


def _show(v: Any) -> str:
    if isinstance(v, tuple):
        return ":".join(map(str, v))
    if isinstance(v, list):
        return ",".join(map(str, v))
    return json.dumps(v) if isinstance(v, (bool, dict)) or v is None else str(v)


def resolve(command: str, ns: argparse.Namespace) -> dict[str, Any]:
    """defaults < config file < flags; validates keys and coerces config values."""
    opts = {o.key: o for o in COMMANDS[command][1]}
    cfg = {k: o.default for k, o in opts.items()}
    given = vars(ns)
    if given.get("config"):
        path = Path(given["config"])
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: expected a JSON object")
        unknown = sorted(set(data) - set(opts))
        if unknown:
            raise ValidationError(f"{path}: unknown keys for {command}: {', '.join(unknown)}")
        for k, v in data.items():
            cfg[k] = _coerce(opts[k], v, path)
    for k in opts:
        if k in given:
            cfg[k] = given[k]
    missing = [k for k, o in opts.items() if o.required and cfg[k] is None]
    if missing:
        raise UsageError(f"travelrl {command}: missing required setting(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))
    return cfg


def _coerce(opt: Opt, v: Any, path: Path) -> Any:
    if v is None:
        return None
    try:
        if opt.type is _ratio:
            return _ratio(v if isinstance(v, str) else ":".join(map(str, v)))
        if opt.type is _probs:
            return _probs(v if isinstance(v, str) else ",".join(map(str, v)))
        if opt.type is _json_obj:
            return v if isinstance(v, dict) else _json_obj(str(v))
        if opt.type is _bool:
            return v if isinstance(v, bool) else _bool(str(v))
        if opt.type in (int, float) and isinstance(v, bool):
            raise ValueError("booleans are not numbers")
        if opt.type is int and isinstance(v, float) and not v.is_integer():
            raise ValueError("expected an integer")
        return opt.type(v)
    except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        raise ValidationError(f"{path}: bad value for {opt.key!r}: {exc}") from None


# -- shared helpers ---------------------------------------------------------------------------


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _load_db(cfg: dict[str, Any]) -> SandboxDb:
    if cfg["db"]:
        path = Path(cfg["db"])
        _check(path.is_dir(), f"database directory not found: {path}")
        try:
            return load_db(path)
        except (DbParseError, DbValidationError) as exc:
            raise ValidationError(f"{path}: {exc}") from None
    _check(cfg["scale"] in SCALES, f"unknown scale {cfg['scale']!r}")
    return generate_db(cfg["db_seed"], cfg["scale"])


def _out_dir(cfg: dict[str, Any]) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sidecar(out: Path, command: str, started: float) -> None:
    # wall-clock facts live here only, so the other outputs stay reproducible
    with (out / "run.log").open("a", encoding="utf-8") as fh:
        fh.write(json.dumps({"command": command, "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
                             "seconds": round(time.time() - started, 3)}) + "\n")


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands ---------------------------------------------------------------------------------


def cmd_gen_db(cfg: dict[str, Any]) -> int:
    _check(cfg["scale"] in SCALES, f"unknown scale {cfg['scale']!r}; choose from {', '.join(SCALES)}")
    _check(cfg["seed"] >= 0, "seed must be nonnegative")
    started = time.time()
    db = generate_db(cfg["seed"], cfg["scale"])
    out = save_db(db, cfg["out"])
    print(f"wrote {cfg['scale']} database (seed {cfg['seed']}) to {out}")
    print("  " + ", ".join(f"{k}={v}" for k, v in db.counts().items()))
    _sidecar(Path(out), "gen-db", started)
    return EXIT_OK


def cmd_synth(cfg: dict[str, Any]) -> int:
    from .synthesis import save_dataset, split_counts, synthesize_dataset

    _check(cfg["count"] >= 1, "count must be positive")
    _check(cfg["slack"] >= 1.0, "slack must be at least 1")
    db = _load_db(cfg)
    started = time.time()
    counts = split_counts(cfg["count"], cfg["ratio"])
    try:
        items = synthesize_dataset(db, counts, seed=cfg["seed"], slack=cfg["slack"])
    except ValueError as exc:
        raise ValidationError(f"cannot synthesize queries: {exc}") from None
    path = save_dataset(items, cfg["out"])
    got = {d: sum(1 for it in items if it.difficulty == d) for d in counts}
    print(f"wrote {len(items)} queries to {path}")
    for d, want in counts.items():
        print(f"  {d:<6} {got[d]:>5} / {want}")
    _sidecar(path.parent, "synth", started)
    return EXIT_OK


def _policy(cfg: dict[str, Any], db: SandboxDb):
    from .rollout import OraclePolicy, RandomPolicy, RemotePolicy, SilentPolicy

    name = cfg["policy"]
    _check(name in POLICIES, f"unknown policy {name!r}; choose from {', '.join(POLICIES)}")
    if name == "oracle":
        return OraclePolicy(db)
    if name == "random":
        return RandomPolicy(db)
    if name == "silent":
        return SilentPolicy()
    if name == "remote":
        _check(bool(cfg["url"]), "the remote policy needs --url")
        return RemotePolicy(cfg["url"])
    from .optim import ToyPolicy, load_checkpoint

    _check(bool(cfg["checkpoint"]), "the toy policy needs --checkpoint")
    path = Path(cfg["checkpoint"])
    _check(path.is_file(), f"checkpoint not found: {path}")
    pol = ToyPolicy(db)
    load_checkpoint(path, pol)
    return pol


def _run_inputs(cfg: dict[str, Any]):
    """(db, items) for rollout-style commands; the toy policy defaults to its own mini-task."""
    from .synthesis import load_dataset, split_counts, synthesize_dataset

    _check(cfg["n"] is None or cfg["n"] >= 1, "n must be positive")
    _check(cfg["policy"] in POLICIES, f"unknown policy {cfg['policy']!r}; choose from {', '.join(POLICIES)}")
    if cfg["policy"] == "toy" and not cfg["db"] and not cfg["dataset"]:
        from .optim import make_minitask

        _check(bool(cfg["checkpoint"]) and Path(cfg["checkpoint"]).is_file(),
               f"checkpoint not found: {cfg['checkpoint']}")
        meta = json.loads(Path(cfg["checkpoint"]).read_text()).get("meta", {})
        task = make_minitask(int(meta.get("seed", 0)), int(meta.get("n_train", 300)), int(meta.get("n_val", 100)))
        items = task.val
        db = task.db
    else:
        db = _load_db(cfg)
        if cfg["dataset"]:
            path = Path(cfg["dataset"])
            _check(path.is_file(), f"dataset not found: {path}")
            items = load_dataset(path)
        else:
            try:
                items = synthesize_dataset(db, split_counts(cfg["n"] or 200), seed=cfg["seed"])
            except ValueError as exc:
                raise ValidationError(f"cannot synthesize queries: {exc}") from None
    if cfg["n"] is not None:
        items = items[: cfg["n"]]
    _check(bool(items), "dataset is empty")
    return db, items


def _run(cfg: dict[str, Any], command: str):
    from .rollout import run_benchmark

    _check(0.0 <= cfg["failure_p"] <= 1.0, "failure_p must lie in [0, 1]")
    _check(cfg["scheme"] in KINDS, f"unknown scheme {cfg['scheme']!r}")
    _check(cfg["workers"] >= 0, "workers must be nonnegative")
    try:
        budget = Budget(cfg["max_tool_calls"], cfg["max_tokens"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    scheme = RewardScheme.curriculum() if cfg["scheme"] == "Curriculum" else RewardScheme(cfg["scheme"])
    db, items = _run_inputs(cfg)
    policy = _policy(cfg, db)
    out = _out_dir(cfg)
    started = time.time()
    report, results = run_benchmark(
        policy, [(it.spec, it.text) for it in items], db,
        seed=cfg["seed"], workers=cfg["workers"] or None,
        budget=budget, failure=FailureConfig(cfg["failure_p"]), scheme=scheme,
    )
    return db, items, report, results, out, started


def cmd_rollout(cfg: dict[str, Any], command: str = "rollout") -> int:
    from .rollout import result_record

    db, items, report, results, out, started = _run(cfg, command)
    write_trajectories(out / "trajectories.jsonl", (result_record(r, i) for i, r in enumerate(results)))
    _write_json(out / "metrics.json", {"policy": cfg["policy"], **report.to_json()})
    (out / "metrics.txt").write_text(report.table() + "\n")
    print(report.table())
    print(f"wrote {out / 'trajectories.jsonl'} and {out / 'metrics.json'}")
    _sidecar(out, command, started)
    return EXIT_OK


def cmd_eval(cfg: dict[str, Any]) -> int:
    db, items, report, results, out, started = _run(cfg, "eval")
    _write_json(out / "metrics.json", {"policy": cfg["policy"], **report.to_json()})
    (out / "metrics.txt").write_text(report.table() + "\n")
    print(report.table())
    _sidecar(out, "eval", started)
    return EXIT_OK


def cmd_sft(cfg: dict[str, Any]) -> int:
    from .rollout import export_sft, filter_sft

    db, items, report, results, out, started = _run(cfg, "sft")
    kept, stats = filter_sft([r.trajectory for r in results], {it.text: it.spec for it in items}, db)
    export_sft(kept, out / "sft.jsonl")
    _write_json(out / "sft_stats.json", {k: v.to_json() for k, v in stats.items()})
    print(f"kept {len(kept)} of {len(results)} trajectories")
    print(f"{'split':<7} {'count':>6} {'tool calls':>11} {'tokens':>9}")
    for k, v in stats.items():
        print(f"{k:<7} {v.count:>6} {v.avg_tool_calls:>11.2f} {v.avg_tokens:>9.1f}")
    _sidecar(out, "sft", started)
    return EXIT_OK


def _train_config(cfg: dict[str, Any], **override: Any):
    from .optim import TrainConfig

    keys = {k: cfg[k] for k in TrainConfig.__dataclass_fields__ if k in cfg}
    keys.update(override)
    try:
        return TrainConfig(**keys)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"bad training settings: {exc}") from None


def cmd_train_toy(cfg: dict[str, Any]) -> int:
    from .optim import save_checkpoint, train_toy, write_curve

    tc = _train_config(cfg)
    out = _out_dir(cfg)
    started = time.time()
    res = train_toy(tc)
    meta = {"seed": tc.seed, "n_train": tc.n_train, "n_val": tc.n_val}
    write_curve(res, out / "curve.jsonl")
    save_checkpoint(res.best_state, out / "best.json", {**meta, "update": res.best_update,
                                                         "val_success": res.best_success})
    save_checkpoint(res.final_state, out / "final.json", {**meta, "update": tc.total_updates})
    summary = res.summary()
    summary.pop("seconds")
    _write_json(out / "summary.json", {"config": tc.to_json(), **summary, "evals": res.evals})
    print(f"scheme {tc.scheme}: validation success {res.baseline_success:.1%} -> best {res.best_success:.1%} "
          f"(update {res.best_update} of {tc.total_updates})")
    for s in res.switches:
        print(f"  epoch {s['epoch']} (update {s['update']}): reward {s['kind']}")
    _sidecar(out, "train-toy", started)
    return EXIT_OK


def cmd_failure_sweep(cfg: dict[str, Any]) -> int:
    from .optim import ToyPolicy, make_minitask, train_toy, validation_success

    probs = cfg["probs"]
    _check(bool(probs), "probs is empty")
    _check(all(0.0 <= p <= 1.0 for p in probs), "every probability must lie in [0, 1]")
    out = _out_dir(cfg)
    started = time.time()
    base = _train_config(cfg, use_tools=True)
    task = make_minitask(base.seed, base.n_train, base.n_val)
    rows = []
    for p in probs:
        tc = _train_config(cfg, use_tools=True, failure_p=p)
        res = train_toy(tc, task)
        pol = ToyPolicy(task.db)
        pol.set_state(res.best_state)
        clean = validation_success(pol, task, tc.seed, FailureConfig(0.0))
        rows.append({"train_failure_p": p, "clean_val_success": clean, "best_update": res.best_update,
                     "baseline_success": res.baseline_success})
    _write_json(out / "sweep.json", {"config": base.to_json(), "rows": rows})
    print(f"{'train p':>8} {'clean success':>14}")
    for r in rows:
        print(f"{r['train_failure_p']:>8.2f} {100 * r['clean_val_success']:>13.1f}%")
    _sidecar(out, "failure-sweep", started)
    return EXIT_OK


def reference_markdown() -> str:
    lines = ["# travelrl command reference", "",
             "Settings come from built-in defaults, then `--config FILE` (a JSON object whose keys are the "
             "setting names below), then flags. Unknown config keys are rejected.", "",
             "Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.", ""]
    for name, (help_text, opts) in COMMANDS.items():
        lines += [f"## `travelrl {name}`", "", help_text[0].upper() + help_text[1:] + ".", ""]
        if not opts:
            continue
        lines += ["| flag | config key | default | meaning |", "|---|---|---|---|"]
        for o in opts:
            default = "required" if o.required else _show(o.default)
            lines.append(f"| `--{o.key.replace('_', '-')}` | `{o.key}` | `{default}` | {o.help} |")
        lines.append("")
    return "\n".join(lines)


HANDLERS: dict[str, Callable[[dict[str, Any]], int]] = {
    "gen-db": cmd_gen_db,
    "synth": cmd_synth,
    "rollout": cmd_rollout,
    "eval": cmd_eval,
    "sft": cmd_sft,
    "train-toy": cmd_train_toy,
    "failure-sweep": cmd_failure_sweep,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_help()
            return EXIT_USAGE
        if ns.command == "reference":
            print(reference_markdown())
            return EXIT_OK
        cfg = resolve(ns.command, ns)
        return HANDLERS[ns.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
