"""Command-line entry point.

Exit status is 0 on success, 2 for bad input (flags, JSON, caps) and 1 when
a numerical invariant fails (for example a family that is not complete).
Reports are canonical JSON with floats at 17 significant digits and no
timestamps, so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, InvariantError
from .measure import FiniteProbabilitySpace, symbol_to_json
from .scenarios import (
    BUILTINS,
    bb84,
    builtin,
    compile,
    distribution,
    load_scenario,
    parse_vector,
    tuple_cap,
)
from .worlds import (
    GENERATOR,
    characteristic,
    condition,
    contract,
    frequency,
    marginalize,
    shuffle,
    statistical_battery,
    world_stream,
)

COMMANDS = ("distribution", "run", "bb84", "battery", "transforms")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="typical-worlds", description="Simulate measurement scenarios and sample typical worlds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sampling=True):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--builtin", choices=sorted(BUILTINS))
        src.add_argument("--scenario", metavar="PATH")
        sp.add_argument("--psi", help="initial vector for sec9/sec10/sec12-composite(first factor), JSON list")
        sp.add_argument("--p", type=float, help="security parameter for the bb84 builtins")
        if sampling:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--n", type=int)
            sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    common(sub.add_parser("distribution", help="exact outcome distribution"), sampling=False)
    common(sub.add_parser("run", help="sample a world and report frequencies"))
    common(sub.add_parser("battery", help="statistical battery on a sampled world"))
    common(sub.add_parser("transforms", help="transform-closure checks on a sampled world"))
    b = sub.add_parser("bb84", help="BB84 protocol run")
    b.add_argument("--p", type=float, default=0.5)
    b.add_argument("--eve", action="store_true")
    b.add_argument("--seed", type=int)
    b.add_argument("--n", type=int)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--out", metavar="PATH")
    b.add_argument("--format", choices=("json", "csv"), default="json")
    return p


# ------------------------------------------------------------------ JSON text


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def to_json_text(obj, indent: int = 2, level: int = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json_text(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in seq):
            return "[" + ", ".join(to_json_text(x, indent, level + 1) for x in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json_text(x, indent, level + 1) for x in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -------------------------------------------------------------------- helpers


def parse_psi(text: str) -> np.ndarray:
    """JSON list of reals, ``[re, im]`` pairs, or complex literals; normalized to unit length."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        raw = [s.strip() for s in text.strip("[]").split(",") if s.strip()]
    try:
        v = parse_vector(raw if isinstance(raw, list) else [raw])
    except ValueError as exc:
        raise ConfigError(f"malformed --psi: {exc}") from exc
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0:
        raise ConfigError("--psi must be a non-zero finite vector")
    return v / norm


def resolve_scenario(args):
    cfg = {}
    if getattr(args, "scenario", None):
        s = load_scenario(args.scenario)
        cfg["scenario"] = os.path.abspath(args.scenario)
        return s, cfg
    name = getattr(args, "builtin", None)
    if name is None:
        raise ConfigError("give --builtin NAME or --scenario PATH")
    kwargs = {}
    if args.psi is not None:
        if name not in ("sec9", "sec10", "sec12-composite", "mixture"):
            raise ConfigError(f"--psi does not apply to builtin {name!r}")
        psi = parse_psi(args.psi)
        if name == "sec12-composite":
            kwargs["psis"] = (psi, (3**-0.5, (2 / 3) ** 0.5))
        elif name == "mixture":
            kwargs["psi_a"] = psi
        else:
            kwargs["psi"] = psi
        cfg["psi"] = _vector_json(psi)
    if args.p is not None:
        if not name.startswith("bb84"):
            raise ConfigError(f"--p does not apply to builtin {name!r}")
        kwargs["p"] = args.p
        cfg["p"] = args.p
    cfg["builtin"] = name
    return builtin(name, **kwargs), cfg


def _vector_json(v) -> dict:
    v = np.asarray(v, dtype=complex)
    return {"re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]}


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            raise ConfigError(f"--{n} is required for {args.command}")
    if getattr(args, "n", None) is not None and args.n < 1:
        raise ConfigError("--n must be positive")
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        raise ConfigError("--threads must be positive")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")


def _freq_rows(rep) -> list[list]:
    return [
        [symbol_to_json(a), rep.counts[a], rep.empirical[a], rep.reference.prob(a)]
        for a in rep.reference.alphabet
    ]


def _csv_symbol(a) -> str:
    if isinstance(a, (list, tuple)):
        return "(" + " ".join(_csv_symbol(x) for x in a) + ")"
    return str(a)


def _csv_value(x) -> str:
    return _fmt_float(float(x)).strip('"') if isinstance(x, float) else str(x)


def _to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join([_csv_symbol(r[0])] + [_csv_value(x) for x in r[1:]]))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- commands


def cmd_distribution(args, cfg):
    s, scfg = resolve_scenario(args)
    cfg.update(scfg)
    dist = distribution(s)
    fam = compile(s)
    rows = [[symbol_to_json(a), p] for a, p in zip(dist.space.alphabet, dist.space.probs)]
    if args.format == "csv":
        return _to_csv(["symbol", "probability"], rows)
    return {"space": {"alphabet": [r[0] for r in rows], "probs": [r[1] for r in rows]}, "completeness_residual": fam.residual}


def _sampled_world(args, cfg):
    s, scfg = resolve_scenario(args)
    cfg.update(scfg)
    seed = s.seed if args.seed is None else args.seed
    n = s.repetitions if args.n is None else args.n
    cfg.update(seed=seed, n=n)
    _require(argparse.Namespace(command=args.command, n=n, seed=seed, threads=args.threads))
    dist = distribution(s)
    return dist.space, world_stream(dist.space, seed, args.threads), n


def cmd_run(args, cfg):
    space, w, n = _sampled_world(args, cfg)
    rep = frequency(w.prefix(n), space)
    if args.format == "csv":
        return _to_csv(["symbol", "count", "empirical", "reference"], _freq_rows(rep))
    return {"frequency": rep.to_json()}


def cmd_battery(args, cfg):
    if args.format == "csv":
        raise ConfigError("CSV output is only available for frequency tables")
    space, w, n = _sampled_world(args, cfg)
    return {"battery": statistical_battery(w.prefix(n), space).to_json()}


def transform_suite(space: FiniteProbabilitySpace, w, n: int) -> list[dict]:
    """Apply each transform to ``w`` and check it against its governing space."""
    support = [a for a in space.alphabet if space.prob(a) > 0]
    out = []
    cases = []
    if len(support) >= 2:
        cases.append(("contract", contract(w, support[1], support[0])))
    if all(isinstance(a, tuple) for a in space.alphabet):
        cases.append(("marginalize[0]", marginalize(w, 0)))
    top = max(support, key=space.prob)
    if len(support) >= 2:
        cases.append(("condition", condition(w, support[: (len(support) + 1) // 2])))
    cases.append(("characteristic", characteristic(w, [top])))
    cases.append(("shuffle[2n]", shuffle(w, 2)))
    cases.append(("shuffle[primes]", shuffle(w, "primes")))
    for name, t in cases:
        pre = t.prefix(n)
        rep = frequency(pre, t.space)
        entry = {
            "transform": name,
            "space": {"alphabet": [symbol_to_json(a) for a in t.space.alphabet], "probs": list(t.space.probs)},
            "max_abs_deviation": rep.max_abs_deviation,
            "sigma_bound": rep.sigma_bound,
            "within_bound": rep.within_bound,
        }
        if n >= 1000:
            entry["battery_passed"] = statistical_battery(pre, t.space).passed
        out.append(entry)
    return out


def cmd_transforms(args, cfg):
    if args.format == "csv":
        raise ConfigError("CSV output is only available for frequency tables")
    space, w, n = _sampled_world(args, cfg)
    return {"transforms": transform_suite(space, w, n)}


def cmd_bb84(args, cfg):
    if args.format == "csv":
        raise ConfigError("CSV output is only available for frequency tables")
    seed = 0 if args.seed is None else args.seed
    n = 100_000 if args.n is None else args.n
    cfg.update(p=args.p, eve=args.eve, seed=seed, n=n)
    _require(argparse.Namespace(command="bb84", n=n, seed=seed, threads=args.threads))
    if not 0 < args.p < 1:
        raise ConfigError(f"--p must lie in (0, 1), got {args.p}")
    return bb84(args.p, args.eve, seed, n, args.threads).to_json()


HANDLERS = {
    "distribution": cmd_distribution,
    "run": cmd_run,
    "battery": cmd_battery,
    "transforms": cmd_transforms,
    "bb84": cmd_bb84,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cfg = {"command": args.command, "format": args.format, "tuple_cap": None, "threads": getattr(args, "threads", None)}
    try:
        cfg["tuple_cap"] = tuple_cap()
        if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be positive")
        result = HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"invariant violated ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    if isinstance(result, str):
        text = result
    else:
        report = {"tool": "typical-worlds", "version": __version__, "generator": GENERATOR, "config": cfg, **result}
        text = to_json_text(report) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"config error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return 0

