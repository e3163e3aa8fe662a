"""``pathfx`` command line.

Machine output goes to standard output only (one JSON document, or DOT text
for ``diagram``); diagnostics go to standard error.  Exit codes: 0 success,
1 semantic/validation error, 2 parse error, 3 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Sequence, TextIO

from .dsl import ModelFile, parse_model
from .errors import NonNumericDomain, ParseError, PathFxError, RequiresScm
from .graph import Node, World, causal_diagram, directed_paths, find_recanting_witness, to_dot, validate_path
from .infer import (
    DEFAULT_MAX_STATES,
    exact_joint,
    expectation,
    factorization_to_json,
    joint_to_json,
    marginalize,
    observational_factorization,
    path_factorization,
    round12,
)
from .intervene import DoIntervention, IntervenedModel, apply_do, apply_info, apply_path, intervention_diagram
from .model import Scm
from .sample import NestedSpec, nested_counterfactual_sample, sample_model, tv_distance

SCHEMA = 1
EXIT_OK, EXIT_SEMANTIC, EXIT_PARSE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _assignment(text: str) -> tuple[str, str]:
    name, sep, value = text.partition("=")
    if not sep or not name.strip() or not value.strip():
        raise argparse.ArgumentTypeError(f"expected X=v, got {text!r}")
    return name.strip(), value.strip()


def _build_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="pathfx", description="Path interventions and exact path-specific effects.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def with_file(sp):
        sp.add_argument("file", help="model file (.scm.txt)")
        return sp

    def with_interventions(sp, path_required=False):
        sp.add_argument("--do", action="append", type=_assignment, default=[], metavar="X=v")
        sp.add_argument("--info", action="append", type=_assignment, default=[], metavar="X=v")
        sp.add_argument("--path", required=path_required, metavar='"A->M->Y"')
        sp.add_argument("--value", metavar="a'", help="value transmitted along --path")
        sp.add_argument("--target", type=lambda s: [t.strip() for t in s.split(",") if t.strip()], metavar="LIST")

    def with_sampling(sp):
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--workers", type=int, default=1)

    with_file(sub.add_parser("validate", help="parse and check a model file"))

    sp = with_file(sub.add_parser("paths", help="enumerate directed paths"))
    sp.add_argument("--from", dest="source", required=True)
    sp.add_argument("--to", dest="target", required=True)

    sp = with_file(sub.add_parser("witness", help="recanting-witness verdict for a path"))
    sp.add_argument("--path", required=True)

    sp = with_file(sub.add_parser("diagram", help="emit an (intervention) diagram as DOT"))
    with_interventions(sp)
    sp.add_argument("--augmented", action="store_true")
    sp.add_argument("--keep-all", action="store_true")
    sp.add_argument("-o", "--output")

    sp = with_file(sub.add_parser("infer", help="pi-formula and exact marginal"))
    with_interventions(sp)
    sp.add_argument("--keep-factual", action="store_true")
    sp.add_argument("--format", choices=["json", "text"], default="json")

    sp = with_file(sub.add_parser("sample", help="empirical table by ancestral sampling"))
    with_interventions(sp)
    with_sampling(sp)

    sp = with_file(sub.add_parser("compare", help="exact vs sampled vs nested counterfactual"))
    with_interventions(sp, path_required=True)
    with_sampling(sp)
    sp.add_argument("--nested", metavar="a,a'")

    for sp in sub.choices.values():
        sp.add_argument("--timing", action="store_true", help="include wall_time_ms in the report")
    return p


def _max_states() -> int:
    raw = os.environ.get("PATHFX_MAX_STATES")
    if not raw:
        return DEFAULT_MAX_STATES
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PATHFX_MAX_STATES must be an integer, got {raw!r}") from None


def _load(path: str) -> ModelFile:
    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_model(text)


def _intervene(args, model):
    """Returns (kind, intervened object, description)."""
    modes = [m for m in ("do", "info") if getattr(args, m)] + (["path"] if args.path else [])
    if len(modes) > 1:
        raise UsageError("--do, --info and --path are mutually exclusive")
    if args.path and args.value is None:
        raise UsageError("--path needs --value")
    if args.value is not None and not args.path:
        raise UsageError("--value needs --path")
    if not modes:
        return "none", model, "none"
    if modes[0] == "path":
        pim = apply_path(model, args.path, args.value, keep_all=getattr(args, "keep_all", False))
        return "path", pim, pim.describe()
    apply = apply_do if modes[0] == "do" else apply_info
    assignments = dict(getattr(args, modes[0]))
    if len(assignments) != len(getattr(args, modes[0])):
        raise UsageError(f"--{modes[0]} names a variable twice")
    result, _ = apply(model, assignments)
    return modes[0], result, result.intervention.describe()


def _columns(kind, obj, model, targets, keep_factual):
    if kind != "path":
        return [Node(t) for t in (targets or model.names)]
    cf = obj.counterfactuals
    cols = []
    for t in targets or cf:
        model.domain(t)
        if keep_factual and t in cf:
            cols.append(Node(t))
        cols.append(Node(t, World.PI) if t in cf else Node(t))
    if keep_factual and not targets:
        cols = [Node(n) for n in model.topological_order()] + [Node(n, World.PI) for n in cf]
    return cols


def _factorization(kind, obj):
    return path_factorization(obj) if kind == "path" else observational_factorization(obj)


def _report(args, argv, mf, description, result, started, seed=None) -> dict:
    report = {
        "schema": SCHEMA,
        "command": list(argv),
        "model": mf.name,
        "intervention": description,
        "result": result,
    }
    if seed is not None:
        report["seed"] = seed
    if args.timing:
        report["wall_time_ms"] = round((time.perf_counter() - started) * 1000, 3)
    return report


def _cmd_validate(args, argv, started):
    mf = _load(args.file)
    model = mf.build()
    result = {
        "kind": mf.kind,
        "variables": [{"name": v.name, "domain": list(v.domain.values)} for v in model.variables],
        "edges": [list(e) for e in sorted(model.edges())],
        "topological_order": list(model.topological_order()),
    }
    return _report(args, argv, mf, "none", result, started)


def _cmd_paths(args, argv, started):
    mf = _load(args.file)
    dag = causal_diagram(mf.build())
    paths = directed_paths(dag, args.source, args.target)
    return _report(args, argv, mf, "none", {"paths": [str(p) for p in paths]}, started)


def _cmd_witness(args, argv, started):
    mf = _load(args.file)
    dag = causal_diagram(mf.build())
    path = validate_path(dag, args.path)
    w = find_recanting_witness(dag, path)
    return _report(args, argv, mf, "none", {"path": str(path), "witness": w}, started)


def _cmd_diagram(args, argv, started, out: TextIO):
    mf = _load(args.file)
    model = mf.build()
    kind, obj, desc = _intervene(args, model)
    if kind == "none" and not args.augmented:
        diagram = causal_diagram(model)
    else:
        if kind == "none":
            obj = IntervenedModel(model, model, DoIntervention({}))
        diagram = intervention_diagram(obj, augmented=args.augmented)
    dot = to_dot(diagram, name=mf.name)
    if args.output and args.output != "-":
        Path(args.output).write_text(dot, encoding="utf-8")
        return _report(args, argv, mf, desc, {"diagram": args.output}, started)
    out.write(dot)
    return None


def _cmd_infer(args, argv, started, out: TextIO):
    mf = _load(args.file)
    model = mf.build()
    kind, obj, desc = _intervene(args, model)
    fz = _factorization(kind, obj)
    joint = exact_joint(obj, fz, max_states=_max_states())
    cols = _columns(kind, obj, _joint_model(kind, obj, model), args.target, args.keep_factual)
    marginal = marginalize(joint, cols)
    if args.format == "text":
        lines = [f"# {mf.name}: {desc}", str(fz)]
        for values, p in marginal.rows():
            lines.append("  ".join(f"{c}={v}" for c, v in zip(marginal.columns, values)) + f"\t{format(p, '.12g')}")
        out.write("\n".join(lines) + "\n")
        return None
    result = {"factorization": factorization_to_json(fz), "marginal": joint_to_json(marginal)}
    return _report(args, argv, mf, desc, result, started)


def _joint_model(kind, obj, model):
    if kind == "path":
        return obj.base
    return obj.model if kind in ("do", "info") else model


def _cmd_sample(args, argv, started):
    mf = _load(args.file)
    model = mf.build()
    kind, obj, desc = _intervene(args, model)
    table = sample_model(obj, args.n, args.seed, workers=args.workers, max_states=_max_states())
    cols = _columns(kind, obj, _joint_model(kind, obj, model), args.target, False)
    if args.target or kind == "path":
        table = table.marginal(cols)
    return _report(args, argv, mf, desc, {"empirical": table.to_json()}, started, seed=args.seed)


def _maybe_expectation(table) -> float | None:
    try:
        return round12(expectation(table, table.columns[0]))
    except NonNumericDomain:
        return None


def _cmd_compare(args, argv, started):
    mf = _load(args.file)
    model = mf.build()
    kind, pim, desc = _intervene(args, model)
    targets = args.target or [pim.path.tail]
    cols = _columns(kind, pim, pim.base, targets, False)
    exact = marginalize(exact_joint(pim, path_factorization(pim), max_states=_max_states()), cols)
    empirical = sample_model(pim, args.n, args.seed, workers=args.workers, max_states=_max_states()).marginal(cols)
    result = {
        "exact": joint_to_json(exact),
        "empirical": empirical.to_json(),
        "tv_distance": round12(tv_distance(empirical, exact)),
    }
    if len(cols) == 1:
        result["exact_expectation"] = _maybe_expectation(exact)
    if args.nested:
        parts = [s.strip() for s in args.nested.split(",")]
        if len(parts) != 2 or not all(parts):
            raise UsageError(f"--nested expects a,a' got {args.nested!r}")
        if not isinstance(model, Scm):
            raise RequiresScm("--nested needs an SCM model file (noise and mech declarations)")
        spec = NestedSpec(pim.path, parts[0], parts[1])
        nested = nested_counterfactual_sample(model, spec, args.n, args.seed, workers=args.workers)
        law = nested.frequencies()
        exact_tail = marginalize(exact_joint(pim, path_factorization(pim), max_states=_max_states()), [Node(pim.path.tail, World.PI)])
        result["nested"] = {
            "on_path_value": parts[0],
            "off_path_value": parts[1],
            "empirical": nested.to_json(),
            "expectation": _maybe_expectation(law),
            "tv_vs_path_effect": round12(tv_distance(law.relabeled(exact_tail.columns), exact_tail)),
        }
    return _report(args, argv, mf, desc, result, started, seed=args.seed)


def run_cli(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    """Run one command; returns the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    started = time.perf_counter()
    try:
        args = _build_parser().parse_args(argv)
        cmd = args.command
        if cmd in ("diagram", "infer"):
            report = globals()[f"_cmd_{cmd}"](args, argv, started, out)
        else:
            report = globals()[f"_cmd_{cmd}"](args, argv, started)
        if report is not None:
            out.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
        print(f"pathfx {cmd}: done in {(time.perf_counter() - started) * 1000:.1f} ms", file=err)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {getattr(args, 'file', '')}:{exc}", file=err)
        return EXIT_PARSE
    except PathFxError as exc:
        loc = f"{args.file}:" if hasattr(args, "file") and hasattr(exc, "line") else ""
        print(f"error: {loc}{exc}", file=err)
        return EXIT_SEMANTIC
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
