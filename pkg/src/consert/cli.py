"""``consert`` command line.

Exit codes: 0 success, 1 diagnostics or failed expectations, 2 usage or I/O
errors.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from consert.dsl import (
    Diagnostic,
    Severity,
    SourceDocument,
    format_canonical,
    format_properties,
    has_errors,
    parse,
    validate,
)
from consert.evaluation import CompositionError, EvaluationError, evaluate_composition, explain
from consert.events import Scenario
from consert.model import Catalog, CompositionGraph, ServiceType, SystemManifest, Tri
from consert.runtime import Registry, RegistryError, ReplayError, replay

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

REGISTRY_ENV = "CONSERT_REGISTRY"

_DOTTED = r"[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*"
_BIND_RE = re.compile(rf"({_DOTTED})=({_DOTTED})")
_RTE_RE = re.compile(rf"({_DOTTED})=(true|false|unknown)")


class UsageError(Exception):
    pass


def _out(line: str = "") -> None:
    sys.stdout.write(line + "\n")


def _err(line: str) -> None:
    sys.stderr.write(f"consert: {line}\n")


def _print_diags(diags) -> None:
    for d in diags:
        _out(str(d))


def _read(path: str) -> SourceDocument:
    try:
        return SourceDocument.from_path(path)
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {getattr(exc, 'strerror', None) or exc}") from None


def merge_catalogs(catalogs: Sequence[tuple[str, Catalog]]) -> tuple[Optional[Catalog], list[Diagnostic]]:
    if not catalogs:
        return None, []
    if len(catalogs) == 1:
        return catalogs[0][1], []
    seen: dict[str, ServiceType] = {}
    diags = []
    for path, cat in catalogs:
        for st in cat.service_types:
            if st.name in seen and seen[st.name] != st:
                loc = st.loc
                diags.append(
                    Diagnostic(
                        path, loc.line if loc else 1, loc.col if loc else 1, Severity.ERROR,
                        "CATALOG_CONFLICT", f"service type {st.name!r} is defined differently in another catalog",
                    )
                )
            seen.setdefault(st.name, st)
    name = "+".join(c.name for _, c in catalogs)
    return Catalog(name, tuple(seen.values())), diags


# --- validate / fmt ------------------------------------------------------

def cmd_validate(args) -> int:
    docs = [_read(p) for p in args.paths]
    diags: list[Diagnostic] = []
    parsed = []
    for doc in docs:
        res = parse(doc)
        diags += res.diagnostics
        if res.ok:
            parsed.append((doc.path, res.model))
    cat, cdiags = merge_catalogs([(p, m) for p, m in parsed if isinstance(m, Catalog)])
    diags += cdiags
    for path, model in parsed:
        if isinstance(model, Scenario):
            diags += validate(model, path=path, base_dir=Path(path).parent)
        else:
            diags += validate(model, cat, path=path)
    order = {d.path: i for i, d in enumerate(docs)}
    diags.sort(key=lambda d: (order.get(d.path, len(order)), d.line, d.col, d.code))
    _print_diags(diags)
    return EXIT_FAIL if has_errors(diags) else EXIT_OK


def cmd_fmt(args) -> int:
    status = EXIT_OK
    for p in args.paths:
        doc = _read(p)
        res = parse(doc)
        if not res.ok:
            _print_diags(res.diagnostics)
            status = EXIT_FAIL
            continue
        text = format_canonical(res.model)
        if args.check:
            if text != doc.text:
                _out(f"{p}: not in canonical form")
                status = EXIT_FAIL
        elif args.write:
            if text != doc.text:
                Path(p).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return status


# --- eval / explain ------------------------------------------------------

def _split(dotted: str) -> tuple[str, str]:
    a, b = dotted.split(".", 1)
    return a, b


def _load_composition(args):
    """Parse, validate and bind the documents named on the command line."""
    cat_doc = _read(args.catalog)
    res = parse(cat_doc)
    if not res.ok:
        _print_diags(res.diagnostics)
        return None
    if not isinstance(res.model, Catalog):
        _print_diags([Diagnostic(cat_doc.path, 1, 1, Severity.ERROR, "WRONG_KIND", "expected a catalog")])
        return None
    catalog = res.model
    manifests: dict[str, SystemManifest] = {}
    diags: list[Diagnostic] = []
    for p in args.manifests:
        doc = _read(p)
        r = parse(doc)
        if not r.ok:
            diags += r.diagnostics
            continue
        if not isinstance(r.model, SystemManifest):
            diags.append(Diagnostic(doc.path, 1, 1, Severity.ERROR, "WRONG_KIND", "expected a system manifest"))
            continue
        if r.model.system_id in manifests:
            diags.append(
                Diagnostic(doc.path, 1, 1, Severity.ERROR, "DUPLICATE_SYSTEM", f"system {r.model.system_id!r} given twice")
            )
            continue
        diags += [d for d in validate(r.model, catalog, path=doc.path) if d.is_error]
        manifests[r.model.system_id] = r.model
    if diags:
        _print_diags(diags)
        return None

    bindings = {}
    for b in args.bind:
        m = _BIND_RE.fullmatch(b)
        if not m:
            raise UsageError(f"--bind expects consumer.slot=provider.service, got {b!r}")
        key = _split(m.group(1))
        if key in bindings and bindings[key] != _split(m.group(2)):
            raise UsageError(f"slot {m.group(1)} bound twice")
        bindings[key] = _split(m.group(2))
    default = Tri(args.rte_default)
    rtes = {(sid, r.label): default for sid, mf in manifests.items() for r in mf.rtes}
    given: dict[tuple[str, str], Tri] = {}
    for r in args.rte:
        m = _RTE_RE.fullmatch(r)
        if not m:
            raise UsageError(f"--rte expects system.label=true|false|unknown, got {r!r}")
        key, val = _split(m.group(1)), Tri(m.group(2))
        if key in given and given[key] != val:
            raise UsageError(f"contradictory values for --rte {m.group(1)}")
        given[key] = val
    rtes.update(given)
    if args.root and not re.fullmatch(_DOTTED, args.root):
        raise UsageError(f"--root expects system.service, got {args.root!r}")
    root = _split(args.root) if args.root else None
    graph = CompositionGraph(manifests, bindings, root)
    try:
        result = evaluate_composition(graph, catalog, rtes)
    except CompositionError as exc:
        _err(str(exc))
        return None
    except EvaluationError as exc:
        _err(f"evaluation failed: {exc}")
        return None
    return graph, result


def cmd_eval(args) -> int:
    loaded = _load_composition(args)
    if loaded is None:
        return EXIT_FAIL
    graph, result = loaded
    for key, r in result.services.items():
        tag = " (root)" if key == graph.root else ""
        head = f"{key[0]}.{key[1]}{tag}"
        if r.achieved is None:
            _out(f"{head}: none ({r.trace.reason})")
        else:
            _out(f"{head}: order {r.achieved.order} {r.achieved.label}: {format_properties(r.expanded)}")
    if args.explain:
        targets = [graph.root] if graph.root else list(result.services)
        for key in targets:
            _out()
            for line in explain(result, key, graph).render():
                _out(line)
    return EXIT_OK


def cmd_explain(args) -> int:
    loaded = _load_composition(args)
    if loaded is None:
        return EXIT_FAIL
    graph, result = loaded
    target = args.service or args.root
    if not target:
        raise UsageError("explain needs --service or --root")
    key = _split(target)
    if key not in result:
        _err(f"no service {target} in the composition")
        return EXIT_FAIL
    for line in explain(result, key, graph).render():
        _out(line)
    return EXIT_OK


# --- simulate / registry -------------------------------------------------

def _registry_dir(args, required: bool) -> Optional[str]:
    d = args.registry or os.environ.get(REGISTRY_ENV)
    if required and not d:
        raise UsageError(f"no registry: pass --registry or set {REGISTRY_ENV}")
    return d


def cmd_simulate(args) -> int:
    doc = _read(args.scenario)
    res = parse(doc)
    if not res.ok:
        _print_diags(res.diagnostics)
        return EXIT_FAIL
    if not isinstance(res.model, Scenario):
        _print_diags([Diagnostic(doc.path, 1, 1, Severity.ERROR, "WRONG_KIND", "expected a scenario")])
        return EXIT_FAIL
    reg_dir = _registry_dir(args, required=False)
    with tempfile.TemporaryDirectory(prefix="consert-reg-") as tmp:
        registry = Registry(reg_dir or tmp)
        try:
            transcript = replay(res.model, registry, Path(doc.path).parent)
        except ReplayError as exc:
            _print_diags(exc.diagnostics)
            raise UsageError(str(exc)) from None
    sys.stdout.write(transcript.text())
    return EXIT_FAIL if transcript.failures else EXIT_OK


def cmd_registry_publish(args) -> int:
    registry = Registry(_registry_dir(args, required=True))
    cat_doc = _read(args.catalog)
    res = parse(cat_doc)
    if not res.ok or not isinstance(res.model, Catalog):
        _print_diags(res.diagnostics or [Diagnostic(cat_doc.path, 1, 1, Severity.ERROR, "WRONG_KIND", "expected a catalog")])
        return EXIT_FAIL
    status = EXIT_OK
    for p in args.manifests:
        doc = _read(p)
        r = parse(doc)
        if not r.ok or not isinstance(r.model, SystemManifest):
            _print_diags(r.diagnostics or [Diagnostic(doc.path, 1, 1, Severity.ERROR, "WRONG_KIND", "expected a system manifest")])
            status = EXIT_FAIL
            continue
        try:
            digest = registry.publish(r.model, res.model)
        except RegistryError as exc:
            _print_diags([Diagnostic(doc.path, d.line, d.col, d.severity, d.code, d.message) for d in exc.diagnostics])
            _out(f"{doc.path}: {exc}")
            status = EXIT_FAIL
            continue
        _out(f"{r.model.system_id}\t{digest}")
    return status


def cmd_registry_list(args) -> int:
    registry = Registry(_registry_dir(args, required=True))
    for e in registry.entries():
        _out(f"{e.system_id}\t{e.digest}\t{e.filename}")
    return EXIT_OK


def cmd_registry_show(args) -> int:
    registry = Registry(_registry_dir(args, required=True))
    try:
        sys.stdout.write(registry.lookup(args.system_id))
    except RegistryError as exc:
        _err(str(exc))
        return EXIT_FAIL
    return EXIT_OK


# --- argument parsing ----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _composition_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("catalog", help="catalog file (.consert-catalog)")
    p.add_argument("manifests", nargs="+", help="system manifests (.consert)")
    p.add_argument("--bind", action="append", default=[], metavar="CONSUMER.SLOT=PROVIDER.SERVICE")
    p.add_argument("--rte", action="append", default=[], metavar="SYSTEM.LABEL=VALUE")
    p.add_argument(
        "--rte-default", choices=[t.value for t in Tri], default="unknown",
        help="value of runtime evidences not given with --rte (default: unknown)",
    )
    p.add_argument("--root", metavar="SYSTEM.SERVICE", help="the application service")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="consert", description="Conditional safety certificate tooling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="parse and cross-check documents")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fmt", help="print documents in canonical form")
    p.add_argument("paths", nargs="+")
    g = p.add_mutually_exclusive_group()
    g.add_argument("-w", "--write", action="store_true", help="rewrite files in place")
    g.add_argument("--check", action="store_true", help="exit 1 if any file is not canonical")
    p.set_defaults(func=cmd_fmt)

    p = sub.add_parser("eval", help="evaluate a composition once")
    _composition_args(p)
    p.add_argument("--explain", action="store_true", help="also print the substantiation tree")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="print the substantiation tree of one service")
    _composition_args(p)
    p.add_argument("--service", metavar="SYSTEM.SERVICE")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("simulate", help="replay a scenario")
    p.add_argument("scenario")
    p.add_argument("--registry", help=f"registry directory (default: ${REGISTRY_ENV} or a temporary one)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("registry", help="manage a manifest registry")
    rsub = p.add_subparsers(dest="registry_command", required=True, parser_class=_Parser)
    rp = rsub.add_parser("publish")
    rp.add_argument("catalog")
    rp.add_argument("manifests", nargs="+")
    rp.set_defaults(func=cmd_registry_publish)
    rp = rsub.add_parser("list")
    rp.set_defaults(func=cmd_registry_list)
    rp = rsub.add_parser("show")
    rp.add_argument("system_id")
    rp.set_defaults(func=cmd_registry_show)
    for rp in (rsub.choices["publish"], rsub.choices["list"], rsub.choices["show"]):
        rp.add_argument("--registry", help=f"registry directory (default: ${REGISTRY_ENV})")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
