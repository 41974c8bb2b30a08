"""Command-line entry point.

Commands: ``check`` (type-check source files), ``run``/``trace`` (evaluate an
entry definition, optionally printing every step), ``repl`` (interactive
loop) and ``props`` (run the metatheory property harness against a mode
spec).  Exit codes are a stable contract: 0 ok, 1 typing error, 2 parse or
elaboration error, 3 configuration/IO error, 4 fuel exhausted, 5 property
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import modes
from .evaluator import Outcome, evaluate, step
from .frontend import ElabError, ParseError, elaborate, elaborate_term, parse
from .modes import ModeSpec, SpecError
from .pretty import pp_term, pp_type
from .propgen import run_properties
from .subst import SubstError
from .typecheck import Signature, TypingError, synth_term, _peek_mode

EXIT_OK = 0
EXIT_TYPE = 1
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_FUEL = 4
EXIT_PROPERTY = 5


@dataclass
class Diagnostic:
    code: str
    message: str
    file: str = ""
    line: int = 0
    col: int = 0

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(
                {
                    "code": self.code,
                    "message": self.message,
                    "file": self.file,
                    "line": self.line,
                    "col": self.col,
                }
            )
        where = self.file or "<input>"
        pos = f":{self.line}:{self.col}" if self.line else ""
        return f"{where}{pos}: {self.code}: {self.message}"


def _diag_of(err: Exception, file: str = "") -> Diagnostic:
    if isinstance(err, ParseError):
        return Diagnostic("PARSE", err.message, file, err.line, err.col)
    if isinstance(err, ElabError):
        return Diagnostic("ELAB", err.message, file, err.line, err.col)
    if isinstance(err, TypingError):
        return Diagnostic(err.code, err.message, file)
    if isinstance(err, SubstError):
        return Diagnostic("SUBST", str(err), file)
    return Diagnostic("CONFIG", str(err), file)


def _exit_for(err: Exception) -> int:
    if isinstance(err, (ParseError, ElabError)):
        return EXIT_PARSE
    if isinstance(err, (TypingError, SubstError)):
        return EXIT_TYPE
    return EXIT_CONFIG


def _prelude() -> str:
    return (
        resources.files("elevator").joinpath("corpus/prelude.elv").read_text("utf-8")
    )


def _spec_from_path(path: str, base: Path | None) -> ModeSpec:
    """Resolve a mode-spec path against the source directory, falling back
    to the files packaged with the corpus."""
    cand = Path(path)
    if not cand.is_absolute() and base is not None and (base / cand).exists():
        return modes.load(str(base / cand))
    if cand.exists():
        return modes.load(str(cand))
    packaged = resources.files("elevator").joinpath(f"corpus/{path}")
    if packaged.is_file():
        return modes.from_dict(json.loads(packaged.read_text("utf-8")))
    raise FileNotFoundError(f"mode-spec file not found: {path}")


def _resolve_spec(args, module=None, base: Path | None = None) -> ModeSpec:
    """--modes flag, then the file's own pragma, then ELEVATOR_MODES, then
    the default two-mode spec."""
    if args.modes:
        return _spec_from_path(args.modes, Path.cwd())
    if module is not None and module.modes_path:
        return _spec_from_path(module.modes_path, base)
    env = os.environ.get("ELEVATOR_MODES")
    if env:
        return _spec_from_path(env, Path.cwd())
    return modes.two_mode_spec()


def _load_file(path: str, args, out) -> tuple[Signature, ModeSpec]:
    source = Path(path).read_text("utf-8")
    module = parse(_prelude() + "\n" + source)
    spec = _resolve_spec(args, module, Path(path).resolve().parent)
    return elaborate(module, spec), spec


def cmd_check(args, out=None) -> int:
    out = out or sys.stdout
    fmt = args.format
    for path in args.files:
        try:
            sig, _spec = _load_file(path, args, out)
        except (ParseError, ElabError, TypingError, SubstError) as err:
            print(_diag_of(err, path).render(fmt), file=out)
            return _exit_for(err)
        except (OSError, SpecError) as err:
            print(_diag_of(err, path).render(fmt), file=out)
            return EXIT_CONFIG
        if fmt == "text":
            for entry in sig.defs:
                print(f"{path}: {entry.name} OK", file=out)
    return EXIT_OK


def _eval_entry(args, out, trace: bool) -> int:
    out = out or sys.stdout
    fmt = args.format
    path = args.files[0]
    try:
        sig, spec = _load_file(path, args, out)
    except (ParseError, ElabError, TypingError, SubstError) as err:
        print(_diag_of(err, path).render(fmt), file=out)
        return _exit_for(err)
    except (OSError, SpecError) as err:
        print(_diag_of(err, path).render(fmt), file=out)
        return EXIT_CONFIG
    entry = sig.def_(args.entry)
    if entry is None:
        print(
            Diagnostic("CONFIG", f"no definition named {args.entry!r}", path).render(fmt),
            file=out,
        )
        return EXIT_CONFIG
    result = evaluate(entry.body, args.fuel, spec, sig, trace=trace)
    if trace:
        for rule, term in result.trace:
            print(f"{rule}: {pp_term(term)}", file=out)
    if result.outcome is Outcome.FUEL_EXHAUSTED:
        print(
            Diagnostic("FUEL", f"fuel exhausted after {result.steps} steps", path)
            .render(fmt),
            file=out,
        )
        return EXIT_FUEL
    if result.outcome is Outcome.STUCK:
        print(
            Diagnostic("STUCK", f"stuck term: {pp_term(result.term)}", path).render(fmt),
            file=out,
        )
        return EXIT_TYPE
    if fmt == "json":
        print(
            json.dumps({"value": pp_term(result.term), "steps": result.steps}),
            file=out,
        )
    else:
        print(pp_term(result.term), file=out)
        print(f"steps: {result.steps}", file=out)
    return EXIT_OK


def cmd_run(args, out=None) -> int:
    return _eval_entry(args, out, trace=False)


def cmd_trace(args, out=None) -> int:
    return _eval_entry(args, out, trace=True)


def cmd_props(args, out=None) -> int:
    out = out or sys.stdout
    try:
        spec = _resolve_spec(args)
    except (OSError, SpecError) as err:
        print(_diag_of(err).render(args.format), file=out)
        return EXIT_CONFIG
    results = run_properties(spec, seed=args.seed, count=args.count)
    failed = False
    for r in results:
        if args.format == "json":
            print(
                json.dumps(
                    {"property": r.name, "cases": r.cases, "failures": r.failures}
                ),
                file=out,
            )
        else:
            status = "OK" if r.ok else "FAIL"
            print(f"{r.name}: {r.cases} cases {status}", file=out)
            for f in r.failures[:5]:
                print(f"  counterexample: {f}", file=out)
        failed = failed or not r.ok
    return EXIT_PROPERTY if failed else EXIT_OK


def _synth_closed(source: str, spec: ModeSpec, sig: Signature):
    term = elaborate_term(source, spec, sig)
    jmode = _peek_mode((), sig, term) or None
    if jmode is not None:
        ty, elab, _ = synth_term((), frozenset(), jmode, term, spec, sig)
        return ty, elab
    # No syntactic mode hint: try each mode of the spec in turn.
    last: TypingError | None = None
    for m in sorted(spec.modes):
        try:
            ty, elab, _ = synth_term((), frozenset(), m, term, spec, sig)
            return ty, elab
        except TypingError as err:
            last = err
    raise last or TypingError(
        "ANNOTATION_NEEDED",
        "cannot infer the judgment mode; add a type annotation `(e : A)`",
    )


def repl(args, inp=None, out=None) -> int:
    inp = inp or sys.stdin
    out = out or sys.stdout
    try:
        spec = _resolve_spec(args)
    except (OSError, SpecError) as err:
        print(_diag_of(err).render(args.format), file=out)
        return EXIT_CONFIG
    sig = elaborate(parse(_prelude()), spec)
    print("elevator repl — :t e, :step e, :q", file=out)
    for line in inp:
        line = line.strip()
        if not line:
            continue
        if line == ":q":
            return EXIT_OK
        try:
            if line.startswith(":t "):
                ty, _ = _synth_closed(line[3:], spec, sig)
                print(pp_type(ty), file=out)
            elif line.startswith(":step "):
                _, elab = _synth_closed(line[6:], spec, sig)
                r = step(elab, spec, sig)
                if r is None:
                    print("already normal", file=out)
                else:
                    print(f"{r.rule}: {pp_term(r.term)}", file=out)
            elif line.split(None, 1)[0] in ("def", "data"):
                module = parse(line)
                sig = _extend_signature(sig, line, spec)
                for d in module.datas:
                    print(f"{d.name} OK", file=out)
                for entry in module.defs:
                    print(f"{entry.name} OK", file=out)
            else:
                ty, elab = _synth_closed(line, spec, sig)
                result = evaluate(elab, args.fuel, spec, sig)
                if result.outcome is Outcome.FUEL_EXHAUSTED:
                    print(f"fuel exhausted after {result.steps} steps", file=out)
                else:
                    print(f"{pp_term(result.term)} : {pp_type(ty)}", file=out)
        except (ParseError, ElabError, TypingError, SubstError, SpecError) as err:
            print(_diag_of(err).render(args.format), file=out)
    return EXIT_OK


def _extend_signature(sig: Signature, source: str, spec: ModeSpec) -> Signature:
    """Elaborate new items against the accumulated signature."""
    from .frontend import _elab_data, _elab_term, _elab_type, _env_of
    from .syntax import One
    from .typecheck import DefEntry, check_signature

    module = parse(source)
    env = _env_of(sig, spec)
    datas = list(sig.datas)
    defs = list(sig.defs)
    for d in module.datas:
        decl = _elab_data(env, d)
        env.datas[d.name] = decl
        for c in decl.ctors:
            env.ctor_owner[c.name] = d.name
        datas.append(decl)
    for sdef in module.defs:
        ty = _elab_type(env, sdef.type)
        env.defs[sdef.name] = DefEntry(sdef.name, ty, One(""))
        body = _elab_term(env, sdef.body)
        entry = DefEntry(sdef.name, ty, body)
        env.defs[sdef.name] = entry
        defs.append(entry)
    return check_signature(Signature(tuple(datas), tuple(defs)), spec)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elevator", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, files="*"):
        sp.add_argument("--modes", help="mode-spec JSON file")
        sp.add_argument("--entry", default="main", help="entry definition name")
        sp.add_argument("--fuel", type=int, default=100_000)
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--count", type=int, default=500)
        if files:
            sp.add_argument("files", nargs=files)
        return sp

    common(sub.add_parser("check", help="type-check source files"), "+")
    common(sub.add_parser("run", help="evaluate an entry definition"), 1)
    common(sub.add_parser("trace", help="evaluate, printing each step"), 1)
    common(sub.add_parser("repl", help="interactive loop"), None)
    common(sub.add_parser("props", help="run the metatheory property harness"), None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "fuel", 1) <= 0:
        print("fuel must be positive", file=sys.stderr)
        return EXIT_CONFIG
    dispatch = {
        "check": cmd_check,
        "run": cmd_run,
        "trace": cmd_trace,
        "repl": repl,
        "props": cmd_props,
    }
    return dispatch[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
