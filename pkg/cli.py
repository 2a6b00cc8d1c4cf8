"""
Command-line entry point: check, translate, encode, oracle

Exit codes: 0 holds, 1 fails, 3 unknown, 2 on any error.
"""
import argparse
import logging
import random
import sys
from typing import List, Optional

import config
from checker import (ENGINES, KNOWLEDGE_MODES, CheckOptions, Outcome, Verdict, check,
                     check_bounded)
from errors import HyperscopeError
from formula import (FALSE, Formula, make_specification, parse_formula, parse_specification,
                     print_formula)
from kripke import enumerate_lassos, format_kripke, parse_kripke
from qptl import hyperctl_mc_to_qptl, parse_qptl, print_qptl, qptl_sat_to_hyperctl_mc, qptl_to_hyperctl
from report import from_verdict, render_human, to_json
import secprops

logger = logging.getLogger(__name__)

EXIT_CODES = {Outcome.HOLDS: 0, Outcome.FAILS: 1, Outcome.UNKNOWN: 3}
EXIT_ERROR = 2

PROPERTIES = ('noninterference', 'observational-determinism', 'qif', 'hamming-min-dist',
              'gm-ni', 'secltl-hide')


def _read(path: str) -> str:
    try:
        with open(path, encoding='utf-8') as handle:
            return handle.read()
    except OSError as e:
        raise HyperscopeError(f"cannot read {path}: {e.strerror}") from e


def _write(path: Optional[str], text: str):
    if path is None or path == '-':
        sys.stdout.write(text)
        return
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(text)
    except OSError as e:
        raise HyperscopeError(f"cannot write {path}: {e.strerror}") from e


def _bound(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {raw!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("bounds must be at least 1")
    return value


def _names(raw: Optional[str]) -> List[str]:
    return [n for n in (raw or '').replace(',', ' ').split() if n]


def _specification(args):
    if args.spec:
        return parse_specification(_read(args.spec))
    if args.formula:
        return make_specification(parse_formula(args.formula))
    raise HyperscopeError("give --spec FILE or --formula TEXT")


def _options(args) -> CheckOptions:
    engine = 'bounded' if args.engine == 'semantic' else args.engine
    return CheckOptions(
        engine=engine,
        stem_bound=args.stem_bound,
        loop_bound=args.loop_bound,
        assume_complete=args.assume_complete,
        knowledge_mode=args.knowledge_mode,
        state_cap=args.state_cap if args.state_cap is not None else config.state_cap(),
        jobs=args.jobs,
    )


def _emit(verdict: Verdict, args) -> int:
    report = from_verdict(verdict)
    if args.format == 'json':
        print(to_json(report))
    else:
        print(render_human(report))
    if getattr(args, 'pdf', None):
        from pdf_generator import generate_report_pdf
        generate_report_pdf(report, output_path=args.pdf, title=getattr(args, 'kripke', None))
        logger.info("PDF report written to %s", args.pdf)
    return EXIT_CODES[verdict.outcome]


# ==========================================
# SUBCOMMANDS
# ==========================================

def cmd_check(args) -> int:
    k = parse_kripke(_read(args.kripke))
    spec = _specification(args)
    verdict = check(k, spec, _options(args))
    return _emit(verdict, args)


def cmd_translate(args) -> int:
    if args.mode == 'to-qptl':
        if not args.kripke:
            raise HyperscopeError("to-qptl needs --kripke")
        k = parse_kripke(_read(args.kripke))
        spec = _specification(args)
        if len(spec.leaves) != 1 or spec.leaves[0] is not spec.tree:
            raise HyperscopeError("to-qptl translates a single quantified formula")
        psi = hyperctl_mc_to_qptl(k, spec.tree, encode_until=not args.no_until_encoding)
        _write(args.out, print_qptl(psi) + '\n')
        return 0
    if not args.qptl:
        raise HyperscopeError(f"{args.mode} needs --qptl")
    psi = parse_qptl(args.qptl)
    if args.mode == 'from-qptl-mc':
        k, f = qptl_sat_to_hyperctl_mc(psi)
        _write(args.out, format_kripke(k) + print_formula(f) + '\n')
    else:
        _write(args.out, print_formula(qptl_to_hyperctl(psi)) + '\n')
    return 0


def _property(args, model, kind: str) -> Formula:
    name = args.emit_property
    if name == 'noninterference':
        return secprops.noninterference_basic(_names(args.inputs), _names(args.outputs))
    if name == 'observational-determinism':
        return secprops.observational_determinism(_names(args.inputs), _names(args.outputs))
    if name == 'qif':
        return secprops.qif_min_entropy_bound(_names(args.inputs), _names(args.outputs), args.n)
    if name == 'hamming-min-dist':
        return secprops.min_distance_spec(_names(args.inputs), _names(args.codeword), args.d)
    if name == 'gm-ni':
        if kind != 'gm':
            raise HyperscopeError("gm-ni needs --model gm")
        return secprops.gm_noninterference(model, _names(args.high), _names(args.low))
    if name == 'secltl-hide':
        if kind != 'secltl':
            raise HyperscopeError("secltl-hide needs --model secltl")
        return secprops.secltl_property(model.high, model.outputs, model.inputs, release=FALSE)
    raise HyperscopeError(f"unknown property {name!r}")


def cmd_encode(args) -> int:
    text = _read(args.input)
    if args.model == 'gm':
        model = secprops.parse_gm(text)
        k = secprops.encode_gm(model)
    elif args.model == 'secltl':
        model = secprops.parse_secltl(text)
        k = secprops.encode_secltl(model)
    else:
        model = secprops.parse_interpreted(text)
        k = secprops.encode_interpreted(model, stuttering=args.stutter, clock=args.clock)
    _write(args.out, format_kripke(k))
    if args.emit_property:
        f = _property(args, model, args.model)
        _write(args.property_out, print_formula(f) + '\n')
    return 0


def cmd_oracle(args) -> int:
    """Enumerate bounded lassos, or evaluate a formula directly over them"""
    k = parse_kripke(_read(args.kripke))
    stem = args.stem_bound if args.stem_bound is not None else config.stem_bound()
    loop = args.loop_bound if args.loop_bound is not None else config.loop_bound()
    if args.spec or args.formula:
        spec = _specification(args)
        verdict = check_bounded(k, spec.tree, stem_bound=stem, loop_bound=loop,
                                options=CheckOptions(engine='bounded', assume_complete=args.assume_complete,
                                                     knowledge_mode=args.knowledge_mode))
        return _emit(verdict, args)
    lassos = list(enumerate_lassos(k, k.init, _names(args.free), stem, loop, distinct=True))
    if args.sample is not None and args.sample < len(lassos):
        rng = random.Random(args.seed)
        lassos = sorted(rng.sample(lassos, args.sample), key=lassos.index)
    for lasso in lassos:
        print(str(lasso).strip())
    logger.info("%d lassos at bounds (%d, %d)", len(lassos), stem, loop)
    return 0


# ==========================================
# ARGUMENTS
# ==========================================

def _add_check_flags(p, with_pdf: bool = True):
    p.add_argument('--kripke', required=True, help='Kripke structure file')
    p.add_argument('--spec', help='specification file')
    p.add_argument('--formula', help='specification given inline')
    p.add_argument('--stem-bound', type=_bound, default=None)
    p.add_argument('--loop-bound', type=_bound, default=None)
    p.add_argument('--assume-complete', action='store_true',
                   help='treat the bounded path domain as complete')
    p.add_argument('--knowledge-mode', choices=KNOWLEDGE_MODES, default='async')
    p.add_argument('--format', choices=('human', 'json'), default='human')
    if with_pdf:
        p.add_argument('--pdf', help='also write the report as a PDF file')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hyperscope', description='explicit-state HyperCTL model checker')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING (default from HYPERSCOPE_LOG_LEVEL)')
    parser.add_argument('--seed', type=int, default=0, help='seed for randomized utilities')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('check', help='check a specification on a Kripke structure')
    _add_check_flags(p)
    p.add_argument('--engine', choices=ENGINES + ('semantic',), default='auto')
    p.add_argument('--jobs', type=int, default=1)
    p.add_argument('--state-cap', type=int, default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser('translate', help='translate between HyperCTL and QPTL')
    p.add_argument('--mode', choices=('to-qptl', 'from-qptl-mc', 'qptl-embed'), required=True)
    p.add_argument('--kripke')
    p.add_argument('--spec')
    p.add_argument('--formula')
    p.add_argument('--qptl', help='QPTL formula')
    p.add_argument('--no-until-encoding', action='store_true')
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser('encode', help='encode a system model as a Kripke structure')
    p.add_argument('--model', choices=('gm', 'secltl', 'epistemic'), required=True)
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--out', default=None)
    p.add_argument('--stutter', action='store_true')
    p.add_argument('--clock', type=int, default=None, help='pair states with a step counter up to N')
    p.add_argument('--emit-property', choices=PROPERTIES)
    p.add_argument('--property-out', default=None)
    p.add_argument('--high')
    p.add_argument('--low')
    p.add_argument('--inputs')
    p.add_argument('--outputs')
    p.add_argument('--codeword')
    p.add_argument('--n', type=int, default=1)
    p.add_argument('--d', type=int, default=1)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser('oracle', help='enumerate bounded lassos or evaluate directly over them')
    p.add_argument('--kripke', required=True)
    p.add_argument('--spec')
    p.add_argument('--formula')
    p.add_argument('--free', help='free propositions for lasso enumeration')
    p.add_argument('--stem-bound', type=_bound, default=None)
    p.add_argument('--loop-bound', type=_bound, default=None)
    p.add_argument('--sample', type=int, default=None)
    p.add_argument('--assume-complete', action='store_true')
    p.add_argument('--knowledge-mode', choices=KNOWLEDGE_MODES, default='async')
    p.add_argument('--format', choices=('human', 'json'), default='human')
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        level = (args.log_level or config.log_level()).upper()
        logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                            format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)
        return args.func(args)
    except HyperscopeError as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
