"""
Command-line interface for H(b) computations
"""

import argparse
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd
from colorama import Fore, Style, init as colorama_init

from cache import ResultCache
from config import check_grid, get_settings, update_settings
from cyclicity import (
    Verdict,
    certify_clark,
    certify_direct,
    certify_rational,
    is_cyclic_hol_closure,
    is_cyclic_rational,
    necessary_conditions,
    noncyclicity_witness,
    thm5_conditions,
)
from dbr_clark import clark_atoms, decompose_clark, hb_norm_clark
from dbr_rational import (
    BSpec,
    decompose_rational,
    e0_contains,
    e0_points,
    fplus,
    hb_norm_equiv,
    kernel_kb,
    mate,
)
from errors import HbError, Inconclusive, ParseError, ValidationError
from funcspace import (
    Blaschke,
    CauchySum,
    ComposePower,
    FnExpr,
    H2Kernel,
    HbKernel,
    HerglotzInner,
    KIKernel,
    Poly,
    Product,
    Quotient,
    Rational,
    Scale,
    SingularInner,
    Sum,
    as_pair,
    evaluate,
)
from presets import PresetManager
from report import ReportBuilder

logger = logging.getLogger(__name__)

SCHEMA = "hb/1"
COMMANDS = ['mate', 'decompose', 'norm', 'kernel', 'e0', 'clark-atoms',
            'cyclic-check', 'certify', 'witness']

# field names allowed per expression type
GRAMMAR = {
    'poly': {'coeffs'},
    'rational': {'num', 'den', 'boundary_safe'},
    'blaschke': {'zeros', 'gamma'},
    'singular_inner': {'atoms'},
    'herglotz_inner': {'atoms'},
    'h2_kernel': {'point'},
    'hb_kernel': {'b', 'point', 'value'},
    'ki_kernel': {'inner', 'point', 'value'},
    'cauchy_sum': {'points', 'coeffs', 'power'},
    'sum': {'terms'},
    'product': {'factors'},
    'scale': {'factor', 'expr'},
    'compose_power': {'power', 'expr'},
    'quotient': {'num', 'den'},
}


def _complex(value: Any, path: str) -> complex:
    if isinstance(value, bool):
        raise ParseError(f"{path}: expected a number", {'path': path})
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ParseError(f"{path}: expected [re, im] or a real number", {'path': path})


def _complex_list(value: Any, path: str) -> List[complex]:
    if not isinstance(value, list):
        raise ParseError(f"{path}: expected a list", {'path': path})
    return [_complex(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _require(obj: Dict, key: str, path: str) -> Any:
    if key not in obj:
        raise ParseError(f"{path}: missing field '{key}'", {'path': path, 'field': key})
    return obj[key]


def _atoms(value: Any, path: str) -> Tuple[List[complex], List[float]]:
    if not isinstance(value, list):
        raise ParseError(f"{path}: expected a list of atoms", {'path': path})
    xis, masses = [], []
    for i, atom in enumerate(value):
        where = f"{path}[{i}]"
        if not isinstance(atom, dict) or set(atom) - {'xi', 'mass'}:
            raise ParseError(f"{where}: atoms are objects with 'xi' and 'mass'", {'path': where})
        xis.append(_complex(_require(atom, 'xi', where), f"{where}.xi"))
        mass = _require(atom, 'mass', where)
        if not isinstance(mass, (int, float)) or isinstance(mass, bool):
            raise ParseError(f"{where}.mass: expected a real number", {'path': f"{where}.mass"})
        masses.append(float(mass))
    return xis, masses


def _poly_part(value: Any, path: str) -> Poly:
    expr = _build(value, path)
    if not isinstance(expr, Poly):
        raise ParseError(f"{path}: expected a polynomial", {'path': path})
    return expr


def _build(obj: Any, path: str) -> FnExpr:
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object", {'path': path})
    kind = _require(obj, 'type', path)
    if kind not in GRAMMAR:
        raise ParseError(f"{path}.type: unknown expression type '{kind}'", {'path': f"{path}.type"})
    unknown = set(obj) - GRAMMAR[kind] - {'type'}
    if unknown:
        raise ParseError(f"{path}: unknown fields {sorted(unknown)} for '{kind}'",
                         {'path': path, 'fields': sorted(unknown)})

    if kind == 'poly':
        return Poly(_complex_list(_require(obj, 'coeffs', path), f"{path}.coeffs"))
    if kind == 'rational':
        return Rational(_poly_part(_require(obj, 'num', path), f"{path}.num"),
                        _poly_part(_require(obj, 'den', path), f"{path}.den"),
                        boundary_safe=bool(obj.get('boundary_safe', False)))
    if kind == 'blaschke':
        gamma = _complex(obj['gamma'], f"{path}.gamma") if 'gamma' in obj else 1.0
        return Blaschke(_complex_list(_require(obj, 'zeros', path), f"{path}.zeros"), gamma)
    if kind == 'singular_inner':
        return SingularInner(*_atoms(_require(obj, 'atoms', path), f"{path}.atoms"))
    if kind == 'herglotz_inner':
        return HerglotzInner(*_atoms(_require(obj, 'atoms', path), f"{path}.atoms"))
    if kind == 'h2_kernel':
        return H2Kernel(_complex(_require(obj, 'point', path), f"{path}.point"))
    if kind in ('hb_kernel', 'ki_kernel'):
        cls, key = (HbKernel, 'b') if kind == 'hb_kernel' else (KIKernel, 'inner')
        value = _complex(obj['value'], f"{path}.value") if 'value' in obj else None
        return cls(_build(_require(obj, key, path), f"{path}.{key}"),
                   _complex(_require(obj, 'point', path), f"{path}.point"), value)
    if kind == 'cauchy_sum':
        power = obj.get('power', 1)
        if not isinstance(power, int) or isinstance(power, bool):
            raise ParseError(f"{path}.power: expected an integer", {'path': f"{path}.power"})
        return CauchySum(_complex_list(_require(obj, 'points', path), f"{path}.points"),
                         _complex_list(_require(obj, 'coeffs', path), f"{path}.coeffs"), power)
    if kind in ('sum', 'product'):
        key = 'terms' if kind == 'sum' else 'factors'
        items = _require(obj, key, path)
        if not isinstance(items, list) or not items:
            raise ParseError(f"{path}.{key}: expected a non-empty list", {'path': f"{path}.{key}"})
        parts = [_build(item, f"{path}.{key}[{i}]") for i, item in enumerate(items)]
        return Sum(parts) if kind == 'sum' else Product(parts)
    if kind == 'scale':
        return Scale(_build(_require(obj, 'expr', path), f"{path}.expr"),
                     _complex(_require(obj, 'factor', path), f"{path}.factor"))
    if kind == 'compose_power':
        power = _require(obj, 'power', path)
        if not isinstance(power, int) or isinstance(power, bool) or power < 1:
            raise ParseError(f"{path}.power: expected a positive integer", {'path': f"{path}.power"})
        return ComposePower(_build(_require(obj, 'expr', path), f"{path}.expr"), power)
    return Quotient(_build(_require(obj, 'num', path), f"{path}.num"),
                    _build(_require(obj, 'den', path), f"{path}.den"))


def _load_json(text: Union[str, Dict], category: str) -> Any:
    if isinstance(text, dict):
        return text
    text = text.strip()
    if text.startswith('preset:'):
        preset = PresetManager().get_preset(text[len('preset:'):])
        if preset is None:
            raise ParseError(f"unknown preset '{text}'", {'path': '$'})
        return preset['spec']
    if not text.startswith(('{', '[')) and os.path.exists(text):
        with open(text, 'r') as f:
            text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"$: invalid JSON for {category} ({e.msg} at line {e.lineno} column {e.colno})",
                         {'path': '$', 'line': e.lineno, 'column': e.colno}) from e


def parse_function(text: Union[str, Dict]) -> FnExpr:
    """
    Parse a function expression from JSON text, a file path, a preset or a dict.

    Raises:
        ParseError: malformed input, with a $.path location
        ValidationError: well-formed but mathematically invalid input
    """
    return _build(_load_json(text, 'function'), '$')


def serialize(expr: FnExpr) -> str:
    return json.dumps(expr.to_dict(), sort_keys=True)


def parse_space(text: Union[str, Dict]) -> BSpec:
    """Parse a b-specification; a bare expression means a rational symbol."""
    obj = _load_json(text, 'space')
    if not isinstance(obj, dict):
        raise ParseError("$: expected an object", {'path': '$'})
    if 'type' in obj:
        return mate(_build(obj, '$'))
    kind = _require(obj, 'kind', '$')
    allowed = {'rational': {'b'}, 'half_inner': {'inner'}, 'factored': {'outer', 'blaschke', 'atoms'}}
    if kind not in allowed:
        raise ParseError(f"$.kind: unknown space kind '{kind}'", {'path': '$.kind'})
    unknown = set(obj) - allowed[kind] - {'kind'}
    if unknown:
        raise ParseError(f"$: unknown fields {sorted(unknown)} for '{kind}'", {'path': '$'})
    if kind == 'rational':
        return mate(_build(_require(obj, 'b', '$'), '$.b'))
    if kind == 'half_inner':
        return BSpec.half_inner(_build(_require(obj, 'inner', '$'), '$.inner'))
    outer = _build(_require(obj, 'outer', '$'), '$.outer')
    zeros = _complex_list(obj.get('blaschke', []), '$.blaschke')
    xis, masses = _atoms(obj.get('atoms', []), '$.atoms')
    return BSpec.factored(outer, zeros, list(zip(xis, masses)))


def parse_degrees(text: str) -> List[int]:
    """'a..b[:step]' or a comma list."""
    text = text.strip()
    try:
        if '..' in text:
            bounds, _, step = text.partition(':')
            lo, hi = (int(v) for v in bounds.split('..'))
            degrees = list(range(lo, hi + 1, int(step) if step else 1))
        else:
            degrees = [int(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise ParseError(f"--degrees: cannot read '{text}'", {'path': '--degrees'}) from e
    if not degrees or degrees[0] < 0 or any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ValidationError("degrees must be nonnegative and strictly increasing", {'degrees': text})
    return degrees


def parse_point(text: Optional[str], flag: str) -> Optional[complex]:
    if text is None:
        return None
    try:
        parts = [float(v) for v in text.split(',')]
    except ValueError as e:
        raise ParseError(f"{flag}: expected re,im", {'path': flag}) from e
    if len(parts) == 1:
        parts.append(0.0)
    if len(parts) != 2:
        raise ParseError(f"{flag}: expected re,im", {'path': flag})
    return complex(parts[0], parts[1])


@dataclass
class JobSpec:
    """One CLI invocation: command, inputs, numeric options and output."""

    command: str
    b: Optional[str] = None
    f: Optional[str] = None
    grid: Optional[int] = None
    taylor: Optional[int] = None
    clark_n: Optional[int] = None
    degrees: List[int] = field(default_factory=lambda: list(range(0, 65)))
    tol: Optional[float] = None
    point: Optional[complex] = None
    alpha: complex = 1.0
    fmt: str = 'json'
    out: Optional[str] = None
    timings: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command '{self.command}'")
        if self.grid is not None:
            check_grid(self.grid, 'grid')
        if self.taylor is not None and self.taylor < 1:
            raise ValidationError("--taylor must be positive")
        if self.clark_n is not None and self.clark_n < 1:
            raise ValidationError("--clark-n must be positive")
        if any(b <= a for a, b in zip(self.degrees, self.degrees[1:])):
            raise ValidationError("degrees must be strictly increasing")
        if self.fmt not in ('json', 'csv'):
            raise ValidationError(f"unknown format '{self.fmt}'")

    def cache_key(self) -> Dict:
        out = asdict(self)
        for key in ('point', 'alpha'):
            out[key] = as_pair(out[key]) if out[key] is not None else None
        for key in ('b', 'f'):
            if out[key] and os.path.exists(out[key]):
                with open(out[key], 'r') as fh:
                    out[key] = fh.read()
        out.pop('out')
        out['settings'] = get_settings().to_dict()
        return out


def _need(value, flag: str):
    if value is None:
        raise ValidationError(f"this command needs {flag}")
    return value


def _certificate_result(cert, job: JobSpec) -> Tuple[int, Dict]:
    code = 2 if cert.verdict is Verdict.INCONCLUSIVE else 0
    return code, cert.to_dict(job.timings)


def _cyclic_check(f: FnExpr, spec: BSpec) -> Tuple[int, Dict]:
    result: Dict[str, Any] = {}
    try:
        report = necessary_conditions(f, spec)
    except Inconclusive as e:
        return 2, {'verdict': 'inconclusive', 'reason': e.to_dict()}
    result['necessary'] = report.to_dict()
    if not report.passes:
        result['verdict'] = 'not_cyclic'
        return 0, result

    if spec.kind == 'rational':
        result['verdict'] = 'cyclic' if is_cyclic_rational(f, spec) else 'not_cyclic'
        return 0, result
    if f.analytic_on_closed_disc() and f.as_rational() is not None:
        result['verdict'] = 'cyclic' if is_cyclic_hol_closure(f, spec) else 'not_cyclic'
        return 0, result
    if spec.kind == 'half_inner':
        data = clark_atoms(spec.inner, 1.0)
        sufficient = thm5_conditions(f, data)
        result['sufficient'] = sufficient.to_dict()
        if sufficient.passes:
            result['verdict'] = 'cyclic'
            return 0, result
    result['verdict'] = 'inconclusive'
    return 2, result


def _preset_settings(job: JobSpec) -> Dict[str, Any]:
    """Settings blocks of the presets named by --b and --f, --f last."""
    manager = PresetManager()
    merged: Dict[str, Any] = {}
    for text in (job.b, job.f):
        if isinstance(text, str) and text.strip().startswith('preset:'):
            merged = manager.apply_preset(text.strip()[len('preset:'):], merged)
    return merged


def run(job: JobSpec) -> Tuple[int, Dict]:
    """
    Execute one job.

    Args:
        job: Validated job description

    Returns:
        (exit code, result dictionary); exit code 2 marks an Inconclusive result
    """
    job.validate()
    overrides = _preset_settings(job)
    if overrides:
        logger.info(f"Preset settings: {overrides}")
    if job.grid is not None:
        overrides['grid_size'] = job.grid
    if job.taylor is not None:
        overrides['taylor_degree'] = job.taylor
    if job.clark_n is not None:
        overrides['clark_n'] = job.clark_n
    if job.tol is not None:
        overrides['tail_tol'] = job.tol
        overrides['clark_tail_tol'] = job.tol
    if overrides:
        update_settings(**overrides)

    spec = parse_space(_need(job.b, '--b'))
    f = parse_function(job.f) if job.f is not None else None
    cmd = job.command

    if cmd == 'mate':
        if spec.kind != 'rational':
            raise ValidationError("mate needs a rational symbol")
        return 0, spec.to_dict()

    if cmd == 'decompose':
        f = _need(f, '--f')
        if spec.kind == 'rational':
            dec = decompose_rational(f, spec)
            dec.canonical_norm = fplus(f, spec)[1]
            return 0, dec.to_dict()
        if spec.kind == 'half_inner':
            return 0, decompose_clark(f, clark_atoms(spec.inner, 1.0)).to_dict()
        raise ValidationError("decompose needs a rational or half-inner symbol")

    if cmd == 'norm':
        f = _need(f, '--f')
        result: Dict[str, Any] = {}
        if spec.kind == 'rational':
            result['equivalent'] = hb_norm_equiv(f, spec)
        if spec.kind == 'half_inner':
            triple, exact = hb_norm_clark(decompose_clark(f, clark_atoms(spec.inner, 1.0)))
            result['triple_bar'] = triple
            result['clark_exact'] = exact
        if spec.kind != 'half_inner' or spec.inner.as_rational() is not None:
            f_plus, canonical = fplus(f, spec)
            result['canonical'] = canonical
            result['fplus'] = f_plus.to_dict()
        return 0, result

    if cmd == 'kernel':
        point = _need(job.point, '--point')
        kernel = kernel_kb(spec, point)
        return 0, {'kernel': kernel.to_dict(), 'value_at_point': as_pair(evaluate(kernel, point))
                   if abs(point) < 1 else None}

    if cmd == 'e0':
        if job.point is not None:
            return 0, e0_contains(spec, job.point).to_dict()
        return 0, {'points': [as_pair(z) for z in e0_points(spec)]}

    if cmd == 'clark-atoms':
        if spec.kind != 'half_inner':
            raise ValidationError("clark-atoms needs a half-inner symbol")
        return 0, clark_atoms(spec.inner, job.alpha).to_dict()

    if cmd == 'cyclic-check':
        return _cyclic_check(_need(f, '--f'), spec)

    if cmd == 'certify':
        f = _need(f, '--f')
        if spec.kind == 'rational':
            return _certificate_result(certify_rational(f, spec, job.degrees), job)
        if spec.kind == 'half_inner':
            return _certificate_result(certify_clark(f, clark_atoms(spec.inner, 1.0), job.degrees), job)
        return _certificate_result(certify_direct(f, spec, job.degrees), job)

    f = _need(f, '--f')
    point = _need(job.point, '--point')
    return 0, {'point': as_pair(point), 'bound': noncyclicity_witness(f, spec, point)}


def _json_default(value: Any) -> Any:
    """numpy scalars and complex numbers in result dictionaries."""
    if hasattr(value, "item"):
        return value.item()
    if isinstance(value, complex):
        return as_pair(value)
    return str(value)


def render(job: JobSpec, code: int, result: Dict) -> str:
    """Machine output: JSON document or CSV table."""
    if job.fmt == 'json':
        doc = {'schema': SCHEMA, 'command': job.command, 'exit_code': code, 'result': result}
        return json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n"
    if 'rows' in result:
        frame = ReportBuilder.convergence_table(result)
    elif job.command == 'clark-atoms':
        frame = pd.DataFrame([{'zeta_re': a['zeta'][0], 'zeta_im': a['zeta'][1], 'weight': a['weight']}
                              for a in result['atoms']])
    else:
        raise ValidationError("csv output is available for certify and clark-atoms")
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format='%.17g')
    return buffer.getvalue()


def _banner(title: str, quiet: bool):
    if quiet:
        return
    print(Style.BRIGHT + Fore.CYAN + "=" * 60, file=sys.stderr)
    print(title, file=sys.stderr)
    print("=" * 60 + Style.RESET_ALL, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Numerical de Branges-Rovnyak spaces: norms, kernels and cyclicity"
    )
    parser.add_argument("command", choices=COMMANDS, help="Computation to run")
    parser.add_argument("--b", help="b-specification: JSON, file path or preset:<name>")
    parser.add_argument("--f", help="Function expression: JSON, file path or preset:<name>")
    parser.add_argument("--grid", type=int, help="Quadrature grid size (power of two in [16, 2^20])")
    parser.add_argument("--taylor", type=int, help="Taylor truncation degree D")
    parser.add_argument("--clark-n", type=int, help="Clark truncation index N")
    parser.add_argument("--degrees", default="0..64", help="Degree list a..b[:step] or comma list (default: 0..64)")
    parser.add_argument("--tol", type=float, help="Truncation tail tolerance")
    parser.add_argument("--point", help="Point re,im for kernel, e0 and witness")
    parser.add_argument("--alpha", default="1,0", help="Clark base point re,im (default: 1,0)")
    parser.add_argument("--out", help="Output file (default: stdout)")
    parser.add_argument("--format", choices=['json', 'csv'], default='json', help="Output format")
    parser.add_argument("--cache", action="store_true", help="Reuse cached results")
    parser.add_argument("--report", action="store_true", help="Print a text report to stderr")
    parser.add_argument("--timings", action="store_true", help="Record wall-clock times in tables")
    parser.add_argument("--history", help="JSON file collecting every run; its summary goes into --report")
    parser.add_argument("--export-presets", metavar="DIR", help="Write the built-in presets as YAML into DIR")
    parser.add_argument("--quiet", action="store_true", help="No banners")
    parser.add_argument("--log-level", help="Logging level (default from HB_LOG_LEVEL)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    colorama_init()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, (args.log_level or get_settings().log_level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    try:
        job = JobSpec(
            command=args.command,
            b=args.b,
            f=args.f,
            grid=args.grid,
            taylor=args.taylor,
            clark_n=args.clark_n,
            degrees=parse_degrees(args.degrees),
            tol=args.tol,
            point=parse_point(args.point, '--point'),
            alpha=parse_point(args.alpha, '--alpha'),
            fmt=args.format,
            out=args.out,
            timings=args.timings
        )

        _banner(f"H(b): {job.command}", args.quiet)
        if args.export_presets:
            paths = PresetManager(args.export_presets).export_defaults()
            logger.info(f"Wrote {len(paths)} presets to {args.export_presets}")
        cache = ResultCache() if args.cache else None
        key = job.cache_key() if cache else None
        cached = cache.get(key) if cache else None
        if cached is not None:
            code, result = cached['exit_code'], cached['result']
            logger.info("Result taken from cache")
        else:
            code, result = run(job)
            if cache:
                plain = json.loads(json.dumps(result, default=_json_default))
                cache.set(key, {'exit_code': code, 'result': plain})

        text = render(job, code, result)
        if job.out:
            with open(job.out, 'w') as f:
                f.write(text)
        else:
            sys.stdout.write(text)

        builder = ReportBuilder()
        if args.history:
            builder.load_history(args.history)
        builder.record(job.command, json.loads(json.dumps(result, default=_json_default)))
        if args.history:
            builder.save_history(args.history)

        if args.report:
            print(builder.generate_report(job.command, result), file=sys.stderr)
            if args.history:
                summary = builder.summary()
                print(f"History: {summary['total_runs']} runs, commands {summary['commands']}, "
                      f"verdicts {summary['verdicts']}", file=sys.stderr)

        if not args.quiet:
            colour = Fore.GREEN if code == 0 else Fore.YELLOW
            print(colour + f"✓ {job.command} finished (exit {code})" + Style.RESET_ALL, file=sys.stderr)
        return code

    except KeyboardInterrupt:
        print("\n\nProcess interrupted by user.", file=sys.stderr)
        return 1
    except Inconclusive as e:
        print(json.dumps({'schema': SCHEMA, 'command': args.command, 'exit_code': 2, 'error': e.to_dict()},
                         sort_keys=True, default=_json_default), file=sys.stderr)
        return 2
    except HbError as e:
        print(Fore.RED + f"Error: {e.message}" + Style.RESET_ALL, file=sys.stderr)
        print(json.dumps({'schema': SCHEMA, 'command': args.command, 'exit_code': 1, 'error': e.to_dict()},
                         sort_keys=True, default=_json_default), file=sys.stderr)
        return 1
    except Exception as e:
        print(f"\nError: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    exit(main())
