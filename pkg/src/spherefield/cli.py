"""Command-line front end.

Subcommands: ``validate``, ``kernel``, ``sample``, ``equiv``, ``mc-check``,
``schoenberg-export``.  Machine-readable JSON goes to stdout (or ``--out``);
human-readable summaries go to stderr.  Model configs are JSON or TOML,
auto-detected by extension; formats and schemas are documented under docs/.

Exit codes: 0 success / equivalent, 1 usage or malformed config, 2 invalid
model or unsupported operation (also closed-form vs numeric verdict
disagreement, which indicates an undersized truncation or a bug), 3 negative
verdict or failed check, 4 inconclusive numeric verdict.

The default output directory for ``sample`` is taken from the
``SPHEREFIELD_OUTDIR`` environment variable when ``--out`` is omitted.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import _toml
from .equivalence import (
    EQUIVALENT,
    INCONCLUSIVE,
    ORTHOGONAL,
    VerdictPolicy,
    classify_legendre_matern,
    classify_multiquadratic,
    classify_numeric,
    functional_series,
    report_to_dict,
    write_series_csv,
)
from .models import (
    LegendreMaternParams,
    MultiquadraticParams,
    build_sequence,
    multiquadratic_kernel_closed_form,
    multiquadratic_validity,
    params_from_dict,
)
from .schoenberg import IsotropicKernel, sequence_to_dict, validate_sequence
from .simulate import (
    SampleGrid,
    monte_carlo_kernel_check,
    synthesize_field,
    write_field_csv,
    write_field_json,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_FAIL = 3
EXIT_INCONCLUSIVE = 4

OUTDIR_ENV = "SPHEREFIELD_OUTDIR"


class UsageError(Exception):
    pass


class InvalidModelError(Exception):
    pass


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit_json(obj, out_path=None) -> None:
    text = json.dumps(obj, indent=1)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    try:
        if path.endswith(".toml"):
            return _toml.load(path)
        with open(path) as fh:
            return json.load(fh)
    except _toml.TomlError as exc:
        raise UsageError(f"malformed TOML in {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(
            f"malformed JSON in {path}: line {exc.lineno}: {exc.msg}") from exc


def _load_params(path: str):
    obj = _load_config(path)
    try:
        return params_from_dict(obj)
    except KeyError as exc:
        raise UsageError(f"{path}: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise InvalidModelError(f"{path}: {exc}") from exc


def _build_sequence(params, l_max):
    try:
        return build_sequence(params, l_max=l_max)
    except ValueError as exc:
        raise InvalidModelError(str(exc)) from exc


def _parse_thetas(arg: str) -> list:
    if arg is None or not arg.strip():
        raise UsageError("empty theta list")
    try:
        thetas = [float(x) for x in arg.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse theta list: {exc}") from exc
    if not thetas:
        raise UsageError("empty theta list")
    if any(t < 0.0 or t > math.pi + 1e-9 for t in thetas):
        raise UsageError("thetas must lie in [0, pi]")
    return thetas


def _model_hash(params) -> str:
    canonical = json.dumps(params.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _entry_labels(seq) -> list:
    if seq.variant == "matrix":
        p = seq.dim
        return [f"R[{i}][{j}]" for i in range(p) for j in range(p)]
    if seq.variant == "fourier_diagonal":
        return [f"gamma[{k}]" for k in range(seq.dim)]
    return ["R"]


def _axis_pairs(d: int, thetas) -> np.ndarray:
    """Point pairs at given geodesic angles: a fixed pole against its rotation."""
    pairs = []
    for t in thetas:
        if d == 1:
            x = np.array([1.0, 0.0])
            y = np.array([math.cos(t), math.sin(t)])
        else:
            x = np.array([0.0, 0.0, 1.0])
            y = np.array([math.sin(t), 0.0, math.cos(t)])
        pairs.append((x, y))
    return np.array(pairs)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    params = _load_params(args.config)
    if isinstance(params, MultiquadraticParams):
        check = multiquadratic_validity(params)
        if not check.valid:
            _emit_json({"valid": False, "violated_condition": check.failing_condition,
                        "margin": check.margin}, args.out)
            _info(f"invalid model: {check.failing_condition}")
            return EXIT_INVALID
    seq = _build_sequence(params, args.l_max)
    report = validate_sequence(seq)
    obj = report.to_dict()
    if isinstance(params, MultiquadraticParams):
        obj["margin"] = multiquadratic_validity(params).margin
    _emit_json(obj, args.out)
    if not report.passed:
        _info("sequence validation failed: " + "; ".join(report.flags))
        return EXIT_INVALID
    _info(f"valid {seq.variant} sequence on S^{seq.d}, L_max={seq.l_max}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    params = _load_params(args.config)
    thetas = _parse_thetas(args.thetas)
    seq = _build_sequence(params, args.l_max)
    kernel = IsotropicKernel(seq)
    labels = _entry_labels(seq)
    values = kernel.evaluate_stack([math.cos(t) for t in thetas])

    is_mq = isinstance(params, MultiquadraticParams)
    header = ["theta"] + labels + ["tail_bound"]
    if is_mq:
        header += [f"cf[{i}][{j}]" for i in range(2) for j in range(2)]
        header += ["closed_form_series_consistent"]
    rows = []
    for idx, theta in enumerate(thetas):
        entries = np.atleast_1d(values[idx]).ravel()
        row = [repr(theta)] + [repr(float(v)) for v in entries]
        row.append(repr(kernel.tail_bound))
        if is_mq:
            cf = multiquadratic_kernel_closed_form(params, theta)
            row += [repr(float(v)) for v in cf.matrix.ravel()]
            row.append(str(int(cf.series_consistent)))
        rows.append(row)

    lines = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if is_mq and params.d != 3:
        _info("closed-form columns are not series-consistent for d != 3")
    if kernel.tail_is_heuristic:
        _info("tail bound is a last-term heuristic (no tail descriptor)")
    return EXIT_OK


def cmd_sample(args) -> int:
    params = _load_params(args.config)
    if args.n_samples < 1:
        raise UsageError(f"--n-samples must be >= 1, got {args.n_samples}")
    seq = _build_sequence(params, args.l_max)
    if seq.d not in (1, 2):
        _info(f"field synthesis is restricted to d in {{1, 2}}; model has d={seq.d}")
        return EXIT_INVALID
    grid_spec = _load_config(args.grid)
    try:
        grid = SampleGrid.from_spec(grid_spec)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad grid spec {args.grid}: {exc}") from exc
    if grid.d != seq.d:
        raise UsageError(f"grid dimension {grid.d} does not match model d={seq.d}")

    outdir = args.out or os.environ.get(OUTDIR_ENV, ".")
    os.makedirs(outdir, exist_ok=True)
    ext = args.format
    writer = write_field_csv if ext == "csv" else write_field_json

    files = []
    streams = []
    for i in range(args.n_samples):
        stream = args.stream + i
        sample = synthesize_field(seq, grid, l_max=seq.l_max,
                                  seed=args.seed, stream=stream)
        name = f"sample_{i:04d}.{ext}"
        path = os.path.join(outdir, name)
        writer(sample, path)
        files.append({"name": name, "stream": stream, "sha256": _file_hash(path)})
        streams.append(stream)

    manifest = {
        "seed": args.seed,
        "streams": streams,
        "L_max": seq.l_max,
        "model": params.to_dict(),
        "model_hash": _model_hash(params),
        "grid": grid_spec,
        "format": ext,
        "files": files,
    }
    manifest_path = os.path.join(outdir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _info(f"wrote {args.n_samples} samples and manifest to {outdir}")
    print(json.dumps({"manifest": manifest_path, "files": [f["name"] for f in files]},
                     indent=1))
    return EXIT_OK


def cmd_equiv(args) -> int:
    p1 = _load_params(args.config1)
    p2 = _load_params(args.config2)
    policy = VerdictPolicy(decay_margin=args.policy_decay_margin,
                           cauchy_eps=args.policy_cauchy_eps,
                           nonvanishing_floor=args.policy_floor)

    closed = None
    if isinstance(p1, MultiquadraticParams) and isinstance(p2, MultiquadraticParams):
        try:
            closed = classify_multiquadratic(p1, p2)
        except ValueError as exc:
            raise InvalidModelError(str(exc)) from exc
    elif isinstance(p1, LegendreMaternParams) and isinstance(p2, LegendreMaternParams):
        closed = classify_legendre_matern(p1, p2)
    elif type(p1) is not type(p2):
        raise UsageError("model families differ; no common coefficient space")

    if isinstance(p1, LegendreMaternParams):
        k_max = args.k_max if args.k_max is not None else max(p1.k_max, p2.k_max)
        s1 = build_sequence(LegendreMaternParams(p1.sigma, p1.alpha, p1.nu,
                                                 args.l_max, k_max))
        s2 = build_sequence(LegendreMaternParams(p2.sigma, p2.alpha, p2.nu,
                                                 args.l_max, k_max))
    else:
        s1 = _build_sequence(p1, args.l_max)
        s2 = _build_sequence(p2, args.l_max)
    series = functional_series(s1, s2, l_max=args.l_max)
    numeric = classify_numeric(series, policy)

    verdicts = [numeric] if closed is None else [closed, numeric]
    out_json = f"{args.out}.json" if args.out else None
    obj = report_to_dict(series, verdicts, policy)
    _emit_json(obj, out_json)
    if args.out:
        write_series_csv(f"{args.out}.csv", series)

    for v in verdicts:
        _info(f"{v.provenance}: {v.verdict} ({v.diagnostics})")

    if closed is not None and numeric.verdict != INCONCLUSIVE \
            and numeric.verdict != closed.verdict:
        _info("ERROR: closed-form and numeric verdicts disagree; the "
              "truncation is undersized or there is a bug")
        return EXIT_INVALID
    final = closed if closed is not None else numeric
    if final.verdict == EQUIVALENT:
        return EXIT_OK
    if final.verdict == ORTHOGONAL:
        return EXIT_FAIL
    return EXIT_INCONCLUSIVE


def cmd_mc_check(args) -> int:
    params = _load_params(args.config)
    if args.n_samples < 2:
        raise UsageError(f"--n-samples must be >= 2, got {args.n_samples}")
    seq = _build_sequence(params, args.l_max)
    if seq.d not in (1, 2):
        _info(f"field synthesis is restricted to d in {{1, 2}}; model has d={seq.d}")
        return EXIT_INVALID
    if args.pairs:
        spec = _load_config(args.pairs)
        try:
            pairs = np.array(spec["pairs"], dtype=float)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad pairs file {args.pairs}: {exc}") from exc
    else:
        if args.thetas is None:
            raise UsageError("one of --thetas or --pairs is required")
        thetas = _parse_thetas(args.thetas)
        pairs = _axis_pairs(seq.d, thetas)
    analytic = None
    if args.analytic_config:
        analytic = _build_sequence(_load_params(args.analytic_config), args.l_max)
    report = monte_carlo_kernel_check(
        seq, pairs, n_samples=args.n_samples, seed=args.seed,
        stream=args.stream, z_threshold=args.z_threshold, analytic_seq=analytic)
    _emit_json(report.to_dict(), args.out)
    _info(f"max |z| = {report.z_max:.3f} over {len(report.pairs)} pairs "
          f"(threshold {report.z_threshold})")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_export(args) -> int:
    params = _load_params(args.config)
    seq = _build_sequence(params, args.l_max)
    _emit_json(sequence_to_dict(seq), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _info(f"error: {message}")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spherefield",
                     description="Isotropic Hilbert-valued Gaussian fields on "
                                 "spheres: validation, kernels, sampling, and "
                                 "Gaussian-measure equivalence diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, l_max_default=None):
        p.add_argument("--l-max", type=int, default=l_max_default,
                       help="degree truncation (default: model default)")
        p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("validate", help="check model validity conditions")
    p.add_argument("--config", required=True)
    add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("kernel", help="tabulate the covariance kernel over angles")
    p.add_argument("--config", required=True)
    p.add_argument("--thetas", required=True,
                   help="comma-separated geodesic angles in [0, pi]")
    add_common(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("sample", help="synthesize field realizations")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True, help="grid spec file (JSON/TOML)")
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0, help="first stream id")
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help=f"output directory (default: ${OUTDIR_ENV} or .)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("equiv", help="equivalence-vs-orthogonality diagnosis")
    p.add_argument("config1")
    p.add_argument("config2")
    p.add_argument("--l-max", type=int, default=512)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--policy-decay-margin", type=float, default=0.2)
    p.add_argument("--policy-cauchy-eps", type=float, default=1e-6)
    p.add_argument("--policy-floor", type=float, default=1e-8)
    p.add_argument("--out", help="report path prefix (.json and .csv)")
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("mc-check", help="Monte Carlo covariance reproduction check")
    p.add_argument("--config", required=True)
    p.add_argument("--thetas", default=None,
                   help="comma-separated pair angles in [0, pi]")
    p.add_argument("--pairs", default=None, help="pairs file (JSON with 'pairs')")
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--z-threshold", type=float, default=4.0)
    p.add_argument("--analytic-config", default=None,
                   help="compare samples against this model instead "
                        "(sensitivity runs)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_mc_check)

    p = sub.add_parser("schoenberg-export", help="export the coefficient sequence")
    p.add_argument("--config", required=True)
    add_common(p)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        _info(f"usage error: {exc}")
        return EXIT_USAGE
    except InvalidModelError as exc:
        _info(f"invalid model: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
