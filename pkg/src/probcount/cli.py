"""Command-line entry point.

Every subcommand prints either a headered CSV or a JSON document to
stdout (or to --out) and is byte-reproducible for fixed arguments and
seeds.  Exit codes: 0 on success, 1 on a domain or resource error (the
message goes to stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import mpmath

from . import dp_audit, exact_dist, precision, service, survey
from .errors import DomainError, ResourceLimitError
from .fm_constant import compute_phi

DEFAULT_DIGITS = 15


def _fmt(x, digits: int) -> str:
    """Deterministic decimal rendering for floats and mpmath values."""
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.{digits}g}"
    return mpmath.nstr(x, digits)


class _Output:
    def __init__(self, path: str | None):
        self._path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n") if path else sys.stdout

    def line(self, text: str) -> None:
        self._fh.write(text + "\n")

    def close(self) -> None:
        if self._path:
            self._fh.close()


def _csv(out: _Output, header: list[str], rows) -> None:
    out.line(",".join(header))
    for row in rows:
        out.line(",".join(row))


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    try:
        a, b = int(lo), int(hi)
    except ValueError:
        raise DomainError(f"range must look like A:B, got {text!r}") from None
    if a > b:
        raise DomainError(f"empty range {text!r}")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probcount",
        description="Probabilistic counters: exact distributions, privacy audits, survey simulation.",
    )
    parser.add_argument("--digits", type=int, default=DEFAULT_DIGITS, help="significant digits printed")
    parser.add_argument("--precision-bits", type=int, default=None, help="working mantissa bits")
    sub = parser.add_subparsers(dest="command", required=True)

    dist = sub.add_parser("dist", help="exact counter distributions")
    dist_sub = dist.add_subparsers(dest="counter", required=True)
    dm = dist_sub.add_parser("morris", help="morris level pmf, moments or tails")
    dm.add_argument("--n", type=int, required=True)
    mode = dm.add_mutually_exclusive_group()
    mode.add_argument("--row", action="store_true")
    mode.add_argument("--moments", action="store_true")
    mode.add_argument("--tails", action="store_true")
    dm.add_argument("--out", default=None)
    dg = dist_sub.add_parser("maxgeo", help="max-geometric pmf and cdf at one cell")
    dg.add_argument("--n", type=int, required=True)
    dg.add_argument("--l", type=int, required=True)
    dg.add_argument("--out", default=None)

    audit = sub.add_parser("audit", help="differential-privacy parameters")
    audit_sub = audit.add_subparsers(dest="mechanism", required=True)
    am = audit_sub.add_parser("morris", help="exact epsilon and tail slack")
    am.add_argument("--n", type=int, default=None)
    am.add_argument("--range", dest="range_", default=None, metavar="A:B")
    am.add_argument("--strict", action="store_true", help="check both ratio directions")
    am.add_argument("--csv", action="store_true", help="CSV output (implied by --range)")
    am.add_argument("--out", default=None)
    ag = audit_sub.add_parser("maxgeo", help="threshold, minimum n, or epsilon envelopes")
    ag.add_argument("--epsilon", type=float, default=None)
    ag.add_argument("--delta", type=float, required=True)
    ag.add_argument("--n", type=int, default=None)
    ag.add_argument("--range", dest="range_", default=None, metavar="A:B")
    ag.add_argument("--out", default=None)

    sv = sub.add_parser("survey", help="run the survey simulation from a JSON config")
    sv.add_argument("--config", required=True)
    sv.add_argument("--per-trial", default=None, help="write per-trial CSV here")

    se = sub.add_parser("serve", help="run the aggregation service from a JSON config")
    se.add_argument("--config", required=True)

    tables = sub.add_parser("tables", help="reference tables from the exact pmf")
    table_kind = tables.add_mutually_exclusive_group(required=True)
    table_kind.add_argument("--alfa", action="store_true", help="adjacent-ratio table at n=129")
    table_kind.add_argument("--init", action="store_true", help="doubling-index pmf sequences")
    tables.add_argument("--out", default=None)

    comp = sub.add_parser("compare", help="aggregation method comparison at one n")
    comp.add_argument("--n", type=int, required=True)
    comp.add_argument("--out", default=None)

    phi = sub.add_parser("phi", help="estimator bias constant")
    phi.add_argument("--terms", type=int, default=None)
    phi.add_argument("--out", default=None)

    return parser


def _cmd_dist(args, digits: int) -> int:
    out = _Output(args.out)
    try:
        if args.counter == "morris":
            n = args.n
            if args.moments:
                m = exact_dist.morris_moments(n)
                _csv(
                    out,
                    ["n", "mean", "variance", "mean_pow2"],
                    [[str(n), _fmt(m.mean, digits), _fmt(m.variance, digits), _fmt(m.mean_pow2, digits)]],
                )
            elif args.tails:
                t = exact_dist.morris_tails(n)
                _csv(
                    out,
                    ["n", "delta1", "delta2", "delta_total"],
                    [[str(n), _fmt(t.delta1, digits), _fmt(t.delta2, digits), _fmt(t.total, digits)]],
                )
            else:
                row = exact_dist.morris_row(n)
                _csv(
                    out,
                    ["n", "l", "p"],
                    ([str(n), str(l), _fmt(p, digits)] for l, p in zip(row.support(), row.probs)),
                )
        else:
            n, level = args.n, args.l
            _csv(
                out,
                ["n", "l", "pmf", "cdf"],
                [[
                    str(n),
                    str(level),
                    _fmt(exact_dist.maxgeo_pmf(n, level), digits),
                    _fmt(exact_dist.maxgeo_cdf(n, level), digits),
                ]],
            )
    finally:
        out.close()
    return 0


def _cmd_audit(args, digits: int) -> int:
    out = _Output(getattr(args, "out", None))
    try:
        if args.mechanism == "morris":
            if (args.n is None) == (args.range_ is None):
                raise DomainError("give exactly one of --n and --range")
            if args.range_ is not None:
                lo, hi = _parse_range(args.range_)
                rows = []
                for n in range(lo, hi + 1):
                    eps = dp_audit.morris_epsilon_exact(n, strict=args.strict)
                    rows.append(
                        [
                            str(n),
                            _fmt(eps.value, digits),
                            _fmt(-math.log1p(-8.0 / n), digits),
                            _fmt(dp_audit.morris_bound_L(n), digits),
                        ]
                    )
                _csv(out, ["n", "epsilon_exact", "lower_curve", "upper_curve"], rows)
            else:
                report = dp_audit.morris_audit(args.n, strict=args.strict)
                out.line(json.dumps(report.to_json_dict(), sort_keys=True))
        else:
            if args.range_ is not None:
                lo, hi = _parse_range(args.range_)
                rows = []
                for n in range(lo, hi + 1):
                    env = dp_audit.maxgeo_eps_given_n(n, args.delta)
                    eps = dp_audit.morris_epsilon_exact(n)
                    rows.append(
                        [
                            str(n),
                            _fmt(eps.value, digits),
                            _fmt(env.eps0, digits),
                            _fmt(env.psi, digits),
                            _fmt(env.phi_bound, digits),
                        ]
                    )
                _csv(out, ["n", "morris_eps", "maxgeo_eps0", "psi", "phi"], rows)
            elif args.n is not None:
                env = dp_audit.maxgeo_eps_given_n(args.n, args.delta)
                doc = {
                    "mechanism": "maxgeo",
                    "n": env.n,
                    "delta": env.delta,
                    "eps0": env.eps0,
                    "psi": env.psi,
                    "phi": env.phi_bound,
                }
                out.line(json.dumps(doc, sort_keys=True))
            elif args.epsilon is not None:
                level = dp_audit.maxgeo_l_epsilon(args.epsilon)
                n_min = dp_audit.maxgeo_min_n(args.epsilon, args.delta)
                doc = {
                    "mechanism": "maxgeo",
                    "epsilon": args.epsilon,
                    "delta": args.delta,
                    "l_epsilon": level,
                    "n_min": n_min,
                }
                out.line(json.dumps(doc, sort_keys=True))
            else:
                raise DomainError("give --epsilon, --n, or --range")
    finally:
        out.close()
    return 0


def _cmd_survey(args, digits: int) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    config = survey.SurveyConfig(
        population=int(raw["population"]),
        true_count=raw.get("true_count"),
        bits=tuple(bool(b) for b in raw["bits"]) if "bits" in raw else None,
        mechanism=raw.get("mechanism", "morris"),
        lots=raw.get("lots"),
        noise_scale=raw.get("noise_scale"),
        pre_count=int(raw.get("pre_count", 0)),
        seed=int(raw.get("seed", 0)),
        trials=int(raw.get("trials", 10_000)),
        dp_epsilon=raw.get("dp_epsilon"),
        dp_delta=raw.get("dp_delta"),
    )
    outcome = survey.run_survey(config)
    if args.per_trial:
        out = _Output(args.per_trial)
        try:
            _csv(
                out,
                ["trial", "released", "estimate"],
                (
                    [str(i), _fmt(r, digits), _fmt(e, digits)]
                    for i, (r, e) in enumerate(zip(outcome.released, outcome.estimates))
                ),
            )
        finally:
            out.close()
    sys.stdout.write(json.dumps(outcome.summary_dict(), sort_keys=True) + "\n")
    return 0


def _cmd_tables(args, digits: int) -> int:
    out = _Output(args.out)
    try:
        if args.alfa:
            entries = exact_dist.ratio_table(129, 11)
            _csv(
                out,
                ["i", "theta", "pow2", "ratio"],
                (
                    [str(e.i), _fmt(e.theta, digits), _fmt(e.pow2, digits), _fmt(e.scaled, digits)]
                    for e in entries
                ),
            )
        else:
            seqs = exact_dist.lemma_sequences(2, 14)
            _csv(
                out,
                ["k", "p_k4", "p_k5"],
                (
                    [str(k), _fmt(a, digits), _fmt(b, digits)]
                    for k, a, b in zip(seqs.ks, seqs.upper, seqs.companion)
                ),
            )
    finally:
        out.close()
    return 0


def _cmd_compare(args, digits: int) -> int:
    out = _Output(args.out)
    try:
        rows = survey.comparison_table(args.n)
        _csv(
            out,
            ["method", "epsilon", "delta", "estimator", "variance", "avg_memory_bits"],
            (
                [
                    r.method,
                    _fmt(r.dp_params.epsilon, digits),
                    _fmt(r.dp_params.delta, digits),
                    f'"{r.estimator}"',
                    _fmt(r.variance, digits),
                    _fmt(r.avg_memory_bits, digits),
                ]
                for r in rows
            ),
        )
    finally:
        out.close()
    return 0


def _cmd_phi(args, digits: int) -> int:
    out = _Output(args.out)
    try:
        constant = compute_phi(args.terms) if args.terms is not None else compute_phi()
        _csv(out, ["phi", "terms_used"], [[_fmt(constant.value, digits), str(constant.terms_used)]])
    finally:
        out.close()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.precision_bits is not None:
        precision.set_precision_bits(args.precision_bits)
    digits = args.digits
    try:
        if args.command == "dist":
            return _cmd_dist(args, digits)
        if args.command == "audit":
            return _cmd_audit(args, digits)
        if args.command == "survey":
            return _cmd_survey(args, digits)
        if args.command == "serve":
            config = service.ServiceConfig.from_json_file(args.config)
            return service.serve(config)
        if args.command == "tables":
            return _cmd_tables(args, digits)
        if args.command == "compare":
            return _cmd_compare(args, digits)
        if args.command == "phi":
            return _cmd_phi(args, digits)
        raise DomainError(f"unknown command {args.command!r}")
    except (DomainError, ResourceLimitError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
