"""Command-line front end.

Every command prints one JSON document (or a CSV table) that embeds the
full run configuration, so identical invocations give identical bytes.

Exit codes: 0 success, 1 invalid arguments, 2 topology error,
3 verification failure. Errors go to stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import apps, heisenberg, protocols, verify
from .errors import ConatError, InvalidParameter
from .protocols import Topology

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TOPOLOGY = 2
EXIT_VERIFY = 3

SIG_DIGITS = 12
CSV_HEADER = ["index", "param", "value", "kind", "quantity", "measured", "predicted", "pass"]
CONVENTIONS = {
    "quadrature_order": "x1,p1,...,xn,pn",
    "epsilon_reference": verify.SENDER_REFERENCED,
    "fidelity": "2/sqrt((2+Vx)(2+Vp)) in vacuum units",
}


@dataclass
class RunConfig:
    subcommand: str
    n: Optional[int] = None
    r: Optional[float] = None
    eta: Optional[float] = None
    kind: Optional[str] = None
    engine: str = "both"
    trials: int = 100_000
    seed: int = 0
    topology: Optional[str] = None
    format: str = "json"
    output: Optional[str] = None
    vacuum_variance: float = 1.0
    extra: Dict[str, Any] = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameter(message)


def _pair(text: str) -> Tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,p', got {text!r}") from None
    return a, b


def _labels(text: str) -> List[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--engine", choices=["symbolic", "gaussian", "both"], default="both")
    common.add_argument("--trials", type=int, default=100_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", default=None, help="write here instead of stdout")
    common.add_argument("--vacuum-variance", type=float, default=1.0)
    common.add_argument("--input-mean", type=_pair, default=(0.0, 0.0), metavar="X,P")

    parser = _Parser(prog="conatsim", description="Multiparty conat channel simulator")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("ghz", parents=[common], help="prepare an N-mode GHZ resource")
    p.add_argument("--parties", type=int, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--kind", choices=["pq", "mq"], default="pq")

    p = sub.add_parser("epr", parents=[common], help="prepare an EPR pair")
    p.add_argument("--r", type=float, required=True)

    def channel_args(p, r_default=1.0):
        p.add_argument("--n", type=int, default=3)
        p.add_argument("--r", type=float, default=r_default)
        p.add_argument("--eta", type=float, default=1.0)
        p.add_argument("--kind", choices=["pq", "mq"], default="pq")
        p.add_argument("--gain", type=float, default=protocols.SQRT2, help=argparse.SUPPRESS)

    p = sub.add_parser("ccaecc", parents=[common], help="GHZ-assisted channel with feed-forward")
    channel_args(p)

    p = sub.add_parser("superdense", parents=[common], help="superdense channel pair over an EPR tree")
    p.add_argument("--topology", required=True)
    p.add_argument("--r", type=float, default=None)

    p = sub.add_parser("verify", parents=[common], help="run a protocol against its closed-form noise")
    p.add_argument("--method", choices=["ccaecc", "superdense"], default="ccaecc")
    # unset r means 1 for ccaecc and the topology's own squeezing for superdense
    channel_args(p, r_default=None)
    p.add_argument("--topology", default=None)

    p = sub.add_parser("teleport", parents=[common], help="controlled teleportation")
    p.add_argument("--receiver", required=True)
    p.add_argument("--drop-controller", action="append", default=[])
    p.add_argument("--eta-controllers", type=float, default=None)
    p.add_argument("--topology", default=None, help="two-mode teleportation over a superdense run")
    channel_args(p)

    p = sub.add_parser("qss", parents=[common], help="classical secret sharing")
    p.add_argument("--coalition", type=_labels, required=True)
    p.add_argument("--reconstructor", default=None)
    p.add_argument("--secret", type=_pair, default=(0.0, 0.0), metavar="X,P")
    channel_args(p)

    p = sub.add_parser("sweep", parents=[common], help="grid over r, eta or n")
    p.add_argument("--param", choices=["r", "eta", "n"], required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--over", nargs=argparse.REMAINDER, required=True,
                   help="subcommand and its arguments, e.g. --over ccaecc --n 3")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    known = {f for f in RunConfig.__dataclass_fields__ if f != "extra"}
    values = vars(args)
    base = {k: values[k] for k in known if k in values}
    if "vacuum_variance" in values:
        base["vacuum_variance"] = values["vacuum_variance"]
    extra = {k: v for k, v in values.items() if k not in known}
    if extra.get("gain") == protocols.SQRT2:
        del extra["gain"]
    cfg = RunConfig(**base)
    cfg.extra = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(extra.items())}
    return cfg


# ---------------------------------------------------------------- handlers

def _channel_record(output: protocols.ChannelOutput, args) -> Dict[str, Any]:
    rep = verify.check_definition(output, input_mean=args.input_mean)
    record = {
        "kind": output.kind,
        "parties": list(output.parties),
        "epsilons_measured": rep.epsilons,
        "epsilons_predicted": rep.predicted,
        "epsilons_input_referenced": rep.epsilons_input_referenced,
        "means": rep.means,
        "commutators": {"values": rep.commutators, "ok": rep.commutators_ok},
        "leaks": rep.leaks,
        "pass": rep.passed,
    }
    if args.engine in ("gaussian", "both"):
        cv = verify.cross_validate(output, args.trials, args.seed, args.input_mean,
                                   conventions=(verify.SENDER_REFERENCED,))
        mc = [row["monte_carlo"] for row in cv.rows]
        se = [row["monte_carlo_se"] for row in cv.rows]
        record["monte_carlo"] = {"epsilons": mc, "standard_errors": se, "agree": cv.agree,
                                 "trials": cv.trials, "seed": cv.seed}
        if args.engine == "gaussian":
            record["epsilons_measured"] = mc
            if rep.predicted is not None:
                record["pass"] = all(abs(m - p) <= verify.N_SIGMA * s for m, p, s in zip(mc, rep.predicted, se))
        else:
            record["pass"] = bool(rep.passed) and cv.agree
    return record


def _resource_doc(reg: heisenberg.QuadratureRegister, n: int, r: float, sigma2: float, mq: bool) -> Dict[str, Any]:
    modes = reg.names
    copy_q, sum_q = ("P", "X") if mq else ("X", "P")
    total = heisenberg.combine([(1.0, reg.quad(m, sum_q)) for m in modes])
    rel = [heisenberg.variance_of(reg, reg.quad(a, copy_q) - reg.quad(b, copy_q))
           for i, a in enumerate(modes) for b in modes[i + 1:]]
    measured = {"total": heisenberg.variance_of(reg, total), "relative_max": max(rel), "relative_min": min(rel)}
    s = math.exp(-2 * r) * sigma2
    predicted = {"total": n * s, "relative_max": 2 * s, "relative_min": 2 * s}
    sym = heisenberg.symplectic_check(reg)
    forms = {str(m): {"x": {str(k): v for k, v in sorted(reg.x(m).items())},
                      "p": {str(k): v for k, v in sorted(reg.p(m).items())}} for m in modes}
    ok = sym.ok and all(abs(measured[k] - predicted[k]) <= verify.SYMBOLIC_TOL for k in measured)
    return {"forms": forms, "variances_measured": measured, "variances_predicted": predicted,
            "commutators": {"ok": sym.ok, "violations": sym.violations}, "pass": ok}


def cmd_ghz(args) -> Dict[str, Any]:
    mq = args.kind == "mq"
    prep = protocols.prepare_ghz_mq_variant if mq else protocols.prepare_ghz
    reg = prep(args.parties, args.r, vacuum_variance=args.vacuum_variance)
    return _resource_doc(reg, args.parties, args.r, args.vacuum_variance, mq)


def cmd_epr(args) -> Dict[str, Any]:
    reg = protocols.prepare_epr(args.r, vacuum_variance=args.vacuum_variance)
    doc = _resource_doc(reg, 2, args.r, args.vacuum_variance, False)
    doc["variances_measured"]["antisqueezed_sum"] = heisenberg.variance_of(reg, reg.x(1) + reg.x(2))
    doc["variances_predicted"]["antisqueezed_sum"] = 2 * math.exp(2 * args.r) * args.vacuum_variance
    return doc


def _ccaecc(args) -> protocols.ChannelOutput:
    fn = protocols.ccaecc_mq if args.kind == "mq" else protocols.ccaecc_pq
    return fn(int(args.n), args.r, args.eta, gain=args.gain, vacuum_variance=args.vacuum_variance)


def cmd_ccaecc(args) -> Dict[str, Any]:
    return _channel_record(_ccaecc(args), args)


def _topology(args) -> Topology:
    return Topology.load(args.topology)


def cmd_superdense(args) -> Dict[str, Any]:
    pq, mq = protocols.superdense_conat(_topology(args), args.r, vacuum_variance=args.vacuum_variance)
    channels = {"PQ": _channel_record(pq, args), "MQ": _channel_record(mq, args)}
    return {"channels": channels, "pass": all(c["pass"] for c in channels.values())}


def cmd_verify(args) -> Dict[str, Any]:
    if args.method == "superdense":
        if not args.topology:
            raise InvalidParameter("verify --method superdense needs --topology")
        return cmd_superdense(args)
    if args.r is None:
        args.r = 1.0
    return cmd_ccaecc(args)


def cmd_teleport(args) -> Dict[str, Any]:
    trials = args.trials if args.engine in ("gaussian", "both") else None
    if args.topology:
        pq, mq = protocols.superdense_conat(_topology(args), args.r, vacuum_variance=args.vacuum_variance)
        if args.drop_controller:
            raise InvalidParameter("--drop-controller is only supported for single-mode teleportation")
        reps = apps.controlled_teleport_two_mode(pq, mq, args.receiver, (args.input_mean, args.input_mean),
                                                 args.eta, trials, args.seed)
        reports = {"PQ": reps[0].to_dict(), "MQ": reps[1].to_dict()}
    else:
        ch = _ccaecc(args)
        rep = apps.controlled_teleport(ch, args.receiver, args.input_mean, args.eta_controllers,
                                       args.drop_controller, trials, args.seed)
        reports = {ch.kind: rep.to_dict()}
    return {"reports": reports, "pass": None}


def cmd_qss(args) -> Dict[str, Any]:
    ch = _ccaecc(args)
    rep = apps.qss_classical(ch, args.secret, args.coalition, args.reconstructor, args.trials, args.seed)
    return {"reports": {ch.kind: rep.to_dict()}, "pass": None}


HANDLERS = {
    "ghz": cmd_ghz,
    "epr": cmd_epr,
    "ccaecc": cmd_ccaecc,
    "superdense": cmd_superdense,
    "verify": cmd_verify,
    "teleport": cmd_teleport,
    "qss": cmd_qss,
}


def grid(start: float, stop: float, steps: int) -> List[float]:
    if steps < 1:
        raise InvalidParameter("--steps must be >= 1")
    if steps == 1:
        return [start]
    return [float(v) for v in np.linspace(start, stop, steps)]


def cmd_sweep(args, parser) -> Dict[str, Any]:
    if not args.over or args.over[0] not in HANDLERS:
        raise InvalidParameter(f"--over needs one of {sorted(HANDLERS)}")
    base_argv = list(args.over)
    for flag in ("--engine", "--trials", "--seed", "--vacuum-variance"):
        if flag not in base_argv:
            value = getattr(args, flag[2:].replace("-", "_"))
            base_argv += [flag, str(value)]
    # output options written after --over belong to the sweep itself
    probe = parser.parse_args(base_argv)
    for flag in ("--output", "--format"):
        if flag in args.over:
            setattr(args, flag[2:], getattr(probe, flag[2:]))
    values = grid(args.start, args.stop, args.steps)
    dest = args.param
    if dest == "n":
        values = [int(round(v)) for v in values]

    def point(item):
        index, value = item
        sub_args = parser.parse_args(base_argv)
        if not hasattr(sub_args, dest):
            raise InvalidParameter(f"{sub_args.subcommand} has no parameter {dest!r}")
        setattr(sub_args, dest, value)
        return {"index": index, "param": dest, "value": value, "result": HANDLERS[sub_args.subcommand](sub_args)}

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        rows = list(pool.map(point, enumerate(values)))
    return {"over": base_argv, "rows": rows, "pass": _all_pass(r["result"]["pass"] for r in rows)}


def _all_pass(values) -> Optional[bool]:
    values = [v for v in values if v is not None]
    return all(values) if values else None


# ---------------------------------------------------------------- output

def _round(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def _flatten(result: Dict[str, Any], index=0, param="", value="") -> List[List[str]]:
    rows = []

    def record(kind, rec):
        measured = rec.get("epsilons_measured") or []
        predicted = rec.get("epsilons_predicted") or [None] * len(measured)
        for k, (m, p) in enumerate(zip(measured, predicted), start=1):
            rows.append([index, param, value, kind, f"eps{k}", m, p, rec.get("pass")])

    if "epsilons_measured" in result:
        record(result["kind"], result)
    for kind, rec in result.get("channels", {}).items():
        record(kind, rec)
    for kind, rep in result.get("reports", {}).items():
        for q in ("v_x", "v_p", "fidelity", "v_x_mc", "v_p_mc"):
            if rep.get(q) is not None:
                rows.append([index, param, value, kind, q, rep[q], None, result.get("pass")])
    if "variances_measured" in result:
        for q, m in result["variances_measured"].items():
            rows.append([index, param, value, "resource", q, m, result["variances_predicted"].get(q), result["pass"]])
    for row in result.get("rows", []):
        rows += _flatten(row["result"], row["index"], row["param"], row["value"])
    return [[_fmt(c) for c in r] for r in rows]


def to_csv(doc: Dict[str, Any]) -> str:
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(doc["config"], sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(_flatten(doc))
    return buf.getvalue()


def read_csv(text: str) -> List[Dict[str, str]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def render(doc: Dict[str, Any], fmt: str) -> str:
    if fmt == "csv":
        return to_csv(doc)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _fail(exc: ConatError) -> int:
    payload = {"error": type(exc).__name__, "code": exc.code, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return exc.code


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand == "sweep":
            result = cmd_sweep(args, parser)
        else:
            result = HANDLERS[args.subcommand](args)
    except ConatError as exc:
        return _fail(exc)

    config = asdict(_config(args))
    doc = _round({"config": config, "constants": CONVENTIONS, **result})
    text = render(doc, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_VERIFY if doc.get("pass") is False else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
