"""Command-line entry point: ``resilient-recon <subcommand> ...``.

Every subcommand accepts ``--config FILE`` holding ``option = value`` lines
(option names as on the command line, without dashes); explicit flags win.
Exit codes: 0 ok, 2 bad input/config, 3 numeric failure, 4 infeasible.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .datadriven import Dataset, export_model, fit_regressor, residual_pca
from .errors import ConfigError, ReconError
from .fileio import fmt, load_matrix, load_vector, parse_vector
from .lti import (
    LtiSystem,
    bruteforce_decoder_fixed,
    bruteforce_decoder_varying,
    certify_correctable_fixed,
    certify_correctable_varying,
    observability_stack,
    stack_outputs,
)
from .model import IndicatorVector, MeasurementModel, SupportSet
from .reconstruct import BallConstraint, constrained_ls, ls_reconstruct, reconstruct_with_oracle, rip_constant
from .support import OracleModel, compute_l_eta, poisson_binomial_pmf


def _emit(args, text: str):
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _vec_arg(value, m=None, name="vector"):
    """Inline list ``0.1,0.2`` or a path to a vector file; scalars broadcast to ``m``."""
    if value is None:
        return None
    v = load_vector(value) if Path(value).is_file() else parse_vector(value)
    if m is not None and v.size == 1:
        v = np.full(m, v[0])
    if m is not None and v.size != m:
        raise ConfigError(f"{name} has {v.size} entries, expected {m}")
    return v


def cmd_pmf(args):
    p = _vec_arg(args.p, name="p")
    r = poisson_binomial_pmf(p)
    if args.format == "json":
        _emit(args, json.dumps({"p": p.tolist(), "pmf": r.tolist()}))
    else:
        _emit(args, ",".join(fmt(v) for v in r))


def cmd_leta(args):
    p = _vec_arg(args.p, name="p")
    r = poisson_binomial_pmf(p)
    exact = compute_l_eta(r, args.eta, "exact-tail")
    paper = compute_l_eta(r, args.eta, "paper")
    if args.format == "json":
        _emit(args, json.dumps({"eta": args.eta, "exact_tail": exact, "paper": paper}))
    elif args.both:
        _emit(args, f"exact-tail,{exact}\npaper,{paper}")
    else:
        _emit(args, str(paper if args.paper_indexing else exact))


def cmd_rip(args):
    M = load_matrix(args.matrix)
    if args.transpose:
        M = M.T
    delta = rip_constant(M, args.S)
    if args.format == "json":
        _emit(args, json.dumps({"S": args.S, "delta": delta}))
    else:
        _emit(args, fmt(delta))


def cmd_reconstruct(args):
    C = load_matrix(args.C)
    model = MeasurementModel(C, args.eps)
    y = _vec_arg(args.y, model.m, "y")
    ball = None
    if args.ball_radius is not None:
        center = _vec_arg(args.ball_center, model.n, "ball-center") if args.ball_center else np.zeros(model.n)
        ball = BallConstraint(center, args.ball_radius)

    if args.safe is not None:
        safe = SupportSet.from_one_based([int(t) for t in parse_vector(args.safe)], model.m)
        res = constrained_ls(y, model, safe, ball) if ball else ls_reconstruct(y, model, safe)
    elif args.qhat is not None:
        if ball is None:
            raise ConfigError("oracle-driven reconstruction needs --ball-radius")
        q_hat = IndicatorVector(_vec_arg(args.qhat, model.m, "qhat").astype(int))
        oracle = OracleModel(_vec_arg(args.p, model.m, "p"), _vec_arg(args.s or "1", model.m, "s"))
        res = reconstruct_with_oracle(
            y,
            model,
            q_hat,
            oracle,
            args.eta,
            ball,
            args.support_mode,
            "paper" if args.paper_indexing else "exact-tail",
            np.random.default_rng(args.seed),
        )
    else:
        raise ConfigError("give either --safe or --qhat")

    doc = {
        "x_hat": res.x_hat.tolist(),
        "residual_norm": res.residual_norm,
        "active_rows": res.active_rows.one_based(),
        "bound": res.bound,
        "on_boundary": res.on_boundary,
    }
    if args.format == "json":
        _emit(args, json.dumps(doc))
    else:
        lines = ["key,value", "x_hat," + " ".join(fmt(v) for v in res.x_hat)]
        lines += [f"residual_norm,{fmt(res.residual_norm)}", "active_rows," + " ".join(map(str, doc["active_rows"]))]
        lines += [f"bound,{'' if res.bound is None else fmt(res.bound)}", f"on_boundary,{str(res.on_boundary).lower()}"]
        _emit(args, "\n".join(lines))


def cmd_decode_lti(args):
    sys_ = LtiSystem(load_matrix(args.A), load_matrix(args.C))
    Y = load_matrix(args.Y)
    T = args.T or Y.shape[1]
    if args.decoder == "fixed":
        res = bruteforce_decoder_fixed(Y, sys_, T, args.q)
        corrupted = {"nodes": res.corrupted.one_based()}
    else:
        stack = observability_stack(sys_, T)
        res = bruteforce_decoder_varying(stack_outputs(Y), stack, args.q, per_step=not args.total)
        corrupted = {"rows": [[stack.row_map[r][0] + 1, stack.row_map[r][1]] for r in res.corrupted]}
    doc = {"x0": res.x0.tolist(), "decoder": args.decoder, **corrupted}
    if args.certify:
        doc["certified_fixed"] = certify_correctable_fixed(sys_, T, args.q)
        doc["certified_varying"] = certify_correctable_varying(sys_, T, args.q)
        doc["certified_varying_per_step"] = certify_correctable_varying(sys_, T, args.q, per_step=True)
    if args.format == "json":
        _emit(args, json.dumps(doc))
    else:
        lines = ["key,value", "x0," + " ".join(fmt(v) for v in res.x0)]
        if "nodes" in corrupted:
            lines.append("corrupted_nodes," + " ".join(map(str, corrupted["nodes"])))
        else:
            lines.append("corrupted_rows," + " ".join(f"{j}@{k}" for j, k in corrupted["rows"]))
        for key in ("certified_fixed", "certified_varying", "certified_varying_per_step"):
            if key in doc:
                lines.append(f"{key},{str(doc[key]).lower()}")
        _emit(args, "\n".join(lines))


def cmd_simulate(args):
    if not args.config:
        raise ConfigError("simulate needs --config")
    sc = harness.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        sc = dataclasses.replace(sc, **overrides)
    results, summary = harness.run_scenario(sc, workers=args.workers, timing=args.timing)
    if args.format == "json":
        _emit(args, harness.results_to_json(sc, results, summary))
    else:
        _emit(args, harness.results_to_csv(results))
    # the summary goes to stderr so the trial table stays machine-readable
    sys.stderr.write(json.dumps(harness.to_jsonable(summary), sort_keys=True) + "\n")


def cmd_datadriven_fit(args):
    data = Dataset.from_csv(args.data, args.n_sigma, args.delimiter)
    reg = fit_regressor(data)
    pca = residual_pca(data, reg, args.n, args.safety_factor)
    _emit(args, export_model(reg, pca, data))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of 'option = value' lines")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="resilient-recon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pmf", parents=[common], help="Poisson-binomial PMF of oracle agreement counts")
    p.add_argument("--p", required=True, help="comma list or vector file of true-positive rates")
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("leta", parents=[common], help="reliability integer l_eta")
    p.add_argument("--p", required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--paper-indexing", action="store_true", help="use the k+1 summation limit literally")
    p.add_argument("--both", action="store_true", help="print both indexings")
    p.set_defaults(func=cmd_leta)

    p = sub.add_parser("rip", parents=[common], help="exact restricted isometry constant")
    p.add_argument("--matrix", required=True)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--transpose", action="store_true", help="use the transpose (delta_n of C^T)")
    p.set_defaults(func=cmd_rip)

    p = sub.add_parser("reconstruct", parents=[common], help="one-shot reconstruction from files")
    p.add_argument("--C", required=True, help="output matrix file")
    p.add_argument("--y", required=True, help="measurement vector (file or list)")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--safe", help="1-based safe rows; skips the oracle")
    p.add_argument("--qhat", help="oracle indicator (1 safe, 0 flagged)")
    p.add_argument("--p", help="true-positive rates (scalar broadcasts)")
    p.add_argument("--s", help="confidences (default 1)")
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument(
        "--support-mode", choices=("random", "ranked-literal", "ranked-conservative"), default="ranked-conservative"
    )
    p.add_argument("--paper-indexing", action="store_true")
    p.add_argument("--ball-center")
    p.add_argument("--ball-radius", type=float)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("decode-lti", parents=[common], help="brute-force LTI decoders and certificates")
    p.add_argument("--A", required=True)
    p.add_argument("--C", required=True)
    p.add_argument("--Y", required=True, help="m x T output matrix")
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--decoder", choices=("fixed", "varying"), default="varying")
    p.add_argument("--total", action="store_true", help="varying decoder: q counts rows in total, not per step")
    p.add_argument("--certify", action="store_true")
    p.set_defaults(func=cmd_decode_lti)

    p = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo scenario")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record wall_time_ms (output is then not reproducible)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("datadriven-fit", parents=[common], help="fit affine regressor and residual PCA")
    p.add_argument("--data", required=True, help="CSV with header; sigma columns first")
    p.add_argument("--n-sigma", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="retained principal directions")
    p.add_argument("--safety-factor", type=float, default=None)
    p.add_argument("--delimiter", default=",")
    p.set_defaults(func=cmd_datadriven_fit)
    return parser


def _config_defaults(parser, argv):
    """Apply ``--config`` option lines as subparser defaults (not for simulate)."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command in (None, "simulate"):
        return
    subparser = parser._subparsers._group_actions[0].choices.get(known.command)
    if subparser is None:
        return
    dests = {a.dest: a for a in subparser._actions}
    path = Path(known.config)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    defaults = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'option = value'")
        key, val = (t.strip() for t in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in dests or dest in ("config", "help", "func"):
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r} for {known.command}")
        action = dests[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = val.lower() in ("1", "true", "yes", "on")
        else:
            defaults[dest] = val  # argparse applies `type` to string defaults
        action.required = False
    subparser.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _config_defaults(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
    except ReconError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
