"""Command-line front end.

Exit status: 0 certificate verified, 1 verification failed, 2 input error or
beta not below the usable rounding constant, 3 sample budget exhausted or
solver non-convergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .certify import BetaInfeasible, certificate_to_json, run_pipeline
from .cones import ConeError, ConeSpec, DistKind
from .cover import BudgetExhausted, Mode
from .instances import CspInstance, InstanceError, parse_instance
from .oracle import MAX_FEVC_N, brute_maxq, exact_fevc
from .relax import DegenerateInstance, NonConvergence, SolverConfig, solve_nu_eps
from .rounding import default_rounding, estimate_rounding_constant
from .sparsify import SparsifyError

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("grothcover")


@dataclass
class RunConfig:
    command: str
    input: Path
    beta: float | None
    seed: int
    mode: Mode
    format: str
    oracle: bool
    samples_cap: int
    output: Path | None
    eps: float | None = None
    sigma: float | None = None
    gamma: float | None = None
    kind: str | None = None
    samples: int = 10_000

    def __post_init__(self):
        if self.beta is not None and not 0 < self.beta < 1:
            raise InstanceError(f"--beta must lie in (0, 1), got {self.beta}")
        if not 0 <= self.seed < 2 ** 64:
            raise InstanceError("--seed must be a 64-bit unsigned integer")
        if self.samples_cap < 1:
            raise InstanceError("--samples-cap must be positive")


def load_problem(path: Path, kind: str | None):
    """(spec, weights, instance-or-None) from an instance file.

    JSON documents with ``"kind": "psd"`` carry a PSD ``"matrix"`` and use the
    full PSD cover cone; everything else is a CSP instance.
    """
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise InstanceError(f"{path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if isinstance(doc, dict) and (kind or doc.get("kind")) == "psd":
            try:
                M = np.array(doc["matrix"], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise InstanceError(f"{path}: 'matrix' must be a square numeric array") from exc
            if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
                raise InstanceError(f"{path}: 'matrix' must be square of order >= 2")
            dist = DistKind(doc.get("dist", "PSD"))
            return ConeSpec.full_psd(M.shape[0], dist), M, None
    inst = parse_instance(path, kind=kind)
    return ConeSpec.from_instance(inst), inst.weights, inst


def _oracle_block(spec, inst: CspInstance | None, res, beta):
    cert = res.certificate
    out = {}
    if spec.dim <= 24:
        q = brute_maxq(spec, res.W).value
        out["maxq"] = q
        out["maxq_in_range"] = bool(beta * cert.rho - 1e-7 <= q <= cert.rho * (1 + 1e-7) + 1e-7)
    if inst is not None and inst.n <= MAX_FEVC_N:
        f = exact_fevc(inst, res.Z).value
        out["fevc"] = f
        out["fevc_in_range"] = bool(cert.mu * (1 - 1e-7) - 1e-7 <= f <= cert.mu / beta + 1e-7)
    return out


def _text(cert, report) -> str:
    lines = [
        f"(i)   rho*mu = <W,Z>         residual {report.c1_gap:+.3e}  "
        f"{'ok' if report.clauses.get('i') else 'FAIL'}",
        f"(ii)  q(W,s_U) >= beta*rho   residual {report.c2_cut:+.3e}  "
        f"{'ok' if report.clauses.get('ii') else 'FAIL'}",
        f"(iii) cover covers Z         residual {report.c3_cover_residual:+.3e}  "
        f"cost slack {report.c3_cost:+.3e}  {'ok' if report.clauses.get('iii') else 'FAIL'}",
        f"(iv)  Diag(x) >= W in Dist*  trace slack {report.c4_trace:+.3e}  "
        f"margin {report.c4_dist_star:+.3e}  {'ok' if report.clauses.get('iv') else 'FAIL'}",
        f"beta {cert.beta:.6g}  rho {cert.rho:.10g}  mu {cert.mu:.10g}  "
        f"U {list(cert.U.members)}  support {cert.y.size}  seed {cert.seed}",
        f"pass {'yes' if report.passed else 'no'}",
    ]
    return "\n".join(lines) + "\n"


def _emit(cfg: RunConfig, text: str):
    if cfg.output is not None:
        cfg.output.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_pipeline(cfg: RunConfig) -> int:
    spec, weights, inst = load_problem(cfg.input, cfg.kind)
    if cfg.beta is None:
        raise InstanceError("--beta is required")
    direction = "cover" if cfg.command == "cover" else "max"
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        res = run_pipeline(spec, weights, cfg.beta, direction=direction, mode=cfg.mode,
                           seed=cfg.seed, eps=cfg.eps, sigma=cfg.sigma, gamma=cfg.gamma,
                           T_cap=cfg.samples_cap)
    cert = res.certificate
    if cfg.oracle:
        cert.oracle = _oracle_block(spec, inst, res, cfg.beta)
    if cfg.format == "json":
        _emit(cfg, certificate_to_json(cert))
    else:
        text = _text(cert, res.report)
        if cert.oracle:
            text += "oracle " + " ".join(f"{k} {v}" for k, v in cert.oracle.items()) + "\n"
        _emit(cfg, text)
    return EXIT_OK if res.report.passed else EXIT_FAIL


def cmd_estimate_alpha(cfg: RunConfig) -> int:
    spec, weights, _ = load_problem(cfg.input, cfg.kind)
    res = solve_nu_eps(spec, weights, SolverConfig(eps=cfg.eps or 1e-4, sigma_budget=0.05))
    r = default_rounding(spec)
    est = estimate_rounding_constant(spec, r, res.dual.Y, cfg.samples, cfg.seed)
    doc = {"alpha_hat": est.alpha_hat, "confidence_halfwidth": est.confidence_halfwidth,
           "alpha_lower": est.lower, "claimed_alpha": r.claimed_alpha,
           "samples": est.samples, "seed": cfg.seed}
    _emit(cfg, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    spec, weights, inst = load_problem(cfg.input, cfg.kind)
    q = brute_maxq(spec, weights)
    doc = {"maxq": q.value, "argmax": list(q.argopt.members)}
    if inst is not None:
        f = exact_fevc(inst)
        doc["fevc"] = f.value
        doc["fevc_cover"] = [{"U": list(u.members), "weight": w}
                             for u, w in f.argopt.entries.items()]
    _emit(cfg, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grothcover", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, beta=True):
        sp.add_argument("--input", required=True, type=Path)
        sp.add_argument("--kind", choices=["maxcut", "maxdicut", "max2sat", "csp", "psd"])
        if beta:
            sp.add_argument("--beta", type=float, required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=["json", "text"], default="json")
        sp.add_argument("--output", type=Path)

    for name, help_ in (("cover", "demands z -> paired weights w and a certificate"),
                        ("solve", "weights w -> paired demands z and a certificate")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--mode", choices=["adaptive", "theoretical"], default="adaptive")
        sp.add_argument("--samples-cap", type=int, default=1_000_000)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--oracle", action="store_true")
    sp = sub.add_parser("estimate-alpha", help="empirical rounding constant on the relaxation")
    common(sp, beta=False)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--eps", type=float)
    sp = sub.add_parser("oracle", help="brute-force maxq and exact fractional cover")
    common(sp, beta=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(
            command=args.command, input=args.input, beta=getattr(args, "beta", None),
            seed=args.seed, mode=Mode(getattr(args, "mode", "adaptive").upper()),
            format=args.format, oracle=getattr(args, "oracle", False),
            samples_cap=getattr(args, "samples_cap", 1_000_000), output=args.output,
            eps=getattr(args, "eps", None), sigma=getattr(args, "sigma", None),
            gamma=getattr(args, "gamma", None), kind=args.kind,
            samples=getattr(args, "samples", 10_000))
        if cfg.command in ("cover", "solve"):
            return cmd_pipeline(cfg)
        if cfg.command == "estimate-alpha":
            return cmd_estimate_alpha(cfg)
        return cmd_oracle(cfg)
    except (InstanceError, ConeError, BetaInfeasible, DegenerateInstance, ValueError) as exc:
        print(f"grothcover: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BudgetExhausted, NonConvergence, SparsifyError) as exc:
        print(f"grothcover: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
