"""``wkf`` command-line front end.

Exit codes: 0 success/certified, 1 input error, 2 numerical failure,
3 refuted / not a frame / not woven, 4 unknown (randomized non-refutation or
an uncertified hypothesis).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .frames import certify_k_fusion_frame
from .instance import KINDS, InputError, InstanceFile, generate, load_instance, serialize_instance
from .numerics import NumericalError, operator_norm, pseudoinverse, range_basis
from .stability import (
    PerturbationParams,
    Status,
    check_erasure_corollary,
    check_erasure_pullback,
    check_erasure_theorem,
    check_perturbation_corollary,
    check_perturbation_theorem,
)
from .transforms import (
    fusion_vs_kfusion_equivalence,
    image_family,
    k_image_family,
    pull_back,
    push_forward,
    woven_push_forward,
)
from .weaving import (
    DEFAULT_MAX_M,
    certify_woven_exhaustive,
    certify_woven_randomized,
    default_workers,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_REFUTED, EXIT_UNKNOWN = 0, 1, 2, 3, 4
_STATUS_EXIT = {"certified": EXIT_OK, "refuted": EXIT_REFUTED, "unknown": EXIT_UNKNOWN}


def _jsonable(x):
    """Convert results to JSON-safe values; non-finite floats become null."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, Status):
        return x.value
    return x


def _pattern(p):
    return None if p is None else list(p.indices())


def _bound_report(rep):
    return {
        "lower_A": rep.lower_A,
        "upper_B": rep.upper_B,
        "lower_witness": rep.lower_witness,
        "upper_witness": rep.upper_witness,
        "is_frame": rep.is_frame,
        "vacuous": rep.vacuous,
    }


def _weaving_report(rep):
    if rep is None:
        return None
    return {
        "universal_A": rep.universal_A,
        "universal_B": rep.universal_B,
        "worst_sigma": _pattern(rep.worst_sigma),
        "best_B_sigma": _pattern(rep.best_B_sigma),
        "exhaustive": rep.exhaustive,
        "examined_count": rep.examined_count,
        "woven": rep.woven,
        "vacuous": rep.vacuous,
    }


def _verdict(cond):
    if cond is None:
        return None
    return {"status": cond.status.value, "witness": cond.witness, "margin": cond.margin, "method": cond.method}


def _parse_floats(text, count, flag):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise InputError(f"{flag}: expected {count} comma-separated numbers, got {text!r}") from None
    if len(vals) != count:
        raise InputError(f"{flag}: expected {count} comma-separated numbers, got {text!r}")
    return vals


def _parse_J(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--J: expected comma-separated indices, got {text!r}") from None


def _square(inst, name, n):
    K = inst.operator(name)
    if K.shape != (n, n):
        raise InputError(f"operator {name!r} must be {n}x{n}, got {K.shape[0]}x{K.shape[1]}")
    return K


def _pair(inst, args):
    FW = inst.family(args.family)
    FV = inst.family(args.family2 or args.family)
    if len(FW) != len(FV):
        raise InputError(f"families {args.family!r} and {args.family2!r} differ in size ({len(FW)} vs {len(FV)})")
    return FW, FV


def _erasure_params(inst, args):
    J = _parse_J(args.J) if args.J is not None else (inst.erasure or {}).get("J")
    C = args.C if args.C is not None else (inst.erasure or {}).get("C")
    if J is None or C is None:
        raise InputError("erasure commands need --J and --C (or an 'erasure' block in the file)")
    return J, C


# -- commands -----------------------------------------------------------------


def cmd_analyze(inst, args):
    F = inst.family(args.family)
    K = _square(inst, args.op, inst.ambient_dim)
    rep = certify_k_fusion_frame(F, K, inst.tol())
    code = EXIT_OK if rep.is_frame else EXIT_REFUTED
    verdict = "k-fusion frame" if rep.is_frame else "not a k-fusion frame"
    if rep.vacuous:
        verdict = "vacuous (K' f = 0 for every f)"
    return code, verdict, {"family": args.family, "operator": args.op, "bounds": _bound_report(rep)}


def cmd_weave(inst, args):
    FW, FV = _pair(inst, args)
    K = _square(inst, args.op, inst.ambient_dim)
    tol = inst.tol()
    if args.mode == "randomized":
        rep = certify_woven_randomized(FW, FV, K, args.samples, args.seed, tol)
        code = EXIT_REFUTED if not rep.woven else EXIT_UNKNOWN
        verdict = "not woven (refuted)" if not rep.woven else "not refuted (randomized)"
    else:
        if len(FW) > DEFAULT_MAX_M:
            raise InputError(
                f"m={len(FW)} exceeds the exhaustive cap of {DEFAULT_MAX_M}; rerun with --mode randomized"
            )
        rep = certify_woven_exhaustive(FW, FV, K, tol)
        code = EXIT_OK if rep.woven else EXIT_REFUTED
        verdict = "woven" if rep.woven else "not woven"
    return code, verdict, {
        "families": [args.family, args.family2 or args.family],
        "operator": args.op,
        "mode": args.mode,
        "weaving": _weaving_report(rep),
    }


def _bound_table(predicted_lower, predicted_upper, certified, tol):
    lower_ok = certified.vacuous or certified.lower_A >= predicted_lower - tol.bound_tol
    upper_ok = certified.upper_B <= predicted_upper + tol.bound_tol
    return {
        "predicted_lower": predicted_lower,
        "certified_lower": certified.lower_A,
        "predicted_upper": predicted_upper,
        "certified_upper": certified.upper_B,
        "lower_holds": lower_ok,
        "upper_holds": upper_ok,
    }, lower_ok and upper_ok


def _hyp(result):
    return [{"name": h.name, "passed": h.passed, "residual": h.residual} for h in result.hypothesis_report]


def cmd_transform(inst, args):
    tol = inst.tol()
    n = inst.ambient_dim
    F = inst.family(args.family)
    if args.sub == "push":
        T = inst.operator(args.T)
        if T.shape[1] != n:
            raise InputError(f"operator {args.T!r} must have {n} columns")
        K = _square(inst, args.op, n)
        if args.family2:
            FV = inst.family(args.family2)
            res = woven_push_forward(F, FV, T, K, tol)
            img = res.image_report
            lower_ok = img.vacuous or img.universal_A >= res.predicted_lower - tol.bound_tol
            upper_ok = img.universal_B <= res.predicted_upper + tol.bound_tol
            ok = res.hypotheses_hold and lower_ok and upper_ok
            body = {
                "hypothesis_report": _hyp(res.first) + _hyp(res.second),
                "input_weaving": _weaving_report(res.input_report),
                "image_weaving": _weaving_report(img),
                "table": {
                    "predicted_lower": res.predicted_lower,
                    "certified_lower": img.universal_A,
                    "predicted_upper": res.predicted_upper,
                    "certified_upper": img.universal_B,
                    "lower_holds": lower_ok,
                    "upper_holds": upper_ok,
                },
            }
        else:
            res = push_forward(F, T, K, tol)
            cert = certify_k_fusion_frame(res.family, res.operator, tol)
            table, bounds_ok = _bound_table(res.predicted_lower, res.predicted_upper, cert, tol)
            ok = res.hypotheses_hold and bounds_ok
            body = {"hypothesis_report": _hyp(res), "degenerate": list(res.degenerate), "table": table}
    elif args.sub == "pull":
        T = inst.operator(args.T)
        if T.shape[1] != n:
            raise InputError(f"operator {args.T!r} must have {n} columns")
        K = _square(inst, args.op, T.shape[0])
        F_img = inst.family(args.family2) if args.family2 else image_family(F, T, tol)[0]
        try:
            res = pull_back(F_img, T, K, F, tol)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        cert = certify_k_fusion_frame(res.family, res.operator, tol)
        table, bounds_ok = _bound_table(res.predicted_lower, res.predicted_upper, cert, tol)
        ok = res.hypotheses_hold and bounds_ok
        body = {"hypothesis_report": _hyp(res), "table": table}
    else:
        K = _square(inst, args.op, n)
        if args.family2:
            FV = inst.family(args.family2)
            fusion = certify_woven_exhaustive(F, FV, np.eye(n), tol)
            first = k_image_family(F, K, tol, lower=fusion.universal_A)
            second = k_image_family(FV, K, tol, lower=fusion.universal_A)
            img = certify_woven_exhaustive(first.family, second.family, K, tol)
            lower_ok = img.vacuous or img.universal_A >= first.predicted_lower - tol.bound_tol
            ok = fusion.woven and lower_ok
            body = {
                "degenerate": [list(first.degenerate), list(second.degenerate)],
                "fusion_weaving": _weaving_report(fusion),
                "image_weaving": _weaving_report(img),
                "table": {
                    "predicted_lower": first.predicted_lower,
                    "certified_lower": img.universal_A,
                    "lower_holds": lower_ok,
                },
            }
        else:
            res = k_image_family(F, K, tol)
            cert = certify_k_fusion_frame(res.family, res.operator, tol)
            table, ok = _bound_table(res.predicted_lower, res.predicted_upper, cert, tol)
            body = {"degenerate": list(res.degenerate), "table": table}
    body["subcommand"] = args.sub
    return (EXIT_OK if ok else EXIT_REFUTED), ("predictions hold" if ok else "prediction or hypothesis failed"), body


def _overall(condition_status, conclusion_holds):
    if not conclusion_holds:
        return "refuted"
    return "certified" if condition_status == Status.CERTIFIED else "unknown"


def _erasure_body(rep):
    return {
        "status": rep.status.value,
        "reason": rep.reason,
        "hypotheses": rep.hypotheses,
        "J": list(rep.J),
        "C": rep.C,
        "A": rep.A,
        "threshold": rep.threshold,
        "condition": _verdict(rep.condition),
        "predicted_lower": rep.predicted_lower,
        "derived_lower": rep.derived_lower,
        "reduced_weaving": _weaving_report(rep.reduced),
        "upper_limit": rep.upper_limit,
        "margin": rep.margin,
        "derived_margin": rep.derived_margin,
        "upper_margin": rep.upper_margin,
    }


def cmd_stability(inst, args):
    tol = inst.tol()
    n = inst.ambient_dim
    FW, FV = _pair(inst, args)
    K = _square(inst, args.op, n)
    if args.sub == "perturb":
        T = _square(inst, args.T, n)
        a = _parse_floats(args.alpha or "0.5,0.5,0.5", 3, "--alpha")
        try:
            p = PerturbationParams(*a)
        except ValueError as exc:
            raise InputError(f"--alpha: {exc}") from None
        rep = check_perturbation_theorem(FW, FV, T, K, p, tol, samples=args.samples, seed=args.seed)
        if rep.status is Status.SKIPPED:
            verdict = "refuted" if rep.condition.status is Status.REFUTED else "unknown"
        else:
            verdict = _overall(rep.condition.status, rep.holds)
        body = {
            "status": rep.status.value,
            "reason": rep.reason,
            "condition": _verdict(rep.condition),
            "A": rep.A,
            "k_pinv_norm": rep.k_pinv_norm,
            "predicted_lower": rep.predicted_lower,
            "min_margin": rep.min_margin,
            "worst_sigma": None if rep.worst_mask is None else [i for i in range(len(FW)) if rep.worst_mask >> i & 1],
            "weaving": _weaving_report(rep.weaving),
        }
    elif args.sub == "perturb-corollary":
        T = _square(inst, args.T, n)
        a1, a2 = _parse_floats(args.alpha or "0.5,0.5", 2, "--alpha")
        try:
            rep = check_perturbation_corollary(FW, FV, T, K, a1, a2, tol, samples=args.samples, seed=args.seed)
        except ValueError as exc:
            raise InputError(f"--alpha: {exc}") from None
        if rep.status is Status.SKIPPED:
            verdict = "refuted"
        else:
            verdict = _overall(rep.condition.status, rep.agree)
        body = {
            "status": rep.status.value,
            "reason": rep.reason,
            "condition": _verdict(rep.condition),
            "woven_T": rep.woven_T,
            "woven_K": rep.woven_K,
            "weaving_T": _weaving_report(rep.report_T),
            "weaving_K": _weaving_report(rep.report_K),
        }
    else:
        J, C = _erasure_params(inst, args)
        try:
            if args.sub == "erase":
                T = inst.operator(args.T)
                if T.shape[1] != n:
                    raise InputError(f"operator {args.T!r} must have {n} columns")
                rep = check_erasure_theorem(FW, FV, T, K, J, C, tol)
            elif args.sub == "erase-corollary":
                rep = check_erasure_corollary(FW, FV, K, J, C, tol)
            else:
                T = inst.operator(args.T)
                if T.shape[1] != n:
                    raise InputError(f"operator {args.T!r} must have {n} columns")
                rep = check_erasure_pullback(FW, FV, T, _square(inst, args.op, T.shape[0]), J, C, tol)
        except InputError:
            raise
        except ValueError as exc:
            raise InputError(str(exc)) from None
        verdict = "certified" if rep.status is Status.CERTIFIED else "refuted"
        body = _erasure_body(rep)
    body["subcommand"] = args.sub
    return _STATUS_EXIT[verdict], verdict, body


COMMANDS = {"analyze": cmd_analyze, "weave": cmd_weave, "transform": cmd_transform, "stability": cmd_stability}


# -- output -------------------------------------------------------------------


def _render_text(obj, indent=0):
    pad = "  " * indent
    lines = []
    for key, value in obj.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_render_text(value, indent + 1))
        elif isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            lines.append(f"{pad}{key}:")
            for item in value:
                lines.extend(_render_text(item, indent + 1))
                lines.append("")
        else:
            lines.append(f"{pad}{key}: {json.dumps(value)}")
    return lines


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--file", required=False, help="instance JSON file")
    common.add_argument("--family", default="W")
    common.add_argument("--family2", default=None)
    common.add_argument("--op", default="I", help="operator K (default: identity)")
    common.add_argument("--T", dest="T", default="T", help="operator T for transforms and stability")
    common.add_argument("--mode", choices=("exhaustive", "randomized"), default="exhaustive")
    common.add_argument("--samples", type=int, default=4096)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--J", default=None, help="comma-separated erased indices")
    common.add_argument("--C", type=float, default=None)
    common.add_argument("--alpha", default=None, help="a1,a2,a3 (perturb) or a1,a2 (perturb-corollary)")
    common.add_argument("--out", default=None)
    common.add_argument("--json", action="store_true", help="emit JSON instead of text")
    common.add_argument("--no-timing", action="store_true", help="omit wall-clock timing for byte-stable output")

    parser = argparse.ArgumentParser(prog="wkf", description="Woven K-fusion frame certification.")
    parser.add_argument("--version", action="version", version=f"wkf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="optimal K-fusion frame bounds of one family")
    sub.add_parser("weave", parents=[common], help="wovenness of a pair of families")
    tr = sub.add_parser("transform", parents=[common], help="push-forward, pull-back and K-image constructions")
    tr.add_argument("sub", choices=("push", "pull", "kimage"))
    st = sub.add_parser("stability", parents=[common], help="perturbation and erasure checks")
    st.add_argument("sub", choices=("perturb", "perturb-corollary", "erase", "erase-corollary", "erase-pullback"))
    gen = sub.add_parser("generate", help="write a seeded random instance file")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--dims", type=int, default=1)
    gen.add_argument("--kind", choices=KINDS, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=None)
    return parser


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if args.command == "generate":
            inst = generate(args.kind, args.n, args.m, args.dims, args.seed)
            _emit(serialize_instance(inst), args.out)
            return EXIT_OK
        if not args.file:
            raise InputError("--file is required")
        try:
            raw = Path(args.file).read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {args.file}: {exc.strerror}") from None
        inst = load_instance(raw.decode("utf-8"))
        if args.seed is None:
            args.seed = inst.seed if inst.seed is not None else 0
        default_workers()
        start = time.perf_counter()
        code, verdict, body = COMMANDS[args.command](inst, args)
        elapsed = time.perf_counter() - start
    except InputError as exc:
        print(f"wkf: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"wkf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"wkf: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    cert = {
        "tool": "wkf",
        "version": __version__,
        "command": ["wkf"] + argv,
        "input_digest": "sha256:" + hashlib.sha256(raw).hexdigest(),
        "seed": args.seed,
        "tolerances": vars(inst.tol()),
        "verdict": verdict,
        "exit_code": code,
        "result": body,
    }
    if not args.no_timing:
        cert["timing"] = {"seconds": elapsed}
    cert = _jsonable(cert)
    if args.json:
        text = json.dumps(cert, indent=2) + "\n"
    else:
        text = "\n".join(_render_text(cert)) + "\n"
    _emit(text, args.out)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
