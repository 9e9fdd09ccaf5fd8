"""Command-line entry point: ``klods <subcommand> ...``.

Results go to ``--out`` (or stdout) as JSON. Any failure exits nonzero and
prints one line of JSON to stderr: ``{"error": <type>, "message": <text>}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from klods.baselines import entropy_estimate, latent_typicality_score, tytest_score
from klods.decomposition import SplitConfig
from klods.detector import DetectorConfig, score_group
from klods.diffeo import DensityModel, density_from_dict, map_from_dict, verify_preservation
from klods.errors import KlodsError
from klods.evaluation import ExperimentConfig, SyntheticSource, run_experiment
from klods.gaussian import RepresentationSet
from klods.io import (
    load_matrix,
    load_prior,
    load_vector,
    read_array,
    read_json,
    save_matrix,
    write_npy,
    write_report,
)
from klods.lambertw import evaluate_bound
from klods.manipulations import adjust_contrast, rescale_to_typical_set
from klods.normality import DEFAULT_CAP, DEFAULT_NULL_SIMS, generalized_sw_multivariate, subsample_for_test
from klods.synthetic import generate, spec_from_dict

EXIT_ERROR = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(doc, out=None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _batches(reps: RepresentationSet, m: int):
    """Consecutive row blocks of size ``m``; a short tail is dropped."""
    n = reps.n // m
    if n == 0:
        raise KlodsError(f"{reps.n} rows cannot fill a batch of {m}")
    return [reps.take(np.arange(i * m, (i + 1) * m)) for i in range(n)]


def _detector(args, prior) -> DetectorConfig:
    return DetectorConfig(prior, SplitConfig.parse(args.split), args.ridge, args.threshold, args.criterion)


def _source(text: str, n: int, header: bool):
    if text.startswith("synth:"):
        return SyntheticSource(spec_from_dict(read_json(text[len("synth:"):])), n)
    return load_matrix(text, header=header) if header else text


# ---------------------------------------------------------------- subcommands


def cmd_score(args):
    prior = load_prior(args.prior)
    config = _detector(args, prior)
    reps = load_matrix(args.reps, header=args.header)
    groups = []
    for i, batch in enumerate(_batches(reps, args.batch)):
        verdict = score_group(batch, config)
        groups.append({"index": i, "score": verdict.score, "is_ood": verdict.is_ood, "warnings": list(verdict.warnings)})
    doc = {
        "criterion": config.criterion,
        "split": str(config.split),
        "batch": args.batch,
        "threshold": args.threshold,
        "groups": groups,
    }
    _emit(doc, args.out)


def cmd_eval(args):
    prior = load_prior(args.prior)
    config = ExperimentConfig(
        _detector(args, prior),
        _source(args.id, args.id_n, args.header),
        _source(args.ood, args.ood_n, args.header),
        batch_size=args.batch,
        repetitions=args.reps_count,
        seed=args.seed,
        method=args.method,
    )
    report = run_experiment(config)
    json_path, csv_path = write_report(report, args.out)
    _emit({"json": json_path, "csv": csv_path, "auroc_mean": report.auroc_mean, "aupr_mean": report.aupr_mean})


def cmd_tytest(args):
    if args.latent:
        if not (args.reps and args.prior):
            raise UsageError("--latent needs --reps and --prior")
        prior = load_prior(args.prior)
        reps = load_matrix(args.reps, header=args.header)
        scores = [latent_typicality_score(b, prior) for b in _batches(reps, args.batch)]
        doc = {"mode": "latent", "batch": args.batch, "scores": scores}
    else:
        if not (args.train_nll and args.batch_nll):
            raise UsageError("need --train-nll and --batch-nll, or --latent")
        h_hat = entropy_estimate(load_vector(args.train_nll, header=args.header))
        scores = [tytest_score(load_vector(p, header=args.header), h_hat) for p in args.batch_nll]
        doc = {"mode": "nll", "entropy_estimate": h_hat, "batches": args.batch_nll, "scores": scores}
    _emit(doc, args.out)


def cmd_bounds(args):
    _emit(evaluate_bound(args.thm, eps=args.eps, eps2=args.eps2, m=args.m).to_dict(), args.out)


def cmd_normality(args):
    reps = subsample_for_test(load_matrix(args.reps, header=args.header), cap=args.cap, seed=args.seed)
    _emit(generalized_sw_multivariate(reps, n_null_sims=args.null_sims, seed=args.seed).to_dict(), args.out)


def cmd_attack(args):
    if args.m1 == args.m2:
        raise UsageError("choose exactly one of --m1 or --m2")
    if args.m1:
        if not (args.reps and args.prior):
            raise UsageError("--m1 needs --reps and --prior")
        out = rescale_to_typical_set(load_matrix(args.reps, header=args.header), load_prior(args.prior))
        save_matrix(args.out, out)
        n = out.n
    else:
        if not args.images or args.factor is None:
            raise UsageError("--m2 needs --images and --factor")
        images = read_array(args.images)
        if images.ndim != 4:
            raise KlodsError(f"image file must hold an (N, H, W, C) array, got shape {images.shape}")
        out = adjust_contrast(images, args.factor)
        write_npy(args.out, out)
        n = out.shape[0]
    _emit({"attack": "m1" if args.m1 else "m2", "rows": n, "out": args.out})


def cmd_synth(args):
    spec = spec_from_dict(read_json(args.spec))
    data = generate(spec, args.n)
    save_matrix(args.out, data)
    _emit({"rows": data.n, "dim": data.dim, "out": args.out})


def cmd_diffeo_check(args):
    p = density_from_dict(read_json(args.p))
    q = density_from_dict(read_json(args.q))
    maps = map_from_dict(read_json(args.map))
    report = verify_preservation(p, q, maps, args.kind, args.samples, args.seed)
    _emit(report.to_dict(), args.out)


# ---------------------------------------------------------------- parser


def _add_detector_flags(p):
    p.add_argument("--prior", required=True)
    p.add_argument("--split", default="none", help="none | s1 | s2 | contiguous:K")
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--criterion", default="klods", help="klods | klod | correlation_std")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="klods", description="KL-divergence OOD detection on latent representations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--header", action="store_true", help="skip the first CSV row")
        return p

    p = command("score", cmd_score, "score consecutive batches of a representation file")
    p.add_argument("--reps", required=True)
    _add_detector_flags(p)
    p.add_argument("--out", required=True)

    p = command("eval", cmd_eval, "AUROC/AUPR experiment between ID and OOD sources")
    p.add_argument("--id", required=True, help="FILE or synth:SPECFILE")
    p.add_argument("--ood", required=True, help="FILE or synth:SPECFILE")
    p.add_argument("--id-n", type=int, default=2000, help="rows drawn from a synth: source")
    p.add_argument("--ood-n", type=int, default=2000, help="rows drawn from a synth: source")
    _add_detector_flags(p)
    p.add_argument("--method", default="detector", choices=["detector", "latent_typicality"])
    p.add_argument("--reps-count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report base path; .json and .csv are written")

    p = command("tytest", cmd_tytest, "typicality test on NLLs or on latents")
    p.add_argument("--train-nll")
    p.add_argument("--batch-nll", nargs="+")
    p.add_argument("--latent", action="store_true")
    p.add_argument("--reps")
    p.add_argument("--prior")
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--out")

    p = command("bounds", cmd_bounds, "Lambert-W divergence bounds")
    p.add_argument("--thm", type=int, required=True, choices=[2, 3, 4])
    p.add_argument("--eps", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--out")

    p = command("normality", cmd_normality, "generalized Shapiro-Wilk test")
    p.add_argument("--reps", required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--null-sims", type=int, default=DEFAULT_NULL_SIMS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = command("attack", cmd_attack, "likelihood manipulations M1 and M2")
    p.add_argument("--m1", action="store_true", help="rescale latents to the typical shell")
    p.add_argument("--m2", action="store_true", help="contrast adjustment of images")
    p.add_argument("--reps")
    p.add_argument("--prior")
    p.add_argument("--images")
    p.add_argument("--factor", type=float)
    p.add_argument("--out", required=True)

    p = command("synth", cmd_synth, "draw synthetic representations")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)

    p = command("diffeo-check", cmd_diffeo_check, "divergence before and after a diffeomorphism")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--kind", default="kl", choices=["kl", "js", "h2", "tv"])
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    line = json.dumps({"error": kind, "message": " ".join(str(message).split())})
    sys.stderr.write(line + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as exc:
        return _fail("UsageError", exc, EXIT_USAGE)
    except KlodsError as exc:
        return _fail(type(exc).__name__, exc, EXIT_ERROR)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return _fail(type(exc).__name__, exc, EXIT_ERROR)
    return 0


if __name__ == "__main__":
    sys.exit(main())
