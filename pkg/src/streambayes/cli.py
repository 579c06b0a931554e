"""Command-line front end: ``streambayes {learn,infer,filter,sample}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import errors
from .core import ancestral_samples
from .datastream import Attributes, DataInstance, open_arff, open_dynamic_arff, write_arff
from .dynamic import (
    DBN_FORMAT,
    BeliefState,
    DynamicEvidence,
    dbn_from_dict,
    ff_filter_step,
    filtered_posterior,
    predictive_posterior,
    serialize_dbn,
)
from .inference import InferenceConfig, PointMass, importance_sampling_infer, posterior_line, vmp_infer
from .learning import LearningConfig, SVIConfig
from .serialization import network_from_dict, parse_document, serialize_model
from .zoo import is_dynamic_template, template_from_id

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

USAGE_ERRORS = (errors.ConfigError, errors.ConjugacyError)
NUMERIC_ERRORS = (errors.NumericalError, errors.UndefinedVarianceMean, errors.TooLarge)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="streambayes", description="Streaming Bayesian network learning and inference.")
    sub = p.add_subparsers(dest="command", metavar="{learn,infer,filter,sample}")
    sub.required = True

    lp = sub.add_parser("learn", help="learn a template's parameters from an ARFF stream")
    lp.add_argument("--model", required=True, help="template id, e.g. gmm:k=2, kf:hidden=2, custom:<file>")
    lp.add_argument("--data", required=True, help="ARFF file ('-' for stdin)")
    lp.add_argument("--out", required=True, help="model file to write ('-' for stdout)")
    lp.add_argument("--batch-size", type=int, default=1000)
    lp.add_argument("--workers", type=int, default=1)
    lp.add_argument("--svi", metavar="KAPPA,TAU", help="use stochastic variational inference")
    lp.add_argument("--total-n", type=int, help="stream size assumed by SVI (default 10 * batch size)")
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--log", help="per-batch ELBO log (default: <out>.log)")

    ip = sub.add_parser("infer", help="posterior marginals given evidence")
    ip.add_argument("--model", required=True)
    ip.add_argument("--evidence", default="", help="name=value,...")
    ip.add_argument("--target", required=True, help="name,...")
    ip.add_argument("--algo", choices=["vmp", "is"], default="vmp")
    ip.add_argument("--samples", type=int, default=10_000)
    ip.add_argument("--seed", type=int, default=0)
    ip.add_argument("--format", choices=["text", "json"], default="text")

    fp = sub.add_parser("filter", help="filter a dynamic ARFF stream through a dynamic model")
    fp.add_argument("--model", required=True)
    fp.add_argument("--data", required=True)
    fp.add_argument("--target", required=True)
    fp.add_argument("--horizon", type=int, default=0)
    fp.add_argument("--algo", choices=["vmp", "is"], default="vmp")
    fp.add_argument("--samples", type=int, default=10_000)
    fp.add_argument("--seed", type=int, default=0)
    fp.add_argument("--format", choices=["text", "json"], default="text")

    sp = sub.add_parser("sample", help="draw ancestral samples into an ARFF file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--all", action="store_true", help="include latent variables")
    return p


# -- helpers -------------------------------------------------------------------


def _check_input(path):
    if path != "-" and not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")


def _check_output(path):
    if path == "-":
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise FileNotFoundError(f"cannot write to {path}")


def _read_model(path):
    _check_input(path)
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    doc = parse_document(data)
    if isinstance(doc, dict) and doc.get("format") == DBN_FORMAT:
        return dbn_from_dict(doc)
    return network_from_dict(doc)


class _Output:
    """Write-to-temp-then-rename; nothing is left behind on failure."""

    def __init__(self, path):
        self.path = path
        self.tmp = None if path == "-" else f"{path}.partial-{os.getpid()}"

    def __enter__(self):
        if self.tmp is None:
            return sys.stdout
        self.fh = open(self.tmp, "w", encoding="utf-8", newline="\n")
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        if self.tmp is None:
            sys.stdout.flush()
            return False
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            Path(self.tmp).unlink(missing_ok=True)
        return False


def _parse_pairs(text):
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"evidence entries look like name=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _typed_evidence(bn, raw):
    ev = {}
    for k, v in raw.items():
        var = bn.variable(k)
        if var.is_discrete:
            ev[k] = v
        else:
            try:
                ev[k] = float(v)
            except ValueError:
                raise errors.AttributeTypeError(f"{k!r} is real-valued, got {v!r}") from None
    return ev


def _dist_json(dist):
    if isinstance(dist, PointMass):
        return {"family": "PointMass", "value": dist.value}
    if hasattr(dist, "probs"):
        return {"family": "Multinomial", "probabilities": [float(x) for x in dist.probs]}
    return {"family": "Normal", "mean": float(dist.mean), "variance": float(dist.variance)}


# -- subcommands -------------------------------------------------------------------


def cmd_learn(args):
    _check_input(args.data)
    _check_output(args.out)
    log_path = args.log or (None if args.out == "-" else args.out + ".log")
    if log_path:
        _check_output(log_path)
    if args.batch_size < 1 or args.workers < 1:
        raise UsageError("--batch-size and --workers must be positive")
    svi = None
    if args.svi:
        try:
            kappa, tau = (float(x) for x in args.svi.split(","))
        except ValueError:
            raise UsageError("--svi expects KAPPA,TAU") from None
        svi = SVIConfig(kappa, tau)
    config = LearningConfig(
        batch_size=args.batch_size, worker_count=args.workers, svi=svi, seed=args.seed, total_n=args.total_n
    )
    dynamic = is_dynamic_template(args.model)
    source = sys.stdin.buffer if args.data == "-" else args.data
    stream = open_dynamic_arff(source) if dynamic else open_arff(source)
    with stream:
        model = template_from_id(args.model, stream.attributes, config)
        for t, batch in enumerate(stream.batches(args.batch_size)):
            if dynamic:
                model.update(batch)
            elif svi is not None:
                model.svi_update(batch, t)
            else:
                model.update_parallel(batch, args.workers)
    if dynamic:
        doc = serialize_dbn(model.point_estimate(), {"template": args.model, "posterior": model.posterior_dict()})
    else:
        doc = serialize_model(
            model.point_estimate(), {"template": args.model, "posterior": model.params.posterior_dict()}
        )
    with _Output(args.out) as fh:
        fh.write(doc.decode("utf-8"))
    if log_path:
        with _Output(log_path) as fh:
            fh.write("batch_index\tinstance_count\telbo\n")
            for line in model.log_lines():
                fh.write(line + "\n")
    return EXIT_OK


def cmd_infer(args):
    model = _read_model(args.model)
    if not hasattr(model, "dag"):
        raise errors.SchemaError("infer needs a static model; use 'filter' for dynamic models")
    raw = _parse_pairs(args.evidence)
    ev = _typed_evidence(model, raw)
    targets = [t.strip() for t in args.target.split(",") if t.strip()]
    for t in targets:
        model.variable(t)
    cfg = InferenceConfig(seed=args.seed, sample_count=max(args.samples, 1))
    run = vmp_infer if args.algo == "vmp" else importance_sampling_infer
    report = run(model, ev, targets, cfg)
    if args.format == "json":
        doc = {"evidence": raw, "posteriors": {t: _dist_json(report.posteriors[t]) for t in targets}}
        if report.effective_sample_size is not None:
            doc["effective_sample_size"] = report.effective_sample_size
        print(json.dumps(doc))
    else:
        for t in targets:
            print(posterior_line(t, raw, report.posteriors[t]))
    return EXIT_OK


def cmd_filter(args):
    model = _read_model(args.model)
    _check_input(args.data)
    if hasattr(model, "dag"):
        raise errors.SchemaError("filter needs a dynamic model")
    if args.target not in model.slice_names:
        raise errors.UnknownVariable(args.target)
    if args.horizon < 0:
        raise UsageError("--horizon must be >= 0")
    cfg = InferenceConfig(seed=args.seed, sample_count=max(args.samples, 1))
    source = sys.stdin.buffer if args.data == "-" else args.data
    states = {}
    with open_dynamic_arff(source) as stream:
        for inst in stream:
            state = states.get(inst.sequence_id, BeliefState(-1, {}))
            ev = DynamicEvidence.from_instance(inst)
            ev = DynamicEvidence(ev.time_id, {k: v for k, v in ev.assignment.items() if k in model.slice_names})
            state = ff_filter_step(model, state, ev, args.algo, cfg)
            states[inst.sequence_id] = state
            post = filtered_posterior(state, args.target)
            pred = predictive_posterior(model, state, args.target, args.horizon, args.algo, cfg) if args.horizon else None
            if args.format == "json":
                doc = {"sequence_id": inst.sequence_id, "time": state.time, "filtered": _dist_json(post)}
                if pred is not None:
                    doc["horizon"] = args.horizon
                    doc["predictive"] = _dist_json(pred)
                print(json.dumps(doc))
            else:
                print(f"t={state.time} {post!r}")
                if pred is not None:
                    print(f"t={state.time}+{args.horizon} {pred!r}")
    return EXIT_OK


def cmd_sample(args):
    model = _read_model(args.model)
    _check_output(args.out)
    if not hasattr(model, "dag"):
        raise errors.SchemaError("sample needs a static model")
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    keep = [v for v in model.variables if args.all or v.role != "latent"]
    attrs = Attributes.from_spaces([(v.name, v.space) for v in keep], relation="samples")
    X = ancestral_samples(model, args.n, args.seed) if args.n else np.zeros((0, len(model.variables)))
    cols = [v.id for v in keep]
    instances = (DataInstance(attrs, row[cols].tolist()) for row in X)
    with _Output(args.out) as fh:
        write_arff(attrs, instances, fh, relation="samples")
    return EXIT_OK


COMMANDS = {"learn": cmd_learn, "infer": cmd_infer, "filter": cmd_filter, "sample": cmd_sample}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"streambayes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"streambayes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except USAGE_ERRORS as exc:
        parser.print_usage(sys.stderr)
        print(f"streambayes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"streambayes: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (errors.StreamBayesError, OSError, KeyError, ValueError, TypeError) as exc:
        print(f"streambayes: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
