"""Command-line entry point.

Exit codes: 0 success, 1 domain error (one-line `error:` prefix on stderr),
2 usage error (argparse). Configuration precedence: flags, then
`SHIFTSCOPE_*` environment, then `shiftscope.toml` in the working
directory, then defaults. All stochastic subcommands derive their
randomness from one root seed so repeated invocations are bit-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import urllib.request
from dataclasses import asdict, dataclass

import numpy as np

try:
    import tomllib
except ImportError:  # 3.10
    import tomli as tomllib

from . import adaptation, learners, stattests
from .datamodel import (Causality, DataFormatError, Dataset, DomainPair,
                        LabelSpace, TriState, WeightKind, WeightVector,
                        empirical_prior, read_dataset_csv, write_dataset_csv)
from .density import fit_kde, js_divergence, kl_divergence, mmd, renyi_divergence
from .engine import (KNOWN_CLAIMS, Diagnosis, Finalize, Proceed,
                     ProvideAssertion, ProvideCausality, ProvideDataset,
                     RunTest, advance_session, new_session)

__all__ = ["main", "CliConfig"]

_CONFIG_KEYS = ("data_dir", "level", "seed", "format", "verbosity")


@dataclass(frozen=True)
class CliConfig:
    data_dir: str = "."
    level: float = 0.05
    seed: int = 0
    format: str = "text"      # text | json
    verbosity: str = "info"


def _load_config(args) -> CliConfig:
    values = asdict(CliConfig())
    toml_path = os.path.join(os.getcwd(), "shiftscope.toml")
    if os.path.exists(toml_path):
        with open(toml_path, "rb") as fh:
            raw = tomllib.load(fh)
        for key in _CONFIG_KEYS:
            if key in raw:
                values[key] = raw[key]
    if os.environ.get("SHIFTSCOPE_DATA_DIR"):
        values["data_dir"] = os.environ["SHIFTSCOPE_DATA_DIR"]
    if os.environ.get("SHIFTSCOPE_SEED"):
        try:
            values["seed"] = int(os.environ["SHIFTSCOPE_SEED"])
        except ValueError:
            raise ValueError("SHIFTSCOPE_SEED must be an integer") from None
    if getattr(args, "data_dir", None) is not None:
        values["data_dir"] = args.data_dir
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    if getattr(args, "level", None) is not None:
        values["level"] = args.level
    if getattr(args, "json", False):
        values["format"] = "json"
    values["level"] = float(values["level"])
    values["seed"] = int(values["seed"])
    if not 0.0 < values["level"] < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if values["format"] not in ("text", "json"):
        raise ValueError("format must be 'text' or 'json'")
    return CliConfig(**values)


# --- light CSV access for column-addressed commands --------------------------


def _read_table(path):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataFormatError("empty file", row=1)
    return [h.strip() for h in rows[0]], rows[1:]


def _numeric_column(path, column: str) -> np.ndarray:
    header, rows = _read_table(path)
    if column not in header:
        raise ValueError(
            f"column {column!r} not found in {path} (available: {', '.join(header)})")
    j = header.index(column)
    out = []
    for i, rec in enumerate(rows, start=2):
        tok = rec[j].strip() if j < len(rec) else ""
        try:
            out.append(float(tok))
        except ValueError:
            raise DataFormatError(f"could not parse {tok!r} as a number",
                                  row=i, column=j + 1) from None
    if not out:
        raise DataFormatError("no data rows", row=2)
    return np.asarray(out)


def _feature_matrix(path) -> np.ndarray:
    header, rows = _read_table(path)
    d = len(header) - (1 if header and header[-1] == "label" else 0)
    if d < 1:
        raise DataFormatError("no feature columns in header", row=1)
    out = []
    for i, rec in enumerate(rows, start=2):
        vals = []
        for j in range(d):
            tok = rec[j].strip() if j < len(rec) else ""
            try:
                vals.append(float(tok))
            except ValueError:
                raise DataFormatError(f"could not parse {tok!r} as a number",
                                      row=i, column=j + 1) from None
        out.append(vals)
    if not out:
        raise DataFormatError("no data rows", row=2)
    return np.asarray(out)


def _label_column(path) -> tuple:
    header, rows = _read_table(path)
    if "label" not in header:
        raise ValueError(f"no label column in {path}")
    j = header.index("label")
    labels = []
    for i, rec in enumerate(rows, start=2):
        tok = rec[j].strip() if j < len(rec) else ""
        if not tok:
            raise DataFormatError("empty label", row=i, column=j + 1)
        labels.append(tok)
    return tuple(labels)


def _univariate(path, column):
    if column is not None:
        return _numeric_column(path, column)
    x = _feature_matrix(path)
    if x.shape[1] != 1:
        raise ValueError(
            f"{path} has {x.shape[1]} feature columns; pick one with --column")
    return x[:, 0]


def _print(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- subcommand handlers -------------------------------------------------------


def _cmd_divergence(args, cfg: CliConfig) -> int:
    if args.measure == "mmd":
        est = mmd(_feature_matrix(args.source), _feature_matrix(args.target),
                  gamma=args.gamma)
        _print(est.to_dict())
        return 0
    x = _univariate(args.source, args.column)
    y = _univariate(args.target, args.column)
    p, q = fit_kde(x), fit_kde(y)
    if args.measure == "kl":
        est = kl_divergence(p, q)
    elif args.measure == "js":
        est = js_divergence(p, q)
    else:
        if args.alpha is None:
            raise ValueError("renyi needs --alpha")
        est = renyi_divergence(p, q, alpha=args.alpha)
    _print(est.to_dict())
    return 0


def _cmd_test(args, cfg: CliConfig) -> int:
    if args.kind == "ks":
        result = stattests.ks_two_sample(_univariate(args.source, args.column),
                                         _univariate(args.target, args.column))
    elif args.kind == "label":
        src, tgt = _label_column(args.source), _label_column(args.target)
        space = LabelSpace(tuple(dict.fromkeys(src + tgt)))
        result = stattests.label_shift_test(src, tgt, space)
    else:
        result = stattests.mmd_permutation_test(
            _feature_matrix(args.source), _feature_matrix(args.target),
            permutations=args.permutations, seed=cfg.seed)
    _print(result.to_dict())
    return 0


def _write_weights(path, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["weight"])
        for v in values:
            w.writerow([repr(float(v))])


def _cmd_adapt(args, cfg: CliConfig) -> int:
    source = read_dataset_csv(args.source)
    target = read_dataset_csv(args.target)
    if args.kind == "prior":
        model = learners.load_model(args.model)
        posteriors = learners.predict_posterior(model, target)
        prior = empirical_prior(source, model.label_space)
        result = adaptation.em_prior_adjust(posteriors, prior,
                                            max_iter=args.max_iter, tol=args.tol)
        if args.weights_out:
            per_class = result.class_weights.values
            per_sample = [per_class[model.label_space.index(l)]
                          for l in source.labels]
            _write_weights(args.weights_out, per_sample)
        # full per-iteration trajectories stay a library affair
        d = result.to_dict()
        d["log_likelihood"] = d.pop("log_likelihoods")[-1]
        del d["trajectory"]
        _print(d)
        return 0
    result = adaptation.kernel_mean_matching(
        source.features, target.features, gamma=args.gamma,
        upper_bound=args.upper_bound,
        epsilon=args.epsilon)
    if args.weights_out:
        _write_weights(args.weights_out, result.weights.values)
    d = result.to_dict()
    d["objective"] = d.pop("objective_trajectory")[-1]
    _print(d)
    return 0


_KIND_MAP = {"logistic": "logistic", "linear-svm": "linear_svm",
             "rbf-svm": "rbf_svm"}


def _cmd_train(args, cfg: CliConfig) -> int:
    ds = read_dataset_csv(args.data)
    weights = None
    if args.weights:
        values = _numeric_column(args.weights, "weight")
        weights = WeightVector(WeightKind.PER_SAMPLE, values)
    model = learners.train(ds, _KIND_MAP[args.kind], sample_weights=weights,
                           seed=cfg.seed)
    learners.save_model(model, args.out)
    _print({"model": args.out, "kind": _KIND_MAP[args.kind],
            "n_train": ds.n, "seed": cfg.seed})
    return 0


def _cmd_eval(args, cfg: CliConfig) -> int:
    model = learners.load_model(args.model)
    report = learners.evaluate(model, read_dataset_csv(args.data))
    if cfg.format == "json":
        _print(report.to_dict())
        return 0
    labels = model.label_space.labels
    print(f"accuracy: {report.accuracy:.4f}  (n={report.n_eval})")
    for i, label in enumerate(labels):
        print(f"  {label}: {report.per_class_accuracy[i]:.4f}")
    return 0


# --- interactive diagnosis -------------------------------------------------------


def _ask(prompt: str) -> str:
    sys.stdout.write(prompt)
    sys.stdout.flush()
    line = sys.stdin.readline()
    if line == "":
        raise ValueError("unexpected end of input")
    return line.strip()


def _render_diagnosis(d: Diagnosis) -> str:
    lines = [
        f"scenario:   {d.scenario.kind.value} shift ({d.scenario.causality.value})",
        f"confidence: {d.confidence}",
        "rationale:",
    ]
    lines += [f"  - {r}" for r in d.rationale]
    lines.append("recommendation:")
    lines.append(f"  {d.recommendation.summary}")
    if d.recommendation.executable_actions:
        lines.append("  executable: " + ", ".join(d.recommendation.executable_actions))
    for c in d.recommendation.caveats:
        lines.append(f"  caveat: {c}")
    for s in d.recommendation.see_also:
        lines.append(f"  see also: {s}")
    lines.append("shift matrix (changes between domains):")
    m = d.shift_matrix.to_dict()
    definitional = set(m.pop("definitional"))
    for key, value in m.items():
        mark = " (definitional)" if key in definitional else ""
        lines.append(f"  {key}: {value}{mark}")
    return "\n".join(lines)


def _cmd_diagnose(args, cfg: CliConfig) -> int:
    state = new_session("cli", level=cfg.level)
    answer = _ask("causality? the direction of the data-generating process "
                  "(XtoY / YtoX / Unknown): ")
    try:
        causality = Causality(answer)
    except ValueError:
        raise ValueError(
            f"unknown causality {answer!r}; expected XtoY, YtoX or Unknown") from None
    state = advance_session(state, ProvideCausality(causality))
    if state.advisory is not None:
        print(state.advisory)
        if cfg.format == "json":
            _print({"advisory": state.advisory, "diagnosis": None})
        return 0
    state = advance_session(state, ProvideDataset(
        "source", read_dataset_csv(args.source, name="source")))
    state = advance_session(state, ProvideDataset(
        "target", read_dataset_csv(args.target, name="target")))

    print("running automatic tests ...")
    state = advance_session(state, RunTest("feature_shift", level=cfg.level))
    feature = state.test_results[-1][1]
    print(f"  feature shift screen: {feature.verdict}")
    if state.target.labels is not None:
        state = advance_session(state, RunTest("label_shift"))
        label = state.test_results[-1][1]
        print(f"  label shift test: p={label.p_value:.4g}")
    state = advance_session(state, RunTest("fit_source_model", seed=cfg.seed))
    print(f"  source model indicator: well_specified="
          f"{state.model_well_specified.value}")
    state = advance_session(state, Proceed())

    print("expert assertions (answer Yes / No / Unknown):")
    for claim in KNOWN_CLAIMS:
        answer = _ask(f"  {claim}? ").strip()
        try:
            value = TriState(answer.capitalize())
        except ValueError:
            raise ValueError(
                f"unknown answer {answer!r}; expected Yes, No or Unknown") from None
        if value is TriState.UNKNOWN:
            continue
        justification = _ask("    justification: ")
        state = advance_session(
            state, ProvideAssertion(claim, value, justification))
    state = advance_session(state, Finalize())
    print()
    print(_render_diagnosis(state.diagnosis))
    if cfg.format == "json":
        _print(state.diagnosis.to_dict())
    return 0


def _cmd_repro(args, cfg: CliConfig) -> int:
    from .repro import run_repro
    report = run_repro(args.target, seed=args.seed,
                       data_dir=cfg.data_dir, out_dir=args.out)
    if cfg.format == "json":
        _print(report)
    else:
        from .repro import _render_lines
        print("\n".join(_render_lines(report)))
    return 0


# --- raw-data ingestion ----------------------------------------------------------

# Clinic files: comma-separated, '?' for missing; we keep age (field 1) and
# serum cholesterol (field 5), binarize the diagnosis field (field 14,
# 0 = no disease, 1-4 = disease present) and drop rows with missing or zero
# cholesterol — the zero entries are placeholders, not measurements.
_HEART_FILES = {"source": "processed.hungarian.data",
                "target": "processed.va.data"}


def _open_raw(origin: str, filename=None):
    if origin.startswith(("http://", "https://")):
        url = origin.rstrip("/") + ("/" + filename if filename else "")
        return urllib.request.urlopen(url).read().decode("utf-8", "replace")
    path = os.path.join(origin, filename) if filename is not None else origin
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        return fh.read()


def _ingest_heart(origin: str, to_dir: str) -> dict:
    os.makedirs(to_dir, exist_ok=True)
    written = {}
    stats = {}
    for role, filename in _HEART_FILES.items():
        raw = _open_raw(origin, filename)
        feats, labels, dropped = [], [], 0
        for line in raw.splitlines():
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            age, chol, num = fields[0], fields[4], fields[13]
            if "?" in (age, chol, num) or float(chol) == 0.0:
                dropped += 1
                continue
            feats.append([float(age), float(chol)])
            labels.append("disease" if float(num) > 0 else "no-disease")
        if not feats:
            raise ValueError(f"no usable rows in {filename}")
        out = os.path.join(to_dir, f"heart_{role}.csv")
        write_dataset_csv(Dataset(np.asarray(feats), tuple(labels),
                                  name=f"heart_{role}"), out)
        written[role] = out
        stats[role] = {"rows": len(feats), "dropped": dropped}
    return {"written": written, "stats": stats,
            "columns": {"x1": "age", "x2": "cholesterol",
                        "label": "disease / no-disease"}}


def _ingest_breast(origin: str, to_dir: str) -> dict:
    # 11 fields: sample id, nine 1-10 cytology features, class (2 benign,
    # 4 malignant). Rows with '?' are dropped.
    os.makedirs(to_dir, exist_ok=True)
    raw = _open_raw(origin, None if os.path.isfile(origin) or
                    origin.startswith(("http://", "https://")) else
                    "breast-cancer-wisconsin.data")
    feats, labels, dropped = [], [], 0
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 11 or "?" in fields:
            dropped += 1
            continue
        feats.append([float(v) for v in fields[1:10]])
        labels.append("malignant" if fields[10] == "4" else "benign")
    if not feats:
        raise ValueError("no usable rows in breast data")
    out = os.path.join(to_dir, "breast.csv")
    write_dataset_csv(Dataset(np.asarray(feats), tuple(labels), name="breast"),
                      out)
    return {"written": {"full": out},
            "stats": {"rows": len(feats), "dropped": dropped},
            "columns": {"x1..x9": "cytology features in file order",
                        "label": "malignant / benign"}}


def _cmd_ingest(args, cfg: CliConfig) -> int:
    to_dir = args.to or cfg.data_dir
    if args.dataset == "heart":
        _print(_ingest_heart(args.origin, to_dir))
    else:
        _print(_ingest_breast(args.origin, to_dir))
    return 0


def _cmd_serve(args, cfg: CliConfig) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(data_dir=args.data_dir or cfg.data_dir, token=args.token)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# --- parser -----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftscope",
        description="domain-shift diagnosis and adaptation toolkit")
    parser.add_argument("--show-config", action="store_true",
                        help="print the resolved configuration and exit")
    parser.add_argument("--data-dir", help="dataset directory")
    parser.add_argument("--seed", type=int, help="root random seed")
    parser.add_argument("--level", type=float, help="significance level")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable output")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("divergence", help="distribution divergence between two samples")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--measure", required=True, choices=["kl", "js", "renyi", "mmd"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--column", help="column name for univariate measures")

    p = sub.add_parser("test", help="two-sample hypothesis tests")
    p.add_argument("kind", choices=["ks", "label", "mmd"])
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--level", type=float, dest="level")
    p.add_argument("--permutations", type=int, default=200)
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--column")

    p = sub.add_parser("adapt", help="estimate adaptation weights")
    asub = p.add_subparsers(dest="kind", required=True)
    ap = asub.add_parser("prior", help="EM target-prior estimation")
    ap.add_argument("--source", required=True)
    ap.add_argument("--target", required=True)
    ap.add_argument("--model", required=True)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--max-iter", type=int, default=1000)
    ap.add_argument("--weights-out")
    ac = asub.add_parser("covariate", help="kernel mean matching weights")
    ac.add_argument("--source", required=True)
    ac.add_argument("--target", required=True)
    ac.add_argument("--gamma", type=float)
    ac.add_argument("--upper-bound", type=float, default=1000.0)
    ac.add_argument("--epsilon", type=float)
    ac.add_argument("--weights-out")

    p = sub.add_parser("train", help="fit a classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", required=True, choices=sorted(_KIND_MAP))
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="per-sample weight CSV (single `weight` column)")
    p.add_argument("--seed", type=int, dest="seed")

    p = sub.add_parser("eval", help="score a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("diagnose", help="interactive scenario questionnaire")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)

    p = sub.add_parser("repro", help="re-run the bundled reference studies")
    p.add_argument("target", choices=["prior-table", "kl-table", "general-benign",
                                      "heart", "breast", "transformation"])
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--out", help="directory for <name>.json / <name>.txt artifacts")

    p = sub.add_parser("ingest", help="normalize raw clinic/cytology files")
    p.add_argument("dataset", choices=["heart", "breast"])
    p.add_argument("--from", dest="origin", required=True,
                   help="source directory, file, or URL base")
    p.add_argument("--to", help="output directory (default: data_dir)")

    p = sub.add_parser("serve", help="run the diagnosis HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--token", required=True)
    return parser


_HANDLERS = {
    "divergence": _cmd_divergence,
    "test": _cmd_test,
    "adapt": _cmd_adapt,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "diagnose": _cmd_diagnose,
    "repro": _cmd_repro,
    "ingest": _cmd_ingest,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.show_config:
            _print(asdict(cfg))
            return 0
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        return _HANDLERS[args.command](args, cfg)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError, KeyError) as exc:
        msg = str(exc) or exc.__class__.__name__
        if isinstance(exc, DataFormatError):
            where = []
            if exc.row is not None:
                where.append(f"row {exc.row}")
            if exc.column is not None:
                where.append(f"column {exc.column}")
            if where:
                msg = f"{msg} ({', '.join(where)})"
        sys.stderr.write(f"error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
