"""Command-line entry points: simulate | train | compare | chart | ingest.

Every option can also be supplied through ``--config FILE``, a flat
``key=value`` text file whose keys mirror the flag names; explicit flags
win over file values.  All commands are deterministic given ``--seed`` and
exit 0 on success, 1 with a one-line diagnostic on failure.
"""

import argparse
import os
import sys

import numpy as np

from .charts import detect_and_arl, render_chart
from .dataio import load_clinical_csv, preprocess, write_table_csv
from .experiments import (
    ExperimentConfig,
    all_variants,
    fit_variant,
    read_predictions_csv,
    run_comparison,
    variant_label,
    write_predictions_csv,
)
from .model import save_model
from .simulate import SimConfig, read_dataset_csv, simulate_dataset, write_dataset_csv
from .training import TrainConfig

_REQUIRED = object()

_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}


def _parse_bool(text):
    lowered = text.strip().casefold()
    if lowered in _TRUTHY:
        return True
    if lowered in _FALSY:
        return False
    raise ValueError("expected a boolean, got %r" % (text,))


# (name, type, default, help); _REQUIRED means the flag or a config entry
# must supply a value
_SIMULATE_OPTS = [
    ("n", int, 500, "number of subjects"),
    ("rho", float, 0.9, "dependence of responses 2 and 3 on the baseline"),
    ("seed", int, 0, "stream seed"),
    ("out", str, _REQUIRED, "output dataset CSV path"),
]

_TRAIN_OPTS = [
    ("data", str, _REQUIRED, "simulated dataset CSV to train on"),
    ("arch", str, "lstm", "architecture: lstm or cnn-lstm"),
    ("activation", str, "relu", "output activation variant"),
    ("epochs", int, 50, "training epochs"),
    ("lr", float, 1e-3, "learning rate"),
    ("batch", int, 32, "mini-batch size"),
    ("timesteps", int, 10, "window length"),
    ("seed", int, 0, "build/shuffle/dropout seed"),
    ("split", float, 0.8, "train fraction of the window sequence"),
    ("optimizer", str, "adam", "adam or sgd"),
    ("out", str, _REQUIRED, "output directory (model.json, predictions.csv)"),
]

_COMPARE_OPTS = [
    ("replicates", int, 30, "replicates per variant"),
    ("n", int, 500, "subjects per replicate"),
    ("rho", float, 0.9, "dependence parameter"),
    ("seed", int, 0, "base seed; replicate r uses seed+r"),
    ("variants", str, "all", "comma-separated arch:activation pairs, or 'all'"),
    ("epochs", int, 50, "training epochs"),
    ("lr", float, 1e-3, "learning rate"),
    ("batch", int, 32, "mini-batch size"),
    ("timesteps", int, 10, "window length"),
    ("split", float, 0.8, "train fraction"),
    ("optimizer", str, "adam", "adam or sgd"),
    ("jobs", int, 1, "worker processes for replicate cells"),
    ("out", str, _REQUIRED, "output comparison CSV path"),
]

_CHART_OPTS = [
    ("preds", str, _REQUIRED, "predictions CSV from the train command"),
    ("sigma", float, 2.0, "control-limit half-width in SDs"),
    ("svg", bool, False, "also write an SVG per chart"),
    ("out", str, _REQUIRED, "output directory for chart files"),
]

_INGEST_OPTS = [
    ("input", str, _REQUIRED, "clinical CSV to ingest"),
    ("timesteps", int, 10, "replication depth of the feature tensor"),
    ("out", str, _REQUIRED, "output directory (processed.csv, summary.txt)"),
]


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError("%s:%d: expected key=value, got %r"
                                 % (path, lineno, line))
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _add_options(parser, opts):
    for name, typ, _default, help_text in opts:
        flag = "--" + name.replace("_", "-")
        if typ is bool:
            parser.add_argument(flag, action="store_true", default=None,
                                help=help_text)
        else:
            parser.add_argument(flag, type=typ, default=None, help=help_text)
    parser.add_argument("--config", type=str, default=None,
                        help="key=value file supplying defaults for any flag")


def _resolve_settings(args, opts):
    file_values = {} if args.config is None else _read_config_file(args.config)
    settings = {}
    for name, typ, default, _help in opts:
        value = getattr(args, name)
        if value is None and name in file_values:
            raw = file_values[name]
            value = _parse_bool(raw) if typ is bool else typ(raw)
        if value is None:
            if default is _REQUIRED:
                raise ValueError("missing required setting --%s"
                                 % name.replace("_", "-"))
            value = default
        settings[name] = value
    return settings


def _parse_variants(text):
    if text == "all":
        return all_variants()
    pairs = []
    for chunk in text.split(","):
        arch, sep, variant = chunk.strip().partition(":")
        if not sep:
            raise ValueError("variant %r should look like arch:activation "
                             "(e.g. lstm:clayton)" % (chunk,))
        pairs.append((arch, variant))
    return pairs


def cmd_simulate(settings):
    cfg = SimConfig(n=settings["n"], rho=settings["rho"], seed=settings["seed"])
    dataset = simulate_dataset(cfg)
    write_dataset_csv(dataset, settings["out"])
    corr = np.corrcoef(dataset.times[:, 0], dataset.times[:, 1])[0, 1]
    censored = 1.0 - dataset.delta.mean(axis=0)
    print("wrote %d subjects to %s" % (dataset.n, settings["out"]))
    print("corr(T1,T2) = %.4f" % corr)
    print("censored fraction: response_1 %.4f, response_2 %.4f, response_3 %.4f"
          % tuple(censored))
    print("Y2=1 frequency: %.4f" % np.mean(dataset.y2 == 1))
    freqs = tuple(np.mean(dataset.y3_code == c) for c in range(3))
    print("Y3 frequencies: Low %.4f, Medium %.4f, High %.4f" % freqs)
    return 0


def cmd_train(settings):
    dataset = read_dataset_csv(settings["data"])
    train_config = TrainConfig(learning_rate=settings["lr"],
                               epochs=settings["epochs"],
                               batch_size=settings["batch"],
                               optimizer=settings["optimizer"],
                               seed=settings["seed"])
    fit = fit_variant(dataset, settings["arch"], settings["activation"],
                      settings["timesteps"], train_config,
                      split=settings["split"], verbose=True)
    os.makedirs(settings["out"], exist_ok=True)
    model_path = os.path.join(settings["out"], "model.json")
    preds_path = os.path.join(settings["out"], "predictions.csv")
    save_model(fit.model, model_path)
    write_predictions_csv(fit.actual, fit.predicted, fit.delta, preds_path)
    print("%s: initial loss %.6f, final loss %.6f"
          % (variant_label(settings["arch"], settings["activation"]),
             fit.log.initial_loss, fit.log.final_loss))
    for head, report in enumerate(fit.log.final_thetas, start=1):
        if report:
            pairs = ", ".join("%s=%.6f" % item for item in sorted(report.items()))
            print("head %d: %s" % (head, pairs))
    print("wrote %s and %s" % (model_path, preds_path))
    return 0


def cmd_compare(settings):
    config = ExperimentConfig(
        n=settings["n"], rho=settings["rho"], seed=settings["seed"],
        replicates=settings["replicates"],
        variants=_parse_variants(settings["variants"]),
        timesteps=settings["timesteps"], split=settings["split"],
        epochs=settings["epochs"], learning_rate=settings["lr"],
        batch_size=settings["batch"], optimizer=settings["optimizer"],
        out=settings["out"],
    )

    def progress(done, total):
        if done % config.replicates == 0 or done == total:
            print("completed %d/%d replicate runs" % (done, total))

    rows = run_comparison(config, jobs=settings["jobs"], progress=progress)
    write_table_csv(rows, settings["out"])
    print("wrote %d rows to %s" % (len(rows), settings["out"]))
    return 0


def cmd_chart(settings):
    grouped = read_predictions_csv(settings["preds"])
    os.makedirs(settings["out"], exist_ok=True)
    for response, (actual, predicted, _delta) in grouped.items():
        report = detect_and_arl(actual - predicted, k=settings["sigma"])
        csv_path = os.path.join(settings["out"], "chart_%s.csv" % response)
        svg_path = (os.path.join(settings["out"], "chart_%s.svg" % response)
                    if settings["svg"] else None)
        render_chart(report, csv_path, svg_path=svg_path)
        arl_text = "NA" if report.arl is None else "%.4f" % report.arl
        print("%s: n=%d signals=%d arl=%s -> %s"
              % (response, report.n, report.signal_count, arl_text, csv_path))
    return 0


def cmd_ingest(settings):
    data, summary = load_clinical_csv(settings["input"])
    X, y = preprocess(data, timesteps=settings["timesteps"])
    os.makedirs(settings["out"], exist_ok=True)

    sds = data.features.std(axis=0, ddof=1)
    kept = [name for j, name in enumerate(data.feature_names) if sds[j] > 0]
    processed_path = os.path.join(settings["out"], "processed.csv")
    with open(processed_path, "w", newline="") as fh:
        fh.write(",".join(kept + ["survival_time", "event_status"]) + "\n")
        for i in range(X.shape[0]):
            cells = [repr(float(v)) for v in X[i, 0, :]]
            cells.append(repr(float(y[i, 0])))
            cells.append("%d" % int(y[i, 1]))
            fh.write(",".join(cells) + "\n")

    lines = ["n=%d" % summary["n"],
             "X_shape=(%d, %d, %d)" % X.shape,
             "event_rate=%.4f" % summary["event_rate"]]
    for name, stats in summary["columns"].items():
        lines.append("%s: mean=%.4f sd=%.4f" % (name, stats["mean"], stats["sd"]))
    if summary["tumor_stage_counts"]:
        counts = " ".join("%d=%d" % item
                          for item in sorted(summary["tumor_stage_counts"].items()))
        lines.append("tumor_stage_counts: %s" % counts)
    summary_path = os.path.join(settings["out"], "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    print("wrote %s and %s" % (processed_path, summary_path))
    return 0


_COMMANDS = {
    "simulate": (cmd_simulate, _SIMULATE_OPTS,
                 "generate a right-censored survival dataset CSV"),
    "train": (cmd_train, _TRAIN_OPTS,
              "train one variant and write its model and test predictions"),
    "compare": (cmd_compare, _COMPARE_OPTS,
                "replicate experiment over variants; write the comparison table"),
    "chart": (cmd_chart, _CHART_OPTS,
              "control charts from a predictions file, one per response"),
    "ingest": (cmd_ingest, _INGEST_OPTS,
               "clean a clinical CSV and write model-ready tensors"),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="copsurv",
        description="survival sequence models with copula output activations",
    )
    subparsers = parser.add_subparsers(dest="command")
    for name, (handler, opts, help_text) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        _add_options(sub, opts)
        sub.set_defaults(handler=handler, opts=opts)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_help()
        return 2
    try:
        settings = _resolve_settings(args, args.opts)
        return args.handler(settings)
    except Exception as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
