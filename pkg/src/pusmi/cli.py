"""Command-line interface to the estimators and experiments.

Subcommands: ``estimate``, ``fig1-sweep``, ``purl-toy``, ``purl-train``,
``puit``, ``type2-sweep``. Each reads a JSON config file (``--config``)
whose values individual flags override, computes with fully seeded
randomness, and emits delimited tables and JSON reports; experiment
commands also render figures next to the tables unless ``--no-figures``
is given. Re-running a command with the same config and seed reproduces
every artifact byte for byte.

Dataset sources, under the config key ``data``:

* ``{"generator": {"mean_pos": [...], "mean_neg": [...], "cov_diag":
  [...], "theta_p": 0.5}, "n_p": 200, "n_u": 400}`` draws from the
  two-Gaussian mixture; ``theta_p`` here is the generating mixture
  weight, distinct from the estimation prior.
* ``{"labeled": "corpus.csv", "n_p": 200, "n_u": 400}`` subsamples a PU
  dataset from a labeled file (``.csv`` per the CSV contract, anything
  else parsed as LIBSVM text with the maximum feature index as the
  dimension).

Exit codes: 0 on success, 2 for configuration, parsing, or input-file
problems, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    ClassPrior,
    GaussianMixtureSpec,
    LabeledDataset,
    PuDataset,
    load_csv,
    load_libsvm,
    make_pu,
    sample_gaussian_pu,
)
from .errors import NumericsError
from .estimator import (
    EstimatorConfig,
    estimate_smi,
    estimate_to_dict,
    model_to_dict,
    report_to_dict,
)
from .experiments import FIG1_COLUMNS, fig1_sweep, fig1_sweep_labeled, purl_toy
from .mlp import MlpSpec, SgdConfig, params_to_dict
from .puit import TYPE2_COLUMNS, permutation_test, type2_experiment
from .purl import PurlConfig, train_purl

__all__ = ["main"]


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _merge_settings(args)
        return args.handler(settings, args)
    except NumericsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pusmi",
        description="Mutual-information estimation, representation learning, "
        "and independence testing from positive-unlabeled data.",
    )
    parser.add_argument("--version", action="version", version=f"pusmi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int, help="root random seed (default 0)")
        p.add_argument("--out", type=Path, help="output directory for artifacts")
        p.add_argument("--threads", type=int, help="worker threads for sweep trials")
        p.add_argument("--prior", type=float, help="positive class prior for estimation")
        p.add_argument(
            "--no-figures",
            action="store_true",
            help="skip figure rendering, keep tables and JSON only",
        )

    p = sub.add_parser("estimate", help="one mutual-information estimate as JSON")
    common(p)
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("fig1-sweep", help="squared-error sweep over sample sizes")
    common(p)
    p.add_argument("--trials", type=int, help="datasets per grid point (default 50)")
    p.set_defaults(handler=_cmd_fig1_sweep)

    p = sub.add_parser("purl-toy", help="two-dimensional representation study")
    common(p)
    p.add_argument("--epochs", type=int, help="training epochs (default 300)")
    p.set_defaults(handler=_cmd_purl_toy)

    p = sub.add_parser("purl-train", help="train the alternating PU representation")
    common(p)
    p.set_defaults(handler=_cmd_purl_train)

    p = sub.add_parser("puit", help="permutation independence test as JSON")
    common(p)
    p.add_argument("--b-count", type=int, help="permutation rounds (default 1000)")
    p.add_argument(
        "--recv-per-round",
        action="store_true",
        help="re-run model selection inside every permutation round",
    )
    p.set_defaults(handler=_cmd_puit)

    p = sub.add_parser("type2-sweep", help="missed-detection frequency over grids")
    common(p)
    p.add_argument("--level", type=float, help="significance level (default 0.05)")
    p.set_defaults(handler=_cmd_type2_sweep)

    return parser


# -- config plumbing ---------------------------------------------------------

_FLAG_KEYS = ("seed", "out", "threads", "prior", "trials", "epochs", "level")


def _merge_settings(args: argparse.Namespace) -> dict:
    """Config-file values with command-line flags layered on top."""
    settings: dict = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError(f"config root must be a JSON object: {args.config}")
        settings.update(loaded)
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if getattr(args, "b_count", None) is not None:
        settings["b_count"] = args.b_count
    if getattr(args, "recv_per_round", False):
        settings["recv_per_round"] = True
    settings.setdefault("seed", 0)
    settings.setdefault("threads", 1)
    return settings


def _require(settings: dict, key: str):
    if key not in settings:
        raise ValueError(f"config is missing the required key {key!r}")
    return settings[key]


def _out_dir(settings: dict) -> Path:
    out = Path(_require(settings, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _generator_spec(src: dict) -> GaussianMixtureSpec:
    for key in ("mean_pos", "mean_neg", "cov_diag"):
        if key not in src:
            raise ValueError(f"generator spec is missing {key!r}")
    return GaussianMixtureSpec(
        mean_pos=src["mean_pos"],
        mean_neg=src["mean_neg"],
        cov_diag=src["cov_diag"],
        prior=ClassPrior(float(src.get("theta_p", 0.5))),
    )


def _load_labeled(path) -> LabeledDataset:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_csv(path)
    return load_libsvm(path)


def _prior(settings: dict) -> ClassPrior:
    if "prior" in settings:
        return ClassPrior(float(settings["prior"]))
    src = settings.get("data", {})
    if "generator" in src:
        return ClassPrior(float(src["generator"].get("theta_p", 0.5)))
    raise ValueError("config is missing the required key 'prior'")


def _pu_data(settings: dict, prior: ClassPrior, seed) -> PuDataset:
    src = _require(settings, "data")
    n_p = int(_require(src, "n_p"))
    n_u = int(_require(src, "n_u"))
    if "generator" in src:
        return sample_gaussian_pu(_generator_spec(src["generator"]), n_p, n_u, seed=seed)
    if "labeled" in src:
        return make_pu(_load_labeled(src["labeled"]), n_p, n_u, prior, seed=seed)
    raise ValueError("data source must provide 'generator' or 'labeled'")


def _estimator_config(settings: dict, seed) -> EstimatorConfig:
    opts = dict(settings.get("estimator", {}))
    kwargs = {}
    if "sigma_grid" in opts:
        kwargs["sigma_grid"] = tuple(float(s) for s in opts.pop("sigma_grid"))
    if "lambda_grid" in opts:
        kwargs["lambda_grid"] = tuple(float(s) for s in opts.pop("lambda_grid"))
    if "folds" in opts:
        kwargs["folds"] = int(opts.pop("folds"))
    if "b_max" in opts:
        kwargs["b_max"] = int(opts.pop("b_max"))
    if opts:
        raise ValueError(f"unknown estimator options: {sorted(opts)}")
    return EstimatorConfig(seed=seed, **kwargs)


# -- artifact writers --------------------------------------------------------


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _write_json(path: Path, obj) -> Path:
    path.write_text(_dump_json(obj), encoding="utf-8")
    return path


def _write_csv(path: Path, columns, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _write_sidecar(table_path: Path, command: str, settings: dict, columns) -> Path:
    meta = {
        "command": command,
        "version": __version__,
        "columns": list(columns),
        "config": settings,
    }
    return _write_json(table_path.with_suffix(".meta.json"), meta)


def _announce(paths) -> None:
    # Status goes to stderr so stdout stays a single parseable JSON payload.
    for path in paths:
        print(f"wrote {path}", file=sys.stderr)


# -- subcommands -------------------------------------------------------------


def _cmd_estimate(settings: dict, args: argparse.Namespace) -> int:
    prior = _prior(settings)
    root = np.random.SeedSequence(int(settings["seed"]))
    data_ss, fit_ss = root.spawn(2)
    data = _pu_data(settings, prior, data_ss)
    est, model, report = estimate_smi(data, prior, _estimator_config(settings, fit_ss))

    payload = {"estimate": estimate_to_dict(est), "report": report_to_dict(report)}
    sys.stdout.write(_dump_json(payload))
    if "out" in settings:
        out = _out_dir(settings)
        paths = [
            _write_json(out / "estimate.json", payload),
            _write_json(out / "model.json", model_to_dict(model)),
            _write_sidecar(out / "estimate.json", "estimate", settings, ()),
        ]
        _announce(paths)
    return 0


def _cmd_fig1_sweep(settings: dict, args: argparse.Namespace) -> int:
    prior = _prior(settings)
    out = _out_dir(settings)
    vary = settings.get("vary", "n_p")
    n_grid = [int(n) for n in _require(settings, "n_grid")]
    n_fixed = int(_require(settings, "n_fixed"))
    trials = int(settings.get("trials", 50))
    threads = int(settings["threads"])
    cfg = _estimator_config(settings, 0)
    src = _require(settings, "data")

    if "generator" in src:
        rows = fig1_sweep(
            _generator_spec(src["generator"]),
            n_grid,
            vary,
            n_fixed,
            trials=trials,
            seed=int(settings["seed"]),
            config=cfg,
            threads=threads,
        )
    elif "labeled" in src:
        rows = fig1_sweep_labeled(
            _load_labeled(src["labeled"]),
            prior,
            n_grid,
            vary,
            n_fixed,
            trials=trials,
            seed=int(settings["seed"]),
            config=cfg,
            threads=threads,
        )
    else:
        raise ValueError("data source must provide 'generator' or 'labeled'")

    table = _write_csv(out / "fig1.csv", FIG1_COLUMNS, rows)
    paths = [table, _write_sidecar(table, "fig1-sweep", settings, FIG1_COLUMNS)]
    if not args.no_figures:
        from .figures import mse_figure

        axis = "number of positive samples" if vary == "n_p" else "number of unlabeled samples"
        paths.append(mse_figure(rows, out / "fig1.png", axis_label=axis))
    _announce(paths)
    return 0


def _cmd_purl_toy(settings: dict, args: argparse.Namespace) -> int:
    out = _out_dir(settings)
    src = _require(settings, "data")
    if "generator" not in src:
        raise ValueError("purl-toy needs a two-dimensional generator data source")
    spec = _generator_spec(src["generator"])

    toy = purl_toy(
        spec,
        n_p=int(src.get("n_p", 200)),
        n_u=int(src.get("n_u", 400)),
        epochs=int(settings.get("epochs", 300)),
        restarts=int(settings.get("restarts", 3)),
        eval_n=int(settings.get("eval_n", 400)),
        seed=int(settings["seed"]),
    )

    payload = {
        "purl_direction": toy.purl_direction,
        "pca_direction": toy.pca_direction,
        "cosines": {
            "purl_vs_horizontal": toy.cos_horizontal,
            "pca_vs_vertical": toy.cos_vertical,
        },
        "best_iteration": toy.train.best_iteration,
    }
    sys.stdout.write(_dump_json(payload))

    columns = ("label", "x1", "x2", "purl_projection", "pca_projection")
    rows = [
        (int(label), float(x[0]), float(x[1]), float(p), float(q))
        for label, x, p, q in zip(
            toy.eval_data.labels,
            toy.eval_data.features,
            toy.purl_projection,
            toy.pca_projection,
        )
    ]
    table = _write_csv(out / "projected.csv", columns, rows)
    paths = [
        _write_json(out / "purl_toy.json", payload),
        table,
        _write_sidecar(table, "purl-toy", settings, columns),
    ]
    if not args.no_figures:
        from .figures import history_figure, toy_figure

        paths.append(toy_figure(toy, out / "purl_toy.png"))
        paths.append(history_figure(toy.train, out / "history.png"))
    _announce(paths)
    return 0


def _purl_config(settings: dict, data: PuDataset, validation: PuDataset | None) -> PurlConfig:
    layers = [int(n) for n in settings.get("layers", (data.dim, 60, 20, 1))]
    if len(layers) < 3 or layers[-1] != 1:
        raise ValueError(f"layers must end in 1 with at least one hidden size, got {layers}")
    batchnorm = bool(settings.get("batchnorm", True))

    def sgd(section: dict) -> SgdConfig:
        return SgdConfig(
            learning_rate=float(section.get("learning_rate", 1e-3)),
            weight_decay=float(section.get("weight_decay", 5e-4)),
            grad_noise_std=float(section.get("grad_noise_std", 0.01)),
            batch_size=int(section.get("batch_size", 32)),
        )

    sgd_common = settings.get("sgd", {})
    return PurlConfig(
        v_spec=MlpSpec(tuple(layers[:-1]), hidden_batchnorm=batchnorm),
        w_spec=MlpSpec(
            (layers[-2], 1), input_batchnorm=batchnorm, input_relu=True
        ),
        sgd_w=sgd({**sgd_common, **settings.get("sgd_w", {})}),
        sgd_v=sgd({**sgd_common, **settings.get("sgd_v", {})}),
        w_steps_per_v_step=int(settings.get("w_steps_per_v_step", 4)),
        epochs=int(settings.get("epochs", 200)),
        patience=int(settings.get("patience", 20)),
        validation=validation,
    )


def _split_validation(data: PuDataset, fraction: float, seed) -> tuple[PuDataset, PuDataset]:
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"validation_fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    keep_p = max(1, round(data.n_p * (1.0 - fraction)))
    keep_u = max(1, round(data.n_u * (1.0 - fraction)))
    if keep_p == data.n_p or keep_u == data.n_u:
        raise ValueError("validation split leaves an empty validation side")
    p_order = rng.permutation(data.n_p)
    u_order = rng.permutation(data.n_u)
    train = PuDataset(data.positives[p_order[:keep_p]], data.unlabeled[u_order[:keep_u]])
    val = PuDataset(data.positives[p_order[keep_p:]], data.unlabeled[u_order[keep_u:]])
    return train, val


def _cmd_purl_train(settings: dict, args: argparse.Namespace) -> int:
    # Training itself is prior-free; a prior is only needed to subsample
    # PU data from a labeled corpus.
    prior = _prior(settings) if "labeled" in settings.get("data", {}) else None
    out = _out_dir(settings)
    root = np.random.SeedSequence(int(settings["seed"]))
    data_ss, split_ss, train_ss = root.spawn(3)
    data = _pu_data(settings, prior, data_ss)

    validation = None
    if "validation_fraction" in settings:
        data, validation = _split_validation(
            data, float(settings["validation_fraction"]), split_ss
        )
    result = train_purl(data, _purl_config(settings, data, validation), seed=train_ss)

    history_rows = [
        (epoch, train_j, val_j)
        for epoch, (train_j, val_j) in enumerate(result.history)
    ]
    columns = ("epoch", "train_objective", "validation_objective")
    table = _write_csv(out / "history.csv", columns, history_rows)
    model = {
        "v_params": params_to_dict(result.v_params),
        "w_params": params_to_dict(result.w_params),
        "best_iteration": result.best_iteration,
    }
    paths = [
        _write_json(out / "purl_model.json", model),
        table,
        _write_sidecar(table, "purl-train", settings, columns),
    ]
    if not args.no_figures:
        from .figures import history_figure

        paths.append(history_figure(result, out / "history.png"))
    _announce(paths)
    print(f"best iteration: {result.best_iteration}")
    return 0


def _cmd_puit(settings: dict, args: argparse.Namespace) -> int:
    prior = _prior(settings)
    root = np.random.SeedSequence(int(settings["seed"]))
    data_ss, test_ss = root.spawn(2)
    data = _pu_data(settings, prior, data_ss)

    result = permutation_test(
        data,
        prior,
        b_count=int(settings.get("b_count", 1000)),
        config=_estimator_config(settings, 0),
        seed=test_ss,
        recv_per_round=bool(settings.get("recv_per_round", False)),
    )
    summary = {
        "observed": result.observed,
        "p_value": result.p_value,
        "b_count": result.b_count,
        "prior": result.prior_used.theta_p,
        "frozen_hyperparams": result.frozen_hyperparams,
    }
    sys.stdout.write(_dump_json(summary))
    if "out" in settings:
        out = _out_dir(settings)
        paths = [
            _write_json(out / "puit.json", {**summary, "permuted": list(result.permuted)}),
            _write_sidecar(out / "puit.json", "puit", settings, ()),
        ]
        if not args.no_figures:
            from .figures import permutation_figure

            paths.append(permutation_figure(result, out / "puit.png"))
        _announce(paths)
    return 0


def _cmd_type2_sweep(settings: dict, args: argparse.Namespace) -> int:
    out = _out_dir(settings)
    src = _require(settings, "data")
    if "generator" not in src:
        raise ValueError("type2-sweep needs a generator data source")
    rows = type2_experiment(
        _generator_spec(src["generator"]),
        _require(settings, "n_p_grid"),
        _require(settings, "n_u_grid"),
        level=float(settings.get("level", 0.05)),
        trials=int(_require(settings, "trials")),
        seed=int(settings["seed"]),
        b_count=int(settings.get("b_count", 200)),
        config=_estimator_config(settings, 0),
    )
    table = _write_csv(out / "type2.csv", TYPE2_COLUMNS, rows)
    paths = [table, _write_sidecar(table, "type2-sweep", settings, TYPE2_COLUMNS)]
    if not args.no_figures:
        from .figures import type2_figure

        paths.append(type2_figure(rows, out / "type2.png"))
    _announce(paths)
    return 0


if __name__ == "__main__":
    sys.exit(main())
