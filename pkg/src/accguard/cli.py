"""Command-line surface: bounds, train, eval, attack, sweep, report, export.

Exit codes: 0 success, 1 runtime failure, 2 usage or I/O error. Every
emitted artifact carries the originating config hash and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import serde
from .attack import attack_model, fuzz_overflows
from .bounds import BoundQuery, datatype_bound, l1_budget, weight_bound
from .data import load_csv, make_blobs, train_test_split
from .estimator import QuantMLPClassifier
from .infer import AccumulatorSpec, run_int
from .metrics import model_stats, tensor_stats
from .qcore import DType, IntTensor
from .serde import CheckpointError, ModelCheckpoint


class UsageError(Exception):
    pass


def _require_keys(obj: dict, allowed: set, context: str):
    for key in obj:
        if key not in allowed:
            raise UsageError(f"unknown config key {context}.{key}")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: invalid JSON: {e}") from None


def _load_checkpoint(path: str) -> ModelCheckpoint:
    try:
        return serde.load(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None
    except CheckpointError as e:
        raise UsageError(f"{path}: {e}") from None


def _provenance_line(ckpt: ModelCheckpoint) -> str:
    return f"# config_hash={ckpt.config_hash} seed={ckpt.seed}\n"


def _write_text(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(rows: list[dict], header: list[str], preamble: str = "") -> str:
    lines = [preamble + ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- dataset


def _load_dataset(cfg: dict):
    _require_keys(
        cfg,
        {
            "kind", "path", "n_samples", "n_features", "n_classes",
            "spread", "center_radius", "seed", "test_fraction",
        },
        "dataset",
    )
    kind = cfg.get("kind", "blobs")
    test_fraction = cfg.get("test_fraction", 0.25)
    seed = cfg.get("seed", 0)
    if kind == "blobs":
        X, y = make_blobs(
            n_samples=cfg.get("n_samples", 600),
            n_features=cfg.get("n_features", 8),
            n_classes=cfg.get("n_classes", 3),
            spread=cfg.get("spread", 1.0),
            center_radius=cfg.get("center_radius", 4.0),
            seed=seed,
        )
    elif kind == "csv":
        if "path" not in cfg:
            raise UsageError("dataset.kind=csv requires dataset.path")
        X, y = load_csv(cfg["path"])
    else:
        raise UsageError(f"unknown dataset kind {kind!r}")
    return train_test_split(X, y, test_fraction, seed)


# ------------------------------------------------------------ subcommands


_MODEL_KEYS = {
    "hidden", "quantizer", "weight_bits", "act_bits", "io_bits",
    "acc_bits", "acc_offset",
}
_TRAIN_KEYS = {
    "epochs", "batch_size", "lr", "lr_factor", "lr_period",
    "weight_decay", "lam", "optimizer", "momentum", "seed",
}


def _build_estimator(model_cfg: dict, train_cfg: dict, seed_override=None):
    _require_keys(model_cfg, _MODEL_KEYS, "model")
    _require_keys(train_cfg, _TRAIN_KEYS, "train")
    kwargs = dict(
        hidden_layer_sizes=tuple(model_cfg.get("hidden", [16])),
        quantizer=model_cfg.get("quantizer", "wnq"),
        weight_bits=model_cfg.get("weight_bits", 4),
        act_bits=model_cfg.get("act_bits", 4),
        io_bits=model_cfg.get("io_bits", 8),
        acc_bits=model_cfg.get("acc_bits"),
        acc_offset=model_cfg.get("acc_offset", 0),
    )
    kwargs.update({k: train_cfg[k] for k in train_cfg})
    if seed_override is not None:
        kwargs["seed"] = seed_override
    try:
        return QuantMLPClassifier(**kwargs)
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None


def cmd_train(args) -> int:
    cfg = _load_json(args.config)
    _require_keys(cfg, {"dataset", "model", "train", "out"}, "<root>")
    Xtr, ytr, Xte, yte = _load_dataset(cfg.get("dataset", {}))
    est = _build_estimator(cfg.get("model", {}), cfg.get("train", {}),
                           seed_override=args.seed)
    try:
        est.fit(Xtr, ytr)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out_cfg = cfg.get("out", {})
    _require_keys(out_cfg, {"checkpoint", "metrics"}, "out")
    ckpt_path = args.checkpoint or out_cfg.get("checkpoint")
    metrics_path = args.out or out_cfg.get("metrics")
    if est.checkpoint_ is not None and ckpt_path:
        serde.save(est.checkpoint_, ckpt_path)
    if metrics_path:
        pre = (
            _provenance_line(est.checkpoint_)
            if est.checkpoint_ is not None
            else f"# config_hash={serde.config_hash(est.get_params())} seed={est.seed}\n"
        )
        rows = est.history_
        _write_text(
            metrics_path,
            _csv(rows, ["epoch", "task_loss", "penalty", "metric", "sparsity"], pre),
        )
    test_acc = float((est.predict(Xte) == yte).mean()) if len(Xte) else float("nan")
    print(f"train accuracy={est.history_[-1]['metric']} test accuracy={test_acc}")
    return 0


def cmd_bounds(args) -> int:
    ckpt = _load_checkpoint(args.checkpoint)
    rows = []
    for li, rec in enumerate(ckpt.layers):
        in_dtype = rec.input_dtype
        q = BoundQuery(
            K=rec.in_features, input_dtype=in_dtype, weight_dtype=rec.weight_dtype
        )
        dt_bits = datatype_bound(q).min_bits
        budget = l1_budget(rec.acc_bits, in_dtype)
        for ci, row in enumerate(rec.w_int):
            wb = weight_bound(IntTensor(row, rec.weight_dtype), in_dtype).min_bits
            rows.append(
                {
                    "layer": li,
                    "channel": ci,
                    "K": rec.in_features,
                    "N": in_dtype.bits,
                    "M": rec.weight_bits,
                    "datatype_bits": dt_bits,
                    "weight_bits": wb,
                    "l1_budget": budget,
                }
            )
    header = ["layer", "channel", "K", "N", "M", "datatype_bits", "weight_bits", "l1_budget"]
    if args.format == "json":
        _write_text(args.out, json.dumps(
            {"config_hash": ckpt.config_hash, "seed": ckpt.seed, "rows": rows}) + "\n")
    else:
        _write_text(args.out, _csv(rows, header, _provenance_line(ckpt)))
    return 0


def _specs_with_override(ckpt: ModelCheckpoint, P_override, mode: str):
    if P_override is None:
        return [AccumulatorSpec(rec.acc_bits, mode) for rec in ckpt.layers]
    return [AccumulatorSpec(int(P_override), mode) for _ in ckpt.layers]


def cmd_attack(args) -> int:
    ckpt = _load_checkpoint(args.checkpoint)
    specs = _specs_with_override(ckpt, args.P, "wide")
    results = attack_model(ckpt, specs)
    rows = []
    for li, layer in enumerate(results):
        for ni, r in enumerate(layer):
            rows.append(
                {
                    "layer": li,
                    "neuron": ni,
                    "overflows": int(r.overflowed),
                    "worst_excursion": r.excursion,
                    "macs": ckpt.layers[li].in_features,
                    "peak": r.peak,
                    "required_bits": r.required_bits,
                    "attack_input": [int(v) for v in r.input],
                }
            )
    total = sum(r["overflows"] for r in rows)
    report = {
        "config_hash": ckpt.config_hash,
        "seed": ckpt.seed,
        "total_overflows": total,
        "rows": rows,
    }
    if args.format == "csv":
        header = ["layer", "neuron", "overflows", "worst_excursion", "macs",
                  "peak", "required_bits"]
        _write_text(args.out, _csv(rows, header, _provenance_line(ckpt)))
    else:
        _write_text(args.out, json.dumps(report, indent=2) + "\n")
    return 0


def cmd_eval(args) -> int:
    ckpt = _load_checkpoint(args.checkpoint)
    if not args.data:
        raise UsageError("eval requires --data")
    X, y = load_csv(args.data)
    if X.shape[1] != ckpt.layers[0].in_features:
        raise UsageError(
            f"dataset has {X.shape[1]} features, model expects "
            f"{ckpt.layers[0].in_features}"
        )
    s = np.exp2(ckpt.input_d)
    dt = ckpt.input_dtype
    xq = np.clip(np.round(X / s), dt.min, dt.max).astype(np.int64)
    specs = _specs_with_override(ckpt, args.P, "wide")
    out, report = run_int(ckpt, IntTensor(xq, dt), specs=specs)
    from .infer import dequantized_outputs

    logits = dequantized_outputs(ckpt, out)
    acc = float((logits.argmax(axis=1) == y).mean())
    obj = {
        "config_hash": ckpt.config_hash,
        "seed": ckpt.seed,
        "metric": acc,
        "total_overflows": report.total_overflows,
        "rows": report.rows(),
    }
    if args.format == "csv":
        header = ["layer", "neuron", "overflows", "worst_excursion", "macs"]
        _write_text(args.out, _csv(report.rows(), header, _provenance_line(ckpt)))
    else:
        _write_text(args.out, json.dumps(obj, indent=2) + "\n")
    return 0


def cmd_report(args) -> int:
    ckpt = _load_checkpoint(args.checkpoint)
    rows = []
    for li, rec in enumerate(ckpt.layers):
        st = tensor_stats(IntTensor(rec.w_int, rec.weight_dtype), rec.weight_bits)
        rows.append(
            {
                "layer": li,
                "sparsity": st.sparsity,
                "entropy_bits": st.entropy_bits,
                "compression_rate": st.compression_rate,
            }
        )
    header = ["layer", "sparsity", "entropy_bits", "compression_rate"]
    if args.format == "json":
        total = model_stats(ckpt)
        _write_text(args.out, json.dumps(
            {"config_hash": ckpt.config_hash, "seed": ckpt.seed, "rows": rows,
             "model": {"sparsity": total.sparsity,
                       "entropy_bits": total.entropy_bits,
                       "compression_rate": total.compression_rate}}) + "\n")
    else:
        _write_text(args.out, _csv(rows, header, _provenance_line(ckpt)))
    return 0


def cmd_export(args) -> int:
    """Deployment bundle: integer weights plus scales and register widths."""
    ckpt = _load_checkpoint(args.checkpoint)
    layers = []
    for rec in ckpt.layers:
        obj = {
            "w_int": [[int(v) for v in row] for row in rec.w_int],
            "weight_scale_log2": [float(v) for v in rec.d],
            "weight_bits": rec.weight_bits,
            "acc_bits": rec.acc_bits,
        }
        if rec.act_d is not None:
            obj["act"] = {"scale_log2": rec.act_d, "bits": rec.act_bits,
                          "signed": rec.act_signed}
        layers.append(obj)
    bundle = {
        "config_hash": ckpt.config_hash,
        "seed": ckpt.seed,
        "input": {"scale_log2": ckpt.input_d, "bits": ckpt.input_bits,
                  "signed": ckpt.input_signed},
        "layers": layers,
    }
    _write_text(args.out, json.dumps(bundle, indent=2) + "\n")
    return 0


def _sweep_one(job):
    model_cfg, train_cfg, data_cfg, M, N, offset, seed = job
    Xtr, ytr, Xte, yte = _load_dataset(dict(data_cfg))
    cfg = dict(model_cfg)
    cfg.update({"weight_bits": M, "act_bits": N, "acc_offset": offset})
    row = {"M": M, "N": N, "seed": seed}
    try:
        est = _build_estimator(cfg, dict(train_cfg), seed_override=seed)
        est.fit(Xtr, ytr)
        ckpt = est.checkpoint_
        st = model_stats(ckpt)
        results = attack_model(ckpt)
        fuzz = fuzz_overflows(ckpt, n_inputs=1000, seed=seed)
        certified = (
            sum(r.overflowed for layer in results for r in layer) == 0
            and fuzz.total_overflows == 0
        )
        row.update(
            {
                "P_star": est.p_star_,
                "metric": float((est.predict(Xte) == yte).mean()),
                "sparsity": st.sparsity,
                "entropy_bits": st.entropy_bits,
                "compression_rate": st.compression_rate,
                "penalty": est.history_[-1]["penalty"],
                "certified": certified,
                "error": "",
            }
        )
    except Exception as e:  # record and keep sweeping
        row.update(
            {
                "P_star": -1,
                "metric": float("nan"),
                "sparsity": float("nan"),
                "entropy_bits": float("nan"),
                "compression_rate": float("nan"),
                "penalty": float("nan"),
                "certified": False,
                "error": str(e).replace(",", ";"),
            }
        )
    return row


def _mark_pareto(rows: list[dict]):
    for row in rows:
        dominated = any(
            other is not row
            and other["P_star"] >= 0
            and other["P_star"] <= row["P_star"]
            and other["metric"] >= row["metric"]
            and (other["P_star"] < row["P_star"] or other["metric"] > row["metric"])
            for other in rows
        )
        ok = row["P_star"] >= 0 and not np.isnan(row["metric"])
        row["pareto"] = bool(ok and not dominated)


def cmd_sweep(args) -> int:
    plan = _load_json(args.config)
    _require_keys(
        plan,
        {"dataset", "model", "train", "weight_bits", "act_bits",
         "p_offsets", "seeds", "out"},
        "<root>",
    )
    weight_bits = plan.get("weight_bits", [])
    act_bits = plan.get("act_bits", [])
    offsets = plan.get("p_offsets", [])
    seeds = plan.get("seeds", [])
    if not (weight_bits and act_bits and offsets and seeds):
        raise UsageError("sweep plan needs nonempty weight_bits, act_bits, "
                         "p_offsets, and seeds lists")
    jobs = [
        (plan.get("model", {}), plan.get("train", {}), plan.get("dataset", {}),
         M, N, off, seed)
        for M in weight_bits
        for N in act_bits
        for off in offsets
        for seed in seeds
    ]
    workers = max(1, int(os.environ.get("ACCGUARD_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    rows.sort(key=lambda r: (r["M"], r["N"], r["P_star"], r["seed"]))
    _mark_pareto(rows)
    header = ["M", "N", "P_star", "seed", "metric", "sparsity", "entropy_bits",
              "compression_rate", "penalty", "certified", "pareto", "error"]
    pre = f"# config_hash={serde.config_hash(plan)} seeds={seeds}\n"
    _write_text(args.out or plan.get("out"), _csv(rows, header, pre))
    return 0


# ----------------------------------------------------------------- driver


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="accguard",
        description="Train and certify quantized networks with guaranteed "
        "accumulator overflow avoidance.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_checkpoint=False, needs_config=False):
        if needs_config:
            p.add_argument("--config", required=True)
        if needs_checkpoint:
            p.add_argument("--checkpoint", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--P", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--format", choices=["csv", "json"], default=None)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bounds", help="per-layer accumulator bounds as CSV")
    common(p, needs_checkpoint=True)
    p.set_defaults(func=cmd_bounds, default_format="csv")

    p = sub.add_parser("eval", help="integer inference over a dataset")
    common(p, needs_checkpoint=True)
    p.add_argument("--data", default=None)
    p.set_defaults(func=cmd_eval, default_format="json")

    p = sub.add_parser("attack", help="closed-form worst-case certification")
    common(p, needs_checkpoint=True)
    p.set_defaults(func=cmd_attack, default_format="json")

    p = sub.add_parser("sweep", help="grid sweep from a JSON plan")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="sparsity/entropy/compression CSV")
    common(p, needs_checkpoint=True)
    p.set_defaults(func=cmd_report, default_format="csv")

    p = sub.add_parser("export", help="deployment bundle JSON")
    common(p, needs_checkpoint=True)
    p.set_defaults(func=cmd_export, default_format="json")

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if hasattr(args, "format") and args.format is None:
        args.format = getattr(args, "default_format", "csv")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
