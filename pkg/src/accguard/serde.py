"""Checkpoint serialization: canonical JSON, byte-stable round trips.

Reals are stored as shortest round-trip decimal strings and keys are
emitted sorted, so load-then-save reproduces the file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .bounds import l1_budget_floor
from .network import ActQuant, BaselineDense, FloatDense, Network, WNQDense
from .qcore import DType
from .wnq import AccumConstraint

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _f2s(x) -> str:
    return repr(float(x))


def _arr2s(a) -> list:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return [_f2s(v) for v in a]
    return [_arr2s(row) for row in a]


def _s2arr(rows) -> np.ndarray:
    return np.asarray(
        [[float(v) for v in row] for row in rows]
        if rows and isinstance(rows[0], list)
        else [float(v) for v in rows],
        dtype=np.float64,
    )


@dataclass
class LayerRecord:
    kind: str  # wnq | baseline
    weight_bits: int
    in_bits: int
    in_signed: bool
    acc_bits: int
    w_int: np.ndarray  # (C, K) int64
    d: np.ndarray  # (C,) log2 weight scales
    p_star: int | None = None
    v: np.ndarray | None = None
    t: np.ndarray | None = None
    w_float: np.ndarray | None = None
    act_d: float | None = None  # output activation quantizer (None on last layer)
    act_bits: int | None = None
    act_signed: bool | None = None

    @property
    def out_features(self) -> int:
        return self.w_int.shape[0]

    @property
    def in_features(self) -> int:
        return self.w_int.shape[1]

    @property
    def input_dtype(self) -> DType:
        return DType(self.in_bits, signed=self.in_signed)

    @property
    def weight_dtype(self) -> DType:
        return DType(self.weight_bits, signed=True)

    def weight_scales(self) -> np.ndarray:
        return np.exp2(self.d)


@dataclass
class ModelCheckpoint:
    seed: int
    config_hash: str
    input_d: float
    input_bits: int
    input_signed: bool
    layers: list[LayerRecord] = field(default_factory=list)
    version: int = FORMAT_VERSION

    @property
    def input_dtype(self) -> DType:
        return DType(self.input_bits, signed=self.input_signed)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def checkpoint_from_network(net: Network, seed: int, cfg_hash: str) -> ModelCheckpoint:
    if not net.quantized:
        raise CheckpointError("float networks have no checkpoint representation")
    ckpt = ModelCheckpoint(
        seed=seed,
        config_hash=cfg_hash,
        input_d=float(net.input_d),
        input_bits=net.input_dtype.bits,
        input_signed=net.input_dtype.signed,
    )
    in_bits, in_signed = net.input_dtype.bits, net.input_dtype.signed
    for i, layer in enumerate(net.layers):
        w_int = layer.weight_int().data.astype(np.int64)
        aq = net.act_quants[i] if i < len(net.layers) - 1 else None
        if layer.kind == "wnq":
            rec = LayerRecord(
                kind="wnq",
                weight_bits=layer.weight_dtype.bits,
                in_bits=in_bits,
                in_signed=in_signed,
                acc_bits=layer.constraint.P_star,
                p_star=layer.constraint.P_star,
                w_int=w_int,
                d=layer.d.data.copy(),
                v=layer.V.data.copy(),
                t=layer.t.data.copy(),
            )
        elif layer.kind == "baseline":
            from .bounds import weight_bound
            from .qcore import IntTensor

            in_dtype = DType(in_bits, signed=in_signed)
            wb = max(
                weight_bound(IntTensor(row, layer.weight_dtype), in_dtype).min_bits
                for row in w_int
            )
            rec = LayerRecord(
                kind="baseline",
                weight_bits=layer.weight_dtype.bits,
                in_bits=in_bits,
                in_signed=in_signed,
                acc_bits=wb,
                w_int=w_int,
                d=layer.d.data.copy(),
                w_float=layer.W.data.copy(),
            )
        else:
            raise CheckpointError("float layers cannot be checkpointed")
        if aq is not None:
            rec.act_d = float(aq.d.data)
            rec.act_bits = aq.dtype.bits
            rec.act_signed = aq.dtype.signed
            in_bits, in_signed = aq.dtype.bits, aq.dtype.signed
        ckpt.layers.append(rec)
    return ckpt


def network_from_checkpoint(ckpt: ModelCheckpoint) -> Network:
    layers, acts = [], []
    for i, rec in enumerate(ckpt.layers):
        wdtype = rec.weight_dtype
        if rec.kind == "wnq":
            constraint = AccumConstraint(rec.p_star, rec.input_dtype)
            layers.append(WNQDense(rec.v, rec.t, rec.d, wdtype, constraint))
        else:
            layers.append(BaselineDense(rec.w_float, rec.d, wdtype))
        if i < len(ckpt.layers) - 1:
            aq = ActQuant(rec.act_bits, rec.act_d, signed=rec.act_signed)
            acts.append(aq)
    return Network(layers, acts, ckpt.input_d, ckpt.input_dtype)


def _layer_to_json(rec: LayerRecord) -> dict:
    obj = {
        "kind": rec.kind,
        "weight_bits": rec.weight_bits,
        "in_bits": rec.in_bits,
        "in_signed": rec.in_signed,
        "acc_bits": rec.acc_bits,
        "w_int": [[int(v) for v in row] for row in rec.w_int],
        "d": _arr2s(rec.d),
    }
    if rec.kind == "wnq":
        obj["p_star"] = rec.p_star
        obj["v"] = _arr2s(rec.v)
        obj["t"] = _arr2s(rec.t)
    else:
        obj["w_float"] = _arr2s(rec.w_float)
    if rec.act_d is not None:
        obj["act"] = {
            "d": _f2s(rec.act_d),
            "bits": rec.act_bits,
            "signed": rec.act_signed,
        }
    return obj


def _layer_from_json(obj: dict) -> LayerRecord:
    act = obj.get("act")
    return LayerRecord(
        kind=obj["kind"],
        weight_bits=obj["weight_bits"],
        in_bits=obj["in_bits"],
        in_signed=obj["in_signed"],
        acc_bits=obj["acc_bits"],
        w_int=np.asarray(obj["w_int"], dtype=np.int64),
        d=_s2arr(obj["d"]),
        p_star=obj.get("p_star"),
        v=_s2arr(obj["v"]) if "v" in obj else None,
        t=_s2arr(obj["t"]) if "t" in obj else None,
        w_float=_s2arr(obj["w_float"]) if "w_float" in obj else None,
        act_d=float(act["d"]) if act else None,
        act_bits=act["bits"] if act else None,
        act_signed=act["signed"] if act else None,
    )


def dumps(ckpt: ModelCheckpoint) -> str:
    obj = {
        "format_version": ckpt.version,
        "seed": ckpt.seed,
        "config_hash": ckpt.config_hash,
        "input": {
            "d": _f2s(ckpt.input_d),
            "bits": ckpt.input_bits,
            "signed": ckpt.input_signed,
        },
        "layers": [_layer_to_json(rec) for rec in ckpt.layers],
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def loads(text: str) -> ModelCheckpoint:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"malformed checkpoint: {e}") from None
    if obj.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported format_version {obj.get('format_version')!r}"
        )
    try:
        ckpt = ModelCheckpoint(
            seed=obj["seed"],
            config_hash=obj["config_hash"],
            input_d=float(obj["input"]["d"]),
            input_bits=obj["input"]["bits"],
            input_signed=obj["input"]["signed"],
            layers=[_layer_from_json(rec) for rec in obj["layers"]],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed checkpoint field: {e}") from None
    validate(ckpt)
    return ckpt


def validate(ckpt: ModelCheckpoint) -> None:
    """Re-derive and check the structural invariants on load."""
    for i, rec in enumerate(ckpt.layers):
        wdtype = rec.weight_dtype
        if not wdtype.contains(rec.w_int):
            raise CheckpointError(f"layer {i}: integer weights outside {wdtype} range")
        if rec.kind == "wnq":
            budget = l1_budget_floor(rec.p_star, rec.input_dtype)
            norms = np.abs(rec.w_int).sum(axis=1)
            if int(norms.max(initial=0)) > budget:
                raise CheckpointError(
                    f"layer {i}: channel l1 norm {int(norms.max())} exceeds "
                    f"budget {budget} for P*={rec.p_star}"
                )
    # Stored integer weights must match what the parameters re-derive.
    net = network_from_checkpoint(ckpt)
    for i, (rec, w) in enumerate(zip(ckpt.layers, net.integer_weights())):
        if not np.array_equal(rec.w_int, w):
            raise CheckpointError(f"layer {i}: stored w_int does not match parameters")


def save(ckpt: ModelCheckpoint, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(ckpt))


def load(path: str) -> ModelCheckpoint:
    with open(path) as fh:
        return loads(fh.read())
