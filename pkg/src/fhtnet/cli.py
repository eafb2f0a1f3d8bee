"""``fhtnet`` command line: transforms, lemma checks and the vanishing point pipeline.

Exit codes: 0 success, 1 failed verification, 2 usage or input error,
3 numerical failure (training divergence).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .fht import Quadrant, fht_quadrant
from .nn import (
    ConfigurationError,
    DivergenceError,
    ModelFormatError,
    Network,
    ShapeError,
    TrainConfig,
    build_fht_arch,
    load_model,
    save_model,
    train,
)
from .nn.io import write_atomic
from .oracle import MAX_LEMMA_P, ResourceError, build_fht_matrix, verify_lemmas
from .pgm import PGMError, normalize_to_u8, read_pgm, write_pgm
from .vp import (
    Dataset,
    SynthConfig,
    SynthConfigError,
    classical_candidates,
    corruption_sweep,
    evaluate,
    load_dataset,
    network_candidates,
    synth_generate,
)
from .vp.classical import pad_pow2

log = logging.getLogger("fhtnet")


class UsageError(Exception):
    """Bad arguments, configuration or input files (exit code 2)."""


# -- configuration -----------------------------------------------------------

ARCH_KEYS = {"scale": "toy", "input_side": "", "channels": "1", "filters": "", "quadrants": "hd", "use_fht": "1"}
TRAIN_KEYS = {f: str(getattr(TrainConfig(), f)) for f in TrainConfig.__dataclass_fields__}
SYNTH_KEYS = {f: "" for f in SynthConfig.__dataclass_fields__}

COMMAND_KEYS = {
    "synth": {"out": "", **SYNTH_KEYS},
    "train": {"data": "", "model": "", "start": "0", "stop": "", "loss_csv": "", **ARCH_KEYS, **TRAIN_KEYS},
    "eval": {"data": "", "model": "", "method": "network", "grids": "4,8,16", "start": "0", "stop": "", "report": "",
             "prefilter": "0", "quadrants": "hd", "rotate": "0"},
    "sweep": {"data": "", "model": "", "grids": "8", "sides": "0,4,8,12,16", "start": "0", "stop": "", "report": "",
              "blur_sigma": "", "rotate": "0"},
    "infer": {"model": "", "image": "", "k": "1", "channels": "0"},
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise UsageError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def run_config(command: str, config_path, overrides) -> dict:
    """Defaults for ``command``, updated by the config file, then by overrides."""
    allowed = COMMAND_KEYS[command]
    values: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        values.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    values.update(parse_config_text("\n".join(overrides), "<overrides>"))
    unknown = sorted(set(values) - set(allowed))
    if unknown:
        raise UsageError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    return {**allowed, **values}


def _int_list(text: str, key: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{key} must be a comma-separated list of integers, got {text!r}") from None


def _flag(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def _require(cfg: dict, *keys):
    missing = [k for k in keys if not cfg[k]]
    if missing:
        raise UsageError(f"missing required key(s): {', '.join(missing)}")


def _existing(path_text: str, what: str) -> Path:
    path = Path(path_text)
    if not path.exists():
        raise UsageError(f"{what} {path} not found")
    return path


def _writable(path_text: str, what: str) -> Path:
    path = Path(path_text)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise UsageError(f"directory for {what} {path} does not exist")
    return path


def _subset(ds: Dataset, cfg: dict) -> Dataset:
    start = int(cfg["start"])
    stop = int(cfg["stop"]) if cfg["stop"] else len(ds)
    if not 0 <= start < stop <= len(ds):
        raise UsageError(f"sample range {start}:{stop} outside dataset of {len(ds)}")
    return Dataset(ds.samples[start:stop], ds.config)


# -- model files ---------------------------------------------------------------

def arch_path(model_path) -> Path:
    """Sidecar holding the architecture keys of a saved model."""
    return Path(str(model_path) + ".arch")


def arch_from_keys(keys: dict):
    kw = {
        "scale": keys.get("scale", "toy"),
        "channels": int(keys.get("channels") or 1),
        "quadrants": [q for q in (keys.get("quadrants") or "hd").split(",") if q],
        "use_fht": _flag(keys.get("use_fht") or "1"),
    }
    if keys.get("input_side"):
        kw["input_side"] = int(keys["input_side"])
    if keys.get("filters"):
        kw["filters"] = int(keys["filters"])
    return build_fht_arch(**kw)


def save_network(path, network: Network, arch_keys: dict) -> None:
    save_model(path, [p.astype(np.float64) for p in network.params])
    text = "".join(f"{k}={arch_keys[k]}\n" for k in ARCH_KEYS)
    write_atomic(arch_path(path), text.encode())


def load_network(path) -> Network:
    path = _existing(path, "model")
    side = arch_path(path)
    if not side.is_file():
        raise UsageError(f"architecture file {side} not found")
    spec = arch_from_keys(parse_config_text(side.read_text(encoding="utf-8"), str(side)))
    return Network(spec, load_model(path))


def _write_rows(path, rows) -> None:
    buf = io.StringIO(newline="")
    writer = csv.DictWriter(buf, fieldnames=["grid", "k", "rect_side", "error"], lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**r, "error": repr(float(r["error"]))})
    write_atomic(path, buf.getvalue().encode())


# -- commands --------------------------------------------------------------------

def _read_image(path: Path) -> np.ndarray:
    if path.suffix == ".f64":
        data = np.fromfile(path, dtype="<f8")
        side = int(round(np.sqrt(data.size)))
        if side * side != data.size or side == 0:
            raise UsageError(f"{path}: raw dump of {data.size} values is not a square image")
        return data.reshape(side, side)
    return read_pgm(path).astype(np.float64)


def cmd_fht(args) -> int:
    img = _read_image(_existing(args.input, "input image"))
    h, w = img.shape
    if h != w or h & (h - 1):
        if not args.pad_to_pow2:
            raise UsageError(f"image is {h}x{w}; need a square power-of-two side (or --pad-to-pow2)")
        img = pad_pow2(img)
    out = fht_quadrant(img, Quadrant.parse(args.quadrant), transposed=args.transposed)
    write_pgm(_writable(args.output, "output"), normalize_to_u8(out))
    if args.raw:
        write_atomic(_writable(args.raw, "raw dump"), np.ascontiguousarray(out, dtype="<f8").tobytes())
    return 0


def cmd_verify(args) -> int:
    if args.p_max < 1:
        raise UsageError("--p-max must be >= 1")
    if args.p_max > MAX_LEMMA_P:
        raise ResourceError(f"--p-max {args.p_max} exceeds the limit of {MAX_LEMMA_P}")
    from .fht import fht_forward, fht_transposed

    names = ["L1", "L2", "L3", "L4", "T1", "FHT=A", "FHT^T=A^T"]
    print("p  " + "  ".join(f"{n:>9}" for n in names))
    failures = []
    rng = np.random.default_rng(0)
    for p in range(1, args.p_max + 1):
        n = 1 << p
        a = build_fht_matrix(p)
        if args.inject_fault:
            a = a.flipped_bit(0, n)
        report = verify_lemmas(p, a)
        imgs = rng.integers(-50, 50, size=(20, n, n))
        fwd = all(np.array_equal(a.apply(x), fht_forward(x)) for x in imgs)
        bwd = all(np.array_equal(a.apply(x, transpose=True), fht_transposed(x)) for x in imgs)
        results = [*report, fwd, bwd]
        print(f"{p:<2} " + "  ".join(f"{'ok' if ok else 'FAIL':>9}" for ok in results))
        failures += [f"{name} at p={p}" for name, ok in zip(names, results) if not ok]
    if failures:
        print("failed: " + ", ".join(failures))
        return 1
    return 0


def cmd_synth(cfg: dict) -> int:
    _require(cfg, "out")
    out = Path(cfg["out"])
    if out.exists() and not out.is_dir():
        raise UsageError(f"{out} exists and is not a directory")
    synth = SynthConfig.from_mapping({k: cfg[k] for k in SYNTH_KEYS if cfg[k]})
    synth_generate(synth, out)
    print(f"wrote {synth.n_samples} samples to {out}")
    return 0


def cmd_train(cfg: dict) -> int:
    _require(cfg, "data", "model")
    ds = _subset(load_dataset(_existing(cfg["data"], "dataset")), cfg)
    model = _writable(cfg["model"], "model")
    loss_csv = _writable(cfg["loss_csv"] or str(model) + ".loss.csv", "loss log")
    arch_keys = {k: cfg[k] for k in ARCH_KEYS}
    if not arch_keys["input_side"]:
        arch_keys["input_side"] = str(ds.images.shape[-1])
    spec = arch_from_keys(arch_keys)
    tc = TrainConfig(**{k: type(getattr(TrainConfig, k))(cfg[k]) for k in TRAIN_KEYS})
    res = train(spec, ds.images, ds.vps, tc)
    save_network(model, res.network, arch_keys)
    lines = ["epoch,loss\n"] + [f"{i},{loss!r}\n" for i, loss in enumerate(res.loss_history)]
    write_atomic(loss_csv, "".join(lines).encode())
    print(f"trained {len(res.loss_history)} epochs on {len(ds)} samples; model written to {model}")
    return 0


def _candidates(cfg: dict, images) -> list:
    if cfg["method"] == "classical":
        quads = tuple(q for q in cfg["quadrants"].split(",") if q)
        pre = _flag(cfg["prefilter"])
        return [classical_candidates(img, quads, pre, limit=4096) for img in images]
    if cfg["method"] != "network":
        raise UsageError(f"method must be network or classical, got {cfg['method']!r}")
    _require(cfg, "model")
    return network_candidates(load_network(cfg["model"]), images, rotation_average=_flag(cfg["rotate"]))


def cmd_eval(cfg: dict) -> int:
    _require(cfg, "data")
    grids = _int_list(cfg["grids"], "grids")
    report = _writable(cfg["report"], "report") if cfg["report"] else None
    ds = _subset(load_dataset(_existing(cfg["data"], "dataset")), cfg)
    cands = _candidates(cfg, ds.images)
    rows = []
    for g in grids:
        rep = evaluate(cands, ds.vps, g, ds.images.shape[-1])
        rows += [{"grid": g, "k": k, "rect_side": 0, "error": rep.error(k)} for k in (1, 5)]
    for r in rows:
        print(f"grid {r['grid']:>3} top-{r['k']} error {r['error']:.4f}")
    if report is not None:
        _write_rows(report, rows)
    return 0


def cmd_sweep(cfg: dict) -> int:
    _require(cfg, "data", "model", "report")
    grids = _int_list(cfg["grids"], "grids")
    sides = _int_list(cfg["sides"], "sides")
    report = _writable(cfg["report"], "report")
    network = load_network(cfg["model"])
    ds = _subset(load_dataset(_existing(cfg["data"], "dataset")), cfg)
    sigma = float(cfg["blur_sigma"]) if cfg["blur_sigma"] else None
    rotate = _flag(cfg["rotate"])

    def predict(images):
        return network_candidates(network, images, rotation_average=rotate)

    rows = corruption_sweep(predict, ds, sides, grids, sigma)
    for r in rows:
        print(f"side {r['rect_side']:>3} grid {r['grid']:>3} top-{r['k']} error {r['error']:.4f}")
    _write_rows(report, rows)
    return 0


def cmd_infer(cfg: dict, dump_dir=None) -> int:
    _require(cfg, "model", "image")
    network = load_network(cfg["model"])
    img = read_pgm(_existing(cfg["image"], "image")).astype(np.float64) / 255
    c = network.spec.input_shape[0]
    x = np.broadcast_to(img, (1, c, *img.shape))
    outs = network.forward(x, return_all=True)
    spatial = network.spec.spatial_map()
    from .vp import predict_vp

    for px, py in predict_vp(outs[-1][0], int(cfg["k"]), spatial):
        print(f"{px:g} {py:g}")
    if dump_dir is not None:
        dump = Path(dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        chans = _int_list(cfg["channels"], "channels")
        for i, (layer, out) in enumerate(zip(network.spec.layers, outs[1:])):
            arr = out[0] if out[0].ndim == 3 else out[0].reshape(1, 1, -1)
            for ch in chans:
                if ch < arr.shape[0]:
                    write_pgm(dump / f"layer{i:02d}_{type(layer).__name__.lower()}_c{ch}.pgm", normalize_to_u8(arr[ch]))
    return 0


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fhtnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fht", help="apply the (transposed) FHT to a PGM or .f64 image")
    p.add_argument("input")
    p.add_argument("output", help="normalized 8-bit PGM")
    p.add_argument("--transposed", action="store_true")
    p.add_argument("--quadrant", default="hd", help="hd, hu, vr or vl")
    p.add_argument("--pad-to-pow2", action="store_true", help="zero-pad bottom/right to a power-of-two square")
    p.add_argument("--raw", help="also write little-endian float64 values here")

    p = sub.add_parser("verify", help="check the FHT matrix lemmas and oracle equivalence")
    p.add_argument("--p-max", type=int, default=MAX_LEMMA_P)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    for name, text in [
        ("synth", "generate a synthetic dataset"),
        ("train", "train a network and write model + loss CSV"),
        ("eval", "grid evaluation report"),
        ("sweep", "blur-corruption sweep"),
        ("infer", "predict the vanishing point of one image"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("-c", "--config", help="key=value configuration file")
        p.add_argument("overrides", nargs="*", metavar="key=value")
        if name == "infer":
            p.add_argument("--dump-intermediate", metavar="DIR", help="write one PGM per layer and selected channel")
    return parser


def _apply_thread_limit():
    raw = os.environ.get("FHTNET_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"FHTNET_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("FHTNET_THREADS must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        limiter = _apply_thread_limit()
        try:
            if args.command == "fht":
                return cmd_fht(args)
            if args.command == "verify":
                return cmd_verify(args)
            cfg = run_config(args.command, args.config, args.overrides)
            if args.command == "infer":
                return cmd_infer(cfg, args.dump_intermediate)
            return {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}[args.command](cfg)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except DivergenceError as exc:
        print(f"fhtnet: training diverged: {exc}", file=sys.stderr)
        return 3
    except (UsageError, ResourceError, PGMError, ModelFormatError, SynthConfigError, ConfigurationError,
            ShapeError, FileNotFoundError, ValueError) as exc:
        print(f"fhtnet: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
