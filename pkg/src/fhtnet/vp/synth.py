"""Synthetic road-like scenes: rays converging on a vanishing point plus clutter."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..oracle import LineParams
from ..pgm import encode_pgm, read_pgm

ORIENTATIONS = ("canonical", "horizontal", "any")


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``vp_region`` is ``(x0, y0, x1, y1)`` as fractions of the image side and
    may extend past ``[0, 1]``.  ``orientation`` limits the convergent line
    slopes: ``canonical`` to ``[0, 1]`` (down-right), ``horizontal`` to
    ``[-1, 1]``, ``any`` to all directions.  Ranges are inclusive ``(lo, hi)``.
    """

    image_side: int = 64
    n_samples: int = 100
    n_convergent: tuple = (3, 5)
    n_distractors: tuple = (0, 2)
    intensity: tuple = (0.5, 1.0)
    width: tuple = (1.0, 2.0)
    noise_sigma: float = 0.05
    vp_region: tuple = (0.2, 0.2, 0.8, 0.8)
    orientation: str = "horizontal"
    ray_gap: tuple = (0.0, 6.0)
    min_angle_deg: float = 6.0
    seed: int = 0

    def __post_init__(self):
        for f in ("n_convergent", "n_distractors", "intensity", "width", "vp_region", "ray_gap"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        if self.image_side < 2 or self.n_samples < 0:
            raise SynthConfigError("image_side must be >= 2 and n_samples >= 0")
        if self.n_convergent[0] < 1 or self.n_convergent[1] < self.n_convergent[0]:
            raise SynthConfigError("at least one convergent line is required")
        if self.n_distractors[0] < 0 or self.n_distractors[1] < self.n_distractors[0]:
            raise SynthConfigError("distractor counts must be a non-negative range")
        if self.noise_sigma < 0:
            raise SynthConfigError("noise_sigma must be non-negative")
        if self.orientation not in ORIENTATIONS:
            raise SynthConfigError(f"orientation must be one of {ORIENTATIONS}")

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthConfig":
        kinds = {f.name: f.default for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            if key not in kinds:
                raise SynthConfigError(f"unknown generator key {key!r}")
            out[key] = _parse_like(kinds[key], raw)
        return cls(**out)


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _parse_like(default, raw):
    if not isinstance(raw, str):
        return raw
    if isinstance(default, tuple):
        return tuple(_parse_like(d, r.strip()) for d, r in zip(default, raw.split(",")))
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


@dataclass
class Sample:
    image: np.ndarray  # float in [0, 1], 8-bit quantised
    vp: tuple
    meta: dict = field(default_factory=dict)


@dataclass
class Dataset:
    samples: list
    config: SynthConfig | None = None

    def __len__(self):
        return len(self.samples)

    @property
    def images(self) -> np.ndarray:
        return np.stack([s.image for s in self.samples]) if self.samples else np.zeros((0, 0, 0))

    @property
    def vps(self) -> np.ndarray:
        return np.array([s.vp for s in self.samples], dtype=np.float64).reshape(-1, 2)

    def split(self, n_first: int) -> tuple["Dataset", "Dataset"]:
        return Dataset(self.samples[:n_first], self.config), Dataset(self.samples[n_first:], self.config)


def render_line(side: int, line: LineParams, width: float, intensity: float, ray=None) -> np.ndarray:
    """Anti-aliased line (or ray); pixel ``[i, j]`` covers ``[j, j+1) x [i, i+1)``.

    ``ray=(x0, y0, dx, dy, gap[, end])`` keeps only the part between ``gap``
    and ``end`` pixels from ``(x0, y0)`` along unit direction ``(dx, dy)``.
    """
    a, b, c = line
    norm = np.hypot(a, b)
    ys, xs = np.mgrid[0:side, 0:side] + 0.5
    dist = np.abs(a * xs + b * ys - c) / norm
    cover = np.clip(width / 2 + 0.5 - dist, 0.0, 1.0)
    if ray is not None:
        x0, y0, dx, dy, gap, *end = ray
        along = (xs - x0) * dx + (ys - y0) * dy
        cover *= np.clip(along - gap + 0.5, 0.0, 1.0)
        if end:
            cover *= np.clip(end[0] - along + 0.5, 0.0, 1.0)
    return intensity * cover


_ANGLE_RANGE = {"canonical": (0.0, np.pi / 4), "horizontal": (-np.pi / 4, np.pi / 4), "any": (0.0, np.pi)}


def _directions(rng, orientation: str, k: int, min_sep: float) -> list[float]:
    """``k`` angles in the orientation's range, pairwise at least ``min_sep`` apart."""
    lo, hi = _ANGLE_RANGE[orientation]
    if orientation == "any":
        hi -= min_sep  # keep the wrap-around pair apart too
    slack = (hi - lo) - (k - 1) * min_sep
    if slack < 0:
        raise SynthConfigError(f"{k} lines cannot be {np.rad2deg(min_sep):.1f} degrees apart in {orientation} range")
    base = np.sort(rng.uniform(0.0, slack, size=k))
    angles = lo + base + min_sep * np.arange(k)
    return [float(a) for a in rng.permutation(angles)]


def _line_through(x, y, theta) -> LineParams:
    # direction (cos, sin); normal (-sin, cos)
    a, b = -np.sin(theta), np.cos(theta)
    return LineParams(float(a), float(b), float(a * x + b * y))


def generate_sample(rng: np.random.Generator, cfg: SynthConfig) -> Sample:
    n = cfg.image_side
    x0, y0, x1, y1 = cfg.vp_region
    vx = float(rng.uniform(x0, x1) * n)
    vy = float(rng.uniform(y0, y1) * n)
    k = int(rng.integers(cfg.n_convergent[0], cfg.n_convergent[1] + 1))
    thetas = _directions(rng, cfg.orientation, k, np.deg2rad(cfg.min_angle_deg))
    img = np.zeros((n, n))
    lines = []
    for th in thetas:
        line = _line_through(vx, vy, th)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        ray = (vx, vy, sign * np.cos(th), sign * np.sin(th), float(rng.uniform(*cfg.ray_gap)))
        img = np.maximum(img, render_line(n, line, rng.uniform(*cfg.width), rng.uniform(*cfg.intensity), ray))
        lines.append(line)
    distractors = []
    m = int(rng.integers(cfg.n_distractors[0], cfg.n_distractors[1] + 1))
    while len(distractors) < m:
        p, q = rng.uniform(0, n - 1, size=(2, 2))
        if np.hypot(*(q - p)) < n / 3:
            continue
        th = float(np.arctan2(q[1] - p[1], q[0] - p[0]))
        line = _line_through(p[0], p[1], th)
        if abs(line.a * vx + line.b * vy - line.c) < 4.0:
            continue
        length = float(np.hypot(*(q - p)))
        ray = (p[0], p[1], np.cos(th), np.sin(th), 0.0, length)
        img = np.maximum(img, render_line(n, line, rng.uniform(*cfg.width), rng.uniform(*cfg.intensity), ray))
        distractors.append(line)
    if cfg.noise_sigma > 0:
        img = img + rng.normal(0.0, cfg.noise_sigma, size=img.shape)
    img = np.rint(np.clip(img, 0.0, 1.0) * 255) / 255
    return Sample(img, (vx, vy), {"lines": lines, "distractors": distractors, "thetas": thetas})


def synth_generate(cfg: SynthConfig, out_dir=None) -> Dataset:
    """Generate ``cfg.n_samples`` samples deterministically from ``cfg.seed``.

    When ``out_dir`` is given the dataset is also written there (see
    :func:`write_dataset`).
    """
    rng = np.random.default_rng(cfg.seed)
    ds = Dataset([generate_sample(rng, cfg) for _ in range(cfg.n_samples)], cfg)
    if out_dir is not None:
        write_dataset(ds, out_dir)
    return ds


def write_dataset(ds: Dataset, out_dir) -> None:
    """PGM per sample, ``annotations.csv`` (filename,x,y) and ``manifest.txt``."""
    from ..nn.io import write_atomic

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["filename", "x", "y"])
    for i, s in enumerate(ds.samples):
        name = f"{i:06d}.pgm"
        write_atomic(out / name, encode_pgm(s.image * 255))
        writer.writerow([name, repr(float(s.vp[0])), repr(float(s.vp[1]))])
    write_atomic(out / "annotations.csv", buf.getvalue().encode())
    manifest = ds.config.to_text() if ds.config is not None else ""
    write_atomic(out / "manifest.txt", manifest.encode())


def load_dataset(path) -> Dataset:
    root = Path(path)
    ann = root / "annotations.csv"
    if not ann.is_file():
        raise FileNotFoundError(f"{ann} not found")
    samples = []
    with ann.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["filename", "x", "y"]:
            raise ValueError(f"{ann}: expected header filename,x,y, got {reader.fieldnames}")
        for row in reader:
            img = read_pgm(root / row["filename"]).astype(np.float64) / 255
            samples.append(Sample(img, (float(row["x"]), float(row["y"])), {"filename": row["filename"]}))
    cfg = None
    manifest = root / "manifest.txt"
    if manifest.is_file():
        pairs = dict(
            line.split("=", 1) for line in manifest.read_text().splitlines() if "=" in line and not line.startswith("#")
        )
        if pairs:
            cfg = SynthConfig.from_mapping(pairs)
    return Dataset(samples, cfg)
