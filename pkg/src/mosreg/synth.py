"""Synthetic ground-truth data: procedural textures, registration pairs
with known transforms, and acquisition-path sequences.

Generation warps one large reference texture and crops, so both members
of every pair are interpolated comparably and no border invalidity leaks
into experiments.  Pairwise truths map source-frame coordinates onto
target-frame coordinates and are exact by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DisplacementTooLarge
from .geometry import (
    Homography,
    ViewpointChange,
    compose,
    identity,
    invert,
    translate,
    viewpoint_to_homography,
)
from .imaging import GrayImage, read_image, warp, write_pgm

MANIFEST_SCHEMA = "mosreg-sequence-manifest/1"

DEFAULT_REF_SIZE = 2048
DEFAULT_FRAME_SIZE = 256

# Value-noise octaves: grid spacing in px and relative amplitude.  Chosen
# (measured, then frozen) so the histogram fills the 64-bin range, the
# autocorrelation at a 30 px lag stays below 0.5, and double-resampling
# error stays well under one gray level.
_OCTAVE_SPACINGS = (64, 32, 16, 8, 4)
_OCTAVE_AMPLITUDES = (0.7, 0.62, 0.4, 0.24, 0.12)


def _smoothstep(t):
    return t * t * (3.0 - 2.0 * t)


def procedural_texture(width: int, height: int, seed: int) -> GrayImage:
    """Band-limited multi-octave value noise spanning the full [0, 255]
    range, deterministic per seed.  Dimensions must be at least 64."""
    if width < 64 or height < 64:
        raise ValueError("texture dimensions must be at least 64")
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width]
    acc = np.zeros((height, width))
    for spacing, amp in zip(_OCTAVE_SPACINGS, _OCTAVE_AMPLITUDES):
        nx = width // spacing + 2
        ny = height // spacing + 2
        g = rng.uniform(-1.0, 1.0, (ny, nx))
        u = xs / spacing
        v = ys / spacing
        x0 = u.astype(np.int64)
        y0 = v.astype(np.int64)
        tx = _smoothstep(u - x0)
        ty = _smoothstep(v - y0)
        acc += amp * (g[y0, x0] * (1 - tx) * (1 - ty)
                      + g[y0, x0 + 1] * tx * (1 - ty)
                      + g[y0 + 1, x0] * (1 - tx) * ty
                      + g[y0 + 1, x0 + 1] * tx * ty)
    lo, hi = acc.min(), acc.max()
    return GrayImage.from_array((acc - lo) / (hi - lo) * 255.0)


def make_pair(ref: GrayImage, v: ViewpointChange, crop: int):
    """Cut a (target, source, truth) pair out of a reference texture.

    The target is the central crop; the source is the same crop of the
    reference warped by the viewpoint change.  The returned truth maps
    source coordinates onto target coordinates.
    """
    truth = viewpoint_to_homography(v)
    target = warp(ref, identity(), crop, crop)
    source = warp(ref, truth, crop, crop)
    if not target.mask.all() or not source.mask.all():
        raise DisplacementTooLarge(
            "crop window leaves the reference under this viewpoint change")
    return target.image, source.image, truth


@dataclass(frozen=True)
class PathSegment:
    """One leg of a simulated acquisition path.

    Every step translates by step_px along `direction` (unit vector in
    the current frame); the kind adds a per-step in-plane rotation
    (step_deg), scale change (step_scale) or out-of-plane tilt
    (step_deg, sign alternating so the path stays generable on a flat
    reference while each pairwise change keeps the full magnitude).
    """

    kind: str
    count: int
    step_px: float = 0.0
    step_deg: float = 0.0
    step_scale: float = 0.0
    direction: tuple[float, float] = (1.0, 0.0)

    _KINDS = ("translate", "translate_rotate", "translate_scale",
              "translate_tilt")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("segment count must be >= 1")

    def step_changes(self, frame_size: int):
        """Per-step viewpoint changes for this segment."""
        dx, dy = self.direction
        out = []
        for i in range(self.count):
            kwargs = dict(tx=dx * self.step_px, ty=dy * self.step_px,
                          focal=float(frame_size))
            if self.kind == "translate_rotate":
                kwargs["phi"] = math.radians(self.step_deg)
            elif self.kind == "translate_scale":
                kwargs["tz_as_scale"] = 1.0 + self.step_scale
            elif self.kind == "translate_tilt":
                sign = 1.0 if i % 2 == 0 else -1.0
                kwargs["psi"] = sign * math.radians(self.step_deg)
            out.append(ViewpointChange(**kwargs))
        return out


@dataclass
class SequenceManifest:
    """Ordered frame files plus exact per-consecutive-pair truths."""

    frames: list[str]
    truths: list[Homography]
    source_texture: str
    frame_size: int
    base_dir: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.truths) != len(self.frames) - 1:
            raise ValueError("need exactly one truth per consecutive pair")
        for t in self.truths:
            invert(t)  # must be invertible

    def to_dict(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "frame_size": self.frame_size,
            "source_texture": self.source_texture,
            "frames": list(self.frames),
            "truths": [t.to_dict() for t in self.truths],
        }

    def save(self, path) -> None:
        path = Path(path)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SequenceManifest":
        path = Path(path)
        with open(path) as fh:
            d = json.load(fh)
        if d.get("schema") != MANIFEST_SCHEMA:
            raise ValueError(f"{path}: unknown manifest schema {d.get('schema')!r}")
        return cls(frames=d["frames"],
                   truths=[Homography.from_dict(t) for t in d["truths"]],
                   source_texture=d["source_texture"],
                   frame_size=int(d["frame_size"]),
                   base_dir=path.parent)

    def load_frames(self) -> list[GrayImage]:
        base = self.base_dir or Path(".")
        return [read_image(base / f) for f in self.frames]


def generate_sequence(ref: GrayImage, segments: list[PathSegment],
                      frame_size: int = DEFAULT_FRAME_SIZE,
                      start_offset: tuple[float, float] = (0.0, 0.0)):
    """In-memory sequence generation.

    Returns (frames, truths): frame k is the reference seen through the
    accumulated placement map M_k (frame coords -> reference coords),
    M_0 a pure translation by start_offset, M_{k+1} = M_k o V_{k+1}.
    The pairwise truth for (k, k+1) is exactly V_{k+1}.
    """
    placement = translate(start_offset[0], start_offset[1])
    frames = []
    truths = []

    def render(m):
        out = warp(ref, m, frame_size, frame_size)
        if not out.mask.all():
            raise DisplacementTooLarge(
                f"frame {len(frames)} leaves the reference texture")
        return out.image

    frames.append(render(placement))
    for seg in segments:
        for v in seg.step_changes(frame_size):
            step = viewpoint_to_homography(v)
            placement = compose(placement, step)
            frames.append(render(placement))
            truths.append(step)
    return frames, truths


def make_sequence(ref: GrayImage, segments: list[PathSegment],
                  frame_size: int, out_dir,
                  source_texture: str = "procedural",
                  start_offset: tuple[float, float] = (0.0, 0.0),
                  prefix: str = "frame") -> SequenceManifest:
    """Generate a sequence and write PGM frames plus the manifest JSON
    into out_dir; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames, truths = generate_sequence(ref, segments, frame_size, start_offset)
    names = []
    for k, frame in enumerate(frames):
        name = f"{prefix}_{k:03d}.pgm"
        write_pgm(out_dir / name, frame)
        names.append(name)
    manifest = SequenceManifest(frames=names, truths=truths,
                                source_texture=source_texture,
                                frame_size=frame_size, base_dir=out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest


def paper_path_segments(step_px: float = 10.0) -> list[PathSegment]:
    """The phantom acquisition path: 14 translation frames, 10 with 2
    degree in-plane rotations, 10 with 5% scale changes, 10 with 4 degree
    out-of-plane tilts (45 frames, 44 pairwise truths)."""
    return [
        PathSegment("translate", 14, step_px=step_px, direction=(1.0, 0.0)),
        PathSegment("translate_rotate", 10, step_px=step_px, step_deg=2.0,
                    direction=(0.0, 1.0)),
        PathSegment("translate_scale", 10, step_px=step_px, step_scale=0.05,
                    direction=(0.0, 1.0)),
        PathSegment("translate_tilt", 10, step_px=step_px, step_deg=4.0,
                    direction=(-1.0, 0.0)),
    ]


def realistic_path_segments() -> list[PathSegment]:
    """A 40-pair path within the motion range of real exams:
    steps of at most 5 px, 1 degree, 2% scale."""
    return [
        PathSegment("translate", 15, step_px=5.0, direction=(1.0, 0.0)),
        PathSegment("translate_rotate", 10, step_px=5.0, step_deg=1.0,
                    direction=(0.0, 1.0)),
        PathSegment("translate_scale", 10, step_px=5.0, step_scale=0.02,
                    direction=(0.0, 1.0)),
        PathSegment("translate_tilt", 5, step_px=5.0, step_deg=1.0,
                    direction=(-1.0, 0.0)),
    ]


PATH_PRESETS = {
    "paper-path": paper_path_segments,
    "realistic": realistic_path_segments,
}
