from __future__ import annotations
import math
from dataclasses import asdict, dataclass as std_dataclass, field
from typing import Literal, Optional

import numpy as np
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from src.components.errors import ConfigError, ShapeError
from src.components.synthdata.utils import (
    ANCHOR_NAMES, BACKGROUND_LATTICE, BACKGROUND_MIN_FRACTION, MIN_NOISE_DEPTH, NOISE_STREAM,
    SPRITE_DEPTH_FRACTION,
)

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(config=ConfigDict(extra="forbid"))
class SpriteSpec:
    """Explicit sprite: top-left corner and depth at scene time zero."""
    x: float
    y: float
    width: int
    height: int
    depth: float
    velocity: tuple[float, float] = (0.0, 0.0)
    depth_velocity: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"sprite size must be positive, got {self.width}x{self.height}")
        if self.depth <= 0:
            raise ValueError(f"sprite depth must be positive, got {self.depth}")


@dataclass(config=ConfigDict(extra="forbid"))
class SceneConfig:
    T: int = 12
    H: int = 64
    W: int = 64
    n_sprites: int = 3
    depth_range: tuple[float, float] = (1.0, 10.0)
    # None means "sample from the seed"; (0, 0) and 1.0 give a static camera.
    camera_translation: Optional[tuple[float, float]] = None
    camera_depth_scale: Optional[float] = None
    max_camera_speed: float = 1.0
    max_dolly: float = 0.02
    sprites: Optional[list[SpriteSpec]] = None
    sprite_size_range: tuple[int, int] = (12, 28)
    max_sprite_speed: float = 2.0
    max_depth_speed: float = 0.1
    texture_cell: float = 6.0
    texture_contrast: float = 0.6
    background_depth_slope: float = 0.1
    depth_noise_std: float = 0.0
    depth_noise_model: Literal["log_gaussian", "additive"] = "log_gaussian"
    focal_length: float = 64.0

    def __post_init__(self):
        near, far = self.depth_range
        if near <= 0 or far <= near:
            raise ValueError(f"depth_range must satisfy 0 < near < far, got {self.depth_range}")
        if self.T < 2:
            raise ValueError(f"T must be at least 2, got {self.T}")
        if self.H < 1 or self.W < 1:
            raise ValueError(f"frame size must be positive, got {self.H}x{self.W}")
        if self.n_sprites < 0:
            raise ValueError("n_sprites must be non-negative")
        if self.sprites is not None and len(self.sprites) != self.n_sprites:
            raise ValueError(f"n_sprites={self.n_sprites} but {len(self.sprites)} sprites given")
        if self.depth_noise_std < 0:
            raise ValueError("depth_noise_std must be >= 0")
        if not 0.0 <= self.background_depth_slope <= 1.0 - BACKGROUND_MIN_FRACTION:
            raise ValueError(f"background_depth_slope must lie in "
                             f"[0, {1.0 - BACKGROUND_MIN_FRACTION:.2f}]")
        if self.camera_depth_scale is not None and self.camera_depth_scale <= 0:
            raise ValueError("camera_depth_scale must be positive")
        if self.texture_cell <= 0 or self.focal_length <= 0:
            raise ValueError("texture_cell and focal_length must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Sequence container
# ---------------------------------------------------------------------------

@std_dataclass
class RgbdSequence:
    rgb: np.ndarray                          # (T, H, W, 3) in [0, 1]
    depth: np.ndarray                        # (T, H, W) > 0
    gt_tracks: Optional[np.ndarray] = None   # (T, H, W, 3) as (u, v, d)
    gt_visibility: Optional[np.ndarray] = None
    seed: int = 0
    anchor_frame: int = 0
    focal_length: float = 64.0
    config: Optional[dict] = None
    name: str = ""

    @property
    def T(self) -> int:
        return self.depth.shape[0]

    @property
    def H(self) -> int:
        return self.depth.shape[1]

    @property
    def W(self) -> int:
        return self.depth.shape[2]

    @property
    def has_ground_truth(self) -> bool:
        return self.gt_tracks is not None and self.gt_visibility is not None

    def validate(self) -> None:
        T, H, W = self.depth.shape
        if self.rgb.shape != (T, H, W, 3):
            raise ShapeError(f"rgb shape {self.rgb.shape} does not match depth {self.depth.shape}")
        if not np.all(self.depth > 0):
            raise ShapeError("depth contains non-positive values")
        if self.gt_tracks is not None and self.gt_tracks.shape != (T, H, W, 3):
            raise ShapeError(f"gt_tracks shape {self.gt_tracks.shape} != {(T, H, W, 3)}")
        if self.gt_visibility is not None and self.gt_visibility.shape != (T, H, W):
            raise ShapeError(f"gt_visibility shape {self.gt_visibility.shape} != {(T, H, W)}")

    def to_dict(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "anchor_frame": self.anchor_frame,
            "focal_length": self.focal_length,
            "shape": [self.T, self.H, self.W],
            "has_ground_truth": self.has_ground_truth,
        }


# ---------------------------------------------------------------------------
# Sampled scene
# ---------------------------------------------------------------------------

@std_dataclass
class _Sprite:
    x: float
    y: float
    width: int
    height: int
    depth: float
    vx: float
    vy: float
    depth_velocity: float
    parallax: float
    base: np.ndarray
    lattice: np.ndarray


@std_dataclass
class _Scene:
    H: int
    W: int
    camera: tuple[float, float]
    dolly: float
    far: float
    slope: float
    cell: float
    contrast: float
    background_base: np.ndarray
    background_lattice: np.ndarray
    sprites: list[_Sprite] = field(default_factory=list)

    # -- kinematics, continuous in scene time tau ---------------------------

    def camera_offset(self, tau: float) -> tuple[float, float]:
        return tau * self.camera[0], tau * self.camera[1]

    def scale(self, tau: float) -> float:
        return self.dolly ** tau

    def sprite_origin(self, k: int, tau: float) -> tuple[float, float]:
        s = self.sprites[k]
        cx, cy = self.camera_offset(tau)
        return s.x + tau * s.vx - cx * s.parallax, s.y + tau * s.vy - cy * s.parallax

    def sprite_depth(self, k: int, tau: float) -> float:
        s = self.sprites[k]
        return (s.depth + tau * s.depth_velocity) * self.scale(tau)

    def background_depth(self, ty: np.ndarray, tau: float) -> np.ndarray:
        wave = 0.5 * (1.0 + np.sin(2.0 * math.pi * ty / (4.0 * self.H)))
        return self.far * (1.0 - self.slope * wave) * self.scale(tau)

    def sprite_covers(self, k: int, tau: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        ox, oy = self.sprite_origin(k, tau)
        s = self.sprites[k]
        lx, ly = u - ox, v - oy
        return (lx >= 0) & (lx < s.width) & (ly >= 0) & (ly < s.height)

    # -- appearance --------------------------------------------------------------

    def _texture(self, lattice: np.ndarray, base: np.ndarray,
                 lx: np.ndarray, ly: np.ndarray) -> np.ndarray:
        ny, nx = lattice.shape[:2]
        gx, gy = lx / self.cell, ly / self.cell
        x0, y0 = np.floor(gx), np.floor(gy)
        fx, fy = (gx - x0)[..., None], (gy - y0)[..., None]
        x0 = x0.astype(np.int64) % nx
        y0 = y0.astype(np.int64) % ny
        x1, y1 = (x0 + 1) % nx, (y0 + 1) % ny
        value = ((1 - fx) * (1 - fy) * lattice[y0, x0] + fx * (1 - fy) * lattice[y0, x1]
                 + (1 - fx) * fy * lattice[y1, x0] + fx * fy * lattice[y1, x1])
        return np.clip(base + self.contrast * (value - 0.5), 0.0, 1.0)

    # -- rendering -----------------------------------------------------------------

    def render(self, tau: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Colour, depth and owning layer (0 = background, k+1 = sprite k)."""
        v, u = np.mgrid[0:self.H, 0:self.W].astype(np.float64)
        cx, cy = self.camera_offset(tau)
        tx, ty = u + cx, v + cy
        depth = self.background_depth(ty, tau)
        color = self._texture(self.background_lattice, self.background_base, tx, ty)
        owner = np.zeros((self.H, self.W), dtype=np.int64)
        for k, s in enumerate(self.sprites):
            ox, oy = self.sprite_origin(k, tau)
            d = self.sprite_depth(k, tau)
            win = self.sprite_covers(k, tau, u, v) & (d < depth)
            if not win.any():
                continue
            depth = np.where(win, d, depth)
            owner = np.where(win, k + 1, owner)
            color[win] = self._texture(s.lattice, s.base, u[win] - ox, v[win] - oy)
        return color, depth, owner

    def occluded(self, layer: np.ndarray, u: np.ndarray, v: np.ndarray,
                 d: np.ndarray, tau: float) -> np.ndarray:
        """True where some other layer is in front of the point at (u, v, d).

        Ties go to the earlier layer, matching the depth buffer in render().
        """
        cx, cy = self.camera_offset(tau)
        bg = self.background_depth(v + cy, tau)
        hidden = (layer != 0) & ((bg < d) | ((bg == d) & (0 < layer)))
        for k in range(len(self.sprites)):
            dk = self.sprite_depth(k, tau)
            in_front = (dk < d) | ((dk == d) & (k + 1 < layer))
            hidden |= (layer != k + 1) & in_front & self.sprite_covers(k, tau, u, v)
        return hidden


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _sample_scene(config: SceneConfig, rng: np.random.Generator) -> _Scene:
    near, far = config.depth_range
    H, W = config.H, config.W
    if config.camera_translation is None:
        camera = tuple(float(c) for c in rng.uniform(-config.max_camera_speed,
                                                      config.max_camera_speed, 2))
    else:
        camera = tuple(float(c) for c in config.camera_translation)
    if config.camera_depth_scale is None:
        dolly = 1.0 + float(rng.uniform(-config.max_dolly, config.max_dolly))
    else:
        dolly = float(config.camera_depth_scale)
    scene = _Scene(
        H=H, W=W, camera=camera, dolly=dolly, far=far,
        slope=config.background_depth_slope, cell=config.texture_cell,
        contrast=config.texture_contrast,
        background_base=rng.uniform(0.2, 0.8, 3),
        background_lattice=rng.uniform(0.0, 1.0, (BACKGROUND_LATTICE, BACKGROUND_LATTICE, 3)),
    )

    specs = list(config.sprites) if config.sprites is not None else []
    if config.sprites is None:
        lo, hi = config.sprite_size_range
        if hi > min(H, W) or lo < 1 or lo > hi:
            raise ConfigError(f"sprite_size_range {config.sprite_size_range} does not fit "
                              f"a {H}x{W} frame")
        horizon = 2.0 * config.T
        top = SPRITE_DEPTH_FRACTION * far
        for _ in range(config.n_sprites):
            h, w = (int(s) for s in rng.integers(lo, hi + 1, 2))
            d0 = float(rng.uniform(near, top))
            dv = float(rng.uniform(-config.max_depth_speed, config.max_depth_speed))
            dv = min(max(dv, (near - d0) / horizon), (top - d0) / horizon)
            vx, vy = rng.uniform(-config.max_sprite_speed, config.max_sprite_speed, 2)
            specs.append(SpriteSpec(x=float(rng.uniform(0, W - w)), y=float(rng.uniform(0, H - h)),
                                    width=w, height=h, depth=d0,
                                    velocity=(float(vx), float(vy)), depth_velocity=dv))

    for k, spec in enumerate(specs):
        if spec.width > W or spec.height > H:
            raise ConfigError(f"sprite {k} of size {spec.width}x{spec.height} is larger than "
                              f"the {W}x{H} frame")
        cells = (int(math.ceil(spec.height / config.texture_cell)) + 1,
                 int(math.ceil(spec.width / config.texture_cell)) + 1)
        scene.sprites.append(_Sprite(
            x=spec.x, y=spec.y, width=spec.width, height=spec.height, depth=spec.depth,
            vx=spec.velocity[0], vy=spec.velocity[1], depth_velocity=spec.depth_velocity,
            parallax=far / spec.depth,
            base=rng.uniform(0.1, 0.9, 3),
            lattice=rng.uniform(0.0, 1.0, cells + (3,)),
        ))
    return scene


def _add_depth_noise(depth: np.ndarray, config: SceneConfig,
                     rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(depth.shape)
    if config.depth_noise_model == "log_gaussian":
        return depth * np.exp(config.depth_noise_std * noise)
    floor = MIN_NOISE_DEPTH * config.depth_range[0]
    return np.maximum(depth + config.depth_noise_std * noise, floor)


def generate_sequence(config: SceneConfig, seed: int, anchor_frame: int = 0) -> RgbdSequence:
    """Render a layered sprite scene with dense ground truth.

    ``anchor_frame`` shifts the time origin: clip frame t shows scene time
    ``anchor_frame + t`` and tracks start from the clip's first frame.
    """
    if anchor_frame < 0:
        raise ConfigError(f"anchor_frame must be >= 0, got {anchor_frame}")
    scene = _sample_scene(config, np.random.default_rng(seed))
    T, H, W = config.T, config.H, config.W
    a = float(anchor_frame)

    rgb = np.empty((T, H, W, 3), dtype=np.float32)
    depth = np.empty((T, H, W), dtype=np.float64)
    owner0 = None
    for t in range(T):
        color, d, owner = scene.render(a + t)
        rgb[t], depth[t] = color, d
        if t == 0:
            owner0 = owner

    v0, u0 = np.mgrid[0:H, 0:W].astype(np.float64)
    cx0, cy0 = scene.camera_offset(a)
    tracks = np.empty((T, H, W, 3), dtype=np.float64)
    visible = np.empty((T, H, W), dtype=bool)
    for t in range(T):
        tau = a + t
        cx, cy = scene.camera_offset(tau)
        u = u0 - (cx - cx0)
        v = v0 - (cy - cy0)
        d = scene.background_depth(v0 + cy0, tau)
        for k in range(len(scene.sprites)):
            mine = owner0 == k + 1
            if not mine.any():
                continue
            ox0, oy0 = scene.sprite_origin(k, a)
            ox, oy = scene.sprite_origin(k, tau)
            u = np.where(mine, u0 + (ox - ox0), u)
            v = np.where(mine, v0 + (oy - oy0), v)
            d = np.where(mine, scene.sprite_depth(k, tau), d)
        if t == 0:
            u, v, d = u0.copy(), v0.copy(), depth[0].copy()
        tracks[t, ..., 0], tracks[t, ..., 1], tracks[t, ..., 2] = u, v, d
        in_frame = (u >= 0) & (u <= W - 1) & (v >= 0) & (v <= H - 1)
        visible[t] = in_frame & ~scene.occluded(owner0, u, v, d, tau)

    if config.depth_noise_std > 0:
        noise_rng = np.random.default_rng([seed, NOISE_STREAM, anchor_frame])
        depth = _add_depth_noise(depth, config, noise_rng)

    seq = RgbdSequence(rgb=rgb, depth=depth, gt_tracks=tracks, gt_visibility=visible,
                       seed=seed, anchor_frame=anchor_frame,
                       focal_length=config.focal_length, config=config.to_dict())
    seq.validate()
    return seq


def anchor_frames(T: int, names: list[str]) -> dict[str, int]:
    """Map anchor names (first/middle/last) to time origins."""
    table = dict(zip(ANCHOR_NAMES, (0, T // 2, T - 1)))
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ConfigError(f"unknown anchor names {unknown}; expected one of {list(ANCHOR_NAMES)}")
    return {n: table[n] for n in names}
