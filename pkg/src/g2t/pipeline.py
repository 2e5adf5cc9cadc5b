"""Shared encode/decode pipelines used by training, evaluation, and serving.

All encoders first rescale the trajectory and layout together to the
unit-width frame, which makes every downstream step invariant to device
scale. The resample step is specified in key-widths and converted using
the normalized layout's mean key width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ctc, neural, shark2
from .discretize import DiscretizerConfig, discretize
from .geometry import (
    DEFAULT_CLAMP,
    DEFAULT_RESAMPLE_STEP,
    EncodedTrajectory,
    KeyboardLayout,
    Trajectory,
    normalize,
    resample,
)


@dataclass(frozen=True)
class EncodeConfig:
    step: float = DEFAULT_RESAMPLE_STEP  # key-widths
    clamp: tuple[int, int] = DEFAULT_CLAMP
    discretizer: DiscretizerConfig = DiscretizerConfig()

    def __post_init__(self):
        object.__setattr__(self, "clamp", tuple(self.clamp))


def _normalized_pair(traj: Trajectory, layout: KeyboardLayout):
    nl = layout.normalized()
    nt = normalize(traj, layout)
    kw = float(np.mean([k.width for k in nl.keys]))
    return nt, nl, kw


def resample_normalized(traj: Trajectory, layout: KeyboardLayout, cfg: EncodeConfig) -> EncodedTrajectory:
    nt, _, kw = _normalized_pair(traj, layout)
    return resample(nt, step=cfg.step * kw, clamp=cfg.clamp)


def discretize_trajectory(traj: Trajectory, layout: KeyboardLayout, cfg: EncodeConfig):
    """Region index sequence (plus one-hot) for a raw trajectory."""
    nt, nl, kw = _normalized_pair(traj, layout)
    enc = resample(nt, step=cfg.step * kw, clamp=cfg.clamp)
    return discretize(enc, nl, cfg.discretizer)


def encode_one_hot_input(traj: Trajectory, layout: KeyboardLayout, cfg: EncodeConfig) -> np.ndarray:
    """(T, 26) one-hot model input for the discretized decoder."""
    disc = discretize_trajectory(traj, layout, cfg)
    if disc.one_hot is None:
        raise ValueError("encoder config must use one-hot encoding for model input")
    return disc.one_hot


def encode_cartesian_input(traj: Trajectory, layout: KeyboardLayout, cfg: EncodeConfig) -> np.ndarray:
    """(T, 2) normalized coordinate input for the conventional decoder."""
    return resample_normalized(traj, layout, cfg).points.copy()


def encode_input(traj: Trajectory, layout: KeyboardLayout, cfg: EncodeConfig, input_dim: int) -> np.ndarray:
    if input_dim == 26:
        return encode_one_hot_input(traj, layout, cfg)
    if input_dim == 2:
        return encode_cartesian_input(traj, layout, cfg)
    raise ValueError(f"no encoder for input_dim {input_dim} (expected 26 or 2)")


def neural_decode_topk(
    traj: Trajectory,
    layout: KeyboardLayout,
    params: neural.ModelParams,
    beam_cfg: ctc.BeamConfig,
    cfg: EncodeConfig | None = None,
) -> list[tuple[str, float]]:
    """resample -> discretize/encode -> forward -> lexicon beam search."""
    cfg = cfg or EncodeConfig()
    x = encode_input(traj, layout, cfg, params.config.input_dim)
    lattice = neural.forward(params, x)
    return ctc.beam_decode_topk(lattice, beam_cfg)


def shark2_decode_topk(
    traj: Trajectory,
    layout: KeyboardLayout,
    tset: shark2.TemplateSet,
    k: int = 4,
) -> list[tuple[str, float]]:
    """Template matching in the normalized frame (templates must be built
    with `build_template_set`, which normalizes the same way)."""
    nt = normalize(traj, layout)
    return shark2.decode_topk(nt, tset, k)


def extract_touch_points(traj: Trajectory, layout: KeyboardLayout) -> list[tuple[str, tuple[float, float]]]:
    """Per-letter touch points from a continuous gesture, in the unit-width frame.

    Each visit in the ground-truth word (consecutive duplicate letters count
    once) is matched to the trajectory point whose arc-length fraction is
    nearest the letter's fraction along the ideal center-connected path.
    """
    if not traj.word:
        raise ValueError("touch-point extraction needs a ground-truth word")
    from .geometry import arc_lengths

    nt = normalize(traj, layout)
    nl = layout.normalized()
    letters = [c for i, c in enumerate(traj.word) if i == 0 or c != traj.word[i - 1]]
    centers = np.array([nl.center(c) for c in letters])
    ideal_cum = arc_lengths(centers)
    ideal_frac = ideal_cum / ideal_cum[-1] if ideal_cum[-1] > 0 else np.full(len(letters), 0.5)

    traj_cum = arc_lengths(nt.points)
    traj_frac = traj_cum / traj_cum[-1] if traj_cum[-1] > 0 else np.zeros(len(nt.points))

    out = []
    for letter, frac in zip(letters, ideal_frac):
        idx = int(np.abs(traj_frac - frac).argmin())
        x, y = nt.points[idx]
        out.append((letter, (float(x), float(y))))
    return out


def build_template_set(
    lexicon,
    layout: KeyboardLayout,
    resolution: int = shark2.DEFAULT_RESOLUTION,
    prune_radius: float = shark2.DEFAULT_PRUNE_RADIUS,
    shape_weight: float = 0.5,
    location_weight: float = 0.5,
) -> shark2.TemplateSet:
    """Templates over the unit-width layout; prune_radius converts from
    key-widths to normalized units."""
    nl = layout.normalized()
    kw = float(np.mean([k.width for k in nl.keys]))
    return shark2.TemplateSet.build(
        lexicon,
        nl,
        resolution=resolution,
        shape_weight=shape_weight,
        location_weight=location_weight,
        prune_radius=prune_radius * kw,
    )
