"""Component super-resolvers.

Six built-in classical methods plus a plug-in that reads precomputed
outputs from disk, each mapping an LR image to an HR estimate at an
integer scale. Resolvers are stateless and deterministic; every output is
clamped to [0, 1] and has exactly scale-times the LR dimensions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    ChannelCountError,
    ConfigError,
    DimensionMismatchError,
    InvalidParameterError,
    MissingExternalOutputError,
    UnknownResolverKindError,
)
from .image import Image, load_image, rgb_to_luma
from .resample import (
    DegradationModel,
    downsample,
    gaussian_blur,
    upsample,
    upsample_bicubic,
    upsample_nearest,
)

RESOLVER_KINDS = (
    "bicubic",
    "lanczos3",
    "nearest",
    "ibp",
    "unsharp_bicubic",
    "selfsim_patch",
    "external_dir",
)


@dataclass(frozen=True)
class ResolverSpec:
    """One component super-resolver: identifier, kind, kind-specific params."""

    id: str
    kind: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in RESOLVER_KINDS:
            raise UnknownResolverKindError(
                f"resolver {self.id!r} has unknown kind {self.kind!r}; known: {', '.join(RESOLVER_KINDS)}"
            )
        if not self.id:
            raise ConfigError("resolver id must be a non-empty string")


@dataclass(frozen=True)
class ResolverSet:
    """Ordered resolvers; the order is the canonical index order for weights."""

    resolvers: tuple[ResolverSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "resolvers", tuple(self.resolvers))
        if len(self.resolvers) < 1:
            raise ConfigError("a resolver set needs at least one resolver")
        ids = [spec.id for spec in self.resolvers]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ConfigError(f"duplicate resolver ids: {', '.join(dupes)}")

    def __len__(self) -> int:
        return len(self.resolvers)

    def __iter__(self):
        return iter(self.resolvers)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(spec.id for spec in self.resolvers)


def load_resolver_config(path: str | Path) -> ResolverSet:
    """Read a resolver set from JSON (authoritative) or TOML.

    Schema: {"resolvers": [{"id": ..., "kind": ..., "params": {...}}, ...]}
    (TOML uses [[resolvers]] tables).
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read resolver config {path}: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            doc = tomllib.loads(raw.decode("utf-8"))
        except Exception as exc:
            raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    else:
        try:
            doc = json.loads(raw.decode("utf-8"))
        except Exception as exc:
            raise ConfigError(f"bad JSON in {path}: {exc}") from exc
    entries = doc.get("resolvers")
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: expected a non-empty 'resolvers' array")
    specs = []
    for entry in entries:
        if not isinstance(entry, dict) or "id" not in entry or "kind" not in entry:
            raise ConfigError(f"{path}: each resolver needs 'id' and 'kind' fields, got {entry!r}")
        specs.append(ResolverSpec(str(entry["id"]), str(entry["kind"]), dict(entry.get("params", {}))))
    return ResolverSet(tuple(specs))


def _check_scale(scale: int) -> None:
    if scale not in (2, 3, 4):
        raise InvalidParameterError(f"resolver scale must be 2, 3 or 4, got {scale!r}")


def ibp_sr(lr: Image, scale: int, iters: int = 10, step: float = 1.0) -> tuple[Image, list[float]]:
    """Iterative back-projection from a bicubic start.

    Each iteration adds step * U(x - H(y)) where H is the degradation
    operator and U is bicubic upsampling. If an update would increase the
    LR residual the step is halved (and stays halved), so the returned
    residual history is non-increasing. The estimate is NOT clamped here.
    """
    model = DegradationModel(scale)
    x = lr.data
    y = upsample_bicubic(lr, scale)
    res = x - downsample(y, model).data
    res_norm = float(np.linalg.norm(res))
    history = [res_norm]
    for _ in range(iters):
        up = upsample_bicubic(Image(res), scale).data
        trial = step
        cand, cand_res, cand_norm = y, res, res_norm
        for _ in range(30):
            data = y.data + trial * up
            new_res = x - downsample(Image(data), model).data
            new_norm = float(np.linalg.norm(new_res))
            if new_norm <= res_norm:
                cand, cand_res, cand_norm = Image(data), new_res, new_norm
                break
            trial /= 2.0
        step = trial
        y, res, res_norm = cand, cand_res, cand_norm
        history.append(res_norm)
    return y, history


def _unsharp_bicubic(lr: Image, scale: int, sigma: float = 1.0, amount: float = 0.5) -> Image:
    base = upsample_bicubic(lr, scale).data
    blurred = gaussian_blur(base, sigma)
    return Image(base + amount * (base - blurred))


def _selfsim_patch(lr: Image, scale: int, patch: int = 5, radius: int = 10) -> Image:
    """Self-similarity detail transfer onto a bicubic base.

    The LR image is compared against its own one-level-down pyramid
    rendering S = U(H(lr)): for each ``patch`` x ``patch`` HR tile, the 7x7
    LR neighborhood of the tile's center is matched (SSD) against S
    neighborhoods within ``radius`` LR pixels, and the upsampled
    high-frequency band (lr - S) from the best match is pasted onto the
    bicubic base. Ties break on the first minimum in row-major scan order.
    """
    s = scale
    model = DegradationModel(s)
    base = upsample_bicubic(lr, s).data
    out = base.copy()
    hh, ww = lr.height, lr.width
    if hh < 2 * s or ww < 2 * s:
        return Image(out)
    low = downsample(lr, model)
    smooth_core = upsample_bicubic(low, s).data  # (s*(hh//s), s*(ww//s))
    smooth = np.zeros_like(lr.data)
    smooth[: smooth_core.shape[0], : smooth_core.shape[1]] = smooth_core
    # replicate-pad the uncovered remainder rows/columns, if any
    for r in range(smooth_core.shape[0], hh):
        smooth[r] = smooth[smooth_core.shape[0] - 1]
    for c in range(smooth_core.shape[1], ww):
        smooth[:, c] = smooth[:, smooth_core.shape[1] - 1]
    hf = lr.data - smooth
    hf_hr = upsample_bicubic(Image(hf), s).data

    half = 3  # 7x7 match window
    pad = radius + half
    out_h, out_w = base.shape[0], base.shape[1]
    for ch in range(lr.channels):
        q_pad = np.pad(lr.data[:, :, ch], pad, mode="edge")
        s_pad = np.pad(smooth[:, :, ch], pad, mode="edge")
        cand_view = sliding_window_view(s_pad, (2 * half + 1, 2 * half + 1))
        row_starts = list(range(0, out_h - patch + 1, patch))
        col_starts = list(range(0, out_w - patch + 1, patch))
        if row_starts[-1] != out_h - patch:
            row_starts.append(out_h - patch)
        if col_starts[-1] != out_w - patch:
            col_starts.append(out_w - patch)
        for i in row_starts:
            ci = i + patch // 2
            u = min(hh - 1, max(0, int(np.floor((ci + 0.5) / s))))
            for j in col_starts:
                cj = j + patch // 2
                v = min(ww - 1, max(0, int(np.floor((cj + 0.5) / s))))
                query = q_pad[u + pad - half : u + pad + half + 1, v + pad - half : v + pad + half + 1]
                block = cand_view[u : u + 2 * radius + 1, v : v + 2 * radius + 1]
                ssd = ((block - query) ** 2).sum(axis=(2, 3))
                flat = int(np.argmin(ssd))
                dy = flat // ssd.shape[1] - radius
                dx = flat % ssd.shape[1] - radius
                hs = min(max(s * dy, -i), out_h - patch - i)
                ws = min(max(s * dx, -j), out_w - patch - j)
                out[i : i + patch, j : j + patch, ch] = (
                    base[i : i + patch, j : j + patch, ch]
                    + hf_hr[i + hs : i + hs + patch, j + ws : j + ws + patch, ch]
                )
    return Image(out)


def _external_dir(spec: ResolverSpec, lr: Image, scale: int, stem: str | None) -> Image:
    directory = spec.params.get("dir")
    if not directory:
        raise ConfigError(f"external resolver {spec.id!r} needs a 'dir' parameter")
    if stem is None:
        raise InvalidParameterError(
            f"external resolver {spec.id!r} needs the image stem to locate its output file"
        )
    ext = str(spec.params.get("ext", "png")).lstrip(".")
    path = Path(directory) / f"{stem}_x{scale}.{ext}"
    if not path.exists():
        raise MissingExternalOutputError(f"resolver {spec.id!r}: no precomputed output at {path}")
    out, _ = load_image(path)
    if out.channels == 3 and lr.channels == 1:
        out = rgb_to_luma(out)
    elif out.channels != lr.channels:
        raise ChannelCountError(
            f"resolver {spec.id!r}: {path} has {out.channels} channels, LR has {lr.channels}"
        )
    if (out.height, out.width) != (lr.height * scale, lr.width * scale):
        raise DimensionMismatchError(
            f"resolver {spec.id!r}: {path} is {out.width}x{out.height}, "
            f"expected {lr.width * scale}x{lr.height * scale}"
        )
    return out


def resolve(spec: ResolverSpec, lr: Image, scale: int, stem: str | None = None) -> Image:
    """Run one component super-resolver on an LR image.

    ``stem`` names the source image for the external plug-in (file lookup);
    built-in kinds ignore it. The output is clamped to [0, 1] and always
    has exactly scale-times the LR dimensions.
    """
    _check_scale(scale)
    kind = spec.kind
    if kind == "bicubic":
        hr = upsample_bicubic(lr, scale)
    elif kind == "lanczos3":
        hr = upsample(lr, scale, "lanczos3")
    elif kind == "nearest":
        hr = upsample_nearest(lr, scale)
    elif kind == "ibp":
        iters = int(spec.params.get("iters", 10))
        step = float(spec.params.get("step", 1.0))
        hr, _ = ibp_sr(lr, scale, iters, step)
    elif kind == "unsharp_bicubic":
        sigma = float(spec.params.get("sigma", 1.0))
        amount = float(spec.params.get("amount", 0.5))
        hr = _unsharp_bicubic(lr, scale, sigma, amount)
    elif kind == "selfsim_patch":
        patch = int(spec.params.get("patch", 5))
        radius = int(spec.params.get("radius", 10))
        hr = _selfsim_patch(lr, scale, patch, radius)
    elif kind == "external_dir":
        hr = _external_dir(spec, lr, scale, stem)
    else:  # pragma: no cover - guarded by ResolverSpec validation
        raise UnknownResolverKindError(f"unknown resolver kind {kind!r}")
    return hr.clamp()


def _dihedral(arr: np.ndarray, k: int, flip: bool) -> np.ndarray:
    out = np.rot90(arr, k, axes=(0, 1))
    return out[:, ::-1] if flip else out


def _dihedral_inv(arr: np.ndarray, k: int, flip: bool) -> np.ndarray:
    out = arr[:, ::-1] if flip else arr
    return np.rot90(out, -k, axes=(0, 1))


def geometric_self_ensemble(spec: ResolverSpec, lr: Image, scale: int, stem: str | None = None) -> Image:
    """Average the resolver over the 8 dihedral transforms of the input.

    For each transform T the round trip T^-1(resolve(T(lr))) is computed and
    the 8 results are averaged. The external plug-in reads a fixed file and
    cannot be re-run on transformed inputs, so it passes through unchanged.
    """
    if spec.kind == "external_dir":
        return resolve(spec, lr, scale, stem)
    acc = None
    for k in range(4):
        for flip in (False, True):
            t_lr = Image(_dihedral(lr.data, k, flip))
            hr = resolve(spec, t_lr, scale, stem)
            back = _dihedral_inv(hr.data, k, flip)
            acc = back.copy() if acc is None else acc + back
    return Image(acc / 8.0).clamp()
