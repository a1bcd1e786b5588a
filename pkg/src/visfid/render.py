"""Deterministic software rasterizer for stimulus images.

Perspective projection with a z-buffer, per-face flat Lambertian shading
with the light at the eye, white material on a black background.  Output
images are single-channel luminance in [0, 1].
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .mesh import TriMesh, bounding_box, vertex_centroid

SINGLE_WIDTH = 591       # single-stimulus presentation width
PAIR_MEMBER_WIDTH = 400  # each member of a side-by-side pair
PANEL_WIDTH = 512        # panel holding one pair member
PANEL_HEIGHT = 768


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class GrayImage:
    """Row-major luminance raster with values in [0, 1]."""

    pixels: np.ndarray  # (height, width) float64

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if p.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {p.shape}")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("luminance values must lie in [0, 1]")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class CameraSpec:
    """Viewing parameters for the canonical stimulus protocol."""

    fov_deg: float = 40.0
    distance_factor: float = 2.0  # multiple of the bbox diagonal
    azimuth_deg: float = 45.0     # 3/4 view defaults
    elevation_deg: float = 25.0
    look_at: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov_deg must be in (0, 180)")
        if self.distance_factor <= 0:
            raise ValueError("distance_factor must be positive")

    def eye_direction(self) -> np.ndarray:
        """Unit vector from look_at towards the eye (+Z at azimuth=elev=0)."""
        az = np.radians(self.azimuth_deg)
        el = np.radians(self.elevation_deg)
        return np.array([np.sin(az) * np.cos(el), np.sin(el), np.cos(az) * np.cos(el)])


def canonical_camera(mesh: TriMesh, **overrides) -> CameraSpec:
    """Camera aimed at the vertex centroid from the 3/4 view by default."""
    if bounding_box(mesh).is_degenerate:
        raise RenderError("mesh bounding box is degenerate; no canonical camera")
    cam = CameraSpec(**{k: v for k, v in overrides.items() if v is not None})
    if cam.look_at is None:
        cam = replace(cam, look_at=tuple(float(x) for x in vertex_centroid(mesh)))
    return cam


def camera_frame(mesh: TriMesh, cam: CameraSpec):
    """(eye, right, up, forward) world-space camera basis."""
    look_at = np.array(cam.look_at if cam.look_at is not None else vertex_centroid(mesh))
    distance = cam.distance_factor * bounding_box(mesh).diagonal
    eye = look_at + distance * cam.eye_direction()
    forward = look_at - eye
    forward = forward / np.linalg.norm(forward)
    world_up = np.array([0.0, 1.0, 0.0])
    if abs(forward.dot(world_up)) > 0.999:
        world_up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, world_up)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    return eye, right, up, forward


def rasterize(mesh: TriMesh, cam: CameraSpec, width: int, height: int) -> GrayImage:
    """Z-buffered perspective render; background pixels are exactly 0."""
    if width < 1 or height < 1:
        raise RenderError("image dimensions must be positive")
    frame = np.zeros((height, width))
    if mesh.n_faces == 0 or mesh.n_vertices == 0:
        return GrayImage(frame)
    eye, right, up, forward = camera_frame(mesh, cam)

    rel = mesh.vertices - eye
    xc = rel @ right
    yc = rel @ up
    zc = rel @ forward  # positive in front of the camera

    f = 1.0 / np.tan(np.radians(cam.fov_deg) / 2.0)
    aspect = width / height
    near = 1e-6
    zb = np.full((height, width), np.inf)

    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = np.where(zc > near, (f / aspect) * xc / zc, np.nan)
        ndc_y = np.where(zc > near, f * yc / zc, np.nan)
    px = (ndc_x + 1.0) * 0.5 * width - 0.5
    py = (1.0 - ndc_y) * 0.5 * height - 0.5

    a, b, c = mesh.triangle_corners()
    normals = np.cross(b - a, c - a)
    norm_len = np.linalg.norm(normals, axis=1)
    centroids = (a + b + c) / 3.0
    to_eye = eye - centroids
    to_eye_len = np.linalg.norm(to_eye, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lambert = np.einsum("ij,ij->i", normals, to_eye) / (norm_len * to_eye_len)
    lambert = np.nan_to_num(np.maximum(lambert, 0.0))

    order = np.arange(mesh.n_faces)  # z-buffer makes order irrelevant; keep fixed
    for fi in order:
        i0, i1, i2 = mesh.faces[fi]
        if not (zc[i0] > near and zc[i1] > near and zc[i2] > near):
            continue  # near-plane clipping: skip partially-behind faces
        xs = np.array([px[i0], px[i1], px[i2]])
        ys = np.array([py[i0], py[i1], py[i2]])
        zs = np.array([zc[i0], zc[i1], zc[i2]])
        x_min = max(int(np.ceil(xs.min())), 0)
        x_max = min(int(np.floor(xs.max())), width - 1)
        y_min = max(int(np.ceil(ys.min())), 0)
        y_max = min(int(np.floor(ys.max())), height - 1)
        if x_min > x_max or y_min > y_max:
            continue
        gx, gy = np.meshgrid(np.arange(x_min, x_max + 1), np.arange(y_min, y_max + 1))
        d = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (xs[2] - xs[0]) * (ys[1] - ys[0])
        if d == 0.0:
            continue  # degenerate in screen space
        w0 = ((xs[1] - gx) * (ys[2] - gy) - (xs[2] - gx) * (ys[1] - gy)) / d
        w1 = ((xs[2] - gx) * (ys[0] - gy) - (xs[0] - gx) * (ys[2] - gy)) / d
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        # perspective-correct depth from interpolated 1/z
        inv_z = w0 / zs[0] + w1 / zs[1] + w2 / zs[2]
        with np.errstate(divide="ignore"):
            depth = 1.0 / inv_z
        rows = gy[inside]
        cols = gx[inside]
        dep = depth[inside]
        closer = dep < zb[rows, cols]
        if closer.any():
            zb[rows[closer], cols[closer]] = dep[closer]
            frame[rows[closer], cols[closer]] = lambert[fi]
    return GrayImage(frame)


def resize_box(img: GrayImage, width: int, height: int) -> GrayImage:
    """Area-weighted (box filter) resample to the exact target size."""
    if width < 1 or height < 1:
        raise RenderError("target dimensions must be positive")

    def weights(n_src, n_dst):
        # overlap of source pixel j with destination pixel i, both as
        # intervals under uniform rescaling
        edges_dst = np.linspace(0.0, n_src, n_dst + 1)
        w = np.zeros((n_dst, n_src))
        for i in range(n_dst):
            lo, hi = edges_dst[i], edges_dst[i + 1]
            j0, j1 = int(np.floor(lo)), int(min(np.ceil(hi), n_src))
            for j in range(j0, j1):
                w[i, j] = max(0.0, min(hi, j + 1) - max(lo, j))
        return w / w.sum(axis=1, keepdims=True)

    wy = weights(img.height, height)
    wx = weights(img.width, width)
    return GrayImage(np.clip(wy @ img.pixels @ wx.T, 0.0, 1.0))


def render_stimulus(mesh: TriMesh, cam: CameraSpec,
                    width: int = SINGLE_WIDTH) -> GrayImage:
    """Square single-stimulus frame at the presentation width."""
    return rasterize(mesh, cam, width, width)


def compose_pair(left: GrayImage, right: GrayImage) -> GrayImage:
    """Side-by-side pair image: each member box-scaled to 400 px wide,
    centered in a 512x768 panel, panels concatenated to 1024x768."""
    panels = []
    for img in (left, right):
        scale = PAIR_MEMBER_WIDTH / img.width
        h = max(1, round(img.height * scale))
        member = resize_box(img, PAIR_MEMBER_WIDTH, min(h, PANEL_HEIGHT))
        panel = np.zeros((PANEL_HEIGHT, PANEL_WIDTH))
        y0 = (PANEL_HEIGHT - member.height) // 2
        x0 = (PANEL_WIDTH - member.width) // 2
        panel[y0 : y0 + member.height, x0 : x0 + member.width] = member.pixels
        panels.append(panel)
    return GrayImage(np.concatenate(panels, axis=1))


# ---------------------------------------------------------------------------
# PGM (binary, P5) is the canonical raster format.

PGM_MAXVAL = 65535


def save_pgm(img: GrayImage, path: str | os.PathLike) -> None:
    data = np.round(img.pixels * PGM_MAXVAL).astype(">u2")
    with open(os.fspath(path), "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n{PGM_MAXVAL}\n".encode())
        fh.write(data.tobytes())


def load_pgm(path: str | os.PathLike) -> GrayImage:
    with open(os.fspath(path), "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise RenderError(f"{path}: not a binary PGM file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    dtype = ">u2" if maxval > 255 else np.uint8
    raster = np.frombuffer(data, dtype=dtype, offset=pos, count=width * height)
    return GrayImage(raster.reshape(height, width).astype(np.float64) / maxval)
