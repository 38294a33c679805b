"""Geometric primitives: pixel boxes, pinhole camera, SO(3) helpers.

Frame conventions used everywhere in this package:

  world   ENU, Z up, right-handed.
  body    X forward, Y left, Z up.  Attitude R is world-from-body.
  camera  Z forward (optical axis), X right, Y down.  Pixel u grows right,
          pixel v grows down, origin at the top-left image corner.

Angles follow the ZYX (yaw-pitch-roll) convention: R = Rz(yaw) Ry(pitch) Rx(roll).
With Z up this makes positive pitch tilt the nose *down* (forward axis gains a
negative Z component), which is the sign the image-space setpoint logic relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAttitudeError

# A projected point closer than this (camera Z, meters) counts as behind the lens.
MIN_VIEW_DEPTH = 1e-6


# ---------------------------------------------------------------------------
# pixel-space boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box, top-left corner (x, y) plus width/height.

    Boxes may extend beyond the image bounds; only w > 0 and h > 0 are
    enforced.  Instances are immutable value objects.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"box field {name} is not finite: {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive extent, got w={self.w} h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)

    @staticmethod
    def from_array(a) -> "BoundingBox":
        x, y, w, h = (float(v) for v in a)
        return BoundingBox(x, y, w, h)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two pixel boxes, in [0, 1].

    Identical boxes give exactly 1.0; disjoint or merely touching boxes give
    exactly 0.0.  Symmetric in its arguments by construction.
    """
    if a == b:
        return 1.0
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = ix2 - ix
    ih = iy2 - iy
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    # (x + w) - x can round past w, so cap: the true intersection never
    # exceeds either box's area, and the cap keeps the ratio inside [0, 1]
    inter = min(iw * ih, a.area, b.area)
    union = a.area + b.area - inter
    return inter / union


def covered_fraction(target: BoundingBox, covers: list[BoundingBox]) -> float:
    """Fraction of `target`'s area covered by the union of `covers`.

    Exact union via coordinate compression (the cover count is tiny here, so
    the quadratic cell sweep is fine).
    """
    clipped = []
    tx2, ty2 = target.x + target.w, target.y + target.h
    for c in covers:
        x1 = max(target.x, c.x)
        y1 = max(target.y, c.y)
        x2 = min(tx2, c.x + c.w)
        y2 = min(ty2, c.y + c.h)
        if x2 > x1 and y2 > y1:
            clipped.append((x1, y1, x2, y2))
    if not clipped:
        return 0.0
    xs = sorted({v for r in clipped for v in (r[0], r[2])})
    ys = sorted({v for r in clipped for v in (r[1], r[3])})
    covered = 0.0
    for i in range(len(xs) - 1):
        cx = 0.5 * (xs[i] + xs[i + 1])
        for j in range(len(ys) - 1):
            cy = 0.5 * (ys[j] + ys[j + 1])
            if any(r[0] <= cx <= r[2] and r[1] <= cy <= r[3] for r in clipped):
                covered += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j])
    return covered / target.area


# ---------------------------------------------------------------------------
# pinhole camera
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics.  Square pixels, no distortion.

    The vertical field of view and focal length are coupled through
    f = (H/2) / tan(vfov/2); the constructor checks the relation to 1e-9
    relative so a model can never carry inconsistent values.
    """

    width: int
    height: int
    vfov: float  # vertical field of view, rad
    focal: float  # px
    cx: float
    cy: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0.0 < self.vfov < math.pi:
            raise ValueError(f"vfov out of range (0, pi): {self.vfov}")
        expected = (self.height / 2.0) / math.tan(self.vfov / 2.0)
        if abs(expected - self.focal) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError(
                f"inconsistent intrinsics: focal={self.focal}, "
                f"(H/2)/tan(vfov/2)={expected}"
            )

    @staticmethod
    def from_vfov(width: int, height: int, vfov: float,
                  cx: float | None = None, cy: float | None = None) -> "CameraModel":
        focal = (height / 2.0) / math.tan(vfov / 2.0)
        return CameraModel(width, height, vfov, focal,
                           width / 2.0 if cx is None else cx,
                           height / 2.0 if cy is None else cy)

    @staticmethod
    def from_focal(width: int, height: int, focal: float,
                   cx: float | None = None, cy: float | None = None) -> "CameraModel":
        vfov = 2.0 * math.atan((height / 2.0) / focal)
        return CameraModel(width, height, vfov, focal,
                           width / 2.0 if cx is None else cx,
                           height / 2.0 if cy is None else cy)


@dataclass(frozen=True)
class CameraPose:
    """Camera extrinsics: rotation is world-from-camera, position in world."""

    rotation: np.ndarray  # (3,3)
    position: np.ndarray  # (3,)


def project_point(cam: CameraModel, pose: CameraPose, p_world) -> tuple[float, float] | None:
    """Project a world point to pixels; None if at or behind the camera plane."""
    pc = pose.rotation.T @ (np.asarray(p_world, dtype=float) - pose.position)
    if pc[2] <= MIN_VIEW_DEPTH:
        return None
    u = cam.focal * pc[0] / pc[2] + cam.cx
    v = cam.focal * pc[1] / pc[2] + cam.cy
    return (u, v)


def project_box(cam: CameraModel, pose: CameraPose, center, size) -> BoundingBox | None:
    """Pixel bound of a camera-facing rectangle of physical extent (w, h)
    metres centered at a world point (sprite model: apparent size scales as
    focal * extent / depth).

    Returns None (not visible) if the center lies behind the camera or the
    projection subtends less than one pixel in either dimension.  The result
    is *not* clamped to the image border.
    """
    center = np.asarray(center, dtype=float)
    uv = project_point(cam, pose, center)
    if uv is None:
        return None
    depth = camera_depth(pose, center)
    w = cam.focal * float(size[0]) / depth
    h = cam.focal * float(size[1]) / depth
    if w < 1.0 or h < 1.0:
        return None
    return BoundingBox(uv[0] - w / 2.0, uv[1] - h / 2.0, w, h)


def camera_depth(pose: CameraPose, p_world) -> float:
    """Camera-frame Z of a world point (distance along the optical axis)."""
    return float((pose.rotation.T @ (np.asarray(p_world, dtype=float) - pose.position))[2])


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def zyx_matrix(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w < 0.0:
        w += 2.0 * math.pi
    w -= math.pi
    if w == -math.pi:
        w = math.pi
    return w


def pitch_yaw_from_rotation(R: np.ndarray) -> tuple[float, float]:
    """(pitch, yaw) of a ZYX-factored rotation.

    pitch in [-pi/2, pi/2], yaw in (-pi, pi].  Raises DegenerateAttitudeError
    within 1e-6 rad of the gimbal-lock pitch +/- pi/2.
    """
    s = -float(R[2, 0])
    s = max(-1.0, min(1.0, s))
    pitch = math.asin(s)
    if math.pi / 2.0 - abs(pitch) < 1e-6:
        raise DegenerateAttitudeError(f"pitch {pitch:.8f} within 1e-6 of gimbal lock")
    yaw = math.atan2(float(R[1, 0]), float(R[0, 0]))
    return pitch, wrap_angle(yaw)


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R)
    if R.shape != (3, 3):
        return False
    return (np.max(np.abs(R.T @ R - np.eye(3))) < tol
            and abs(np.linalg.det(R) - 1.0) < tol)


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Orthogonal Procrustes projection of M onto SO(3)."""
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def hat(w) -> np.ndarray:
    """Skew matrix such that hat(w) @ v == cross(w, v)."""
    wx, wy, wz = (float(v) for v in w)
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def vee(M: np.ndarray) -> np.ndarray:
    """Inverse of hat for skew-symmetric M."""
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def quat_from_rotation(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0 (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax([R[0, 0], R[1, 1], R[2, 2]]))
        if i == 0:
            s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                          (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
        elif i == 1:
            s = math.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
            q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                          0.25 * s, (R[1, 2] + R[2, 1]) / s])
        else:
            s = math.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
            q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                          (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q = q / np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    return q
