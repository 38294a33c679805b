"""Multi-layer single-target box tracker.

Per frame the tracker picks, from the detector's candidate boxes, the one
maximizing a weighted sum of three cues:

  s_iou  overlap with the box accepted on the previous frame,
  s_ekf  overlap with the box predicted by a gyro-compensated
         constant-velocity Kalman filter,
  s_map  cosine similarity between the candidate's descriptor and a running
         appearance memory, clamped to [0, 1].

A frame whose best total falls below an acceptance threshold produces no
selection ("coasting"): the filter keeps predicting, the previous box and
the memory stay frozen, and a coast counter runs until some candidate scores
above threshold again.

Filter state is x = [x, y, w, h, vx, vy] (top-left corner, size, corner
pixel velocity).  Between detections the state is propagated at gyro rate;
camera rotation enters as the rotational optical flow of the *box center* in
normalized coordinates,

    u'_rot = f (xn yn wx - (1 + xn^2) wy + yn wz)
    v'_rot = f ((1 + yn^2) wx - xn yn wy - xn wz)

with w the camera-frame angular rate, so ego-rotation does not masquerade as
target velocity.  The covariance uses the exact Jacobian of this map,
including the flow's dependence on (x, y, w, h) through the box center.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .detection import Detection, DetectionSet, GyroSample
from .errors import FilterDegenerateError, InitializationError, TimeRegressionError
from .geometry import BoundingBox, CameraModel, iou

log = logging.getLogger(__name__)

MIN_BOX_SIZE = 1.0       # px; filter mean w/h are clamped here
STALE_GYRO_DT = 0.1      # s; longer prediction gaps are flagged as stale
MAX_INNOVATION_COND = 1e12

DEFAULT_WEIGHTS = (3.0, 3.0, 4.0)
DEFAULT_Q_DIAG = (0.01, 0.01, 0.01, 0.01, 0.1, 0.1)
DEFAULT_R_DIAG = (0.5, 0.5, 0.5, 0.5)
DEFAULT_P0_DIAG = (10.0, 10.0, 10.0, 10.0, 100.0, 100.0)


@dataclass(frozen=True)
class TrackerWeights:
    """Cue weights (w_iou, w_ekf, w_map); the published default is (3, 3, 4)."""

    w_iou: float = DEFAULT_WEIGHTS[0]
    w_ekf: float = DEFAULT_WEIGHTS[1]
    w_map: float = DEFAULT_WEIGHTS[2]

    def __post_init__(self):
        if min(self.w_iou, self.w_ekf, self.w_map) < 0:
            raise ValueError("weights must be non-negative")
        if self.w_iou + self.w_ekf + self.w_map <= 0:
            raise ValueError("at least one weight must be positive")

    @property
    def total(self) -> float:
        return self.w_iou + self.w_ekf + self.w_map


@dataclass
class TrackerConfig:
    camera: CameraModel
    weights: TrackerWeights = field(default_factory=TrackerWeights)
    memory_alpha: float = 0.9           # memory retained per update
    acceptance_fraction: float = 0.05   # s_min = fraction * (sum of weights)
    q_diag: tuple = DEFAULT_Q_DIAG      # process noise PSD (px^2/s, px^2/s^3)
    r_diag: tuple = DEFAULT_R_DIAG      # measurement noise (px^2)
    p0_diag: tuple = DEFAULT_P0_DIAG    # initial covariance
    gyro_compensation: bool = True

    def __post_init__(self):
        if not 0.0 <= self.memory_alpha <= 1.0:
            raise ValueError("memory_alpha must be in [0, 1]")
        if self.acceptance_fraction < 0:
            raise ValueError("acceptance_fraction must be >= 0")
        for name, n in (("q_diag", 6), ("r_diag", 4), ("p0_diag", 6)):
            v = getattr(self, name)
            if len(v) != n or any(x < 0 for x in v):
                raise ValueError(f"{name} must be {n} non-negative entries")

    @property
    def s_min(self) -> float:
        return self.acceptance_fraction * self.weights.total


@dataclass
class EkfState:
    mean: np.ndarray  # (6,)
    cov: np.ndarray   # (6,6)
    t: float


@dataclass
class AppearanceMemory:
    """Unit-norm running appearance vector, complementary-filter updated."""

    vector: np.ndarray
    alpha: float = 0.9


@dataclass
class TrackerState:
    ekf: EkfState
    memory: AppearanceMemory
    last_box: BoundingBox          # most recently *accepted* box
    status: str = "tracking"       # "tracking" | "coasting"
    coast_frames: int = 0
    last_gyro_w: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class StepResult:
    state: TrackerState
    selected: Detection | None
    index: int | None
    scores: tuple[float, float, float, float] | None  # (s_iou, s_ekf, s_map, total)
    pred_box: BoundingBox | None = None  # prediction at frame time, before update


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def initialize(prompt_xy, dets: DetectionSet, cfg: TrackerConfig) -> TrackerState:
    """Lock onto the detection whose box center is nearest the prompt point.

    Ties keep the earliest detection in list order.  Raises
    InitializationError when the frame has no detections.
    """
    if not dets.detections:
        raise InitializationError(
            f"no detections at prompt time t={dets.t:.6f}; cannot initialize")
    px, py = float(prompt_xy[0]), float(prompt_xy[1])
    best_i = 0
    best_d = math.inf
    for i, d in enumerate(dets.detections):
        cx, cy = d.box.center
        dist = math.hypot(cx - px, cy - py)
        if dist < best_d:
            best_d = dist
            best_i = i
    chosen = dets.detections[best_i]
    mean = np.zeros(6)
    mean[:4] = chosen.box.as_array()
    state = EkfState(mean, np.diag(cfg.p0_diag).astype(float), dets.t)
    norm = np.linalg.norm(chosen.descriptor)
    if norm == 0.0:
        raise InitializationError("chosen detection has a zero descriptor")
    memory = AppearanceMemory(chosen.descriptor / norm, cfg.memory_alpha)
    return TrackerState(state, memory, chosen.box)


# ---------------------------------------------------------------------------
# Kalman filter
# ---------------------------------------------------------------------------


def _rotational_flow(mean: np.ndarray, w: np.ndarray, cam: CameraModel):
    """Pixel-rate of the box center induced by camera rotation, plus the
    partials of (u', v') w.r.t. normalized center coordinates."""
    f = cam.focal
    xn = (mean[0] + mean[2] / 2.0 - cam.cx) / f
    yn = (mean[1] + mean[3] / 2.0 - cam.cy) / f
    wx, wy, wz = w
    du = f * (xn * yn * wx - (1.0 + xn * xn) * wy + yn * wz)
    dv = f * ((1.0 + yn * yn) * wx - xn * yn * wy - xn * wz)
    # d(du/f)/dxn etc.; multiplied back by f and the 1/f of d(xn)/dx they
    # become the pixel-space partials directly.
    a = yn * wx - 2.0 * xn * wy
    b = xn * wx + wz
    c = -(yn * wy + wz)
    d = 2.0 * yn * wx - xn * wy
    return du, dv, a, b, c, d


def predict_jacobian(state: EkfState, w: np.ndarray, dt: float, cam: CameraModel,
                     compensate: bool = True) -> np.ndarray:
    """State-transition Jacobian of one predict step."""
    F = np.eye(6)
    F[0, 4] = dt
    F[1, 5] = dt
    if compensate:
        _, _, a, b, c, d = _rotational_flow(state.mean, w, cam)
        F[0, 0] += dt * a
        F[0, 1] = dt * b
        F[0, 2] = dt * a / 2.0
        F[0, 3] = dt * b / 2.0
        F[1, 0] = dt * c
        F[1, 1] += dt * d
        F[1, 2] = dt * c / 2.0
        F[1, 3] = dt * d / 2.0
    return F


def ekf_predict(state: EkfState, gyro: GyroSample, cfg: TrackerConfig) -> EkfState:
    """Propagate to gyro.t under constant velocity plus rotational flow.

    dt = 0 is a no-op on the mean and adds no process noise.  A negative dt
    raises TimeRegressionError; dt beyond STALE_GYRO_DT logs a warning but
    still propagates.
    """
    dt = gyro.t - state.t
    if dt < 0.0:
        raise TimeRegressionError(
            f"gyro at t={gyro.t!r} precedes filter state at t={state.t!r}")
    if dt > STALE_GYRO_DT:
        log.warning("stale gyro: dt=%.4f s exceeds %.2f s, propagating anyway",
                    dt, STALE_GYRO_DT)
    w = np.asarray(gyro.w, dtype=float)
    mean = state.mean.copy()
    if cfg.gyro_compensation:
        du, dv, *_ = _rotational_flow(state.mean, w, cfg.camera)
    else:
        du = dv = 0.0
    mean[0] += (mean[4] + du) * dt
    mean[1] += (mean[5] + dv) * dt
    mean[2] = max(MIN_BOX_SIZE, mean[2])
    mean[3] = max(MIN_BOX_SIZE, mean[3])
    F = predict_jacobian(state, w, dt, cfg.camera, cfg.gyro_compensation)
    cov = F @ state.cov @ F.T + np.diag(cfg.q_diag) * dt
    cov = 0.5 * (cov + cov.T)
    return EkfState(mean, cov, gyro.t)


def ekf_update(state: EkfState, box: BoundingBox, cfg: TrackerConfig) -> EkfState:
    """Measurement update with z = [x, y, w, h] (Joseph-form covariance)."""
    H = np.zeros((4, 6))
    H[:4, :4] = np.eye(4)
    R = np.diag(cfg.r_diag).astype(float)
    S = H @ state.cov @ H.T + R
    if np.linalg.cond(S) > MAX_INNOVATION_COND:
        raise FilterDegenerateError(
            f"innovation covariance condition number exceeds {MAX_INNOVATION_COND:g}")
    K = np.linalg.solve(S.T, (state.cov @ H.T).T).T
    z = box.as_array()
    mean = state.mean + K @ (z - H @ state.mean)
    mean[2] = max(MIN_BOX_SIZE, mean[2])
    mean[3] = max(MIN_BOX_SIZE, mean[3])
    IKH = np.eye(6) - K @ H
    cov = IKH @ state.cov @ IKH.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)
    return EkfState(mean, cov, state.t)


def predicted_box(state: EkfState) -> BoundingBox:
    m = state.mean
    return BoundingBox(m[0], m[1], max(MIN_BOX_SIZE, m[2]), max(MIN_BOX_SIZE, m[3]))


# ---------------------------------------------------------------------------
# scoring and per-frame step
# ---------------------------------------------------------------------------


def cosine_score(memory: AppearanceMemory, descriptor: np.ndarray) -> float:
    """Cosine similarity clamped to [0, 1]; zero-norm descriptors score 0."""
    n = np.linalg.norm(descriptor) * np.linalg.norm(memory.vector)
    if n == 0.0:
        return 0.0
    c = float(np.dot(memory.vector, descriptor) / n)
    return min(1.0, max(0.0, c))


def score(det: Detection, state: TrackerState,
          weights: TrackerWeights) -> tuple[float, float, float, float]:
    """(s_iou, s_ekf, s_map, weighted total) for one candidate."""
    s_iou = iou(state.last_box, det.box)
    s_ekf = iou(predicted_box(state.ekf), det.box)
    s_map = cosine_score(state.memory, det.descriptor)
    total = weights.w_iou * s_iou + weights.w_ekf * s_ekf + weights.w_map * s_map
    return (s_iou, s_ekf, s_map, total)


def update_memory(memory: AppearanceMemory, feature: np.ndarray) -> AppearanceMemory:
    """Complementary blend then re-normalize.

    alpha = 1 freezes the memory; alpha = 0 replaces it.  A numerically
    cancelled blend (norm ~ 0) keeps the previous memory rather than emit a
    zero vector.
    """
    blended = memory.alpha * memory.vector + (1.0 - memory.alpha) * feature
    n = np.linalg.norm(blended)
    if n < 1e-12:
        log.warning("appearance blend cancelled to zero norm; memory kept")
        return memory
    return AppearanceMemory(blended / n, memory.alpha)


def step(state: TrackerState, dets: DetectionSet, cfg: TrackerConfig,
         feature_query=None) -> StepResult:
    """Consume one detection frame.

    The filter must have been predicted up to dets.t; if the caller left a
    gap (detections between gyro ticks) it is filled here by zero-order-hold
    on the last seen gyro rate.  On acceptance: Kalman update with the
    selected box, memory update (from feature_query(box) when the caller can
    re-extract appearance at an arbitrary box, else from the detection's own
    descriptor), coast counter reset.  Otherwise the frame coasts.
    """
    ekf = state.ekf
    if dets.t < ekf.t - 1e-12:
        raise TimeRegressionError(
            f"detections at t={dets.t!r} precede filter state at t={ekf.t!r}")
    if dets.t > ekf.t:
        ekf = ekf_predict(ekf, GyroSample(dets.t, state.last_gyro_w), cfg)

    pred = predicted_box(ekf)
    w = cfg.weights
    best = None  # (index, det, scores)
    for i, det in enumerate(dets.detections):
        s_iou = iou(state.last_box, det.box)
        s_ekf = iou(pred, det.box)
        s_map = cosine_score(state.memory, det.descriptor)
        s = (s_iou, s_ekf, s_map,
             w.w_iou * s_iou + w.w_ekf * s_ekf + w.w_map * s_map)
        if best is None or s[3] > best[2][3]:
            best = (i, det, s)

    if best is None or best[2][3] < cfg.s_min:
        new_state = replace(state, ekf=ekf, status="coasting",
                            coast_frames=state.coast_frames + 1)
        return StepResult(new_state, None, None, None, pred)

    i, det, s = best
    ekf = ekf_update(ekf, det.box, cfg)
    feature = feature_query(det.box) if feature_query is not None else det.descriptor
    memory = update_memory(state.memory, feature)
    new_state = replace(state, ekf=ekf, memory=memory, last_box=det.box,
                        status="tracking", coast_frames=0)
    return StepResult(new_state, det, i, s, pred)


# ---------------------------------------------------------------------------
# stateful convenience wrapper
# ---------------------------------------------------------------------------


class Tracker:
    """Holds TrackerState across the gyro/detection event stream."""

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        self.state: TrackerState | None = None

    @property
    def initialized(self) -> bool:
        return self.state is not None

    def initialize(self, prompt_xy, dets: DetectionSet) -> None:
        self.state = initialize(prompt_xy, dets, self.cfg)

    def predict(self, gyro: GyroSample) -> None:
        if self.state is None:
            raise InitializationError("predict before initialize")
        self.state.ekf = ekf_predict(self.state.ekf, gyro, self.cfg)
        self.state.last_gyro_w = np.asarray(gyro.w, dtype=float)

    def step(self, dets: DetectionSet, feature_query=None) -> StepResult:
        if self.state is None:
            raise InitializationError("step before initialize")
        res = step(self.state, dets, self.cfg, feature_query)
        self.state = res.state
        return res

    def trace_record(self, res: StepResult, t: float) -> dict:
        """Per-frame trace row (fixed field order for byte-stable logs).

        "pred" is the filter's box *before* the frame's update -- the
        prediction that scored the candidates -- while "mean" is the
        post-update state.
        """
        st = self.state
        pred = res.pred_box if res.pred_box is not None else predicted_box(st.ekf)
        rec = {
            "t": t,
            "status": st.status,
            "box": None if res.selected is None else res.selected.box.as_array(),
            "s_iou": None if res.scores is None else res.scores[0],
            "s_ekf": None if res.scores is None else res.scores[1],
            "s_map": None if res.scores is None else res.scores[2],
            "s_total": None if res.scores is None else res.scores[3],
            "pred": pred.as_array(),
            "mean": st.ekf.mean,
            "coast": st.coast_frames,
        }
        return rec
