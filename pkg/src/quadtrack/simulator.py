"""Deterministic closed-loop simulator.

Plant: standard rigid-body quadrotor,

    p' = v
    v' = (tau/m) R e3 + [0, 0, -9.81]
    R' = R hat(omega)
    J omega' = torque - omega x J omega

integrated with fixed-step RK4 at the physics rate and re-orthonormalized
(nearest rotation) after every step.  Motors are ideal by default; an
optional first-order lag models spin-up.

Scheduling: three periodic event streams -- physics (integrate the interval
ending at t), control/gyro, camera -- merged by timestamp with ties ordered
physics < control < camera, so sensors always observe a fully integrated
state.  Event times are k/rate with integer k; per simulated second the
stream carries exactly `rate` events.  All randomness (detector noise, gyro
noise, object latents) flows from one seeded generator in a fixed draw
order, so a (scenario, seed) pair fixes every output byte.

The camera is rigidly mounted looking along body x: camera X right = -body y,
camera Y down = -body z, camera Z forward = +body x.  Scenarios may script
the camera platform ("static", "yaw_sine") instead of flying the closed loop;
commands are still computed and logged but not applied, which gives
tracker-only scenarios an actuation-independent detection stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Scenario, scenario_hash
from .controller import (AttitudeGains, BodyCommand, ControllerGains,
                         MixerGeometry, MotorCommand, VisualController,
                         motor_wrench)
from .detection import DetectionSet, GyroSample, SyntheticDetector
from .errors import InitializationError, SimulationAbort
from .geometry import (CameraModel, CameraPose, nearest_rotation, hat,
                       pitch_yaw_from_rotation, project_box, rot_z)
from .logio import EventWriter, event_line
from .metrics import Metrics, compute_metrics
from .scene import SceneObject, SceneSnapshot, scene_step
from .tracker import Tracker, TrackerConfig

GRAVITY = 9.81

# camera-from-body: rows are the camera axes expressed in body coordinates.
CAMERA_FROM_BODY = np.array([
    [0.0, -1.0, 0.0],   # camera x (right)  = -body y
    [0.0, 0.0, -1.0],   # camera y (down)   = -body z
    [1.0, 0.0, 0.0],    # camera z (forward) = body x
])


@dataclass
class QuadParams:
    mass: float = 1.3
    inertia: tuple = (0.01, 0.01, 0.02)  # kg m^2, body-diagonal
    geometry: MixerGeometry = field(default_factory=MixerGeometry)
    motor_lag: float = 0.0               # s; 0 = ideal motors


@dataclass
class QuadState:
    p: np.ndarray                        # world position, m
    v: np.ndarray                        # world velocity, m/s
    R: np.ndarray                        # world-from-body
    omega: np.ndarray                    # body rates, rad/s


def _deriv(p, v, R, w, thrust, torque, params):
    m = params.mass
    J = np.asarray(params.inertia)
    dv = (thrust / m) * R[:, 2] + np.array([0.0, 0.0, -GRAVITY])
    dR = R @ hat(w)
    dw = (torque - np.cross(w, J * w)) / J
    return v, dv, dR, dw


def dynamics_step(state: QuadState, cmd: BodyCommand, params: QuadParams,
                  dt: float) -> QuadState:
    """One RK4 step under a zero-order-held wrench, then SO(3) projection."""
    thrust, torque = cmd.thrust, np.asarray(cmd.torques, dtype=float)
    p, v, R, w = state.p, state.v, state.R, state.omega

    k1 = _deriv(p, v, R, w, thrust, torque, params)
    k2 = _deriv(p + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1],
                R + 0.5 * dt * k1[2], w + 0.5 * dt * k1[3], thrust, torque, params)
    k3 = _deriv(p + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1],
                R + 0.5 * dt * k2[2], w + 0.5 * dt * k2[3], thrust, torque, params)
    k4 = _deriv(p + dt * k3[0], v + dt * k3[1],
                R + dt * k3[2], w + dt * k3[3], thrust, torque, params)

    p1 = p + (dt / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    v1 = v + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    R1 = R + (dt / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    w1 = w + (dt / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    return QuadState(p1, v1, nearest_rotation(R1), w1)


def imu_sample(t: float, state: QuadState, sigma: float,
               rng: np.random.Generator) -> GyroSample:
    """Body rates mapped into the camera frame plus white noise.

    The noise draw is consumed even at sigma = 0 to keep the run's draw
    order independent of the noise setting.
    """
    noise = rng.normal(0.0, 1.0, size=3) * sigma
    return GyroSample(t, CAMERA_FROM_BODY @ state.omega + noise)


def camera_pose(state: QuadState) -> CameraPose:
    """Camera rigidly at the body origin: world-from-camera rotation."""
    return CameraPose(state.R @ CAMERA_FROM_BODY.T, state.p)


# ---------------------------------------------------------------------------
# camera platform scripts
# ---------------------------------------------------------------------------


class _Script:
    """Closed-form platform state for non-closed-loop scenarios."""

    def __init__(self, scenario: Scenario):
        cs = scenario.camera_script
        self.mode = cs.mode
        self.amplitude = cs.amplitude
        self.period = cs.period
        self.p0 = np.asarray(scenario.quad.start_position, dtype=float)
        self.yaw0 = scenario.quad.start_yaw

    def state_at(self, t: float) -> QuadState:
        if self.mode == "static":
            yaw, rate = self.yaw0, 0.0
        else:  # yaw_sine
            w0 = 2.0 * math.pi / self.period
            yaw = self.yaw0 + self.amplitude * math.sin(w0 * t)
            rate = self.amplitude * w0 * math.cos(w0 * t)
        return QuadState(self.p0.copy(), np.zeros(3), rot_z(yaw),
                         np.array([0.0, 0.0, rate]))


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------


@dataclass
class RunArtifacts:
    scenario: Scenario
    events: list                 # GyroSample | DetectionSet, in stream order
    tracker_trace: list[dict]
    command_trace: list[dict]
    truth_trace: list[dict]
    metrics: Metrics | None
    counts: dict
    summary: dict


def _event_count(duration: float, rate: int) -> int:
    n = duration * rate
    r = round(n)
    return int(r) if abs(n - r) < 1e-6 else math.ceil(n)


def build_scene(scenario: Scenario, rng: np.random.Generator) -> list[SceneObject]:
    """Instantiate scene objects; detectable ones draw their latent vectors
    from `rng` in object-id order (part of the run's fixed draw order)."""
    objects = []
    for oc in sorted(scenario.objects, key=lambda o: o.obj_id):
        latent = None
        if not oc.occluder:
            raw = rng.normal(0.0, 1.0, size=scenario.detector.descriptor_dim)
            latent = raw / np.linalg.norm(raw)
        objects.append(SceneObject(oc.obj_id, np.asarray(oc.size, float),
                                   oc.motion.build(), oc.occluder, latent))
    return objects


def run(scenario: Scenario) -> RunArtifacts:
    sc = scenario
    cam = sc.camera.build()
    rng = np.random.default_rng(sc.seed)
    objects = build_scene(sc, rng)
    detector = SyntheticDetector(sc.detector.build(), rng)
    tracker = Tracker(TrackerConfig(
        camera=cam,
        weights=sc.tracker.build_weights(),
        memory_alpha=sc.tracker.memory_alpha,
        acceptance_fraction=sc.tracker.acceptance_fraction,
        q_diag=sc.tracker.q_diag,
        r_diag=sc.tracker.r_diag,
        p0_diag=sc.tracker.p0_diag,
        gyro_compensation=sc.tracker.gyro_compensation,
    ))
    params = QuadParams(sc.quad.mass, sc.quad.inertia,
                        MixerGeometry(sc.quad.arm_length, sc.quad.yaw_coeff,
                                      sc.quad.max_rotor_thrust),
                        sc.quad.motor_lag)
    controller = VisualController(
        cam,
        ControllerGains(
            kp_roll=sc.controller.kp_roll, kd_roll=sc.controller.kd_roll,
            kp_thrust=sc.controller.kp_thrust, kd_thrust=sc.controller.kd_thrust,
            kp_yaw=sc.controller.kp_yaw, kd_yaw=sc.controller.kd_yaw,
            beta=sc.controller.beta, pitch_accel=sc.controller.pitch_accel,
            mass=sc.quad.mass, min_thrust_frac=sc.controller.min_thrust_frac),
        AttitudeGains(sc.controller.attitude_kr, sc.controller.attitude_kw),
        params.geometry, params.inertia, 1.0 / sc.rates.control_hz,
        deriv_tau=sc.controller.deriv_tau, literal=sc.controller.literal_equations)

    scripted = sc.camera_script.mode != "dynamic"
    script = _Script(sc) if scripted else None
    quad = (script.state_at(0.0) if scripted else
            QuadState(np.asarray(sc.quad.start_position, float), np.zeros(3),
                      rot_z(sc.quad.start_yaw), np.zeros(3)))

    n_phys = _event_count(sc.duration, sc.rates.physics_hz)
    n_ctrl = _event_count(sc.duration, sc.rates.control_hz)
    n_cam = _event_count(sc.duration, sc.rates.camera_hz)

    events: list = []
    tracker_trace: list[dict] = []
    command_trace: list[dict] = []
    truth_trace: list[dict] = []
    wrench = MotorCommand(np.zeros(4), False)
    rotor_thrusts = np.zeros(4)  # realized thrusts when motor lag is on
    last_phys_t = 0.0
    ip, ic, icam = 1, 0, 0
    PHYS, CTRL, CAM = 0, 1, 2

    def truth_record(t: float, snapshot: SceneSnapshot, pose: CameraPose) -> dict:
        target = next(o for o in snapshot.objects if o.obj_id == sc.target_id)
        box = project_box(cam, pose, target.center, target.size)
        occl = 0.0
        if box is not None:
            geom = detector._frame_geometry(snapshot, pose, cam)
            occl = next(frac for st, b, frac in geom if st.obj_id == sc.target_id)
        center = None if box is None else box.center
        in_view = (center is not None and 0.0 <= center[0] <= cam.width
                   and 0.0 <= center[1] <= cam.height)
        _, yaw = pitch_yaw_from_rotation(quad.R)
        return {
            "t": t,
            "box": None if box is None else box.as_array(),
            "center": center,
            "occluded": occl,
            "in_view": bool(in_view),
            "quad_p": quad.p,
            "quad_yaw": yaw,
            "target_p": target.center,
            "dist_xy": float(np.hypot(*(quad.p[:2] - target.center[:2]))),
        }

    while ip <= n_phys or ic < n_ctrl or icam < n_cam:
        t_p = ip / sc.rates.physics_hz if ip <= n_phys else math.inf
        t_c = ic / sc.rates.control_hz if ic < n_ctrl else math.inf
        t_k = icam / sc.rates.camera_hz if icam < n_cam else math.inf
        t, kind = min((t_p, PHYS), (t_c, CTRL), (t_k, CAM))

        if kind == PHYS:
            if scripted:
                quad = script.state_at(t)
            else:
                dt = t - last_phys_t
                if params.motor_lag > 0.0:
                    a = 1.0 - math.exp(-dt / params.motor_lag)
                    rotor_thrusts = rotor_thrusts + a * (wrench.thrusts - rotor_thrusts)
                    tau, torq = motor_wrench(MotorCommand(rotor_thrusts, False),
                                             params.geometry)
                    applied = BodyCommand(tau, torq)
                else:
                    tau, torq = motor_wrench(wrench, params.geometry)
                    applied = BodyCommand(tau, torq)
                quad = dynamics_step(quad, applied, params, dt)
                if not (np.all(np.isfinite(quad.p)) and np.all(np.isfinite(quad.v))
                        and np.all(np.isfinite(quad.R)) and np.all(np.isfinite(quad.omega))):
                    raise SimulationAbort(last_phys_t, "non-finite state")
            last_phys_t = t
            ip += 1
            continue

        if kind == CTRL:
            gyro = imu_sample(t, quad, sc.quad.gyro_noise, rng)
            events.append(gyro)
            if tracker.initialized:
                tracker.predict(gyro)
                px, py = predicted_center(tracker)
                cmd, motors = controller.tick(t, (px, py), quad.R, quad.omega)
            else:
                cmd, motors = controller.hover_tick(t, quad.R, quad.omega)
            command_trace.append(controller.command_record(t, cmd, motors))
            wrench = motors
            ic += 1
            continue

        # camera frame
        snapshot = scene_step(objects, t)
        pose = camera_pose(quad)
        if tracker.initialized and tracker.state.ekf.t < t:
            gyro = imu_sample(t, quad, sc.quad.gyro_noise, rng)
            events.append(gyro)
            tracker.predict(gyro)
        dets = detector.detect(snapshot, pose, cam)
        events.append(dets)
        truth_trace.append(truth_record(t, snapshot, pose))
        if not tracker.initialized:
            if t >= sc.prompt.t - 1e-9:
                tracker.initialize((sc.prompt.x, sc.prompt.y), dets)
                tracker_trace.append(init_trace_record(tracker, t))
        else:
            fq = lambda box: detector.extract_target_feature(snapshot, pose, cam, box)
            res = tracker.step(dets, feature_query=fq)
            tracker_trace.append(tracker.trace_record(res, t))
        icam += 1

    metrics = (compute_metrics(tracker_trace, truth_trace, sc.metrics.build())
               if tracker_trace else None)
    counts = {"physics": n_phys, "control": n_ctrl, "camera": n_cam}
    summary = {
        "schema_version": 1,
        "scenario": sc.name,
        "scenario_hash": scenario_hash(sc),
        "seed": sc.seed,
        "duration_s": sc.duration,
        "counts": counts,
        "metrics": None if metrics is None else metrics.as_dict(),
        "final_quad_p": quad.p,
        "final_dist_xy": truth_trace[-1]["dist_xy"] if truth_trace else None,
    }
    return RunArtifacts(sc, events, tracker_trace, command_trace, truth_trace,
                        metrics, counts, summary)


def predicted_center(tracker: Tracker) -> tuple[float, float]:
    from .tracker import predicted_box

    return predicted_box(tracker.state.ekf).center


def init_trace_record(tracker: Tracker, t: float) -> dict:
    """Trace row for the initialization frame (counts as a lock)."""
    st = tracker.state
    return {
        "t": t,
        "status": "tracking",
        "box": st.last_box.as_array(),
        "s_iou": None, "s_ekf": None, "s_map": None, "s_total": None,
        "pred": st.last_box.as_array(),
        "mean": st.ekf.mean,
        "coast": 0,
    }


# ---------------------------------------------------------------------------
# output directory
# ---------------------------------------------------------------------------


def write_run(art: RunArtifacts, out_dir) -> None:
    """Persist the four streams plus summary.  Files are byte-deterministic
    for a fixed (scenario, seed)."""
    import os

    from .logio import write_jsonl

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "events.jsonl"), "w") as fp:
        w = EventWriter(fp)
        for ev in art.events:
            w.append(ev)
    write_jsonl(os.path.join(out_dir, "tracker.jsonl"), art.tracker_trace)
    write_jsonl(os.path.join(out_dir, "commands.jsonl"), art.command_trace)
    write_jsonl(os.path.join(out_dir, "groundtruth.jsonl"), art.truth_trace)
    write_jsonl(os.path.join(out_dir, "summary.json"), [art.summary])
