"""Pinhole projection and planar square-marker pose estimation.

Stands in for the camera + fiducial detector: callers provide the four
corner pixel observations (synthetic or from files) and get back the
marker pose in the camera frame.

The estimator builds a DLT homography from the four correspondences,
decomposes it into the two candidate planar poses, refines each with
damped Gauss-Newton on the 6-DoF reprojection objective, and returns the
candidate with the smaller residual together with the ambiguity ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, rotation_from_axis_angle

MIN_DEPTH_M = 1e-6

GN_MAX_ITERATIONS = 50
GN_STEP_TOL = 1e-10
GN_DAMPING_INIT = 1e-3
GN_DAMPING_UP = 2.0
GN_DAMPING_DOWN = 0.5


class NonPositiveDepth(ValueError):
    """A marker corner is behind or on the camera plane."""


class DegenerateCorners(ValueError):
    """Observed corners are collinear or enclose no area."""


class NoConvergence(RuntimeError):
    """Refinement hit the iteration cap with residual above threshold."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics, pixels.  Distortion is not modeled."""

    fx: float = 800.0
    fy: float = 800.0
    cx: float = 640.0
    cy: float = 360.0
    image_width: int = 1280
    image_height: int = 720

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.image_width and 0 <= self.cy <= self.image_height):
            raise ValueError("principal point must lie inside the image")

    def to_json_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "image_width": self.image_width, "image_height": self.image_height,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(**d)


@dataclass(frozen=True)
class MarkerObservation:
    """Four corner pixels of one detected marker.

    Corner order is fixed: top-left, top-right, bottom-right, bottom-left
    in the marker frame.
    """

    marker_id: int
    corners: np.ndarray  # (4, 2) pixels

    def __post_init__(self):
        c = np.array(self.corners, dtype=float)
        if c.shape != (4, 2):
            raise ValueError("corners must be a 4x2 array")
        if not np.all(np.isfinite(c)):
            raise ValueError("corners must be finite")
        if _quad_min_triangle_area(c) < 1e-9:
            raise DegenerateCorners("corners are collinear or enclose no area")
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)


@dataclass(frozen=True)
class PoseEstimate:
    pose: RigidTransform  # marker in camera frame
    rms_reprojection_error: float  # pixels
    ambiguity_ratio: float  # second-best residual / best residual, >= 1

    def __post_init__(self):
        if self.rms_reprojection_error < 0:
            raise ValueError("rms error must be >= 0")
        if self.ambiguity_ratio < 1.0:
            raise ValueError("ambiguity ratio must be >= 1")

    @property
    def near_ambiguous(self) -> bool:
        """True when the two planar minima are too close to trust (ratio < 1.2)."""
        return self.ambiguity_ratio < 1.2


def marker_corners_3d(marker_side: float) -> np.ndarray:
    """Corner coordinates in the marker frame (z = 0 plane), order TL, TR, BR, BL."""
    h = marker_side / 2.0
    return np.array(
        [[-h, h, 0.0], [h, h, 0.0], [h, -h, 0.0], [-h, -h, 0.0]], dtype=float
    )


def _quad_min_triangle_area(c: np.ndarray) -> float:
    # Smallest of the four corner-triple triangle areas; zero iff degenerate.
    areas = []
    for i in range(4):
        a, b, d = c[i], c[(i + 1) % 4], c[(i + 2) % 4]
        areas.append(abs((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1])) / 2)
    return min(areas)


def project(
    pose: RigidTransform, marker_side: float, intrinsics: CameraIntrinsics
) -> np.ndarray:
    """Pixel coordinates of the four marker corners, shape (4, 2)."""
    pts = (pose.rotation @ marker_corners_3d(marker_side).T).T + pose.translation
    z = pts[:, 2]
    if np.any(z <= MIN_DEPTH_M):
        raise NonPositiveDepth("marker corner at or behind the camera plane")
    u = intrinsics.fx * pts[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * pts[:, 1] / z + intrinsics.cy
    return np.column_stack([u, v])


def synthesize_observation(
    true_pose: RigidTransform,
    marker_side: float,
    intrinsics: CameraIntrinsics,
    pixel_noise_sigma: float = 0.0,
    seed: int = 0,
    marker_id: int = 0,
) -> MarkerObservation:
    """Project the marker and add iid Gaussian pixel noise, reproducible per seed."""
    corners = project(true_pose, marker_side, intrinsics)
    if pixel_noise_sigma > 0:
        rng = np.random.default_rng(seed)
        corners = corners + rng.normal(0.0, pixel_noise_sigma, size=corners.shape)
    return MarkerObservation(marker_id=marker_id, corners=corners)


def _normalized_corners(obs: MarkerObservation, k: CameraIntrinsics) -> np.ndarray:
    c = obs.corners
    return np.column_stack([(c[:, 0] - k.cx) / k.fx, (c[:, 1] - k.cy) / k.fy])


def _homography_dlt(plane_xy: np.ndarray, image_xy: np.ndarray) -> np.ndarray:
    """3x3 homography mapping (X, Y, 1) to normalized image coords, via DLT."""
    rows = []
    for (x, y), (u, v) in zip(plane_xy, image_xy):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    a = np.array(rows)
    _, s, vt = np.linalg.svd(a)
    if s[-2] < 1e-12:
        raise DegenerateCorners("homography system is rank deficient")
    return vt[-1].reshape(3, 3)


def _pose_from_homography(h: np.ndarray) -> RigidTransform:
    h1, h2, h3 = h[:, 0], h[:, 1], h[:, 2]
    scale = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    if h3[2] * scale < 0:
        scale = -scale  # keep the marker in front of the camera
    r1, r2, t = scale * h1, scale * h2, scale * h3
    r = np.column_stack([r1, r2, np.cross(r1, r2)])
    # Polar orthonormalization: nearest rotation in Frobenius norm.
    u, _, vt = np.linalg.svd(r)
    d = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vt))])
    return RigidTransform(u @ d @ vt, t)


def _mirrored_candidate(pose: RigidTransform) -> RigidTransform:
    """Second planar-ambiguity initialization: marker normal reflected across the view ray."""
    n = pose.rotation[:, 2]
    d = pose.translation / np.linalg.norm(pose.translation)
    n2 = 2.0 * float(n @ d) * d - n
    axis = np.cross(n, n2)
    sin_a = np.linalg.norm(axis)
    cos_a = float(np.clip(n @ n2, -1.0, 1.0))
    if sin_a < 1e-12:
        return pose
    r = rotation_from_axis_angle(axis, math.atan2(sin_a, cos_a))
    return RigidTransform.from_orthonormalized(r @ pose.rotation, pose.translation)


def _residuals(pose: RigidTransform, corners3d: np.ndarray,
               observed: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    pts = (pose.rotation @ corners3d.T).T + pose.translation
    z = pts[:, 2]
    if np.any(z <= MIN_DEPTH_M):
        raise NonPositiveDepth("corner behind camera during refinement")
    u = k.fx * pts[:, 0] / z + k.cx
    v = k.fy * pts[:, 1] / z + k.cy
    return (np.column_stack([u, v]) - observed).reshape(-1)


def _refine(init: RigidTransform, corners3d: np.ndarray, observed: np.ndarray,
            k: CameraIntrinsics) -> tuple:
    """Damped Gauss-Newton on the 6-DoF reprojection objective.

    Returns (pose, rms_pixels).  Raises NoConvergence if the iteration cap
    is hit while the residual is still large.
    """
    pose = init
    lam = GN_DAMPING_INIT
    res = _residuals(pose, corners3d, observed, k)
    cost = float(res @ res)
    for _ in range(GN_MAX_ITERATIONS):
        rotated = (pose.rotation @ corners3d.T).T
        pts = rotated + pose.translation
        jac = np.zeros((8, 6))
        for i, (m, p) in enumerate(zip(rotated, pts)):
            x, y, z = p
            du_dp = np.array([k.fx / z, 0.0, -k.fx * x / z**2])
            dv_dp = np.array([0.0, k.fy / z, -k.fy * y / z**2])
            # left-multiplicative rotation perturbation acts on R@P only:
            # dp/dw = -[R@P]x
            skew = np.array([[0, -m[2], m[1]], [m[2], 0, -m[0]], [-m[1], m[0], 0]])
            jac[2 * i, :3] = du_dp @ (-skew)
            jac[2 * i, 3:] = du_dp
            jac[2 * i + 1, :3] = dv_dp @ (-skew)
            jac[2 * i + 1, 3:] = dv_dp
        g = jac.T @ res
        h = jac.T @ jac
        try:
            step = np.linalg.solve(h + lam * np.eye(6), -g)
        except np.linalg.LinAlgError:
            lam *= GN_DAMPING_UP
            continue
        r_new = rotation_from_axis_angle(step[:3], float(np.linalg.norm(step[:3]))) \
            if np.linalg.norm(step[:3]) > 0 else np.eye(3)
        candidate = RigidTransform.from_orthonormalized(
            r_new @ pose.rotation, pose.translation + step[3:]
        )
        try:
            res_c = _residuals(candidate, corners3d, observed, k)
        except NonPositiveDepth:
            lam *= GN_DAMPING_UP
            continue
        cost_c = float(res_c @ res_c)
        if cost_c < cost:
            pose, res, cost = candidate, res_c, cost_c
            lam *= GN_DAMPING_DOWN
            if float(np.linalg.norm(step)) < GN_STEP_TOL:
                break
        else:
            lam *= GN_DAMPING_UP
            if lam > 1e12:
                break
    else:
        # cap hit: accept only if the fit is already tight
        if math.sqrt(cost / 8.0) > 1.0:
            raise NoConvergence("pose refinement did not converge")
    return pose, math.sqrt(cost / 8.0)


def estimate_pose(
    obs: MarkerObservation, marker_side: float, intrinsics: CameraIntrinsics
) -> PoseEstimate:
    """Estimate the marker pose in the camera frame from four corner pixels."""
    if marker_side <= 0:
        raise ValueError("marker_side must be positive")
    corners3d = marker_corners_3d(marker_side)
    normalized = _normalized_corners(obs, intrinsics)
    h = _homography_dlt(corners3d[:, :2], normalized)
    first = _pose_from_homography(h)
    candidates = [first, _mirrored_candidate(first)]

    refined = []
    for c in candidates:
        try:
            refined.append(_refine(c, corners3d, obs.corners, intrinsics))
        except (NonPositiveDepth, NoConvergence):
            continue
    if not refined:
        raise NoConvergence("no pose candidate converged")
    refined.sort(key=lambda pr: pr[1])
    best_pose, best_rms = refined[0]
    if len(refined) > 1:
        ratio = (refined[1][1] + 1e-15) / (best_rms + 1e-15)
    else:
        ratio = float("inf")
    return PoseEstimate(
        pose=best_pose,
        rms_reprojection_error=best_rms,
        ambiguity_ratio=max(1.0, ratio),
    )


def calibrate_base(
    obs: MarkerObservation,
    marker_side: float,
    intrinsics: CameraIntrinsics,
    base_marker_to_robot_base: RigidTransform,
) -> RigidTransform:
    """Robot base pose in the camera frame from one base-marker observation.

    Done once per camera placement; the result is persisted by the CLI for
    the session.
    """
    from .geometry import compose, invert

    est = estimate_pose(obs, marker_side, intrinsics)
    # base-marker-in-camera composed with robot-base-in-base-marker
    return compose(est.pose, invert(base_marker_to_robot_base))
