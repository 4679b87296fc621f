"""Switching Kalman filter over candidate road segments.

The discrete mode is the segment the vehicle is on; each mode carries one
Gaussian pose estimate. A step mixes the previous modes into each current
one through the transition matrix (collapsing the mixture by moment
matching), predicts with odometry, updates with that segment's cartographic
observation and the GPS fix if any, then reweights the modes by their
observation likelihoods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from roadmatch.motion import ElementaryMotion, StateEstimate, VehicleParams, predict, wrap_angle
from roadmatch.observation import CartoObservation, GpsFix, build_gps_observation
from roadmatch.road_map import RoadMap, Segment

_LOG_2PI = math.log(2 * math.pi)
_JITTER = 1e-9


class SingularInnovation(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SkfConfig:
    stay_probability: float = 0.8
    jump_epsilon: float = 1e-3
    prune_threshold: float = 1e-2
    weight_floor: float = 1e-300

    def __post_init__(self):
        if not 0 < self.stay_probability < 1:
            raise ValueError("stay_probability must be in (0, 1)")
        if not 0 <= self.prune_threshold < 1:
            raise ValueError("prune_threshold must be in [0, 1)")
        if self.jump_epsilon < 0:
            raise ValueError("jump_epsilon must be >= 0")


@dataclass
class Hypothesis:
    segment_id: int | None
    estimate: StateEstimate
    weight: float


@dataclass
class HypothesisSet:
    hypotheses: list[Hypothesis]
    fallback: bool = False

    def __len__(self):
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)

    @property
    def ids(self) -> list:
        return [h.segment_id for h in self.hypotheses]

    @property
    def weights(self) -> np.ndarray:
        return np.array([h.weight for h in self.hypotheses])

    def weight_of(self, segment_id) -> float:
        for h in self.hypotheses:
            if h.segment_id == segment_id:
                return h.weight
        return 0.0


@dataclass(frozen=True)
class ModeTransition:
    prev_ids: tuple
    curr_ids: tuple
    matrix: np.ndarray = field(repr=False)


def mode_transition(prev_ids: Sequence, curr_ids: Sequence, road_map: RoadMap,
                    cfg: SkfConfig) -> ModeTransition:
    """Row-stochastic B(i, j) = P(current segment j | previous segment i).

    A previous segment keeps ``stay_probability`` if it is still a
    candidate; the rest goes uniformly to connected candidates and every
    unconnected candidate gets ``jump_epsilon`` before the row is
    normalized.
    """
    if not curr_ids:
        raise ValueError("current candidate list is empty")
    B = np.zeros((len(prev_ids), len(curr_ids)))
    for r, i in enumerate(prev_ids):
        linked = [c for c, j in enumerate(curr_ids) if j != i and i is not None
                  and road_map.connected(i, j)]
        remaining = 1.0
        for c, j in enumerate(curr_ids):
            if j == i and i is not None:
                B[r, c] = cfg.stay_probability
                remaining -= cfg.stay_probability
        for c in linked:
            B[r, c] = remaining / len(linked)
        for c, j in enumerate(curr_ids):
            if j != i and c not in linked:
                B[r, c] = cfg.jump_epsilon
        total = B[r].sum()
        B[r] = B[r] / total if total > 0 else 1.0 / len(curr_ids)
    return ModeTransition(tuple(prev_ids), tuple(curr_ids), B)


def _angle_rows(H: np.ndarray) -> list[int]:
    return [r for r in range(H.shape[0]) if H[r, 2] == 1 and not H[r, :2].any()]


def kf_update(prior: StateEstimate, z, H, R) -> tuple[StateEstimate, float]:
    """Kalman measurement update (Joseph form) and the log-likelihood of
    ``z`` under the predicted measurement distribution."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = prior.cov
    innov = z - H @ prior.mean
    for r in _angle_rows(H):
        innov[r] = wrap_angle(innov[r])
    S = H @ P @ H.T + R
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        S = S + _JITTER * np.eye(len(S))
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise SingularInnovation("innovation covariance is singular") from None
    PHt = P @ H.T
    # K = P H^T S^-1 via the Cholesky factor
    K = solve_triangular(L, solve_triangular(L, PHt.T, lower=True, check_finite=False),
                         lower=True, trans="T", check_finite=False).T
    mean = prior.mean + K @ innov
    mean[2] = wrap_angle(mean[2])
    IKH = np.eye(3) - K @ H
    cov = IKH @ P @ IKH.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)
    white = solve_triangular(L, innov, lower=True, check_finite=False)
    ll = -0.5 * (white @ white) - np.log(np.diag(L)).sum() - 0.5 * len(z) * _LOG_2PI
    return StateEstimate(mean, cov), float(ll)


def collapse(weights: Sequence[float], estimates: Sequence[StateEstimate]) -> StateEstimate:
    """Moment-match a Gaussian mixture to one Gaussian (headings are
    averaged as offsets from the heaviest component)."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    if len(estimates) == 1:
        return estimates[0].copy()
    ref = estimates[int(np.argmax(w))].mean
    diffs = np.array([e.mean - ref for e in estimates])
    diffs[:, 2] = [wrap_angle(d) for d in diffs[:, 2]]
    mean_offset = w @ diffs
    cov = np.zeros((3, 3))
    for wi, e, d in zip(w, estimates, diffs):
        dd = d - mean_offset
        cov += wi * (e.cov + np.outer(dd, dd))
    return StateEstimate(ref + mean_offset, 0.5 * (cov + cov.T))


def _uniform(hyps: list[Hypothesis]) -> list[Hypothesis]:
    n = len(hyps)
    return [Hypothesis(h.segment_id, h.estimate, 1.0 / n) for h in hyps]


def skf_step(hset: HypothesisSet, motion: ElementaryMotion,
             candidates: Sequence[tuple[Segment, CartoObservation]],
             gps, B: ModeTransition, cfg: SkfConfig, params: VehicleParams) -> HypothesisSet:
    """One filter cycle over the current candidate segments.

    ``gps`` is None (masked), a :class:`GpsFix`, or a ``(z, H, R)`` triple.
    """
    if not candidates:
        raise ValueError("skf_step needs at least one candidate")
    if B.matrix.shape != (len(hset), len(candidates)):
        raise ValueError(f"transition matrix shape {B.matrix.shape} does not match "
                         f"{len(hset)} hypotheses x {len(candidates)} candidates")
    if isinstance(gps, GpsFix):
        gps = build_gps_observation(gps)
    prev_w = hset.weights
    prev_est = [h.estimate for h in hset]
    new: list[Hypothesis] = []
    log_w = np.empty(len(candidates))
    for c, (seg, obs) in enumerate(candidates):
        mix = prev_w * B.matrix[:, c]
        prior_mass = float(mix.sum())
        if prior_mass > 0:
            est = collapse(mix, prev_est)
        else:
            est = collapse(prev_w, prev_est)
        est = predict(est, motion, params)
        est, ll = kf_update(est, obs.z, np.eye(3), obs.cov)
        if gps is not None:
            est, ll_gps = kf_update(est, *gps)
            ll += ll_gps
        log_w[c] = math.log(max(prior_mass, cfg.weight_floor)) + ll
        new.append(Hypothesis(seg.id, est, 0.0))
    top = log_w.max()
    if not np.isfinite(top):
        return HypothesisSet(_uniform(new), fallback=True)
    w = np.exp(log_w - top)
    w /= w.sum()
    for h, wi in zip(new, w):
        h.weight = float(wi)
    return HypothesisSet(new)


def normalize_and_prune(hset: HypothesisSet, cfg: SkfConfig) -> HypothesisSet:
    if not len(hset):
        raise ValueError("empty hypothesis set")
    w = hset.weights
    total = w.sum()
    w = w / total if total > 0 else np.full(len(w), 1.0 / len(w))
    keep = [k for k in range(len(w)) if w[k] >= cfg.prune_threshold]
    if not keep:
        keep = [int(np.argmax(w))]
    kept_total = w[keep].sum()
    out = [Hypothesis(hset.hypotheses[k].segment_id, hset.hypotheses[k].estimate,
                      float(w[k] / kept_total)) for k in keep]
    return HypothesisSet(out, fallback=hset.fallback)


def _id_key(segment_id):
    return (1, 0) if segment_id is None else (0, segment_id)


def best_hypothesis(hset: HypothesisSet) -> tuple:
    if not len(hset):
        raise ValueError("empty hypothesis set")
    h = min(hset, key=lambda h: (-h.weight, _id_key(h.segment_id)))
    return h.segment_id, h.estimate, h.weight
