"""Scene samplers and the rejection-sampling refinement loop.

:class:`BaselineSamplerModel` is a per-class statistical layout model that
stands in for a learned generator; anything with the same ``sample`` /
``refit`` methods (:class:`SceneSampler`) can drive :func:`rejection_loop`.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
from shapely.geometry import Point, Polygon

from .errors import AcceptanceShortfall, FitError, SamplingError, ValidationError
from .metrics import average_cuboid_iou, cross_entity_intersection
from .scene import FloorPlan, Pose, Scene, SceneObject, cuboids_from_json, cuboids_to_json

COVARIANCE_EPS = 1e-6
MAX_PLACEMENT_ATTEMPTS = 100
QUARTER = math.pi / 2


class SceneSampler(Protocol):
    def sample(self, floor: FloorPlan, room_type: str, seed: int) -> Scene: ...

    def refit(self, accepted: Sequence[Scene]) -> "SceneSampler": ...


@dataclass
class ClassStats:
    translation_mean: list          # (x, z)
    translation_cov: list           # 2x2
    y_mean: float
    rotation_probs: list            # over 0, pi/2, pi, 3pi/2
    theta_jitter: float
    log_size_mean: list
    log_size_std: list
    assemblies: list = field(default_factory=list)  # list of cuboid tuples


@dataclass
class BaselineSamplerModel:
    count_probs: dict       # room_type -> {count: prob}
    class_probs: dict       # room_type -> {label: prob}
    classes: dict           # label -> ClassStats

    def sample(self, floor: FloorPlan, room_type: str, seed: int) -> Scene:
        return sample_scene(self, floor, room_type, seed)

    def refit(self, accepted: Sequence[Scene]) -> "BaselineSamplerModel":
        return fit_baseline(accepted)

    def to_json(self) -> dict:
        classes = {}
        for label, st in self.classes.items():
            d = asdict(st)
            d["assemblies"] = [cuboids_to_json(a) for a in st.assemblies]
            classes[label] = d
        return {
            "count_probs": {rt: {str(k): v for k, v in p.items()} for rt, p in self.count_probs.items()},
            "class_probs": self.class_probs,
            "classes": classes,
        }

    @classmethod
    def from_json(cls, data) -> "BaselineSamplerModel":
        try:
            classes = {}
            for label, d in data["classes"].items():
                d = dict(d)
                d["assemblies"] = [tuple(cuboids_from_json(a)) for a in d["assemblies"]]
                classes[label] = ClassStats(**d)
            counts = {rt: {int(k): float(v) for k, v in p.items()} for rt, p in data["count_probs"].items()}
            return cls(counts, data["class_probs"], classes)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed sampler model: {exc}", "model") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "BaselineSamplerModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _normalized(counter: Counter) -> dict:
    total = sum(counter.values())
    return {k: counter[k] / total for k in sorted(counter)}


def _wrap(angle: float) -> float:
    return math.remainder(angle, 2 * math.pi)


def fit_baseline(dataset: Sequence[Scene]) -> BaselineSamplerModel:
    """Maximum-likelihood fit of counts, class frequencies, poses and sizes.

    Translation covariances get ``1e-6 * I`` added so degenerate fits stay
    positive definite.

    Raises:
        FitError: empty dataset, or no objects at all.
    """
    if not dataset:
        raise FitError("cannot fit a sampler on an empty dataset")
    counts: dict = defaultdict(Counter)
    labels: dict = defaultdict(Counter)
    per_class: dict = defaultdict(list)
    for scene in dataset:
        counts[scene.room_type][len(scene.objects)] += 1
        for obj in scene.objects:
            labels[scene.room_type][obj.label] += 1
            per_class[obj.label].append(obj)
    if not per_class:
        raise FitError("dataset contains no objects")

    classes = {}
    for label in sorted(per_class):
        objs = per_class[label]
        t = np.array([o.pose.translation for o in objs])
        xz = t[:, [0, 2]]
        cov = np.cov(xz.T, bias=True) if len(objs) > 1 else np.zeros((2, 2))
        cov = np.atleast_2d(cov) + COVARIANCE_EPS * np.eye(2)
        bins = Counter()
        residuals = []
        for o in objs:
            k = round(o.pose.theta / QUARTER)
            bins[k % 4] += 1
            residuals.append(_wrap(o.pose.theta - k * QUARTER))
        logs = np.log(np.array([o.pose.size for o in objs]))
        pool = []
        for o in objs:
            if o.cuboids and o.cuboids not in pool:
                pool.append(o.cuboids)
        classes[label] = ClassStats(
            translation_mean=xz.mean(axis=0).tolist(),
            translation_cov=cov.tolist(),
            y_mean=float(t[:, 1].mean()),
            rotation_probs=[bins[k] / len(objs) for k in range(4)],
            theta_jitter=float(np.sqrt(np.mean(np.square(residuals)))),
            log_size_mean=logs.mean(axis=0).tolist(),
            log_size_std=logs.std(axis=0).tolist(),
            assemblies=pool,
        )
    return BaselineSamplerModel(
        count_probs={rt: _normalized(c) for rt, c in sorted(counts.items())},
        class_probs={rt: _normalized(c) for rt, c in sorted(labels.items())},
        classes=classes,
    )


def _choice(rng: np.random.Generator, probs: dict):
    keys = list(probs)
    p = np.array([probs[k] for k in keys], dtype=np.float64)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def sample_scene(model: BaselineSamplerModel, floor: FloorPlan, room_type: str, seed: int) -> Scene:
    """Draw one scene; each object center is redrawn until it falls inside the floor.

    Raises:
        SamplingError: the model has no statistics for ``room_type`` or an
            object cannot be placed within 100 draws.
    """
    if room_type not in model.count_probs:
        raise SamplingError(f"sampler was not fitted for room type {room_type!r}")
    rng = np.random.default_rng(seed)
    polygon = Polygon(floor.vertices)
    count = int(_choice(rng, model.count_probs[room_type]))
    objects = []
    for k in range(count):
        label = _choice(rng, model.class_probs[room_type])
        st = model.classes[label]
        size = np.exp(rng.normal(st.log_size_mean, st.log_size_std))
        quarter = int(rng.choice(4, p=np.asarray(st.rotation_probs) / sum(st.rotation_probs)))
        theta = quarter * QUARTER + (rng.normal(0.0, st.theta_jitter) if st.theta_jitter > 0 else 0.0)
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            x, z = rng.multivariate_normal(st.translation_mean, st.translation_cov)
            if polygon.contains(Point(x, z)):
                break
        else:
            raise SamplingError(f"could not place {label!r} inside the floor after {MAX_PLACEMENT_ATTEMPTS} draws")
        cuboids = st.assemblies[int(rng.integers(len(st.assemblies)))] if st.assemblies else ()
        pose = Pose((float(x), st.y_mean, float(z)), tuple(float(s) for s in size), float(theta))
        objects.append(SceneObject(label, pose, tuple(cuboids), id=f"obj{k}"))
    return Scene(room_type, floor, tuple(objects))


# ---------------------------------------------------------------------------
# Rejection sampling


@dataclass(frozen=True)
class RejectionConfig:
    """``t_threshold`` bounds the per-scene average cuboid IoU.

    Settings used at full scale: 15000-20000 candidates per round, threshold
    0.001, three rounds.
    """

    k_candidates: int = 500
    t_threshold: float = 0.001
    rounds: int = 3
    min_accepted: Optional[int] = None
    average_mode: str = "nonzero"

    def __post_init__(self):
        if self.k_candidates < 1:
            raise ValidationError("must be >= 1", "k_candidates")
        if self.t_threshold < 0:
            raise ValidationError("must be >= 0", "t_threshold")
        if self.rounds < 1:
            raise ValidationError("must be >= 1", "rounds")
        if self.average_mode not in ("nonzero", "all"):
            raise ValidationError("must be 'nonzero' or 'all'", "average_mode")

    @property
    def resolved_min_accepted(self) -> int:
        if self.min_accepted is not None:
            return self.min_accepted
        return max(1, self.k_candidates // 10)


def filter_candidates(scenes: Sequence[Scene], config: RejectionConfig) -> tuple[list[Scene], list[Scene]]:
    """Split scenes by whether their average cuboid IoU is at most the threshold (order kept)."""
    accepted, rejected = [], []
    for s in scenes:
        (accepted if average_cuboid_iou(s, config.average_mode) <= config.t_threshold else rejected).append(s)
    return accepted, rejected


def candidate_seed(master_seed: int, round_index: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, round_index, index]).generate_state(1)[0])


def _scene_ciou(scene: Scene) -> Optional[float]:
    inter, total = cross_entity_intersection(scene)
    return 1000.0 * inter / total if total > 0 else None


def _draw(args):
    sampler, floor, room_type, seed, threshold, mode = args
    scene = sampler.sample(floor, room_type, seed)
    return scene, average_cuboid_iou(scene, mode) <= threshold, _scene_ciou(scene)


def rejection_loop(
    sampler: SceneSampler,
    floors: Sequence[FloorPlan],
    config: RejectionConfig,
    seed: int,
    dataset: Sequence[Scene] = (),
    room_type: str = "bedroom",
    workers: int = 1,
):
    """Sample, filter and refit for ``config.rounds`` rounds.

    Round ``i`` draws ``k_candidates`` scenes (cycling through ``floors``),
    keeps those under the IoU threshold as ``R_i``, forms the distilled set
    ``S_i = R_i + S_{i-1}`` starting from ``S_0 = dataset``, and refits the
    sampler on ``S_i``.

    Returns:
        ``(sampler, reports, distilled)``: the final sampler, one report dict
        per round and the final distilled set.

    Raises:
        AcceptanceShortfall: a round accepted fewer than the minimum; the
            exception carries the last good sampler and the reports.
    """
    if not floors:
        raise ValidationError("need at least one floor plan", "floors")
    distilled = list(dataset)
    reports = []
    for r in range(1, config.rounds + 1):
        jobs = [
            (sampler, floors[k % len(floors)], room_type, candidate_seed(seed, r, k), config.t_threshold, config.average_mode)
            for k in range(config.k_candidates)
        ]
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_draw, jobs, chunksize=16))
        else:
            results = [_draw(j) for j in jobs]
        accepted = [s for s, ok, _ in results if ok]
        cious = [c for _, _, c in results if c is not None]
        report = {
            "round": r,
            "n_candidates": config.k_candidates,
            "n_accepted": len(accepted),
            "acceptance_rate": len(accepted) / config.k_candidates,
            "mean_ciou": float(np.mean(cious)) if cious else 0.0,
            "distilled_size": len(distilled) + len(accepted),
            "shortfall": len(accepted) < config.resolved_min_accepted,
        }
        reports.append(report)
        if report["shortfall"]:
            raise AcceptanceShortfall(
                f"round {r} accepted {len(accepted)} < {config.resolved_min_accepted} scenes", sampler, reports
            )
        distilled = accepted + distilled
        sampler = sampler.refit(distilled)
    return sampler, reports, distilled
