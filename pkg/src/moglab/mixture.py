"""Class-conditional 2D Gaussian mixture families used as ground truth.

The default family is a recursively constructed, branching arrangement of
highly anisotropic components: each node spawns ``branching`` children whose
means are offset along rotated unit vectors shrinking by ``scale_decay`` per
level, and leaf covariances are aligned with the local branch direction with
a fixed eigenvalue ratio. Densities, posteriors, and exact sampling are all
available in closed form, which makes the family usable as an analytic oracle.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

# Largest covariance eigenvalue at recursion level k is _LEAF_COV_SCALE * scale_decay**k.
_LEAF_COV_SCALE = 3.0e-3
# Mean offset length at recursion level k is _OFFSET_SCALE * scale_decay**k.
_OFFSET_SCALE = 1.0
# Half-angle of the fan of child branches around the parent heading.
_BRANCH_SPREAD = 1.05
# Placement of per-class root components.
_CLASS_RADIUS = 1.0
_ROOT_RADIUS = 0.55

_WEIGHT_TOL = 1e-12


@dataclass(eq=False)
class GaussianComponent:
    """One mixture component: weight, mean, and 2x2 SPD covariance."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(2)
        self.cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not self.weight > 0:
            raise ValueError(f"component weight must be > 0, got {self.weight}")
        if not np.allclose(self.cov, self.cov.T, rtol=0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive-definite") from None


class _Packed:
    """Flat array view of a component list, with derived per-component terms."""

    def __init__(self, components):
        self.weights = np.array([c.weight for c in components])
        self.means = np.array([c.mean for c in components])
        self.covs = np.array([c.cov for c in components])
        self._finish()

    def _finish(self):
        self.inv_covs = np.linalg.inv(self.covs)
        sign, logdet = np.linalg.slogdet(self.covs)
        if np.any(sign <= 0):
            raise ValueError("covariance must be positive-definite")
        self.log_norms = -math.log(2.0 * math.pi) - 0.5 * logdet
        with np.errstate(divide="ignore"):
            self.log_weights = np.where(self.weights > 0, np.log(self.weights), -np.inf)
        self.chols = np.linalg.cholesky(self.covs)

    @classmethod
    def from_arrays(cls, weights, means, covs):
        packed = cls.__new__(cls)
        packed.weights = np.asarray(weights, dtype=float)
        packed.means = np.asarray(means, dtype=float)
        packed.covs = np.asarray(covs, dtype=float)
        packed._finish()
        return packed


@dataclass(eq=False)
class ClassMixture:
    """An ordered Gaussian mixture for one class label."""

    label: int
    components: list[GaussianComponent]
    _packed: _Packed | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.components:
            raise ValueError("mixture needs at least one component")
        total = math.fsum(c.weight for c in self.components)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"component weights must sum to 1, got {total!r}")

    def packed(self) -> _Packed:
        if self._packed is None:
            self._packed = _Packed(self.components)
        return self._packed


@dataclass(eq=False)
class LabeledMixtureFamily:
    """Per-class mixtures plus a prior over class labels."""

    classes: list[ClassMixture]
    class_prior: np.ndarray

    def __post_init__(self):
        self.class_prior = np.asarray(self.class_prior, dtype=float).reshape(-1)
        if len(self.class_prior) != len(self.classes):
            raise ValueError("class_prior length must match number of classes")
        if np.any(self.class_prior < 0):
            raise ValueError("class_prior entries must be >= 0")
        if abs(math.fsum(self.class_prior.tolist()) - 1.0) > _WEIGHT_TOL:
            raise ValueError("class_prior must sum to 1")
        labels = [m.label for m in self.classes]
        if len(set(labels)) != len(labels):
            raise ValueError("class labels must be distinct")
        self._by_label = {m.label: m for m in self.classes}
        self._marginal = None

    @property
    def labels(self) -> list[int]:
        return [m.label for m in self.classes]

    def class_by_label(self, label: int) -> ClassMixture:
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"unknown class label {label!r}") from None

    def marginal_packed(self) -> _Packed:
        """All components pooled, weighted by the class prior."""
        if self._marginal is None:
            weights, means, covs = [], [], []
            for prior, mix in zip(self.class_prior, self.classes):
                p = mix.packed()
                weights.append(prior * p.weights)
                means.append(p.means)
                covs.append(p.covs)
            self._marginal = _Packed.from_arrays(
                np.concatenate(weights), np.concatenate(means), np.concatenate(covs)
            )
        return self._marginal


@dataclass
class FractalConfig:
    """Parameters of the recursive family construction."""

    num_classes: int = 2
    base_components_per_class: int = 2
    branching: int = 3
    depth: int = 4
    scale_decay: float = 0.35
    anisotropy_ratio: float = 0.05
    rotation_jitter: float = 0.25
    rng_seed: int = 7

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.base_components_per_class < 1:
            raise ValueError("base_components_per_class must be >= 1")
        if self.branching < 1:
            raise ValueError("branching must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if not 0 < self.scale_decay < 1:
            raise ValueError("scale_decay must be in (0, 1)")
        if not 0 < self.anisotropy_ratio <= 1:
            raise ValueError("anisotropy_ratio must be in (0, 1]")
        if self.rotation_jitter < 0:
            raise ValueError("rotation_jitter must be >= 0")


def _leaf_component(pos, heading, level, config) -> tuple[np.ndarray, np.ndarray]:
    lam_major = _LEAF_COV_SCALE * config.scale_decay**level
    lam_minor = config.anisotropy_ratio * lam_major
    c, s = math.cos(heading), math.sin(heading)
    rot = np.array([[c, -s], [s, c]])
    cov = rot @ np.diag([lam_major, lam_minor]) @ rot.T
    return pos, cov


def _expand(pos, heading, level, config, rng, out):
    if level == config.depth:
        out.append(_leaf_component(pos, heading, level, config))
        return
    child_level = level + 1
    step = _OFFSET_SCALE * config.scale_decay**child_level
    if config.branching == 1:
        fan = [0.0]
    else:
        fan = np.linspace(-_BRANCH_SPREAD, _BRANCH_SPREAD, config.branching)
    for angle in fan:
        child_heading = heading + angle + config.rotation_jitter * rng.standard_normal()
        child_pos = pos + step * np.array([math.cos(child_heading), math.sin(child_heading)])
        _expand(child_pos, child_heading, child_level, config, rng, out)


def build_fractal_family(config: FractalConfig) -> LabeledMixtureFamily:
    """Construct the branching anisotropic family described by ``config``.

    Each class ends up with base_components_per_class * branching**depth
    components; the construction is deterministic given ``config.rng_seed``.
    """
    classes = []
    for label in range(config.num_classes):
        rng = np.random.default_rng([config.rng_seed, label])
        class_angle = 2.0 * math.pi * label / config.num_classes
        center = _CLASS_RADIUS * np.array([math.cos(class_angle), math.sin(class_angle)])
        leaves: list[tuple[np.ndarray, np.ndarray]] = []
        for b in range(config.base_components_per_class):
            root_angle = (
                class_angle
                + 2.0 * math.pi * b / config.base_components_per_class
                + config.rotation_jitter * rng.standard_normal()
            )
            root_pos = center + _ROOT_RADIUS * np.array(
                [math.cos(root_angle), math.sin(root_angle)]
            )
            _expand(root_pos, root_angle, 0, config, rng, leaves)
        weight = 1.0 / len(leaves)
        components = [GaussianComponent(weight, pos, cov) for pos, cov in leaves]
        classes.append(ClassMixture(label, components))
    prior = np.full(config.num_classes, 1.0 / config.num_classes)
    return LabeledMixtureFamily(classes, prior)


# ---------------------------------------------------------------------------
# Sampling and densities
# ---------------------------------------------------------------------------


def sample_mixture_points(mixture: ClassMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` exact samples from one class mixture, shape (n, 2)."""
    packed = mixture.packed()
    idx = rng.choice(len(packed.weights), size=n, p=packed.weights)
    normals = rng.standard_normal((n, 2))
    return packed.means[idx] + np.einsum("nij,nj->ni", packed.chols[idx], normals)


def sample_point(family: LabeledMixtureFamily, label: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one point from the class ``label``."""
    return sample_mixture_points(family.class_by_label(label), 1, rng)[0]


def sample_points(
    family: LabeledMixtureFamily, labels: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized draw of one point per entry of ``labels``."""
    labels = np.asarray(labels)
    out = np.empty((len(labels), 2))
    for label in family.labels:
        mask = labels == label
        count = int(mask.sum())
        if count:
            out[mask] = sample_mixture_points(family.class_by_label(label), count, rng)
    return out


def log_density(mixture: ClassMixture, z: np.ndarray) -> float | np.ndarray:
    """log sum_i phi_i N(z; mu_i, Sigma_i), via log-sum-exp."""
    z = np.asarray(z, dtype=float)
    packed = mixture.packed()
    out = kernels.gmm_logpdf(z, packed.log_weights, packed.means, packed.inv_covs, packed.log_norms)
    return float(out[0]) if z.ndim == 1 else out


def class_posterior(family: LabeledMixtureFamily, z: np.ndarray) -> np.ndarray:
    """Bayes posterior over labels at ``z``; rows sum to 1.

    Returns shape (num_classes,) for a single point or (n, num_classes) for a
    batch.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    pts = np.atleast_2d(z)
    with np.errstate(divide="ignore"):
        log_prior = np.where(family.class_prior > 0, np.log(family.class_prior), -np.inf)
    scores = np.stack(
        [log_density(mix, pts) + lp for mix, lp in zip(family.classes, log_prior)], axis=1
    )
    scores -= scores.max(axis=1, keepdims=True)
    post = np.exp(scores)
    post /= post.sum(axis=1, keepdims=True)
    return post[0] if single else post


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def family_to_json(family: LabeledMixtureFamily) -> dict:
    return {
        "classes": [
            {
                "label": mix.label,
                "components": [
                    {
                        "weight": c.weight,
                        "mean": c.mean.tolist(),
                        "cov": c.cov.tolist(),
                    }
                    for c in mix.components
                ],
            }
            for mix in family.classes
        ],
        "class_prior": family.class_prior.tolist(),
    }


def family_from_json(doc: dict) -> LabeledMixtureFamily:
    classes = [
        ClassMixture(
            int(cls["label"]),
            [GaussianComponent(c["weight"], c["mean"], c["cov"]) for c in cls["components"]],
        )
        for cls in doc["classes"]
    ]
    return LabeledMixtureFamily(classes, np.asarray(doc["class_prior"], dtype=float))


def save_family(family: LabeledMixtureFamily, path) -> None:
    with open(path, "w") as fh:
        json.dump(family_to_json(family), fh, indent=1)


def load_family(path) -> LabeledMixtureFamily:
    with open(path) as fh:
        return family_from_json(json.load(fh))
