"""Hyperparameter container and the flat key-value config file format."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


def step_schedule(i: int) -> float:
    """Natural-gradient step size at iteration i (1-based): (i + 10) ** -0.5."""
    return (i + 10.0) ** -0.5


def default_prior_means(K: int, R1: int, R2: int, seed) -> np.ndarray:
    """Per-community prior reliability means: row-wise softmax of an identity
    pattern with entries perturbed by a uniform(0.1, 0.2) draw.

    Each community gets an independent draw so the priors are not identical,
    which breaks the initial symmetry between communities.
    """
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x5EED])
    U = np.empty((K, R1, R2), dtype=np.float64)
    eye = np.eye(R1, R2)
    for k in range(K):
        logits = eye - rng.uniform(0.1, 0.2, size=(R1, R2))
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        U[k] = e / e.sum(axis=1, keepdims=True)
    return U


@dataclass(frozen=True)
class HyperParams:
    """Everything the engine needs besides the data itself.

    U holds the K stacked R1 x R2 prior means for the community reliability
    matrices; V holds the matching per-entry prior standard deviations (the
    prior covariance of each row is diagonal).
    """

    epsilon: float = 1e-10        # probability floor before any log
    b: float = 0.01               # encoder sample scale
    b_prime: float = 0.01         # community perturbation variance
    tau: float = 1.0              # relaxation temperature
    K: int = 6                    # community truncation
    alpha: float = 1.0            # mixture concentration
    g0: float = 1.0               # edge-probability Beta shape
    h0: float = 1.0
    R1: int = 5                   # reliability matrix rows
    R2: int = 5                   # reliability matrix columns
    layer_sizes: tuple = ((256, 128, 64), (256, 128, 64), (64, 128, 256))
    learning_rate: float = 1e-4
    iterations: int = 1000
    seed: int = 0
    U: np.ndarray | None = None   # (K, R1, R2); derived from seed when None
    V: np.ndarray | float = 0.1   # per-entry prior std, scalar broadcasts
    rho: object = field(default=step_schedule, repr=False)

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must be in (0, 1)")
        for name in ("b", "b_prime", "tau", "alpha", "g0", "h0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if len(self.layer_sizes) != 3 or any(len(ls) != 3 for ls in self.layer_sizes):
            raise ValueError("layer_sizes must give three hidden widths per network")
        U = self.U
        if U is None:
            U = default_prior_means(self.K, self.R1, self.R2, self.seed)
        U = np.asarray(U, dtype=np.float64)
        if U.shape != (self.K, self.R1, self.R2):
            raise ValueError(f"U must have shape {(self.K, self.R1, self.R2)}, got {U.shape}")
        object.__setattr__(self, "U", U)
        V = np.broadcast_to(np.asarray(self.V, dtype=np.float64),
                            (self.K, self.R1, self.R2)).copy()
        if np.any(V <= 0):
            raise ValueError("V entries must be strictly positive")
        object.__setattr__(self, "V", V)

    @property
    def n_rel(self) -> int:
        return self.R1 * self.R2

    def with_overrides(self, **kwargs) -> "HyperParams":
        if "seed" in kwargs and "U" not in kwargs:
            kwargs["U"] = None  # regenerate the prior means for the new seed
        return replace(self, **kwargs)


def synthetic_defaults(seed: int = 0, **overrides) -> HyperParams:
    """Settings used for the bundled synthetic benchmark."""
    return HyperParams(seed=seed).with_overrides(**overrides)


def imdb_defaults(seed: int = 0, **overrides) -> HyperParams:
    """Settings for the movie-rating dataset: wider noise, colder relaxation,
    6 x 6 reliability matrices and a 3000-iteration budget.

    V is the per-entry prior std, so a prior row covariance of 0.1 per entry
    becomes sqrt(0.1) here.
    """
    hp = HyperParams(
        b=0.1, b_prime=0.1, tau=0.1, R1=6, R2=6,
        iterations=3000, V=float(np.sqrt(0.1)), seed=seed,
    )
    return hp.with_overrides(**overrides)


# ---------------------------------------------------------------------------
# flat key = value config files
# ---------------------------------------------------------------------------

_INT_KEYS = {"K", "R1", "R2", "iterations", "seed"}
_FLOAT_KEYS = {"epsilon", "b", "b_prime", "tau", "alpha", "g0", "h0",
               "learning_rate", "V"}


def parse_kv_file(path) -> dict:
    """Parse `key = value` lines; '#' starts a comment, blank lines ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def _parse_layer_sizes(raw: str) -> tuple:
    groups = [g for g in raw.replace(" ", "").split(";") if g]
    if len(groups) == 1:
        groups = groups * 3
    if len(groups) != 3:
        raise ValueError(f"layer_sizes needs 1 or 3 width triples, got {raw!r}")
    return tuple(tuple(int(w) for w in g.split(",")) for g in groups)


def load_hyperparams(path, base: HyperParams | None = None) -> HyperParams:
    """Build HyperParams from a flat config file, overriding `base` (or the
    synthetic defaults).  Recognized keys match the HyperParams field names;
    U is always derived from the seed, V may be given as a scalar."""
    raw = parse_kv_file(path)
    overrides = {}
    for key, value in raw.items():
        if key in _INT_KEYS:
            overrides[key] = int(value)
        elif key in _FLOAT_KEYS:
            overrides[key] = float(value)
        elif key == "layer_sizes":
            overrides[key] = _parse_layer_sizes(value)
        elif key in ("U", "rho"):
            raise ValueError(f"config key {key!r} is not file-settable")
        else:
            raise ValueError(f"unknown config key {key!r}")
    hp = base if base is not None else HyperParams()
    return hp.with_overrides(**overrides)
