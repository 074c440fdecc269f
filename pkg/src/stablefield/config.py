"""Experiment configuration files.

Configs are TOML documents.  Every default is listed in ``DEFAULTS``; the
family table is a tagged union keyed by ``family.kind``.  See
``docs/config.md`` for the full schema.
"""

from dataclasses import dataclass, field
import copy

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import markov
from .diagnostics import H_FUNCTIONS
from .actions import (FiniteCocycle, FiniteDiscrete, MarkovShift, MixedMovingAverage,
                      RosinskiTriplet, SubGaussianShift, TRIVIAL)
from .errors import ModelError
from .sas_core import FiniteWeightedSpace, Window

DEFAULTS = {
    "simulation": {
        "realizations": 1,
        "truncation": 10_000,
        "truncation_radius": markov.TRUNCATION_RADIUS,
    },
    "diagnostics": {
        "h": "cos",
        "n_grid": [100, 2000],
        "realizations": 50,
        "thresholds": [0.35, 0.7],
        "theta_grid": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
        "cf_samples": 20_000,
        "maxima_grid": [10, 30, 100, 300, 1000],
        "maxima_realizations": 50,
        "stationarity_lags": [1, 3],
        "stationarity_samples": 5000,
        "truncation": 500,
    },
}

FAMILY_KINDS = ("finite_discrete", "mixed_moving_average", "markov_shift", "sub_gaussian")


class ConfigError(ValueError):
    def __init__(self, where, message):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass
class ExperimentConfig:
    alpha: float
    seed: int
    family: dict
    simulation: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    path: str = None

    @property
    def window(self):
        return Window(self.simulation["window_lo"], self.simulation["window_hi"])


def _get(table, key, where, kind=None, default=...):
    if key not in table:
        if default is ...:
            raise ConfigError(f"{where}.{key}", "required field missing")
        return default
    value = table[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{where}.{key}", f"expected {getattr(kind, '__name__', kind)}, "
                          f"got {type(value).__name__}")
    return value


def _merged(raw, name):
    out = copy.deepcopy(DEFAULTS.get(name, {}))
    section = raw.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(name, "must be a table")
    out.update(section)
    return out


def parse(text, path=None):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(path or "<config>", f"parse error: {exc}") from None
    alpha = _get(raw, "alpha", "config", (int, float))
    if not 0 < alpha < 2:
        raise ConfigError("config.alpha", f"must lie in (0, 2), got {alpha}")
    seed = _get(raw, "seed", "config", int)
    if not 0 <= seed < 2**64:
        raise ConfigError("config.seed", "must be an unsigned 64-bit integer")
    family = _get(raw, "family", "config", dict)
    kind = _get(family, "kind", "family", str)
    if kind not in FAMILY_KINDS:
        raise ConfigError("family.kind", f"unknown kind {kind!r}; choose from {FAMILY_KINDS}")
    sim = _merged(raw, "simulation")
    d = family_dimension(family)
    sim.setdefault("window_lo", [0] * d)
    sim.setdefault("window_hi", [99] * d)
    for key in ("window_lo", "window_hi"):
        v = sim[key]
        if not (isinstance(v, list) and len(v) == d and all(isinstance(x, int) for x in v)):
            raise ConfigError(f"simulation.{key}", f"expected a list of {d} integers")
    if any(h < l for l, h in zip(sim["window_lo"], sim["window_hi"])):
        raise ConfigError("simulation.window_hi", "window has zero volume")
    for key in ("realizations", "truncation", "truncation_radius"):
        if not isinstance(sim[key], int) or sim[key] < 1:
            raise ConfigError(f"simulation.{key}", "must be a positive integer")
    diag = _merged(raw, "diagnostics")
    th = diag["thresholds"]
    if not (isinstance(th, list) and len(th) == 2 and 0 < th[0] <= th[1]):
        raise ConfigError("diagnostics.thresholds", "expected [low, high] with 0 < low <= high")
    if diag["h"] not in H_FUNCTIONS:
        raise ConfigError("diagnostics.h", f"unknown test function; choose from {sorted(H_FUNCTIONS)}")
    if diag["realizations"] < 30:
        raise ConfigError("diagnostics.realizations", "dispersion experiments need >= 30")
    cfg = ExperimentConfig(float(alpha), seed, family, sim, diag, path)
    try:
        if kind == "markov_shift":
            transition_spec(family)
            _anchors(family)
        else:
            build_triplet(cfg, check=False)
    except ModelError as exc:
        raise ConfigError("family", str(exc)) from None
    return cfg


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    return parse(text, str(path))


def family_dimension(family):
    kind = family.get("kind")
    if kind == "finite_discrete":
        gens = family.get("generators", [[]])
        return len(gens) if isinstance(gens, list) and gens else 1
    if kind == "markov_shift":
        return 1
    d = family.get("d", 1)
    if not isinstance(d, int) or d < 1:
        raise ConfigError("family.d", "must be a positive integer")
    return d


def _space(atoms, weights, where):
    if not isinstance(atoms, list) or not isinstance(weights, list):
        raise ConfigError(where, "atoms and weights must be lists")
    try:
        return FiniteWeightedSpace(atoms, [float(w) for w in weights])
    except (ValueError, TypeError) as exc:
        raise ConfigError(where, str(exc)) from None


def _finite(fam, alpha, check):
    space = _space(_get(fam, "atoms", "family"), _get(fam, "weights", "family"), "family.weights")
    gens = _get(fam, "generators", "family", list)
    for k, g in enumerate(gens):
        if not isinstance(g, list) or len(g) != len(space):
            raise ConfigError(f"family.generators[{k}]", f"expected {len(space)} atom images")
        bad = [a for a in g if a not in space.atoms]
        if bad:
            raise ConfigError(f"family.generators[{k}]", f"unknown atoms {bad}")
    family = FiniteDiscrete(space, [[space.index(a) for a in g] for g in gens], check=check)
    kernel = _get(fam, "kernel", "family", list)
    if len(kernel) != len(space):
        raise ConfigError("family.kernel", f"expected {len(space)} values")
    cocycle = TRIVIAL
    if "cocycle" in fam:
        cocycle = FiniteCocycle(family, fam["cocycle"], check=check)
    return RosinskiTriplet(family, kernel, alpha, cocycle, check=check)


def _mma(fam, alpha, check):
    d = family_dimension(fam)
    radius = _get(fam, "radius", "family", int)
    space = _space(_get(fam, "y_atoms", "family"), _get(fam, "y_weights", "family"),
                   "family.y_weights")
    kernel = np.asarray(_get(fam, "kernel", "family", list), dtype=float)
    want = (len(space),) + (2 * radius + 1,) * d
    if kernel.shape != want:
        raise ConfigError("family.kernel", f"expected shape {want}, got {kernel.shape}")
    if fam.get("normalize", False):
        per_y = (np.abs(kernel) ** alpha).reshape(len(space), -1).sum(axis=1)
        norm = float(per_y @ space.weights)
        if norm > 0:
            kernel = kernel / norm ** (1.0 / alpha)
    return RosinskiTriplet(MixedMovingAverage(space, d, radius), kernel, alpha, check=check)


def transition_spec(fam):
    blocks = _get(fam, "blocks", "family", list)
    parts = []
    for k, b in enumerate(blocks):
        where = f"family.blocks[{k}]"
        kind = _get(b, "type", where, str)
        try:
            if kind == "finite":
                parts.append(markov.FiniteMatrix(tuple(_get(b, "states", where, list)),
                                                 _get(b, "P", where, list)))
            elif kind == "srw":
                parts.append(markov.SimpleRandomWalk(float(_get(b, "p", where))))
            elif kind == "birth_death":
                parts.append(markov.BirthDeath(tuple(b.get("birth", [])), tuple(b.get("death", [])),
                                               float(_get(b, "tail_birth", where)),
                                               float(_get(b, "tail_death", where))))
            else:
                raise ConfigError(f"{where}.type", f"unknown block type {kind!r}")
        except ModelError as exc:
            raise ConfigError(where, str(exc)) from None
    if not parts:
        raise ConfigError("family.blocks", "need at least one block")
    return parts[0] if len(parts) == 1 else markov.DisjointUnion(tuple(parts))


def _anchors(fam):
    raw = fam.get("anchors", {})
    if not isinstance(raw, dict):
        raise ConfigError("family.anchors", "must map class numbers to states")
    try:
        return {int(k): v for k, v in raw.items()}
    except ValueError:
        raise ConfigError("family.anchors", "keys must be class numbers") from None


def build_triplet(cfg, check=True):
    """Construct the configured triplet; ``check=False`` skips model checks."""
    fam = cfg.family
    kind = fam["kind"]
    try:
        if kind == "finite_discrete":
            return _finite(fam, cfg.alpha, check)
        if kind == "mixed_moving_average":
            return _mma(fam, cfg.alpha, check)
        if kind == "sub_gaussian":
            family = SubGaussianShift(family_dimension(fam), float(fam.get("coordinate_sd", 1.0)),
                                      fam.get("base_law", "gaussian"))
            return RosinskiTriplet(family, None, cfg.alpha)
    except (TypeError, KeyError) as exc:
        raise ConfigError("family", str(exc)) from None
    spec = transition_spec(fam)
    return RosinskiTriplet(MarkovShift(spec, anchors=_anchors(fam)), None, cfg.alpha)
