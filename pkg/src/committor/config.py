"""Declarative experiment configuration: YAML parsing, validation with
field-level messages, canonical serialization, and dotted-path overrides.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .ansatz import CommittorAnsatz, MlpShape, SingularTerm
from .potentials import Ball, HalfSpace, contains, make_potential, regions_disjoint
from .sampler import Box

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "apply_overrides",
    "bundled_config_path",
    "list_bundled_configs",
]

SAMPLER_SCHEMES = ("langevin", "stratified_doublewell", "uniform_box")
METRIC_SCHEMES = ("langevin", "uniform_box")
ORACLE_KINDS = ("doublewell_1d", "radial", "images", "grid2d")
POTENTIAL_KINDS = ("double_well", "quadratic_bowl", "rugged_muller")


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    potential: dict
    regions: dict
    ansatz: dict
    sampler: dict
    trainer: dict
    metrics: dict
    oracle: dict

    def to_dict(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "potential": copy.deepcopy(self.potential),
            "regions": copy.deepcopy(self.regions),
            "ansatz": copy.deepcopy(self.ansatz),
            "sampler": copy.deepcopy(self.sampler),
            "trainer": copy.deepcopy(self.trainer),
            "metrics": copy.deepcopy(self.metrics),
            "oracle": copy.deepcopy(self.oracle),
        }

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def digest(self):
        return hashlib.sha256(self.to_yaml().encode()).hexdigest()

    # --- builders -----------------------------------------------------------

    def build_potential(self):
        return make_potential(
            self.potential["kind"],
            self.potential["dimension"],
            self.potential.get("params", {}),
        )

    def build_region(self, which):
        spec = self.regions[which]
        if spec["kind"] == "ball":
            return Ball(
                center=tuple(spec["center"]),
                radius=float(spec["radius"]),
                outside=bool(spec.get("outside", False)),
            )
        if spec["kind"] == "half_space":
            sign = -1 if spec["side"] == "below" else 1
            return HalfSpace(axis=int(spec["axis"]), threshold=float(spec["threshold"]), sign=sign)
        raise ValueError(f"unknown region kind {spec['kind']!r}")

    def build_ansatz(self):
        d = self.potential["dimension"]
        trunk = MlpShape(d, tuple(self.ansatz["trunk_hidden"]))
        terms, shapes = [], []
        for entry in self.ansatz.get("singular", []):
            terms.append(SingularTerm(entry["kind"], tuple(entry["center"])))
            shapes.append(MlpShape(d, tuple(entry.get("hidden", (6, 6, 6)))))
        return CommittorAnsatz(
            dimension=d,
            trunk=trunk,
            singular_terms=tuple(terms),
            singular_shapes=tuple(shapes),
            output_map=self.ansatz.get("output_map", "identity"),
        )

    def build_domain_box(self):
        box = self.sampler.get("box")
        if box is None:
            return None
        return Box(lo=tuple(box[0]), hi=tuple(box[1]))

    def boundary_mix(self):
        mix = self.trainer.get("boundary_mix")
        if mix is not None:
            return float(mix)
        return self.sampler["n_boundary"] / (2.0 * self.sampler["n_interior"])

    # --- validation -----------------------------------------------------------

    def validate(self):
        """All violations as 'field.path: message' strings; empty iff runnable."""
        bad = []

        def check(cond, path, msg):
            if not cond:
                bad.append(f"{path}: {msg}")

        pot = self.potential
        check(pot.get("kind") in POTENTIAL_KINDS, "potential.kind",
              f"must be one of {POTENTIAL_KINDS}")
        d = pot.get("dimension", 0)
        check(isinstance(d, int) and d >= 1, "potential.dimension", "must be a positive integer")
        if pot.get("kind") == "rugged_muller":
            check(d >= 2, "potential.dimension", "rugged_muller requires dimension >= 2")

        for which in ("a", "b"):
            spec = self.regions.get(which)
            if spec is None:
                bad.append(f"regions.{which}: missing")
                continue
            kind = spec.get("kind")
            check(kind in ("ball", "half_space"), f"regions.{which}.kind",
                  "must be 'ball' or 'half_space'")
            if kind == "ball":
                center = spec.get("center", [])
                check(len(center) == d, f"regions.{which}.center",
                      f"must have {d} components")
                check(spec.get("radius", 0) > 0, f"regions.{which}.radius", "must be positive")
            elif kind == "half_space":
                check(spec.get("side") in ("below", "above"), f"regions.{which}.side",
                      "must be 'below' or 'above'")
                check(0 <= spec.get("axis", -1) < max(d, 1), f"regions.{which}.axis",
                      "must index a coordinate")
        region_a = region_b = None
        if not bad:
            region_a, region_b = self.build_region("a"), self.build_region("b")
            check(regions_disjoint(region_a, region_b), "regions", "A and B must be disjoint")

        anz = self.ansatz
        trunk = anz.get("trunk_hidden", [])
        check(bool(trunk) and all(isinstance(w, int) and w >= 1 for w in trunk),
              "ansatz.trunk_hidden", "must be a nonempty list of widths >= 1")
        check(anz.get("output_map", "identity") in ("identity", "affine_half"),
              "ansatz.output_map", "must be 'identity' or 'affine_half'")
        for i, entry in enumerate(anz.get("singular", [])):
            path = f"ansatz.singular[{i}]"
            kind = entry.get("kind")
            check(kind in ("inverse_power", "log_distance"), f"{path}.kind",
                  "must be 'inverse_power' or 'log_distance'")
            center = entry.get("center")
            if center is None:
                bad.append(f"{path}.center: missing")
                continue
            check(len(center) == d, f"{path}.center", f"must have {d} components")
            if kind == "inverse_power":
                check(d >= 3, f"{path}.kind", "inverse_power requires dimension >= 3")
            if region_a is not None and len(center) == d:
                c = np.asarray(center, dtype=float)
                check(bool(contains(region_a, c) or contains(region_b, c)),
                      f"{path}.center", "must lie inside region A or B")

        smp = self.sampler
        check(smp.get("scheme") in SAMPLER_SCHEMES, "sampler.scheme",
              f"must be one of {SAMPLER_SCHEMES}")
        check(smp.get("temperature", -1) > 0, "sampler.temperature", "must be positive")
        check(smp.get("n_interior", 0) > 0, "sampler.n_interior", "must be positive")
        check(smp.get("n_boundary", 0) > 0, "sampler.n_boundary", "must be positive")
        check(smp.get("dt", 0) > 0, "sampler.dt", "must be positive")
        check(smp.get("burn_in", 0) >= 0, "sampler.burn_in", "must be nonnegative")
        check(smp.get("thinning", 1) >= 1, "sampler.thinning", "must be >= 1")
        check(smp.get("chains", 1) >= 1, "sampler.chains", "must be >= 1")
        if smp.get("scheme") == "stratified_doublewell":
            check(pot.get("kind") == "double_well", "sampler.scheme",
                  "stratified_doublewell requires the double_well potential")
        if smp.get("scheme") == "uniform_box" or smp.get("box") is not None:
            box = smp.get("box")
            ok = (
                isinstance(box, list)
                and len(box) == 2
                and len(box[0]) == len(box[1])
                and all(a < b for a, b in zip(box[0], box[1]))
            )
            check(ok, "sampler.box", "must be [lo, hi] with lo < hi componentwise")

        trn = self.trainer
        check(trn.get("penalty_weight", -1) >= 0, "trainer.penalty_weight",
              "must be nonnegative")
        mix = trn.get("boundary_mix")
        if mix is not None:
            check(mix > 0, "trainer.boundary_mix", "must be positive when given")
        check(trn.get("batch_size", 0) >= 1, "trainer.batch_size", "must be >= 1")
        if smp.get("n_interior"):
            check(trn.get("batch_size", 0) <= smp["n_interior"], "trainer.batch_size",
                  "must not exceed sampler.n_interior")
        check(trn.get("learning_rate", 0) > 0, "trainer.learning_rate", "must be positive")
        check(trn.get("max_iterations", -1) >= 0, "trainer.max_iterations",
              "must be nonnegative")
        check(trn.get("boundary_tolerance", 0) > 0, "trainer.boundary_tolerance",
              "must be positive")
        check(trn.get("eval_every", 0) >= 1, "trainer.eval_every", "must be >= 1")

        met = self.metrics
        check(met.get("n_test", 0) > 0, "metrics.n_test", "must be positive")
        check(met.get("scheme", "langevin") in METRIC_SCHEMES, "metrics.scheme",
              f"must be one of {METRIC_SCHEMES}")

        orc = self.oracle
        check(orc.get("kind") in ORACLE_KINDS, "oracle.kind",
              f"must be one of {ORACLE_KINDS}")
        if orc.get("kind") == "grid2d":
            check(orc.get("params", {}).get("h", 0) > 0, "oracle.params.h",
                  "grid spacing must be positive")
            check(smp.get("box") is not None, "sampler.box",
                  "grid2d ground truth requires a domain box")
        if orc.get("kind") == "images":
            check(d >= 3, "oracle.kind", "images oracle requires dimension >= 3")

        check(isinstance(self.seed, int), "seed", "must be an integer")
        return bad


_DEFAULTS = {
    "sampler": {
        "burn_in": 1000,
        "thinning": 10,
        "chains": 64,
        "max_steps": 2_000_000,
        "box": None,
    },
    "trainer": {
        "boundary_mix": None,
        "batch_size": 3000,
        "learning_rate": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "boundary_tolerance": 1e-3,
        "eval_every": 50,
    },
    "metrics": {"scheme": "langevin"},
    "ansatz": {"singular": [], "output_map": "identity"},
    "potential": {"params": {}},
    "oracle": {"params": {}},
}


def parse_config(data):
    """Build an ExperimentConfig from a nested dict, filling defaults."""
    if not isinstance(data, dict):
        raise ValueError("configuration root must be a mapping")
    known = {"name", "seed", "potential", "regions", "ansatz", "sampler",
             "trainer", "metrics", "oracle"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown top-level keys: {sorted(unknown)}")
    sections = {}
    for key in ("potential", "regions", "ansatz", "sampler", "trainer", "metrics", "oracle"):
        section = copy.deepcopy(data.get(key) or {})
        for dk, dv in _DEFAULTS.get(key, {}).items():
            section.setdefault(dk, dv)
        sections[key] = section
    return ExperimentConfig(
        name=str(data.get("name", "experiment")),
        seed=int(data.get("seed", 0)),
        **sections,
    )


def load_config(path):
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ValueError(f"configuration parse error{where}: {exc}") from exc
    return parse_config(data)


def apply_overrides(data, overrides):
    """Apply 'dotted.path=value' overrides to a nested dict (values are YAML)."""
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = data
        keys = path.split(".")
        for key in keys[:-1]:
            if key not in node or not isinstance(node[key], dict):
                node[key] = {}
            node = node[key]
        node[keys[-1]] = value
    return data


def bundled_config_path(name):
    ref = resources.files("committor") / "configs" / f"{name}.yaml"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled configuration named {name!r}")
    return str(ref)


def list_bundled_configs():
    folder = resources.files("committor") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".yaml"))
