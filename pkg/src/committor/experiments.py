"""Experiment driver: builds sample pools, trains the approximation, scores
it against the matching ground truth, and writes all artifacts (manifest,
checkpoint, training log, metrics, profile tables) into an output directory.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import metrics as metrics_mod
from .ansatz import init_theta, save_checkpoint
from .config import ExperimentConfig
from .metrics import AnsatzEvaluator
from .oracles import (
    DoubleWellCommittor1D,
    GridCommittor2D,
    ImagesCommittor,
    RadialCommittor,
    build_image_series,
    grid_solve_2d,
)
from .potentials import Ball, HalfSpace, make_potential
from .sampler import (
    SamplerConfig,
    sample_boundary_plane,
    sample_boundary_sphere,
    sample_equilibrium,
    sample_stratified_doublewell,
    sample_uniform_box,
    with_boundary,
)
from .trainer import TrainConfig, train

__all__ = ["ExperimentResult", "run_experiment", "derive_seeds", "build_truth"]

SEED_STREAMS = (
    "train_interior",
    "train_boundary",
    "val_interior",
    "val_boundary",
    "init",
    "shuffle",
    "test",
    "profile",
)


def derive_seeds(master):
    """Named independent seed streams, all determined by the master seed."""
    children = np.random.SeedSequence(master).spawn(len(SEED_STREAMS))
    return {
        name: int(child.generate_state(1)[0])
        for name, child in zip(SEED_STREAMS, children)
    }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    ansatz: object
    theta: np.ndarray
    train_report: object
    metrics_report: object
    truth: object
    out_dir: str
    seeds: dict


def _boundary_points(cfg, region, potential, n, seed):
    if isinstance(region, Ball):
        return sample_boundary_sphere(region.center_array, region.radius, n, seed)
    if isinstance(region, HalfSpace):
        stiffness = getattr(potential, "transverse_stiffness", 0.5)
        return sample_boundary_plane(
            region.axis,
            region.threshold,
            potential.dimension,
            n,
            seed,
            cfg.sampler["temperature"],
            stiffness,
        )
    raise ValueError(f"no boundary sampler for region type {type(region).__name__}")


def _interior_batch(cfg, potential, region_a, region_b, n, seed, scheme=None):
    scheme = scheme or cfg.sampler["scheme"]
    smp = cfg.sampler
    if scheme == "stratified_doublewell":
        return sample_stratified_doublewell(potential.dimension, smp["temperature"], n, seed)
    if scheme == "uniform_box":
        box = cfg.build_domain_box()
        lo = list(box.lo) + [0.0] * (potential.dimension - len(box.lo))
        hi = list(box.hi) + [0.0] * (potential.dimension - len(box.hi))
        if potential.dimension > len(box.lo):
            raise ValueError("uniform_box sampling requires a full-dimensional box")
        return sample_uniform_box(lo, hi, n, seed, exclude=(region_a, region_b))
    sampler_cfg = SamplerConfig(
        temperature=smp["temperature"],
        dt=smp["dt"],
        burn_in=smp["burn_in"],
        thinning=smp["thinning"],
        chains=smp["chains"],
        seed=seed,
        max_steps=smp["max_steps"],
    )
    return sample_equilibrium(
        potential, region_a, region_b, sampler_cfg, n, domain=cfg.build_domain_box()
    )


def build_truth(cfg, potential, region_a, region_b):
    """Ground-truth evaluator matching the configured oracle kind."""
    kind = cfg.oracle["kind"]
    params = cfg.oracle.get("params", {})
    temperature = cfg.sampler["temperature"]
    if kind == "doublewell_1d":
        return DoubleWellCommittor1D(temperature)
    if kind == "radial":
        outer = region_a.radius if isinstance(region_a, Ball) else None
        inner = region_b.radius if isinstance(region_b, Ball) else None
        if outer is None or inner is None:
            raise ValueError("radial oracle requires ball regions")
        strength = getattr(potential, "strength", 10.0)
        return RadialCommittor(temperature, potential.dimension, outer, inner, strength)
    if kind == "images":
        separation = float(
            np.linalg.norm(region_b.center_array - region_a.center_array)
        )
        if abs(region_a.radius - region_b.radius) > 1e-12:
            raise ValueError("images oracle requires equal ball radii")
        series = build_image_series(
            separation,
            region_a.radius,
            potential.dimension,
            params.get("truncation_tol", 1e-12),
        )
        return ImagesCommittor(series)
    if kind == "grid2d":
        box = cfg.build_domain_box()
        if potential.dimension == 2:
            pot2d = potential
        else:
            pot2d = make_potential(cfg.potential["kind"], 2, cfg.potential.get("params", {}))
        disk_a = Ball(center=region_a.center[:2], radius=region_a.radius)
        disk_b = Ball(center=region_b.center[:2], radius=region_b.radius)
        solution = grid_solve_2d(
            pot2d, temperature, disk_a, disk_b, box.lo[:2], box.hi[:2], params["h"]
        )
        return GridCommittor2D(solution)
    raise ValueError(f"unknown oracle kind {kind!r}")


def _write_json(path, payload):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_profiles(cfg, out_dir, model, truth, region_a, region_b, seeds):
    kind = cfg.oracle["kind"]
    d = cfg.potential["dimension"]
    if kind == "doublewell_1d":
        header, rows = metrics_mod.profile_axis(model, truth, d, axis=0, lo=-1.0, hi=1.0)
        metrics_mod.write_profile_csv(os.path.join(out_dir, "profile_axis.csv"), header, rows)
    elif kind == "radial":
        header, rows = metrics_mod.profile_radial_rays(
            model, truth, d, r_lo=region_b.radius, r_hi=region_a.radius, seed=seeds["profile"]
        )
        metrics_mod.write_profile_csv(os.path.join(out_dir, "profile_rays.csv"), header, rows)
    elif kind == "images":
        box = cfg.build_domain_box()
        lo = box.lo[0] if box else -2.0
        hi = box.hi[0] if box else 2.0
        header, rows = metrics_mod.profile_axis(
            model, truth, d, axis=0, lo=lo, hi=hi, n=401, exclude=(region_a, region_b)
        )
        metrics_mod.write_profile_csv(os.path.join(out_dir, "profile_axis.csv"), header, rows)
    else:
        box = cfg.build_domain_box()
        step = max(cfg.oracle["params"]["h"] * 4, (box.hi[0] - box.lo[0]) / 100)
        header, rows = metrics_mod.profile_grid_2d(
            model, truth, box.lo[:2], box.hi[:2], step, exclude=(region_a, region_b)
        )
        metrics_mod.write_profile_csv(os.path.join(out_dir, "profile_grid.csv"), header, rows)


def run_experiment(cfg, out_dir, overrides=()):
    """Run one configured experiment end to end; returns the result record."""
    problems = cfg.validate()
    if problems:
        raise ValueError("invalid configuration:\n" + "\n".join(problems))
    os.makedirs(out_dir, exist_ok=True)
    seeds = derive_seeds(cfg.seed)
    potential = cfg.build_potential()
    region_a = cfg.build_region("a")
    region_b = cfg.build_region("b")

    smp = cfg.sampler
    n_bnd_side = max(smp["n_boundary"] // 2, 1)
    train_batch = with_boundary(
        _interior_batch(cfg, potential, region_a, region_b, smp["n_interior"],
                        seeds["train_interior"]),
        _boundary_points(cfg, region_a, potential, n_bnd_side, seeds["train_boundary"]),
        _boundary_points(cfg, region_b, potential, n_bnd_side, seeds["train_boundary"] + 1),
    )
    n_val = max(1000, smp["n_interior"] // 10)
    val_batch = with_boundary(
        _interior_batch(cfg, potential, region_a, region_b, n_val, seeds["val_interior"]),
        _boundary_points(cfg, region_a, potential, n_bnd_side, seeds["val_boundary"]),
        _boundary_points(cfg, region_b, potential, n_bnd_side, seeds["val_boundary"] + 1),
    )

    ansatz = cfg.build_ansatz()
    theta0 = init_theta(ansatz, seeds["init"])
    trn = cfg.trainer
    train_cfg = TrainConfig(
        penalty_weight=trn["penalty_weight"],
        boundary_mix=cfg.boundary_mix(),
        batch_size=trn["batch_size"],
        learning_rate=trn["learning_rate"],
        beta1=trn["beta1"],
        beta2=trn["beta2"],
        epsilon=trn["epsilon"],
        max_iterations=trn["max_iterations"],
        boundary_tolerance=trn["boundary_tolerance"],
        seed=seeds["shuffle"],
        eval_every=trn["eval_every"],
    )
    report = train(ansatz, theta0, train_batch, val_batch, train_cfg)
    theta = report.final_theta

    truth = build_truth(cfg, potential, region_a, region_b)
    test_batch = _interior_batch(
        cfg, potential, region_a, region_b, cfg.metrics["n_test"], seeds["test"],
        scheme=cfg.metrics.get("scheme", "langevin"),
    )
    model = AnsatzEvaluator(ansatz, theta)
    metrics_report = metrics_mod.compute_report(
        model,
        truth,
        cfg.sampler["temperature"],
        test_batch.interior_points,
        test_batch.interior_weights,
        seed=seeds["test"],
        measure=cfg.metrics.get("scheme", "langevin"),
    )

    # artifacts
    manifest = {
        "name": cfg.name,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "overrides": list(overrides),
        "seeds": seeds,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    save_checkpoint(
        os.path.join(out_dir, "checkpoint.json"),
        ansatz,
        theta,
        extra={
            "adam": {
                "m": report.final_adam_state.m.tolist(),
                "v": report.final_adam_state.v.tolist(),
                "step": report.final_adam_state.step,
            }
            if report.final_adam_state
            else None
        },
    )
    report.write_log_csv(os.path.join(out_dir, "train_log.csv"))
    metrics_mod.append_metrics_csv(os.path.join(out_dir, "metrics.csv"), cfg.name, metrics_report)
    metrics_mod.write_report(
        os.path.join(out_dir, "metrics_report.txt"),
        metrics_report,
        extra={
            "boundary_rms_a": report.boundary_rms_a,
            "boundary_rms_b": report.boundary_rms_b,
            "converged": report.converged,
        },
    )
    _write_profiles(cfg, out_dir, model, truth, region_a, region_b, seeds)

    return ExperimentResult(
        config=cfg,
        ansatz=ansatz,
        theta=theta,
        train_report=report,
        metrics_report=metrics_report,
        truth=truth,
        out_dir=out_dir,
        seeds=seeds,
    )
