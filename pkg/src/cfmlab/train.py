"""Training-loop orchestration, evaluation runs, and run artifacts.

Every run writes into its own output directory (guarded by a lockfile):
a config snapshot, a metrics CSV with a fixed documented header, and
binary checkpoints at the eval cadence and at the end.
"""
from __future__ import annotations

import json
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .checkpoint import (checkpoint_from_field, field_from_checkpoint,
                         load_checkpoint, save_checkpoint)
from .config import ConfigError, RunConfig
from .datasets import DistributionSpec, make_affine_coupling, points_to_csv
from .field import TimeEmbedding, VelocityField
from .losses import (SegmentSchedule, cfm_loss, distill_loss, multisegment_loss,
                     velocity_consistency_loss)
from .metrics import consistency_residual, energy_distance, straightness, wasserstein2_exact
from .optim import AdamState, adam_step
from .paths import Coupling, PathSpec, path_point, sample_pair
from .ppm import write_scatter_ppm
from .rng import STREAM_EVAL, STREAM_TRAIN, stream
from .sampler import record_trajectory, sample_euler

CSV_COMMENT = "# cfmlab metrics v1"
CSV_HEADER = ("step,loss_total,loss_f,loss_v,grad_norm,"
              "w2_eval,energy_eval,consistency_residual,wall_seconds")


class TrainingAbort(RuntimeError):
    """Training hit a non-finite loss; the last good checkpoint was saved."""


# ---------------------------------------------------------------------------
# config -> objects
# ---------------------------------------------------------------------------

def build_dataset(doc: dict) -> DistributionSpec:
    return DistributionSpec(**doc)


def build_problem(cfg: RunConfig) -> PathSpec:
    p0 = build_dataset(cfg.p0)
    if cfg.coupling == "independent":
        coupling = Coupling(kind="independent", p0=p0, p1=build_dataset(cfg.p1))
    else:
        coupling = make_affine_coupling(np.asarray(cfg.coupling["A"], dtype=np.float64),
                                        np.asarray(cfg.coupling["b"], dtype=np.float64),
                                        p0)
    return PathSpec(cfg.path, coupling)


def build_field(cfg: RunConfig) -> VelocityField:
    p0 = build_dataset(cfg.p0)
    return VelocityField.init(p0.dim, seed=cfg.seed, hidden=tuple(cfg.hidden),
                              act=cfg.activation,
                              embed=TimeEmbedding(n_freqs=cfg.time_freqs))


def build_schedule(cfg: RunConfig) -> SegmentSchedule:
    if cfg.lambda_preset == "middle":
        return SegmentSchedule.middle_weighted(cfg.segments, cfg.dt, cfg.alpha)
    return SegmentSchedule.uniform(cfg.segments, cfg.dt, cfg.alpha)


@contextmanager
def _locked_outdir(outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    lock = outdir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"output directory {outdir} is locked by another run "
                           f"(remove {lock} if stale)")
    os.close(fd)
    try:
        yield outdir
    finally:
        lock.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _eval_metrics(fld: VelocityField, path: PathSpec, cfg: RunConfig,
                  gen: np.random.Generator) -> tuple[float, float, float]:
    n = cfg.eval_n
    x0 = path.coupling.p0.sample(n, gen)
    k = cfg.segments
    m = 2 if k == 1 else 1
    samples = sample_euler(fld, x0, k, m, params="ema")
    if path.coupling.kind == "independent":
        target = path.coupling.p1.sample(n, gen)
    else:
        target = x0 @ path.coupling.A.T + path.coupling.b
    w2 = wasserstein2_exact(samples, target) if n <= 1024 else float("nan")
    energy = energy_distance(samples, target)
    pa, pb = sample_pair(path.coupling, n, gen)
    ts = gen.uniform(0.0, 1.0 - 2e-4, size=n)
    probes = path_point(path, pa, pb, ts)
    resid = consistency_residual(fld.as_fn("ema"), ts, probes, h=1e-4)
    return w2, energy, resid


def _loss_step(cfg: RunConfig, fld: VelocityField, path: PathSpec,
               schedule: SegmentSchedule, teacher_fn, gen: np.random.Generator):
    if cfg.loss == "cfm":
        return cfm_loss(fld, path, cfg.batch, gen)
    if cfg.loss == "consistency":
        return velocity_consistency_loss(fld, path, cfg.batch, cfg.dt, cfg.alpha, gen)
    if cfg.loss == "multisegment":
        return multisegment_loss(fld, path, schedule, cfg.batch, gen)
    return distill_loss(fld, teacher_fn, path, cfg.batch, cfg.dt, cfg.alpha, gen)


def run_training(cfg: RunConfig, teacher_fn=None, quiet: bool = False) -> dict:
    """The full loop: sample tuples -> loss -> backward -> adam -> EMA.

    Returns paths of the artifacts plus the final metric row.  Raises
    TrainingAbort on a non-finite loss after saving the last good state.
    """
    if cfg.loss == "distill" and teacher_fn is None:
        raise ConfigError("distill training needs a teacher (use run_distill)")
    outdir = Path(cfg.outdir)
    with _locked_outdir(outdir):
        (outdir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2),
                                            encoding="utf-8")
        path = build_problem(cfg)
        fld = build_field(cfg)
        schedule = build_schedule(cfg)
        opt = AdamState.for_params(fld.params, lr=cfg.lr, beta1=cfg.beta1,
                                   beta2=cfg.beta2, eps=cfg.eps)
        train_gen = stream(cfg.seed, STREAM_TRAIN)
        eval_gen = stream(cfg.seed, STREAM_EVAL)

        ckpt_path = outdir / "ckpt.bin"
        csv_path = outdir / "metrics.csv"
        t_start = time.monotonic()
        last_row = None

        def write_ckpt(step: int) -> None:
            save_checkpoint(checkpoint_from_field(fld, step, cfg.to_dict(), cfg.seed),
                            ckpt_path)

        with open(csv_path, "w", encoding="utf-8") as csv:
            csv.write(CSV_COMMENT + "\n" + CSV_HEADER + "\n")
            write_ckpt(0)
            for step in range(1, cfg.steps + 1):
                try:
                    report, grads = _loss_step(cfg, fld, path, schedule,
                                               teacher_fn, train_gen)
                except FloatingPointError as exc:
                    write_ckpt(step - 1)
                    raise TrainingAbort(
                        f"non-finite loss at step {step}: {exc}"
                    ) from exc
                adam_step(fld.params, grads, opt)
                fld.ema_update(cfg.ema_decay)
                if step % cfg.eval_every == 0 or step == cfg.steps:
                    gnorm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
                    w2, energy, resid = _eval_metrics(fld, path, cfg, eval_gen)
                    row = (f"{step},{report.total!r},{report.f_term!r},"
                           f"{report.v_term!r},{gnorm!r},{w2!r},{energy!r},"
                           f"{resid!r},{time.monotonic() - t_start!r}")
                    csv.write(row + "\n")
                    csv.flush()
                    write_ckpt(step)
                    last_row = {"step": step, "loss": report.total, "w2": w2,
                                "energy": energy, "residual": resid}
                    if not quiet:
                        print(f"step {step}: loss={report.total:.4e} w2={w2:.4f}")
        return {"checkpoint": str(ckpt_path), "metrics": str(csv_path),
                "final": last_row}


def run_distill(cfg: RunConfig, quiet: bool = False) -> dict:
    """Distillation: load the teacher, then train the student against its
    one-step Euler predictions on the teacher's own training problem."""
    if cfg.loss != "distill":
        raise ConfigError(f"distill runs need loss='distill', got {cfg.loss!r}")
    teacher_ckpt = load_checkpoint(cfg.teacher)
    teacher = field_from_checkpoint(teacher_ckpt)
    student_dim = build_dataset(cfg.p0).dim
    if teacher.dim != student_dim:
        raise ConfigError(
            f"teacher dimension {teacher.dim} != student dimension {student_dim}"
        )
    # x_t must follow the teacher's training distribution when we know it
    t_cfg = teacher_ckpt.meta.get("config")
    if t_cfg:
        cfg = RunConfig.from_dict({**cfg.to_dict(),
                                   "p0": t_cfg["p0"], "p1": t_cfg["p1"],
                                   "coupling": t_cfg["coupling"],
                                   "path": t_cfg["path"]})
    return run_training(cfg, teacher_fn=teacher.as_fn("ema"), quiet=quiet)


# ---------------------------------------------------------------------------
# sampling / evaluation of a checkpoint
# ---------------------------------------------------------------------------

def _field_and_config(ckpt_path) -> tuple[VelocityField, dict]:
    ckpt = load_checkpoint(ckpt_path)
    return field_from_checkpoint(ckpt), (ckpt.meta.get("config") or {})


def run_sample(ckpt_path, k: int, m: int, n: int, out, seed: int = 0,
               ppm: bool = False) -> dict:
    """n samples with K*m field evaluations each, written as CSV (+PPM)."""
    if k < 1 or m < 1:
        raise ConfigError(f"need k >= 1 and m >= 1, got k={k}, m={m}")
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    fld, cfg_doc = _field_and_config(ckpt_path)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "samples.csv"
    if n == 0:
        points_to_csv(np.zeros((0, fld.dim)), csv_path)
        return {"samples": str(csv_path), "nfe": 0}
    p0 = DistributionSpec(**cfg_doc.get("p0", {"kind": "standard-gaussian",
                                               "dim": fld.dim}))
    gen = stream(seed, STREAM_EVAL)
    x0 = p0.sample(n, gen)
    before = fld.eval_count
    samples = sample_euler(fld, x0, k, m, params="ema")
    nfe = fld.eval_count - before
    points_to_csv(samples, csv_path)
    result = {"samples": str(csv_path), "nfe": nfe}
    if ppm:
        ppm_path = out / "samples.ppm"
        write_scatter_ppm(ppm_path, samples)
        result["ppm"] = str(ppm_path)
    return result


def run_eval(ckpt_path, nfes: list[int], n: int, seed: int = 0,
             dataset: dict | None = None, traj_grid: int = 65,
             traj_n: int = 256) -> list[dict]:
    """One row per NFE: (nfe, w2, energy, straightness, residual).

    Straightness and the consistency residual are properties of the
    learned flow on a fine grid, computed once per invocation and
    repeated in every row.
    """
    fld, cfg_doc = _field_and_config(ckpt_path)
    k = int(cfg_doc.get("segments", 1))
    p0 = DistributionSpec(**cfg_doc.get("p0", {"kind": "standard-gaussian",
                                               "dim": fld.dim}))
    target_doc = dataset if dataset is not None else cfg_doc.get("p1")
    if target_doc is None:
        raise ConfigError("no evaluation dataset: checkpoint has no p1 and none given")
    target_spec = DistributionSpec(**target_doc)

    gen = stream(seed, STREAM_EVAL)
    grid = np.linspace(0.0, 1.0, traj_grid)
    traj = record_trajectory(fld, p0.sample(min(n, traj_n), gen), grid, params="ema")
    straight = straightness(traj)
    # residual probes: random (time, state) points along the recorded flows,
    # excluding the final grid time so t + h stays inside [0, 1]
    idx = gen.integers(0, traj_grid - 1, size=256)
    which = gen.integers(0, traj.n, size=256)
    resid = consistency_residual(fld.as_fn("ema"), grid[idx],
                                 traj.states[idx, which], h=1e-4)

    rows = []
    for nfe in nfes:
        if nfe < k or nfe % k != 0:
            raise ConfigError(
                f"NFE {nfe} is not a multiple of the model's segment count {k}"
            )
        x0 = p0.sample(n, gen)
        target = target_spec.sample(n, gen)
        samples = sample_euler(fld, x0, k, nfe // k, params="ema")
        rows.append({
            "nfe": nfe,
            "w2": wasserstein2_exact(samples, target) if n <= 1024 else float("nan"),
            "energy": energy_distance(samples, target),
            "straightness": straight,
            "residual": resid,
        })
    return rows
