"""Experiment assembly and execution: specs, trace files, certification round trips.

Outputs per solver, under the experiment's output directory:

  <name>.trace.csv  one row per iteration, header ``k,f,gap,grad_norm,rho,
                    step_norm_G,lyapunov,elapsed_ns``
  <name>.meta.json  everything needed to re-run diagnostics offline: the
                    resolved solver config, problem description, f*, and the
                    full iterate/penalty history
  <name>.cert.json  contraction certification report (penalty/augmented
                    methods with diagnostics enabled)

plus a single ``summary.json``. Trace bytes are deterministic for a fixed
spec and seed: floats are written with shortest round-trip repr and the
elapsed column stays zero unless timing is explicitly requested.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import diagnostics, solvers
from ..objective import GlmProblem, glm_build, glm_constants, quadratic_model
from .datasets import load_dataset, make_logistic_dataset, make_quadratic_matrix

__all__ = [
    "SolverSpec",
    "ExperimentSpec",
    "TRACE_HEADER",
    "run_experiment",
    "write_trace_csv",
    "read_trace_csv",
    "certify_trace",
]

TRACE_HEADER = "k,f,gap,grad_norm,rho,step_norm_G,lyapunov,elapsed_ns"

_PRECOND_ALIASES = {
    "identity": "identity",
    "diag": "hessian_diagonal",
    "hessian_diagonal": "hessian_diagonal",
}


@dataclass
class SolverSpec:
    """One solver configuration within an experiment."""

    name: str
    method: str = "pnm"
    precond: str = "identity"
    rho0: float = 1.0
    c: float = 2.0
    rho_max: float = 1e12
    step_L: float | None = None
    tol: float = 1e-8
    max_iters: int = 500

    def __post_init__(self):
        if self.method not in solvers.METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {solvers.METHODS}")
        if self.precond not in _PRECOND_ALIASES:
            raise ValueError(f"unknown preconditioner {self.precond!r}; choose identity or diag")

    def to_config(self, default_step_L: float) -> solvers.SolverConfig:
        kind = _PRECOND_ALIASES[self.precond]
        return solvers.SolverConfig(
            method=self.method,
            precond=solvers.PreconditionerPolicy(kind),
            schedule=solvers.PenaltySchedule(rho0=self.rho0, c=self.c, rho_max=self.rho_max),
            step_L=self.step_L if self.step_L is not None else default_step_L,
            max_iters=self.max_iters,
            grad_tol=self.tol,
        )


@dataclass
class ExperimentSpec:
    """Declarative description of one experiment.

    ``problem`` is either ``{"path": ..., "format": "csv"|"libsvm"}`` for a
    dataset on disk or ``{"builtin": "logistic"|"quadratic", "n": ..., "m": ...}``
    for a seeded synthetic instance. ``fstar`` is ``{"policy": "oracle"}`` or
    ``{"policy": "provided", "value": ...}``.
    """

    problem: dict
    solvers: list[SolverSpec]
    link: str = "logistic"
    alpha: float = 0.1
    seed: int = 0
    out: str = "results"
    diagnostics: bool = False
    timing: bool = False
    fstar: dict = field(default_factory=lambda: {"policy": "oracle"})

    def __post_init__(self):
        if not self.solvers:
            raise ValueError("experiment needs at least one solver")
        names = [s.name for s in self.solvers]
        if len(set(names)) != len(names):
            raise ValueError(f"solver names must be unique, got {names}")
        policy = self.fstar.get("policy")
        if policy not in ("oracle", "provided"):
            raise ValueError(f"unknown fstar policy {policy!r}")
        if policy == "provided" and "value" not in self.fstar:
            raise ValueError("fstar policy 'provided' needs a 'value'")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["solvers"] = [SolverSpec(**s) for s in d.get("solvers", [])]
        return cls(**d)

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def _build_problem(spec: ExperimentSpec):
    """Return ``(model, problem_desc, default_step_L)`` for a spec."""
    problem = spec.problem
    if "builtin" in problem:
        kind = problem["builtin"]
        if kind == "quadratic":
            n = int(problem.get("n", 8))
            Q = make_quadratic_matrix(n, seed=spec.seed)
            model = quadratic_model(Q)
            desc = {"builtin": "quadratic", "n": n, "seed": spec.seed}
            return model, desc, 1.0
        if kind == "logistic":
            n = int(problem.get("n", 20))
            m = int(problem.get("m", 200))
            A, labels = make_logistic_dataset(n, m, seed=spec.seed)
            glm = glm_build(A, "logistic", spec.alpha, labels)
            desc = {
                "builtin": "logistic",
                "n": n,
                "m": m,
                "seed": spec.seed,
                "alpha": spec.alpha,
            }
            return glm.model(), desc, glm_constants(glm).L
        raise ValueError(f"unknown builtin problem {kind!r}")
    path = problem["path"]
    fmt = problem.get("format", "csv")
    A, labels = load_dataset(path, fmt, link=spec.link)
    glm = glm_build(A, spec.link, spec.alpha, labels)
    desc = {
        "path": str(path),
        "format": fmt,
        "link": spec.link,
        "alpha": spec.alpha,
    }
    return glm.model(), desc, glm_constants(glm).L


def _resolve_fstar(spec: ExperimentSpec, model):
    if spec.fstar["policy"] == "provided":
        return float(spec.fstar["value"]), None, {"policy": "provided"}
    if model.f_star is not None:
        return float(model.f_star), model.optimum[0], {"policy": "known"}
    result = solvers.fstar_oracle(model)
    info = {
        "policy": "oracle",
        "terminal_grad_norm": result.grad_norm,
        "iterations": result.iterations,
        "converged": result.converged,
    }
    return result.f_star, result.x_star, info


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_trace_csv(trace: solvers.IterateTrace, path, f_star: float | None = None, timing: bool = False) -> None:
    """Write a trace in the documented CSV schema (deterministic bytes by default)."""
    f_star = trace.f_star if f_star is None else f_star
    lines = [TRACE_HEADER]
    for rec in trace.records:
        gap = None if f_star is None else rec.f - f_star
        lines.append(
            ",".join(
                [
                    str(rec.k),
                    _fmt(rec.f),
                    _fmt(gap),
                    _fmt(rec.grad_norm),
                    _fmt(rec.rho),
                    _fmt(rec.step_norm_g_sq),
                    _fmt(rec.lyapunov),
                    str(rec.elapsed_ns if timing else 0),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace_csv(path) -> list[dict]:
    """Parse a trace CSV back into a list of per-iteration dicts."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text or text[0] != TRACE_HEADER:
        raise ValueError(f"{path} does not start with the trace header {TRACE_HEADER!r}")
    keys = TRACE_HEADER.split(",")
    rows = []
    for line in text[1:]:
        fields = line.split(",")
        row = {}
        for key, val in zip(keys, fields):
            if val == "":
                row[key] = None
            elif key in ("k", "elapsed_ns"):
                row[key] = int(val)
            else:
                row[key] = float(val)
        rows.append(row)
    return rows


def _write_meta(path, spec: ExperimentSpec, sspec: SolverSpec, trace, problem_desc, step_L, fstar_info):
    meta = {
        "solver": asdict(sspec),
        "resolved_step_L": step_L,
        "problem": problem_desc,
        "link": spec.link,
        "alpha": spec.alpha,
        "seed": spec.seed,
        "method": trace.method,
        "termination": trace.termination,
        "steps_taken": trace.steps_taken,
        "f_star": trace.f_star,
        "f_star_provenance": fstar_info,
        "iterates": [[float(v) for v in rec.x] for rec in trace.records],
        "fs": [rec.f for rec in trace.records],
        "rhos": [None if not np.isfinite(rec.rho) else rec.rho for rec in trace.records],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def _certify(trace, model, config: solvers.SolverConfig):
    mu = model.constants[1] if model.constants else 1.0
    if trace.method == "pnm":
        return diagnostics.certify_penalty_contraction(trace, model, config.precond, mu, config.step_L)
    if trace.method == "anm":
        return diagnostics.certify_augmented_contraction(trace, model, config.precond, mu, config.step_L)
    return None


def _run_one(spec: ExperimentSpec, sspec: SolverSpec, model, default_step_L, problem_desc, fstar_info, outdir: Path):
    config = sspec.to_config(default_step_L)
    # zeros is the conventional GLM start; the builtin quadratic is minimized
    # at the origin, so start it from the all-ones point instead
    if problem_desc.get("builtin") == "quadratic":
        x0 = np.ones(model.dim)
    else:
        x0 = np.zeros(model.dim)
    trace = solvers.run(model, x0, config)
    write_trace_csv(trace, outdir / f"{sspec.name}.trace.csv", timing=spec.timing)
    _write_meta(
        outdir / f"{sspec.name}.meta.json",
        spec, sspec, trace, problem_desc, config.step_L, fstar_info,
    )
    cert_summary = None
    if spec.diagnostics:
        report = _certify(trace, model, config)
        if report is not None:
            with open(outdir / f"{sspec.name}.cert.json", "w", encoding="utf-8") as fh:
                json.dump(report.to_dict(), fh, indent=2)
                fh.write("\n")
            cert_summary = report.to_dict()["aggregate"]
    final = trace.final
    return {
        "name": sspec.name,
        "method": sspec.method,
        "termination": trace.termination,
        "iterations": trace.steps_taken,
        "final_f": final.f,
        "final_gap": None if trace.f_star is None else final.f - trace.f_star,
        "final_grad_norm": final.grad_norm,
        "certification": cert_summary,
    }


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run every solver in the spec, write traces/meta/cert files and summary.json.

    Solvers may run in parallel workers (capped by the ``PN_THREADS``
    environment variable, default 1); each worker owns its output files, and
    whatever completed is flushed before an error propagates.
    """
    outdir = Path(spec.out)
    outdir.mkdir(parents=True, exist_ok=True)
    model, problem_desc, default_step_L = _build_problem(spec)
    f_star, x_star, fstar_info = _resolve_fstar(spec, model)
    model = model.with_optimum(
        x_star if x_star is not None else np.full(model.dim, np.nan), f_star
    )

    workers = min(len(spec.solvers), max(1, int(os.environ.get("PN_THREADS", "1"))))
    results: list[dict | None] = [None] * len(spec.solvers)
    errors: list[tuple[str, Exception]] = []

    def worker(sspec: SolverSpec):
        return _run_one(spec, sspec, model, default_step_L, problem_desc, fstar_info, outdir)

    if workers == 1:
        for i, sspec in enumerate(spec.solvers):
            try:
                results[i] = worker(sspec)
            except Exception as exc:
                errors.append((sspec.name, exc))
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(worker, s): (i, s) for i, s in enumerate(spec.solvers)}
            for fut, (i, sspec) in futures.items():
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    errors.append((sspec.name, exc))

    summary = {
        "problem": problem_desc,
        "seed": spec.seed,
        "f_star": f_star,
        "f_star_provenance": fstar_info,
        "constants": {
            "L": model.constants[0] if model.constants else None,
            "mu": model.constants[1] if model.constants else None,
        },
        "solvers": [r for r in results if r is not None],
        "failed": [{"name": name, "error": str(exc)} for name, exc in errors],
    }
    with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if errors:
        raise errors[0][1]
    return summary


def _model_from_meta(meta: dict):
    problem = meta["problem"]
    if problem.get("builtin") == "quadratic":
        Q = make_quadratic_matrix(problem["n"], seed=problem["seed"])
        model = quadratic_model(Q)
    elif problem.get("builtin") == "logistic":
        A, labels = make_logistic_dataset(problem["n"], problem["m"], seed=problem["seed"])
        glm: GlmProblem = glm_build(A, "logistic", problem["alpha"], labels)
        model = glm.model()
    else:
        A, labels = load_dataset(problem["path"], problem["format"], link=problem["link"])
        glm = glm_build(A, problem["link"], problem["alpha"], labels)
        model = glm.model()
    return model


def certify_trace(trace_path, meta_path=None) -> tuple[diagnostics.ContractionReport, bool | None]:
    """Re-run contraction certification for a written trace.

    Rebuilds the problem from the meta sidecar, reconstructs the recorded
    iterates exactly and recomputes the certification report. Returns the
    report plus, when a cert file already sits next to the trace, whether the
    recomputed report reproduces it exactly (None when no cert exists).
    """
    trace_path = Path(trace_path)
    if meta_path is None:
        meta_path = trace_path.with_name(trace_path.name.replace(".trace.csv", ".meta.json"))
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta["method"] not in ("pnm", "anm"):
        raise ValueError(f"certification applies to pnm/anm traces, not {meta['method']!r}")

    model = _model_from_meta(meta)
    model = model.with_optimum(np.full(model.dim, np.nan), meta["f_star"])

    trace = solvers.IterateTrace(method=meta["method"], f_star=meta["f_star"])
    for k, (x, f, rho) in enumerate(zip(meta["iterates"], meta["fs"], meta["rhos"])):
        trace.records.append(
            solvers.IterateRecord(
                k=k,
                x=np.asarray(x, dtype=float),
                f=float(f),
                grad_norm=np.nan,
                rho=np.inf if rho is None else float(rho),
                step_norm_g_sq=np.nan,
                lyapunov=None,
                elapsed_ns=0,
            )
        )

    sspec = SolverSpec(**meta["solver"])
    config = sspec.to_config(meta["resolved_step_L"])
    report = _certify(trace, model, config)

    cert_path = trace_path.with_name(trace_path.name.replace(".trace.csv", ".cert.json"))
    matches = None
    if cert_path.exists():
        with open(cert_path, "r", encoding="utf-8") as fh:
            existing = json.load(fh)
        matches = existing == report.to_dict()
    return report, matches
