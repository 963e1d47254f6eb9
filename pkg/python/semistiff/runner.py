"""批量实验: 按配置展开任务, 多进程执行, 写出 ``runs.jsonl``, ``summary.csv`` 与 SVG.

每个任务在工作进程里完成计算并写出自己的图; 记录由主进程按任务顺序合并,
因此同一配置与种子得到逐字节相同的 ``summary.csv``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .config import ExperimentConfig, Kind, MapSettings, SolverSettings
from .domain import Annulus, Grid, inner_contour, outer_contour, solve_V
from .export import energy_trace_svg, modulus_svg, phase_svg
from .field import ComplexField, energy
from .harmonic import i0
from .minimize import MinimizeResult, ladder_level, sector_protocol
from .testmaps import (
    admissible_map,
    build_wt,
    factorize_pair,
    far_field_ratio,
    m_lambda,
    m_lambda_series,
    pair_energy,
    pair_field,
    rigid_vortex_energy,
)
from .topology import abdeg, boundary_degree, find_vortices

logger = logging.getLogger(__name__)

RUNS_FILE = "runs.jsonl"
SUMMARY_FILE = "summary.csv"
PLOTS_DIR = "plots"
SUMMARY_HEADER = "p,q,d,epsilon,energy,dirichlet,potential,abdeg,n_vortices,min_vortex_dist"
MONOTONE_SLACK = 1e-9

__all__ = [
    "RUNS_FILE",
    "SUMMARY_FILE",
    "SUMMARY_HEADER",
    "Check",
    "Job",
    "RunOutcome",
    "expand_jobs",
    "run_experiment",
    "summary_rows",
    "verify",
]


@dataclass(frozen=True, slots=True)
class Job:
    """一个可独立执行的任务.

    ladder 任务包含同一 d 的全部扇区, 按 ae 顺序串行求解; 其余类型每个任务一个扇区.
    """

    index: int
    kind: Kind
    annulus: Annulus
    grid: Grid
    solver: SolverSettings
    testmap: MapSettings
    epsilon: float
    d: int
    targets: tuple[tuple[int, int], ...]
    seed: int
    t: float = math.nan


@dataclass(frozen=True, slots=True)
class RunOutcome:
    """``run_experiment`` 的汇总."""

    out_dir: Path
    records: tuple[dict[str, Any], ...]
    failed: int

    @property
    def ok(self) -> int:
        return len(self.records) - self.failed


@dataclass(frozen=True, slots=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


# ==========================================
# 任务展开
# ==========================================


def expand_jobs(cfg: ExperimentConfig) -> list[Job]:
    """把配置展开为任务列表, 顺序即输出顺序."""
    jobs: list[Job] = []

    def add(epsilon: float, d: int, targets: Sequence[tuple[int, int]], seed: int, t: float = math.nan) -> None:
        jobs.append(
            Job(
                index=len(jobs),
                kind=cfg.kind,
                annulus=cfg.annulus,
                grid=cfg.grid,
                solver=cfg.solver,
                testmap=cfg.testmap,
                epsilon=epsilon,
                d=d,
                targets=tuple(targets),
                seed=seed,
                t=t,
            )
        )

    if cfg.kind == "ladder":
        by_d: dict[int, list[tuple[int, int]]] = {}
        for p, q, d in cfg.sectors:
            by_d.setdefault(d, []).append((p, q))
        for seed in cfg.seeds:
            for eps in cfg.solver.epsilons:
                for d, targets in by_d.items():
                    ordered = sorted(targets, key=lambda pq: ladder_level(pq[0], pq[1], d))
                    add(eps, d, ordered, seed)
    elif cfg.kind == "admissible":
        for seed in cfg.seeds:
            for eps in cfg.solver.epsilons:
                for p, q, d in cfg.sectors:
                    add(eps, d, [(p, q)], seed)
    elif cfg.kind == "pair":
        for eps in cfg.solver.epsilons:
            add(eps, 1, [(0, 1)], cfg.seeds[0])
    else:
        degrees = sorted({d for _, _, d in cfg.sectors}) or [1]
        for t in cfg.testmap.ts:
            for d in degrees:
                add(math.nan, d, [(d, d - 1)], cfg.seeds[0], t)
    return jobs


def _run_id(job: Job, p: int, q: int) -> str:
    if job.kind == "testmap":
        return f"testmap-d{job.d}-t{job.t:g}"
    return f"{job.kind}-p{p}-q{q}-d{job.d}-eps{job.epsilon:g}-s{job.seed}"


# ==========================================
# 单个任务
# ==========================================


def _base_record(job: Job, p: int, q: int) -> dict[str, Any]:
    return {
        "run_id": _run_id(job, p, q),
        "kind": job.kind,
        "status": "ok",
        "error": None,
        "p": p,
        "q": q,
        "degrees": None,
        "degree_change": False,
        "d": job.d,
        "epsilon": job.epsilon,
        "seed": job.seed,
        "energy": None,
        "abdeg": None,
        "converged": None,
        "sector_escape": False,
        "stagnated": False,
        "iterations": 0,
        "residual": None,
        "half_level_degree": None,
        "seed_kind": None,
        "energy_trace": [],
        "abdeg_trace": [],
        "vortices": [],
        "winding_sum": None,
        "metrics": {},
        "timings": {},
    }


def _write_plots(
    plots: Path | None, run_id: str, u: ComplexField, trace: Sequence[Any]
) -> None:
    if plots is None:
        return
    modulus_svg(u, title=f"|u| {run_id}").save(plots / f"{run_id}-modulus.svg")
    phase_svg(u, title=f"arg u {run_id}").save(plots / f"{run_id}-phase.svg")
    energy_trace_svg(trace).save(plots / f"{run_id}-energy.svg")


def _minimized_record(
    job: Job, target: tuple[int, int], result: MinimizeResult, plots: Path | None
) -> dict[str, Any]:
    record = _base_record(job, *target)
    record.update(result.to_dict())
    record["winding_sum"] = result.vortices.total_winding
    record["timings"] = dict(result.timings)
    if job.epsilon < 1.0:
        # 中心固定涡旋的能量随 ε 对数增长, 作为近边界涡旋的对照
        record["metrics"] = {
            "rigid_comparison": rigid_vortex_energy(job.epsilon, job.grid).total,
        }
    _write_plots(plots, record["run_id"], result.field, result.energy_trace)
    return record


def _ladder(job: Job, plots: Path | None) -> list[dict[str, Any]]:
    cfg = job.solver.for_run(job.epsilon, job.d)
    results = sector_protocol(
        job.d,
        job.targets,
        cfg,
        annulus=job.annulus,
        grid=job.grid,
        offset=job.testmap.offset_ratio * job.epsilon,
        perturbation=job.solver.perturbation,
        seed=job.seed,
    )
    return [
        _minimized_record(job, target, result, plots)
        for target, result in zip(job.targets, results, strict=True)
    ]


def _admissible(job: Job, plots: Path | None) -> list[dict[str, Any]]:
    [(p, q)] = job.targets
    started = time.perf_counter()
    u = admissible_map(p, q, job.d, job.testmap.offset_ratio * job.epsilon, job.annulus, job.grid)
    report = energy(u, job.epsilon)
    vortices = find_vortices(u)
    V = solve_V(job.annulus, job.grid)
    record = _base_record(job, p, q)
    value = abdeg(u, V)
    record.update(
        {
            "degrees": _measured_degrees(u),
            "energy": report.to_dict(),
            "abdeg": value,
            "energy_trace": [report.total],
            "abdeg_trace": [value],
            "vortices": vortices.to_list(),
            "winding_sum": vortices.total_winding,
            "metrics": {"predicted": _predicted(job.annulus, p, q, job.d)},
            "timings": {"build": time.perf_counter() - started},
        }
    )
    _write_plots(plots, record["run_id"], u, [report])
    return [record]


def _predicted(annulus: Annulus, p: int, q: int, d: int) -> float:
    return i0(d, annulus) + math.pi * ladder_level(p, q, d)


def _measured_degrees(u: ComplexField) -> list[int]:
    return [
        boundary_degree(u, inner_contour(u.grid)),
        boundary_degree(u, outer_contour(u.grid)),
    ]


def _pair(job: Job, plots: Path | None) -> list[dict[str, Any]]:
    started = time.perf_counter()
    [(p, q)] = job.targets
    zeta = complex(1.0 - job.testmap.zeta_ratio * job.epsilon)
    report = pair_energy(zeta, job.epsilon)
    v = pair_field(zeta, job.grid)
    pair = factorize_pair(v)
    vortices = find_vortices(v)
    record = _base_record(job, p, q)
    record.update(
        {
            "energy": report.to_dict(),
            "energy_trace": [report.total],
            "degrees": _measured_degrees(v),
            "vortices": vortices.to_list(),
            "winding_sum": vortices.total_winding,
            "metrics": {
                "zeta": [zeta.real, zeta.imag],
                "ghost": [pair.ghost.real, pair.ghost.imag],
                "vortex_error": abs(pair.vortex - zeta),
                "ghost_error": abs(pair.ghost - 1.0 / zeta.conjugate()),
                "modulus_error": pair.modulus_error,
                "factorization_error": pair.factorization_error,
            },
            "timings": {"quadrature": time.perf_counter() - started},
        }
    )
    _write_plots(plots, record["run_id"], v, [report])
    return [record]


def _testmap(job: Job, plots: Path | None) -> list[dict[str, Any]]:
    started = time.perf_counter()
    [(p, q)] = job.targets
    params = job.testmap.params(job.t, job.d)
    w = build_wt(job.d, params, job.annulus, job.grid)
    record = _base_record(job, p, q)
    record["degrees"] = _measured_degrees(w)
    record["metrics"] = {
        "t": job.t,
        "lam": params.lam,
        "m_lambda": m_lambda(job.d, params),
        "m_lambda_series": m_lambda_series(job.d, params),
        "far_field_ratio": far_field_ratio(w, job.d, job.t, params.delta),
        "tail_bound": params.tail_bound,
    }
    record["timings"] = {"build": time.perf_counter() - started}
    if plots is not None:
        modulus_svg(w, title=f"|w_t| {record['run_id']}").save(plots / f"{record['run_id']}-modulus.svg")
        phase_svg(w, title=f"arg w_t {record['run_id']}").save(plots / f"{record['run_id']}-phase.svg")
    return [record]


_HANDLERS: dict[str, Callable[[Job, Path | None], list[dict[str, Any]]]] = {
    "ladder": _ladder,
    "admissible": _admissible,
    "pair": _pair,
    "testmap": _testmap,
}


def _run_job(args: tuple[Job, Path | None]) -> tuple[int, list[dict[str, Any]]]:
    """工作进程入口, 必须是模块顶层函数才能被 pickle."""
    job, plots = args
    try:
        records = _HANDLERS[job.kind](job, plots)
    except Exception as e:
        # 任何异常都只让本任务失败, 不能打断进程池里的其他任务
        logger.warning("job %d (%s, eps=%g) failed: %s", job.index, job.kind, job.epsilon, e)
        records = []
        for p, q in job.targets:
            record = _base_record(job, p, q)
            record["status"] = "failed"
            record["error"] = f"{type(e).__name__}: {e}"
            records.append(record)
    return job.index, records


# ==========================================
# 输出
# ==========================================


def _sanitize(value: Any) -> Any:
    """NaN 与 inf 写成 null, 保证输出是合法 JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


def _fmt(value: float | None) -> str:
    if value is None or not math.isfinite(value):
        return ""
    return f"{value:.12g}"


def summary_rows(records: Iterable[dict[str, Any]]) -> list[str]:
    """``summary.csv`` 的数据行, 只包含成功且有能量的记录."""
    rows = []
    for r in records:
        if r["status"] != "ok" or r["energy"] is None:
            continue
        dists = [v["boundary_distance"] for v in r["vortices"]]
        cells = [
            str(r["p"]),
            str(r["q"]),
            str(r["d"]),
            _fmt(r["epsilon"]),
            _fmt(r["energy"]["total"]),
            _fmt(r["energy"]["dirichlet"]),
            _fmt(r["energy"]["potential"]),
            _fmt(r["abdeg"]),
            str(len(r["vortices"])),
            _fmt(min(dists)) if dists else "",
        ]
        rows.append(",".join(cells))
    return rows


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Path | str,
    *,
    workers: int | None = None,
    plots: bool = True,
) -> RunOutcome:
    """执行配置中的全部任务并写出结果.

    单个任务失败只记录在对应行中, 其余任务照常执行.

    Args:
        cfg: 校验后的配置.
        out_dir: 输出目录, 不存在时创建.
        workers: 进程数, 缺省取 ``cfg.workers``; 为 1 时在当前进程内顺序执行.
        plots: 是否写出 SVG.

    Returns:
        全部记录及失败数.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plot_dir = out / PLOTS_DIR if plots else None
    if plot_dir is not None:
        plot_dir.mkdir(exist_ok=True)
    n_workers = workers or cfg.workers
    jobs = expand_jobs(cfg)
    digest = cfg.digest()
    logger.info("experiment %s: %d jobs, %d workers", cfg.name, len(jobs), n_workers)

    by_index: dict[int, list[dict[str, Any]]] = {}
    if n_workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            index, records = _run_job((job, plot_dir))
            by_index[index] = records
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as ex:
            futures = {ex.submit(_run_job, (job, plot_dir)): job for job in jobs}
            for fut in as_completed(futures):
                index, records = fut.result()
                by_index[index] = records
                logger.info("job %d/%d done", len(by_index), len(jobs))

    merged: list[dict[str, Any]] = []
    for index in sorted(by_index):
        for record in by_index[index]:
            merged.append({"config_hash": digest, **record})

    with (out / RUNS_FILE).open("w", encoding="utf-8") as f:
        for record in merged:
            f.write(json.dumps(_sanitize(record), allow_nan=False, sort_keys=True) + "\n")
    lines = [SUMMARY_HEADER, *summary_rows(merged)]
    (out / SUMMARY_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    failed = sum(1 for r in merged if r["status"] != "ok")
    return RunOutcome(out_dir=out, records=tuple(merged), failed=failed)


# ==========================================
# 校验
# ==========================================


def _load_runs(path: Path) -> list[dict[str, Any]]:
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path.name} 第 {lineno} 行无法解析: {e.msg}") from e
        if not isinstance(record, dict):
            raise ValueError(f"{path.name} 第 {lineno} 行不是对象")
        records.append(record)
    return records


def _in_window(value: float, d: int) -> bool:
    return d - 0.5 <= value <= d + 0.5


def _check_monotone(records: Sequence[dict[str, Any]]) -> Check:
    bad = []
    for r in records:
        trace = [e for e in r.get("energy_trace", []) if e is not None]
        for a, b in zip(trace, trace[1:]):
            if b > a + MONOTONE_SLACK * max(1.0, abs(a)):
                bad.append(r["run_id"])
                break
    return Check("energy_monotone", not bad, ", ".join(bad))


def _check_windows(records: Sequence[dict[str, Any]]) -> Check:
    bad = []
    for r in records:
        trace = r.get("abdeg_trace") or []
        if r.get("kind") != "ladder" or not trace:
            continue
        inside = all(v is not None and _in_window(v, r["d"]) for v in trace)
        if inside == bool(r.get("sector_escape")):
            bad.append(r["run_id"])
    return Check("abdeg_window", not bad, ", ".join(bad))


def _check_degrees(records: Sequence[dict[str, Any]]) -> Check:
    """测得的边界度必须等于记录的扇区, 且流中途没有换扇区."""
    bad = []
    for r in records:
        measured = r.get("degrees")
        if r.get("degree_change") or (measured is not None and list(measured) != [r["p"], r["q"]]):
            bad.append(f"{r['run_id']} (degrees {measured})")
    return Check("sector_degrees", not bad, ", ".join(bad))


def _check_index(records: Sequence[dict[str, Any]]) -> Check:
    bad = []
    for r in records:
        if r.get("winding_sum") is None:
            continue
        if r["q"] - r["p"] != r["winding_sum"]:
            bad.append(f"{r['run_id']} ({r['q']}-{r['p']} != {r['winding_sum']})")
    return Check("index_theorem", not bad, ", ".join(bad))


def _check_half_level(records: Sequence[dict[str, Any]]) -> Check:
    bad = []
    for r in records:
        if r.get("kind") != "ladder" or not r.get("converged"):
            continue
        in_window = r["abdeg"] is not None and _in_window(r["abdeg"], r["d"])
        if in_window != (r.get("half_level_degree") == r["d"]):
            bad.append(r["run_id"])
    return Check("half_level_degree", not bad, ", ".join(bad))


def verify(run_dir: Path | str) -> list[Check]:
    """对已写出的结果重新检查可断言的不变量.

    Returns:
        每项检查一条; 产物缺失或损坏时返回单条失败检查并说明原因.
    """
    run_dir = Path(run_dir)
    runs = run_dir / RUNS_FILE
    if not runs.is_file():
        return [Check("runs", False, "no runs found")]
    try:
        records = _load_runs(runs)
    except (OSError, ValueError) as e:
        return [Check("runs", False, str(e))]
    if not records:
        return [Check("runs", False, "no runs found")]
    required = {"config_hash", "run_id", "status", "p", "q", "d"}
    for r in records:
        missing = required - r.keys()
        if missing:
            return [Check("runs", False, f"记录缺少字段: {', '.join(sorted(missing))}")]

    checks = [Check("runs", True, f"{len(records)} records")]
    hashes = sorted({r["config_hash"] for r in records})
    checks.append(
        Check("config_hash", len(hashes) == 1, "mixed config hashes" if len(hashes) > 1 else hashes[0][:12])
    )
    failed = [r["run_id"] for r in records if r["status"] != "ok"]
    checks.append(Check("run_status", not failed, ", ".join(failed)))
    ok = [r for r in records if r["status"] == "ok"]
    checks.extend(
        [
            _check_monotone(ok),
            _check_windows(ok),
            _check_degrees(ok),
            _check_index(ok),
            _check_half_level(ok),
        ]
    )

    summary = run_dir / SUMMARY_FILE
    if not summary.is_file():
        checks.append(Check("summary_header", False, f"{SUMMARY_FILE} 不存在"))
    else:
        with summary.open(encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
        checks.append(Check("summary_header", header == SUMMARY_HEADER, header))
    return checks
