"""semistiff CLI - 半刚性边界 GL 实验命令行工具."""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    import click as click_module
else:
    try:
        import click as click_module
    except ImportError:
        click_module = None

from semistiff import __version__
from semistiff.errors import ConfigError

click = click_module

ENV_PREFIX = "SEMISTIFF"


def _check_cli_deps() -> None:
    """检查 CLI 依赖是否安装."""
    if not click:
        print(
            "错误: CLI 依赖未安装\n请运行: pip install semistiff[cli]",
            file=sys.stderr,
        )
        sys.exit(1)


def _setup_logging(verbose: bool) -> None:
    from rich.logging import RichHandler

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=False, show_path=False)],
        force=True,
    )


def _create_cli() -> Any:
    """创建 CLI 命令组."""
    _check_cli_deps()

    from rich.console import Console
    from rich.markup import escape
    from rich.table import Table

    from semistiff.config import load_config
    from semistiff.runner import run_experiment, verify

    console = Console()
    error_console = Console(stderr=True)

    @click.group(context_settings={"auto_envvar_prefix": ENV_PREFIX})
    @click.version_option(version=__version__, prog_name="semistiff")
    def cli() -> None:
        """半刚性边界条件下 Ginzburg-Landau 能量的数值实验."""

    @cli.command()
    @click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
    @click.option(
        "--workers",
        type=click.IntRange(min=1),
        envvar=f"{ENV_PREFIX}_WORKERS",
        default=None,
        help="并行进程数, 覆盖配置中的 experiment.workers",
    )
    @click.option(
        "--out",
        type=click.Path(file_okay=False, path_type=Path),
        envvar=f"{ENV_PREFIX}_OUT",
        default=None,
        help="输出目录, 缺省为配置中的 experiment.output 或 runs/<name>",
    )
    @click.option(
        "--seed",
        type=int,
        envvar=f"{ENV_PREFIX}_SEED",
        default=None,
        help="覆盖配置中的随机种子",
    )
    @click.option("-v", "--verbose", is_flag=True, help="输出调试日志")
    def run(
        config: Path,
        workers: int | None,
        out: Path | None,
        seed: int | None,
        verbose: bool,
    ) -> None:
        """执行 CONFIG 声明的全部任务."""
        _setup_logging(verbose)
        try:
            cfg = load_config(config)
        except ConfigError as e:
            error_console.print(f"[red]Error:[/] {config}: {escape(str(e))}")
            raise SystemExit(1) from e
        if seed is not None:
            cfg = cfg.replace(seeds=(seed,))
        out_dir = out or cfg.output or Path("runs") / cfg.name

        outcome = run_experiment(cfg, out_dir, workers=workers)

        table = Table(title=f"{cfg.name} ({cfg.kind})")
        for column in ("run", "status", "E", "abdeg", "vortices"):
            table.add_column(column)
        for record in outcome.records:
            energy = record["energy"]
            abdeg = record["abdeg"]
            table.add_row(
                record["run_id"],
                record["status"] if record["status"] == "ok" else f"[red]{record['status']}[/]",
                f"{energy['total']:.6f}" if energy else "-",
                f"{abdeg:.4f}" if abdeg is not None else "-",
                str(len(record["vortices"])),
            )
        console.print(table)
        console.print(
            f"[green]{outcome.ok}[/] ok, [red]{outcome.failed}[/] failed -> {outcome.out_dir}"
        )

    @cli.command(name="verify")
    @click.argument("run_dir", type=click.Path(file_okay=False, path_type=Path))
    @click.option("-v", "--verbose", is_flag=True, help="输出调试日志")
    def verify_cmd(run_dir: Path, verbose: bool) -> None:
        """重新检查 RUN_DIR 中结果的不变量."""
        _setup_logging(verbose)
        checks = verify(run_dir)
        for check in checks:
            mark = "[green]PASS[/]" if check.passed else "[red]FAIL[/]"
            detail = f" ({escape(check.detail)})" if check.detail else ""
            console.print(f"{mark} {check.name}{detail}", highlight=False)
        if not all(check.passed for check in checks):
            raise SystemExit(1)

    return cli


def main() -> None:
    """入口函数."""
    cli = _create_cli()
    cli()


if __name__ == "__main__":
    main()
