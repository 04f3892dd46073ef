"""
The ``mathonet`` command line: dataset generation, discovery,
re-simulation, uncertainty bands and report rendering.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .benchmarks import SystemSpec, generate_dataset
from .cog import Cog
from .config import RunConfig, TrainConfig, load_config
from .console import Console, setup_logging
from .converters import ExistingPath, NoiseLevel, SystemName, Vector, coerce_field
from .core import command
from .errors import (
    AllRunsDivergedError,
    BadArgument,
    CommandNotFound,
    DataError,
    DegenerateStencilError,
    DivergedRunsError,
    IntegrationError,
    StructuralError,
)
from .hybrid import StencilModel, rescale_stencil
from .storage import (
    load_model,
    load_reg,
    load_report,
    read_dataset,
    save_report,
    write_band,
    write_dataset,
    write_history,
    write_json,
    write_trajectory,
)
from .symbolic import default_names, extract_expression, simplify
from .trainer import discover as run_sweep
from .trainer import model_from_dict
from .validation import mc_uncertainty, simulate_discovered, simulate_expressions

__all__ = ("DiscoveryCog", "build_console", "main")

logger = logging.getLogger(__name__)


def _table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> List[str]:
    cells = [list(map(str, header))] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return lines


class DiscoveryCog(Cog, name="discovery"):
    """Equation discovery commands."""

    @command()
    async def gen(
        self,
        ctx,
        *,
        system: SystemName,
        noise: NoiseLevel = 0.0,
        seed: int = 0,
        out: Path = Path("data.csv"),
    ):
        """Integrates a benchmark system and writes its dataset CSV and metadata."""
        spec = SystemSpec.named(system)
        try:
            dataset = generate_dataset(spec, noise_sigma=noise, seed=seed)
        except IntegrationError as exc:
            raise DataError(f"Integrating {system} failed: {exc}") from exc
        out.parent.mkdir(parents=True, exist_ok=True)
        write_dataset(dataset, out)
        await ctx.send(
            f"Wrote {len(dataset)} rows ({dataset.n_inputs} inputs, {dataset.n_outputs} outputs) to {out}"
        )

    @command()
    async def discover(
        self,
        ctx,
        data: Path,
        *,
        config: Optional[ExistingPath] = None,
        system: Optional[SystemName] = None,
        out: Path = Path("."),
        target: Optional[int] = None,
        jobs: Optional[int] = None,
        cycles: Optional[int] = None,
        **overrides,
    ):
        """Discovers one governing equation per target column of a dataset.

        Any training setting can be given as a flag, e.g. ``--lambda-grid 1e-4,1e-6``
        or ``--restarts 3``; flags win over the configuration file. ``--target``
        counts from 1 (``y1``).
        """
        dataset = read_dataset(data)
        meta_system = dataset.meta.get("system")
        if config is not None:
            train = load_config(config, system=system, default_system=meta_system)
        else:
            name = system or meta_system
            train = TrainConfig.for_system(name) if name else TrainConfig()

        settings = {name: coerce_field(name, raw) for name, raw in overrides.items()}
        if cycles is not None:
            settings["n_cycle"] = cycles
        if settings:
            train = train.replace(**settings)

        options = {"jobs": jobs} if jobs is not None else {}
        run = RunConfig(train, system=system or meta_system, out_dir=out, **options)
        out_dir = run.prepare()

        if target is not None and not 1 <= target <= dataset.n_outputs:
            raise BadArgument(f"--target must lie in 1..{dataset.n_outputs}.")
        targets = [target - 1] if target is not None else list(range(dataset.n_outputs))

        for j in targets:
            tag = f"y{j + 1}"
            try:
                report = run_sweep(dataset, train, target=j, jobs=run.jobs)
            except AllRunsDivergedError as exc:
                save_report(exc.report, out_dir / f"report_{tag}.json")
                raise DivergedRunsError(exc) from exc
            except StructuralError as exc:
                raise DataError(f"{data} does not fit the configured model: {exc}") from exc

            save_report(report, out_dir / f"report_{tag}.json")
            write_json(report.winner_model, out_dir / f"model_{tag}.json")
            write_json(report.winner_reg, out_dir / f"reg_{tag}.json")
            write_history(report.history, out_dir / f"history_{tag}.csv")

            winner = report.winner
            await ctx.send(
                f"{tag}: {winner['expression']}  "
                f"[{report.label}, lambda={winner['lambda']:g}, seed={winner['seed']}, "
                f"{winner['term_count']} terms, val MSE {winner['val_mse']:.4g}]"
            )

            if train.model == "stencil":
                try:
                    rescaled = rescale_stencil(
                        model_from_dict(report.winner_model), train.coeff_floor
                    )
                except DegenerateStencilError as exc:
                    raise DataError(f"{tag}: the winning stencil cannot be rescaled: {exc}") from exc
                write_json(rescaled.to_dict(), out_dir / f"rescale_{tag}.json")
                await ctx.send(
                    f"{tag} rescaled: {rescaled.equation} "
                    f"(kernel deviation {rescaled.deviation:.1%})"
                )

    @command()
    async def simulate(
        self,
        ctx,
        *models: Path,
        x0: Vector,
        dt: float = 0.01,
        steps: int = 1000,
        every: int = 1,
        out: Path = Path("trajectory.csv"),
        expressions: bool = False,
    ):
        """Integrates discovered models (one model file per state dimension).

        With ``--expressions`` the simplified symbolic forms drive the integration.
        """
        if not models:
            raise BadArgument("simulate needs one model file per state dimension.")
        nets = [load_model(path) for path in models]
        if any(isinstance(net, StencilModel) for net in nets):
            raise DataError("Stencil models describe a field and cannot be simulated here.")
        if dt <= 0 or steps < 0 or every < 1:
            raise BadArgument("--dt must be positive, --steps non-negative, --every at least 1.")

        try:
            if expressions:
                exprs = [simplify(extract_expression(net)) for net in nets]
                traj = simulate_expressions(exprs, x0, dt, steps, every)
            else:
                traj = simulate_discovered(nets, x0, dt, steps, every)
        except StructuralError as exc:
            raise DataError(str(exc)) from exc

        write_trajectory(traj, out, default_names(len(nets)))
        await ctx.send(f"Wrote {len(traj)} states to {out}")
        if traj.diverged:
            logger.warning("Trajectory diverged at t=%g and was truncated", traj.t[-1])
            await ctx.send(f"Trajectory diverged after t={traj.t[-1]:g}; it was truncated.")

    @command()
    async def uncertainty(
        self,
        ctx,
        model: Path,
        data: Path,
        *,
        reg: Optional[Path] = None,
        samples: int = 1000,
        seed: int = 0,
        out: Path = Path("band.csv"),
    ):
        """Monte-Carlo predictive mean and variance of a model on a dataset's states."""
        if samples < 1:
            raise BadArgument("--samples must be at least 1.")
        net = load_model(model)
        dataset = read_dataset(data)
        state = None
        if reg is not None:
            state = load_reg(reg)
        else:
            logger.warning("No Bayesian state given; posterior variances are taken as 0")

        try:
            band = mc_uncertainty(net, state, dataset.X, T=samples, seed=seed)
        except StructuralError as exc:
            raise DataError(str(exc)) from exc
        write_band(band, out)
        await ctx.send(
            f"Wrote {band.mean.shape[0]} points (T={band.T}, "
            f"mean variance {float(np.mean(band.variance)):.4g}) to {out}"
        )

    @command()
    async def report(self, ctx, path: Path):
        """Renders the run table and the winner's per-cycle history of a report.

        The output looks like::

            sparse-group-bayesian report for y3
            winner: -2.667·z + 1.000·x·y (lambda=0.0001, seed=0, 2 terms, val MSE 1.2e-05)

            lambda  seed  status  cycles  terms  val_mse
            ------  ----  ------  ------  -----  -------
            0.0001  0     ok      6       2      1.2e-05
            1e-06   0     ok      6       3      1.5e-05

            cycle  terms  nested  connections  nonzero  val_mse
            -----  -----  ------  -----------  -------  -------
            1      118    140     63           60       0.8127
            2      41     52      30           29       0.01044
            6      2      2       6            6        1.2e-05

        ``nested`` also counts the terms inside unary arguments. A run that
        diverged before its first record shows ``-`` for terms and MSE.
        """
        rep = load_report(path)
        lines = [f"{rep.label} report for y{rep.target + 1}"]
        if rep.winner is not None:
            w = rep.winner
            lines.append(
                f"winner: {w['expression']} (lambda={w['lambda']:g}, seed={w['seed']}, "
                f"{w['term_count']} terms, val MSE {w['val_mse']:.4g})"
            )
        lines.append("")
        rows = []
        for run in rep.runs:
            final = run.final
            rows.append(
                [
                    f"{run.lam:g}",
                    run.seed,
                    run.status,
                    len(run.cycles),
                    final.term_count if final else "-",
                    f"{final.val_mse:.4g}" if final else "-",
                ]
            )
        lines.extend(_table(["lambda", "seed", "status", "cycles", "terms", "val_mse"], rows))

        history = rep.history
        if history:
            lines.append("")
            lines.extend(
                _table(
                    ["cycle", "terms", "nested", "connections", "nonzero", "val_mse"],
                    [
                        [
                            c.cycle,
                            c.term_count,
                            c.nested_term_count,
                            c.active_connections,
                            c.nonzero_weights,
                            f"{c.val_mse:.4g}",
                        ]
                        for c in history
                    ],
                )
            )
        await ctx.send("\n".join(lines))

    @command()
    async def help(self, ctx, name: Optional[str] = None):
        """Lists the commands, or shows one command's usage."""
        console = ctx.console
        if name is not None:
            cmd = console.get_command(name)
            if cmd is None:
                raise CommandNotFound(f'Command "{name}" is not found')
            text = f"mathonet {cmd.name} {cmd.signature}".rstrip()
            if cmd.help:
                text += "\n\n" + cmd.help
            await ctx.send(text)
            return

        rows = [[cmd.name, cmd.short_doc] for cmd in console.commands if not cmd.hidden]
        await ctx.send("\n".join(["usage: mathonet [--verbose] <command> ...", ""] + _table(["command", "description"], rows)))

    @command()
    async def console(self, ctx):
        """Starts an interactive session; ``exit`` leaves it."""
        await ctx.console.interactive()


def build_console(**options) -> Console:
    console = Console(**options)
    console.add_cog(DiscoveryCog())
    return console


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    verbose = False
    while argv and argv[0] in ("-v", "--verbose"):
        verbose = True
        argv.pop(0)
    setup_logging(verbose)
    if not argv:
        argv = ["help"]
    return build_console().run(argv)
