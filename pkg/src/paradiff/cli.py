"""Command line entry point: ``paradiff {reduce,solve,verify}``.

Configuration comes from an optional JSON file (``--config``) overridden by
flags. Recognised JSON keys::

    command        "reduce" | "solve" | "verify"
    preset         "zero" | "manuela" | "manuela1" | "manuela2" | "christ(p)"
    spec           custom nonlinearity {"monomials": [{"re", "im", "exp"}], "F": [...], "claim"}
    potential      {"coeffs": {"1": 0.5, "-1": 0.5}, "symmetric": true}
    amp, mode      initial data amp * e^{i mode x}  (profile "exp") or amp * cos(mode x) ("cos")
    profile        "exp" | "cos"
    coeffs         [[k, re, im], ...] explicit initial Fourier coefficients (exclusive with amp/mode)
    n, s, t_final, dt, tol, delta, rho, max_iter, refresh_every
    out            output directory
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import report
from .errors import ConfigError, ParadiffError
from .invariants import run_suite
from .nonlinear import PRESETS, NonlinearitySpec, ParalinearizedSystem, preset
from .reducer import conjugation_residual, reduce_full
from .solver import SolverConfig, iterate_quasilinear
from .spectral import DoubledState, PeriodicGrid, PotentialSpec, SpectralField

log = logging.getLogger("paradiff")

COMMANDS = ("reduce", "solve", "verify")


@dataclass
class ExperimentConfig:
    command: str = "verify"
    preset: str | None = None
    spec: dict | None = None
    potential: dict | None = None
    amp: float | None = None
    mode: int | None = None
    profile: str = "exp"
    coeffs: list | None = None
    n: int | None = None
    s: float = 4.0
    t_final: float = 0.05
    dt: float = 1e-4
    tol: float = 1e-8
    delta: float = 0.5
    rho: int = 2
    max_iter: int = 20
    refresh_every: int = 1
    out: str = "paradiff_out"

    @property
    def grid_size(self) -> int:
        if self.n is not None:
            return int(self.n)
        return 128 if self.command == "verify" else 256

    def nonlinearity(self) -> NonlinearitySpec:
        if self.spec is not None:
            return NonlinearitySpec.from_json(self.spec)
        return preset(self.preset or "zero")

    def potential_spec(self) -> PotentialSpec:
        try:
            return PotentialSpec.from_json(self.potential)
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError("malformed potential", path="potential", reason=str(exc))

    def initial_state(self) -> np.ndarray:
        n = self.grid_size
        grid = PeriodicGrid(n)
        if self.coeffs is not None:
            c = np.zeros(n, dtype=complex)
            for i, row in enumerate(self.coeffs):
                try:
                    k, re, im = int(row[0]), float(row[1]), float(row[2])
                except (TypeError, ValueError, IndexError) as exc:
                    raise ConfigError("coefficient rows are [k, re, im]", path=f"coeffs[{i}]", reason=str(exc))
                if not -n // 2 < k < n // 2:
                    raise ConfigError("coefficient mode outside the grid", path=f"coeffs[{i}]", k=k, n=n)
                c[k + n // 2] += complex(re, im)
            u = SpectralField(grid, c)
        else:
            amp = 0.5 if self.amp is None else float(self.amp)
            mode = 1 if self.mode is None else int(self.mode)
            x = grid.nodes
            if self.profile == "cos":
                u = SpectralField.from_samples(amp * np.cos(mode * x) + 0j, grid)
            else:
                u = SpectralField.from_samples(amp * np.exp(1j * mode * x), grid)
        return DoubledState.from_scalar(u).array

    def solver_config(self) -> SolverConfig:
        return SolverConfig(n=self.grid_size, s=self.s, T=self.t_final, dt=self.dt, tol=self.tol, delta=self.delta,
                            rho=self.rho, max_iter=self.max_iter, refresh_every=self.refresh_every)

    def to_json(self) -> dict:
        # the output location is not part of the experiment
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "out"}
        d["n"] = self.grid_size
        return d


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
_FLAG_KEYS = {"t_final", "n", "amp", "mode", "dt", "s", "delta", "rho", "preset", "out", "profile", "tol", "refresh_every"}


def load_config(path: str | os.PathLike | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Defaults, then the JSON file, then non-None overrides."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("cannot read config file", path=str(path), reason=str(exc))
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError("malformed JSON", path=str(path), line=exc.lineno, column=exc.colno, reason=exc.msg)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", path="$")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError("unknown config keys", path=f"$.{unknown[0]}", keys=unknown)
    merged = dict(data)
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = v
    cfg = ExperimentConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError("unknown command", path="command", value=cfg.command, valid=list(COMMANDS))
    if cfg.preset is not None and cfg.spec is not None:
        raise ConfigError("give either a preset or a custom spec, not both", path="spec")
    if cfg.coeffs is not None and (cfg.amp is not None or cfg.mode is not None):
        raise ConfigError("explicit coeffs contradict amp/mode", path="coeffs")
    if cfg.profile not in ("exp", "cos"):
        raise ConfigError("profile must be exp or cos", path="profile", value=cfg.profile)
    if cfg.preset is not None:
        try:
            preset(cfg.preset)
        except ConfigError as exc:
            raise ConfigError("unknown preset", path="preset", preset=cfg.preset, valid=list(PRESETS)) from exc
    for key in ("n", "rho", "max_iter", "refresh_every", "mode"):
        v = getattr(cfg, key)
        if v is not None and (isinstance(v, bool) or int(v) != v):
            raise ConfigError("expected an integer", path=key, value=v)


# ---------------------------------------------------------------------------
# experiments


def _reduce(cfg: ExperimentConfig, out: Path) -> int:
    spec = cfg.nonlinearity()
    n = cfg.grid_size
    sysm = ParalinearizedSystem(spec, cfg.potential_spec(), SolverConfig(n=n, delta=cfg.delta).cutoff, cfg.initial_state())
    bundle = reduce_full(sysm, check=True)
    probes = [k for k in (8, 16, 32, 64) if k < n // 2]
    res = conjugation_residual(sysm, bundle, probes)
    summ = bundle.summary()
    body = {"m2": summ["m2"], "m1": summ["m1"], "residual_table": res["residual_table"],
            "margins": summ["diagnostics"].get("margins", {}), "stages": summ["stages"],
            "diagnostics": summ["diagnostics"], "config": cfg.to_json(), "spec": spec.to_json()}
    report.write_json(out / "bundle.json", body)
    report.write_csv(out / "residuals.csv", ("k", "relative_residual"), res["residual_table"])
    print(f"m2 = {bundle.m2:.17g}  m1 = {bundle.m1.real:.17g}{bundle.m1.imag:+.17g}i  stages = {[s.name for s in bundle.stages]}")
    return 0


def _solve(cfg: ExperimentConfig, out: Path) -> int:
    spec = cfg.nonlinearity()
    pot = cfg.potential_spec()
    traj, rep = iterate_quasilinear(spec, pot, cfg.initial_state(), cfg.solver_config())
    report.write_csv(out / "trajectory.csv", report.TRAJECTORY_HEADER, traj.rows(cfg.s, spec, pot))
    report.write_csv(out / "convergence.csv", report.CONVERGENCE_HEADER, rep.rows)
    report.write_json(out / "run.json", {"config": cfg.to_json(), "spec": spec.to_json(), "T": rep.T,
                                          "halvings": rep.halvings, "converged": rep.converged, "iterations": rep.rows})
    print(f"converged after {len(rep.rows)} iterations at T = {rep.T:g} (halvings: {rep.halvings})")
    return 0


def _verify(cfg: ExperimentConfig, out: Path) -> int:
    seed = int(os.environ.get("PARADIFF_SEED", "0"))
    results = run_suite(cfg.grid_size, seed)
    rows = []
    for r in results:
        mark = "PASS" if r.ok else "FAIL"
        print(f"{mark}  {r.module}.{r.name}  value={r.value:.3e}  tol={r.tol:.1e}  ({r.seconds:.2f}s)")
        rows.append({"module": r.module, "name": r.name, "ok": r.ok, "value": r.value, "tol": r.tol})
    report.write_json(out / "verify.json", {"n": cfg.grid_size, "seed": seed, "invariants": rows})
    return 0 if all(r.ok for r in results) else 1


_RUNNERS = {"reduce": _reduce, "solve": _solve, "verify": _verify}


def run_experiment(cfg: ExperimentConfig) -> int:
    out = report.ensure_dir(cfg.out)
    try:
        return _RUNNERS[cfg.command](cfg, out)
    except ParadiffError as exc:
        print(f"error [{cfg.command}]: {exc}", file=sys.stderr)
        print(report.dumps(exc.to_dict()), file=sys.stderr, end="")
        return 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="paradiff", description="Paradifferential reduction and solver for quasilinear NLS on the circle.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
        sp.add_argument("--n", type=int)
        sp.add_argument("--amp", type=float)
        sp.add_argument("--mode", type=int)
        sp.add_argument("--profile", choices=("exp", "cos"))
        sp.add_argument("--t-final", dest="t_final", type=float)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--s", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--rho", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--refresh-every", dest="refresh_every", type=int)
        sp.add_argument("--out")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in _FLAG_KEYS}
    overrides["command"] = args.command
    try:
        cfg = load_config(args.config, overrides)
    except ParadiffError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        print(report.dumps(exc.to_dict()), file=sys.stderr, end="")
        return 2
    return run_experiment(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
