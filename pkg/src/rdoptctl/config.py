"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments. Relative file paths are resolved
against the directory of the config file. Defaults for the 1D benchmark
(rho = 0.5, D = 0.1, T = 10, 1000 steps) are package choices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import ControlTrajectory, ModelParams, TimeGrid
from .errors import InvalidArgumentError
from .export import ExportSpec, read_control_csv
from .fem import FeField
from .ingest import IngestConfig, build_initial_condition
from .mesh import build_interval_mesh, read_image
from .optimize import OptimizeConfig, Problem

DEFAULTS = {
    "dim": "1",
    "mesh.n_elements": "160",
    "mesh.a": "0",
    "mesh.b": "1",
    "mesh.threshold": "0",
    "mesh.spacing": "1",
    "mesh.normalize": "max",
    "model.rho": "0.5",
    "model.diffusion": "0.1",
    "time.T": "10",
    "time.n_steps": "1000",
    "objective.alpha": "100",
    "opt.method": "linear_combination",
    "opt.beta": "0.5",
    "opt.tol": "1e-8",
    "opt.max_iter": "500",
    "opt.c0": "2.512566e-2",
    "opt.norm": "l2",
    "sim.control": "0",
    "export.out_dir": "out",
    "export.formats": "csv,vtk",
}
KEYS = set(DEFAULTS) | {"mesh.image", "opt.gamma", "init.kind", "export.snapshot_times"}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def parse_config_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _float(d, key):
    try:
        v = float(d[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {d[key]!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    return v


def _int(d, key):
    try:
        return int(d[key])
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {d[key]!r}") from None


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


@dataclass
class RunConfig:
    """Validated configuration plus the directory relative paths refer to."""

    values: dict
    base_dir: Path
    given: dict | None = None

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_dict(parse_config_text(path.read_text()), path.parent)

    @classmethod
    def from_dict(cls, values, base_dir="."):
        bad = set(values) - KEYS
        if bad:
            raise ConfigError(f"unknown keys: {sorted(bad)}")
        d = dict(DEFAULTS)
        d.update({k: str(v) for k, v in values.items()})
        cfg = cls(d, Path(base_dir), dict(values))
        cfg._validate(set(values))
        return cfg

    def path(self, key):
        p = Path(self.values[key])
        return p if p.is_absolute() else self.base_dir / p

    def _validate(self, given):
        d = self.values
        dim = _int(d, "dim")
        if dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        has_image = "mesh.image" in d
        if dim == 1 and has_image:
            raise ConfigError("dim = 1 takes mesh.n_elements, not mesh.image")
        if dim == 2:
            if not has_image:
                raise ConfigError("dim = 2 requires mesh.image")
            if "mesh.n_elements" in given:
                raise ConfigError("give exactly one mesh source (mesh.n_elements or mesh.image)")
            if not self.path("mesh.image").is_file():
                raise ConfigError(f"image file not found: {self.path('mesh.image')}")
        d.setdefault("init.kind", "cosine" if dim == 1 else "image")
        kind = d["init.kind"]
        if kind == "image" and dim != 2:
            raise ConfigError("init.kind = image needs dim = 2")
        if kind == "cosine" and dim != 1:
            raise ConfigError("init.kind = cosine needs dim = 1")
        if kind.startswith("constant:"):
            v = kind.split(":", 1)[1]
            if not _is_number(v) or not (0 <= float(v) <= 1):
                raise ConfigError(f"init.kind constant value must lie in [0, 1], got {v!r}")
        elif kind not in ("cosine", "image"):
            raise ConfigError(f"init.kind must be cosine, image or constant:<v>, got {kind!r}")
        for key in ("opt.c0", "sim.control"):
            if _is_number(d[key]):
                if not float(d[key]) >= 0:
                    raise ConfigError(f"{key}: control must be >= 0")
            elif not self.path(key).is_file():
                raise ConfigError(f"{key}: control file not found: {self.path(key)}")
        for key in ("model.rho", "model.diffusion", "time.T", "opt.beta", "opt.tol",
                    "mesh.threshold", "mesh.spacing", "mesh.a", "mesh.b"):
            _float(d, key)
        for key in ("time.n_steps", "opt.max_iter", "mesh.n_elements"):
            _int(d, key)
        self.alphas()
        if "opt.gamma" in d:
            _float(d, "opt.gamma")
        # build the cheap objects now so bad values surface as config errors
        try:
            self.grid()
            self.params()
            self.ingest_config()
            self.export_spec()
            for a in self.alphas():
                self.optimize_config(a, c0=0.0)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def dim(self):
        return int(self.values["dim"])

    def alphas(self):
        parts = [p for p in self.values["objective.alpha"].split(",") if p.strip()]
        try:
            alphas = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"objective.alpha: bad value {self.values['objective.alpha']!r}") from None
        if not alphas or any(not (a > 0 and math.isfinite(a)) for a in alphas):
            raise ConfigError("objective.alpha must be one or more positive numbers")
        return alphas

    def grid(self):
        return TimeGrid(_float(self.values, "time.T"), _int(self.values, "time.n_steps"))

    def params(self):
        return ModelParams(_float(self.values, "model.rho"), _float(self.values, "model.diffusion"))

    def ingest_config(self):
        norm = self.values["mesh.normalize"]
        if norm.startswith("fixed:"):
            norm = norm.split(":", 1)[1]
        elif norm != "max":
            raise ConfigError("mesh.normalize must be 'max' or 'fixed:<scale>'")
        return IngestConfig(_float(self.values, "mesh.threshold"), norm)

    def export_spec(self, out_dir=None):
        d = self.values
        times = None
        if d.get("export.snapshot_times"):
            try:
                times = [float(t) for t in d["export.snapshot_times"].split(",") if t.strip()]
            except ValueError:
                raise ConfigError("export.snapshot_times must be a comma-separated list") from None
            grid = self.grid()
            if any(not (0 <= t <= grid.T) for t in times):
                raise ConfigError("export.snapshot_times must lie in [0, T]")
        formats = tuple(f.strip() for f in d["export.formats"].split(",") if f.strip())
        return ExportSpec(Path(out_dir) if out_dir else self.path("export.out_dir"), times, formats)

    def mesh_and_u0(self):
        """Mesh and initial condition; reads the image in 2D."""
        d = self.values
        kind = d["init.kind"]
        if self.dim == 1:
            mesh = build_interval_mesh(_int(d, "mesh.n_elements"),
                                       _float(d, "mesh.a"), _float(d, "mesh.b"))
            if kind == "cosine":
                return mesh, FeField.interpolate(mesh, lambda x: (np.cos(np.pi * x) + 1) / 2)
            return mesh, FeField.constant(mesh, float(kind.split(":", 1)[1]))
        image = read_image(self.path("mesh.image"), _float(d, "mesh.spacing"))
        mesh, u0 = build_initial_condition(image, self.ingest_config())
        if kind.startswith("constant:"):
            u0 = FeField.constant(mesh, float(kind.split(":", 1)[1]))
        return mesh, u0

    def problem(self):
        mesh, u0 = self.mesh_and_u0()
        return Problem(mesh, self.params(), self.grid(), u0)

    def _control(self, key, grid):
        v = self.values[key]
        if _is_number(v):
            return float(v)
        t, c = read_control_csv(self.path(key))
        if len(t) != grid.n_nodes or not np.allclose(t, grid.times, rtol=0, atol=1e-9 * grid.T):
            raise ConfigError(f"{key}: control file times do not match the time grid")
        return c

    def fixed_control(self, grid):
        c = self._control("sim.control", grid)
        if isinstance(c, ControlTrajectory):
            return c
        try:
            return ControlTrajectory.constant(grid, c)
        except InvalidArgumentError as exc:
            raise ConfigError(f"sim.control: {exc}") from None

    def optimize_config(self, alpha, c0=None):
        d = self.values
        if c0 is None:
            c0 = self._control("opt.c0", self.grid())
        gamma = _float(d, "opt.gamma") if "opt.gamma" in d else None
        return OptimizeConfig(alpha=alpha, method=d["opt.method"], beta=_float(d, "opt.beta"),
                              gamma=gamma, tol=_float(d, "opt.tol"),
                              max_iter=_int(d, "opt.max_iter"), c0=c0, norm=d["opt.norm"])
