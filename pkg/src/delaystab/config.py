"""Scenario files: bracketed sections, key = value pairs, # comments.

Unknown sections or keys are hard errors (a silently ignored tolerance
name would invalidate a certificate downstream). All constraint
violations are collected and reported together.

Grammar summary (see README for the full table)::

    [model]
    kind = distributed_1d | boundary_1d | semilinear_1d | abstract
    L = 3.141592653589793      # domain length          (PDE kinds)
    n = 200                    # grid intervals         (PDE kinds)
    nu = 1.0                   # diffusion              (PDE kinds)
    b = 0.0                    # drift coefficient      (PDE kinds)
    c = 2.0                    # reaction coefficient   (PDE kinds)
    control = distributed 0.9 1.9   |   control = boundary
    lambda0 = 3.5              # resolvent shift (optional)
    generator = 0 1; 0 0       # matrix rows ';'-separated (abstract)
    input_map = 0; 1           # (abstract)
    nonlinearity = cubic 1.0   |   burgers    (semilinear_1d)

    [design]
    sigma = 0.5
    tau = 0.3
    sigma_star = 1.0           # optional, default sigma + margin
    cluster_tol = ...          # optional
    svd_tol = ...              # optional
    kernel_tol = ...           # optional
    diagnostic_static_feedback = false

    [simulation]
    T = 12.0
    dt = 0.01
    z0 = eigenmode 1 1.0  |  bump 1.0 0.3 1.0  |  file path.txt
    forcing = none  |  exp 1.5 bump 2.0 0.4 0.1
    window = 1.0 12.0          # optional decay-fit window

    [output]
    directory = out            # optional, CLI --out overrides
    plot = on
    budget_s = 120             # declared wall-time budget

    [sweep]                    # optional; cartesian product
    vary.design.tau = 0.1 0.2 0.3
"""

import configparser
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .models import (
    ABSTRACT,
    BOUNDARY_1D,
    DISTRIBUTED_1D,
    SEMILINEAR_1D,
    Forcing,
    ParabolicModel,
    build_convection_diffusion_1d,
    build_custom_lti,
    build_semilinear_1d,
    burgers_nonlinearity,
    cubic_nonlinearity,
)

__all__ = ["ScenarioConfig", "parse_config", "parse_config_file"]

_KNOWN = {
    "model": {
        "kind", "l", "n", "nu", "b", "c", "control", "lambda0",
        "generator", "input_map", "nonlinearity",
    },
    "design": {
        "sigma", "tau", "sigma_star", "cluster_tol", "svd_tol", "kernel_tol",
        "diagnostic_static_feedback",
    },
    "simulation": {"t", "dt", "z0", "forcing", "window"},
    "output": {"directory", "plot", "budget_s"},
}
_KINDS = (ABSTRACT, DISTRIBUTED_1D, BOUNDARY_1D, SEMILINEAR_1D)


@dataclass
class ScenarioConfig:
    """Validated scenario: model, design, simulation, output blocks."""

    kind: str
    length: Optional[float]
    n: Optional[int]
    nu: Optional[float]
    b: float
    c: float
    control: tuple
    lambda0: Optional[float]
    generator: Optional[np.ndarray]
    input_map: Optional[np.ndarray]
    nonlinearity: tuple
    sigma: float
    tau: float
    sigma_star: Optional[float]
    cluster_tol: Optional[float]
    svd_tol: float
    kernel_tol: Optional[float]
    static_feedback: bool
    horizon: float
    dt: float
    z0_spec: tuple
    forcing_spec: tuple
    window: Optional[tuple]
    out_dir: str
    plot: bool
    budget_s: Optional[float]
    sweep: dict = field(default_factory=dict)

    def build_model(self) -> ParabolicModel:
        if self.kind == ABSTRACT:
            shift = self.lambda0 if self.lambda0 is not None else _default_shift(self.generator)
            return build_custom_lti(self.generator, self.input_map, shift)
        mode, xa, xb = self.control
        base = build_convection_diffusion_1d(
            length=self.length, n=self.n, diffusion=self.nu,
            drift=self.b, reaction=self.c,
            control=mode,
            control_window=(xa, xb) if mode == "distributed" else None,
            shift=self.lambda0,
        )
        if self.kind == SEMILINEAR_1D:
            name, strength = self.nonlinearity
            if name == "cubic":
                nl = cubic_nonlinearity(strength)
            else:
                nl = burgers_nonlinearity(base)
            return build_semilinear_1d(base, nl)
        return base

    def build_initial_state(self, model: ParabolicModel) -> np.ndarray:
        return _profile_vector(self.z0_spec, model)

    def build_forcing(self, model: ParabolicModel) -> Forcing:
        if self.forcing_spec[0] == "none":
            return Forcing.zero(model.state_dim)
        _, rate, profile = self.forcing_spec
        shape = _profile_vector(profile, model)
        return Forcing(
            evaluator=lambda t: np.exp(-rate * t) * shape,
            decay_rate=rate,
        )


def _default_shift(generator) -> float:
    return float(np.max(np.linalg.eigvals(np.atleast_2d(generator)).real) + 1.0)


def _profile_vector(spec: tuple, model: ParabolicModel) -> np.ndarray:
    kind = spec[0]
    if kind == "eigenmode":
        k, scale = spec[1], spec[2]
        vals, vecs = np.linalg.eig(model.generator)
        order = np.argsort(-vals.real)
        if k < 1 or k > len(order):
            raise ConfigError(f"eigenmode index {k} out of range 1..{len(order)}")
        v = np.real(vecs[:, order[k - 1]])
        nv = model.norm(v)
        if nv == 0:
            raise ConfigError("degenerate eigenmode profile")
        return scale * v / nv
    if kind == "bump":
        x0, width, scale = spec[1], spec[2], spec[3]
        if model.grid.size == 0:
            raise ConfigError("bump profiles need a PDE model with a grid")
        v = np.exp(-(((model.grid - x0) / width) ** 2))
        return scale * v
    if kind == "file":
        v = np.loadtxt(spec[1])
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if v.shape != (model.state_dim,):
            raise ConfigError(
                f"state file holds {v.shape} values, expected ({model.state_dim},)"
            )
        return v
    raise ConfigError(f"unknown profile kind {kind!r}")


def _parse_matrix(text: str, errors: list, what: str):
    try:
        rows = [
            [float(v) for v in row.replace(",", " ").split()]
            for row in text.split(";")
        ]
        width = {len(r) for r in rows}
        if len(width) != 1:
            raise ValueError("ragged rows")
        return np.array(rows)
    except ValueError as exc:
        errors.append(f"{what}: cannot parse matrix literal {text!r} ({exc})")
        return None


def _get_float(section, key, errors, default=None, required=False):
    raw = section.get(key)
    if raw is None:
        if required:
            errors.append(f"missing required key {key!r} in [{section.name}]")
        return default
    try:
        val = float(raw)
    except ValueError:
        errors.append(f"[{section.name}] {key} = {raw!r} is not a number")
        return default
    if not np.isfinite(val):
        errors.append(f"[{section.name}] {key} must be finite")
        return default
    return val


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate scenario text; raise ConfigError on any defect."""
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None
    )
    try:
        parser.read_file(io.StringIO(text))
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None

    errors = []
    for sec in parser.sections():
        if sec == "sweep":
            continue
        if sec not in _KNOWN:
            errors.append(f"unknown section [{sec}]")
            continue
        for key in parser[sec]:
            if key not in _KNOWN[sec]:
                errors.append(f"unknown key {key!r} in [{sec}]")
    for sec in ("model", "design", "simulation"):
        if sec not in parser:
            errors.append(f"missing section [{sec}]")
    if errors:
        raise ConfigError("; ".join(errors))

    model_s = parser["model"]
    design_s = parser["design"]
    sim_s = parser["simulation"]
    out_s = parser["output"] if "output" in parser else None

    kind = model_s.get("kind", "").strip()
    if kind not in _KINDS:
        errors.append(f"model kind must be one of {_KINDS}, got {kind!r}")

    length = _get_float(model_s, "l", errors)
    n_val = None
    if "n" in model_s:
        try:
            n_val = int(model_s["n"])
        except ValueError:
            errors.append(f"[model] n = {model_s['n']!r} is not an integer")
    nu = _get_float(model_s, "nu", errors)
    b = _get_float(model_s, "b", errors, default=0.0)
    c = _get_float(model_s, "c", errors, default=0.0)
    lambda0 = _get_float(model_s, "lambda0", errors)

    generator = input_map = None
    control = ("distributed", None, None)
    nonlinearity = ("cubic", 1.0)
    if kind == ABSTRACT:
        if "generator" not in model_s or "input_map" not in model_s:
            errors.append("abstract models need generator and input_map")
        else:
            generator = _parse_matrix(model_s["generator"], errors, "generator")
            input_map = _parse_matrix(model_s["input_map"], errors, "input_map")
    elif kind in _KINDS:
        for key, val in (("l", length), ("nu", nu)):
            if val is None:
                errors.append(f"PDE models need [model] {key}")
        if n_val is None:
            errors.append("PDE models need [model] n")
        ctl = model_s.get("control", "").split()
        if not ctl:
            errors.append("PDE models need [model] control")
        elif ctl[0] == "boundary":
            if kind != BOUNDARY_1D:
                errors.append("control = boundary requires kind = boundary_1d")
            control = ("boundary", None, None)
        elif ctl[0] == "distributed":
            if kind == BOUNDARY_1D:
                errors.append("kind = boundary_1d requires control = boundary")
            if len(ctl) != 3:
                errors.append("control = distributed needs two endpoints")
            else:
                try:
                    control = ("distributed", float(ctl[1]), float(ctl[2]))
                except ValueError:
                    errors.append(f"bad control window {ctl[1:]!r}")
        else:
            errors.append(f"unknown control {ctl[0]!r}")
        if kind == SEMILINEAR_1D:
            nl = model_s.get("nonlinearity", "cubic").split()
            if nl[0] == "cubic":
                strength = float(nl[1]) if len(nl) > 1 else 1.0
                nonlinearity = ("cubic", strength)
            elif nl[0] == "burgers":
                nonlinearity = ("burgers", None)
            else:
                errors.append(f"unknown nonlinearity {nl[0]!r}")

    sigma = _get_float(design_s, "sigma", errors, required=True)
    tau = _get_float(design_s, "tau", errors, required=True)
    sigma_star = _get_float(design_s, "sigma_star", errors)
    cluster_tol = _get_float(design_s, "cluster_tol", errors)
    svd_tol = _get_float(design_s, "svd_tol", errors, default=1e-8)
    kernel_tol = _get_float(design_s, "kernel_tol", errors)
    static = design_s.get("diagnostic_static_feedback", "false").lower() in (
        "true", "yes", "on", "1",
    )

    horizon = _get_float(sim_s, "t", errors, required=True)
    dt = _get_float(sim_s, "dt", errors, required=True)

    z0_spec = _parse_profile(sim_s.get("z0", "eigenmode 1"), errors, "z0")
    forcing_spec = _parse_forcing(sim_s.get("forcing", "none"), errors)
    window = None
    if "window" in sim_s:
        parts = sim_s["window"].split()
        if len(parts) != 2:
            errors.append("window needs two times")
        else:
            try:
                window = (float(parts[0]), float(parts[1]))
            except ValueError:
                errors.append(f"bad window {sim_s['window']!r}")

    out_dir = out_s.get("directory", "out") if out_s else "out"
    plot = (out_s.get("plot", "on").lower() in ("on", "true", "yes", "1")) if out_s else True
    budget = _get_float(out_s, "budget_s", errors) if out_s else None

    # cross-field constraints, reported together
    if sigma is not None and sigma <= 0:
        errors.append("sigma must be positive")
    if tau is not None:
        if tau < 0 or (tau == 0 and not static):
            errors.append("delay must be positive (tau = 0 only with "
                          "diagnostic_static_feedback = true)")
    if sigma_star is not None and sigma is not None and sigma_star <= sigma:
        errors.append("sigma_star must exceed sigma")
    if dt is not None and dt <= 0:
        errors.append("dt must be positive")
    if dt and tau and tau > 0:
        ratio = tau / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            errors.append(f"dt must divide tau (tau/dt = {ratio:.6g})")
    if dt and horizon:
        ratio = horizon / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            errors.append(f"dt must divide T (T/dt = {ratio:.6g})")
    if horizon is not None and tau is not None and horizon < 2 * tau:
        errors.append("T must be at least 2 * tau")
    if window is not None and tau is not None:
        if window[0] < 2 * tau or (horizon and window[1] > horizon):
            errors.append("window must lie inside (2 tau, T]")

    sweep = {}
    if "sweep" in parser:
        for key, raw in parser["sweep"].items():
            if not key.startswith("vary."):
                errors.append(f"[sweep] keys must look like vary.<section>.<key>, got {key!r}")
                continue
            parts = key.split(".")
            if len(parts) != 3 or parts[1] not in _KNOWN or parts[2] not in _KNOWN[parts[1]]:
                errors.append(f"[sweep] {key!r} does not name a known section/key")
                continue
            try:
                sweep[(parts[1], parts[2])] = [float(v) for v in raw.replace(",", " ").split()]
            except ValueError:
                errors.append(f"[sweep] {key}: values must be numbers")

    if errors:
        raise ConfigError("; ".join(errors))

    return ScenarioConfig(
        kind=kind, length=length, n=n_val, nu=nu, b=b, c=c, control=control,
        lambda0=lambda0, generator=generator, input_map=input_map,
        nonlinearity=nonlinearity,
        sigma=sigma, tau=tau, sigma_star=sigma_star, cluster_tol=cluster_tol,
        svd_tol=svd_tol, kernel_tol=kernel_tol, static_feedback=static,
        horizon=horizon, dt=dt, z0_spec=z0_spec, forcing_spec=forcing_spec,
        window=window, out_dir=out_dir, plot=plot, budget_s=budget, sweep=sweep,
    )


def _parse_profile(text: str, errors: list, what: str):
    parts = text.split()
    try:
        if parts[0] == "eigenmode":
            k = int(parts[1]) if len(parts) > 1 else 1
            scale = float(parts[2]) if len(parts) > 2 else 1.0
            return ("eigenmode", k, scale)
        if parts[0] == "bump":
            x0, width = float(parts[1]), float(parts[2])
            scale = float(parts[3]) if len(parts) > 3 else 1.0
            if width <= 0:
                errors.append(f"{what}: bump width must be positive")
            return ("bump", x0, width, scale)
        if parts[0] == "file":
            return ("file", parts[1])
    except (IndexError, ValueError):
        pass
    errors.append(f"{what}: cannot parse profile {text!r}")
    return ("eigenmode", 1, 1.0)


def _parse_forcing(text: str, errors: list):
    parts = text.split()
    if parts[0] == "none":
        return ("none",)
    if parts[0] == "exp" and len(parts) >= 3:
        try:
            rate = float(parts[1])
        except ValueError:
            errors.append(f"forcing: bad decay rate {parts[1]!r}")
            return ("none",)
        profile = _parse_profile(" ".join(parts[2:]), errors, "forcing profile")
        return ("exp", rate, profile)
    errors.append(f"cannot parse forcing {text!r}")
    return ("none",)


def parse_config_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())
