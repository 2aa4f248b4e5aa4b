"""Run configuration: a line-oriented ``key = value`` format with sections.

Every key has a default; the bare defaults describe the temporal
convergence study (T_f = 1, dt in {1/4, 1/8, 1/16, 1/32}, h = 1/64,
k = l = 3, unit coefficients with b0 = gamma = 0.1).  Each experiment
then applies its own preset before the user's values, and user values
always win.  Numbers may be written as simple arithmetic, e.g.
``dt = 1/32`` or ``T_f = pi/2 * 1e-9``.
"""
from __future__ import annotations

import ast
import hashlib
import math
import operator
from dataclasses import dataclass, fields, replace
from typing import Optional

from .errors import ConfigError, InvalidArgumentError
from .model import ModelParams, lame_from_young_poisson, scaled_stabilization, specialize

EXPERIMENTS = ("converge_time", "converge_space", "iterate", "barry_mercer", "single_run")
SECTIONS = ("run", "experiment", "model", "params", "time", "mesh", "discretization",
            "solver", "stabilization", "output")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "converge_time"
    model: str = "general"  # general | thermo_poroelastic | barenblatt_biot
    problem: str = "manufactured"  # manufactured | barry_mercer | zero
    variant: str = "smooth_run"  # Barry-Mercer variant
    # physical coefficients
    mu: float = 1.0
    lmbda: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    b0: float = 0.1
    gamma: float = 0.1
    K: float = 1.0
    D: float = 1.0
    E: Optional[float] = None  # with nu, overrides mu and lambda
    nu: Optional[float] = None
    omega: Optional[float] = None  # Barry-Mercer source frequency
    # time
    T_f: float = 1.0
    N: int = 32
    dt_ladder: tuple = (1 / 4, 1 / 8, 1 / 16, 1 / 32)
    # space
    n: int = 64
    n_ladder: tuple = (4, 8, 16, 32)
    k: int = 3
    l: int = 3
    xi0: str = "auto"  # auto | project | interpolate
    # solver
    solver: str = "monolithic"  # monolithic | decoupled
    tol: float = 1e-8
    max_iter: int = 50
    stopping: str = "increment"  # increment | metric
    concurrent: bool = False
    workers: int = 0  # 0 lets the pool decide
    # stabilization
    stabilization: str = "off"  # off | mesh_scaling | explicit
    eta_phi: float = 0.0
    eta_psi: float = 0.0
    # output
    line: str = "x=0.25"
    n_samples: int = 129
    output: str = "out"
    seed: int = 0

    @property
    def dt(self):
        return self.T_f / self.N

    def params(self, h=None) -> ModelParams:
        """Model coefficients, with the stabilization weights resolved for mesh size ``h``."""
        p = ModelParams(mu=self.mu, lmbda=self.lmbda, alpha=self.alpha, beta=self.beta,
                        c1=self.c1, c2=self.c2, b0=self.b0, gamma=self.gamma, K=self.K, D=self.D)
        p = specialize(self.model, p)
        if self.stabilization == "explicit":
            p = p.with_stabilization(self.eta_phi, self.eta_psi)
        elif self.stabilization == "mesh_scaling":
            if h is None:
                raise InvalidArgumentError("mesh_scaling stabilization needs the mesh size")
            p = p.with_stabilization(scaled_stabilization(p, h))
        return p

    def to_text(self):
        """Config document that parses back to this exact configuration."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            out.append(f"{_KEY_OUT.get(f.name, f.name)} = {_format(v)}")
        return "\n".join(out) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


_KEY_OUT = {"lmbda": "lambda"}
_ALIASES = {"lambda": "lmbda", "dt": "dt", "h": "h"}
_FIELDS = {f.name: f for f in fields(RunConfig)}
_CHOICES = {
    "experiment": EXPERIMENTS,
    "model": ("general", "thermo_poroelastic", "barenblatt_biot"),
    "problem": ("manufactured", "barry_mercer", "zero"),
    "variant": ("smooth_run", "stab_single_step"),
    "xi0": ("auto", "project", "interpolate"),
    "solver": ("monolithic", "decoupled"),
    "stopping": ("increment", "metric"),
    "stabilization": ("off", "mesh_scaling", "explicit"),
}
_FLOATS = {"mu", "lmbda", "alpha", "beta", "c1", "c2", "b0", "gamma", "K", "D", "E", "nu", "omega",
           "T_f", "tol", "eta_phi", "eta_psi"}
_INTS = {"N", "n", "k", "l", "max_iter", "workers", "n_samples", "seed"}

_PARAM_KEYS = ("mu", "lmbda", "alpha", "beta", "c1", "c2", "b0", "gamma", "K", "D")

PRESETS = {
    "converge_time": {},
    "converge_space": {"T_f": 0.01, "N": 64, "k": 2, "l": 2},
    "iterate": {"T_f": 1.0, "N": 32, "n": 16, "k": 2, "l": 2, "solver": "decoupled",
                "tol": 1e-10, "max_iter": 30},
    "barry_mercer": {"problem": "barry_mercer", "n": 64, "k": 2, "l": 1,
                     "stabilization": "mesh_scaling", "solver": "decoupled", "tol": 0.0},
    "single_run": {"T_f": 1.0, "N": 32, "n": 16, "k": 2, "l": 2},
}

_BM_COMMON = {"alpha": 0.5, "beta": 0.5, "c1": 0.0, "c2": 0.0, "b0": 0.0, "gamma": 0.0}
VARIANT_PRESETS = {
    "smooth_run": dict(_BM_COMMON, mu=0.4, lmbda=0.2, K=1.0, D=1.0, T_f=math.pi / 2, N=20, max_iter=5),
    "stab_single_step": dict(_BM_COMMON, E=1e5, nu=0.1, K=1e-6, D=1e-6, T_f=math.pi / 2 * 1e-9, N=1,
                             max_iter=30),
}


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv}
_NAMES = {"pi": math.pi}


def _arith(text):
    """Evaluate a number or a small arithmetic expression (``1/32``, ``pi/2*1e-9``)."""
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(text)
    try:
        return ev(ast.parse(text.strip(), mode="eval").body)
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError):
        raise ValueError(f"not a number: {text!r}") from None


def _convert(name, raw):
    raw = raw.strip()
    if name in _CHOICES:
        if raw not in _CHOICES[name]:
            raise ValueError(f"must be one of {', '.join(_CHOICES[name])}, got {raw!r}")
        return raw
    if name in ("E", "nu", "omega") and raw.lower() == "none":
        return None
    if name in _FLOATS:
        return float(_arith(raw))
    if name in _INTS:
        v = _arith(raw)
        if float(v) != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if name == "concurrent":
        if raw.lower() in ("true", "yes", "1", "on"):
            return True
        if raw.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected true or false, got {raw!r}")
    if name == "dt_ladder":
        return tuple(float(_arith(x)) for x in raw.split(",") if x.strip())
    if name == "n_ladder":
        out = []
        for x in raw.split(","):
            if x.strip():
                v = _arith(x)
                if float(v) != int(v):
                    raise ValueError(f"mesh sizes must be integers, got {x.strip()!r}")
                out.append(int(v))
        return tuple(out)
    return raw


def parse_assignments(text):
    """``[(line_no, key, raw_value)]`` from a config document."""
    out = []
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError("unterminated section header", line=no)
            sec = s[1:-1].strip()
            if sec not in SECTIONS:
                raise ConfigError(f"unknown section [{sec}]", line=no)
            continue
        key, eq, value = s.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ConfigError(f"expected 'key = value', got {s!r}", line=no)
        if not value.strip():
            raise ConfigError(f"missing value for {key!r}", line=no)
        out.append((no, key, value))
    return out


def _canonical(key, line=None):
    name = _ALIASES.get(key, key)
    if name not in _FIELDS and name not in ("dt", "h"):
        raise ConfigError(f"unknown key {key!r}", line=line)
    return name


def build_config(assignments, experiment=None) -> RunConfig:
    """Resolve ``(line, key, raw)`` assignments on top of the defaults and presets."""
    user = {}
    for line, key, raw in assignments:
        name = _canonical(key, line)
        try:
            user[name] = _convert(name, raw) if name not in ("dt", "h") else float(_arith(raw))
        except ValueError as exc:
            raise ConfigError(str(exc), line=line, field=key) from None
    if experiment is not None:
        user["experiment"] = experiment
    exp = user.get("experiment", RunConfig.experiment)
    values = dict(PRESETS[exp])
    if exp == "barry_mercer" or user.get("problem") == "barry_mercer":
        values.update(VARIANT_PRESETS[user.get("variant", RunConfig.variant)])
    # time step and mesh size shorthands
    T_f = user.get("T_f", values.get("T_f", RunConfig.T_f))
    if "dt" in user:
        dt = user.pop("dt")
        N = T_f / dt if dt > 0 else -1
        if dt <= 0 or abs(N - round(N)) > 1e-9 * max(1.0, N):
            raise ConfigError(f"dt={dt} does not divide T_f={T_f}", field="dt")
        user["N"] = int(round(N))
    if "h" in user:
        h = user.pop("h")
        n = 1.0 / h if h > 0 else -1
        if h <= 0 or abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"h={h} is not 1/n for an integer n", field="h")
        user["n"] = int(round(n))
    values.update(user)
    if values.get("E") is not None or values.get("nu") is not None:
        if values.get("E") is None or values.get("nu") is None:
            raise ConfigError("E and nu must be given together", field="E" if values.get("E") is None else "nu")
        try:
            lam, mu = lame_from_young_poisson(values["E"], values["nu"])
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc), field="nu" if "Poisson" in str(exc) else "E") from None
        for name, v in (("lmbda", lam), ("mu", mu)):
            if name in user and not math.isclose(user[name], v, rel_tol=1e-12):
                raise ConfigError(f"{_KEY_OUT.get(name, name)} conflicts with E and nu", field=name)
            values[name] = v
    cfg = replace(RunConfig(), **values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    def bad(name, msg):
        raise ConfigError(msg, field=_KEY_OUT.get(name, name))

    if cfg.k not in (2, 3):
        bad("k", f"k must be 2 or 3, got {cfg.k}")
    if cfg.l not in (1, 2, 3):
        bad("l", f"l must be 1, 2 or 3, got {cfg.l}")
    if cfg.n < 1:
        bad("n", f"n must be >= 1, got {cfg.n}")
    if cfg.N < 1:
        bad("N", f"N must be >= 1, got {cfg.N}")
    if not cfg.T_f > 0:
        bad("T_f", f"T_f must be positive, got {cfg.T_f}")
    if not cfg.tol >= 0:
        bad("tol", f"tol must be non-negative, got {cfg.tol}")
    if cfg.max_iter < 1:
        bad("max_iter", f"max_iter must be >= 1, got {cfg.max_iter}")
    if cfg.workers < 0:
        bad("workers", f"workers must be >= 0, got {cfg.workers}")
    if cfg.n_samples < 3:
        bad("n_samples", f"n_samples must be >= 3, got {cfg.n_samples}")
    if not cfg.dt_ladder or any(not d > 0 for d in cfg.dt_ladder):
        bad("dt_ladder", "dt_ladder needs positive entries")
    for d in cfg.dt_ladder if cfg.experiment == "converge_time" else ():
        N = cfg.T_f / d
        if abs(N - round(N)) > 1e-9 * max(1.0, N):
            bad("dt_ladder", f"dt={d} does not divide T_f={cfg.T_f}")
    if not cfg.n_ladder or any(m < 1 for m in cfg.n_ladder):
        bad("n_ladder", "n_ladder needs positive entries")
    if cfg.omega is not None and not math.isfinite(cfg.omega):
        bad("omega", "omega must be finite")
    if cfg.experiment == "barry_mercer" and cfg.problem != "barry_mercer":
        bad("problem", "the barry_mercer experiment needs problem = barry_mercer")
    if cfg.experiment in ("converge_time", "converge_space") and cfg.problem != "manufactured":
        bad("problem", "convergence studies need the manufactured problem")
    for name in _PARAM_KEYS + ("eta_phi", "eta_psi"):
        v = getattr(cfg, name)
        if not math.isfinite(v):
            bad(name, f"{name} must be finite")
    try:
        cfg.params(h=1.0 / cfg.n)
    except InvalidArgumentError as exc:
        name = str(exc).split()[0]
        raise ConfigError(str(exc), field=_KEY_OUT.get(name, name if name in _FIELDS else None)) from None


def parse_config(text, experiment=None, overrides=()) -> RunConfig:
    """Parse a config document; ``overrides`` are extra ``key=value`` strings applied last."""
    assignments = parse_assignments(text)
    for item in overrides:
        key, eq, value = item.partition("=")
        if not eq or not key.strip() or not value.strip():
            raise ConfigError(f"override must be key=value, got {item!r}")
        assignments.append((None, key.strip(), value))
    return build_config(assignments, experiment)
