"""Experiment configuration: flat ``key = value`` files and named presets.

Grammar: lines are either ``[section]`` headers, ``key = value`` pairs,
blank, or ``#`` comments.  Unknown sections or keys are rejected.  The
``schedule.angles_per_step`` value may be a single integer or a
comma-separated list, in which case the experiment is run once per count.
"""

import copy
from dataclasses import dataclass, field

from .errors import ConfigError
from .gradtv import GradTvConfig
from .solvers import JointConfig

METHODS = ("bcx", "bc", "sbc", "gradtv", "gradtv_pca", "gradtv_nmf")
PHANTOMS = ("shepp", "vessel")

_SCHEMA = {
    "phantom": {"kind": str, "side": int, "steps": int},
    "noise": {"level": float, "seed": int},
    "schedule": {"angles_per_step": "int_list", "increment": float,
                 "stationary": bool},
    "method": {"name": str, "K": int, "alpha": float, "lambda_B": float,
               "mu_B": float, "lambda_C": float, "mu_C": float,
               "lambda_X": float, "mu_X": float, "tau": float,
               "eps_tv": float, "max_iter": int, "rel_tol": float,
               "cost_every": int, "rho_grad": float, "rho_thr": float,
               "rho_tv": float, "mu_c_tilde": float},
    "output": {"dir": str, "frames": bool, "threads": int},
}

_DEFAULTS = {
    "phantom": {"kind": "shepp", "side": 64, "steps": 50},
    "noise": {"level": 0.01, "seed": 1234},
    "schedule": {"angles_per_step": [6], "increment": 32.039,
                 "stationary": False},
    "method": {"name": "bcx", "K": 3, "alpha": 0.0, "lambda_B": 0.0,
               "mu_B": 0.0, "lambda_C": 0.0, "mu_C": 0.0, "lambda_X": 0.0,
               "mu_X": 0.0, "tau": 0.0, "eps_tv": 1e-5, "max_iter": 1200,
               "rel_tol": 5e-5, "cost_every": 25, "rho_grad": 1e-3,
               "rho_thr": 7e-4, "rho_tv": 1e-2, "mu_c_tilde": 0.1},
    "output": {"dir": "out", "frames": False, "threads": 0},
}


def _parse_bool(raw):
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _parse_value(section, key, raw):
    kind = _SCHEMA[section][key]
    try:
        if kind == "int_list":
            return [int(tok) for tok in raw.split(",") if tok.strip()]
        if kind is bool:
            return _parse_bool(raw)
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def parse_config_text(text):
    """Parse the flat config grammar into a section -> key -> value dict."""
    out = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            out.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        out[section][key] = _parse_value(section, key, raw.strip())
    return out


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description."""

    phantom: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    method: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_sections(cls, sections):
        merged = copy.deepcopy(_DEFAULTS)
        for name, values in sections.items():
            if name not in merged:
                raise ConfigError(f"unknown section [{name}]")
            for key, value in values.items():
                if key not in merged[name]:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                merged[name][key] = value
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text):
        return cls.from_sections(parse_config_text(text))

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    @classmethod
    def from_preset(cls, name):
        if name not in PRESETS:
            known = ", ".join(sorted(PRESETS))
            raise ConfigError(f"unknown preset {name!r}; available: {known}")
        return cls.from_sections(PRESETS[name])

    def validate(self):
        if self.phantom["kind"] not in PHANTOMS:
            raise ConfigError(f"unknown phantom kind {self.phantom['kind']!r}")
        if self.method["name"] not in METHODS:
            raise ConfigError(f"unknown method {self.method['name']!r}")
        if self.noise["level"] < 0:
            raise ConfigError("noise level must be >= 0")
        if not self.schedule["angles_per_step"]:
            raise ConfigError("angles_per_step must not be empty")
        if any(c < 1 for c in self.schedule["angles_per_step"]):
            raise ConfigError("angles_per_step entries must be >= 1")
        if self.method["name"] == "sbc" and not self.schedule["stationary"]:
            raise ConfigError("method sbc needs a stationary schedule")
        try:
            if self.method["name"] in ("bcx", "bc", "sbc"):
                self.joint_config()
            if self.method["name"].startswith("gradtv"):
                self.gradtv_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def joint_config(self):
        m = self.method
        return JointConfig(
            K=m["K"], alpha=m["alpha"], lambda_B=m["lambda_B"],
            mu_B=m["mu_B"], lambda_C=m["lambda_C"], mu_C=m["mu_C"],
            lambda_X=m["lambda_X"], mu_X=m["mu_X"], tau=m["tau"],
            eps_tv=m["eps_tv"], max_iter=m["max_iter"],
            rel_tol=m["rel_tol"], cost_every=m["cost_every"])

    def gradtv_config(self):
        m = self.method
        return GradTvConfig(
            rho_grad=m["rho_grad"], rho_thr=m["rho_thr"], rho_tv=m["rho_tv"],
            mu_c_tilde=m["mu_c_tilde"], max_iter=m["max_iter"],
            rel_tol=m["rel_tol"])

    def to_text(self):
        lines = []
        data = {"phantom": self.phantom, "noise": self.noise,
                "schedule": self.schedule, "method": self.method,
                "output": self.output}
        for section, values in data.items():
            lines.append(f"[{section}]")
            for key, value in values.items():
                if isinstance(value, list):
                    value = ",".join(str(v) for v in value)
                elif isinstance(value, bool):
                    value = "true" if value else "false"
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


def _preset(phantom, side, steps, noise, c, method, stationary=False,
            **method_keys):
    return {
        "phantom": {"kind": phantom, "side": side, "steps": steps},
        "noise": {"level": noise},
        "schedule": {"angles_per_step": [c], "stationary": stationary},
        "method": {"name": method, **method_keys},
    }


# Full-scale presets are long-running (minutes); the desk-* presets are
# sized for quick local runs.
PRESETS = {
    "shepp-1pct-bcx": _preset("shepp", 128, 100, 0.01, 6, "bcx", K=5,
                              alpha=70.0, mu_C=0.1, tau=6.0),
    "shepp-3pct-bcx": _preset("shepp", 128, 100, 0.03, 6, "bcx", K=5,
                              alpha=70.0, mu_C=0.1, tau=20.0),
    "shepp-1pct-bc": _preset("shepp", 128, 100, 0.01, 6, "bc", K=5,
                             mu_C=0.1, tau=10.0),
    "shepp-3pct-bc": _preset("shepp", 128, 100, 0.03, 6, "bc", K=5,
                             mu_C=0.1, tau=50.0),
    "shepp-1pct-sbc": _preset("shepp", 128, 100, 0.01, 6, "sbc", K=5,
                              mu_C=0.1, tau=10.0, stationary=True),
    "shepp-1pct-gradtv": _preset("shepp", 128, 100, 0.01, 6, "gradtv",
                                 K=5, rho_grad=1e-3, rho_thr=7e-4,
                                 rho_tv=1e-2, mu_c_tilde=0.1),
    "shepp-3pct-gradtv": _preset("shepp", 128, 100, 0.03, 6, "gradtv",
                                 K=5, rho_grad=8e-4, rho_thr=1e-3,
                                 rho_tv=2.5e-2, mu_c_tilde=0.1),
    "vessel-1pct-bcx": _preset("vessel", 264, 100, 0.01, 12, "bcx", K=4,
                               alpha=3e2, mu_C=1.0, tau=90.0, max_iter=1400),
    "vessel-3pct-bcx": _preset("vessel", 264, 100, 0.03, 12, "bcx", K=4,
                               alpha=3e2, mu_C=1.0, tau=3e2, max_iter=1400),
    "vessel-1pct-bc": _preset("vessel", 264, 100, 0.01, 12, "bc", K=4,
                              mu_C=1.0, tau=1.3e2, max_iter=1400),
    "vessel-3pct-bc": _preset("vessel", 264, 100, 0.03, 12, "bc", K=4,
                              mu_C=1.0, tau=4.3e2, max_iter=1400),
    "vessel-1pct-gradtv": _preset("vessel", 264, 100, 0.01, 12, "gradtv",
                                  K=4, rho_grad=2e-4, rho_thr=2e-4,
                                  rho_tv=2e-2, mu_c_tilde=0.1,
                                  max_iter=1400),
    "vessel-3pct-gradtv": _preset("vessel", 264, 100, 0.03, 12, "gradtv",
                                  K=4, rho_grad=8e-5, rho_thr=2.5e-4,
                                  rho_tv=4e-2, mu_c_tilde=0.1,
                                  max_iter=1400),
    # desk scale: n=64, T=50 analogs (K=5 leaves slack for noise features)
    "desk-shepp-bcx": _preset("shepp", 64, 50, 0.01, 6, "bcx", K=5,
                              alpha=70.0, mu_C=0.1, tau=6.0, max_iter=600),
    "desk-shepp-bc": _preset("shepp", 64, 50, 0.01, 6, "bc", K=3,
                             mu_C=0.1, tau=10.0, max_iter=600),
    "desk-shepp-sbc": _preset("shepp", 64, 50, 0.01, 6, "sbc", K=3,
                              mu_C=0.1, tau=10.0, max_iter=600,
                              stationary=True),
    "desk-shepp-gradtv": _preset("shepp", 64, 50, 0.01, 6, "gradtv", K=3,
                                 rho_grad=2e-3, rho_thr=7e-4, rho_tv=1e-2,
                                 mu_c_tilde=0.1, max_iter=600),
    "desk-vessel-bcx": _preset("vessel", 64, 50, 0.01, 12, "bcx", K=2,
                               alpha=3e2, mu_C=1.0, tau=30.0, max_iter=600),
}
