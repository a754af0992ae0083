"""Experiment configuration and its flat ``dotted.key = value`` file format.

One setting per line, ``#`` starts a comment, blank lines are ignored::

    benchmark = ackley_ns
    algorithms = infgp_ts, gp_ei
    budget = 100
    gibbs.B = 500

Unset keys take the defaults listed in :data:`FIELDS`; the literal ``none``
clears optional numeric settings.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .acquisition import ALGORITHMS, CANDIDATE_SCHEMES, AcquisitionConfig, OptimizerConfig
from .benchmarks import BENCHMARK_NAMES, HT_SCALE, HT_SHAPE, NS_ALPHA, NS_NOISE_FRACTION, Objective, make_objective
from .errors import ConfigError, InfGPError
from .infgp import PHI_MODES, GibbsConfig, PriorSpec

OUTPUT_ENV = "INFGP_BO_OUTPUT"


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(conv):
    def parse(text: str):
        return None if text.lower() == "none" else conv(text)

    return parse


def _names(text: str) -> tuple[str, ...]:
    out = tuple(part.strip() for part in text.split(",") if part.strip())
    if not out:
        raise ValueError("expected at least one name")
    return out


@dataclass(frozen=True)
class FieldSpec:
    key: str
    kind: str
    default: object
    help: str

    @property
    def parse(self):
        return PARSERS[self.kind]


PARSERS = {
    "str": str,
    "int": int,
    "float": float,
    "bool": _bool,
    "int|none": _optional(int),
    "float|none": _optional(float),
    "names": _names,
}

FIELDS: tuple[FieldSpec, ...] = (
    FieldSpec("benchmark", "str", "ackley_ns", f"objective name: {', '.join(BENCHMARK_NAMES)}"),
    FieldSpec("dim", "int", 2, "input dimension d"),
    FieldSpec("algorithms", "names", ("infgp_ts",), f"comma-separated subset of {', '.join(ALGORITHMS)}"),
    FieldSpec("budget", "int", 100, "optimizer iterations N after the initial design"),
    FieldSpec("replications", "int", 10, "independent seeded replications R"),
    FieldSpec("seed", "int", 0, "root seed; replication r uses streams forked from (seed, r, ...)"),
    FieldSpec("output_dir", "str", "results", f"output directory (overridden by ${OUTPUT_ENV})"),
    FieldSpec("workers", "int|none", None, "parallel replication workers; none = logical cores"),
    FieldSpec("record_time", "bool", False, "write measured wall_ms to trace CSVs (breaks byte-identical reruns)"),
    FieldSpec("n_init", "int|none", None, "initial uniform design size; none = max(3, 2d)"),
    FieldSpec("weights_every", "int", 10, "surface-weight checkpoint interval k (infgp_ts only)"),
    FieldSpec("acquisition.C1", "float", 1.0, "exploration scale C1 in [0, 1]"),
    FieldSpec("acquisition.lambda1", "float", 0.5, "exploration decay exponent in (0, 1)"),
    FieldSpec("acquisition.num_candidates", "int|none", None, "candidates per iteration; none = 256 d"),
    FieldSpec("acquisition.candidate_scheme", "str", "latin_hypercube", " or ".join(CANDIDATE_SCHEMES)),
    FieldSpec("gibbs.B", "int", 500, "Gibbs sweeps per optimizer iteration"),
    FieldSpec("gibbs.L", "int|none", None, "fixed truncation level; none = growth rule"),
    FieldSpec("gibbs.L_max", "int", 16, "cap on the truncation level"),
    FieldSpec("gibbs.kappa", "float|none", None, "truncation growth offset; none = current nu"),
    FieldSpec("gibbs.warm_start", "bool", True, "start each fit from the previous iteration's state"),
    FieldSpec("gibbs.phi_mode", "str", "isotropic_grid", " or ".join(PHI_MODES)),
    FieldSpec("gibbs.mle_steps", "int", 100, "gradient steps per sweep in anisotropic_mle mode"),
    FieldSpec("gibbs.mle_step_size", "float", 1e-2, "initial step size in anisotropic_mle mode"),
    FieldSpec("gibbs.collapsed_moves", "int", 3, "Metropolis rounds per sweep with surfaces integrated out (0 disables)"),
    FieldSpec("prior.a_tau", "float", 2.0, "noise-variance inverse-gamma shape"),
    FieldSpec("prior.b_tau", "float", 1.0, "noise-variance inverse-gamma scale (standardized units)"),
    FieldSpec("prior.a_sigma", "float", 2.0, "surface-variance inverse-gamma shape"),
    FieldSpec("prior.b_sigma", "float", 1.0, "surface-variance inverse-gamma scale (standardized units)"),
    FieldSpec("prior.a_nu", "float", 1.0, "concentration gamma shape"),
    FieldSpec("prior.b_nu", "float", 1.0, "concentration gamma rate"),
    FieldSpec("prior.b_phi", "float|none", None, "upper bound of phi; none = 3 / (0.01 * box diameter)"),
    FieldSpec("prior.phi_grid_size", "int", 30, "number of log-spaced phi grid points"),
    FieldSpec("prior.phi_grid_ratio", "float", 1e-3, "smallest grid point as a fraction of b_phi"),
    FieldSpec("baseline.iters", "int", 500, "Metropolis steps per baseline GP fit"),
    FieldSpec("baseline.burn_in", "int", 250, "discarded Metropolis steps"),
    FieldSpec("baseline.step", "float", 0.15, "random-walk scale on log hyperparameters"),
    FieldSpec("objective.alpha", "float", NS_ALPHA, "non-stationary modulation strength (_ns variants)"),
    FieldSpec("objective.weibull_shape", "float", HT_SHAPE, "heavy-tail noise shape (_ht variants)"),
    FieldSpec("objective.weibull_scale", "float", HT_SCALE, "heavy-tail noise scale (_ht variants)"),
    FieldSpec("objective.ns_noise_fraction", "float", NS_NOISE_FRACTION, "gaussian noise sd as a fraction of the value range"),
)
FIELD_INDEX = {f.key: f for f in FIELDS}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment; build with :func:`from_mapping`."""

    values: dict = field(default_factory=lambda: {f.key: f.default for f in FIELDS})

    def __getitem__(self, key):
        return self.values[key]

    @property
    def algorithms(self) -> tuple[str, ...]:
        return tuple(self.values["algorithms"])

    @property
    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.values["output_dir"])

    def objective(self) -> Objective:
        v = self.values
        return make_objective(
            v["benchmark"],
            v["dim"],
            alpha=v["objective.alpha"],
            weibull_shape=v["objective.weibull_shape"],
            weibull_scale=v["objective.weibull_scale"],
            ns_noise_fraction=v["objective.ns_noise_fraction"],
        )

    def _section(self, prefix: str) -> dict:
        return {k[len(prefix) :]: v for k, v in self.values.items() if k.startswith(prefix)}

    def acquisition_config(self) -> AcquisitionConfig:
        return AcquisitionConfig(**self._section("acquisition."))

    def gibbs_config(self) -> GibbsConfig:
        return GibbsConfig(**self._section("gibbs."))

    def prior_overrides(self) -> dict:
        """Prior settings that differ from the defaults (``b_phi`` is derived from the box unless set)."""
        return {k: v for k, v in self._section("prior.").items() if v is not None and v != FIELD_INDEX["prior." + k].default}

    def optimizer_config(self) -> OptimizerConfig:
        v = self.values
        return OptimizerConfig(
            acquisition=self.acquisition_config(),
            gibbs=self.gibbs_config(),
            prior_overrides=self.prior_overrides(),
            n_init=v["n_init"],
            baseline_iters=v["baseline.iters"],
            baseline_burn_in=v["baseline.burn_in"],
            baseline_step=v["baseline.step"],
            weights_every=v["weights_every"],
        )

    def with_values(self, **updates) -> "ExperimentConfig":
        """Copy with dotted keys given as ``gibbs__B=...`` or plain keys."""
        return from_mapping({**self.values, **{k.replace("__", "."): v for k, v in updates.items()}}, parsed=True)

    def to_text(self) -> str:
        lines = []
        for f in FIELDS:
            val = self.values[f.key]
            if isinstance(val, tuple):
                text = ", ".join(val)
            elif val is None:
                text = "none"
            elif isinstance(val, bool):
                text = str(val).lower()
            else:
                text = str(val)
            lines.append(f"{f.key} = {text}")
        return "\n".join(lines) + "\n"


def _validate(values: dict) -> None:
    """Semantic checks, each reported against the responsible key."""

    def need(cond, key, msg):
        if not cond:
            raise ConfigError(msg, key)

    need(values["benchmark"] in BENCHMARK_NAMES, "benchmark", f"unknown benchmark {values['benchmark']!r}")
    need(values["dim"] >= 1, "dim", "must be at least 1")
    for alg in values["algorithms"]:
        need(alg in ALGORITHMS, "algorithms", f"unknown algorithm {alg!r}")
    need(len(set(values["algorithms"])) == len(values["algorithms"]), "algorithms", "duplicate algorithm")
    need(values["budget"] >= 1, "budget", "must be at least 1")
    need(values["replications"] >= 1, "replications", "must be at least 1")
    need(values["workers"] is None or values["workers"] >= 1, "workers", "must be at least 1")
    need(values["n_init"] is None or values["n_init"] >= 2, "n_init", "must be at least 2")
    need(values["weights_every"] >= 1, "weights_every", "must be at least 1")
    need(values["baseline.iters"] > values["baseline.burn_in"] >= 0, "baseline.burn_in", "need 0 <= burn_in < iters")
    need(values["baseline.step"] > 0, "baseline.step", "must be positive")
    need(values["prior.phi_grid_ratio"] > 0, "prior.phi_grid_ratio", "must be positive")

    # delegate range checks to the component constructors, mapping errors back to keys
    cfg = ExperimentConfig(values)
    for prefix, build in (
        ("objective.", cfg.objective),
        ("acquisition.", cfg.acquisition_config),
        ("gibbs.", cfg.gibbs_config),
        ("prior.", lambda: PriorSpec.default(cfg.objective().bounds, **cfg.prior_overrides())),
    ):
        try:
            build()
        except ConfigError:
            raise
        except (InfGPError, ValueError) as exc:
            key = _guess_key(prefix, str(exc))
            raise ConfigError(str(exc), key) from exc
    try:
        PriorSpec.default(cfg.objective().bounds, **cfg.optimizer_config().prior_overrides)
    except (InfGPError, ValueError) as exc:
        raise ConfigError(str(exc), _guess_key("prior.", str(exc))) from exc


def _guess_key(prefix: str, message: str) -> str:
    # component errors name the offending parameter first
    for f in FIELDS:
        if f.key.startswith(prefix) and message.startswith(f.key[len(prefix) :] + " "):
            return f.key
    return prefix.rstrip(".")


def from_mapping(raw: dict, parsed: bool = False) -> ExperimentConfig:
    """Build a validated config from ``{key: text}`` (or already-typed values with ``parsed``)."""
    values = {f.key: f.default for f in FIELDS}
    for key, val in raw.items():
        if key not in FIELD_INDEX:
            raise ConfigError("unknown setting", key)
        spec = FIELD_INDEX[key]
        if parsed and not isinstance(val, str):
            values[key] = tuple(val) if spec.kind == "names" else val
            continue
        try:
            values[key] = spec.parse(str(val).strip())
        except ValueError as exc:
            raise ConfigError(f"cannot parse {val!r} as {spec.kind}: {exc}", key) from exc
    _validate(values)
    return ExperimentConfig(values)


def parse_text(text: str) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'", body.split()[0])
        key, _, val = (part.strip() for part in body.partition("="))
        if not key:
            raise ConfigError(f"line {lineno}: missing key", "<empty>")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate setting", key)
        raw[key] = val
    return from_mapping(raw)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", str(path)) from exc
    return parse_text(text)


def fields_help() -> str:
    width = max(len(f.key) for f in FIELDS)
    rows = []
    for f in FIELDS:
        default = ", ".join(f.default) if isinstance(f.default, tuple) else f.default
        default = "none" if default is None else str(default).lower() if isinstance(default, bool) else default
        rows.append(f"  {f.key:<{width}}  {f.help} [default: {default}]")
    return "\n".join(rows)
