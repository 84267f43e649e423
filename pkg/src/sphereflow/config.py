"""TOML run configuration: parsing, validation, and a deterministic writer.

A run file holds up to six sections.  [model], [noise], [integrator] map onto
the library config objects; [simulate], [pullback], [measure] parameterize the
corresponding commands.  Only [model] and [integrator] are required.  The
deterministic forcing is a list of inline tables, one per (l, m >= 0) mode:

    [model]
    L = 6
    nu = 1.0
    forcing = [{l = 2, m = 0, re = 0.4, im = 0.0}]

Negative orders are implied by the real-field symmetry and rejected if given.
``dumps`` writes sections and keys in a fixed order with repr-formatted
floats, so load(dumps(cfg)) reproduces the config exactly.
"""

from __future__ import annotations

import dataclasses

import tomli

from .noise import NoiseSpec
from .operators import OperatorVariant
from .solver import IntegratorConfig, ModelConfig
from .spectral import ScalarSpectrum

__all__ = [
    "ConfigError",
    "SimulateOptions",
    "PullbackOptions",
    "MeasureOptions",
    "RunConfig",
    "loads",
    "load",
    "dumps",
    "dump",
]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclasses.dataclass(frozen=True)
class SimulateOptions:
    t_end: float = 10.0
    record: str = "basic"
    record_every: int = 1
    initial: str = "zero"
    ic_seed: int = 0
    ic_radius: float = 1.0

    def __post_init__(self):
        if self.t_end <= 0:
            raise ConfigError("simulate.t_end must be positive")
        if self.record not in ("basic", "certificate"):
            raise ConfigError(f"unknown record level {self.record!r}")
        if self.record_every < 1:
            raise ConfigError("simulate.record_every must be >= 1")
        if self.initial not in ("zero", "random"):
            raise ConfigError(f"unknown initial condition {self.initial!r}")
        if self.ic_radius <= 0:
            raise ConfigError("simulate.ic_radius must be positive")


@dataclasses.dataclass(frozen=True)
class PullbackOptions:
    releases: tuple = (25, 100, 400)
    radius: float = 1.0
    members: int = 8
    ic_seed: int = 0

    def __post_init__(self):
        if not self.releases or any(int(n) < 1 for n in self.releases):
            raise ConfigError("pullback.releases must be positive step counts")
        if self.radius <= 0:
            raise ConfigError("pullback.radius must be positive")
        if self.members < 2:
            raise ConfigError("pullback.members must be >= 2")


@dataclasses.dataclass(frozen=True)
class MeasureOptions:
    burn: int = 300
    samples: int = 200
    sample_every: int = 20
    members: int = 40
    spinup: int = 350
    mode: str = "both"

    def __post_init__(self):
        if min(self.burn, self.spinup) < 0 or min(self.samples, self.members) < 1:
            raise ConfigError("measure counts must be non-negative/positive")
        if self.sample_every < 1:
            raise ConfigError("measure.sample_every must be >= 1")
        if self.mode not in ("time", "ensemble", "both"):
            raise ConfigError(f"unknown measure.mode {self.mode!r}")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    integrator: IntegratorConfig
    noise: NoiseSpec | None = None
    simulate: SimulateOptions = SimulateOptions()
    pullback: PullbackOptions = PullbackOptions()
    measure: MeasureOptions = MeasureOptions()

    def with_seed(self, seed: int) -> "RunConfig":
        if self.noise is None:
            raise ConfigError("cannot override the seed of a deterministic run")
        return dataclasses.replace(
            self, noise=dataclasses.replace(self.noise, seed=seed)
        )


def _take(table: dict, section: str, keys: dict) -> dict:
    unknown = set(table) - set(keys)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    out = {}
    for name, (required, convert) in keys.items():
        if name in table:
            try:
                out[name] = convert(table[name])
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {section}.{name}: {exc}") from exc
        elif required:
            raise ConfigError(f"missing required key {section}.{name}")
    return out


def _parse_forcing(entries, L: int) -> ScalarSpectrum | None:
    if not entries:
        return None
    f = ScalarSpectrum.zeros(L)
    for row in entries:
        if not isinstance(row, dict) or set(row) - {"l", "m", "re", "im"}:
            raise ConfigError(f"forcing entries need keys l, m, re, im: {row!r}")
        l, m = int(row["l"]), int(row["m"])
        if m < 0:
            raise ConfigError("forcing entries use m >= 0 (conjugates are implied)")
        try:
            f.set_mode(l, m, complex(float(row.get("re", 0.0)), float(row.get("im", 0.0))))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return f


def _variant(name: str) -> OperatorVariant:
    try:
        return OperatorVariant(name)
    except ValueError as exc:
        valid = [v.value for v in OperatorVariant]
        raise ConfigError(f"unknown variant {name!r}; choose from {valid}") from exc


def loads(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from exc
    unknown = set(doc) - {"model", "noise", "integrator", "simulate", "pullback", "measure"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    if "model" not in doc or "integrator" not in doc:
        raise ConfigError("config needs [model] and [integrator] sections")

    m = _take(
        doc["model"],
        "model",
        {
            "L": (True, int),
            "nu": (True, float),
            "variant": (False, _variant),
            "Omega": (False, float),
            "alpha": (False, float),
            "forcing": (False, list),
        },
    )
    forcing = _parse_forcing(m.pop("forcing", None), m["L"])
    try:
        model = ModelConfig(forcing=forcing, **m)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    i = _take(
        doc["integrator"],
        "integrator",
        {
            "dt": (True, float),
            "scheme": (False, str),
            "nonlinearity": (False, bool),
            "blowup_factor": (False, float),
        },
    )
    try:
        integrator = IntegratorConfig(**i)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    noise = None
    if "noise" in doc:
        n = _take(
            doc["noise"],
            "noise",
            {
                "sigma": (True, float),
                "s": (True, float),
                "seed": (True, int),
                "dt_noise": (True, float),
            },
        )
        try:
            noise = NoiseSpec(L=model.L, **n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    sim_opts = _take(
        doc.get("simulate", {}),
        "simulate",
        {
            "t_end": (False, float),
            "record": (False, str),
            "record_every": (False, int),
            "initial": (False, str),
            "ic_seed": (False, int),
            "ic_radius": (False, float),
        },
    )
    pb_opts = _take(
        doc.get("pullback", {}),
        "pullback",
        {
            "releases": (False, lambda v: tuple(int(x) for x in v)),
            "radius": (False, float),
            "members": (False, int),
            "ic_seed": (False, int),
        },
    )
    ms_opts = _take(
        doc.get("measure", {}),
        "measure",
        {
            "burn": (False, int),
            "samples": (False, int),
            "sample_every": (False, int),
            "members": (False, int),
            "spinup": (False, int),
            "mode": (False, str),
        },
    )
    cfg = RunConfig(
        model=model,
        integrator=integrator,
        noise=noise,
        simulate=SimulateOptions(**sim_opts),
        pullback=PullbackOptions(**pb_opts),
        measure=MeasureOptions(**ms_opts),
    )
    if noise is not None:
        ratio = integrator.dt / noise.dt_noise
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(
                "integrator.dt must be a whole number of noise substeps "
                f"(dt / dt_noise = {ratio})"
            )
    return cfg


def load(path) -> RunConfig:
    with open(path, "rb") as fh:
        return loads(fh.read().decode("utf-8"))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot format {value!r}")


def dumps(cfg: RunConfig) -> str:
    """Write the config back as TOML, deterministically."""
    lines: list[str] = []

    def section(name: str, pairs):
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        for key, value in pairs:
            lines.append(f"{key} = {value}")

    model = cfg.model
    pairs = [
        ("L", _fmt(model.L)),
        ("nu", _fmt(model.nu)),
        ("variant", _fmt(model.variant.value)),
        ("Omega", _fmt(model.Omega)),
        ("alpha", _fmt(model.alpha)),
    ]
    if model.forcing is not None:
        rows = []
        for l in range(model.L + 1):
            for m in range(0, l + 1):
                c = model.forcing.coeffs[l, m + model.L]
                if c != 0:
                    rows.append(
                        "{l = %d, m = %d, re = %s, im = %s}"
                        % (l, m, repr(float(c.real)), repr(float(c.imag)))
                    )
        pairs.append(("forcing", "[" + ", ".join(rows) + "]"))
    section("model", pairs)

    if cfg.noise is not None:
        section(
            "noise",
            [
                ("sigma", _fmt(cfg.noise.sigma)),
                ("s", _fmt(cfg.noise.s)),
                ("seed", _fmt(cfg.noise.seed)),
                ("dt_noise", _fmt(cfg.noise.dt_noise)),
            ],
        )

    integ = cfg.integrator
    section(
        "integrator",
        [
            ("dt", _fmt(integ.dt)),
            ("scheme", _fmt(integ.scheme)),
            ("nonlinearity", _fmt(integ.nonlinearity)),
            ("blowup_factor", _fmt(integ.blowup_factor)),
        ],
    )
    section(
        "simulate",
        [
            ("t_end", _fmt(cfg.simulate.t_end)),
            ("record", _fmt(cfg.simulate.record)),
            ("record_every", _fmt(cfg.simulate.record_every)),
            ("initial", _fmt(cfg.simulate.initial)),
            ("ic_seed", _fmt(cfg.simulate.ic_seed)),
            ("ic_radius", _fmt(cfg.simulate.ic_radius)),
        ],
    )
    section(
        "pullback",
        [
            ("releases", "[" + ", ".join(str(n) for n in cfg.pullback.releases) + "]"),
            ("radius", _fmt(cfg.pullback.radius)),
            ("members", _fmt(cfg.pullback.members)),
            ("ic_seed", _fmt(cfg.pullback.ic_seed)),
        ],
    )
    section(
        "measure",
        [
            ("burn", _fmt(cfg.measure.burn)),
            ("samples", _fmt(cfg.measure.samples)),
            ("sample_every", _fmt(cfg.measure.sample_every)),
            ("members", _fmt(cfg.measure.members)),
            ("spinup", _fmt(cfg.measure.spinup)),
            ("mode", _fmt(cfg.measure.mode)),
        ],
    )
    return "\n".join(lines) + "\n"


def dump(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cfg))
