"""Command-line front end.

Subcommands:

* ``verify``    run the built-in self-check battery (identities, exactness,
                reproducibility); one line per check.
* ``simulate``  integrate a configured run, write diagnostics CSV and an
                optional checkpoint.
* ``pullback``  release a cloud of states ever deeper in the past and report
                the contraction of its image at time 0.
* ``measure``   sample observables along one trajectory and across an
                ensemble; write the comparison report as JSON.
* ``spectrum``  convert a stored spectrum between the binary and JSON formats
                and print its norms.

Exit codes: 0 success, 1 failed verification/experiment, 2 configuration or
usage error, 3 runaway solution (blowup guard).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import config as config_mod
from .attractor import (
    measure_ensemble,
    measure_report,
    measure_time_average,
    pullback_experiment,
)
from .config import ConfigError, RunConfig
from .noise import NoiseSpec, mode_rates, ou_init_from_path, ou_step, radonifying_report
from .operators import (
    OperatorVariant,
    apply_C_spectral,
    nonlinear_tendency,
    trilinear_b,
)
from .serialize import (
    spectrum_from_bytes,
    spectrum_from_json,
    spectrum_to_bytes,
    spectrum_to_json,
    write_checkpoint,
    write_diagnostics_csv,
)
from .solver import BlowupError, IntegratorConfig, ModelConfig, Simulator
from .spectral import (
    ScalarSpectrum,
    curl_of_scalar,
    curln,
    default_basis,
    divergence,
    enstrophy,
    grad,
    hodge_project,
    laplacian,
    random_stream,
    scalar_l2,
    velocity_inner,
    velocity_l2,
)

__all__ = ["main"]


def _build_sim(cfg: RunConfig) -> Simulator:
    return Simulator(cfg.model, cfg.integrator, cfg.noise)


def _initial_condition(cfg: RunConfig) -> ScalarSpectrum:
    if cfg.simulate.initial == "zero":
        return ScalarSpectrum.zeros(cfg.model.L)
    rng = np.random.default_rng(cfg.simulate.ic_seed)
    x = random_stream(cfg.model.L, rng)
    return x.scaled(cfg.simulate.ic_radius / velocity_l2(x))


# -- verify ------------------------------------------------------------------


def _verify_battery(L: int) -> list[tuple[str, float, float]]:
    """Each entry: (name, defect, tolerance); pass when defect <= tolerance."""
    checks: list[tuple[str, float, float]] = []
    basis = default_basis(L)
    rng = np.random.default_rng(2024)
    f = random_stream(L, rng)
    g = random_stream(L, rng)
    h = random_stream(L, rng)

    spec_rt = basis.analyze_scalar(basis.synth_scalar(f))
    checks.append(("scalar round trip", float(np.max(np.abs(spec_rt.coeffs - f.coeffs))), 1e-11))

    checks.append(
        ("div of rotational field", float(np.max(np.abs(divergence(u_of(f, basis), basis)))), 1e-10)
    )
    checks.append(
        ("normal curl of gradient", scalar_l2(curln(grad(f, basis), basis)), 1e-10)
    )
    checks.append(
        ("normal curl of rotational vs laplacian", _defect_curln_curl(f, basis), 1e-9)
    )
    u = basis.synth_velocity(stream=f)
    stream_rec, report = hodge_project(u, basis)
    checks.append(("rotational recovery", float(np.max(np.abs(stream_rec.coeffs - f.coeffs))), 1e-10))
    checks.append(("divergence-free residual", float(report["residual_l2"]), 1e-10))

    uf = basis.synth_velocity(stream=f)
    vf = basis.synth_velocity(stream=g)
    wf = basis.synth_velocity(stream=h)
    scale = velocity_l2(f) * velocity_l2(g) * velocity_l2(h)
    checks.append(("advection skew symmetry", abs(trilinear_b(uf, wf, wf, basis)) / scale, 1e-11))
    checks.append(
        (
            "advection antisymmetry",
            abs(trilinear_b(uf, vf, wf, basis) + trilinear_b(uf, wf, vf, basis)) / scale,
            1e-11,
        )
    )
    checks.append(
        (
            "energy-neutral advection",
            abs(velocity_inner(nonlinear_tendency(f, basis), f)) / velocity_l2(f) ** 2,
            1e-11,
        )
    )
    checks.append(
        (
            "energy-neutral rotation",
            abs(velocity_inner(apply_C_spectral(f, 1.3), f)) / velocity_l2(f) ** 2,
            1e-12,
        )
    )

    noise = NoiseSpec(L=min(L, 4), sigma=0.5, s=1.0, seed=7, dt_noise=0.05)
    mu = mode_rates(noise.L, 1.0, OperatorVariant.DELTA_ONLY)
    path = noise.path()
    s0 = ou_init_from_path(noise, mu, path, at_step=120)
    s1 = ou_step(ou_init_from_path(noise, mu, path, at_step=0), path, 120)
    checks.append(
        ("stationary regeneration", float(np.max(np.abs(s0.z_pack - s1.z_pack))), 1e-12)
    )
    shifted = ou_init_from_path(noise, mu, path.shifted(120), at_step=0)
    checks.append(
        ("shifted path identification", float(np.max(np.abs(s0.z_pack - shifted.z_pack))), 0.0)
    )

    conv = radonifying_report(0.75)["converged"] and radonifying_report(1.0)["converged"]
    rough = not radonifying_report(0.5)["converged"]
    checks.append(("covariance tail dichotomy", 0.0 if (conv and rough) else 1.0, 0.0))

    model = ModelConfig(L=L, nu=0.5, Omega=0.9)
    sim = Simulator(model, IntegratorConfig(dt=0.05, nonlinearity=False))
    fin, _ = sim.run(sim.initial_state(f), 20)
    exact = f.coeffs * np.exp(-sim.rates)
    checks.append(("exact linear propagator", float(np.max(np.abs(fin.v.coeffs - exact))), 1e-12))
    return checks


def u_of(f: ScalarSpectrum, basis):
    return basis.synth_velocity(stream=f)


def _defect_curln_curl(f: ScalarSpectrum, basis) -> float:
    zeta = curln(curl_of_scalar(f, basis), basis)
    return float(np.max(np.abs(zeta.coeffs + laplacian(f).coeffs)))


def _cmd_verify(args) -> int:
    L = 8
    if args.config:
        L = config_mod.load(args.config).model.L
    failures = 0
    for name, defect, tol in _verify_battery(L):
        ok = defect <= tol
        failures += not ok
        line = "ok  " if ok else "FAIL"
        print(f"{line}  {name:40s} defect {defect:.3e} (tol {tol:.1e})")
    print(f"{'all checks passed' if not failures else f'{failures} check(s) failed'}")
    return 0 if failures == 0 else 1


# -- simulate ----------------------------------------------------------------


def _cmd_simulate(args) -> int:
    cfg = config_mod.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    sim = _build_sim(cfg)
    path = cfg.noise.path() if cfg.noise is not None else None
    state = sim.initial_state(_initial_condition(cfg), path)
    n_steps = int(round(cfg.simulate.t_end / cfg.integrator.dt))
    state, record = sim.run(
        state, n_steps, path, record=cfg.simulate.record,
        record_every=cfg.simulate.record_every,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_diagnostics_csv(fh, record)
    if args.checkpoint:
        with open(args.checkpoint, "w", encoding="utf-8") as fh:
            write_checkpoint(fh, cfg.model, cfg.integrator, state, cfg.noise, path)
    u = state.u
    print(
        f"t = {state.t:.6g}  steps = {state.step}  "
        f"energy = {0.5 * velocity_l2(u) ** 2:.6e}  enstrophy = {enstrophy(u):.6e}"
    )
    return 0


# -- pullback ----------------------------------------------------------------


def _cmd_pullback(args) -> int:
    cfg = config_mod.load(args.config)
    if cfg.noise is None:
        raise ConfigError("pullback needs a [noise] section")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    sim = _build_sim(cfg)
    out = pullback_experiment(
        sim,
        cfg.noise.path(),
        release_steps=cfg.pullback.releases,
        radius=cfg.pullback.radius,
        n_members=cfg.pullback.members,
        ic_seed=cfg.pullback.ic_seed,
        threads=args.threads,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("release_steps,time,diameter,center\n")
            for n, t, d, c in zip(
                out["release_steps"], out["times"], out["diameters"], out["centers"]
            ):
                fh.write(f"{n},{repr(float(t))},{repr(float(d))},{repr(float(c))}\n")
    for t, d in zip(out["times"], out["diameters"]):
        print(f"release t = -{t:<8g} diameter at 0 = {d:.6e}")
    print(f"monotone contraction: {out['monotone']}")
    return 0 if out["monotone"] else 1


# -- measure -----------------------------------------------------------------


def _cmd_measure(args) -> int:
    cfg = config_mod.load(args.config)
    if cfg.noise is None:
        raise ConfigError("measure needs a [noise] section")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    sim = _build_sim(cfg)
    x0 = _initial_condition(cfg)
    opts = cfg.measure
    doc: dict = {"mode": opts.mode}
    along = across = None
    if opts.mode in ("time", "both"):
        along = measure_time_average(
            sim, cfg.noise.path(), x0, opts.burn, opts.samples, opts.sample_every
        )
        doc["along"] = {
            k: {"mean": float(v.mean()), "std": float(v.std())} for k, v in along.items()
        }
    if opts.mode in ("ensemble", "both"):
        across = measure_ensemble(
            sim, x0, opts.spinup, opts.members, threads=args.threads
        )
        doc["across"] = {
            k: {"mean": float(v.mean()), "std": float(v.std())} for k, v in across.items()
        }
    if along is not None and across is not None:
        doc["report"] = measure_report(along, across)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
    for side in ("along", "across"):
        if side in doc:
            for k, v in doc[side].items():
                print(f"{side:6s} {k:12s} mean {v['mean']:.6e}  std {v['std']:.6e}")
    if "report" in doc:
        for k, v in doc["report"].items():
            print(
                f"compare {k:12s} mean_rel_diff {v['mean_rel_diff']:.4f}  "
                f"hist_l1 {v['hist_l1']:.4f}"
            )
    return 0


# -- spectrum ----------------------------------------------------------------


def _cmd_spectrum(args) -> int:
    name = args.input
    if name.endswith(".json"):
        with open(name, "r", encoding="utf-8") as fh:
            spec = spectrum_from_json(fh.read())
    else:
        with open(name, "rb") as fh:
            spec = spectrum_from_bytes(fh.read())
    if args.out:
        if args.out.endswith(".json"):
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(spectrum_to_json(spec))
        else:
            with open(args.out, "wb") as fh:
                fh.write(spectrum_to_bytes(spec))
    print(
        f"L = {spec.L}  |u| = {velocity_l2(spec):.6e}  "
        f"enstrophy = {enstrophy(spec):.6e}  "
        f"symmetry defect = {spec.conjugate_symmetry_defect():.3e}"
    )
    return 0


# -- main --------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sphereflow",
        description="Stochastic rotating incompressible flow on the sphere.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument(
            "--config",
            required=config_required,
            help="TOML run configuration",
        )
        sp.add_argument("--seed", type=int, default=None, help="override the noise seed")
        sp.add_argument("--out", default=None, help="output file")
        sp.add_argument(
            "--threads", type=int, default=1, help="worker threads for ensembles"
        )
        sp.add_argument(
            "--strict", action="store_true", help="treat warnings as errors"
        )

    sp = sub.add_parser("verify", help="run the self-check battery")
    common(sp, config_required=False)
    sp.set_defaults(fn=_cmd_verify)

    sp = sub.add_parser("simulate", help="integrate one configured run")
    common(sp)
    sp.add_argument("--checkpoint", default=None, help="write final state here")
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("pullback", help="pullback contraction experiment")
    common(sp)
    sp.set_defaults(fn=_cmd_pullback)

    sp = sub.add_parser("measure", help="invariant measure probes")
    common(sp)
    sp.set_defaults(fn=_cmd_measure)

    sp = sub.add_parser("spectrum", help="inspect/convert a stored spectrum")
    sp.add_argument("input", help="spectrum file (.bin or .json)")
    sp.add_argument("--out", default=None, help="converted output file")
    sp.add_argument("--strict", action="store_true", help="treat warnings as errors")
    sp.set_defaults(fn=_cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.strict:
        warnings.simplefilter("error")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2
    except BlowupError as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return 3
    except Warning as exc:
        print(f"strict mode: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
