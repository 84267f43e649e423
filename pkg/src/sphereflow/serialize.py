"""Binary/JSON spectrum formats, checkpoints, and diagnostics CSV.

Spectrum binary layout (little endian): a uint32 degree L, then one
(float64 re, float64 im) pair per mode in (l, m) row-major order with
m = -l..l inside each degree, (L+1)^2 pairs in total.  The JSON form lists
the same modes as [l, m, re, im] rows.  Floats are written with ``repr``
everywhere text is produced, so text round-trips are bit exact and output
files are byte-identical across runs and thread counts.
"""

from __future__ import annotations

import base64
import csv
import json
import struct

import numpy as np

from .noise import NoisePath, NoiseSpec
from .operators import OperatorVariant
from .solver import IntegratorConfig, ModelConfig, RunRecord, SimState
from .spectral import ScalarSpectrum

__all__ = [
    "spectrum_to_bytes",
    "spectrum_from_bytes",
    "spectrum_to_json",
    "spectrum_from_json",
    "path_metadata",
    "write_checkpoint",
    "read_checkpoint",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
]

_MAGIC = "sphereflow-checkpoint-1"


def _mode_sequence(L: int):
    for l in range(L + 1):
        for m in range(-l, l + 1):
            yield l, m


def spectrum_to_bytes(spec: ScalarSpectrum) -> bytes:
    L = spec.L
    out = bytearray(struct.pack("<I", L))
    for l, m in _mode_sequence(L):
        c = spec.coeffs[l, m + L]
        out += struct.pack("<dd", c.real, c.imag)
    return bytes(out)


def spectrum_from_bytes(data: bytes) -> ScalarSpectrum:
    if len(data) < 4:
        raise ValueError("truncated spectrum: missing header")
    (L,) = struct.unpack_from("<I", data, 0)
    expected = 4 + 16 * (L + 1) ** 2
    if len(data) != expected:
        raise ValueError(
            f"spectrum for L={L} needs {expected} bytes, got {len(data)}"
        )
    spec = ScalarSpectrum.zeros(L)
    values = np.frombuffer(data, dtype="<f8", offset=4).reshape(-1, 2)
    for i, (l, m) in enumerate(_mode_sequence(L)):
        spec.coeffs[l, m + L] = complex(values[i, 0], values[i, 1])
    return spec


def spectrum_to_json(spec: ScalarSpectrum) -> str:
    modes = [
        [l, m, repr(float(spec.coeffs[l, m + spec.L].real)),
         repr(float(spec.coeffs[l, m + spec.L].imag))]
        for l, m in _mode_sequence(spec.L)
    ]
    return json.dumps({"L": spec.L, "modes": modes}, separators=(",", ":"))


def spectrum_from_json(text: str) -> ScalarSpectrum:
    doc = json.loads(text)
    spec = ScalarSpectrum.zeros(int(doc["L"]))
    for l, m, re, im in doc["modes"]:
        spec.coeffs[int(l), int(m) + spec.L] = complex(float(re), float(im))
    return spec


def path_metadata(noise: NoiseSpec, path: NoisePath) -> dict:
    """Everything needed to reconstruct the forcing realization."""
    return {
        "seed": path.seed,
        "dt_noise": path.dt_noise,
        "L": path.L,
        "shift_offset": path.shift_offset,
        "member": path.member,
        "sigma": noise.sigma,
        "s": noise.s,
    }


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def write_checkpoint(
    fp,
    model: ModelConfig,
    integrator: IntegratorConfig,
    state: SimState,
    noise: NoiseSpec | None = None,
    path: NoisePath | None = None,
) -> None:
    """Serialize a run snapshot as JSON (text file object)."""
    doc = {
        "format": _MAGIC,
        "model": {
            "L": model.L,
            "nu": model.nu,
            "variant": model.variant.value,
            "Omega": model.Omega,
            "alpha": model.alpha,
            "forcing": _b64(spectrum_to_bytes(model.forcing))
            if model.forcing is not None
            else None,
        },
        "integrator": {
            "dt": integrator.dt,
            "scheme": integrator.scheme,
            "nonlinearity": integrator.nonlinearity,
            "blowup_factor": integrator.blowup_factor,
        },
        "noise": path_metadata(noise, path) if noise is not None else None,
        "state": {
            "t": state.t,
            "step": state.step,
            "v": _b64(spectrum_to_bytes(state.v)),
            "z": _b64(spectrum_to_bytes(state.ou.spectrum))
            if state.ou is not None
            else None,
            "ou_step_index": state.ou.step_index if state.ou is not None else None,
        },
    }
    json.dump(doc, fp, indent=1, sort_keys=True)


def read_checkpoint(fp) -> dict:
    """Load a snapshot; reconstructs configs, path, and the v spectrum.

    Returns a dict with keys model, integrator, noise, path, t, step, v,
    z, ou_step_index (the OU state itself is re-derivable from the path).
    """
    doc = json.load(fp)
    if doc.get("format") != _MAGIC:
        raise ValueError("not a recognized checkpoint file")
    m = doc["model"]
    forcing = (
        spectrum_from_bytes(base64.b64decode(m["forcing"]))
        if m["forcing"] is not None
        else None
    )
    model = ModelConfig(
        L=int(m["L"]),
        nu=float(m["nu"]),
        variant=OperatorVariant(m["variant"]),
        Omega=float(m["Omega"]),
        alpha=float(m["alpha"]),
        forcing=forcing,
    )
    i = doc["integrator"]
    integrator = IntegratorConfig(
        dt=float(i["dt"]),
        scheme=i["scheme"],
        nonlinearity=bool(i["nonlinearity"]),
        blowup_factor=float(i["blowup_factor"]),
    )
    noise = None
    path = None
    if doc["noise"] is not None:
        n = doc["noise"]
        noise = NoiseSpec(
            L=int(n["L"]),
            sigma=float(n["sigma"]),
            s=float(n["s"]),
            seed=int(n["seed"]),
            dt_noise=float(n["dt_noise"]),
        )
        path = NoisePath(
            seed=int(n["seed"]),
            dt_noise=float(n["dt_noise"]),
            L=int(n["L"]),
            shift_offset=int(n["shift_offset"]),
            member=int(n["member"]),
        )
    st = doc["state"]
    return {
        "model": model,
        "integrator": integrator,
        "noise": noise,
        "path": path,
        "t": float(st["t"]),
        "step": int(st["step"]),
        "v": spectrum_from_bytes(base64.b64decode(st["v"])),
        "z": spectrum_from_bytes(base64.b64decode(st["z"]))
        if st["z"] is not None
        else None,
        "ou_step_index": st["ou_step_index"],
    }


def write_diagnostics_csv(fp, record: RunRecord) -> None:
    """Column-per-diagnostic CSV with repr-formatted (round-trippable) floats."""
    cols = record.columns()
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(cols.keys())
    for row in zip(*cols.values()):
        writer.writerow([repr(float(x)) for x in row])


def read_diagnostics_csv(fp) -> dict:
    reader = csv.reader(fp)
    header = next(reader)
    rows = [[float(x) for x in row] for row in reader if row]
    table = np.asarray(rows)
    if table.size == 0:
        return {name: np.empty(0) for name in header}
    return {name: table[:, j] for j, name in enumerate(header)}
