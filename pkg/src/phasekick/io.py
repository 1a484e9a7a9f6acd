"""File formats: CSV records, provenance headers, and the run configuration.

All outputs are plain UTF-8 CSV with LF line endings and '.' decimals,
so golden files diff cleanly across platforms and languages.  Every
file starts with '#'-prefixed provenance lines (schema version, config
hash, seed, package version) ahead of the mandatory column header; the
values contain no timestamps, so identical inputs give byte-identical
files.

Config files are flat INI text: one level of sections, key = value
pairs, unknown sections or keys rejected.
"""

import configparser
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc

from . import __version__
from .core import MotionalState, TrapConfig
from .errors import ValidationError
from .synth import DEFAULT_RING_SET, FringeScan, RingSample

SCHEMA_VERSION = "1"

FRINGE_HEADER = "delta_rad_per_s,T_s,N,theta_rad,shots,count"
RING_HEADER = "n_kicks,theta_rad,phi_rad,shots,count"
GRID_HEADER = "re_alpha,im_alpha,chi_re,chi_im,mask"


def _fmt(x):
    """Shortest exact decimal form of a float (round-trips bit-exact)."""
    return repr(float(x))


def provenance_lines(schema, extra=None):
    """Provenance comment block for an output file."""
    lines = [
        f"# schema: {schema}/{SCHEMA_VERSION}",
        f"# package-version: {__version__}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def _write_csv(path, schema, header, rows, extra=None):
    text = "\n".join(provenance_lines(schema, extra) + [header] + rows) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_csv(path, expected_header):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError:
        raise
    meta = {}
    lines = raw.splitlines()
    body = []
    header = None
    for line in lines:
        if line.startswith("#"):
            text = line[1:].strip()
            if ":" in text:
                key, _, value = text.partition(":")
                meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.strip()
            continue
        if line.strip():
            body.append(line)
    if header is None:
        raise ValidationError(f"{path}: empty file, expected header {expected_header!r}")
    if header != expected_header:
        raise ValidationError(
            f"{path}: bad header {header!r}, expected {expected_header!r}"
        )
    if not body:
        raise ValidationError(f"{path}: no data rows")
    return meta, body


def _split_row(path, line, n_fields):
    parts = line.split(",")
    if len(parts) != n_fields:
        raise ValidationError(f"{path}: expected {n_fields} fields, got {len(parts)}: {line!r}")
    return parts


# -- fringe files -------------------------------------------------------


def write_fringe_csv(path, scans, extra=None):
    """Write fringe scans (possibly many delay angles) to one CSV."""
    rows = []
    for scan in scans:
        for delta, count in zip(scan.detunings, scan.counts):
            rows.append(
                ",".join(
                    [
                        _fmt(delta),
                        _fmt(scan.ramsey_time),
                        str(int(scan.n_kicks)),
                        _fmt(scan.theta),
                        str(int(scan.shots)),
                        str(int(count)),
                    ]
                )
            )
    _write_csv(path, "fringe", FRINGE_HEADER, rows, extra)


def read_fringe_csv(path):
    """Read a fringe CSV back into FringeScan objects grouped by (N, theta).

    Returns (metadata dict, list of FringeScan).
    """
    meta, body = _read_csv(path, FRINGE_HEADER)
    groups = {}
    order = []
    for line in body:
        d, t, n, th, sh, ct = _split_row(path, line, 6)
        try:
            key = (int(n), float(th), float(t), int(sh))
            rec = (float(d), int(ct))
        except ValueError as exc:
            raise ValidationError(f"{path}: bad row {line!r}: {exc}") from None
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(rec)
    scans = []
    for key in order:
        n, theta, t_ramsey, shots = key
        deltas, counts = zip(*groups[key])
        scans.append(
            FringeScan(
                n_kicks=n,
                theta=theta,
                detunings=np.array(deltas),
                ramsey_time=t_ramsey,
                shots=shots,
                counts=np.array(counts),
            )
        )
    return meta, scans


# -- ring files ---------------------------------------------------------


def write_ring_csv(path, samples, extra=None):
    rows = [
        ",".join(
            [
                str(int(s.n_kicks)),
                _fmt(s.theta),
                _fmt(s.phi),
                str(int(s.shots)),
                str(int(s.count)),
            ]
        )
        for s in samples
    ]
    _write_csv(path, "ring", RING_HEADER, rows, extra)


def read_ring_csv(path):
    meta, body = _read_csv(path, RING_HEADER)
    samples = []
    for line in body:
        n, th, ph, sh, ct = _split_row(path, line, 5)
        try:
            samples.append(
                RingSample(
                    n_kicks=int(n),
                    theta=float(th),
                    phi=float(ph),
                    shots=int(sh),
                    count=int(ct),
                )
            )
        except ValueError as exc:
            raise ValidationError(f"{path}: bad row {line!r}: {exc}") from None
    return meta, samples


# -- grid files ---------------------------------------------------------


def write_grid_csv(path, grid, extra=None):
    """Write a ChiGrid cell per row; masked cells keep nan values, mask 0."""
    rows = []
    for iy, yv in enumerate(grid.y):
        for ix, xv in enumerate(grid.x):
            rows.append(
                ",".join(
                    [
                        _fmt(xv),
                        _fmt(yv),
                        _fmt(grid.re[iy, ix]),
                        _fmt(grid.im[iy, ix]),
                        str(int(bool(grid.mask[iy, ix]))),
                    ]
                )
            )
    meta = dict(extra or {})
    meta.update({k: v for k, v in grid.metadata.items()})
    _write_csv(path, "grid", GRID_HEADER, rows, meta)


def read_grid_csv(path):
    """Read a grid CSV into flat arrays (meta, re_alpha, im_alpha, re, im, mask)."""
    meta, body = _read_csv(path, GRID_HEADER)
    cols = [[], [], [], [], []]
    for line in body:
        parts = _split_row(path, line, 5)
        try:
            for i in range(4):
                cols[i].append(float(parts[i]))
            cols[4].append(bool(int(parts[4])))
        except ValueError as exc:
            raise ValidationError(f"{path}: bad row {line!r}: {exc}") from None
    return (meta, *(np.array(c) for c in cols))


# -- run configuration ---------------------------------------------------

_TRAP_KEYS = {
    "frequency_hz",
    "lamb_dicke",
    "repetition_rate_hz",
    "mass_amu",
    "detection_fidelity",
    "sdk_fidelity",
}
_EXPERIMENT_KEYS = {"kind", "seed", "shots"}
_STATE_KEYS = {"kind", "nbar", "alpha_re", "alpha_im", "n", "amps"}
_FRINGE_KEYS = {"n_kicks", "theta_rad", "ramsey_time_s", "detuning_points"}
_CAMPAIGN_KEYS = {"nbars", "n_kicks", "ramsey_time_s", "detuning_points", "revival_index"}
_TOMO_KEYS = {"rings", "theta_points", "resolution", "reference"}
_HEATING_KEYS = {"s_v", "d_eff_m", "nbar0", "durations_s"}
_OUTPUT_KEYS = {"dir"}

_SECTION_KEYS = {
    "trap": _TRAP_KEYS,
    "experiment": _EXPERIMENT_KEYS,
    "state": _STATE_KEYS,
    "fringe": _FRINGE_KEYS,
    "campaign": _CAMPAIGN_KEYS,
    "tomography": _TOMO_KEYS,
    "heating": _HEATING_KEYS,
    "output": _OUTPUT_KEYS,
}

KINDS = ("fringe", "thermometry-campaign", "tomography", "heating-predict")

# One unified-atomic-mass-unit in kg, same source as the core constants.
_AMU = sc.atomic_mass


@dataclass
class RunConfig:
    """Validated run description assembled from an INI file."""

    trap: TrapConfig
    kind: str
    seed: int = 0
    shots: int = 500
    state: MotionalState | None = None
    fringe: dict = field(default_factory=dict)
    campaign: dict = field(default_factory=dict)
    tomography: dict = field(default_factory=dict)
    heating: dict = field(default_factory=dict)
    out_dir: str | None = None
    source_text: str = ""

    def config_hash(self):
        """Stable digest of the effective configuration."""
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def canonical_text(self):
        parts = [
            f"trap.omega_t={self.trap.omega_t!r}",
            f"trap.eta={self.trap.eta!r}",
            f"trap.f_rep={self.trap.f_rep!r}",
            f"trap.mass={self.trap.mass!r}",
            f"trap.detection_fidelity={self.trap.detection_fidelity!r}",
            f"trap.sdk_fidelity={self.trap.sdk_fidelity!r}",
            f"experiment.kind={self.kind}",
            f"experiment.seed={self.seed}",
            f"experiment.shots={self.shots}",
            f"state={self.state!r}",
        ]
        for name in ("fringe", "campaign", "tomography", "heating"):
            section = getattr(self, name)
            for key in sorted(section):
                parts.append(f"{name}.{key}={section[key]!r}")
        return "\n".join(parts)


def _get_float(section, key, default=None):
    if key not in section:
        if default is None:
            raise ValidationError(f"missing required key {key!r}")
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ValidationError(f"key {key!r}: not a number: {section[key]!r}") from None


def _get_int(section, key, default=None):
    if key not in section:
        if default is None:
            raise ValidationError(f"missing required key {key!r}")
        return default
    try:
        return int(section[key])
    except ValueError:
        raise ValidationError(f"key {key!r}: not an integer: {section[key]!r}") from None


def _float_list(text, key):
    try:
        return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise ValidationError(f"key {key!r}: bad numeric list {text!r}") from None


def _int_list(text, key):
    vals = _float_list(text, key)
    out = [int(v) for v in vals]
    if any(o != v for o, v in zip(out, vals)):
        raise ValidationError(f"key {key!r}: expected integers, got {text!r}")
    return out


def parse_state(section):
    kind = section.get("kind", "thermal")
    if kind == "thermal":
        return MotionalState.thermal(_get_float(section, "nbar"))
    if kind == "coherent":
        return MotionalState.coherent(
            complex(_get_float(section, "alpha_re", 0.0), _get_float(section, "alpha_im", 0.0))
        )
    if kind == "fock":
        return MotionalState.fock(_get_int(section, "n"))
    if kind == "vacuum":
        return MotionalState.vacuum()
    if kind == "custom":
        if "amps" not in section:
            raise ValidationError("custom state needs an 'amps' list")
        try:
            amps = [complex(tok) for tok in section["amps"].split(",") if tok.strip()]
        except ValueError:
            raise ValidationError(f"bad custom amplitudes: {section['amps']!r}") from None
        return MotionalState.custom(amps)
    raise ValidationError(f"unknown state kind {kind!r}")


def load_config(path):
    """Parse and validate a run configuration file.

    Returns
    -------
    RunConfig

    Raises
    ------
    ValidationError
        On unknown sections/keys, missing requirements, or bad values.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError:
        raise
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from None

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ValidationError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTION_KEYS[section]:
                raise ValidationError(f"{path}: unknown key {key!r} in [{section}]")

    trap_sec = parser["trap"] if parser.has_section("trap") else {}
    trap = TrapConfig(
        omega_t=2.0 * math.pi * _get_float(trap_sec, "frequency_hz", 1.0e6),
        eta=_get_float(trap_sec, "lamb_dicke", 0.2),
        f_rep=_get_float(trap_sec, "repetition_rate_hz", 118.0e6),
        mass=_get_float(trap_sec, "mass_amu", 170.936330) * _AMU,
        detection_fidelity=_get_float(trap_sec, "detection_fidelity", 0.997),
        sdk_fidelity=_get_float(trap_sec, "sdk_fidelity", 0.993),
    )

    if not parser.has_section("experiment") or "kind" not in parser["experiment"]:
        raise ValidationError(f"{path}: missing [experiment] kind")
    exp = parser["experiment"]
    kind = exp["kind"]
    if kind not in KINDS:
        raise ValidationError(f"{path}: unknown experiment kind {kind!r}; expected one of {KINDS}")

    cfg = RunConfig(
        trap=trap,
        kind=kind,
        seed=_get_int(exp, "seed", 0),
        shots=_get_int(exp, "shots", 500),
        source_text=text,
    )
    if parser.has_section("output"):
        cfg.out_dir = parser["output"].get("dir")

    if parser.has_section("state"):
        cfg.state = parse_state(parser["state"])

    if kind == "fringe":
        sec = parser["fringe"] if parser.has_section("fringe") else {}
        if cfg.state is None:
            raise ValidationError(f"{path}: fringe experiment needs a [state] section")
        cfg.fringe = {
            "n_kicks": _get_int(sec, "n_kicks", 1),
            "theta_rad": _get_float(sec, "theta_rad", 2.0 * math.pi),
            "ramsey_time_s": _get_float(sec, "ramsey_time_s", 1.0e-3),
            "detuning_points": _get_int(sec, "detuning_points", 9),
        }
        if cfg.fringe["n_kicks"] == 0:
            raise ValidationError(f"{path}: n_kicks must be nonzero")
        if cfg.fringe["detuning_points"] < 5:
            raise ValidationError(f"{path}: need at least 5 detuning points")
    elif kind == "thermometry-campaign":
        if not parser.has_section("campaign") or "nbars" not in parser["campaign"]:
            raise ValidationError(f"{path}: campaign experiment needs [campaign] nbars")
        sec = parser["campaign"]
        nbars = _float_list(sec["nbars"], "nbars")
        if not nbars or any(v <= 0 for v in nbars):
            raise ValidationError(f"{path}: campaign nbars must be positive")
        cfg.campaign = {
            "nbars": nbars,
            "n_kicks": _get_int(sec, "n_kicks", 1),
            "ramsey_time_s": _get_float(sec, "ramsey_time_s", 1.0e-3),
            "detuning_points": _get_int(sec, "detuning_points", 9),
            "revival_index": _get_int(sec, "revival_index", 1),
        }
        if cfg.campaign["n_kicks"] == 0:
            raise ValidationError(f"{path}: n_kicks must be nonzero")
    elif kind == "tomography":
        sec = parser["tomography"] if parser.has_section("tomography") else {}
        rings = _int_list(sec["rings"], "rings") if "rings" in sec else list(DEFAULT_RING_SET)
        if not rings or any(r == 0 for r in rings):
            raise ValidationError(f"{path}: rings must be nonzero kick counts")
        reference = sec.get("reference")
        cfg.tomography = {
            "rings": rings,
            "theta_points": _get_int(sec, "theta_points", 64),
            "resolution": _get_float(sec, "resolution", 0.05),
            "reference": reference,
        }
    elif kind == "heating-predict":
        if not parser.has_section("heating"):
            raise ValidationError(f"{path}: heating-predict needs a [heating] section")
        sec = parser["heating"]
        durations = _float_list(sec["durations_s"], "durations_s") if "durations_s" in sec else None
        if not durations:
            raise ValidationError(f"{path}: heating needs durations_s")
        cfg.heating = {
            "s_v": _get_float(sec, "s_v"),
            "d_eff_m": _get_float(sec, "d_eff_m"),
            "nbar0": _get_float(sec, "nbar0", 0.0),
            "durations_s": durations,
        }
    return cfg


def parse_reference_state(text):
    """Parse a reference-state descriptor like 'fock:1' or 'thermal:0.5'."""
    kind, _, arg = text.partition(":")
    kind = kind.strip()
    if kind == "vacuum":
        return MotionalState.vacuum()
    if kind == "fock":
        return MotionalState.fock(int(arg))
    if kind == "thermal":
        return MotionalState.thermal(float(arg))
    if kind == "coherent":
        return MotionalState.coherent(complex(arg))
    raise ValidationError(f"unknown reference state {text!r}")
