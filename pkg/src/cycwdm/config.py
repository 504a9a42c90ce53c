"""Experiment configuration: INI-style file with one section per module.

Every default is overridable; unknown sections or keys are errors so typos
fail fast.  Values use readable units (GHz, Gbd, dB, symbols); the resolved
:class:`ExperimentConfig` carries SI units.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field, replace

from .channel import SpanConfig, WssFilterModel
from .errors import ConfigError
from .rxdsp import EqualizerConfig

__all__ = ["ExperimentConfig", "load_config", "default_config"]

_EXPERIMENTS = ("b2b", "detuning", "multipass")
_MODES = ("nyquist", "cyclic")
_NODE_MODES = ("adddrop", "allpass")


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _strings(text: str) -> list[str]:
    return [tok.strip().lower() for tok in text.replace(",", " ").split()]


# section -> key -> (parser, default-as-text)
_SCHEMA = {
    "experiment": {
        "kind": (str.lower, "b2b"),
        "baud_gbd": (_floats, "40 42.5 45 47.5"),
        "modes": (_strings, "nyquist cyclic"),
        "osnr_grid_db": (_floats, "12 13 14 15 16 17 18 19"),
        "detuning_grid_ghz": (_floats, "-5 -4 -3 -2 -1 0 1 2 3 4 5"),
        "detuning_osnr_db": (float, "16.5"),
        "multipass_osnr_at_40gbd_db": (float, "17"),
        "max_passes": (int, "6"),
        "node_mode": (str.lower, "adddrop"),
        "n_symbols": (int, "65536"),
        "n_seeds": (int, "4"),
        "seed_base": (int, "7100"),
    },
    "txgen": {
        "roll_off": (float, "0.01"),
        "grid_ghz": (float, "50"),
        "band_center_thz": (float, "193.075"),
        "dac_rate_gsa": (float, "256"),
        "pol_decorrelation_symbols": (int, "256"),
    },
    "channel": {
        "span_km": (float, "80"),
        "dispersion_ps_nm_km": (float, "17"),
        "reference_lambda_nm": (float, "1552.7"),
        "wss_bandwidth_ghz": (float, "42.5"),
        "wss_edge_fwhm_ghz": (float, "5"),
        "express_delay_symbols": (int, "128"),
    },
    "rxdsp": {
        "n_taps": (int, "81"),
        "mu_lms": (float, "1e-3"),
        "mu_cma": (float, "1e-4"),
        "training_symbols": (int, "4096"),
        "cma_radius": (float, "1.0"),
        "prefilter_bw_ghz": (float, "60"),
        "phase_block_len": (int, "64"),
        "guard_symbols": (int, "1024"),
    },
}


@dataclass
class ExperimentConfig:
    """Fully resolved experiment configuration (SI units)."""

    kind: str = "b2b"
    bauds_hz: list[float] = field(default_factory=lambda: [40e9, 42.5e9, 45e9, 47.5e9])
    modes: list[str] = field(default_factory=lambda: ["nyquist", "cyclic"])
    osnr_grid_db: list[float] = field(
        default_factory=lambda: [12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0]
    )
    detuning_grid_hz: list[float] = field(
        default_factory=lambda: [1e9 * d for d in range(-5, 6)]
    )
    detuning_osnr_db: float = 16.5
    multipass_osnr_at_40gbd_db: float = 17.0
    max_passes: int = 6
    node_mode: str = "adddrop"
    n_symbols: int = 65536
    n_seeds: int = 4
    seed_base: int = 7100

    roll_off: float = 0.01
    grid_hz: float = 50e9
    band_center_thz: float = 193.075
    dac_rate_hz: float = 256e9
    pol_decorrelation_symbols: int = 256

    span_km: float = 80.0
    dispersion_ps_nm_km: float = 17.0
    reference_lambda_nm: float = 1552.7
    # drop-filter shape: calibrated, not measured device values.  A switch
    # marketed for a 50-GHz grid passes well under 50 GHz at -3 dB; these
    # defaults give a single on-grid pass a near-zero 40-Gbd penalty while
    # a +5-GHz misalignment costs a 40-Gbd Nyquist signal >= 2.5 dB.
    wss_bandwidth_hz: float = 42.5e9
    wss_edge_fwhm_hz: float = 5e9
    express_delay_symbols: int = 128

    n_taps: int = 81
    mu_lms: float = 1e-3
    mu_cma: float = 1e-4
    training_symbols: int = 4096
    cma_radius: float = 1.0
    prefilter_bw_hz: float = 60e9
    phase_block_len: int = 64
    guard_symbols: int = 1024

    ref_bw_hz: float = 12.5e9  # OSNR reference bandwidth, 0.1 nm convention

    def __post_init__(self):
        if self.kind not in _EXPERIMENTS:
            raise ConfigError(f"experiment kind must be one of {_EXPERIMENTS}")
        if self.node_mode not in _NODE_MODES:
            raise ConfigError(f"node_mode must be one of {_NODE_MODES}")
        for m in self.modes:
            if m not in _MODES:
                raise ConfigError(f"unknown shaping mode {m!r}")
        for grid_name in ("bauds_hz", "modes", "osnr_grid_db", "detuning_grid_hz"):
            if not getattr(self, grid_name):
                raise ConfigError(f"{grid_name} must be nonempty")
        if self.n_symbols < 2**14:
            raise ConfigError("n_symbols must be >= 2^14 for counting validity")
        if self.n_seeds < 1 or self.max_passes < 1:
            raise ConfigError("n_seeds and max_passes must be >= 1")

    @property
    def seeds(self) -> list[int]:
        return [self.seed_base + i for i in range(self.n_seeds)]

    @property
    def span(self) -> SpanConfig:
        return SpanConfig(
            length_m=self.span_km * 1e3,
            dispersion_ps_nm_km=self.dispersion_ps_nm_km,
            reference_lambda_m=self.reference_lambda_nm * 1e-9,
        )

    @property
    def wss(self) -> WssFilterModel:
        return WssFilterModel(
            center_hz=0.0,
            bandwidth_3db_hz=self.wss_bandwidth_hz,
            edge_sigma_hz=self.wss_edge_fwhm_hz,
        )

    @property
    def equalizer(self) -> EqualizerConfig:
        return EqualizerConfig(
            n_taps=self.n_taps,
            mu_lms=self.mu_lms,
            mu_cma=self.mu_cma,
            training_symbols=self.training_symbols,
            cma_radius=self.cma_radius,
        )

    def multipass_osnr_db(self, baud_hz: float) -> float:
        """Loop OSNR scaled with baud so the per-symbol SNR stays level."""
        return self.multipass_osnr_at_40gbd_db + 10.0 * math.log10(baud_hz / 40e9)

    def smoke(self) -> "ExperimentConfig":
        """Reduced profile: 2^14 symbols, one seed, two OSNR points."""
        mid = self.osnr_grid_db[len(self.osnr_grid_db) // 2]
        top = self.osnr_grid_db[-1]
        return replace(
            self,
            n_symbols=2**14,
            n_seeds=1,
            osnr_grid_db=[mid, top],
            detuning_grid_hz=[0.0, 5e9],
            max_passes=2,
        )

    def config_hash(self) -> str:
        items = []
        for name in sorted(self.__dataclass_fields__):
            items.append(f"{name}={getattr(self, name)!r}")
        digest = hashlib.sha256(";".join(items).encode("utf-8")).hexdigest()
        return digest[:12]


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def load_config(path: str) -> ExperimentConfig:
    """Parse an INI config file, rejecting unknown sections and keys."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=(";", "#")
    )
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from exc

    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        raw[section] = {}
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            raw[section][key] = value

    def get(section: str, key: str):
        parse, default = _SCHEMA[section][key]
        text = raw.get(section, {}).get(key, default)
        try:
            return parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {text!r}") from exc

    try:
        return ExperimentConfig(
            kind=get("experiment", "kind"),
            bauds_hz=[b * 1e9 for b in get("experiment", "baud_gbd")],
            modes=get("experiment", "modes"),
            osnr_grid_db=get("experiment", "osnr_grid_db"),
            detuning_grid_hz=[d * 1e9 for d in get("experiment", "detuning_grid_ghz")],
            detuning_osnr_db=get("experiment", "detuning_osnr_db"),
            multipass_osnr_at_40gbd_db=get("experiment", "multipass_osnr_at_40gbd_db"),
            max_passes=get("experiment", "max_passes"),
            node_mode=get("experiment", "node_mode"),
            n_symbols=get("experiment", "n_symbols"),
            n_seeds=get("experiment", "n_seeds"),
            seed_base=get("experiment", "seed_base"),
            roll_off=get("txgen", "roll_off"),
            grid_hz=get("txgen", "grid_ghz") * 1e9,
            band_center_thz=get("txgen", "band_center_thz"),
            dac_rate_hz=get("txgen", "dac_rate_gsa") * 1e9,
            pol_decorrelation_symbols=get("txgen", "pol_decorrelation_symbols"),
            span_km=get("channel", "span_km"),
            dispersion_ps_nm_km=get("channel", "dispersion_ps_nm_km"),
            reference_lambda_nm=get("channel", "reference_lambda_nm"),
            wss_bandwidth_hz=get("channel", "wss_bandwidth_ghz") * 1e9,
            wss_edge_fwhm_hz=get("channel", "wss_edge_fwhm_ghz") * 1e9,
            express_delay_symbols=get("channel", "express_delay_symbols"),
            n_taps=get("rxdsp", "n_taps"),
            mu_lms=get("rxdsp", "mu_lms"),
            mu_cma=get("rxdsp", "mu_cma"),
            training_symbols=get("rxdsp", "training_symbols"),
            cma_radius=get("rxdsp", "cma_radius"),
            prefilter_bw_hz=get("rxdsp", "prefilter_bw_ghz") * 1e9,
            phase_block_len=get("rxdsp", "phase_block_len"),
            guard_symbols=get("rxdsp", "guard_symbols"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
