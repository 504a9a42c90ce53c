"""Desk-scale comparison of Nyquist-shaped and cyclic-spectrum WDM signals
under wavelength-selective-switch add/drop filtering.

Layers: :mod:`cycwdm.dspcore` (waveforms/filtering), :mod:`cycwdm.txgen`
(band generation), :mod:`cycwdm.channel` (link/WSS/noise), :mod:`cycwdm.rxdsp`
(receiver), :mod:`cycwdm.metrics` (BER/Q^2/OSNR axes) and
:mod:`cycwdm.harness` + :mod:`cycwdm.cli` (experiment families).
"""

from .channel import (
    NodeConfig,
    SpanConfig,
    WssFilterModel,
    apply_node,
    apply_span,
    load_noise,
    measure_osnr_db,
    run_link,
    wss_response,
)
from .config import ExperimentConfig, default_config, load_config
from .dspcore import (
    ComplexWaveform,
    DualPolWaveform,
    FrequencyResponse,
    apply_filter,
    delay,
    design_rrc,
    estimate_psd,
    frequency_shift,
    resample,
    rng_stream,
)
from .errors import (
    ConfigError,
    CountingError,
    CycwdmError,
    EqualizerCollapseError,
    EstimationError,
    ParameterError,
    SimulationError,
    SyncError,
    ThresholdRangeError,
)
from .harness import (
    ResultRow,
    build_band,
    emit_results,
    run_back_to_back,
    run_detuning,
    run_experiment,
    run_multipass,
)
from .metrics import (
    HD_FEC,
    FecThreshold,
    QualityReport,
    ber_to_q2_db,
    nodes_reached,
    psd_ratio_db,
    q2_db_to_ber,
    required_osnr,
)
from .rxdsp import (
    EqualizerConfig,
    RxResult,
    compensate_dispersion,
    count_errors,
    equalize,
    estimate_cfo,
    estimate_phase,
    receive_channel,
    select_channel,
    synchronize,
)
from .txgen import (
    BandConfig,
    SymbolFrame,
    TxChannelConfig,
    emulate_polmux,
    generate_frame,
    multiplex_band,
    shape_channel,
)

__version__ = "0.1.0"
