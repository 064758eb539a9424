"""Hybrid spin-orbit quantum-eraser simulator and channel characterization toolkit."""

__version__ = "0.1.0"

from .spinorbit import (  # noqa: E402
    DEFAULT_LMAX,
    ModeFamily,
    PolBasis,
    SpinOrbitState,
    TruncationError,
    VectorModeSpec,
    inner_product,
    make_scalar_mode,
    make_vector_mode,
)
from .elements import (  # noqa: E402
    AnalyzerSpec,
    QPlateSpec,
    WaveplateSpec,
    apply_qplate,
    apply_waveplate,
    polarization_projector,
    predict_delta,
)
from .channels import (  # noqa: E402
    ChannelModel,
    FiberChannelParams,
    apply_channel,
    fiber_channel,
    free_space_channel,
)
from .measurement import (  # noqa: E402
    ScanConfig,
    ScanResult,
    SectorSpec,
    complementarity_check,
    detection_probability,
    distinguishability,
    oam_spectrum,
    sector_projector,
    simulate_counts,
)
from .characterization import (  # noqa: E402
    calibrate_channel,
    channel_report,
    fit_fringe,
    visibility_curve,
)
