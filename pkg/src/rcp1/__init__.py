"""Single-sample robust conformal prediction (RCP1) with randomized-smoothing
certificates, robust conformal risk control and a synthetic validation harness."""

__version__ = "0.1.0"

from rcp1.certificates import (  # noqa: E402
    Norm,
    RegionSystem,
    RiskBounds,
    Scheme,
    SmoothingSpec,
    ThreatModel,
    confidence_upper,
    knapsack_lower,
    lower_bound,
    upper_bound,
)
from rcp1.conformal import (  # noqa: E402
    CalibrationResult,
    PredictionSet,
    calibrate_rcp1,
    calibrate_vanilla,
    corrected_quantile,
    evaluate,
    predict_set,
)
from rcp1.scores import ScoreKind, ScoreTable, load_score_table  # noqa: E402
