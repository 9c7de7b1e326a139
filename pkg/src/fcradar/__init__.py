"""fcradar: aspect-based accuracy evaluation for univariate forecasting.

The package pairs classical baseline forecasters (seasonal naive with
prediction bands, random walk with drift, SES, Theta) with an evaluation
layer that reports accuracy from several angles: overall means, worst-case
tails, pairwise win/loss and practical-equivalence probabilities, and
means conditioned on sampling frequency, horizon, difficulty, and
anomalous observations.
"""

from .errors import (
    CsvFormatError,
    DuplicateKeyError,
    FcradarError,
    InvalidArgumentError,
    ReconciliationError,
    SchemaError,
    SeriesTooShortError,
    UndefinedScoreError,
)
from .forecasters import (
    BaselineRunResult,
    ForecastTable,
    ForecastVector,
    MODEL_IDS,
    PredictionBand,
    SesFit,
    ThetaFit,
    normal_quantile,
    rwd_forecast,
    run_baselines,
    seasonal_indices,
    ses_fit_forecast,
    snaive_band,
    snaive_forecast,
    theta_fit_forecast,
    theta_forecast,
)
from .ingest import (
    DatasetManifest,
    ParseStats,
    load_forecast_csv,
    load_series_csv,
    read_report,
    render_markdown,
    report_to_json,
    write_forecast_csv,
    write_plot_data,
    write_report,
)
from .metrics import (
    ScoreFrame,
    mase,
    mase_pointwise,
    rectangular_subset,
    score_table,
    smape,
    smape_pointwise,
)
from .radar import (
    AspectReport,
    RadarConfig,
    RopeTriple,
    StratumScores,
    WinLossCell,
    anomaly_mask,
    build_report,
    difficulty_split,
    expected_shortfall,
    masked_scores,
    overall_mean,
    rope_compare,
    stratify_frequency,
    stratify_horizon,
    win_loss,
)
from .timebase import (
    MONTHLY,
    PRESETS,
    QUARTERLY,
    YEARLY,
    EmbeddedDataset,
    Frequency,
    SeriesCollection,
    SplitSeries,
    TimeSeries,
    concat_embeddings,
    input_size_heuristic,
    time_delay_embed,
    train_test_split,
)

__version__ = "0.1.0"
