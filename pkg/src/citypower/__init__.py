"""Neural-network forecasting of city electric power consumption."""

from .dataset import Dataset, SplitPlan, load_csv, split, write_csv
from .metrics import MetricsReport, evaluate, mae, pearson_r, r_squared, rmse
from .mlp import (
    MlpConfig,
    MlpModel,
    ShallowMLPRegressor,
    fit_dataset,
    forward,
    gradient,
    load_model,
    predict,
    purelin,
    save_model,
    tansig,
    train,
)
from .permimp import PiReport, PiScore, permute_column, pi_report, pi_score
from .preprocessing import MinMaxNormalizer, fit_normalizer
from .schema import FeatureDescriptor, FeatureSchema, default_schema, load_schema

__version__ = "0.1.0"
