"""Causal risk ratios from selectively observed detainment records.

Administrative police records describe only the encounters that ended in a
detainment, so force-rate comparisons computed from them condition on a
post-treatment event. This package provides the closed-form population
estimands for that setting, a seeded Monte Carlo simulator whose brute-force
averages serve as an oracle, and data-facing estimation of the
selection-adjusted causal risk ratio with bootstrap confidence intervals,
stratification, and a local/citywide mixture sensitivity analysis.
"""

from . import errors
from .estimate import (
    AdministrativeDataset,
    EstimateWithCI,
    ExternalRaceDistribution,
    StratumResult,
    SurveyRespondents,
    bias_factor,
    bootstrap,
    crr_identified,
    naive_risk_difference,
    naive_risk_ratio,
    sensitivity_mixture,
    stratified_estimates,
)
from .model import (
    Estimand,
    EstimandValue,
    PopulationModel,
    StratumWeights,
    ThetaVector,
    bias_factor_true,
    crr_true,
    estimand_value,
    identify_ey,
    naive_rr_true,
    pie_pde,
    theta_of,
    weights_of,
)
from .simulate import (
    EncounterTable,
    OracleEstimate,
    OracleReport,
    external_from_table,
    external_from_tables,
    oracle_estimands,
    sample_encounters,
    to_administrative,
)

__version__ = "0.1.0"

__all__ = [
    "AdministrativeDataset",
    "EncounterTable",
    "Estimand",
    "EstimandValue",
    "EstimateWithCI",
    "ExternalRaceDistribution",
    "OracleEstimate",
    "OracleReport",
    "PopulationModel",
    "StratumResult",
    "StratumWeights",
    "SurveyRespondents",
    "ThetaVector",
    "bias_factor",
    "bias_factor_true",
    "bootstrap",
    "crr_identified",
    "crr_true",
    "errors",
    "estimand_value",
    "external_from_table",
    "external_from_tables",
    "identify_ey",
    "naive_risk_difference",
    "naive_risk_ratio",
    "naive_rr_true",
    "oracle_estimands",
    "pie_pde",
    "sample_encounters",
    "sensitivity_mixture",
    "stratified_estimates",
    "theta_of",
    "to_administrative",
    "weights_of",
]
