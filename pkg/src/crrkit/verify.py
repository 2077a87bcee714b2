"""Self-contained verification suite for the closed-form estimands.

Four families of checks:

  1. Three witness models where detainment-conditional effects reverse the
     shared sign of the underlying discrimination effects; their raw
     contrasts must reproduce fixed six-decimal values.
  2. Randomized sign consistency: the unconditional ATE/ATT always inherit
     the shared sign of the detainment and force effects.
  3. The indirect/direct decomposition sums to the ATE exactly.
  4. Monte Carlo agreement between every closed-form estimand and the
     brute-force oracle.

The checks return structured results; the CLI's ``verify`` subcommand
renders them and converts failures into a nonzero exit code. A perturbation
hook deliberately corrupts one weight so tests can confirm the suite is able
to fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .model import (
    Estimand,
    PopulationModel,
    crr_true,
    estimand_value,
    naive_rr_true,
    pie_pde,
    theta_of,
    weights_of,
)
from .simulate import ORACLE_FIELDS, oracle_estimands, sample_encounters

DEFAULT_VERIFY_SEED = 1729

#: Demonstration model used across tests and docs: half minority encounters,
#: strata (al, mi, ma, ne) = (0.2, 0.1, 0, 0.7), force rates 0.1 / 0.2.
#: Its causal risk ratio is exactly 3 while the record-level ratio is 2.
TOY_MODEL = PopulationModel(
    p_d=0.5, pi_al=0.2, pi_mi=0.1, pi_ma=0.0, pi_ne=0.7, mu_01=0.1, mu_11=0.2
)


@dataclass(frozen=True)
class SignReversalWitness:
    """A model whose conditional estimand opposes the sign of both effects."""

    name: str
    model: PopulationModel
    estimand: Estimand
    expected_contrast: float


def sign_reversal_witnesses() -> tuple[SignReversalWitness, ...]:
    common = dict(pi_al=0.1, pi_ma=0.05, mu_01=0.1)
    return (
        SignReversalWitness(
            "positive effects, negative detainment-conditional ATE",
            PopulationModel.from_effects(p_d=0.01, beta_m=0.01, beta_y=0.01, **common),
            Estimand.ATE_M1,
            -0.003884,
        ),
        SignReversalWitness(
            "negative effects, positive detainment-conditional ATE",
            PopulationModel.from_effects(p_d=0.99, beta_m=-0.01, beta_y=-0.01, **common),
            Estimand.ATE_M1,
            0.002514,
        ),
        SignReversalWitness(
            "negative effects, positive detainment-conditional ATT",
            PopulationModel.from_effects(p_d=0.01, beta_m=-0.01, beta_y=-0.01, **common),
            Estimand.ATT_M1,
            0.0026,
        ),
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def sample_models(
    rng: np.random.Generator, count: int, *, interior: bool = False
) -> Iterator[PopulationModel]:
    """Random valid models; ``interior`` keeps every estimand well-defined.

    The unconstrained sampler draws stratum masses from a flat Dirichlet and
    the remaining probabilities uniformly, covering the whole parameter
    space. The interior sampler additionally bounds prevalences and force
    rates away from 0 and 1 and rejects populations that almost never detain,
    so Monte Carlo comparisons keep all denominators healthy.
    """
    produced = 0
    while produced < count:
        pi = rng.dirichlet(np.ones(4))
        if interior:
            p_d = rng.uniform(0.1, 0.9)
            mu_01 = rng.uniform(0.05, 0.95)
            mu_11 = rng.uniform(0.05, 0.95)
            if pi[0] + pi[2] < 0.05 or pi[0] + pi[1] < 0.05:
                continue
        else:
            p_d = rng.uniform()
            mu_01 = rng.uniform()
            mu_11 = rng.uniform()
        pi = pi / pi.sum()
        model = PopulationModel(
            p_d=float(p_d),
            pi_al=float(pi[0]),
            pi_mi=float(pi[1]),
            pi_ma=float(pi[2]),
            pi_ne=float(1.0 - pi[0] - pi[1] - pi[2]),
            mu_01=float(mu_01),
            mu_11=float(mu_11),
        )
        produced += 1
        yield model


def check_sign_reversal_witnesses(perturb: str | None = None) -> list[CheckResult]:
    """Reproduce the three witness contrasts to six decimal places.

    Also confirms that each normalized value shares the contrast's sign and
    that the sign really opposes both underlying effects. ``perturb`` is a
    test hook: "ate-m1-weight" inflates one stratum weight so the
    corresponding check must fail.
    """
    results = []
    for i, witness in enumerate(sign_reversal_witnesses(), start=1):
        theta = theta_of(witness.model).as_tuple()
        weights = weights_of(witness.estimand, witness.model)
        if perturb == "ate-m1-weight" and witness.estimand is Estimand.ATE_M1:
            weights = replace(weights, w_mi=weights.w_mi + 0.01)
        w = weights.as_tuple()
        contrast = sum(wi * ti for wi, ti in zip(w, theta))
        normalized = contrast / weights.total

        effects_sign = math.copysign(1.0, witness.model.beta_m)
        reproduced = abs(contrast - witness.expected_contrast) < 5e-7
        flipped = contrast * effects_sign < 0.0
        same_sign = normalized * contrast > 0.0
        passed = reproduced and flipped and same_sign
        results.append(
            CheckResult(
                name=f"sign-reversal witness {i} ({witness.estimand.value})",
                passed=passed,
                detail=(
                    f"contrast={contrast:.9f} expected={witness.expected_contrast} "
                    f"normalized={normalized:.9f}"
                ),
            )
        )
    return results


def check_sign_consistency(seed: int, draws: int = 10_000) -> CheckResult:
    """ATE and ATT inherit the shared sign of the two effects over random models."""
    rng = np.random.default_rng(seed)
    tol = 1e-12
    violations = 0
    both_nonneg = both_nonpos = 0
    for model in sample_models(rng, draws):
        ate = estimand_value(Estimand.ATE, model).value
        att = estimand_value(Estimand.ATT, model).value
        if model.beta_m >= 0.0 and model.beta_y >= 0.0:
            both_nonneg += 1
            if ate < -tol or att < -tol:
                violations += 1
        elif model.beta_m <= 0.0 and model.beta_y <= 0.0:
            both_nonpos += 1
            if ate > tol or att > tol:
                violations += 1
    return CheckResult(
        name="sign consistency of ATE/ATT",
        passed=violations == 0,
        detail=(
            f"{draws} models ({both_nonneg} with both effects >= 0, "
            f"{both_nonpos} with both <= 0), {violations} violations"
        ),
    )


def check_paradox_search(seed: int, draws: int = 10_000) -> list[CheckResult]:
    """The randomized search must exhibit both sign-reversal phenomena."""
    rng = np.random.default_rng(seed)
    ate_m1_hits = att_m1_hits = 0
    for model in sample_models(rng, draws):
        if model.beta_m > 0.0 and model.beta_y > 0.0:
            if estimand_value(Estimand.ATE_M1, model).value < 0.0:
                ate_m1_hits += 1
        elif model.beta_m < 0.0 and model.beta_y < 0.0:
            if estimand_value(Estimand.ATT_M1, model).value > 0.0:
                att_m1_hits += 1
    return [
        CheckResult(
            name="sign reversal found: ATE_M1 < 0 with positive effects",
            passed=ate_m1_hits >= 1,
            detail=f"{ate_m1_hits} witnesses in {draws} draws",
        ),
        CheckResult(
            name="sign reversal found: ATT_M1 > 0 with negative effects",
            passed=att_m1_hits >= 1,
            detail=f"{att_m1_hits} witnesses in {draws} draws",
        ),
    ]


def check_decomposition(seed: int, draws: int = 10_000) -> CheckResult:
    """pie + pde equals the ATE contrast exactly (up to float rounding)."""
    rng = np.random.default_rng(seed)
    tol = 1e-12
    worst = 0.0
    for model in sample_models(rng, draws):
        pie, pde = pie_pde(model)
        ate = estimand_value(Estimand.ATE, model).contrast
        worst = max(worst, abs(pie + pde - ate))
    return CheckResult(
        name="indirect + direct effects equal the ATE",
        passed=worst <= tol,
        detail=f"max |pie + pde - ate| = {worst:.3e} over {draws} models",
    )


_CLOSED_FORMS = {
    "ate": lambda m: estimand_value(Estimand.ATE, m).value,
    "att": lambda m: estimand_value(Estimand.ATT, m).value,
    "ate_m1": lambda m: estimand_value(Estimand.ATE_M1, m).value,
    "att_m1": lambda m: estimand_value(Estimand.ATT_M1, m).value,
    "pie": lambda m: pie_pde(m)[0],
    "pde": lambda m: pie_pde(m)[1],
    "crr": crr_true,
    "naive_rr": naive_rr_true,
    "naive_rd": lambda m: m.beta_y,
}


def closed_form_value(field: str, model: PopulationModel) -> float:
    """Closed-form counterpart of an oracle-report field."""
    return _CLOSED_FORMS[field](model)


def check_oracle_agreement(
    seed: int, n: int = 100_000, extra_models: int = 4, se_multiple: float = 4.0
) -> CheckResult:
    """Every oracle field agrees with its closed form within ``se_multiple`` SEs.

    Restricted to interior models: the SE-based gate assumes roughly normal
    estimates with reliable SE estimates, which fails for populations whose
    race or detainment groups are near-empty.
    """
    rng = np.random.default_rng(seed)
    models = [TOY_MODEL]
    models += list(sample_models(rng, extra_models, interior=True))

    worst = 0.0
    worst_label = ""
    failures = 0
    for i, model in enumerate(models):
        table = sample_encounters(model, n, seed=int(rng.integers(2**63)))
        report = oracle_estimands(table)
        for field in ORACLE_FIELDS:
            estimate = report.field(field)
            if estimate.value is None or estimate.se is None or estimate.se == 0.0:
                failures += 1
                worst_label = f"{field}[model {i}] undefined"
                continue
            z = abs(closed_form_value(field, model) - estimate.value) / estimate.se
            if z > worst:
                worst, worst_label = z, f"{field}[model {i}]"
            if z > se_multiple:
                failures += 1
    return CheckResult(
        name="oracle agrees with closed forms",
        passed=failures == 0,
        detail=(
            f"{len(models)} models at n={n}; worst |z| = {worst:.2f} ({worst_label}), "
            f"allowed {se_multiple}"
        ),
    )


def run_verification(
    seed: int = DEFAULT_VERIFY_SEED,
    draws: int = 10_000,
    oracle_n: int = 100_000,
    perturb: str | None = None,
) -> list[CheckResult]:
    """Run the full verification suite; order is stable for reporting."""
    results = check_sign_reversal_witnesses(perturb)
    results.append(check_sign_consistency(seed, draws))
    results.extend(check_paradox_search(seed, draws))
    results.append(check_decomposition(seed, draws))
    results.append(check_oracle_agreement(seed, oracle_n))
    return results
