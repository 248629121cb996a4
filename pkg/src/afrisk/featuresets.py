"""Named variable sets for the default schema.

``full18`` is the set of predictors reported as informative for AF in HCM;
``fhs``, ``aric`` and ``charge`` approximate the inputs of three
general-population AF risk models using the nearest variables the default
schema carries (LA enlargement maps to ``la_diameter``, treatment for
hypertension to ``antihypertensive_medication``).
"""

from __future__ import annotations

FULL18 = (
    "la_diameter",
    "stress_heart_rate",
    "age",
    "exercise_mets",
    "septal_myectomy",
    "exercise_time",
    "diuretic_treatment",
    "percent_max_hr_achieved",
    "hr_recovery_1min",
    "lge_presence",
    "e_a_ratio",
    "nyha_class",
    "e_e_prime",
    "lv_sr_s",
    "dyspnea_on_exertion",
    "abpr_followup",
    "stress_dbp",
    "lv_sr_e",
)

# expected direction of association with AF for the 18 predictors
FULL18_SIGNS = {
    "la_diameter": "positive",
    "stress_heart_rate": "negative",
    "age": "positive",
    "exercise_mets": "negative",
    "septal_myectomy": "positive",
    "exercise_time": "negative",
    "diuretic_treatment": "positive",
    "percent_max_hr_achieved": "negative",
    "hr_recovery_1min": "negative",
    "lge_presence": "positive",
    "e_a_ratio": "positive",
    "nyha_class": "positive",
    "e_e_prime": "positive",
    "lv_sr_s": "positive",
    "dyspnea_on_exertion": "positive",
    "abpr_followup": "positive",
    "stress_dbp": "negative",
    "lv_sr_e": "negative",
}

FHS = ("age", "male_sex", "bmi", "rest_sbp", "antihypertensive_medication",
       "heart_failure_history")

ARIC = ("age", "race", "height", "current_smoking", "rest_sbp", "antihypertensive_medication",
        "la_diameter", "diabetes", "coronary_artery_disease", "heart_failure_history")

CHARGE = ("age", "race", "height", "weight", "rest_sbp", "rest_dbp", "current_smoking",
          "antihypertensive_medication", "diabetes", "prior_myocardial_infarction",
          "heart_failure_history")

LA_ONLY = ("la_diameter",)

NAMED_SETS = {
    "fhs": FHS,
    "aric": ARIC,
    "charge": CHARGE,
    "full18": FULL18,
    "la-only": LA_ONLY,
}


def named_feature_set(name: str) -> tuple[str, ...]:
    try:
        return NAMED_SETS[name.strip().lower()]
    except KeyError:
        raise KeyError(f"unknown feature set {name!r}; known: {sorted(NAMED_SETS)}") from None
