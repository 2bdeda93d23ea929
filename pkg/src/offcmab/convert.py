"""Converter stub for real review and question-answer datasets.

Live ingestion is out of scope; this module documents the expected input
schema and ships a static token-pricing table so cost computations stay
reproducible without API access.

Expected review CSV columns (ranking environments):
    user_id     string, groups rows into per-user candidate pools
    item_id     string, distinct item identifier
    rating      float in [0, 5]; ratings >= 4 count as a satisfactory item

Expected question CSV columns (cache environments):
    question        string, the query text
    frequency       int, observed arrival count
    prompt_tokens   int, tokens in the request
    output_tokens   int, tokens in the response

The per-query cost is
    prompt_tokens * input_price + output_tokens * output_price
using the pricing table, then rescaled to [0, 1] by the maximum cost.
"""

from __future__ import annotations

import json
from importlib import resources

__all__ = ["load_token_pricing", "convert_reviews", "convert_questions"]


def load_token_pricing() -> dict:
    """Static per-1k-token USD prices by model name."""
    with resources.files("offcmab.data").joinpath("token_pricing.json").open() as fp:
        return json.load(fp)


def convert_reviews(path: str):
    raise NotImplementedError(
        "real review-dataset ingestion is out of scope; see the module "
        "docstring for the expected CSV columns"
    )


def convert_questions(path: str, model: str = "default"):
    raise NotImplementedError(
        "real question-dataset ingestion is out of scope; see the module "
        "docstring for the expected CSV columns and load_token_pricing() "
        "for the static pricing table"
    )
