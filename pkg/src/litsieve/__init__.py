"""Keyword-driven arXiv retrieval, IQR-thresholded semantic filtering and
LLM-assisted literature review generation."""

from .config import InputQuery, PipelineConfig, load_config
from .pipeline import ReviewBundle, run_pipeline

__all__ = ["InputQuery", "PipelineConfig", "ReviewBundle", "load_config", "run_pipeline"]
__version__ = "0.1.0"
