"""
Generators for writing reports, sample tables and trajectories to disk.
"""

from .base_generator import BaseGenerator
from .report_generators import (
    CounterexampleGenerator,
    ReportGenerator,
    SampleCsvGenerator,
    TrajectoryCsvGenerator,
)

__all__ = [
    "BaseGenerator",
    "ReportGenerator",
    "SampleCsvGenerator",
    "CounterexampleGenerator",
    "TrajectoryCsvGenerator",
]
