"""Services for the analysis operations."""

from .analysis_service import CheckSuite
from .base_service import BaseService
from .cone_service import ConeService
from .counterexample_service import CounterexampleService
from .derivative_service import DerivativeService
from .mayer_service import MayerService
from .newton_service import NewtonService
from .nlp_service import NlpService
from .ocp_service import OcpService
from .smsr_service import SmsrService
from .transcription_service import TranscriptionService

__all__ = [
    "BaseService",
    "CheckSuite",
    "ConeService",
    "CounterexampleService",
    "DerivativeService",
    "MayerService",
    "NewtonService",
    "NlpService",
    "OcpService",
    "SmsrService",
    "TranscriptionService",
]
