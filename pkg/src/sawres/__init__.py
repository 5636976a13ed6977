"""One-port SAW Fabry-Perot resonators: geometry closed forms, complex
reflection traces, resonance fitting and loss-parameter extraction."""

from .constants import (BOLTZMANN, ELEMENTARY_CHARGE, HBAR, PLANCK,
                        dbm_to_watts, watts_to_dbm)
from .dataio import (DeviceRecord, DeviceTable, load_device_table,
                     load_geometry, load_material, powerlaw_dataset,
                     read_trace, report_dict, report_text, rs_alpha_dataset,
                     write_report, write_trace)
from .errors import (DegenerateFitError, FitDataError, NoDipFoundError,
                     SingularBackgroundError, TraceFormatError,
                     ValidationError)
from .fitting import (FitConfig, FitResult, bootstrap_errors, fit_multimode,
                      fit_resonance, initial_guess)
from .geometry import (DerivedParams, DeviceGeometry, MaterialParams,
                       calibrate_external_q, derive_params, external_q,
                       mode_frequencies)
from .kernels import BACKEND
from .loss import (LossBudget, PowerLaw, RsAlphaFit, TlsFit, TlsParams,
                   coupling_estimate, fit_powerlaw, fit_rs_alpha, fit_tls,
                   loss_budget, mean_free_path, phonon_number,
                   power_at_sample, predict_qi, tls_alpha, tls_qi)
from .response import (DEFAULT_SEED, BackgroundModel, ComplexTrace,
                       ModeParams, remove_background, s11_single,
                       synth_trace)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BOLTZMANN", "BackgroundModel", "ComplexTrace",
    "DEFAULT_SEED", "DegenerateFitError", "DerivedParams", "DeviceGeometry",
    "DeviceRecord", "DeviceTable", "ELEMENTARY_CHARGE", "FitConfig",
    "FitDataError", "FitResult", "HBAR", "LossBudget", "MaterialParams",
    "ModeParams", "NoDipFoundError", "PLANCK", "PowerLaw", "RsAlphaFit",
    "SingularBackgroundError", "TlsFit", "TlsParams", "TraceFormatError",
    "ValidationError", "bootstrap_errors", "calibrate_external_q",
    "coupling_estimate", "dbm_to_watts", "derive_params", "external_q",
    "fit_multimode", "fit_powerlaw", "fit_resonance", "fit_rs_alpha",
    "fit_tls", "initial_guess", "load_device_table", "load_geometry",
    "load_material", "loss_budget", "mean_free_path", "mode_frequencies",
    "phonon_number", "power_at_sample", "powerlaw_dataset", "predict_qi",
    "read_trace", "remove_background", "report_dict", "report_text",
    "rs_alpha_dataset", "s11_single", "synth_trace", "tls_alpha", "tls_qi",
    "watts_to_dbm", "write_report", "write_trace",
]
