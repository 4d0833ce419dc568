"""Newton-Raphson tracking control with Koopman/EDMD lifted predictors.

The package splits into a small numerical kernel (``linalg``, ``ode``),
the benchmark plants (``systems``), data-driven model identification
(``koopman``), the tracking controller itself (``controller``), and an
experiment harness with a CSV-emitting CLI (``harness``, ``cli``).
"""

from .controller import (ControllerConfig, PredictorEval, RunResult,
                         derivative_fdm, derivative_sensitivity, knr_eval,
                         nr_step, predict_linear, predict_nonlinear,
                         run_closed_loop)
from .errors import (ControllerSingularity, ConversionError,
                     IntegrationFailure, NumericalFailure, UnderdeterminedFit)
from .harness import (CampaignSummary, ExperimentConfig, ExperimentReport,
                      default_config, identify, mse, run_campaign,
                      run_experiment, write_report_csv, write_trajectory_csv)
from .koopman import (FitDiagnostics, LiftedLinearModel, SnapshotDataset,
                      collect_snapshots, edmd_fit, generator_system,
                      load_model, save_model, to_continuous)
from .linalg import expm, input_integral, pinv, solve
from .ode import Flow, Trajectory, rk4_step, sensitivity_propagate, simulate
from .systems import (BasisDictionary, ReferenceSignal, SystemModel, bases,
                      car, crane, crane_balanced_sampler, crane_energy,
                      get_basis, get_reference, get_system, identity_basis,
                      references, vdp)

__version__ = "0.1.0"
