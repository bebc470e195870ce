"""Discrete total variation outliers among histograms with shared bins."""

__version__ = "0.1.0"

from .errors import (DegenerateTableError, NoConsensusError, NumericalGuardError,  # noqa: E402
                     OracleLimitError, RankDeficientError, TvorError, ValidationError)
from .histogram import (Binning, DistributionSpec, Histogram, RngSeed,  # noqa: E402
                        apply_heaping, circular_dtv, dtv, sample, subsample)
from .expected import (f2_exact, f_asymptotic, f_circular, f_exact, f_oracle,  # noqa: E402
                       jensen_upper_bound, theoretical_dtv)
from .model import (DtvModel, McTable, ScoreReport, build_mc_table, fit_model,  # noqa: E402
                    fit_model_ransac, run_tvor, score_d1, score_d2)
from .baseline import myers_index, run_chi2_baseline, whipple_index  # noqa: E402
