"""Every statistical pass threshold used by the experiments, in one place."""

TOLERANCES = {
    # goodness of fit
    "ks_p_min": 0.01,
    # means compared with exact expectations
    "mean_se_multiple": 4.0,
    # Var / n^{2/3} must stay within this factor across sizes
    "variance_band_factor": 3.0,
    "variance_slope": (0.5, 0.85),
    # exit concentration
    "exit_tail_t": 3.0,
    "exit_tail_max": 0.05,
    "exit_median_band": 1.0,
    # tail exponent window for log(-log p) against log t
    "tail_slope": (2.2, 3.8),
    # Radon-Nikodym second moment, relative
    "rn_second_moment_rel": 0.02,
    # tilted-measure event frequencies
    "tilt_frequency_min": 0.8,
    # exact-arithmetic oracles
    "oracle_rel": 1e-10,
    "cocycle_abs": 1e-9,
    "quantile_rel": 1e-12,
    "special_rel": 1e-12,
}
