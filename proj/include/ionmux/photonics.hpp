#pragma once

#include <span>
#include <vector>

#include "ionmux/waveform.hpp"

namespace ionmux::photonics {

/// Two-level photon scattering rate R = gamma s / (2 (1 + s)) with
/// saturation parameter s = k_sat x power.
double scattering_rate(double power, double k_sat, double gamma);

/// Per-ion saturation fits with gamma held fixed. crosstalk[i] = k[i]/k[0],
/// the relative beam intensity on ion i when ion 0 is addressed.
struct SaturationFit {
    std::vector<double> k;          // 1/W per ion
    std::vector<double> crosstalk;  // k_n / k_1
};

SaturationFit fit_saturation(std::span<const double> powers,
                             const std::vector<std::vector<double>>& rates_per_ion, double gamma);

/// Small-crosstalk estimate of the zero-delay correlation:
/// g2 = 2 (rho_s1 + rho_s2) / rho0 + g2_floor. Loss factors common to all
/// three probabilities cancel in the ratio.
double predicted_g2(double rho0, double rho_s1, double rho_s2, double g2_floor);

/// Attempt-rate and detected-rate bookkeeping for a shuttling sequence.
struct RateBudget {
    double cooling_duration = 0.0;  // s
    double pump_duration = 0.0;     // s
    double forward_duration = 0.0;  // s
    double return_duration = 0.0;   // s
    int repeats_per_cooling = 1;
    int attempts_per_pass = 0;
    double extraction_efficiency = 0.0;
    double cycle_duration = 0.0;  // s
    double attempt_rate = 0.0;    // 1/s
    double detected_rate = 0.0;   // 1/s
};

/// attempt_rate = attempts per cooling cycle / cycle duration;
/// detected_rate = attempt_rate x extraction x collection. Pass
/// collection = 1 when the extraction figure already includes it.
RateBudget rate_budget(const waveform::StepSchedule& schedule, double extraction,
                       double collection);

} // namespace ionmux::photonics
