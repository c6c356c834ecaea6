#include "ionmux/photonics.hpp"

#include <algorithm>
#include <cmath>

#include "ionmux/errors.hpp"

namespace ionmux::photonics {

double scattering_rate(double power, double k_sat, double gamma) {
    if (power < 0)
        throw ConfigError("scattering_rate: power must be >= 0");
    const double s = k_sat * power;
    return gamma * s / (2.0 * (1.0 + s));
}

namespace {

double sse_for_k(double k, std::span<const double> powers, std::span<const double> rates,
                 double gamma) {
    double sse = 0.0;
    for (size_t i = 0; i < powers.size(); ++i) {
        const double r = scattering_rate(powers[i], k, gamma);
        sse += (r - rates[i]) * (r - rates[i]);
    }
    return sse;
}

// One-parameter least squares in k: coarse log-space scan around the
// small-s estimate, then golden-section refinement.
double fit_single_k(std::span<const double> powers, std::span<const double> rates, double gamma) {
    double slope = 0.0;
    int used = 0;
    for (size_t i = 0; i < powers.size(); ++i) {
        if (powers[i] > 0 && rates[i] > 0) {
            slope += rates[i] / powers[i];
            ++used;
        }
    }
    if (used == 0)
        throw NumericError("fit_saturation: no usable (power, rate) points");
    const double k0 = std::max(2.0 * (slope / used) / gamma, 1e-300);

    double best_k = k0, best_sse = sse_for_k(k0, powers, rates, gamma);
    const int scan = 241;
    for (int i = 0; i < scan; ++i) {
        const double k = k0 * std::pow(10.0, -6.0 + 12.0 * i / (scan - 1));
        const double sse = sse_for_k(k, powers, rates, gamma);
        if (sse < best_sse) {
            best_sse = sse;
            best_k = k;
        }
    }

    double lo = best_k / std::pow(10.0, 12.0 / (scan - 1));
    double hi = best_k * std::pow(10.0, 12.0 / (scan - 1));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = sse_for_k(x1, powers, rates, gamma), f2 = sse_for_k(x2, powers, rates, gamma);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * b; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = sse_for_k(x1, powers, rates, gamma);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = sse_for_k(x2, powers, rates, gamma);
        }
    }
    return 0.5 * (a + b);
}

} // namespace

SaturationFit fit_saturation(std::span<const double> powers,
                             const std::vector<std::vector<double>>& rates_per_ion, double gamma) {
    if (powers.size() < 3)
        throw ConfigError("fit_saturation: need at least 3 distinct powers");
    if (!(gamma > 0))
        throw ConfigError("fit_saturation: gamma must be positive");
    for (size_t i = 0; i + 1 < powers.size(); ++i)
        for (size_t j = i + 1; j < powers.size(); ++j)
            if (powers[i] == powers[j])
                throw ConfigError("fit_saturation: powers must be distinct");

    SaturationFit fit;
    for (const auto& rates : rates_per_ion) {
        if (rates.size() != powers.size())
            throw ConfigError("fit_saturation: rates/powers size mismatch");
        const double lo = *std::min_element(rates.begin(), rates.end());
        const double hi = *std::max_element(rates.begin(), rates.end());
        if (lo == hi)
            throw NumericError("fit_saturation: degenerate data (all rates equal)");
        fit.k.push_back(fit_single_k(powers, rates, gamma));
    }
    if (fit.k.empty())
        throw ConfigError("fit_saturation: no ions to fit");
    fit.crosstalk.reserve(fit.k.size());
    for (double k : fit.k) fit.crosstalk.push_back(k / fit.k.front());
    return fit;
}

double predicted_g2(double rho0, double rho_s1, double rho_s2, double g2_floor) {
    for (double p : {rho0, rho_s1, rho_s2})
        if (p < 0 || p > 1)
            throw ConfigError("predicted_g2: probabilities must be in [0, 1]");
    if (!(rho0 > 0))
        throw ConfigError("predicted_g2: rho0 must be positive");
    return 2.0 * (rho_s1 + rho_s2) / rho0 + g2_floor;
}

RateBudget rate_budget(const waveform::StepSchedule& schedule, double extraction,
                       double collection) {
    if (!schedule.valid())
        throw ConfigError("rate_budget: invalid schedule");
    if (schedule.cooling_duration <= 0 || schedule.pump_duration <= 0)
        throw ConfigError("rate_budget: cooling and pump durations must be positive");
    if (schedule.repeats_per_cooling < 1)
        throw ConfigError("rate_budget: repeats_per_cooling must be >= 1");

    RateBudget budget;
    budget.cooling_duration = schedule.cooling_duration;
    budget.pump_duration = schedule.pump_duration;
    budget.forward_duration = schedule.forward_duration();
    budget.return_duration = schedule.return_time;
    budget.repeats_per_cooling = schedule.repeats_per_cooling;
    budget.attempts_per_pass = static_cast<int>(schedule.step_delta_v.size()) + 1;
    budget.extraction_efficiency = extraction;
    budget.cycle_duration =
        schedule.cooling_duration +
        schedule.repeats_per_cooling *
            (schedule.pump_duration + budget.forward_duration + schedule.return_time);
    budget.attempt_rate =
        schedule.repeats_per_cooling * budget.attempts_per_pass / budget.cycle_duration;
    budget.detected_rate = budget.attempt_rate * extraction * collection;
    return budget;
}

} // namespace ionmux::photonics
