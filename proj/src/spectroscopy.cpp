#include "ionmux/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ionmux/csv.hpp"
#include "ionmux/errors.hpp"

namespace ionmux::spectroscopy {

namespace {

// Generalized Laguerre L_k^(a)(x) for k = 0..k_max by upward recurrence in a
// sign + log-magnitude representation: mantissas are renormalized whenever
// they grow, so the recurrence survives the huge values reached at large
// negative arguments. visit(k, log_abs, sign) is called for every k.
template <typename Visit>
void laguerre_scan(int k_max, double a, double x, Visit visit) {
    double prev = 0.0;          // L_{k-1}, at the shared scale
    double cur = 1.0;           // L_k
    double log_scale = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        const double mag = std::abs(cur);
        visit(k, mag > 0 ? std::log(mag) + log_scale : -std::numeric_limits<double>::infinity(),
              cur >= 0 ? 1.0 : -1.0);
        const double next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
        const double m = std::max(std::abs(cur), std::abs(prev));
        if (m > 1e250) {
            cur /= 1e250;
            prev /= 1e250;
            log_scale += std::log(1e250);
        }
    }
}

double laguerre_log(int k, double a, double x, double* sign_out) {
    double result = 0.0, sign = 1.0;
    laguerre_scan(k, a, x, [&](int i, double lg, double s) {
        if (i == k) {
            result = lg;
            sign = s;
        }
    });
    if (sign_out) *sign_out = sign;
    return result;
}

// Geometric distribution without any tail guard; both public entry points
// wrap it with their own cutoff contracts.
PhononDistribution thermal_probs(double n_bar, int cutoff) {
    PhononDistribution dist;
    dist.cutoff = cutoff;
    dist.probabilities.resize(cutoff + 1);
    const double r = n_bar / (1.0 + n_bar);
    double p = 1.0 / (1.0 + n_bar);
    for (int n = 0; n <= cutoff; ++n) {
        dist.probabilities[n] = p;
        p *= r;
    }
    dist.tail_mass = std::pow(r, cutoff + 1);
    return dist;
}

// Cutoff for internal consumers: the documented spread bound, plus whatever
// the bare thermal tail needs to drop below 1e-9.
int auto_cutoff(double n_thermal, double alpha_sq) {
    int c = suggested_cutoff(n_thermal, alpha_sq);
    if (n_thermal > 0) {
        const double r = n_thermal / (1.0 + n_thermal);
        c = std::max(c, static_cast<int>(std::ceil(std::log(1e-9) / std::log(r))));
    }
    return c;
}

} // namespace

PhononDistribution thermal_distribution(double n_bar, int cutoff) {
    if (n_bar < 0)
        throw ConfigError("thermal_distribution: n_bar must be >= 0");
    if (cutoff < 0)
        throw ConfigError("thermal_distribution: cutoff must be >= 0");

    PhononDistribution dist = thermal_probs(n_bar, cutoff);
    if (dist.tail_mass > 1e-6)
        throw NumericError("thermal_distribution: cutoff too small (tail mass " +
                           std::to_string(dist.tail_mass) + "); increase the cutoff");
    return dist;
}

int suggested_cutoff(double n_thermal, double alpha_sq) {
    const double spread =
        std::sqrt((2.0 * n_thermal + 1.0) * alpha_sq + n_thermal * n_thermal + n_thermal);
    return static_cast<int>(std::ceil(alpha_sq + n_thermal + 8.0 * spread)) + 4;
}

PhononDistribution displaced_thermal_distribution(double n_thermal, std::complex<double> alpha,
                                                  int cutoff) {
    if (n_thermal < 0)
        throw ConfigError("displaced_thermal_distribution: n_thermal must be >= 0");
    const double a2 = std::norm(alpha);
    if (cutoff < suggested_cutoff(n_thermal, a2))
        throw NumericError("displaced_thermal_distribution: cutoff insufficient for n_th=" +
                           std::to_string(n_thermal) + ", |alpha|^2=" + std::to_string(a2));

    if (a2 == 0.0) return thermal_probs(n_thermal, cutoff);

    PhononDistribution dist;
    dist.cutoff = cutoff;
    dist.probabilities.resize(cutoff + 1);

    if (n_thermal < 1e-12) {
        // coherent state: Poisson
        double lg = -a2;  // log P_0
        for (int n = 0; n <= cutoff; ++n) {
            dist.probabilities[n] = std::exp(lg);
            lg += std::log(a2) - std::log(n + 1.0);
        }
    } else {
        // P_n = (nth^n / (1+nth)^{n+1}) e^{-a2/(1+nth)} L_n(-a2 / (nth (1+nth)))
        const double y = a2 / (n_thermal * (1.0 + n_thermal));
        const double log_r = std::log(n_thermal / (1.0 + n_thermal));
        const double base = -std::log(1.0 + n_thermal) - a2 / (1.0 + n_thermal);
        laguerre_scan(cutoff, 0.0, -y, [&](int n, double log_l, double /*sign: positive*/) {
            dist.probabilities[n] = std::exp(base + n * log_r + log_l);
        });
    }

    double sum = 0.0;
    for (double p : dist.probabilities) sum += p;
    dist.tail_mass = std::max(0.0, 1.0 - sum);
    return dist;
}

double carrier_rabi_frequency(int n, double eta) {
    if (n < 0)
        throw ConfigError("carrier_rabi_frequency: n must be >= 0");
    if (eta < 0)
        throw ConfigError("carrier_rabi_frequency: eta must be >= 0");
    const double x = eta * eta;
    double sign = 1.0;
    const double lg = laguerre_log(n, 0.0, x, &sign);
    return sign * std::exp(lg - 0.5 * x);
}

double carrier_rabi_series6(int n, double eta) {
    const double x = eta * eta;
    const double nn = n;
    return 1.0 - (nn + 0.5) * x + (0.125 + nn / 4.0 + nn * nn / 4.0) * x * x -
           (1.0 / 48.0 + nn / 18.0 + nn * nn / 24.0 + nn * nn * nn / 36.0) * x * x * x;
}

double sideband_coupling(int n, int s, double eta) {
    if (s < 1)
        throw ConfigError("sideband_coupling: sideband order s must be >= 1");
    if (n < s)
        throw NumericError("sideband_coupling: n < s (no population below the ground state)");
    if (eta < 0)
        throw ConfigError("sideband_coupling: eta must be >= 0");
    if (eta == 0.0) return 0.0;
    const double x = eta * eta;
    double sign = 1.0;
    const double log_l = laguerre_log(n - s, s, x, &sign);
    const double lg = -0.5 * x + s * std::log(eta) +
                      0.5 * (std::lgamma(n - s + 1.0) - std::lgamma(n + 1.0)) + log_l;
    return sign * std::exp(lg);
}

RabiCurve simulate_carrier_flop(const ModeState& com, double eta_eff, double rabi,
                                std::span<const double> times, int n_ions,
                                std::span<const double> per_ion_rabi, int cutoff) {
    if (n_ions < 1)
        throw ConfigError("simulate_carrier_flop: n_ions must be >= 1");
    if (!per_ion_rabi.empty() && static_cast<int>(per_ion_rabi.size()) != n_ions)
        throw ConfigError("simulate_carrier_flop: per-ion Rabi profile size mismatch");

    if (cutoff <= 0) cutoff = auto_cutoff(com.n_thermal, com.n_alpha());
    const auto dist = displaced_thermal_distribution(com.n_thermal, com.alpha, cutoff);

    std::vector<double> ratio(cutoff + 1);
    for (int n = 0; n <= cutoff; ++n) ratio[n] = carrier_rabi_frequency(n, eta_eff);

    // condition on n <= cutoff so the curve starts at exactly zero
    double mass = 0.0;
    for (double p : dist.probabilities) mass += p;

    std::vector<double> rabi_set;
    if (per_ion_rabi.empty())
        rabi_set.assign(1, rabi);
    else
        rabi_set.assign(per_ion_rabi.begin(), per_ion_rabi.end());

    RabiCurve curve;
    curve.times.assign(times.begin(), times.end());
    curve.excitation.resize(times.size());
    for (size_t it = 0; it < times.size(); ++it) {
        double acc = 0.0;
        for (double w : rabi_set) {
            double c = 0.0;
            for (int n = 0; n <= cutoff; ++n)
                c += dist.probabilities[n] * std::cos(w * ratio[n] * curve.times[it]);
            acc += 0.5 * (1.0 - c / mass);
        }
        curve.excitation[it] = acc / rabi_set.size();
    }
    return curve;
}

RabiCurve simulate_carrier_flop_multimode(std::span<const std::pair<ModeState, double>> modes,
                                          double rabi, std::span<const double> times) {
    if (modes.empty())
        throw ConfigError("simulate_carrier_flop_multimode: need at least one mode");

    // per-mode truncated distributions and coupling ratios
    std::vector<std::vector<double>> probs, ratios;
    for (size_t m = 0; m < modes.size(); ++m) {
        const auto& [state, eta] = modes[m];
        int cutoff = auto_cutoff(state.n_thermal, state.n_alpha());
        if (m > 0) cutoff = std::min(cutoff, 30);
        std::vector<double> p(cutoff + 1);
        if (m == 0 || cutoff >= auto_cutoff(state.n_thermal, state.n_alpha())) {
            const auto d = displaced_thermal_distribution(state.n_thermal, state.alpha, cutoff);
            p = d.probabilities;
        } else {
            // capped cutoff: evaluate the same closed form without the guard
            const auto d = displaced_thermal_distribution(
                state.n_thermal, state.alpha, auto_cutoff(state.n_thermal, state.n_alpha()));
            p.assign(d.probabilities.begin(), d.probabilities.begin() + cutoff + 1);
        }
        std::vector<double> r(p.size());
        for (size_t n = 0; n < p.size(); ++n)
            r[n] = carrier_rabi_frequency(static_cast<int>(n), eta);
        probs.push_back(std::move(p));
        ratios.push_back(std::move(r));
    }

    // enumerate joint states with pruning
    struct Term {
        double p;
        double ratio;
    };
    std::vector<Term> terms{{1.0, 1.0}};
    for (size_t m = 0; m < probs.size(); ++m) {
        std::vector<Term> next;
        next.reserve(terms.size() * 4);
        for (const auto& t : terms) {
            for (size_t n = 0; n < probs[m].size(); ++n) {
                const double p = t.p * probs[m][n];
                if (p < 1e-10) continue;
                next.push_back({p, t.ratio * ratios[m][n]});
            }
        }
        terms = std::move(next);
    }

    double mass = 0.0;
    for (const auto& t : terms) mass += t.p;

    RabiCurve curve;
    curve.times.assign(times.begin(), times.end());
    curve.excitation.resize(times.size());
    for (size_t it = 0; it < times.size(); ++it) {
        double c = 0.0;
        for (const auto& t : terms) c += t.p * std::cos(rabi * t.ratio * curve.times[it]);
        curve.excitation[it] = 0.5 * (1.0 - c / mass);
    }
    return curve;
}

double doppler_limit(double gamma, double omega) {
    if (!(gamma > 0) || !(omega > 0))
        throw ConfigError("doppler_limit: gamma and omega must be positive");
    return gamma / (2.0 * omega);
}

MotionalState apply_heating(MotionalState state, double duration) {
    if (duration < 0)
        throw ConfigError("apply_heating: duration must be >= 0");
    for (auto& mode : state.modes) mode.n_thermal += mode.heating_rate * duration;
    return state;
}

SidebandTable sideband_spectrum(const chain::NormalModeSet& modes, const MotionalState& state,
                                const chain::LambDickeTable& eta_table) {
    const int n_modes = static_cast<int>(modes.frequencies.size());
    const int n_ions = modes.config.n_ions;
    if (static_cast<int>(state.modes.size()) != n_modes)
        throw ConfigError("sideband_spectrum: one motional entry per mode required");

    double carrier = 0.0;
    std::vector<double> red(n_modes, 0.0), blue(n_modes, 0.0);
    for (int m = 0; m < n_modes; ++m) {
        const auto& ms = state.modes[m];
        const int cutoff = auto_cutoff(ms.n_thermal, ms.n_alpha());
        const auto dist = displaced_thermal_distribution(ms.n_thermal, ms.alpha, cutoff);
        for (int i = 0; i < n_ions; ++i) {
            const double eta = std::abs(eta_table.eta(m, i));
            for (int n = 0; n <= cutoff; ++n) {
                const double p = dist.probabilities[n];
                if (m == 0) {
                    // carrier strength depends only weakly on the mode; use
                    // the COM-mode average as the reference line
                    const double c = carrier_rabi_frequency(n, eta);
                    carrier += p * c * c / n_ions;
                }
                if (n >= 1) {
                    const double c = sideband_coupling(n, 1, eta);
                    red[m] += p * c * c / n_ions;
                }
                const double b = sideband_coupling(n + 1, 1, eta);
                blue[m] += p * b * b / n_ions;
            }
        }
    }

    SidebandTable table;
    table.lines.push_back({0.0, 0, 1.0});
    for (int m = 0; m < n_modes; ++m) {
        table.lines.push_back({-modes.frequencies[m], -1, red[m] / carrier});
        table.lines.push_back({modes.frequencies[m], +1, blue[m] / carrier});
    }
    std::sort(table.lines.begin(), table.lines.end(),
              [](const SidebandLine& a, const SidebandLine& b) { return a.detuning < b.detuning; });
    return table;
}

void write_rabi_csv(std::ostream& os, const RabiCurve& curve) {
    os << "time_s,p_up\n";
    for (size_t i = 0; i < curve.times.size(); ++i)
        os << csv::format_sci(curve.times[i]) << ',' << csv::format_sci(curve.excitation[i])
           << '\n';
}

void write_sideband_csv(std::ostream& os, const SidebandTable& table) {
    os << "detuning_rad_s,order,strength\n";
    for (const auto& line : table.lines)
        os << csv::format_sci(line.detuning) << ',' << line.order << ','
           << csv::format_sci(line.relative_strength) << '\n';
}

} // namespace ionmux::spectroscopy
