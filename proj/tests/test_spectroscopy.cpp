#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ionmux/chain.hpp"
#include "ionmux/errors.hpp"
#include "ionmux/spectroscopy.hpp"
#include "support/oracles.hpp"

using namespace ionmux;
using namespace ionmux::spectroscopy;

TEST_CASE("thermal distribution closed form") {
    auto zero = thermal_distribution(0.0, 10);
    CHECK(zero.probabilities[0] == 1.0);
    CHECK(zero.probabilities[5] == 0.0);
    CHECK(zero.tail_mass == 0.0);

    auto four = thermal_distribution(4.0, 200);
    CHECK(four.probabilities[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(four.probabilities[1] == doctest::Approx(0.16).epsilon(1e-12));
    double mean = 0.0, mass = 0.0;
    for (int n = 0; n <= four.cutoff; ++n) {
        mean += n * four.probabilities[n];
        mass += four.probabilities[n];
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(mean == doctest::Approx(4.0).epsilon(1e-6));

    CHECK_THROWS_AS(thermal_distribution(4.0, 20), NumericError);  // tail too heavy
    CHECK_THROWS_AS(thermal_distribution(-1.0, 20), ConfigError);
}

TEST_CASE("displaced thermal limits: pure thermal and pure coherent") {
    const int cutoff = 140;  // >= the documented bound, tail below 1e-6
    auto t = displaced_thermal_distribution(4.0, 0.0, cutoff);
    auto t_ref = thermal_distribution(4.0, cutoff);
    for (int n = 0; n <= cutoff; ++n)
        CHECK(t.probabilities[n] == doctest::Approx(t_ref.probabilities[n]).epsilon(1e-12));

    const double a2 = 9.0;
    const int c2 = suggested_cutoff(0.0, a2);
    auto p = displaced_thermal_distribution(0.0, std::complex<double>(3.0, 0.0), c2);
    double lg = -a2;
    for (int n = 0; n <= c2; ++n) {
        CHECK(p.probabilities[n] == doctest::Approx(std::exp(lg)).epsilon(1e-9));
        lg += std::log(a2) - std::log(n + 1.0);
    }

    CHECK_THROWS_AS(displaced_thermal_distribution(4.0, std::complex<double>(10.0, 0.0), 50),
                    NumericError);  // cutoff below the documented requirement
}

TEST_CASE("displaced thermal matches the dense density-operator oracle") {
    const double nth = 4.0, a2 = 110.0;
    const double alpha = std::sqrt(a2);
    const int cutoff = suggested_cutoff(nth, a2);
    auto dist = displaced_thermal_distribution(nth, alpha, cutoff);

    const auto oracle = oracles::displaced_thermal_diagonal(nth, alpha, 800, cutoff + 1);
    for (int n = 0; n <= cutoff; ++n)
        CHECK(std::abs(dist.probabilities[n] - oracle[n]) < 1e-8);

    // moments: mean = nth + |alpha|^2
    double mean = 0.0, mass = 0.0;
    for (int n = 0; n <= cutoff; ++n) {
        mean += n * dist.probabilities[n];
        mass += dist.probabilities[n];
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(mean == doctest::Approx(nth + a2).epsilon(1e-6));
    for (double p : dist.probabilities) CHECK(p >= 0.0);
    // the distribution is insensitive to the displacement phase
    auto rotated =
        displaced_thermal_distribution(nth, std::polar(alpha, 1.234), cutoff);
    for (int n = 0; n <= cutoff; n += 17)
        CHECK(rotated.probabilities[n] == doctest::Approx(dist.probabilities[n]).epsilon(1e-12));
}

TEST_CASE("carrier coupling basics") {
    CHECK(carrier_rabi_frequency(0, 0.3) == doctest::Approx(std::exp(-0.045)).epsilon(1e-12));
    for (int n : {0, 1, 5, 50, 400}) CHECK(carrier_rabi_frequency(n, 0.0) == 1.0);
    // example fit point: 6th-order series agrees to < 1e-3 relative
    const double exact = carrier_rabi_frequency(110, 0.077);
    const double series = carrier_rabi_series6(110, 0.077);
    CHECK(std::abs(series - exact) / std::abs(exact) < 1e-3);
}

TEST_CASE("sideband coupling closed forms and matrix-element oracle") {
    const double eta = 0.23;
    CHECK(sideband_coupling(1, 1, eta) ==
          doctest::Approx(eta * std::exp(-eta * eta / 2)).epsilon(1e-12));
    CHECK_THROWS_AS(sideband_coupling(0, 1, eta), NumericError);
    CHECK_THROWS_AS(sideband_coupling(3, 0, eta), ConfigError);

    // first-order coupling at eta = 0.23 changes sign somewhere in n <= 400
    bool crossed = false;
    double prev = sideband_coupling(1, 1, eta);
    for (int n = 2; n <= 400 && !crossed; ++n) {
        const double cur = sideband_coupling(n, 1, eta);
        crossed = (cur == 0.0) || (std::signbit(cur) != std::signbit(prev));
        prev = cur;
    }
    CHECK(crossed);

    // dense operator oracle over a spot grid (the acceptance suite runs the
    // full n <= 400 sweep)
    oracles::DisplacementOracle oracle(1000);
    for (double e : {0.077, 0.23, 0.3}) {
        for (int n : {1, 5, 30, 110, 230}) {
            CHECK(std::abs(std::abs(carrier_rabi_frequency(n, e)) - oracle.element_abs(n, n, e)) <
                  1e-8);
            for (int s : {1, 2, 3}) {
                if (n < s) continue;
                CHECK(std::abs(std::abs(sideband_coupling(n, s, e)) -
                               oracle.element_abs(n - s, n, e)) < 1e-8);
            }
        }
    }
}

namespace {

// Independent flop oracle: RK4 evolution of each Fock sector's two-level
// system, couplings taken from the dense displacement-operator oracle.
std::vector<double> flop_direct_sum(double nth, double eta, double rabi,
                                    const std::vector<double>& times, int n_states) {
    oracles::DisplacementOracle oracle(4 * n_states);
    const double r = nth / (1.0 + nth);
    std::vector<double> weights(n_states);
    double mass = 0.0;
    for (int n = 0; n < n_states; ++n) {
        weights[n] = std::pow(r, n) / (1.0 + nth);
        mass += weights[n];
    }

    std::vector<double> p(times.size(), 0.0);
    for (int n = 0; n < n_states; ++n) {
        const double omega = rabi * oracle.element_abs(n, n, eta);
        // i c' = (omega/2) sigma_x c, c(0) = (1, 0); integrate each output
        // interval with a fixed substep count so samples land exactly
        std::complex<double> cg{1.0, 0.0}, ce{0.0, 0.0};
        auto rhs = [omega](std::complex<double> g, std::complex<double> e, auto& dg, auto& de) {
            dg = std::complex<double>(0.0, -0.5 * omega) * e;
            de = std::complex<double>(0.0, -0.5 * omega) * g;
        };
        p[0] += weights[n] / mass * std::norm(ce);
        for (size_t i = 1; i < times.size(); ++i) {
            const int substeps = 4000;
            const double dt = (times[i] - times[i - 1]) / substeps;
            for (int k = 0; k < substeps; ++k) {
                std::complex<double> k1g, k1e, k2g, k2e, k3g, k3e, k4g, k4e;
                rhs(cg, ce, k1g, k1e);
                rhs(cg + 0.5 * dt * k1g, ce + 0.5 * dt * k1e, k2g, k2e);
                rhs(cg + 0.5 * dt * k2g, ce + 0.5 * dt * k2e, k3g, k3e);
                rhs(cg + dt * k3g, ce + dt * k3e, k4g, k4e);
                cg += dt / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
                ce += dt / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
            }
            p[i] += weights[n] / mass * std::norm(ce);
        }
    }
    return p;
}

} // namespace

TEST_CASE("ground-state flop with eta = 0 is a bare two-level Rabi oscillation") {
    ModeState ground;
    const double rabi = constants::two_pi * 50e3;
    std::vector<double> times;
    for (int i = 0; i <= 100; ++i) times.push_back(i * 40e-6 / 100);
    auto curve = simulate_carrier_flop(ground, 0.0, rabi, times, 9);
    CHECK(curve.excitation[0] == 0.0);
    for (size_t i = 0; i < times.size(); ++i) {
        CHECK(curve.excitation[i] ==
              doctest::Approx(0.5 * (1.0 - std::cos(rabi * times[i]))).epsilon(1e-9));
        CHECK(curve.excitation[i] >= 0.0);
        CHECK(curve.excitation[i] <= 1.0);
    }
}

TEST_CASE("thermal flop matches the direct-sum oracle to 1e-6") {
    ModeState state;
    state.n_thermal = 4.0;
    const double eta = 0.077;
    const double rabi = constants::two_pi * 50e3;
    std::vector<double> times;
    for (int i = 0; i <= 40; ++i) times.push_back(i * 100e-6 / 40);

    const int n_states = 200;
    auto curve = simulate_carrier_flop(state, eta, rabi, times, 9, {}, n_states - 1);
    auto oracle = flop_direct_sum(4.0, eta, rabi, times, n_states);
    for (size_t i = 0; i < times.size(); ++i)
        CHECK(std::abs(curve.excitation[i] - oracle[i]) < 1e-6);
}

namespace {

std::pair<double, double> first_flop_contrast(const RabiCurve& curve) {
    size_t imax = 0;
    for (size_t i = 1; i + 1 < curve.excitation.size(); ++i)
        if (curve.excitation[i] >= curve.excitation[i - 1] &&
            curve.excitation[i] >= curve.excitation[i + 1] && curve.excitation[i] > 0.1) {
            imax = i;
            break;
        }
    size_t imin = imax;
    for (size_t i = imax + 1; i + 1 < curve.excitation.size(); ++i)
        if (curve.excitation[i] <= curve.excitation[i - 1] &&
            curve.excitation[i] <= curve.excitation[i + 1]) {
            imin = i;
            break;
        }
    return {curve.excitation[imax] - curve.excitation[imin], curve.times[imax]};
}

} // namespace

TEST_CASE("coherent excitation collapses the carrier flop") {
    const double rabi = constants::two_pi * 50e3;
    const double eta = 0.077;
    std::vector<double> times;
    for (int i = 0; i <= 3000; ++i) times.push_back(i * 120e-6 / 3000);

    ModeState cooled;
    cooled.n_thermal = 4.0;
    auto quiet = simulate_carrier_flop(cooled, eta, rabi, times, 9);
    CHECK(first_flop_contrast(quiet).first > 0.9);

    ModeState shuttled;
    shuttled.n_thermal = 4.0;
    shuttled.alpha = std::sqrt(110.0);
    auto hot = simulate_carrier_flop(shuttled, eta, rabi, times, 9);
    CHECK(first_flop_contrast(hot).first < 0.6);

    // per-ion Rabi spread damps contrast further
    std::vector<double> profile(9, rabi);
    profile[0] = 0.9 * rabi;
    profile[8] = 0.9 * rabi;
    auto uneven = simulate_carrier_flop(cooled, eta, rabi, times, 9, profile);
    CHECK(first_flop_contrast(uneven).first < first_flop_contrast(quiet).first);
}

TEST_CASE("multimode flop reduces to the single-mode curve for one mode") {
    ModeState com;
    com.n_thermal = 2.0;
    const double eta = 0.08;
    const double rabi = constants::two_pi * 50e3;
    std::vector<double> times;
    for (int i = 0; i <= 50; ++i) times.push_back(i * 60e-6 / 50);

    std::vector<std::pair<ModeState, double>> modes{{com, eta}};
    auto multi = simulate_carrier_flop_multimode(modes, rabi, times);
    auto single = simulate_carrier_flop(com, eta, rabi, times, 9);
    for (size_t i = 0; i < times.size(); ++i)
        CHECK(multi.excitation[i] == doctest::Approx(single.excitation[i]).epsilon(1e-6));

    // a decoupled (eta = 0) spectator mode leaves the curve unchanged
    ModeState ground;
    modes.push_back({ground, 0.0});
    auto with_spectator = simulate_carrier_flop_multimode(modes, rabi, times);
    for (size_t i = 0; i < times.size(); ++i)
        CHECK(with_spectator.excitation[i] == doctest::Approx(single.excitation[i]).epsilon(1e-9));

    // a hot second mode visibly modifies the dephasing
    ModeState hot;
    hot.n_thermal = 6.0;
    modes.back() = {hot, 0.15};
    auto two_mode = simulate_carrier_flop_multimode(modes, rabi, times);
    double diff = 0.0;
    for (size_t i = 0; i < times.size(); ++i)
        diff = std::max(diff, std::abs(two_mode.excitation[i] - single.excitation[i]));
    CHECK(diff > 1e-3);
}

TEST_CASE("Doppler limit formula") {
    CHECK(doppler_limit(constants::two_pi * 21.6e6, constants::two_pi * 179e3) ==
          doctest::Approx(60.335).epsilon(1e-3));
    CHECK(doppler_limit(2.0, 1.0) == doctest::Approx(2.0 * doppler_limit(1.0, 1.0)));
    CHECK(doppler_limit(1.0, 1e9) < 1e-9);
    CHECK_THROWS_AS(doppler_limit(-1.0, 1.0), ConfigError);
}

TEST_CASE("heating adds quanta linearly and composably") {
    MotionalState state;
    state.modes.resize(2);
    state.modes[0].heating_rate = 20e3;  // 20 quanta/ms
    state.modes[1].heating_rate = 5e3;

    auto same = apply_heating(state, 0.0);
    CHECK(same.modes[0].n_thermal == 0.0);

    auto heated = apply_heating(state, 1e-3);
    CHECK(heated.modes[0].n_thermal == doctest::Approx(20.0));
    CHECK(heated.modes[1].n_thermal == doctest::Approx(5.0));
    CHECK(heated.modes[0].alpha == state.modes[0].alpha);

    auto a_then_b = apply_heating(apply_heating(state, 0.3e-3), 0.7e-3);
    auto once = apply_heating(state, 1.0e-3);
    CHECK(a_then_b.modes[0].n_thermal == doctest::Approx(once.modes[0].n_thermal));
}

TEST_CASE("sideband spectrum: line bookkeeping and thermal asymmetry") {
    chain::ChainConfig c;
    c.n_ions = 9;
    auto modes = chain::normal_modes(chain::equilibrium_positions(c));
    auto table = chain::lamb_dicke_table(modes, 729e-9, 1.0);

    MotionalState state;
    state.modes.resize(9);
    state.modes[0].n_thermal = 4.0;  // COM warm
    for (int m = 1; m < 9; ++m) state.modes[m].n_thermal = 0.5;

    auto spectrum = sideband_spectrum(modes, state, table);
    REQUIRE(spectrum.lines.size() == 19);  // carrier + 9 red + 9 blue

    // line positions are the mode frequencies
    for (const auto& line : spectrum.lines) {
        if (line.order == 0) {
            CHECK(line.detuning == 0.0);
            CHECK(line.relative_strength == doctest::Approx(1.0));
            continue;
        }
        bool found = false;
        for (double f : modes.frequencies)
            if (std::abs(std::abs(line.detuning) - f) < 1e-6 * f) found = true;
        CHECK(found);
    }

    // red/blue ratio = n / (n + 1) for each thermal mode
    for (int m = 0; m < 9; ++m) {
        double red = 0.0, blue = 0.0;
        for (const auto& line : spectrum.lines) {
            if (std::abs(std::abs(line.detuning) - modes.frequencies[m]) < 1e-6 * modes.frequencies[m]) {
                (line.order < 0 ? red : blue) = line.relative_strength;
            }
        }
        const double nbar = state.modes[m].n_thermal;
        CHECK(red / blue == doctest::Approx(nbar / (nbar + 1.0)).epsilon(1e-4));
    }

    // ground-state mode: red sideband vanishes
    MotionalState frozen;
    frozen.modes.resize(9);
    auto cold = sideband_spectrum(modes, frozen, table);
    for (const auto& line : cold.lines)
        if (line.order < 0) CHECK(line.relative_strength == 0.0);
}
