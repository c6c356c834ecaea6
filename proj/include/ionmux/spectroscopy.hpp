#pragma once

#include <complex>
#include <span>
#include <vector>

#include "ionmux/chain.hpp"

namespace ionmux::spectroscopy {

/// Phonon-number distribution over n = 0..cutoff. Probabilities are the
/// un-renormalized state populations; the truncated mass is reported.
struct PhononDistribution {
    std::vector<double> probabilities;
    int cutoff = 0;
    double tail_mass = 0.0;
};

/// Occupation of a single motional mode.
struct ModeState {
    double n_thermal = 0.0;
    std::complex<double> alpha{0.0, 0.0};
    double heating_rate = 0.0;  // quanta/s

    double n_alpha() const { return std::norm(alpha); }
};

/// Per-mode motional state of the chain.
struct MotionalState {
    std::vector<ModeState> modes;
};

/// Mean upper-state population versus probe time.
struct RabiCurve {
    std::vector<double> times;       // s
    std::vector<double> excitation;  // in [0, 1]
};

struct SidebandLine {
    double detuning = 0.0;          // rad/s from carrier
    int order = 0;                  // -1 red, 0 carrier, +1 blue
    double relative_strength = 0.0; // carrier = 1
};

struct SidebandTable {
    std::vector<SidebandLine> lines;
};

/// Boltzmann (geometric) distribution with mean n_bar, truncated at cutoff.
/// Throws if the truncated tail mass exceeds 1e-6.
PhononDistribution thermal_distribution(double n_bar, int cutoff);

/// Cutoff that keeps the displaced-thermal tail negligible:
/// |alpha|^2 + n_th + 8 sqrt((2 n_th + 1)|alpha|^2 + n_th^2 + n_th).
int suggested_cutoff(double n_thermal, double alpha_sq);

/// Number distribution of a displaced thermal state (closed-form Laguerre
/// expression, evaluated in the log domain). alpha = 0 reduces to thermal,
/// n_thermal = 0 to Poisson.
PhononDistribution displaced_thermal_distribution(double n_thermal, std::complex<double> alpha,
                                                  int cutoff);

/// Carrier coupling ratio Omega_nn / Omega = exp(-eta^2/2) L_n(eta^2).
double carrier_rabi_frequency(int n, double eta);

/// 6th-order small-eta expansion of the carrier coupling ratio.
double carrier_rabi_series6(int n, double eta);

/// s-th order red-sideband coupling ratio
/// exp(-eta^2/2) eta^s sqrt((n-s)!/n!) L_{n-s}^{(s)}(eta^2). Requires n >= s >= 1.
double sideband_coupling(int n, int s, double eta);

/// Carrier Rabi flop of the chain, COM mode only:
/// P_e(t) = (1/2)[1 - sum_n P_n cos(Omega_nn t)], averaged over ions when a
/// per-ion Rabi profile is given. The cosine sum is taken over the
/// truncated distribution conditioned on n <= cutoff so P_e(0) = 0 exactly.
RabiCurve simulate_carrier_flop(const ModeState& com, double eta_eff, double rabi,
                                std::span<const double> times, int n_ions,
                                std::span<const double> per_ion_rabi = {}, int cutoff = 0);

/// Multi-mode variant: joint product of per-mode Laguerre factors. The
/// first entry is the dominant mode and keeps its full cutoff; the others
/// are capped at 30 quanta. Joint states below a 1e-10 probability are
/// pruned.
RabiCurve simulate_carrier_flop_multimode(std::span<const std::pair<ModeState, double>> modes,
                                          double rabi, std::span<const double> times);

/// Two-level optimal-detuning Doppler limit n = gamma / (2 omega).
double doppler_limit(double gamma, double omega);

/// Add heating_rate x duration quanta of thermal occupation per mode.
MotionalState apply_heating(MotionalState state, double duration);

/// First-order sideband lines around the carrier for every mode, strengths
/// thermally averaged over the mode states and over the ions, relative to
/// the carrier line.
SidebandTable sideband_spectrum(const chain::NormalModeSet& modes, const MotionalState& state,
                                const chain::LambDickeTable& eta_table);

/// CSV exports.
void write_rabi_csv(std::ostream& os, const RabiCurve& curve);
void write_sideband_csv(std::ostream& os, const SidebandTable& table);

} // namespace ionmux::spectroscopy
