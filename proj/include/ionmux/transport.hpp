#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ionmux/chain.hpp"
#include "ionmux/waveform.hpp"

namespace ionmux::transport {

/// Instantaneous trap parameters seen by the chain.
struct PotentialPoint {
    double center = 0.0;  // m
    double omega = 0.0;   // rad/s
};

/// Time-dependent axial potential: harmonic well of frequency omega(t)
/// centered at center(t), with an optional quartic distortion
/// U = (m w^2 / 2) [(x-c)^2 + b (x-c)^4].
struct PotentialTrajectory {
    std::function<PotentialPoint(double)> at;
    double duration = 0.0;   // s
    double quartic_b = 0.0;  // 1/m^2
};

/// Center-motion plan in physical units: the analytic counterpart of a
/// sampled voltage schedule. Steps are quintic smooth moves separated by
/// static dwells, optionally followed by a single return ramp and a static
/// readout window.
struct TransportPlan {
    std::vector<double> step_displacements;  // m
    double step_time = 0.0;
    double dwell_time = 0.0;
    double pre_dwell = 0.0;
    double return_time = 0.0;
    double readout_time = 0.0;
    bool include_return = false;

    double forward_duration() const;  // steps + inter-step dwells
    double duration() const;
    double center_at(double t) const;
    double center_velocity_at(double t) const;

    /// Constant-frequency potential for this plan.
    PotentialTrajectory potential(double omega, double quartic_b = 0.0) const;

    /// Same displacements with step/dwell/pre-dwell durations scaled so the
    /// forward duration equals total_forward.
    TransportPlan scaled_to_forward(double total_forward) const;
};

/// Build the center-motion plan implied by a voltage schedule and the trap
/// calibration.
TransportPlan plan_from_schedule(const waveform::StepSchedule& schedule,
                                 const waveform::TrapCalibration& calibration,
                                 bool include_return);

/// Potential from a sampled (center, omega) series via monotone cubic
/// interpolation, for filtered or measured waveforms.
PotentialTrajectory potential_from_series(const waveform::PotentialSeries& series,
                                          double quartic_b = 0.0);

struct IntegratorOptions {
    enum class Method { adaptive, leapfrog };
    Method method = Method::adaptive;
    double rel_tol = 1e-10;   // adaptive
    double abs_tol = 1e-12;   // adaptive, in scaled units
    double fixed_step = 0.0;  // s, leapfrog; 0 = trap period / 2000
    int n_samples = 2001;     // dense-output grid size
    long max_steps = 50'000'000;
};

struct TrajectoryResult {
    std::vector<double> times;   // s
    Eigen::MatrixXd positions;   // (ion, sample), m
    Eigen::MatrixXd velocities;  // (ion, sample), m/s
    double final_center = 0.0;   // m
    double final_omega = 0.0;    // rad/s
};

struct ModeExcitation {
    std::vector<std::complex<double>> alpha;  // per mode
    std::vector<double> n_alpha;              // |alpha|^2
};

struct SweepPoint {
    double total_time = 0.0;   // s, forward duration
    double omega = 0.0;        // rad/s
    double com_n_alpha = 0.0;
};
using SweepResult = std::vector<SweepPoint>;

/// Integrate the classical equations of motion of the chain through the
/// potential. Initial condition defaults to the equilibrium of the t=0
/// potential at rest. Throws NumericError on ion crossing ("chain melted")
/// or step starvation.
TrajectoryResult simulate_transport(
    const chain::ChainConfig& config, const PotentialTrajectory& potential,
    const IntegratorOptions& opts = {},
    const std::optional<std::pair<std::vector<double>, std::vector<double>>>& initial_state =
        std::nullopt);

/// Project the final displacements and velocities onto the normal modes of
/// the final (static) potential and form per-mode coherent amplitudes.
/// `modes` must describe the final potential.
ModeExcitation mode_excitations(const TrajectoryResult& traj, const chain::NormalModeSet& modes,
                                const chain::ChainConfig& config);

/// One transport + mode extraction per (total_time, omega) grid point;
/// evaluations may run on several threads, results are ordered by grid
/// index regardless.
SweepResult sweep_transport_time(const chain::ChainConfig& config, const TransportPlan& plan,
                                 std::span<const double> omegas,
                                 std::span<const double> total_times,
                                 const IntegratorOptions& opts = {}, int threads = 1);

struct OptimizeResult {
    std::vector<double> params;
    double objective = 0.0;
    long evaluations = 0;
};

/// Derivative-free bounded minimization (multi-start compass search). The
/// initial point is always evaluated first, so the result is never worse
/// than it. Throws NumericError if every evaluation failed.
OptimizeResult optimize_ramp(const std::function<double(std::span<const double>)>& objective,
                             std::span<const double> initial,
                             std::span<const std::pair<double, double>> bounds, long budget,
                             std::uint64_t seed = 0, int multistarts = 1);

/// CSV exports: "time_s,x1,...,xN" and "total_time_s,omega_rad_s,com_n_alpha".
void write_trajectory_csv(std::ostream& os, const TrajectoryResult& traj);
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);

} // namespace ionmux::transport
