#include "ionmux/transport.hpp"

#include <algorithm>
#include <atomic>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <ostream>
#include <thread>

#include "ionmux/csv.hpp"
#include "ionmux/errors.hpp"

namespace ionmux::transport {

namespace {

double quintic_velocity_shape(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double u = 1.0 - s;
    return 30.0 * s * s * u * u;
}

} // namespace

double TransportPlan::forward_duration() const {
    return step_displacements.size() * (step_time + dwell_time);
}

double TransportPlan::duration() const {
    return pre_dwell + forward_duration() + (include_return ? return_time : 0.0) + readout_time;
}

double TransportPlan::center_at(double t) const {
    double tt = t - pre_dwell;
    if (tt <= 0.0) return 0.0;
    const double per = step_time + dwell_time;
    const size_t n = step_displacements.size();
    double c = 0.0;
    size_t k = std::min(static_cast<size_t>(tt / per), n);
    for (size_t i = 0; i < k; ++i) c += step_displacements[i];
    if (k < n) {
        const double tau = tt - k * per;
        c += step_displacements[k] * waveform::quintic_shape(tau / step_time);
        return c;
    }
    if (!include_return) return c;
    const double t_ret = tt - n * per;
    if (t_ret <= 0.0) return c;
    if (t_ret >= return_time) return 0.0;
    return c * (1.0 - waveform::quintic_shape(t_ret / return_time));
}

double TransportPlan::center_velocity_at(double t) const {
    double tt = t - pre_dwell;
    if (tt <= 0.0) return 0.0;
    const double per = step_time + dwell_time;
    const size_t n = step_displacements.size();
    const size_t k = std::min(static_cast<size_t>(tt / per), n);
    if (k < n) {
        const double tau = tt - k * per;
        if (tau >= step_time) return 0.0;
        return step_displacements[k] * quintic_velocity_shape(tau / step_time) / step_time;
    }
    if (!include_return) return 0.0;
    const double t_ret = tt - n * per;
    if (t_ret <= 0.0 || t_ret >= return_time) return 0.0;
    double total = 0.0;
    for (double d : step_displacements) total += d;
    return -total * quintic_velocity_shape(t_ret / return_time) / return_time;
}

PotentialTrajectory TransportPlan::potential(double omega, double quartic_b) const {
    TransportPlan plan = *this;
    return {[plan, omega](double t) { return PotentialPoint{plan.center_at(t), omega}; },
            duration(), quartic_b};
}

TransportPlan TransportPlan::scaled_to_forward(double total_forward) const {
    if (total_forward <= 0)
        throw ConfigError("scaled_to_forward: total forward time must be positive");
    TransportPlan out = *this;
    const double factor = total_forward / forward_duration();
    out.step_time *= factor;
    out.dwell_time *= factor;
    out.pre_dwell *= factor;
    return out;
}

TransportPlan plan_from_schedule(const waveform::StepSchedule& schedule,
                                 const waveform::TrapCalibration& calibration,
                                 bool include_return) {
    if (!schedule.valid())
        throw ConfigError("plan_from_schedule: invalid schedule");
    TransportPlan plan;
    plan.step_displacements.reserve(schedule.step_delta_v.size());
    for (double dv : schedule.step_delta_v)
        plan.step_displacements.push_back(dv * calibration.center_slope);
    plan.step_time = schedule.step_time;
    plan.dwell_time = schedule.dwell_times.empty() ? 0.0 : schedule.dwell_times.front();
    plan.pre_dwell = schedule.pre_dwell;
    plan.return_time = schedule.return_time;
    plan.readout_time = schedule.readout_time;
    plan.include_return = include_return;
    return plan;
}

PotentialTrajectory potential_from_series(const waveform::PotentialSeries& series,
                                          double quartic_b) {
    if (series.center.size() < 2 || series.sample_period <= 0)
        throw ConfigError("potential_from_series: need at least two samples");
    const auto n = series.center.size();
    const double h = series.sample_period;

    // centered-difference slopes for cubic Hermite interpolation
    auto slopes = [h](const std::vector<double>& y) {
        std::vector<double> m(y.size());
        for (size_t i = 1; i + 1 < y.size(); ++i) m[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
        m.front() = (y[1] - y[0]) / h;
        m.back() = (y[y.size() - 1] - y[y.size() - 2]) / h;
        return m;
    };
    auto mc = slopes(series.center);
    auto mw = slopes(series.omega);
    auto eval = [h](const std::vector<double>& y, const std::vector<double>& m, double t) {
        if (t <= 0.0) return y.front();
        const size_t last = y.size() - 1;
        if (t >= last * h) return y.back();
        const size_t k = static_cast<size_t>(t / h);
        const double s = (t - k * h) / h;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * y[k] + (s3 - 2 * s2 + s) * h * m[k] +
               (-2 * s3 + 3 * s2) * y[k + 1] + (s3 - s2) * h * m[k + 1];
    };

    const double duration = (n - 1) * h;
    auto center = series.center;
    auto omega = series.omega;
    return {[center, omega, mc, mw, eval](double t) {
                return PotentialPoint{eval(center, mc, t), eval(omega, mw, t)};
            },
            duration, quartic_b};
}

namespace {

// Right-hand side of the scaled equations of motion. Positions are in units
// of the chain length scale, time in units of 1/omega_ref.
struct ScaledRhs {
    const PotentialTrajectory* potential;
    double omega_ref;
    double ell;
    double quartic_b_scaled;
    int n;

    void operator()(const std::vector<double>& y, std::vector<double>& dydt, double tau) const {
        const PotentialPoint p = potential->at(tau / omega_ref);
        const double w = p.omega / omega_ref;
        const double w2 = w * w;
        const double c = p.center / ell;
        for (int i = 0; i < n; ++i) {
            dydt[i] = y[n + i];
            const double d = y[i] - c;
            double a = -w2 * d * (1.0 + 2.0 * quartic_b_scaled * d * d);
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double r = y[i] - y[j];
                a += (r > 0 ? 1.0 : -1.0) / (r * r);
            }
            dydt[n + i] = a;
        }
    }
};

void check_not_melted(const std::vector<double>& y, int n) {
    for (int i = 0; i + 1 < n; ++i) {
        if (y[i + 1] - y[i] < 0.05)
            throw NumericError("simulate_transport: chain melted (adjacent ions closer than 0.05 length units)");
    }
}

} // namespace

TrajectoryResult simulate_transport(
    const chain::ChainConfig& config, const PotentialTrajectory& potential,
    const IntegratorOptions& opts,
    const std::optional<std::pair<std::vector<double>, std::vector<double>>>& initial_state) {
    if (!config.valid())
        throw ConfigError("simulate_transport: invalid chain configuration");
    if (!(potential.duration > 0) || !potential.at)
        throw ConfigError("simulate_transport: potential trajectory is empty");
    if (opts.n_samples < 2)
        throw ConfigError("simulate_transport: need at least two samples");

    const int n = config.n_ions;
    const PotentialPoint p0 = potential.at(0.0);
    const double omega_ref = p0.omega;
    if (!(omega_ref > 0))
        throw ConfigError("simulate_transport: initial trap frequency must be positive");

    chain::ChainConfig ref = config;
    ref.axial_freq = omega_ref;
    const double ell = ref.length_scale();

    std::vector<double> y(2 * n, 0.0);
    if (initial_state) {
        if (static_cast<int>(initial_state->first.size()) != n ||
            static_cast<int>(initial_state->second.size()) != n)
            throw ConfigError("simulate_transport: initial state size mismatch");
        for (int i = 0; i < n; ++i) {
            y[i] = initial_state->first[i] / ell;
            y[n + i] = initial_state->second[i] / (ell * omega_ref);
        }
    } else {
        const auto eq = chain::equilibrium_positions(ref, p0.center);
        for (int i = 0; i < n; ++i) y[i] = eq.positions[i] / ell;
    }

    const ScaledRhs rhs{&potential, omega_ref, ell, potential.quartic_b * ell * ell, n};
    const double tau_end = potential.duration * omega_ref;

    TrajectoryResult result;
    result.times.resize(opts.n_samples);
    result.positions.resize(n, opts.n_samples);
    result.velocities.resize(n, opts.n_samples);
    for (int s = 0; s < opts.n_samples; ++s)
        result.times[s] = potential.duration * s / (opts.n_samples - 1);

    auto store_sample = [&](int s, const std::vector<double>& state) {
        for (int i = 0; i < n; ++i) {
            result.positions(i, s) = state[i] * ell;
            result.velocities(i, s) = state[n + i] * ell * omega_ref;
        }
    };

    if (opts.method == IntegratorOptions::Method::adaptive) {
        namespace ode = boost::numeric::odeint;
        auto stepper = ode::make_dense_output(opts.abs_tol, opts.rel_tol,
                                              ode::runge_kutta_dopri5<std::vector<double>>());
        stepper.initialize(y, 0.0, 1e-3);
        store_sample(0, y);
        int next_sample = 1;
        std::vector<double> interp(2 * n);
        long steps = 0;
        while (stepper.current_time() < tau_end) {
            if (++steps > opts.max_steps)
                throw NumericError("simulate_transport: step limit exceeded (step-size underflow?)");
            stepper.do_step(rhs);
            check_not_melted(stepper.current_state(), n);
            while (next_sample < opts.n_samples &&
                   result.times[next_sample] * omega_ref <= stepper.current_time()) {
                stepper.calc_state(result.times[next_sample] * omega_ref, interp);
                store_sample(next_sample, interp);
                ++next_sample;
            }
        }
        // the last dense-output interval covers tau_end
        while (next_sample < opts.n_samples) {
            stepper.calc_state(std::min(result.times[next_sample] * omega_ref, tau_end), interp);
            store_sample(next_sample, interp);
            ++next_sample;
        }
    } else {
        const double dt_req = opts.fixed_step > 0 ? opts.fixed_step * omega_ref
                                                  : constants::two_pi / 2000.0;
        const long per_sample = std::max<long>(
            1, static_cast<long>(std::ceil(tau_end / ((opts.n_samples - 1) * dt_req))));
        const double dt = tau_end / ((opts.n_samples - 1) * static_cast<double>(per_sample));
        std::vector<double> dydt(2 * n);
        rhs(y, dydt, 0.0);
        store_sample(0, y);
        double tau = 0.0;
        for (int s = 1; s < opts.n_samples; ++s) {
            for (long k = 0; k < per_sample; ++k) {
                // velocity Verlet
                for (int i = 0; i < n; ++i)
                    y[i] += dt * y[n + i] + 0.5 * dt * dt * dydt[n + i];
                std::vector<double> a_new(2 * n);
                rhs(y, a_new, tau + dt);
                for (int i = 0; i < n; ++i)
                    y[n + i] += 0.5 * dt * (dydt[n + i] + a_new[n + i]);
                dydt = a_new;
                tau += dt;
                check_not_melted(y, n);
            }
            store_sample(s, y);
        }
    }

    const PotentialPoint pf = potential.at(potential.duration);
    result.final_center = pf.center;
    result.final_omega = pf.omega;

    if (!result.positions.allFinite() || !result.velocities.allFinite())
        throw NumericError("simulate_transport: non-finite state encountered");
    return result;
}

ModeExcitation mode_excitations(const TrajectoryResult& traj, const chain::NormalModeSet& modes,
                                const chain::ChainConfig& config) {
    const int n = config.n_ions;
    if (static_cast<int>(modes.frequencies.size()) != n || traj.positions.rows() != n)
        throw ConfigError("mode_excitations: dimension mismatch");
    if (std::abs(modes.config.axial_freq - traj.final_omega) >
        1e-9 * std::max(1.0, traj.final_omega))
        throw ConfigError("mode_excitations: modes were not computed for the final potential");

    chain::ChainConfig final_config = config;
    final_config.axial_freq = traj.final_omega;
    const auto eq = chain::equilibrium_positions(final_config, traj.final_center);

    const int last = static_cast<int>(traj.positions.cols()) - 1;
    const double mass = config.ion_mass;
    ModeExcitation exc;
    exc.alpha.resize(n);
    exc.n_alpha.resize(n);
    for (int m = 0; m < n; ++m) {
        double q = 0.0, p = 0.0;
        for (int i = 0; i < n; ++i) {
            q += modes.eigenvectors(m, i) * (traj.positions(i, last) - eq.positions[i]);
            p += modes.eigenvectors(m, i) * traj.velocities(i, last);
        }
        p *= mass;
        const double wm = modes.frequencies[m];
        exc.alpha[m] = {std::sqrt(mass * wm / (2.0 * constants::hbar)) * q,
                        p / std::sqrt(2.0 * mass * constants::hbar * wm)};
        exc.n_alpha[m] = std::norm(exc.alpha[m]);
    }
    return exc;
}

SweepResult sweep_transport_time(const chain::ChainConfig& config, const TransportPlan& plan,
                                 std::span<const double> omegas,
                                 std::span<const double> total_times,
                                 const IntegratorOptions& opts, int threads) {
    if (omegas.empty() || total_times.empty())
        throw ConfigError("sweep_transport_time: grids must be non-empty");

    // per-omega mode sets (the potential is frequency-constant within a run)
    std::vector<chain::NormalModeSet> mode_sets;
    mode_sets.reserve(omegas.size());
    for (double w : omegas) {
        chain::ChainConfig c = config;
        c.axial_freq = w;
        mode_sets.push_back(chain::normal_modes(chain::equilibrium_positions(c)));
    }

    SweepResult result(omegas.size() * total_times.size());
    std::atomic<size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            const size_t idx = cursor.fetch_add(1);
            if (idx >= result.size() || failed.load()) break;
            const size_t iw = idx / total_times.size();
            const size_t it = idx % total_times.size();
            try {
                const TransportPlan scaled = plan.scaled_to_forward(total_times[it]);
                const auto traj =
                    simulate_transport(config, scaled.potential(omegas[iw]), opts);
                const auto exc = mode_excitations(traj, mode_sets[iw], config);
                result[idx] = {total_times[it], omegas[iw], exc.n_alpha[0]};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };

    const int n_threads = std::max(1, threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load())
        throw NumericError("sweep_transport_time: " + first_error);
    return result;
}

OptimizeResult optimize_ramp(const std::function<double(std::span<const double>)>& objective,
                             std::span<const double> initial,
                             std::span<const std::pair<double, double>> bounds, long budget,
                             std::uint64_t seed, int multistarts) {
    const size_t dim = initial.size();
    if (dim == 0 || bounds.size() != dim)
        throw ConfigError("optimize_ramp: bounds must match the parameter count");
    for (const auto& [lo, hi] : bounds)
        if (!(lo < hi))
            throw ConfigError("optimize_ramp: each bound must satisfy lo < hi");
    if (budget < 1)
        throw ConfigError("optimize_ramp: budget must be >= 1");

    long evals = 0;
    long ok_evals = 0;
    auto eval = [&](std::span<const double> x) {
        ++evals;
        try {
            const double f = objective(x);
            if (std::isfinite(f)) {
                ++ok_evals;
                return f;
            }
        } catch (const std::exception&) {
        }
        return std::numeric_limits<double>::infinity();
    };

    std::vector<double> best(initial.begin(), initial.end());
    double best_f = eval(best);

    std::mt19937_64 rng(seed);
    auto u01 = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };

    // deterministic coarse lattice to seed the search in the right basin;
    // the first compass stage then refines with lattice-cell-sized steps
    double seed_cell = 0.0;  // as a fraction of each range; 0 = no lattice ran
    if (dim <= 4 && budget > 16) {
        long k = std::lround(std::floor(std::pow(static_cast<double>(budget) / 2.0, 1.0 / dim)));
        k = std::clamp(k, 3l, 16l);
        seed_cell = 1.0 / static_cast<double>(k);
        std::vector<long> idx(dim, 0);
        while (true) {
            std::vector<double> x(dim);
            for (size_t j = 0; j < dim; ++j)
                x[j] = bounds[j].first +
                       (idx[j] + 0.5) * (bounds[j].second - bounds[j].first) / k;
            const double fx = eval(x);
            if (fx < best_f) {
                best = x;
                best_f = fx;
            }
            size_t carry = 0;
            while (carry < dim && ++idx[carry] == k) idx[carry++] = 0;
            if (carry == dim || evals >= budget) break;
        }
    }

    const int starts = std::max(1, multistarts);
    // Latin-hypercube strata for the random restarts
    std::vector<std::vector<int>> strata(dim, std::vector<int>(std::max(starts - 1, 1)));
    for (size_t j = 0; j < dim; ++j) {
        for (int s = 0; s + 1 < starts; ++s) strata[j][s] = s;
        for (int s = starts - 2; s > 0; --s)
            std::swap(strata[j][s], strata[j][static_cast<int>(u01() * (s + 1))]);
    }
    for (int s = 0; s < starts && evals < budget; ++s) {
        std::vector<double> x;
        double fx;
        if (s == 0) {  // refine the best seed found so far
            x = best;
            fx = best_f;
        } else {
            x.resize(dim);
            for (size_t j = 0; j < dim; ++j) {
                const double cell = (strata[j][s - 1] + u01()) / (starts - 1);
                x[j] = bounds[j].first + cell * (bounds[j].second - bounds[j].first);
            }
            fx = eval(x);
        }
        if (fx < best_f) {
            best = x;
            best_f = fx;
        }

        std::vector<double> step(dim);
        const double frac = (s == 0 && seed_cell > 0.0) ? 0.75 * seed_cell : 0.25;
        for (size_t j = 0; j < dim; ++j) step[j] = frac * (bounds[j].second - bounds[j].first);

        while (evals < budget) {
            bool improved = false;
            for (size_t j = 0; j < dim && evals < budget; ++j) {
                for (double dir : {+1.0, -1.0}) {
                    if (evals >= budget) break;
                    std::vector<double> cand = x;
                    cand[j] = std::clamp(cand[j] + dir * step[j], bounds[j].first, bounds[j].second);
                    if (cand[j] == x[j]) continue;
                    const double fc = eval(cand);
                    if (fc < fx) {
                        x = cand;
                        fx = fc;
                        improved = true;
                    }
                }
            }
            if (!improved) {
                double max_rel = 0.0;
                for (size_t j = 0; j < dim; ++j) {
                    step[j] *= 0.5;
                    max_rel = std::max(max_rel, step[j] / (bounds[j].second - bounds[j].first));
                }
                if (max_rel < 1e-9) break;
            }
            if (fx < best_f) {
                best = x;
                best_f = fx;
            }
        }
        if (fx < best_f) {
            best = x;
            best_f = fx;
        }
    }

    if (ok_evals == 0)
        throw NumericError("optimize_ramp: every objective evaluation failed");
    return {best, best_f, evals};
}

void write_trajectory_csv(std::ostream& os, const TrajectoryResult& traj) {
    os << "time_s";
    for (int i = 0; i < traj.positions.rows(); ++i) os << ",x" << (i + 1);
    os << '\n';
    for (size_t s = 0; s < traj.times.size(); ++s) {
        os << csv::format_sci(traj.times[s]);
        for (int i = 0; i < traj.positions.rows(); ++i)
            os << ',' << csv::format_sci(traj.positions(i, static_cast<int>(s)));
        os << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
    os << "total_time_s,omega_rad_s,com_n_alpha\n";
    for (const auto& p : sweep)
        os << csv::format_sci(p.total_time) << ',' << csv::format_sci(p.omega) << ','
           << csv::format_sci(p.com_n_alpha) << '\n';
}

} // namespace ionmux::transport
