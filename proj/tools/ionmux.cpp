// Command-line front end: one subcommand per analysis workflow, all driven
// by a single declarative config file. Outputs are CSV artifacts plus a
// summary.json carrying the resolved-config digest for provenance.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ionmux/chain.hpp"
#include "ionmux/config.hpp"
#include "ionmux/constants.hpp"
#include "ionmux/csv.hpp"
#include "ionmux/errors.hpp"
#include "ionmux/photonics.hpp"
#include "ionmux/spectroscopy.hpp"
#include "ionmux/timetags.hpp"
#include "ionmux/transport.hpp"
#include "ionmux/waveform.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ionmux;

namespace {

struct RunContext {
    config::RunConfig cfg;
    std::string out_dir = ".";
    std::string input_path;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string format = "csv";
    std::string digest;

    json artifacts = json::object();
    json results = json::object();
};

chain::ChainConfig chain_from(const config::RunConfig& cfg) {
    chain::ChainConfig c;
    c.n_ions = cfg.n_ions;
    c.ion_mass = cfg.ion_mass_amu * constants::atomic_mass_unit;
    c.axial_freq = constants::two_pi * cfg.axial_freq_hz;
    c.charge = cfg.charge_e * constants::elementary_charge;
    return c;
}

waveform::TrapCalibration calibration_from(const config::RunConfig& cfg) {
    waveform::TrapCalibration cal;
    cal.center_slope = cfg.center_slope_m_per_v;
    cal.base_voltage = cfg.base_voltage_v;
    cal.v_base1 = cfg.v_dc1_v;
    cal.omega0 = constants::two_pi * cfg.axial_freq_hz;
    cal.freq_slope = constants::two_pi * cfg.freq_slope_hz_per_v;
    return cal;
}

waveform::ScheduleTimings timings_from(const config::RunConfig& cfg) {
    waveform::ScheduleTimings t;
    t.step_time = cfg.step_time_s;
    t.dwell_time = cfg.dwell_time_s;
    t.return_time = cfg.return_time_s;
    t.pump_duration = cfg.pump_time_s;
    t.cooling_duration = cfg.cooling_time_s;
    t.readout_time = cfg.readout_time_s;
    t.repeats_per_cooling = cfg.repeats_per_cooling;
    return t;
}

waveform::StepSchedule schedule_from(const config::RunConfig& cfg) {
    const auto eq = chain::equilibrium_positions(chain_from(cfg));
    if (cfg.n_ions < 2)
        throw ConfigError("this workflow needs at least two ions to derive spacings");
    return waveform::build_schedule(chain::chain_spacings(eq), calibration_from(cfg),
                                    timings_from(cfg));
}

transport::IntegratorOptions integrator_from(const config::RunConfig& cfg) {
    transport::IntegratorOptions opts;
    opts.method = cfg.integrator == "leapfrog" ? transport::IntegratorOptions::Method::leapfrog
                                               : transport::IntegratorOptions::Method::adaptive;
    opts.rel_tol = cfg.rel_tol;
    opts.abs_tol = cfg.abs_tol;
    opts.fixed_step = cfg.fixed_step_s;
    opts.n_samples = cfg.n_samples;
    return opts;
}

Eigen::MatrixXd crosstalk_from(const config::RunConfig& cfg) {
    const int n = cfg.n_ions;
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        if (i + 1 < n || cfg.crosstalk_wrap) m(i, (i + 1) % n) = cfg.crosstalk_nn;
        if (i > 0 || cfg.crosstalk_wrap) m(i, (i + n - 1) % n) = cfg.crosstalk_nn;
    }
    return m;
}

double effective_eta(const config::RunConfig& cfg) {
    if (cfg.eta_eff > 0) return cfg.eta_eff;
    const auto modes = chain::normal_modes(chain::equilibrium_positions(chain_from(cfg)));
    return chain::lamb_dicke_table(modes, cfg.probe_wavelength_m, cfg.projection_cosine)
        .com_eta_effective;
}

void write_artifact(RunContext& ctx, const std::string& name, const std::string& content) {
    const fs::path path = fs::path(ctx.out_dir) / name;
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw InputError("cannot write artifact: " + path.string());
    os << content;
    ctx.artifacts[name] = csv::fnv1a_hex(content);
}

// ---- subcommand bodies ---------------------------------------------------

void run_equilibrium(RunContext& ctx) {
    const auto eq = chain::equilibrium_positions(chain_from(ctx.cfg));
    std::ostringstream pos;
    pos << "ion,position_m\n";
    for (size_t i = 0; i < eq.positions.size(); ++i)
        pos << (i + 1) << ',' << csv::format_sci(eq.positions[i]) << '\n';
    write_artifact(ctx, "positions.csv", pos.str());

    if (eq.positions.size() > 1) {
        const auto gaps = chain::chain_spacings(eq);
        std::ostringstream sp;
        sp << "gap,spacing_m\n";
        for (size_t i = 0; i < gaps.size(); ++i)
            sp << (i + 1) << ',' << csv::format_sci(gaps[i]) << '\n';
        write_artifact(ctx, "spacings.csv", sp.str());
        ctx.results["span_m"] = eq.positions.back() - eq.positions.front();
        ctx.results["min_spacing_m"] = *std::min_element(gaps.begin(), gaps.end());
    }
    ctx.results["n_ions"] = ctx.cfg.n_ions;
}

void run_modes(RunContext& ctx) {
    const auto modes = chain::normal_modes(chain::equilibrium_positions(chain_from(ctx.cfg)));
    std::ostringstream os;
    os << "mode,frequency_rad_s,frequency_hz";
    for (int i = 0; i < ctx.cfg.n_ions; ++i) os << ",b" << (i + 1);
    os << '\n';
    for (int m = 0; m < ctx.cfg.n_ions; ++m) {
        os << (m + 1) << ',' << csv::format_sci(modes.frequencies[m]) << ','
           << csv::format_sci(modes.frequencies[m] / constants::two_pi);
        for (int i = 0; i < ctx.cfg.n_ions; ++i)
            os << ',' << csv::format_sci(modes.eigenvectors(m, i));
        os << '\n';
    }
    write_artifact(ctx, "modes.csv", os.str());

    const auto table =
        chain::lamb_dicke_table(modes, ctx.cfg.probe_wavelength_m, ctx.cfg.projection_cosine);
    ctx.results["com_frequency_hz"] = modes.frequencies[0] / constants::two_pi;
    ctx.results["com_eta_effective"] = table.com_eta_effective;
}

void run_waveform(RunContext& ctx) {
    const auto schedule = schedule_from(ctx.cfg);
    const auto wf = waveform::sample_schedule(schedule, ctx.cfg.sample_period_s);
    std::ostringstream ideal;
    waveform::write_waveform_csv(ideal, wf);
    write_artifact(ctx, "waveform.csv", ideal.str());

    waveform::FilterModel filter{ctx.cfg.filter_cutoff_hz, ctx.cfg.filter_order};
    if (waveform::lowpass_severely_distorts(filter, schedule.duration()))
        std::cerr << "warning: filter cutoff is below 1/(10 x schedule duration); "
                     "expect severe distortion\n";
    std::ostringstream filtered;
    waveform::write_waveform_csv(filtered, waveform::apply_lowpass(wf, filter));
    write_artifact(ctx, "waveform_filtered.csv", filtered.str());

    ctx.results["samples"] = wf.v1.size();
    ctx.results["forward_duration_s"] = schedule.forward_duration();
    ctx.results["duration_s"] = schedule.duration();
}

transport::TrajectoryResult simulate_from_config(const RunContext& ctx,
                                                 const chain::ChainConfig& c) {
    const auto schedule = schedule_from(ctx.cfg);
    if (ctx.cfg.use_filtered_waveform) {
        auto wf = waveform::sample_schedule(schedule, ctx.cfg.sample_period_s);
        wf = waveform::apply_lowpass(
            wf, waveform::FilterModel{ctx.cfg.filter_cutoff_hz, ctx.cfg.filter_order});
        auto series = waveform::potential_trajectory(wf, calibration_from(ctx.cfg));
        return transport::simulate_transport(
            c, transport::potential_from_series(series, ctx.cfg.quartic_b_m2),
            integrator_from(ctx.cfg));
    }
    auto plan =
        transport::plan_from_schedule(schedule, calibration_from(ctx.cfg), ctx.cfg.include_return);
    return transport::simulate_transport(
        c, plan.potential(c.axial_freq, ctx.cfg.quartic_b_m2), integrator_from(ctx.cfg));
}

void run_transport(RunContext& ctx) {
    const auto c = chain_from(ctx.cfg);
    const auto traj = simulate_from_config(ctx, c);
    const auto modes = chain::normal_modes(chain::equilibrium_positions(c));
    const auto exc = transport::mode_excitations(traj, modes, c);

    std::ostringstream os;
    transport::write_trajectory_csv(os, traj);
    write_artifact(ctx, "trajectory.csv", os.str());

    ctx.results["com_n_alpha"] = exc.n_alpha[0];
    ctx.results["n_alpha"] = exc.n_alpha;
    ctx.results["final_center_m"] = traj.final_center;
}

void run_sweep(RunContext& ctx) {
    const auto c = chain_from(ctx.cfg);
    auto plan = transport::plan_from_schedule(schedule_from(ctx.cfg), calibration_from(ctx.cfg),
                                              false);
    std::vector<double> omegas;
    for (double f : ctx.cfg.sweep_freqs_hz) omegas.push_back(constants::two_pi * f);
    std::vector<double> times(ctx.cfg.time_points);
    for (int i = 0; i < ctx.cfg.time_points; ++i)
        times[i] = ctx.cfg.time_points == 1
                       ? ctx.cfg.time_min_s
                       : ctx.cfg.time_min_s + (ctx.cfg.time_max_s - ctx.cfg.time_min_s) * i /
                                                  (ctx.cfg.time_points - 1);
    const auto sweep = transport::sweep_transport_time(c, plan, omegas, times,
                                                       integrator_from(ctx.cfg), ctx.threads);
    std::ostringstream os;
    transport::write_sweep_csv(os, sweep);
    write_artifact(ctx, "sweep.csv", os.str());

    double lo = 1e300, hi = 0.0;
    for (const auto& p : sweep) {
        lo = std::min(lo, p.com_n_alpha);
        hi = std::max(hi, p.com_n_alpha);
    }
    ctx.results["grid_points"] = sweep.size();
    ctx.results["min_com_n_alpha"] = lo;
    ctx.results["max_com_n_alpha"] = hi;
}

void run_optimize(RunContext& ctx) {
    const auto c = chain_from(ctx.cfg);
    auto plan = transport::plan_from_schedule(schedule_from(ctx.cfg), calibration_from(ctx.cfg),
                                              false);
    const auto modes = chain::normal_modes(chain::equilibrium_positions(c));
    const auto opts = integrator_from(ctx.cfg);

    const bool free_dwell = ctx.cfg.opt_free_dwell;
    auto objective = [&](std::span<const double> x) {
        transport::TransportPlan trial = plan;
        if (free_dwell) {
            trial.step_time = 1.0;
            trial.dwell_time = x[1];
            trial.pre_dwell = x[1];
        }
        trial = trial.scaled_to_forward(x[0]);
        const auto traj = transport::simulate_transport(c, trial.potential(c.axial_freq), opts);
        return transport::mode_excitations(traj, modes, c).n_alpha[0];
    };

    std::vector<double> initial{0.5 * (ctx.cfg.opt_time_lo_s + ctx.cfg.opt_time_hi_s)};
    std::vector<std::pair<double, double>> bounds{{ctx.cfg.opt_time_lo_s, ctx.cfg.opt_time_hi_s}};
    if (free_dwell) {
        initial.push_back(plan.dwell_time / plan.step_time);
        bounds.emplace_back(ctx.cfg.opt_dwell_lo, ctx.cfg.opt_dwell_hi);
    }
    const auto best = transport::optimize_ramp(objective, initial, bounds, ctx.cfg.opt_budget,
                                               ctx.seed, ctx.cfg.opt_multistarts);

    std::ostringstream os;
    os << "parameter,value\n";
    os << "total_forward_time_s," << csv::format_sci(best.params[0]) << '\n';
    if (free_dwell) os << "dwell_fraction," << csv::format_sci(best.params[1]) << '\n';
    os << "com_n_alpha," << csv::format_sci(best.objective) << '\n';
    write_artifact(ctx, "optimize.csv", os.str());

    ctx.results["best_total_forward_time_s"] = best.params[0];
    if (free_dwell) ctx.results["best_dwell_fraction"] = best.params[1];
    ctx.results["best_com_n_alpha"] = best.objective;
    ctx.results["evaluations"] = best.evaluations;
}

void run_rabi(RunContext& ctx) {
    spectroscopy::ModeState com;
    com.n_thermal = ctx.cfg.n_thermal;
    com.alpha = std::sqrt(ctx.cfg.n_alpha);
    std::vector<double> times(ctx.cfg.probe_time_points);
    for (int i = 0; i < ctx.cfg.probe_time_points; ++i)
        times[i] = ctx.cfg.probe_time_max_s * i / (ctx.cfg.probe_time_points - 1);
    const auto curve = spectroscopy::simulate_carrier_flop(
        com, effective_eta(ctx.cfg), constants::two_pi * ctx.cfg.rabi_hz, times, ctx.cfg.n_ions);
    std::ostringstream os;
    spectroscopy::write_rabi_csv(os, curve);
    write_artifact(ctx, "rabi.csv", os.str());
    ctx.results["eta_eff"] = effective_eta(ctx.cfg);
    ctx.results["points"] = curve.times.size();
}

void run_spectrum(RunContext& ctx) {
    const auto modes = chain::normal_modes(chain::equilibrium_positions(chain_from(ctx.cfg)));
    const auto table =
        chain::lamb_dicke_table(modes, ctx.cfg.probe_wavelength_m, ctx.cfg.projection_cosine);
    spectroscopy::MotionalState state;
    state.modes.resize(ctx.cfg.n_ions);
    state.modes[0].n_thermal = ctx.cfg.n_thermal;
    state.modes[0].alpha = std::sqrt(ctx.cfg.n_alpha);
    for (int m = 1; m < ctx.cfg.n_ions; ++m)
        state.modes[m].n_thermal = ctx.cfg.background_n_thermal;
    const auto spectrum = spectroscopy::sideband_spectrum(modes, state, table);
    std::ostringstream os;
    spectroscopy::write_sideband_csv(os, spectrum);
    write_artifact(ctx, "spectrum.csv", os.str());
    ctx.results["lines"] = spectrum.lines.size();
}

void run_profile(RunContext& ctx) {
    if (ctx.input_path.empty())
        throw ConfigError("profile: --input tag file is required");
    std::ifstream in(ctx.input_path, std::ios::binary);
    if (!in)
        throw InputError("cannot open input: " + ctx.input_path);
    const auto tags = timetags::parse_time_tags(in);
    const auto ts = timetags::trial_schedule_from(schedule_from(ctx.cfg));
    const auto profile = timetags::bin_temporal_profile(tags, ts, ctx.cfg.bin_width_s);

    std::ostringstream os;
    os << "bin,time_s,mode,counts\n";
    for (size_t b = 0; b < profile.counts.size(); ++b)
        os << b << ',' << csv::format_sci((b + 0.5) * profile.bin_width) << ','
           << profile.mode_of_bin[b] << ',' << csv::format_int(profile.counts[b]) << '\n';
    write_artifact(ctx, "profile.csv", os.str());

    std::int64_t total = 0;
    for (auto c : profile.counts) total += c;
    ctx.results["binned_counts"] = total;
    ctx.results["bins"] = profile.counts.size();
}

void run_g2(RunContext& ctx) {
    if (ctx.input_path.empty())
        throw ConfigError("g2: --input tag file is required");
    std::ifstream in(ctx.input_path, std::ios::binary);
    if (!in)
        throw InputError("cannot open input: " + ctx.input_path);
    const auto ts = timetags::trial_schedule_from(schedule_from(ctx.cfg));
    const auto hist = timetags::correlation_histogram(in, ts, ctx.cfg.coincidence_window_s,
                                                      ctx.cfg.max_delay);
    std::ostringstream os;
    timetags::write_histogram_csv(os, hist);
    write_artifact(ctx, "histogram.csv", os.str());

    const size_t zero = hist.delays.size() / 2;
    ctx.results["g2_zero"] = hist.normalized[zero];
    ctx.results["g2_zero_error"] = hist.stat_error[zero];
    ctx.results["zero_coincidences"] = hist.coincidences[zero];
}

void run_predict_g2(RunContext& ctx) {
    const double g2 = photonics::predicted_g2(ctx.cfg.rho0, ctx.cfg.rho_s1, ctx.cfg.rho_s2,
                                              ctx.cfg.g2_floor);
    std::ostringstream os;
    os << "rho0,rho_s1,rho_s2,g2_floor,g2\n";
    os << csv::format_sci(ctx.cfg.rho0) << ',' << csv::format_sci(ctx.cfg.rho_s1) << ','
       << csv::format_sci(ctx.cfg.rho_s2) << ',' << csv::format_sci(ctx.cfg.g2_floor) << ','
       << csv::format_sci(g2) << '\n';
    write_artifact(ctx, "predict_g2.csv", os.str());
    ctx.results["g2"] = g2;
}

void run_synth(RunContext& ctx) {
    const auto ts = timetags::trial_schedule_from(schedule_from(ctx.cfg));
    timetags::SynthModel model;
    model.emission_prob.assign(ctx.cfg.n_ions, ctx.cfg.emission_prob);
    model.crosstalk = crosstalk_from(ctx.cfg);
    model.efficiency = ctx.cfg.detection_efficiency;
    model.dark_rate = ctx.cfg.dark_rate_hz;
    const auto tags = timetags::generate_synthetic_tags(model, ts, ctx.cfg.n_cycles, ctx.seed);
    std::ostringstream os;
    timetags::write_tags_csv(os, tags);
    write_artifact(ctx, "tags.csv", os.str());
    ctx.results["records"] = tags.size();
    ctx.results["cycles"] = ctx.cfg.n_cycles;
}

void run_rate(RunContext& ctx) {
    const auto budget = photonics::rate_budget(schedule_from(ctx.cfg),
                                               ctx.cfg.extraction_efficiency,
                                               ctx.cfg.collection_efficiency);
    std::ostringstream os;
    os << "cycle_duration_s,attempt_rate_hz,detected_rate_hz\n";
    os << csv::format_sci(budget.cycle_duration) << ',' << csv::format_sci(budget.attempt_rate)
       << ',' << csv::format_sci(budget.detected_rate) << '\n';
    write_artifact(ctx, "rate.csv", os.str());
    ctx.results["attempt_rate_hz"] = budget.attempt_rate;
    ctx.results["detected_rate_hz"] = budget.detected_rate;
    ctx.results["cycle_duration_s"] = budget.cycle_duration;
}

// ---- orchestration -------------------------------------------------------

int dispatch(const std::string& name, RunContext& ctx) {
    fs::create_directories(ctx.out_dir);

    if (name == "equilibrium") run_equilibrium(ctx);
    else if (name == "modes") run_modes(ctx);
    else if (name == "waveform") run_waveform(ctx);
    else if (name == "transport") run_transport(ctx);
    else if (name == "sweep") run_sweep(ctx);
    else if (name == "optimize") run_optimize(ctx);
    else if (name == "rabi") run_rabi(ctx);
    else if (name == "spectrum") run_spectrum(ctx);
    else if (name == "profile") run_profile(ctx);
    else if (name == "g2") run_g2(ctx);
    else if (name == "predict-g2") run_predict_g2(ctx);
    else if (name == "synth") run_synth(ctx);
    else if (name == "rate") run_rate(ctx);
    else throw ConfigError("unknown subcommand: " + name);

    json summary;
    summary["subcommand"] = name;
    summary["config_digest"] = ctx.digest;
    summary["seed"] = ctx.seed;
    summary["artifacts"] = ctx.artifacts;
    summary["results"] = ctx.results;
    {
        const fs::path path = fs::path(ctx.out_dir) / "summary.json";
        std::ofstream os(path, std::ios::binary);
        os << summary.dump(2) << '\n';
    }

    if (ctx.format == "json") {
        std::cout << summary.dump() << '\n';
    } else {
        std::cout << name << ':';
        for (const auto& [key, value] : ctx.results.items())
            std::cout << ' ' << key << '=' << value.dump();
        std::cout << " config=" << ctx.digest << '\n';
    }
    return 0;
}

int exit_code_for(const Error& e) {
    switch (e.category()) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::input: return 3;
        case ErrorCategory::numeric:
        case ErrorCategory::convergence: return 4;
    }
    return 4;
}

const char* category_name(const Error& e) {
    switch (e.category()) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::input: return "input";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::convergence: return "convergence";
    }
    return "numeric";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and analysis toolkit for shuttling-multiplexed ion-photon interfaces"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", input_path, format = "csv";
    std::uint64_t seed = 0;
    int threads = 1;

    const std::vector<std::string> names{"equilibrium", "modes", "waveform", "transport",
                                         "sweep", "optimize", "rabi", "spectrum",
                                         "profile", "g2", "predict-g2", "synth", "rate"};
    const std::vector<std::string> descriptions{
        "ion equilibrium positions and spacings",
        "axial normal modes and Lamb-Dicke parameters",
        "endcap voltage ramps (ideal and filtered)",
        "chain trajectory through the shuttling potential",
        "COM excitation vs transport time and trap frequency",
        "tune the ramp timing for minimal COM excitation",
        "motional-state-sensitive carrier Rabi flop",
        "first-order sideband spectrum",
        "photon arrival histogram by temporal mode (needs --input)",
        "second-order correlation vs mode delay (needs --input)",
        "crosstalk-based g2(0) estimate",
        "synthetic time-tag stream",
        "attempt and detected photon rate budget"};

    for (size_t i = 0; i < names.size(); ++i) {
        auto* sub = app.add_subcommand(names[i], descriptions[i]);
        sub->add_option("--config", config_path, "run configuration file");
        sub->add_option("--out", out_dir, "output directory (default: .)");
        sub->add_option("--seed", seed, "random seed for stochastic workflows");
        sub->add_option("--threads", threads, "worker threads for sweeps");
        sub->add_option("--format", format, "result line format: csv|json")
            ->check(CLI::IsMember({"csv", "json"}));
        if (names[i] == "profile" || names[i] == "g2")
            sub->add_option("--input", input_path, "time-tag csv to analyze")->required();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        RunContext ctx;
        if (!config_path.empty()) ctx.cfg = config::load_config(config_path);
        ctx.out_dir = out_dir;
        ctx.input_path = input_path;
        ctx.seed = seed;
        ctx.threads = threads;
        ctx.format = format;
        ctx.digest = config::config_digest(ctx.cfg);
        return dispatch(app.get_subcommands().front()->get_name(), ctx);
    } catch (const Error& e) {
        std::cerr << "error [" << category_name(e) << "]: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error [numeric]: " << e.what() << '\n';
        return 4;
    }
}
