#pragma once

#include <string>
#include <vector>

namespace ionmux::config {

/// Declarative run configuration, mirroring the domain types. Parsed from an
/// INI-style document ([section] headers, key = value pairs, '#' comments);
/// every key is schema-checked and unknown keys are rejected.
struct RunConfig {
    // [chain]
    int n_ions = 9;
    double ion_mass_amu = 40.0;
    double axial_freq_hz = 179e3;
    double charge_e = 1.0;

    // [calibration]
    double center_slope_m_per_v = 2.0e-5;
    double base_voltage_v = 24.24;
    double v_dc1_v = 22.985;
    double freq_slope_hz_per_v = 0.0;

    // [schedule]
    double step_time_s = 9.1e-6;
    double dwell_time_s = 1.7e-6;
    double return_time_s = 35e-6;
    double pump_time_s = 3e-6;
    double cooling_time_s = 200e-6;
    double readout_time_s = 10e-6;
    int repeats_per_cooling = 2;
    double sample_period_s = 1e-8;
    double filter_cutoff_hz = 1.9e6;
    int filter_order = 1;

    // [transport]
    std::string integrator = "adaptive";  // adaptive | leapfrog
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double fixed_step_s = 0.0;
    int n_samples = 2001;
    bool include_return = false;
    bool use_filtered_waveform = false;
    double quartic_b_m2 = 0.0;

    // [sweep]
    std::vector<double> sweep_freqs_hz = {180e3, 189e3, 198e3};
    double time_min_s = 40e-6;
    double time_max_s = 400e-6;
    int time_points = 73;

    // [optimize]
    double opt_time_lo_s = 60e-6;
    double opt_time_hi_s = 120e-6;
    bool opt_free_dwell = false;
    double opt_dwell_lo = 0.05;
    double opt_dwell_hi = 0.5;
    long opt_budget = 200;
    int opt_multistarts = 3;

    // [spectroscopy]
    double n_thermal = 4.0;
    double n_alpha = 110.0;
    double background_n_thermal = 0.1;
    double heating_rate_quanta_per_s = 20e3;
    double eta_eff = 0.0;  // 0 = derive from the chain configuration
    double rabi_hz = 50e3;
    double probe_wavelength_m = 729e-9;
    double projection_cosine = 1.0;
    double probe_time_max_s = 120e-6;
    int probe_time_points = 1200;

    // [analysis]
    double coincidence_window_s = 300e-9;
    double bin_width_s = 250e-9;
    int max_delay = 8;

    // [synth]
    double emission_prob = 0.5;
    double crosstalk_nn = 0.0099;
    bool crosstalk_wrap = false;
    double detection_efficiency = 0.2;
    double dark_rate_hz = 0.0;
    long n_cycles = 20000;

    // [g2predict]
    double rho0 = 1.0;
    double rho_s1 = 0.0099;
    double rho_s2 = 0.0099;
    double g2_floor = 0.010;

    // [rate]
    double extraction_efficiency = 0.0021;
    double collection_efficiency = 1.0;
};

/// Parse and validate a config file. Throws ConfigError naming the file,
/// line and key on any schema violation.
RunConfig load_config(const std::string& path);

/// Canonical "key = value" serialization of the resolved configuration
/// (sorted keys); the digest is the FNV-1a hash of this text.
std::string canonical_text(const RunConfig& config);
std::string config_digest(const RunConfig& config);

} // namespace ionmux::config
