#include "ionmux/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ionmux/csv.hpp"
#include "ionmux/errors.hpp"

namespace ionmux::config {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct Field {
    enum class Type { real, integer, longint, boolean, text, real_list } type;
    void* ptr;
};

// Schema: fully-qualified key -> typed destination in RunConfig.
std::map<std::string, Field> schema(RunConfig& c) {
    using T = Field::Type;
    return {
        {"chain.n_ions", {T::integer, &c.n_ions}},
        {"chain.ion_mass_amu", {T::real, &c.ion_mass_amu}},
        {"chain.axial_freq_hz", {T::real, &c.axial_freq_hz}},
        {"chain.charge_e", {T::real, &c.charge_e}},
        {"calibration.center_slope_m_per_v", {T::real, &c.center_slope_m_per_v}},
        {"calibration.base_voltage_v", {T::real, &c.base_voltage_v}},
        {"calibration.v_dc1_v", {T::real, &c.v_dc1_v}},
        {"calibration.freq_slope_hz_per_v", {T::real, &c.freq_slope_hz_per_v}},
        {"schedule.step_time_s", {T::real, &c.step_time_s}},
        {"schedule.dwell_time_s", {T::real, &c.dwell_time_s}},
        {"schedule.return_time_s", {T::real, &c.return_time_s}},
        {"schedule.pump_time_s", {T::real, &c.pump_time_s}},
        {"schedule.cooling_time_s", {T::real, &c.cooling_time_s}},
        {"schedule.readout_time_s", {T::real, &c.readout_time_s}},
        {"schedule.repeats_per_cooling", {T::integer, &c.repeats_per_cooling}},
        {"schedule.sample_period_s", {T::real, &c.sample_period_s}},
        {"schedule.filter_cutoff_hz", {T::real, &c.filter_cutoff_hz}},
        {"schedule.filter_order", {T::integer, &c.filter_order}},
        {"transport.integrator", {T::text, &c.integrator}},
        {"transport.rel_tol", {T::real, &c.rel_tol}},
        {"transport.abs_tol", {T::real, &c.abs_tol}},
        {"transport.fixed_step_s", {T::real, &c.fixed_step_s}},
        {"transport.n_samples", {T::integer, &c.n_samples}},
        {"transport.include_return", {T::boolean, &c.include_return}},
        {"transport.use_filtered_waveform", {T::boolean, &c.use_filtered_waveform}},
        {"transport.quartic_b_m2", {T::real, &c.quartic_b_m2}},
        {"sweep.freqs_hz", {T::real_list, &c.sweep_freqs_hz}},
        {"sweep.time_min_s", {T::real, &c.time_min_s}},
        {"sweep.time_max_s", {T::real, &c.time_max_s}},
        {"sweep.time_points", {T::integer, &c.time_points}},
        {"optimize.time_lo_s", {T::real, &c.opt_time_lo_s}},
        {"optimize.time_hi_s", {T::real, &c.opt_time_hi_s}},
        {"optimize.free_dwell", {T::boolean, &c.opt_free_dwell}},
        {"optimize.dwell_lo", {T::real, &c.opt_dwell_lo}},
        {"optimize.dwell_hi", {T::real, &c.opt_dwell_hi}},
        {"optimize.budget", {T::longint, &c.opt_budget}},
        {"optimize.multistarts", {T::integer, &c.opt_multistarts}},
        {"spectroscopy.n_thermal", {T::real, &c.n_thermal}},
        {"spectroscopy.n_alpha", {T::real, &c.n_alpha}},
        {"spectroscopy.background_n_thermal", {T::real, &c.background_n_thermal}},
        {"spectroscopy.heating_rate_quanta_per_s", {T::real, &c.heating_rate_quanta_per_s}},
        {"spectroscopy.eta_eff", {T::real, &c.eta_eff}},
        {"spectroscopy.rabi_hz", {T::real, &c.rabi_hz}},
        {"spectroscopy.probe_wavelength_m", {T::real, &c.probe_wavelength_m}},
        {"spectroscopy.projection_cosine", {T::real, &c.projection_cosine}},
        {"spectroscopy.probe_time_max_s", {T::real, &c.probe_time_max_s}},
        {"spectroscopy.probe_time_points", {T::integer, &c.probe_time_points}},
        {"analysis.coincidence_window_s", {T::real, &c.coincidence_window_s}},
        {"analysis.bin_width_s", {T::real, &c.bin_width_s}},
        {"analysis.max_delay", {T::integer, &c.max_delay}},
        {"synth.emission_prob", {T::real, &c.emission_prob}},
        {"synth.crosstalk_nn", {T::real, &c.crosstalk_nn}},
        {"synth.crosstalk_wrap", {T::boolean, &c.crosstalk_wrap}},
        {"synth.detection_efficiency", {T::real, &c.detection_efficiency}},
        {"synth.dark_rate_hz", {T::real, &c.dark_rate_hz}},
        {"synth.n_cycles", {T::longint, &c.n_cycles}},
        {"g2predict.rho0", {T::real, &c.rho0}},
        {"g2predict.rho_s1", {T::real, &c.rho_s1}},
        {"g2predict.rho_s2", {T::real, &c.rho_s2}},
        {"g2predict.g2_floor", {T::real, &c.g2_floor}},
        {"rate.extraction_efficiency", {T::real, &c.extraction_efficiency}},
        {"rate.collection_efficiency", {T::real, &c.collection_efficiency}},
    };
}

void assign(const std::string& key, const Field& field, const std::string& value, size_t line) {
    auto fail = [&](const char* what) {
        throw ConfigError("config line " + std::to_string(line) + ": key '" + key + "' " + what +
                          " (got '" + value + "')");
    };
    std::istringstream in(value);
    switch (field.type) {
        case Field::Type::real: {
            double v{};
            if (!(in >> v) || !(in >> std::ws).eof()) fail("expects a real number");
            *static_cast<double*>(field.ptr) = v;
            break;
        }
        case Field::Type::integer: {
            int v{};
            if (!(in >> v) || !(in >> std::ws).eof()) fail("expects an integer");
            *static_cast<int*>(field.ptr) = v;
            break;
        }
        case Field::Type::longint: {
            long v{};
            if (!(in >> v) || !(in >> std::ws).eof()) fail("expects an integer");
            *static_cast<long*>(field.ptr) = v;
            break;
        }
        case Field::Type::boolean: {
            if (value == "true" || value == "1")
                *static_cast<bool*>(field.ptr) = true;
            else if (value == "false" || value == "0")
                *static_cast<bool*>(field.ptr) = false;
            else
                fail("expects true/false");
            break;
        }
        case Field::Type::text:
            *static_cast<std::string*>(field.ptr) = value;
            break;
        case Field::Type::real_list: {
            std::vector<double> list;
            for (const auto& item : csv::split_fields(value)) {
                std::istringstream is(trim(item));
                double v{};
                if (!(is >> v) || !(is >> std::ws).eof()) fail("expects a comma-separated list");
                list.push_back(v);
            }
            if (list.empty()) fail("expects a non-empty list");
            *static_cast<std::vector<double>*>(field.ptr) = list;
            break;
        }
    }
}

void validate(const RunConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("config: ") + what);
    };
    require(c.n_ions >= 1, "chain.n_ions must be >= 1");
    require(c.ion_mass_amu > 0, "chain.ion_mass_amu must be positive");
    require(c.axial_freq_hz > 0, "chain.axial_freq_hz must be positive");
    require(c.charge_e > 0, "chain.charge_e must be positive");
    require(c.center_slope_m_per_v != 0, "calibration.center_slope_m_per_v must be nonzero");
    require(c.step_time_s > 0 && c.dwell_time_s > 0 && c.return_time_s > 0,
            "schedule durations must be positive");
    require(c.pump_time_s > 0 && c.cooling_time_s > 0, "pump/cooling durations must be positive");
    require(c.repeats_per_cooling >= 1, "schedule.repeats_per_cooling must be >= 1");
    require(c.integrator == "adaptive" || c.integrator == "leapfrog",
            "transport.integrator must be adaptive or leapfrog");
    require(c.n_samples >= 2, "transport.n_samples must be >= 2");
    require(c.time_points >= 1 && c.time_min_s > 0 && c.time_max_s >= c.time_min_s,
            "sweep grid must be positive and ordered");
    require(c.n_thermal >= 0 && c.n_alpha >= 0, "spectroscopy occupations must be >= 0");
    require(std::abs(c.projection_cosine) <= 1, "spectroscopy.projection_cosine must be in [-1,1]");
    require(c.probe_wavelength_m > 0, "spectroscopy.probe_wavelength_m must be positive");
    require(c.coincidence_window_s > 0 && c.bin_width_s > 0, "analysis windows must be positive");
    require(c.max_delay >= 1, "analysis.max_delay must be >= 1");
    require(c.emission_prob >= 0 && c.emission_prob <= 1, "synth.emission_prob must be in [0,1]");
    require(c.detection_efficiency >= 0 && c.detection_efficiency <= 1,
            "synth.detection_efficiency must be in [0,1]");
    require(c.dark_rate_hz >= 0, "synth.dark_rate_hz must be >= 0");
    require(c.n_cycles >= 1, "synth.n_cycles must be >= 1");
    require(c.opt_budget >= 1, "optimize.budget must be >= 1");
}

} // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);

    RunConfig cfg;
    auto fields = schema(cfg);

    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
        const auto it = fields.find(key);
        if (it == fields.end())
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        assign(key, it->second, value, lineno);
    }
    validate(cfg);
    return cfg;
}

std::string canonical_text(const RunConfig& config) {
    RunConfig copy = config;
    auto fields = schema(copy);
    std::ostringstream os;
    for (const auto& [key, field] : fields) {  // std::map: sorted
        os << key << " = ";
        switch (field.type) {
            case Field::Type::real:
                os << csv::format_sci(*static_cast<const double*>(field.ptr), 17);
                break;
            case Field::Type::integer:
                os << *static_cast<const int*>(field.ptr);
                break;
            case Field::Type::longint:
                os << *static_cast<const long*>(field.ptr);
                break;
            case Field::Type::boolean:
                os << (*static_cast<const bool*>(field.ptr) ? "true" : "false");
                break;
            case Field::Type::text:
                os << *static_cast<const std::string*>(field.ptr);
                break;
            case Field::Type::real_list: {
                const auto& list = *static_cast<const std::vector<double>*>(field.ptr);
                for (size_t i = 0; i < list.size(); ++i)
                    os << (i ? "," : "") << csv::format_sci(list[i], 17);
                break;
            }
        }
        os << '\n';
    }
    return os.str();
}

std::string config_digest(const RunConfig& config) {
    return csv::fnv1a_hex(canonical_text(config));
}

} // namespace ionmux::config
