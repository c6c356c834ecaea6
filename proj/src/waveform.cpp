#include "ionmux/waveform.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ionmux/constants.hpp"
#include "ionmux/csv.hpp"
#include "ionmux/errors.hpp"

namespace ionmux::waveform {

double quintic_shape(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double StepSchedule::forward_duration() const {
    return step_delta_v.size() * step_time +
           std::accumulate(dwell_times.begin(), dwell_times.end(), 0.0);
}

double StepSchedule::duration() const {
    return pre_dwell + forward_duration() + return_time + readout_time;
}

bool StepSchedule::valid() const {
    if (step_time <= 0 || return_time <= 0) return false;
    if (dwell_times.size() != step_delta_v.size()) return false;
    for (double d : dwell_times)
        if (d <= 0) return false;
    return true;
}

std::vector<RampSegment> StepSchedule::forward_segments() const {
    std::vector<RampSegment> segments;
    double v = v_base1;
    double t = pre_dwell;
    for (size_t k = 0; k < step_delta_v.size(); ++k) {
        segments.push_back({v, step_delta_v[k], step_time, t});
        v += step_delta_v[k];
        t += step_time + dwell_times[k];
    }
    return segments;
}

RampSegment StepSchedule::return_segment() const {
    const double total = std::accumulate(step_delta_v.begin(), step_delta_v.end(), 0.0);
    return {v_base1 + total, -total, return_time, pre_dwell + forward_duration()};
}

std::vector<double> quintic_ramp(const RampSegment& segment, double sample_period) {
    if (segment.duration <= 0)
        throw ConfigError("quintic_ramp: segment duration must be positive");
    if (sample_period > segment.duration / 10.0)
        throw ConfigError("quintic_ramp: sample_period must be <= duration/10");
    const auto n =
        static_cast<size_t>(std::floor(segment.duration / sample_period + 1e-9)) + 1;
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = segment.v_start +
                 segment.delta_v * quintic_shape(i * sample_period / segment.duration);
    return out;
}

StepSchedule build_schedule(const std::vector<double>& spacings,
                            const TrapCalibration& calibration,
                            const ScheduleTimings& timings) {
    if (calibration.center_slope == 0.0)
        throw ConfigError("build_schedule: calibration center_slope must be nonzero");
    if (spacings.empty())
        throw ConfigError("build_schedule: need at least one spacing");
    for (double s : spacings)
        if (s <= 0)
            throw ConfigError("build_schedule: spacings must be positive");

    StepSchedule schedule;
    schedule.v_base1 = calibration.v_base1;
    schedule.v_offset = 2.0 * calibration.base_voltage - calibration.v_base1;
    schedule.step_delta_v.reserve(spacings.size());
    for (double s : spacings)
        schedule.step_delta_v.push_back(s / calibration.center_slope);
    schedule.step_time = timings.step_time;
    schedule.dwell_times.assign(spacings.size(), timings.dwell_time);
    schedule.pre_dwell = timings.dwell_time;
    schedule.return_time = timings.return_time;
    schedule.readout_time = timings.readout_time;
    schedule.pump_duration = timings.pump_duration;
    schedule.cooling_duration = timings.cooling_duration;
    schedule.repeats_per_cooling = timings.repeats_per_cooling;
    return schedule;
}

namespace {

double schedule_v1_at(const StepSchedule& schedule, const std::vector<RampSegment>& forward,
                      const RampSegment& back, double t) {
    if (t <= forward.front().start_time) return schedule.v_base1;
    for (const auto& seg : forward) {
        if (t < seg.start_time) break;
        if (t <= seg.start_time + seg.duration)
            return seg.v_start + seg.delta_v * quintic_shape((t - seg.start_time) / seg.duration);
    }
    if (t < back.start_time) {
        // inside a dwell: hold the value reached by the last finished ramp
        double v = schedule.v_base1;
        for (const auto& seg : forward)
            if (t >= seg.start_time + seg.duration) v = seg.v_start + seg.delta_v;
        return v;
    }
    if (t <= back.start_time + back.duration)
        return back.v_start + back.delta_v * quintic_shape((t - back.start_time) / back.duration);
    return schedule.v_base1;
}

} // namespace

VoltageWaveform sample_schedule(const StepSchedule& schedule, double sample_period) {
    if (!schedule.valid())
        throw ConfigError("sample_schedule: invalid schedule");
    if (sample_period <= 0 || sample_period > schedule.step_time / 10.0)
        throw ConfigError("sample_schedule: sample_period must be positive and <= step_time/10");

    const auto forward = schedule.forward_segments();
    const auto back = schedule.return_segment();
    const double total = schedule.duration();
    const auto n = static_cast<size_t>(std::floor(total / sample_period + 1e-9)) + 1;

    VoltageWaveform wf;
    wf.sample_period = sample_period;
    wf.v1.resize(n);
    wf.v2.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const double v1 = schedule_v1_at(schedule, forward, back, i * sample_period);
        wf.v1[i] = v1;
        wf.v2[i] = schedule.v_offset - (v1 - schedule.v_base1);
    }
    return wf;
}

VoltageWaveform apply_lowpass(const VoltageWaveform& waveform, const FilterModel& filter) {
    if (filter.cutoff_freq <= 0)
        throw ConfigError("apply_lowpass: cutoff frequency must be positive");
    if (filter.order < 1)
        throw ConfigError("apply_lowpass: filter order must be >= 1");
    const double rc = 1.0 / (constants::two_pi * filter.cutoff_freq);
    const double a = waveform.sample_period / (rc + waveform.sample_period);

    VoltageWaveform out = waveform;
    for (auto* ch : {&out.v1, &out.v2}) {
        for (int stage = 0; stage < filter.order; ++stage) {
            double y = ch->empty() ? 0.0 : (*ch)[0];
            for (double& v : *ch) {
                y += a * (v - y);
                v = y;
            }
        }
    }
    return out;
}

bool lowpass_severely_distorts(const FilterModel& filter, double total_duration) {
    return total_duration > 0 && filter.cutoff_freq < 1.0 / (10.0 * total_duration);
}

PotentialSeries potential_trajectory(const VoltageWaveform& waveform,
                                     const TrapCalibration& calibration) {
    PotentialSeries series;
    series.sample_period = waveform.sample_period;
    series.center.resize(waveform.v1.size());
    series.omega.resize(waveform.v1.size());
    for (size_t i = 0; i < waveform.v1.size(); ++i) {
        series.center[i] = calibration.center_slope * (waveform.v1[i] - calibration.v_base1);
        series.omega[i] = calibration.omega_at(0.5 * (waveform.v1[i] + waveform.v2[i]));
    }
    return series;
}

void write_waveform_csv(std::ostream& os, const VoltageWaveform& waveform) {
    os << "time_s,v1,v2\n";
    for (size_t i = 0; i < waveform.v1.size(); ++i) {
        os << csv::format_fixed(i * waveform.sample_period, 9) << ','
           << csv::format_fixed(waveform.v1[i], 9) << ','
           << csv::format_fixed(waveform.v2[i], 9) << '\n';
    }
}

VoltageWaveform read_waveform_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "time_s,v1,v2")
        throw InputError("waveform csv: missing or malformed header");
    VoltageWaveform wf;
    double t0 = 0.0, t1 = 0.0;
    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = csv::split_fields(line);
        if (fields.size() != 3)
            throw InputError("waveform csv: expected 3 fields at line " + std::to_string(lineno));
        try {
            const double t = std::stod(fields[0]);
            if (wf.v1.empty()) t0 = t;
            else if (wf.v1.size() == 1) t1 = t;
            wf.v1.push_back(std::stod(fields[1]));
            wf.v2.push_back(std::stod(fields[2]));
        } catch (const std::exception&) {
            throw InputError("waveform csv: bad number at line " + std::to_string(lineno));
        }
    }
    wf.sample_period = wf.v1.size() > 1 ? t1 - t0 : 0.0;
    return wf;
}

} // namespace ionmux::waveform
