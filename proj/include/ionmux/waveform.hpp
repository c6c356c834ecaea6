#pragma once

#include <iosfwd>
#include <vector>

namespace ionmux::waveform {

/// One smooth-step voltage ramp on an endcap: v(t) follows the quintic
/// 10 s^3 - 15 s^4 + 6 s^5 in s = t/T so that dv/dt and d2v/dt2 vanish at
/// both ends.
struct RampSegment {
    double v_start = 0.0;   // V
    double delta_v = 0.0;   // V
    double duration = 0.0;  // s (T)
    double start_time = 0.0;  // s
};

/// Full shuttling sequence on endcap 1 (endcap 2 mirrors it with an
/// offset): an initial addressing dwell, n forward ramps each followed by
/// a dwell, one return ramp and a static readout tail. Cooling/pumping
/// bookkeeping rides along for rate estimates.
struct StepSchedule {
    double v_base1 = 0.0;   // V, endcap-1 rest voltage
    double v_offset = 0.0;  // V, v1(t) + v2(t) = v_base1 + v_offset at all times
    std::vector<double> step_delta_v;  // V per forward step
    double step_time = 0.0;            // s per forward ramp
    std::vector<double> dwell_times;   // s, addressing window after each ramp
    double pre_dwell = 0.0;            // s, addressing window before the first ramp
    double return_time = 0.0;          // s, single ramp back
    double readout_time = 0.0;         // s, static tail
    double pump_duration = 0.0;        // s
    double cooling_duration = 0.0;     // s
    int repeats_per_cooling = 1;

    /// 8 x (9.1 + 1.7) us with the published timing.
    double forward_duration() const;
    /// pre-dwell + forward + return + readout.
    double duration() const;

    std::vector<RampSegment> forward_segments() const;
    RampSegment return_segment() const;
    bool valid() const;
};

/// Uniformly sampled two-channel voltage record.
struct VoltageWaveform {
    double sample_period = 0.0;  // s
    std::vector<double> v1;      // V
    std::vector<double> v2;      // V
};

/// Voltage-to-potential map: trap center moves linearly with the endcap-1
/// excursion, trap frequency follows the mean voltage (constant by
/// default, optionally affine for sensitivity studies).
struct TrapCalibration {
    double center_slope = 2.0e-5;  // m per V of (v1 - v_base1)
    double base_voltage = 24.24;   // V, mean endcap voltage
    double v_base1 = 0.0;          // V, endcap-1 voltage at which center = 0
    double omega0 = 0.0;           // rad/s at base_voltage
    double freq_slope = 0.0;       // rad/s per V of mean-voltage change

    double omega_at(double mean_voltage) const {
        return omega0 + freq_slope * (mean_voltage - base_voltage);
    }
};

/// First-order RC low-pass (higher order = cascaded stages).
struct FilterModel {
    double cutoff_freq = 1.9e6;  // Hz
    int order = 1;
};

/// Sampled time series of the trap potential parameters.
struct PotentialSeries {
    double sample_period = 0.0;
    std::vector<double> center;  // m
    std::vector<double> omega;   // rad/s
};

/// Evaluate the quintic smooth step at normalized time s in [0, 1].
double quintic_shape(double s);

/// Sample one ramp at the given period (inclusive of both endpoints).
/// Requires sample_period <= duration / 10.
std::vector<double> quintic_ramp(const RampSegment& segment, double sample_period);

struct ScheduleTimings {
    double step_time = 9.1e-6;
    double dwell_time = 1.7e-6;
    double return_time = 35e-6;
    double pump_duration = 3e-6;
    double cooling_duration = 200e-6;
    double readout_time = 10e-6;
    int repeats_per_cooling = 2;
};

/// Derive the per-step voltage increments from the ion spacings through the
/// calibration map: moving the trap center by one spacing brings the next
/// ion onto the addressing beam.
StepSchedule build_schedule(const std::vector<double>& spacings,
                            const TrapCalibration& calibration,
                            const ScheduleTimings& timings);

/// Sample the full schedule (both endcaps) at the given period.
VoltageWaveform sample_schedule(const StepSchedule& schedule, double sample_period);

/// Discrete first-order low-pass per channel, steady-state gain 1.
VoltageWaveform apply_lowpass(const VoltageWaveform& waveform, const FilterModel& filter);

/// True when the cutoff is below 1/(10 x total duration): the filtered
/// waveform would be severely distorted. Callers decide how to warn.
bool lowpass_severely_distorts(const FilterModel& filter, double total_duration);

/// Map a voltage waveform to (center, omega) versus time.
PotentialSeries potential_trajectory(const VoltageWaveform& waveform,
                                     const TrapCalibration& calibration);

/// CSV export/import, header "time_s,v1,v2", fixed decimal.
void write_waveform_csv(std::ostream& os, const VoltageWaveform& waveform);
VoltageWaveform read_waveform_csv(std::istream& is);

} // namespace ionmux::waveform
