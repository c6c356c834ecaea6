#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ionmux/waveform.hpp"

namespace ionmux::timetags {

/// One detector event. Channel 0 marks the start of an experimental cycle
/// (sequence sync); channels 1 and 2 are the photon detectors. Timestamps
/// are integer picoseconds and non-decreasing within a stream.
struct TimeTagRecord {
    int channel = 0;
    std::int64_t time_ps = 0;

    bool operator==(const TimeTagRecord&) const = default;
};

/// Timing of the addressing windows within one cycle. A cycle holds
/// attempts_per_sync windows: passes of mode_offsets.size() windows each,
/// pass p starting at p x pass_period after the sync marker.
struct TrialSchedule {
    std::vector<double> mode_offsets;  // s, window starts within a pass, strictly increasing
    double window_length = 0.0;        // s
    double step_period = 0.0;          // s between consecutive windows
    double pass_period = 0.0;          // s between pass starts
    double cycle_period = 0.0;         // s between sync markers
    int attempts_per_sync = 0;

    int passes() const {
        return mode_offsets.empty() ? 0 : attempts_per_sync / static_cast<int>(mode_offsets.size());
    }
    bool valid() const;
    /// Start time of attempt j in [0, attempts_per_sync) relative to sync.
    double attempt_start(int j) const;
};

/// Addressing windows implied by a voltage step schedule: ion 1's window at
/// the tail of the pump interval, one window after each forward ramp.
TrialSchedule trial_schedule_from(const waveform::StepSchedule& schedule);

/// Streaming CSV parser for the "channel,time_ps" format. Throws InputError
/// with the offending line number on malformed rows, unknown channels or
/// timestamp regressions.
class TagParser {
public:
    explicit TagParser(std::istream& in);
    std::optional<TimeTagRecord> next();
    std::size_t line_number() const { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 1;  // header consumed in constructor
    std::int64_t last_time_ = std::numeric_limits<std::int64_t>::min();
};

std::vector<TimeTagRecord> parse_time_tags(std::istream& in);

/// Bit-exact writer: header "channel,time_ps", one ASCII-decimal record per
/// line, LF endings.
void write_tags_csv(std::ostream& os, std::span<const TimeTagRecord> records);

/// Counts per time bin relative to the sync marker, each bin labeled with
/// the temporal mode whose addressing window contains its center (-1 when
/// unassigned).
struct ModeProfile {
    double bin_width = 0.0;
    std::vector<std::int64_t> counts;
    std::vector<int> mode_of_bin;
};

ModeProfile bin_temporal_profile(std::span<const TimeTagRecord> tags,
                                 const TrialSchedule& schedule, double bin_width);

/// Normalized coincidences versus mode delay. delays[k] runs
/// -max_delay..max_delay; normalized = coincidences / mean(k != 0 bins);
/// stat_error propagates Poisson errors through the normalization with the
/// 1-count convention for empty bins.
struct CorrelationHistogram {
    std::vector<int> delays;
    std::vector<std::int64_t> coincidences;
    std::vector<double> normalized;
    std::vector<double> stat_error;
};

CorrelationHistogram correlation_histogram(std::span<const TimeTagRecord> tags,
                                           const TrialSchedule& schedule,
                                           double coincidence_window, int max_delay);
CorrelationHistogram correlation_histogram(std::istream& in, const TrialSchedule& schedule,
                                           double coincidence_window, int max_delay);

void write_histogram_csv(std::ostream& os, const CorrelationHistogram& hist);

/// Emission model for the synthetic tag generator: per-window Bernoulli
/// emission from the addressed ion and its crosstalk-lit neighbours, 50/50
/// routing to the two detectors, binomial detection loss and homogeneous
/// Poisson dark counts.
struct SynthModel {
    std::vector<double> emission_prob;  // per addressed ion
    Eigen::MatrixXd crosstalk;          // relative intensity, diagonal 1
    double efficiency = 1.0;            // detection probability per emitted photon
    double dark_rate = 0.0;             // 1/s per detector
};

/// Deterministic for a fixed seed (bit-exact files regardless of platform).
std::vector<TimeTagRecord> generate_synthetic_tags(const SynthModel& model,
                                                   const TrialSchedule& schedule, long n_cycles,
                                                   std::uint64_t seed);

} // namespace ionmux::timetags
