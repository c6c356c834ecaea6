#include "ionmux/timetags.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <random>

#include "ionmux/csv.hpp"
#include "ionmux/errors.hpp"

namespace ionmux::timetags {

bool TrialSchedule::valid() const {
    if (mode_offsets.empty() || window_length <= 0 || step_period <= 0) return false;
    if (window_length > step_period) return false;
    for (size_t i = 0; i + 1 < mode_offsets.size(); ++i)
        if (!(mode_offsets[i] < mode_offsets[i + 1])) return false;
    const int w = static_cast<int>(mode_offsets.size());
    if (attempts_per_sync < w || attempts_per_sync % w != 0) return false;
    if (passes() > 1 && pass_period < mode_offsets.back() + window_length) return false;
    const double span = (passes() - 1) * pass_period + mode_offsets.back() + window_length;
    return cycle_period >= span;
}

double TrialSchedule::attempt_start(int j) const {
    const int w = static_cast<int>(mode_offsets.size());
    return (j / w) * pass_period + mode_offsets[j % w];
}

TrialSchedule trial_schedule_from(const waveform::StepSchedule& schedule) {
    if (!schedule.valid())
        throw ConfigError("trial_schedule_from: invalid step schedule");
    const double dwell = schedule.dwell_times.front();
    if (schedule.pump_duration < dwell)
        throw ConfigError("trial_schedule_from: pump interval shorter than the addressing window");

    TrialSchedule ts;
    const int n_windows = static_cast<int>(schedule.step_delta_v.size()) + 1;
    ts.window_length = dwell;
    ts.step_period = schedule.step_time + dwell;
    ts.mode_offsets.resize(n_windows);
    // ion 1 is addressed at the tail of the pump interval, before the first
    // ramp; every later window follows its ramp
    ts.mode_offsets[0] = schedule.pump_duration - dwell;
    for (int i = 1; i < n_windows; ++i)
        ts.mode_offsets[i] = schedule.pump_duration + (i - 1) * ts.step_period + schedule.step_time;
    ts.pass_period = schedule.pump_duration + schedule.forward_duration() + schedule.return_time;
    ts.cycle_period = schedule.cooling_duration + schedule.repeats_per_cooling * ts.pass_period;
    ts.attempts_per_sync = schedule.repeats_per_cooling * n_windows;
    return ts;
}

TagParser::TagParser(std::istream& in) : in_(in) {
    std::string header;
    if (!std::getline(in_, header)) {
        // empty file: treat as an empty stream (next() returns nullopt)
        return;
    }
    if (header != "channel,time_ps")
        throw InputError("time-tag csv: bad header at line 1 (expected \"channel,time_ps\")");
}

std::optional<TimeTagRecord> TagParser::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (line.empty()) continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw InputError("time-tag csv: expected 2 fields at line " + std::to_string(line_));
        int channel = -1;
        std::int64_t t = 0;
        const char* begin = line.data();
        auto r1 = std::from_chars(begin, begin + comma, channel);
        auto r2 = std::from_chars(begin + comma + 1, begin + line.size(), t);
        if (r1.ec != std::errc{} || r1.ptr != begin + comma || r2.ec != std::errc{} ||
            r2.ptr != begin + line.size())
            throw InputError("time-tag csv: bad number at line " + std::to_string(line_));
        if (channel < 0 || channel > 2)
            throw InputError("time-tag csv: unknown channel " + std::to_string(channel) +
                             " at line " + std::to_string(line_));
        if (t < last_time_)
            throw InputError("time-tag csv: timestamp regression at line " + std::to_string(line_));
        last_time_ = t;
        return TimeTagRecord{channel, t};
    }
    return std::nullopt;
}

std::vector<TimeTagRecord> parse_time_tags(std::istream& in) {
    TagParser parser(in);
    std::vector<TimeTagRecord> out;
    while (auto rec = parser.next()) out.push_back(*rec);
    return out;
}

void write_tags_csv(std::ostream& os, std::span<const TimeTagRecord> records) {
    os << "channel,time_ps\n";
    for (const auto& rec : records)
        os << rec.channel << ',' << csv::format_int(rec.time_ps) << '\n';
}

namespace {

// Attempt index of a tag within its cycle, or -1 when the tag falls outside
// every window (window = the first `window` seconds of each addressing
// slot).
int assign_attempt(const TrialSchedule& schedule, double local, double window) {
    if (local < 0) return -1;
    const int w = static_cast<int>(schedule.mode_offsets.size());
    int pass = schedule.pass_period > 0
                   ? std::min(static_cast<int>(local / schedule.pass_period), schedule.passes() - 1)
                   : 0;
    // a tag near the start of a pass may belong to the previous pass's tail
    for (int p = pass; p >= 0 && p >= pass - 1; --p) {
        const double lp = local - p * schedule.pass_period;
        auto it = std::upper_bound(schedule.mode_offsets.begin(), schedule.mode_offsets.end(), lp);
        if (it == schedule.mode_offsets.begin()) continue;
        const int idx = static_cast<int>(it - schedule.mode_offsets.begin()) - 1;
        if (lp - schedule.mode_offsets[idx] < window) {
            const int j = p * w + idx;
            return j < schedule.attempts_per_sync ? j : -1;
        }
    }
    return -1;
}

template <typename Source>
CorrelationHistogram correlate(Source&& source, const TrialSchedule& schedule,
                               double coincidence_window, int max_delay) {
    if (!schedule.valid())
        throw ConfigError("correlation_histogram: invalid trial schedule");
    if (coincidence_window <= 0 || coincidence_window > schedule.window_length)
        throw ConfigError("correlation_histogram: coincidence window must be in (0, window_length]");
    if (max_delay < 1)
        throw ConfigError("correlation_histogram: max_delay must be >= 1");

    CorrelationHistogram hist;
    hist.delays.resize(2 * max_delay + 1);
    for (int k = -max_delay; k <= max_delay; ++k) hist.delays[k + max_delay] = k;
    hist.coincidences.assign(2 * max_delay + 1, 0);

    long cycle = -1;
    std::int64_t sync_ps = 0;
    bool saw_det[2] = {false, false};
    std::deque<std::pair<long, int>> recent;  // (global attempt, channel)

    while (auto rec = source()) {
        if (rec->channel == 0) {
            ++cycle;
            sync_ps = rec->time_ps;
            continue;
        }
        saw_det[rec->channel - 1] = true;
        if (cycle < 0) continue;  // tags before the first sync are unassignable
        const double local = (rec->time_ps - sync_ps) * 1e-12;
        const int j = assign_attempt(schedule, local, coincidence_window);
        if (j < 0) continue;
        const long g = cycle * schedule.attempts_per_sync + j;
        while (!recent.empty() && g - recent.front().first > max_delay) recent.pop_front();
        for (const auto& [g2, ch2] : recent) {
            if (ch2 == rec->channel) continue;
            const long k = (rec->channel == 2) ? g - g2 : g2 - g;
            if (std::abs(k) <= max_delay) ++hist.coincidences[k + max_delay];
        }
        recent.emplace_back(g, rec->channel);
    }

    if (!saw_det[0] || !saw_det[1])
        throw InputError("correlation_histogram: stream must contain events on both detectors");

    double off_sum = 0.0;
    for (int k = -max_delay; k <= max_delay; ++k)
        if (k != 0) off_sum += static_cast<double>(hist.coincidences[k + max_delay]);
    if (off_sum == 0.0)
        throw NumericError("correlation_histogram: zero counts in all nonzero-delay bins, cannot normalize");
    const double n_off = 2.0 * max_delay;
    const double mean_off = off_sum / n_off;
    const double sigma_mean = std::sqrt(off_sum) / n_off;

    hist.normalized.resize(hist.delays.size());
    hist.stat_error.resize(hist.delays.size());
    for (size_t i = 0; i < hist.delays.size(); ++i) {
        const double c = static_cast<double>(hist.coincidences[i]);
        hist.normalized[i] = c / mean_off;
        const double sigma_c = std::sqrt(std::max(c, 1.0));  // 1-count bound for empty bins
        hist.stat_error[i] = std::sqrt(std::pow(sigma_c / mean_off, 2) +
                                       std::pow(c * sigma_mean / (mean_off * mean_off), 2));
    }
    return hist;
}

} // namespace

CorrelationHistogram correlation_histogram(std::span<const TimeTagRecord> tags,
                                           const TrialSchedule& schedule,
                                           double coincidence_window, int max_delay) {
    size_t i = 0;
    return correlate(
        [&]() -> std::optional<TimeTagRecord> {
            if (i >= tags.size()) return std::nullopt;
            return tags[i++];
        },
        schedule, coincidence_window, max_delay);
}

CorrelationHistogram correlation_histogram(std::istream& in, const TrialSchedule& schedule,
                                           double coincidence_window, int max_delay) {
    TagParser parser(in);
    return correlate([&]() { return parser.next(); }, schedule, coincidence_window, max_delay);
}

ModeProfile bin_temporal_profile(std::span<const TimeTagRecord> tags,
                                 const TrialSchedule& schedule, double bin_width) {
    if (!schedule.valid())
        throw ConfigError("bin_temporal_profile: invalid trial schedule");
    if (bin_width <= 0)
        throw ConfigError("bin_temporal_profile: bin width must be positive");

    const double extent =
        (schedule.passes() - 1) * schedule.pass_period + schedule.mode_offsets.back() +
        schedule.step_period;
    const auto n_bins = static_cast<size_t>(std::ceil(extent / bin_width - 1e-9));
    const double covered = n_bins * bin_width;

    ModeProfile profile;
    profile.bin_width = bin_width;
    profile.counts.assign(n_bins, 0);
    profile.mode_of_bin.assign(n_bins, -1);
    const int w = static_cast<int>(schedule.mode_offsets.size());
    for (size_t b = 0; b < n_bins; ++b) {
        const int j = assign_attempt(schedule, (b + 0.5) * bin_width, schedule.window_length);
        profile.mode_of_bin[b] = j < 0 ? -1 : j % w;
    }

    bool saw_sync = false;
    std::int64_t sync_ps = 0;
    for (const auto& rec : tags) {
        if (rec.channel == 0) {
            saw_sync = true;
            sync_ps = rec.time_ps;
            continue;
        }
        if (!saw_sync) continue;
        const double local = (rec.time_ps - sync_ps) * 1e-12;
        if (local < 0 || local >= covered) continue;
        ++profile.counts[static_cast<size_t>(local / bin_width)];
    }
    if (!saw_sync)
        throw InputError("bin_temporal_profile: no sync (channel 0) events in the stream");
    return profile;
}

void write_histogram_csv(std::ostream& os, const CorrelationHistogram& hist) {
    os << "delay,counts,normalized,error\n";
    for (size_t i = 0; i < hist.delays.size(); ++i)
        os << hist.delays[i] << ',' << csv::format_int(hist.coincidences[i]) << ','
           << csv::format_sci(hist.normalized[i], 9) << ','
           << csv::format_sci(hist.stat_error[i], 9) << '\n';
}

namespace {

// Deterministic samplers on top of mt19937_64: std:: distributions are
// implementation-defined, these are not.
struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double u01() { return (gen() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return u01() < p; }
    long poisson(double lambda) {
        if (lambda <= 0) return 0;
        const double l = std::exp(-lambda);
        long k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= u01();
        } while (p > l);
        return k - 1;
    }
};

} // namespace

std::vector<TimeTagRecord> generate_synthetic_tags(const SynthModel& model,
                                                   const TrialSchedule& schedule, long n_cycles,
                                                   std::uint64_t seed) {
    if (!schedule.valid())
        throw ConfigError("generate_synthetic_tags: invalid trial schedule");
    const int n_ions = static_cast<int>(model.emission_prob.size());
    if (n_ions != static_cast<int>(schedule.mode_offsets.size()))
        throw ConfigError("generate_synthetic_tags: one emission probability per mode required");
    if (model.crosstalk.rows() != n_ions || model.crosstalk.cols() != n_ions)
        throw ConfigError("generate_synthetic_tags: crosstalk matrix must be n_ions x n_ions");
    for (double p : model.emission_prob)
        if (p < 0 || p > 1)
            throw ConfigError("generate_synthetic_tags: emission probabilities must be in [0, 1]");
    if (model.efficiency < 0 || model.efficiency > 1)
        throw ConfigError("generate_synthetic_tags: efficiency must be in [0, 1]");

    Rng rng(seed);
    std::vector<TimeTagRecord> out;
    std::vector<TimeTagRecord> cycle_events;
    const double period = schedule.cycle_period;

    for (long c = 0; c < n_cycles; ++c) {
        const auto t0 = static_cast<std::int64_t>(std::llround(c * period * 1e12));
        cycle_events.clear();
        cycle_events.push_back({0, t0});

        for (int det = 1; det <= 2; ++det) {
            const long darks = rng.poisson(model.dark_rate * period);
            for (long d = 0; d < darks; ++d)
                cycle_events.push_back(
                    {det, t0 + static_cast<std::int64_t>(std::llround(rng.u01() * period * 1e12))});
        }

        for (int j = 0; j < schedule.attempts_per_sync; ++j) {
            const int addressed = j % n_ions;
            const double start = schedule.attempt_start(j);
            for (int i = 0; i < n_ions; ++i) {
                const double p = model.emission_prob[addressed] * model.crosstalk(addressed, i);
                if (p <= 0 || !rng.bernoulli(std::min(p, 1.0))) continue;
                if (!rng.bernoulli(model.efficiency)) continue;
                const int det = rng.bernoulli(0.5) ? 1 : 2;
                const double t = start + rng.u01() * schedule.window_length;
                cycle_events.push_back(
                    {det, t0 + static_cast<std::int64_t>(std::llround(t * 1e12))});
            }
        }

        std::sort(cycle_events.begin(), cycle_events.end(),
                  [](const TimeTagRecord& a, const TimeTagRecord& b) {
                      return a.time_ps != b.time_ps ? a.time_ps < b.time_ps
                                                    : a.channel < b.channel;
                  });
        out.insert(out.end(), cycle_events.begin(), cycle_events.end());
    }
    return out;
}

} // namespace ionmux::timetags
