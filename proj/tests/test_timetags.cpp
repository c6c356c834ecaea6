#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ionmux/chain.hpp"
#include "ionmux/errors.hpp"
#include "ionmux/photonics.hpp"
#include "ionmux/timetags.hpp"
#include "ionmux/waveform.hpp"

using namespace ionmux;
using namespace ionmux::timetags;

namespace {

// compact 9-window schedule for statistics-heavy tests
TrialSchedule small_schedule(int passes = 2) {
    TrialSchedule ts;
    ts.window_length = 300e-9;
    ts.step_period = 2e-6;
    for (int i = 0; i < 9; ++i) ts.mode_offsets.push_back(1e-6 + i * ts.step_period);
    ts.pass_period = 25e-6;
    ts.cycle_period = 60e-6;
    ts.attempts_per_sync = 9 * passes;
    return ts;
}

Eigen::MatrixXd identity_crosstalk(int n) { return Eigen::MatrixXd::Identity(n, n); }

Eigen::MatrixXd neighbor_crosstalk(int n, double x, bool wrap) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, (i + 1) % n) = (i + 1 < n || wrap) ? x : m(i, (i + 1) % n);
        m(i, (i + n - 1) % n) = (i > 0 || wrap) ? x : m(i, (i + n - 1) % n);
    }
    return m;
}

} // namespace

TEST_CASE("trial schedule derived from the voltage schedule") {
    chain::ChainConfig c;
    c.n_ions = 9;
    auto spacings = chain::chain_spacings(chain::equilibrium_positions(c));
    waveform::TrapCalibration cal;
    cal.v_base1 = 22.985;
    auto schedule = waveform::build_schedule(spacings, cal, waveform::ScheduleTimings{});
    auto ts = trial_schedule_from(schedule);

    REQUIRE(ts.valid());
    CHECK(ts.mode_offsets.size() == 9);
    CHECK(ts.attempts_per_sync == 18);
    CHECK(ts.passes() == 2);
    CHECK(ts.window_length == doctest::Approx(1.7e-6));
    CHECK(ts.step_period == doctest::Approx(10.8e-6));
    // pump + forward + return
    CHECK(ts.pass_period == doctest::Approx(3e-6 + 86.4e-6 + 35e-6));
    // cooling + 2 passes
    CHECK(ts.cycle_period == doctest::Approx(200e-6 + 2 * 124.4e-6));
    // consecutive windows are one step period apart
    for (int i = 0; i + 1 < 9; ++i)
        CHECK(ts.mode_offsets[i + 1] - ts.mode_offsets[i] == doctest::Approx(10.8e-6));
    // second pass picks up after the return
    CHECK(ts.attempt_start(9) - ts.attempt_start(8) ==
          doctest::Approx(ts.pass_period - 8 * ts.step_period));
}

TEST_CASE("tag csv parsing") {
    SUBCASE("empty file gives an empty sequence") {
        std::istringstream in("");
        CHECK(parse_time_tags(in).empty());
    }

    SUBCASE("three records round-trip exactly") {
        std::vector<TimeTagRecord> recs{{0, 0}, {1, 1234}, {2, 99999999999999}};
        std::ostringstream os;
        write_tags_csv(os, recs);
        CHECK(os.str() == "channel,time_ps\n0,0\n1,1234\n2,99999999999999\n");
        std::istringstream in(os.str());
        CHECK(parse_time_tags(in) == recs);
    }

    SUBCASE("timestamp regression is rejected with the line number") {
        std::istringstream in("channel,time_ps\n1,100\n2,99\n");
        try {
            parse_time_tags(in);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }

    SUBCASE("malformed rows and channels are rejected") {
        std::istringstream a("channel,time_ps\n1\n");
        CHECK_THROWS_AS(parse_time_tags(a), InputError);
        std::istringstream b("channel,time_ps\n7,10\n");
        CHECK_THROWS_AS(parse_time_tags(b), InputError);
        std::istringstream c("channel,time_ps\n1,abc\n");
        CHECK_THROWS_AS(parse_time_tags(c), InputError);
        std::istringstream d("bad header\n1,10\n");
        CHECK_THROWS_AS([&] { TagParser parser(d); }(), InputError);
    }

    SUBCASE("round trip on generated streams is exact") {
        auto ts = small_schedule();
        SynthModel model{std::vector<double>(9, 0.3), identity_crosstalk(9), 0.5, 2e4};
        auto tags = generate_synthetic_tags(model, ts, 500, 42);
        std::ostringstream os;
        write_tags_csv(os, tags);
        std::istringstream in(os.str());
        CHECK(parse_time_tags(in) == tags);
    }
}

TEST_CASE("synthetic generator basics") {
    auto ts = small_schedule();

    SUBCASE("no emission, no darks: sync markers only") {
        SynthModel model{std::vector<double>(9, 0.0), identity_crosstalk(9), 1.0, 0.0};
        auto tags = generate_synthetic_tags(model, ts, 25, 7);
        REQUIRE(tags.size() == 25);
        for (long c = 0; c < 25; ++c) {
            CHECK(tags[c].channel == 0);
            CHECK(tags[c].time_ps ==
                  static_cast<std::int64_t>(std::llround(c * ts.cycle_period * 1e12)));
        }
    }

    SUBCASE("same seed reproduces the stream exactly") {
        SynthModel model{std::vector<double>(9, 0.4), neighbor_crosstalk(9, 0.01, false), 0.3,
                         1e4};
        auto a = generate_synthetic_tags(model, ts, 300, 1234);
        auto b = generate_synthetic_tags(model, ts, 300, 1234);
        CHECK(a == b);
        auto c = generate_synthetic_tags(model, ts, 300, 1235);
        CHECK(a != c);
    }

    SUBCASE("detected counts follow p x M x efficiency / 2 per detector") {
        const double p = 0.37, eff = 0.5;
        const long cycles = 4000;
        SynthModel model{std::vector<double>(9, p), identity_crosstalk(9), eff, 0.0};
        auto tags = generate_synthetic_tags(model, ts, cycles, 99);
        long det1 = 0, det2 = 0;
        for (const auto& t : tags) {
            if (t.channel == 1) ++det1;
            if (t.channel == 2) ++det2;
        }
        const double attempts = static_cast<double>(cycles) * ts.attempts_per_sync;
        const double mean = p * eff / 2.0 * attempts;
        const double sigma = std::sqrt(mean);
        CHECK(std::abs(det1 - mean) < 5 * sigma);
        CHECK(std::abs(det2 - mean) < 5 * sigma);
    }
}

TEST_CASE("temporal profile binning") {
    auto ts = small_schedule(1);

    SUBCASE("a single tag lands in its mode's bin") {
        // place one photon inside the mode-3 window
        const double t = ts.mode_offsets[3] + 0.5 * ts.window_length;
        std::vector<TimeTagRecord> tags{{0, 0},
                                        {1, static_cast<std::int64_t>(t * 1e12)}};
        auto profile = bin_temporal_profile(tags, ts, 250e-9);
        std::int64_t total = 0;
        for (size_t b = 0; b < profile.counts.size(); ++b) {
            total += profile.counts[b];
            if (profile.counts[b] > 0) CHECK(profile.mode_of_bin[b] == 3);
        }
        CHECK(total == 1);
    }

    SUBCASE("no sync events is an error") {
        std::vector<TimeTagRecord> tags{{1, 100}, {2, 300}};
        CHECK_THROWS_AS(bin_temporal_profile(tags, ts, 250e-9), InputError);
    }

    SUBCASE("uniform dark tags give a flat histogram (5 sigma)") {
        SynthModel model{std::vector<double>(9, 0.0), identity_crosstalk(9), 1.0, 2e5};
        const long cycles = 3000;
        auto tags = generate_synthetic_tags(model, ts, cycles, 5);
        auto profile = bin_temporal_profile(tags, ts, 250e-9);
        const double lambda = 2e5 * 250e-9 * cycles * 2;  // two detectors
        for (auto count : profile.counts)
            CHECK(std::abs(count - lambda) < 5 * std::sqrt(lambda));
    }

    SUBCASE("nine-mode emission shows nine labeled peaks") {
        SynthModel model{std::vector<double>(9, 0.9), identity_crosstalk(9), 1.0, 0.0};
        auto tags = generate_synthetic_tags(model, ts, 2000, 21);
        auto profile = bin_temporal_profile(tags, ts, 100e-9);
        std::vector<std::int64_t> per_mode(9, 0);
        std::int64_t unassigned = 0;
        for (size_t b = 0; b < profile.counts.size(); ++b) {
            if (profile.mode_of_bin[b] >= 0)
                per_mode[profile.mode_of_bin[b]] += profile.counts[b];
            else
                unassigned += profile.counts[b];
        }
        CHECK(unassigned == 0);
        for (int m = 0; m < 9; ++m) CHECK(per_mode[m] > 1000);
    }
}

TEST_CASE("correlation histogram") {
    auto ts = small_schedule();

    SUBCASE("ideal single-emitter stream: normalized[0] = 0 exactly") {
        SynthModel model{std::vector<double>(9, 1.0), identity_crosstalk(9), 1.0, 0.0};
        auto tags = generate_synthetic_tags(model, ts, 3000, 11);
        auto hist = correlation_histogram(tags, ts, ts.window_length, 8);
        REQUIRE(hist.delays.size() == 17);
        CHECK(hist.delays[8] == 0);
        CHECK(hist.coincidences[8] == 0);
        CHECK(hist.normalized[8] == 0.0);
        // off-delay bins are well populated
        CHECK(hist.coincidences[0] > 100);
        // stat_error uses the 1-count convention on the empty bin
        CHECK(hist.stat_error[8] > 0.0);
    }

    SUBCASE("two independent Poisson streams: all bins at 1 within 5 sigma") {
        SynthModel model{std::vector<double>(9, 0.0), identity_crosstalk(9), 1.0, 3e5};
        auto tags = generate_synthetic_tags(model, ts, 40000, 17);
        auto hist = correlation_histogram(tags, ts, ts.window_length, 8);
        for (size_t i = 0; i < hist.delays.size(); ++i) {
            CHECK(std::abs(hist.normalized[i] - 1.0) < 5 * hist.stat_error[i]);
            CHECK(hist.stat_error[i] < 0.2);
        }
    }

    SUBCASE("detector swap mirrors the histogram") {
        SynthModel model{std::vector<double>(9, 0.6), neighbor_crosstalk(9, 0.05, true), 0.8,
                         1e4};
        auto tags = generate_synthetic_tags(model, ts, 20000, 23);
        auto hist = correlation_histogram(tags, ts, ts.window_length, 6);
        auto swapped_tags = tags;
        for (auto& t : swapped_tags)
            if (t.channel) t.channel = 3 - t.channel;
        auto swapped = correlation_histogram(swapped_tags, ts, ts.window_length, 6);
        for (size_t i = 0; i < hist.delays.size(); ++i)
            CHECK(hist.coincidences[i] ==
                  swapped.coincidences[hist.delays.size() - 1 - i]);
    }

    SUBCASE("streaming and in-memory analyses agree") {
        SynthModel model{std::vector<double>(9, 0.5), neighbor_crosstalk(9, 0.01, true), 0.5,
                         5e3};
        auto tags = generate_synthetic_tags(model, ts, 5000, 3);
        auto in_memory = correlation_histogram(tags, ts, ts.window_length, 8);
        std::ostringstream os;
        write_tags_csv(os, tags);
        std::istringstream in(os.str());
        auto streamed = correlation_histogram(in, ts, ts.window_length, 8);
        CHECK(in_memory.coincidences == streamed.coincidences);
        CHECK(in_memory.normalized == streamed.normalized);
    }

    SUBCASE("error paths") {
        // no detector-2 events
        std::vector<TimeTagRecord> one_det{{0, 0}, {1, 1100000}, {1, 3100000}};
        CHECK_THROWS_AS(correlation_histogram(one_det, ts, ts.window_length, 8), InputError);
        // zero counts everywhere off-delay
        std::vector<TimeTagRecord> sparse{{0, 0},
                                          {1, 1100000},
                                          {2, 1100001}};
        CHECK_THROWS_AS(correlation_histogram(sparse, ts, ts.window_length, 8), NumericError);
    }
}

TEST_CASE("crosstalk stream reproduces the predicted g2 across the crosstalk grid") {
    auto ts = small_schedule();
    const double p = 0.5, eff = 0.06, floor = 0.010;
    const double rho0 = p * eff;
    int seed = 201;
    for (double crosstalk : {0.0, 0.005, 0.0099, 0.02}) {
        // dark rate tuned to contribute ~0.01 at zero delay (see predicted_g2)
        SynthModel model{std::vector<double>(9, p), neighbor_crosstalk(9, crosstalk, true), eff,
                         floor * rho0 / 4.0 / ts.window_length};
        auto tags = generate_synthetic_tags(model, ts, 150000, seed++);
        auto hist = correlation_histogram(tags, ts, ts.window_length, 8);
        const double predicted =
            photonics::predicted_g2(rho0, crosstalk * rho0, crosstalk * rho0, floor);
        CHECK(std::abs(hist.normalized[8] - predicted) < 2.0 * hist.stat_error[8]);
    }
}
