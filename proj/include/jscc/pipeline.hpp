#pragma once

/**
 * @file pipeline.hpp
 * @brief Dual-worker streaming harness: an encode worker and a transmit
 *        worker joined by a bounded FIFO buffer, with back-pressure instead
 *        of frame dropping. The discrete-event mode is the deterministic
 *        reference; the wall-clock mode runs two real threads to exercise
 *        the same contract against a clock.
 */

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "jscc/errors.hpp"
#include "jscc/features.hpp"
#include "jscc/metrics.hpp"

namespace jscc {

enum class PipelineMode { discrete_event, wall_clock };

/// Per-frame stage duration in seconds; rng allows sampled models.
using StageTimeModel = std::function<double(std::size_t frame, std::mt19937_64& rng)>;

inline StageTimeModel fixed_time(double seconds) {
    return [seconds](std::size_t, std::mt19937_64&) { return seconds; };
}

inline StageTimeModel uniform_time(double base_seconds, double half_range_seconds) {
    return [=](std::size_t, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> u(base_seconds - half_range_seconds,
                                                 base_seconds + half_range_seconds);
        return std::max(0.0, u(rng));
    };
}

struct PipelineConfig {
    double frame_rate = 30.0;
    std::size_t buffer_capacity = 4;
    std::size_t n_frames = 0;
    PipelineMode mode = PipelineMode::discrete_event;
    StageTimeModel encode_time = fixed_time(0.0);
    StageTimeModel transmit_time = fixed_time(0.0);

    void validate() const {
        if (frame_rate <= 0.0)
            throw std::invalid_argument("PipelineConfig: frame rate must be positive");
        if (buffer_capacity < 1)
            throw std::invalid_argument("PipelineConfig: buffer capacity must be >= 1");
        if (!encode_time || !transmit_time)
            throw std::invalid_argument("PipelineConfig: stage time models required");
    }
};

/// Content stages. Defaults are trivial so pure timing studies need none.
struct PipelineStages {
    std::function<FeatureBlock(std::size_t frame)> encode;
    std::function<FeatureBlock(const FeatureBlock&)> channel;
    std::function<double(const FeatureBlock& tx, const FeatureBlock& rx)> quality;
};

/// Timestamps (seconds from run start) of one frame's trip through both
/// workers. blocked_s > 0 means the encode worker visited the blocking state.
struct FrameEvent {
    std::size_t frame_index = 0;
    double arrival_time = 0.0;
    double encode_start = 0.0;
    double encode_end = 0.0;
    double push_time = 0.0;       ///< buffer accepted the frame
    double transmit_start = 0.0;  ///< buffer pop
    double transmit_end = 0.0;
    double decode_end = 0.0;
    double blocked_s = 0.0;  ///< encode worker back-pressure wait
    double quality = 0.0;    ///< stage-defined per-frame quality metric
};

struct PipelineReport {
    std::vector<FrameEvent> frames;
    rvec decode_gaps;  ///< decode_end deltas between consecutive frames
    std::vector<std::pair<double, long>> buffer_trace;  ///< (time, occupancy)
    std::size_t peak_occupancy = 0;

    std::string to_csv() const {
        std::string out =
            "frame,arrival,encode_start,encode_end,push,transmit_start,transmit_end,"
            "decode_end,blocked,quality\n";
        char buf[256];
        for (const FrameEvent& f : frames) {
            std::snprintf(buf, sizeof(buf),
                          "%zu,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.12g\n",
                          f.frame_index, f.arrival_time, f.encode_start, f.encode_end,
                          f.push_time, f.transmit_start, f.transmit_end, f.decode_end,
                          f.blocked_s, f.quality);
            out += buf;
        }
        return out;
    }
};

namespace detail {

inline void finalize_report(PipelineReport& report, std::size_t capacity) {
    report.decode_gaps.clear();
    for (std::size_t i = 1; i < report.frames.size(); ++i) {
        report.decode_gaps.push_back(report.frames[i].decode_end -
                                     report.frames[i - 1].decode_end);
    }
    // occupancy trace: for ties, earlier frames settle first and a frame's
    // push precedes its own pop
    struct Ev {
        double t;
        std::size_t frame;
        int kind;  // 0 = push, 1 = pop
    };
    std::vector<Ev> evs;
    for (const FrameEvent& f : report.frames) {
        evs.push_back({f.push_time, f.frame_index, 0});
        evs.push_back({f.transmit_start, f.frame_index, 1});
    }
    std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.kind < b.kind;
    });
    long occ = 0;
    report.buffer_trace.clear();
    report.peak_occupancy = 0;
    for (const Ev& e : evs) {
        occ += (e.kind == 0) ? 1 : -1;
        report.buffer_trace.emplace_back(e.t, occ);
        if (occ < 0 || occ > static_cast<long>(capacity))
            throw Error("pipeline: buffer occupancy out of bounds");
        report.peak_occupancy =
            std::max(report.peak_occupancy, static_cast<std::size_t>(std::max(occ, 0L)));
    }
}

inline double run_quality(const PipelineStages& stages, std::size_t frame,
                          FeatureBlock* tx_out) {
    if (!stages.encode) return 0.0;
    FeatureBlock tx = stages.encode(frame);
    FeatureBlock rx = stages.channel ? stages.channel(tx) : tx;
    if (tx_out) *tx_out = tx;
    return stages.quality ? stages.quality(tx, rx) : 0.0;
}

inline PipelineReport run_discrete_event(const PipelineConfig& config,
                                         const PipelineStages& stages, const rvec& enc_times,
                                         const rvec& trans_times) {
    PipelineReport report;
    report.frames.resize(config.n_frames);
    const double interval = 1.0 / config.frame_rate;
    double encoder_free = 0.0;
    double transmitter_free = 0.0;
    std::vector<double> transmit_starts(config.n_frames, 0.0);
    for (std::size_t i = 0; i < config.n_frames; ++i) {
        FrameEvent& f = report.frames[i];
        f.frame_index = i;
        f.arrival_time = static_cast<double>(i) * interval;
        f.encode_start = std::max(f.arrival_time, encoder_free);
        f.encode_end = f.encode_start + enc_times[i];
        const double space_ready =
            (i >= config.buffer_capacity) ? transmit_starts[i - config.buffer_capacity] : 0.0;
        f.push_time = std::max(f.encode_end, space_ready);
        f.blocked_s = f.push_time - f.encode_end;
        f.transmit_start = std::max(f.push_time, transmitter_free);
        transmit_starts[i] = f.transmit_start;
        f.transmit_end = f.transmit_start + trans_times[i];
        f.decode_end = f.transmit_end;
        encoder_free = f.push_time;
        transmitter_free = f.transmit_end;
        f.quality = run_quality(stages, i, nullptr);
    }
    finalize_report(report, config.buffer_capacity);
    return report;
}

/// Bounded FIFO with blocking put/take; the only state shared between the
/// wall-clock workers. Put/take timestamps are taken inside the critical
/// section so the recorded trace replays the true queue history.
template <typename T>
class BoundedQueue {
public:
    BoundedQueue(std::size_t capacity, std::function<double()> now)
        : capacity_(capacity), now_(std::move(now)) {}

    double put(T item) {
        std::unique_lock<std::mutex> lock(mutex_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_; });
        items_.push_back(std::move(item));
        const double t = now_();
        not_empty_.notify_one();
        return t;
    }

    std::pair<T, double> take() {
        std::unique_lock<std::mutex> lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty(); });
        T item = std::move(items_.front());
        items_.pop_front();
        const double t = now_();
        not_full_.notify_one();
        return {std::move(item), t};
    }

private:
    std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    std::size_t capacity_;
    std::function<double()> now_;
};

inline PipelineReport run_wall_clock(const PipelineConfig& config, const PipelineStages& stages,
                                     const rvec& enc_times, const rvec& trans_times) {
    using clock = std::chrono::steady_clock;
    PipelineReport report;
    report.frames.resize(config.n_frames);
    const auto start = clock::now();
    auto since_start = [&start] {
        return std::chrono::duration<double>(clock::now() - start).count();
    };
    const double interval = 1.0 / config.frame_rate;

    struct Item {
        std::size_t frame;
        FeatureBlock payload;
    };
    BoundedQueue<Item> queue(config.buffer_capacity, since_start);

    std::thread encoder([&] {
        for (std::size_t i = 0; i < config.n_frames; ++i) {
            FrameEvent& f = report.frames[i];
            f.frame_index = i;
            f.arrival_time = static_cast<double>(i) * interval;
            std::this_thread::sleep_until(
                start + std::chrono::duration_cast<clock::duration>(
                            std::chrono::duration<double>(f.arrival_time)));
            f.encode_start = since_start();
            Item item{i, stages.encode ? stages.encode(i) : FeatureBlock::zeros(1, 1, 1)};
            std::this_thread::sleep_for(std::chrono::duration<double>(enc_times[i]));
            f.encode_end = since_start();
            f.push_time = queue.put(std::move(item));
            f.blocked_s = f.push_time - f.encode_end;
        }
    });

    std::thread transmitter([&] {
        for (std::size_t i = 0; i < config.n_frames; ++i) {
            auto [item, t_take] = queue.take();
            FrameEvent& f = report.frames[item.frame];
            f.transmit_start = t_take;
            FeatureBlock rx = stages.channel ? stages.channel(item.payload) : item.payload;
            std::this_thread::sleep_for(std::chrono::duration<double>(trans_times[item.frame]));
            f.transmit_end = since_start();
            f.decode_end = f.transmit_end;
            f.quality = stages.quality ? stages.quality(item.payload, rx) : 0.0;
        }
    });

    encoder.join();
    transmitter.join();
    finalize_report(report, config.buffer_capacity);
    return report;
}

} // namespace detail

/**
 * Run the dual-worker pipeline. Worker one cycles idle -> encoding ->
 * (blocking on a full buffer) per frame arrival; worker two consumes the
 * buffer FIFO and transmits. Back-pressure blocks, nothing is dropped, and
 * decode order equals frame order.
 */
inline PipelineReport run_pipeline(const PipelineConfig& config, const PipelineStages& stages,
                                   std::uint64_t seed) {
    config.validate();
    if (config.n_frames == 0) return {};
    std::mt19937_64 rng(seed);
    rvec enc_times(config.n_frames), trans_times(config.n_frames);
    for (std::size_t i = 0; i < config.n_frames; ++i) {
        enc_times[i] = config.encode_time(i, rng);
        trans_times[i] = config.transmit_time(i, rng);
        if (enc_times[i] < 0.0 || trans_times[i] < 0.0)
            throw std::invalid_argument("run_pipeline: negative stage time");
    }
    return config.mode == PipelineMode::discrete_event
               ? detail::run_discrete_event(config, stages, enc_times, trans_times)
               : detail::run_wall_clock(config, stages, enc_times, trans_times);
}

struct PipelineSummary {
    double max_gap_s = 0.0;
    double mean_gap_s = 0.0;
    double p95_gap_s = 0.0;
    double fraction_within = 1.0;  ///< gaps <= frame_interval
    std::size_t peak_occupancy = 0;
};

inline PipelineSummary summarize_report(const PipelineReport& report, double frame_interval) {
    if (report.frames.empty()) throw EmptyReportError("summarize_report: no frames");
    PipelineSummary s;
    s.peak_occupancy = report.peak_occupancy;
    if (report.decode_gaps.empty()) return s;
    double sum = 0.0;
    std::size_t within = 0;
    // relative slack: a gap of exactly one interval may land 1 ulp above it
    const double limit = frame_interval * (1.0 + 1e-9);
    for (double g : report.decode_gaps) {
        s.max_gap_s = std::max(s.max_gap_s, g);
        sum += g;
        if (g <= limit) ++within;
    }
    s.mean_gap_s = sum / static_cast<double>(report.decode_gaps.size());
    s.p95_gap_s = percentile(report.decode_gaps, 0.95);
    s.fraction_within =
        static_cast<double>(within) / static_cast<double>(report.decode_gaps.size());
    return s;
}

} // namespace jscc
