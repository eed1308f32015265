#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "beamlab/beamformer.hpp"
#include "beamlab/detection_sim.hpp"
#include "beamlab/fusion.hpp"
#include "beamlab/scene.hpp"

namespace beamlab {

// FIFO with a hard depth bound. Producers either block until space frees up
// (default) or evict the oldest entry; evictions are counted.
template <typename T>
class BoundedQueue {
  public:
    BoundedQueue(std::size_t max_depth, bool drop_oldest)
        : max_depth_(max_depth), drop_oldest_(drop_oldest) {
        if (max_depth_ == 0)
            throw std::invalid_argument("queue depth must be positive");
    }

    // false when the queue was closed before the item could be accepted
    bool push(T item) {
        std::unique_lock<std::mutex> lock(mutex_);
        if (drop_oldest_) {
            if (closed_)
                return false;
            if (items_.size() >= max_depth_) {
                items_.pop_front();
                ++drops_;
            }
        } else {
            cv_.wait(lock, [&] { return closed_ || items_.size() < max_depth_; });
            if (closed_)
                return false;
        }
        items_.push_back(std::move(item));
        cv_.notify_all();
        return true;
    }

    // empty optional once the queue is closed and drained
    std::optional<T> pop() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty())
            return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        cv_.notify_all();
        return item;
    }

    void close() {
        std::lock_guard<std::mutex> lock(mutex_);
        closed_ = true;
        cv_.notify_all();
    }

    std::uint64_t drops() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return drops_;
    }

  private:
    std::size_t max_depth_;
    bool drop_oldest_;
    std::deque<T> items_;
    bool closed_ = false;
    std::uint64_t drops_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

struct LatencyRecord {
    std::string stage; // "audio", "vision", "beamforming"
    double t_capture = 0.0;
    double t_end = 0.0;

    double e2e_ms() const { return (t_end - t_capture) * 1e3; }
};

struct LatencyStats {
    std::size_t count = 0;
    double mean_ms = 0.0;
    double std_ms = 0.0; // sample standard deviation
    double p95_ms = 0.0; // nearest-rank percentile
};

// Stats over one stage's records with t_capture >= warmup_s. Throws when no
// record survives the filter.
LatencyStats latency_stats(const std::vector<LatencyRecord>& records,
                           const std::string& stage, double warmup_s);

enum class PipelineMode { realtime_paced, as_fast_as_possible };

struct SteeringLogRow {
    std::int64_t chunk_index = 0;
    double chunk_midpoint_s = 0.0;
    std::optional<double> doa_timestamp_s; // empty: no visual estimate yet
    double theta_rad = 0.0;
    double phi_rad = 0.0;
};

struct PipelineSettings {
    PipelineMode mode = PipelineMode::realtime_paced;
    std::size_t audio_queue_depth = 4;
    std::size_t detection_queue_depth = 2;
    bool drop_oldest = false;
    std::size_t history_capacity = 64;
    double watchdog_timeout_s = 5.0;
    double warmup_s = 10.0;
    double vision_latency_offset_s = 0.064; // recovers capture time from event timestamps
    // bench support: process this many seconds by cycling the scene
    double duration_override_s = 0.0;
    bool loop_scene = false;
    // fault-injection hooks for tests
    double vision_stall_ms = 0.0;
    std::int64_t vision_stall_at_event = -1;
};

struct PipelineResult {
    Eigen::VectorXd output;
    std::vector<SteeringLogRow> steering_log;
    std::vector<LatencyRecord> latency;
    std::vector<double> pacing_errors_s; // realtime producer wake lateness
    std::int64_t chunks_expected = 0;
    std::int64_t chunks_processed = 0;
    std::uint64_t audio_drops = 0;
    std::uint64_t detection_drops = 0;
    std::uint64_t skipped_detections = 0; // events that failed geometry conversion
    bool no_visual_lock = false;
};

// Four threads: audio producer, detection producer, vision consumer,
// beamformer consumer, communicating through bounded queues and the DoA
// history. In realtime mode producers pace against the wall clock and audio
// is never gated on vision. In as-fast-as-possible mode the beamformer
// publishes its virtual now (the current chunk midpoint) and waits until
// the vision consumer has ingested every detection available by then, which
// makes runs bit-identical.
PipelineResult run_pipeline(const MultichannelSignal& scene,
                            const std::vector<DetectionEvent>& detections,
                            const std::string& steered_label,
                            const MicArray<double>& array,
                            const PropagationConfig<double>& prop,
                            const FrameSpec& frame,
                            const CameraModel<double>& camera,
                            const MountingOffset<double>& offset,
                            const PipelineSettings& settings);

// DoA of a detection through the vision geometry chain; empty when the
// event does not define one (non-positive depth after noise).
std::optional<DoaAngles<double>> doa_from_detection(const DetectionEvent& event,
                                                    const CameraModel<double>& camera,
                                                    const MountingOffset<double>& offset);

// Pure replay of the pipeline's fusion rule: per chunk midpoint, ingest all
// detections available by then (steered label only) into a bounded history
// and look up closest-not-future. Chunks before the first visual lock get no
// entry (the live pipeline leaves the beamformer unsteered there); from the
// lock onward each chunk midpoint carries the DoA it applied.
// process_offline with this schedule reproduces the AFAP pipeline output bit
// for bit.
std::vector<SteeringEntry> induced_steering_schedule(const std::vector<DetectionEvent>& detections,
                                                     const std::string& steered_label,
                                                     const CameraModel<double>& camera,
                                                     const MountingOffset<double>& offset,
                                                     std::int64_t num_chunks,
                                                     const FrameSpec& frame,
                                                     double sample_rate,
                                                     std::size_t history_capacity);

void write_steering_log(const std::filesystem::path& path,
                        const std::vector<SteeringLogRow>& rows);

void write_latency_csv(const std::filesystem::path& path,
                       const std::vector<LatencyRecord>& records);

std::string make_run_report(const PipelineResult& result, const PipelineSettings& settings);

} // namespace beamlab
