#include "beamlab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "beamlab/csv.hpp"

namespace beamlab {

LatencyStats latency_stats(const std::vector<LatencyRecord>& records,
                           const std::string& stage, double warmup_s) {
    std::vector<double> vals;
    for (const auto& rec : records)
        if (rec.stage == stage && rec.t_capture >= warmup_s)
            vals.push_back(rec.e2e_ms());
    if (vals.empty())
        throw std::invalid_argument("no latency records for stage '" + stage +
                                    "' after the warm-up discard");
    LatencyStats stats;
    stats.count = vals.size();
    double sum = 0.0;
    for (double v : vals)
        sum += v;
    stats.mean_ms = sum / static_cast<double>(vals.size());
    if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals)
            ss += (v - stats.mean_ms) * (v - stats.mean_ms);
        stats.std_ms = std::sqrt(ss / static_cast<double>(vals.size() - 1));
    }
    std::sort(vals.begin(), vals.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(vals.size())));
    stats.p95_ms = vals[std::max<std::size_t>(rank, 1) - 1];
    return stats;
}

std::optional<DoaAngles<double>> doa_from_detection(const DetectionEvent& event,
                                                    const CameraModel<double>& camera,
                                                    const MountingOffset<double>& offset) {
    if (!(event.depth_m > 0.0))
        return std::nullopt;
    const Eigen::Vector3d p_world = to_world(camera, back_project(camera, event.centroid, event.depth_m));
    if (!(p_world.z() > 0.0))
        return std::nullopt;
    return doa_from_position(p_world, offset);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// AFAP handshake: the beamformer publishes the midpoint it is about to
// process; the vision consumer publishes the timestamp of the next
// detection it has not ingested yet.
struct SyncState {
    std::mutex mutex;
    std::condition_variable cv;
    double audio_vt = -kInf;
    double vision_next_pending = -kInf;
    bool vision_done = false;
    std::atomic<bool> aborted{false};
};

} // namespace

PipelineResult run_pipeline(const MultichannelSignal& scene,
                            const std::vector<DetectionEvent>& detections,
                            const std::string& steered_label,
                            const MicArray<double>& array,
                            const PropagationConfig<double>& prop,
                            const FrameSpec& frame,
                            const CameraModel<double>& camera,
                            const MountingOffset<double>& offset,
                            const PipelineSettings& settings) {
    validate_frame_spec(frame);
    if (scene.channels() != array.count())
        throw std::invalid_argument("scene channel count does not match the array");
    const int N = frame.frame_length;
    const int H = frame.hop;
    const double fs = prop.sample_rate;
    const Eigen::Index scene_len = scene.length();
    if (scene_len < N)
        throw std::invalid_argument("scene is shorter than one frame");

    const double duration_s = settings.duration_override_s > 0.0
                                  ? settings.duration_override_s
                                  : static_cast<double>(scene_len) / fs;
    const auto total_len = static_cast<Eigen::Index>(std::llround(duration_s * fs));
    if (!settings.loop_scene && total_len > scene_len)
        throw std::invalid_argument("duration override beyond the scene length requires loop_scene");
    const std::int64_t num_chunks = total_len >= N ? (total_len - N) / H + 1 : 0;

    const bool realtime = settings.mode == PipelineMode::realtime_paced;

    BoundedQueue<AudioChunk> audio_q(settings.audio_queue_depth, settings.drop_oldest);
    BoundedQueue<DetectionEvent> det_q(settings.detection_queue_depth, settings.drop_oldest);
    DoaHistory history(settings.history_capacity);
    SyncState sync;

    PipelineResult result;
    result.chunks_expected = num_chunks;
    result.output = Eigen::VectorXd::Zero(total_len);

    const auto wall_start = std::chrono::steady_clock::now();
    auto timeline_now = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    };

    std::vector<double> pacing_errors;
    std::vector<LatencyRecord> vision_latency;
    std::vector<LatencyRecord> audio_latency;
    std::atomic<std::int64_t> processed{0};
    std::atomic<std::uint64_t> skipped{0};
    std::atomic<bool> threads_running{true};

    std::thread audio_producer([&] {
        for (std::int64_t r = 0; r < num_chunks && !sync.aborted; ++r) {
            AudioChunk chunk;
            chunk.chunk_index = r;
            chunk.timestamp = static_cast<double>(r) * H / fs;
            chunk.samples.resize(scene.channels(), N);
            const Eigen::Index base = static_cast<Eigen::Index>(r) * H;
            if (!settings.loop_scene && base + N <= scene_len) {
                chunk.samples = scene.samples.middleCols(base, N);
            } else {
                for (int j = 0; j < N; ++j)
                    chunk.samples.col(j) = scene.samples.col((base + j) % scene_len);
            }
            if (realtime) {
                const double deadline = (static_cast<double>(base) + N) / fs;
                std::this_thread::sleep_until(
                    wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>(deadline)));
                pacing_errors.push_back(timeline_now() - deadline);
            }
            if (!audio_q.push(std::move(chunk)))
                break;
        }
        audio_q.close();
    });

    std::thread detection_producer([&] {
        for (const auto& ev : detections) {
            if (sync.aborted)
                break;
            if (ev.timestamp > duration_s)
                break; // nothing left that any chunk midpoint could use
            if (realtime) {
                std::this_thread::sleep_until(
                    wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>(ev.timestamp)));
            }
            if (!det_q.push(ev))
                break;
        }
        det_q.close();
    });

    std::thread vision_consumer([&] {
        std::int64_t index = 0;
        while (auto ev = det_q.pop()) {
            if (sync.aborted)
                break;
            {
                std::unique_lock<std::mutex> lock(sync.mutex);
                sync.vision_next_pending = ev->timestamp;
                sync.cv.notify_all();
                if (index == settings.vision_stall_at_event && settings.vision_stall_ms > 0.0) {
                    lock.unlock();
                    std::this_thread::sleep_for(
                        std::chrono::duration<double, std::milli>(settings.vision_stall_ms));
                    lock.lock();
                }
                if (!realtime) {
                    sync.cv.wait(lock, [&] {
                        return sync.aborted.load() || sync.audio_vt >= ev->timestamp;
                    });
                    if (sync.aborted)
                        break;
                }
            }
            if (ev->target_label == steered_label) {
                if (auto doa = doa_from_detection(*ev, camera, offset))
                    history.push(ev->timestamp, *doa);
                else
                    skipped.fetch_add(1);
            }
            if (realtime) {
                vision_latency.push_back({"vision", ev->timestamp - settings.vision_latency_offset_s,
                                          timeline_now()});
            }
            ++index;
        }
        std::lock_guard<std::mutex> lock(sync.mutex);
        sync.vision_done = true;
        sync.vision_next_pending = kInf;
        sync.cv.notify_all();
    });

    std::vector<SteeringLogRow> steering_log;
    std::vector<LatencyRecord> bf_latency;
    std::thread beamformer_consumer([&] {
        OlaBeamformer bf(frame, static_cast<int>(scene.channels()), prop);
        while (auto chunk = audio_q.pop()) {
            if (sync.aborted)
                break;
            const double t_mid = chunk_midpoint(chunk->timestamp, N, fs);
            if (!realtime) {
                std::unique_lock<std::mutex> lock(sync.mutex);
                sync.audio_vt = t_mid;
                sync.cv.notify_all();
                sync.cv.wait(lock, [&] {
                    return sync.aborted.load() || sync.vision_done ||
                           sync.vision_next_pending > t_mid;
                });
                if (sync.aborted)
                    break;
            }
            const auto hit = history.closest_not_future(t_mid);
            DoaAngles<double> applied{0.0, M_PI}; // broadside default
            if (hit) {
                applied = hit->second;
                bf.steer(applied, array);
            }
            SteeringLogRow row;
            row.chunk_index = chunk->chunk_index;
            row.chunk_midpoint_s = t_mid;
            if (hit)
                row.doa_timestamp_s = hit->first;
            row.theta_rad = applied.theta;
            row.phi_rad = applied.phi;
            steering_log.push_back(row);

            const double t0 = timeline_now();
            const Eigen::VectorXd emitted = bf.process_chunk(*chunk);
            const double t1 = timeline_now();

            const Eigen::Index at = H + static_cast<Eigen::Index>(chunk->chunk_index) * H;
            if (at < total_len) {
                const Eigen::Index n = std::min<Eigen::Index>(H, total_len - at);
                result.output.segment(at, n) = emitted.head(n);
            }
            bf_latency.push_back({"beamforming", t0, t1});
            if (realtime)
                audio_latency.push_back({"audio", chunk->timestamp, t1});
            processed.fetch_add(1);
        }
    });

    std::thread watchdog([&] {
        std::int64_t last = -1;
        double last_change = timeline_now();
        while (threads_running) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
            const std::int64_t cur = processed.load();
            const double now = timeline_now();
            if (cur != last) {
                last = cur;
                last_change = now;
            } else if (num_chunks > 0 && cur < num_chunks &&
                       now - last_change > settings.watchdog_timeout_s) {
                {
                    std::lock_guard<std::mutex> lock(sync.mutex);
                    sync.aborted = true;
                    sync.cv.notify_all();
                }
                audio_q.close();
                det_q.close();
                break;
            }
        }
    });

    audio_producer.join();
    detection_producer.join();
    beamformer_consumer.join();
    {
        // release the vision consumer: no chunk will raise the virtual clock further
        std::lock_guard<std::mutex> lock(sync.mutex);
        sync.audio_vt = kInf;
        sync.cv.notify_all();
    }
    vision_consumer.join();
    threads_running = false;
    watchdog.join();

    if (sync.aborted)
        throw std::runtime_error("pipeline watchdog: no progress for " +
                                 fmt_fixed(settings.watchdog_timeout_s, 1) +
                                 " s, run aborted (processed " + std::to_string(processed.load()) +
                                 " of " + std::to_string(num_chunks) + " chunks)");

    result.steering_log = std::move(steering_log);
    result.latency = std::move(bf_latency);
    result.latency.insert(result.latency.end(), audio_latency.begin(), audio_latency.end());
    result.latency.insert(result.latency.end(), vision_latency.begin(), vision_latency.end());
    result.pacing_errors_s = std::move(pacing_errors);
    result.chunks_processed = processed.load();
    result.audio_drops = audio_q.drops();
    result.detection_drops = det_q.drops();
    result.skipped_detections = skipped.load();
    result.no_visual_lock = true;
    for (const auto& row : result.steering_log)
        if (row.doa_timestamp_s) {
            result.no_visual_lock = false;
            break;
        }
    return result;
}

std::vector<SteeringEntry> induced_steering_schedule(const std::vector<DetectionEvent>& detections,
                                                     const std::string& steered_label,
                                                     const CameraModel<double>& camera,
                                                     const MountingOffset<double>& offset,
                                                     std::int64_t num_chunks,
                                                     const FrameSpec& frame,
                                                     double sample_rate,
                                                     std::size_t history_capacity) {
    DoaHistory history(history_capacity);
    std::vector<SteeringEntry> schedule;
    schedule.reserve(static_cast<std::size_t>(num_chunks));
    std::size_t next_event = 0;
    for (std::int64_t r = 0; r < num_chunks; ++r) {
        const double t_mid =
            chunk_midpoint(static_cast<double>(r) * frame.hop / sample_rate, frame.frame_length,
                           sample_rate);
        while (next_event < detections.size() && detections[next_event].timestamp <= t_mid) {
            const auto& ev = detections[next_event];
            if (ev.target_label == steered_label)
                if (auto doa = doa_from_detection(ev, camera, offset))
                    history.push(ev.timestamp, *doa);
            ++next_event;
        }
        // before the first lock the live pipeline leaves the beamformer
        // unsteered, which is what the offline driver does between t = 0 and
        // the first schedule entry; emitting nothing keeps the replay exact
        if (const auto hit = history.closest_not_future(t_mid))
            schedule.push_back({t_mid, hit->second});
    }
    return schedule;
}

void write_steering_log(const std::filesystem::path& path,
                        const std::vector<SteeringLogRow>& rows) {
    AtomicFile file(path);
    file.write_line("chunk_index,chunk_midpoint_s,doa_timestamp_s,theta_rad,phi_rad");
    for (const auto& row : rows) {
        file.write_line(std::to_string(row.chunk_index) + "," + fmt_fixed(row.chunk_midpoint_s, 9) +
                        "," + (row.doa_timestamp_s ? fmt_fixed(*row.doa_timestamp_s, 9) : "NONE") +
                        "," + fmt_fixed(row.theta_rad, 9) + "," + fmt_fixed(row.phi_rad, 9));
    }
    file.commit();
}

void write_latency_csv(const std::filesystem::path& path,
                       const std::vector<LatencyRecord>& records) {
    AtomicFile file(path);
    file.write_line("stage,t_capture,t_end,e2e_ms");
    for (const auto& rec : records) {
        file.write_line(rec.stage + "," + fmt_fixed(rec.t_capture, 9) + "," +
                        fmt_fixed(rec.t_end, 9) + "," + fmt_fixed(rec.e2e_ms(), 6));
    }
    file.commit();
}

std::string make_run_report(const PipelineResult& result, const PipelineSettings& settings) {
    const bool realtime = settings.mode == PipelineMode::realtime_paced;
    std::string report;
    report += "mode: " + std::string(realtime ? "realtime_paced" : "as_fast_as_possible") + "\n";
    report += "chunks: " + std::to_string(result.chunks_processed) + " of " +
              std::to_string(result.chunks_expected) + "\n";
    report += "audio queue drops: " + std::to_string(result.audio_drops) + "\n";
    report += "detection queue drops: " + std::to_string(result.detection_drops) + "\n";
    report += "skipped detections: " + std::to_string(result.skipped_detections) + "\n";
    if (result.no_visual_lock)
        report += "no visual lock: beamformed at broadside throughout\n";
    for (const char* stage : {"audio", "vision", "beamforming"}) {
        try {
            const auto stats = latency_stats(result.latency, stage, settings.warmup_s);
            report += std::string(stage) + " e2e: mean " + fmt_fixed(stats.mean_ms, 3) +
                      " ms, std " + fmt_fixed(stats.std_ms, 3) + " ms, p95 " +
                      fmt_fixed(stats.p95_ms, 3) + " ms, n=" + std::to_string(stats.count) + "\n";
        } catch (const std::invalid_argument&) {
            report += std::string(stage) + " e2e: no records after warm-up\n";
        }
    }
    if (!result.pacing_errors_s.empty()) {
        double sum = 0.0, worst = 0.0;
        for (double e : result.pacing_errors_s) {
            sum += e;
            worst = std::max(worst, e);
        }
        report += "pacing error: mean " +
                  fmt_fixed(sum / static_cast<double>(result.pacing_errors_s.size()) * 1e3, 3) +
                  " ms, max " + fmt_fixed(worst * 1e3, 3) + " ms\n";
    }
    return report;
}

} // namespace beamlab
