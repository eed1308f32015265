#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "beamlab/pipeline.hpp"

using namespace beamlab;

namespace {

const PropagationConfig<double> kProp{343.0, 8000.0};
const FrameSpec kFrame{256, 128};
const MountingOffset<double> kOffset{0.12};

MicArray<double> reference_array() {
    return build_concentric_array<double>({0.0, 0.025, 0.045}, {1, 4, 8});
}

CameraModel<double> default_camera() {
    Eigen::Matrix3d k;
    k << 700.0, 0.0, 640.0, 0.0, 700.0, 360.0, 0.0, 0.0, 1.0;
    return make_camera_model<double>(k, Eigen::Matrix3d::Identity(),
                                     Eigen::Vector3d::Zero(), 700.0, 0.06);
}

MultichannelSignal two_tone_scene(double duration) {
    SourceSpec target;
    target.label = "talker";
    target.waveform.type = Waveform::Type::tone;
    target.waveform.freq_hz = 2000.0;
    target.waveform.amplitude = 0.4;
    target.trajectory = {{0.0, {0.727940469, -0.12, 2.0}}}; // 20 degrees left

    SourceSpec interferer;
    interferer.label = "noise";
    interferer.waveform.type = Waveform::Type::tone;
    interferer.waveform.freq_hz = 3000.0;
    interferer.waveform.amplitude = 0.4;
    interferer.trajectory = {{0.0, {-1.154700538, -0.12, 2.0}}}; // 30 degrees right

    return synthesize_scene(reference_array(), {target, interferer}, kProp, duration, kOffset);
}

std::vector<DetectionEvent> scripted_detections(double duration, double pixel_noise = 0.0) {
    TrajectoryScript script;
    script.targets = {{"talker", {{0.0, {0.727940469, -0.12, 2.0}}}}};
    script.fps = 30.0;
    script.pixel_noise_px = pixel_noise;
    script.depth_noise_rel = pixel_noise > 0.0 ? 0.02 : 0.0;
    script.dropout = 0.0;
    script.latency_offset_s = 0.064;
    return generate_detections(script, default_camera(), duration, 11);
}

PipelineSettings afap_settings() {
    PipelineSettings settings;
    settings.mode = PipelineMode::as_fast_as_possible;
    settings.warmup_s = 0.0;
    settings.vision_latency_offset_s = 0.064;
    return settings;
}

PipelineResult run(const MultichannelSignal& scene, const std::vector<DetectionEvent>& events,
                   const PipelineSettings& settings) {
    return run_pipeline(scene, events, "talker", reference_array(), kProp, kFrame,
                        default_camera(), kOffset, settings);
}

} // namespace

TEST_CASE("bounded queue preserves FIFO order and blocks when empty") {
    BoundedQueue<int> q(4, false);
    CHECK(q.push(1));
    CHECK(q.push(2));
    CHECK(q.push(3));
    CHECK(*q.pop() == 1);
    CHECK(*q.pop() == 2);

    CHECK(*q.pop() == 3);

    // a pop on an empty queue waits for the producer
    std::optional<int> got;
    std::thread consumer([&] { got = q.pop(); });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    q.push(7);
    consumer.join();
    REQUIRE(got.has_value());
    CHECK(*got == 7);
}

TEST_CASE("closing a queue drains remaining items then signals end") {
    BoundedQueue<int> q(4, false);
    q.push(1);
    q.push(2);
    q.close();
    CHECK_FALSE(q.push(3));
    CHECK(*q.pop() == 1);
    CHECK(*q.pop() == 2);
    CHECK_FALSE(q.pop().has_value());
}

TEST_CASE("drop-oldest queues evict and count") {
    BoundedQueue<int> q(2, true);
    q.push(1);
    q.push(2);
    q.push(3);
    CHECK(q.drops() == 1);
    CHECK(*q.pop() == 2);
    CHECK(*q.pop() == 3);

    CHECK_THROWS_AS(BoundedQueue<int>(0, false), std::invalid_argument);
}

TEST_CASE("latency statistics") {
    std::vector<LatencyRecord> records;
    for (int i = 0; i < 3; ++i)
        records.push_back({"audio", 0.1 * (i + 1), 0.1 * (i + 1) + 0.001 * (i + 1)});
    records.push_back({"vision", 0.1, 0.2}); // other stages are ignored

    const auto stats = latency_stats(records, "audio", 0.0);
    CHECK(stats.count == 3);
    CHECK(stats.mean_ms == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(stats.std_ms == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(stats.p95_ms == doctest::Approx(3.0).epsilon(1e-9)); // nearest-rank over 3 samples

    const auto late = latency_stats(records, "audio", 0.15);
    CHECK(late.count == 2);
    CHECK(late.mean_ms == doctest::Approx(2.5).epsilon(1e-9));

    CHECK_THROWS_AS(latency_stats(records, "audio", 10.0), std::invalid_argument);
    CHECK_THROWS_AS(latency_stats(records, "beamforming", 0.0), std::invalid_argument);
}

TEST_CASE("doa_from_detection runs the full geometry chain") {
    const auto camera = default_camera();
    const Eigen::Vector3d pos(0.5, 0.2, 2.0);
    const auto [pixel, depth] = project_to_pixel(camera, pos);

    DetectionEvent ev;
    ev.centroid = pixel;
    ev.depth_m = depth;
    const auto doa = doa_from_detection(ev, camera, kOffset);
    REQUIRE(doa.has_value());
    const auto want = doa_from_position(pos, kOffset);
    CHECK(doa->theta == doctest::Approx(want.theta).epsilon(1e-9));
    CHECK(doa->phi == doctest::Approx(want.phi).epsilon(1e-9));

    ev.depth_m = -0.5;
    CHECK_FALSE(doa_from_detection(ev, camera, kOffset).has_value());
}

TEST_CASE("deterministic mode is bit-identical across runs") {
    const auto scene = two_tone_scene(2.0);
    const auto events = scripted_detections(2.0, 2.0);
    const auto settings = afap_settings();

    const auto a = run(scene, events, settings);
    const auto b = run(scene, events, settings);

    CHECK(a.output == b.output);
    CHECK(a.chunks_processed == b.chunks_processed);
    REQUIRE(a.steering_log.size() == b.steering_log.size());
    for (std::size_t i = 0; i < a.steering_log.size(); ++i) {
        CHECK(a.steering_log[i].theta_rad == b.steering_log[i].theta_rad);
        CHECK(a.steering_log[i].phi_rad == b.steering_log[i].phi_rad);
        CHECK(a.steering_log[i].doa_timestamp_s == b.steering_log[i].doa_timestamp_s);
    }
}

TEST_CASE("deterministic mode equals the offline replay") {
    const auto scene = two_tone_scene(2.0);
    const auto events = scripted_detections(2.0, 2.0);
    auto settings = afap_settings();
    settings.history_capacity = 64;

    const auto live = run(scene, events, settings);

    const auto schedule = induced_steering_schedule(events, "talker", default_camera(), kOffset,
                                                    live.chunks_processed, kFrame,
                                                    kProp.sample_rate, 64);
    const auto offline = process_offline(scene, schedule, reference_array(), kProp, kFrame);

    REQUIRE(live.output.size() == offline.size());
    CHECK(live.output == offline);
}

TEST_CASE("steering log never uses future estimates") {
    const auto scene = two_tone_scene(2.0);
    const auto events = scripted_detections(2.0, 2.0);
    const auto result = run(scene, events, afap_settings());

    REQUIRE(result.steering_log.size() == static_cast<std::size_t>(result.chunks_processed));
    for (std::size_t i = 0; i < result.steering_log.size(); ++i) {
        const auto& row = result.steering_log[i];
        CHECK(row.chunk_index == static_cast<std::int64_t>(i));
        CHECK(row.chunk_midpoint_s ==
              doctest::Approx(chunk_midpoint(i * 128 / 8000.0, 256, 8000.0)).epsilon(1e-12));
        if (row.doa_timestamp_s)
            CHECK(*row.doa_timestamp_s <= row.chunk_midpoint_s + 1e-12);
    }
    CHECK_FALSE(result.no_visual_lock);
    CHECK(result.skipped_detections == 0);

    // once the first detection has been ingested the log keeps a lock
    bool locked = false;
    for (const auto& row : result.steering_log) {
        if (row.doa_timestamp_s)
            locked = true;
        else
            CHECK_FALSE(locked);
    }
    CHECK(locked);
}

TEST_CASE("without usable detections the run reports no visual lock") {
    const auto scene = two_tone_scene(1.0);
    const auto result = run(scene, {}, afap_settings());

    CHECK(result.no_visual_lock);
    for (const auto& row : result.steering_log) {
        CHECK_FALSE(row.doa_timestamp_s.has_value());
        CHECK(row.theta_rad == 0.0);
        CHECK(row.phi_rad == M_PI);
    }

    // broadside fallback equals an unsteered offline pass
    const auto offline = process_offline(scene, {}, reference_array(), kProp, kFrame);
    CHECK(result.output == offline);
}

TEST_CASE("events for other labels or with broken geometry are skipped") {
    const auto scene = two_tone_scene(1.0);

    auto other = scripted_detections(1.0);
    for (auto& ev : other)
        ev.target_label = "bystander";
    const auto ignored = run(scene, other, afap_settings());
    CHECK(ignored.no_visual_lock);
    CHECK(ignored.skipped_detections == 0); // filtered by label, not geometry

    auto broken = scripted_detections(1.0);
    for (auto& ev : broken)
        ev.depth_m = -1.0;
    const auto skipped = run(scene, broken, afap_settings());
    CHECK(skipped.no_visual_lock);
    // events stamped past the end of the audio timeline never enter the
    // vision stage, so only the ones inside the run can be counted
    const auto in_run = std::count_if(broken.begin(), broken.end(),
                                      [](const DetectionEvent& ev) { return ev.timestamp <= 1.0; });
    CHECK(skipped.skipped_detections == static_cast<std::uint64_t>(in_run));
}

TEST_CASE("chunk accounting is exact") {
    const auto scene = two_tone_scene(2.0);
    const auto result = run(scene, scripted_detections(2.0), afap_settings());
    CHECK(result.chunks_expected == (scene.length() - 256) / 128 + 1);
    CHECK(result.chunks_processed == result.chunks_expected);
    CHECK(result.audio_drops == 0);
    CHECK(result.detection_drops == 0);
    CHECK(result.output.size() == scene.length());
}

TEST_CASE("looping the scene extends a run beyond its length") {
    const auto scene = two_tone_scene(1.0);
    auto settings = afap_settings();
    settings.duration_override_s = 2.5;
    settings.loop_scene = true;

    const auto result = run(scene, scripted_detections(1.0), settings);
    CHECK(result.chunks_expected == (20000 - 256) / 128 + 1);
    CHECK(result.chunks_processed == result.chunks_expected);
    CHECK(result.output.size() == 20000);

    const auto again = run(scene, scripted_detections(1.0), settings);
    CHECK(result.output == again.output);

    auto no_loop = settings;
    no_loop.loop_scene = false;
    CHECK_THROWS_AS(run(scene, {}, no_loop), std::invalid_argument);
}

TEST_CASE("pipeline validates its inputs") {
    auto scene = two_tone_scene(1.0);

    MultichannelSignal tiny = scene;
    tiny.samples = scene.samples.leftCols(100);
    CHECK_THROWS_AS(run(tiny, {}, afap_settings()), std::invalid_argument);

    MultichannelSignal wrong = scene;
    wrong.samples = scene.samples.topRows(5);
    CHECK_THROWS_AS(run(wrong, {}, afap_settings()), std::invalid_argument);
}

TEST_CASE("realtime pacing holds the audio path near one frame of latency") {
    const double duration = 3.0;
    const auto scene = two_tone_scene(duration);
    const auto events = scripted_detections(duration, 2.0);

    PipelineSettings settings;
    settings.mode = PipelineMode::realtime_paced;
    settings.warmup_s = 0.5;
    settings.vision_latency_offset_s = 0.064;

    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run(scene, events, settings);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    CHECK(result.chunks_processed == result.chunks_expected);
    CHECK(wall > duration - 0.5);
    CHECK(wall < duration + 1.0);

    const auto audio = latency_stats(result.latency, "audio", settings.warmup_s);
    CHECK(audio.mean_ms >= 32.0);
    CHECK(audio.mean_ms < 100.0);

    const auto vision = latency_stats(result.latency, "vision", settings.warmup_s);
    CHECK(vision.mean_ms > 0.0);

    const auto bf = latency_stats(result.latency, "beamforming", settings.warmup_s);
    CHECK(bf.mean_ms < 2.0);

    REQUIRE(!result.pacing_errors_s.empty());
    double acc = 0.0;
    for (double e : result.pacing_errors_s)
        acc += e;
    CHECK(acc / result.pacing_errors_s.size() < 0.005);
}

TEST_CASE("a stalled vision stage does not hold up realtime audio") {
    const double duration = 2.0;
    const auto scene = two_tone_scene(duration);
    const auto events = scripted_detections(duration);

    PipelineSettings settings;
    settings.mode = PipelineMode::realtime_paced;
    settings.warmup_s = 0.0;
    settings.vision_latency_offset_s = 0.064;
    settings.vision_stall_ms = 300.0;
    settings.vision_stall_at_event = 3;

    const auto result = run(scene, events, settings);
    CHECK(result.chunks_processed == result.chunks_expected);
    const auto audio = latency_stats(result.latency, "audio", 0.0);
    CHECK(audio.mean_ms < 100.0);
}

TEST_CASE("the watchdog aborts a deterministic run wedged on vision") {
    const auto scene = two_tone_scene(2.0);
    const auto events = scripted_detections(2.0);

    auto settings = afap_settings();
    settings.vision_stall_ms = 2500.0;
    settings.vision_stall_at_event = 0;
    settings.watchdog_timeout_s = 0.5;

    CHECK_THROWS_WITH_AS(run(scene, events, settings), doctest::Contains("watchdog"),
                         std::runtime_error);
}
