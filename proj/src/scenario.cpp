#include "beamlab/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "beamlab/csv.hpp"
#include "beamlab/errors.hpp"
#include "beamlab/rng.hpp"

namespace beamlab {

using nlohmann::json;

ScenarioConfig::ScenarioConfig() {
    intrinsics << 700.0, 0.0, 640.0, 0.0, 700.0, 360.0, 0.0, 0.0, 1.0;
}

namespace {

// Reports the 1-based line and column of a byte offset, for parse errors.
std::string locate(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path.empty() ? message : path + ": " + message);
}

std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

// Typo safety: any key outside the allowlist is an error, named with its
// full path.
void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> keys) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : keys)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            fail(join_path(path, item.key()), "unknown key");
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void expect_object(const json& v, const std::string& path) {
    if (!v.is_object())
        fail(path, "expected an object");
}

double get_number(const json& obj, const std::string& parent, const char* key, double fallback) {
    const json* v = find(obj, key);
    if (!v)
        return fallback;
    if (!v->is_number())
        fail(join_path(parent, key), "expected a number");
    return v->get<double>();
}

double require_number(const json& obj, const std::string& parent, const char* key) {
    const json* v = find(obj, key);
    if (!v)
        fail(join_path(parent, key), "required key is missing");
    if (!v->is_number())
        fail(join_path(parent, key), "expected a number");
    return v->get<double>();
}

int get_int(const json& obj, const std::string& parent, const char* key, int fallback) {
    const json* v = find(obj, key);
    if (!v)
        return fallback;
    if (!v->is_number_integer())
        fail(join_path(parent, key), "expected an integer");
    return v->get<int>();
}

std::uint64_t get_seed(const json& obj, const std::string& parent, const char* key,
                       std::uint64_t fallback) {
    const json* v = find(obj, key);
    if (!v)
        return fallback;
    if (!v->is_number_unsigned())
        fail(join_path(parent, key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& parent, const char* key,
                       const std::string& fallback) {
    const json* v = find(obj, key);
    if (!v)
        return fallback;
    if (!v->is_string())
        fail(join_path(parent, key), "expected a string");
    return v->get<std::string>();
}

std::string require_string(const json& obj, const std::string& parent, const char* key) {
    const json* v = find(obj, key);
    if (!v)
        fail(join_path(parent, key), "required key is missing");
    if (!v->is_string())
        fail(join_path(parent, key), "expected a string");
    return v->get<std::string>();
}

std::vector<double> number_list(const json& v, const std::string& path, std::size_t expect = 0) {
    if (!v.is_array())
        fail(path, "expected an array of numbers");
    if (expect > 0 && v.size() != expect)
        fail(path, "expected exactly " + std::to_string(expect) + " numbers, got " +
                       std::to_string(v.size()));
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
            fail(path + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

Eigen::Matrix3d matrix3(const json& v, const std::string& path) {
    const auto nums = number_list(v, path, 9);
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            m(r, c) = nums[static_cast<std::size_t>(r * 3 + c)]; // row-major on disk
    return m;
}

Waveform parse_waveform(const json& v, const std::string& path) {
    expect_object(v, path);
    const std::string type = require_string(v, path, "type");
    Waveform wf;
    if (type == "tone") {
        reject_unknown(v, path, {"type", "freq_hz", "amplitude"});
        wf.type = Waveform::Type::tone;
        wf.freq_hz = require_number(v, path, "freq_hz");
        wf.amplitude = get_number(v, path, "amplitude", 1.0);
    } else if (type == "white_noise") {
        reject_unknown(v, path, {"type", "amplitude", "rng_seed"});
        wf.type = Waveform::Type::white_noise;
        wf.amplitude = get_number(v, path, "amplitude", 1.0);
        wf.rng_seed = get_seed(v, path, "rng_seed", 0);
    } else if (type == "sample_file") {
        reject_unknown(v, path, {"type", "path", "gain"});
        wf.type = Waveform::Type::sample_file;
        wf.path = require_string(v, path, "path");
        wf.gain = get_number(v, path, "gain", 1.0);
    } else {
        fail(join_path(path, "type"),
             "expected one of \"tone\", \"white_noise\", \"sample_file\"");
    }
    return wf;
}

std::vector<Waypoint> parse_trajectory(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty())
        fail(path, "expected a non-empty array of waypoints");
    std::vector<Waypoint> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string wp_path = path + "[" + std::to_string(i) + "]";
        expect_object(v[i], wp_path);
        reject_unknown(v[i], wp_path, {"t_s", "position"});
        Waypoint wp;
        wp.t_s = require_number(v[i], wp_path, "t_s");
        const json* pos = find(v[i], "position");
        if (!pos)
            fail(join_path(wp_path, "position"), "required key is missing");
        const auto nums = number_list(*pos, join_path(wp_path, "position"), 3);
        wp.position = Eigen::Vector3d(nums[0], nums[1], nums[2]);
        out.push_back(wp);
    }
    return out;
}

} // namespace

ScenarioConfig parse_scenario(const std::string& text, const CliOverrides& overrides,
                              const std::filesystem::path& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is 1-based past-the-error; back up one for the location
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw ConfigError(origin.string() + ":" + locate(text, byte) +
                          ": malformed JSON: " + e.what());
    }
    expect_object(root, "");

    reject_unknown(root, "",
                   {"output_dir", "duration_s", "array", "propagation", "frame", "camera",
                    "mounting_offset_h", "sources", "detection", "pipeline", "noise",
                    "experiment", "input", "seeds"});

    ScenarioConfig config;

    config.output_dir = get_string(root, "", "output_dir", config.output_dir.string());
    config.duration_s = get_number(root, "", "duration_s", config.duration_s);
    if (!(config.duration_s > 0.0))
        fail("duration_s", "must be positive");
    config.mounting_offset_h = get_number(root, "", "mounting_offset_h", config.mounting_offset_h);

    if (const json* arr = find(root, "array")) {
        expect_object(*arr, "array");
        reject_unknown(*arr, "array", {"ring_radii", "mics_per_ring"});
        if (const json* radii = find(*arr, "ring_radii"))
            config.ring_radii = number_list(*radii, "array.ring_radii");
        if (const json* counts = find(*arr, "mics_per_ring")) {
            const auto nums = number_list(*counts, "array.mics_per_ring");
            config.mics_per_ring.clear();
            for (std::size_t i = 0; i < nums.size(); ++i) {
                if (nums[i] != std::floor(nums[i]))
                    fail("array.mics_per_ring[" + std::to_string(i) + "]",
                         "expected an integer");
                config.mics_per_ring.push_back(static_cast<int>(nums[i]));
            }
        }
    }

    if (const json* prop = find(root, "propagation")) {
        expect_object(*prop, "propagation");
        reject_unknown(*prop, "propagation", {"speed_of_sound", "sample_rate"});
        config.propagation.speed_of_sound =
            get_number(*prop, "propagation", "speed_of_sound", config.propagation.speed_of_sound);
        config.propagation.sample_rate =
            get_number(*prop, "propagation", "sample_rate", config.propagation.sample_rate);
        if (!(config.propagation.speed_of_sound > 0.0))
            fail("propagation.speed_of_sound", "must be positive");
        if (!(config.propagation.sample_rate > 0.0))
            fail("propagation.sample_rate", "must be positive");
    }

    if (const json* frame = find(root, "frame")) {
        expect_object(*frame, "frame");
        reject_unknown(*frame, "frame", {"frame_length", "hop"});
        config.frame.frame_length =
            get_int(*frame, "frame", "frame_length", config.frame.frame_length);
        config.frame.hop = get_int(*frame, "frame", "hop", config.frame.hop);
    }
    if (overrides.frame_length)
        config.frame.frame_length = *overrides.frame_length;
    if (overrides.hop)
        config.frame.hop = *overrides.hop;
    try {
        validate_frame_spec(config.frame);
    } catch (const std::invalid_argument& e) {
        fail("frame", e.what());
    }

    if (const json* cam = find(root, "camera")) {
        expect_object(*cam, "camera");
        reject_unknown(*cam, "camera",
                       {"intrinsics", "rotation", "translation", "focal_length", "baseline"});
        if (const json* k = find(*cam, "intrinsics"))
            config.intrinsics = matrix3(*k, "camera.intrinsics");
        if (const json* r = find(*cam, "rotation"))
            config.rotation = matrix3(*r, "camera.rotation");
        if (const json* t = find(*cam, "translation")) {
            const auto nums = number_list(*t, "camera.translation", 3);
            config.translation = Eigen::Vector3d(nums[0], nums[1], nums[2]);
        }
        config.focal_length = get_number(*cam, "camera", "focal_length", config.focal_length);
        config.baseline = get_number(*cam, "camera", "baseline", config.baseline);
        if (!(config.baseline > 0.0))
            fail("camera.baseline", "must be positive");
    }

    if (const json* sources = find(root, "sources")) {
        if (!sources->is_array())
            fail("sources", "expected an array");
        for (std::size_t i = 0; i < sources->size(); ++i) {
            const std::string path = "sources[" + std::to_string(i) + "]";
            const json& s = (*sources)[i];
            expect_object(s, path);
            reject_unknown(s, path, {"label", "waveform", "trajectory"});
            SourceSpec spec;
            spec.label = require_string(s, path, "label");
            const json* wf = find(s, "waveform");
            if (!wf)
                fail(join_path(path, "waveform"), "required key is missing");
            spec.waveform = parse_waveform(*wf, join_path(path, "waveform"));
            const json* traj = find(s, "trajectory");
            if (!traj)
                fail(join_path(path, "trajectory"), "required key is missing");
            spec.trajectory = parse_trajectory(*traj, join_path(path, "trajectory"));
            config.sources.push_back(std::move(spec));
        }
    }

    if (const json* det = find(root, "detection")) {
        expect_object(*det, "detection");
        reject_unknown(*det, "detection",
                       {"fps", "pixel_noise_px", "depth_noise_rel", "dropout",
                        "latency_offset_s", "target_label"});
        config.detection_fps = get_number(*det, "detection", "fps", config.detection_fps);
        config.pixel_noise_px =
            get_number(*det, "detection", "pixel_noise_px", config.pixel_noise_px);
        config.depth_noise_rel =
            get_number(*det, "detection", "depth_noise_rel", config.depth_noise_rel);
        config.dropout = get_number(*det, "detection", "dropout", config.dropout);
        config.latency_offset_s =
            get_number(*det, "detection", "latency_offset_s", config.latency_offset_s);
        config.target_label = get_string(*det, "detection", "target_label", config.target_label);
    }
    if (config.target_label.empty() && !config.sources.empty())
        config.target_label = config.sources.front().label;

    if (const json* pipe = find(root, "pipeline")) {
        expect_object(*pipe, "pipeline");
        reject_unknown(*pipe, "pipeline",
                       {"audio_queue_depth", "detection_queue_depth", "queue_policy",
                        "history_capacity", "watchdog_timeout_s", "warmup_s"});
        const int audio_depth =
            get_int(*pipe, "pipeline", "audio_queue_depth",
                    static_cast<int>(config.pipeline.audio_queue_depth));
        const int det_depth =
            get_int(*pipe, "pipeline", "detection_queue_depth",
                    static_cast<int>(config.pipeline.detection_queue_depth));
        const int history = get_int(*pipe, "pipeline", "history_capacity",
                                    static_cast<int>(config.pipeline.history_capacity));
        if (audio_depth < 1)
            fail("pipeline.audio_queue_depth", "must be at least 1");
        if (det_depth < 1)
            fail("pipeline.detection_queue_depth", "must be at least 1");
        if (history < 1)
            fail("pipeline.history_capacity", "must be at least 1");
        config.pipeline.audio_queue_depth = static_cast<std::size_t>(audio_depth);
        config.pipeline.detection_queue_depth = static_cast<std::size_t>(det_depth);
        config.pipeline.history_capacity = static_cast<std::size_t>(history);
        const std::string policy = get_string(*pipe, "pipeline", "queue_policy", "block");
        if (policy == "block")
            config.pipeline.drop_oldest = false;
        else if (policy == "drop_oldest")
            config.pipeline.drop_oldest = true;
        else
            fail("pipeline.queue_policy", "expected \"block\" or \"drop_oldest\"");
        config.pipeline.watchdog_timeout_s = get_number(*pipe, "pipeline", "watchdog_timeout_s",
                                                        config.pipeline.watchdog_timeout_s);
        config.pipeline.warmup_s =
            get_number(*pipe, "pipeline", "warmup_s", config.pipeline.warmup_s);
        if (!(config.pipeline.watchdog_timeout_s > 0.0))
            fail("pipeline.watchdog_timeout_s", "must be positive");
        if (config.pipeline.warmup_s < 0.0)
            fail("pipeline.warmup_s", "must be non-negative");
    }
    config.pipeline.vision_latency_offset_s = config.latency_offset_s;

    if (const json* noise = find(root, "noise")) {
        expect_object(*noise, "noise");
        reject_unknown(*noise, "noise", {"diffuse_snr_db"});
        config.diffuse_snr_db = require_number(*noise, "noise", "diffuse_snr_db");
    }

    if (const json* exp = find(root, "experiment")) {
        expect_object(*exp, "experiment");
        reject_unknown(*exp, "experiment",
                       {"name", "metric", "f_target_hz", "f_int_hz", "window", "hop", "band_hz",
                        "sir_warmup_s"});
        ExperimentSpec spec;
        spec.name = require_string(*exp, "experiment", "name");
        if (spec.name != "anechoic_static" && spec.name != "anechoic_dynamic" &&
            spec.name != "room_dynamic")
            fail("experiment.name",
                 "expected one of \"anechoic_static\", \"anechoic_dynamic\", \"room_dynamic\"");
        const std::string metric = get_string(*exp, "experiment", "metric", "tone_tone");
        if (metric == "tone_tone")
            spec.metric = SirVariant::tone_tone;
        else if (metric == "broadband")
            spec.metric = SirVariant::broadband;
        else
            fail("experiment.metric", "expected \"tone_tone\" or \"broadband\"");
        spec.f_target_hz = get_number(*exp, "experiment", "f_target_hz", spec.f_target_hz);
        spec.f_int_hz = get_number(*exp, "experiment", "f_int_hz", spec.f_int_hz);
        spec.analysis.window = get_int(*exp, "experiment", "window", spec.analysis.window);
        spec.analysis.hop = get_int(*exp, "experiment", "hop", spec.analysis.hop);
        spec.analysis.band_hz = get_number(*exp, "experiment", "band_hz", spec.analysis.band_hz);
        spec.sir_warmup_s = get_number(*exp, "experiment", "sir_warmup_s", spec.sir_warmup_s);
        if (spec.analysis.window < 4 || spec.analysis.window % 2 != 0)
            fail("experiment.window", "must be even and at least 4");
        if (spec.analysis.hop < 1)
            fail("experiment.hop", "must be positive");
        if (!(spec.analysis.band_hz > 0.0))
            fail("experiment.band_hz", "must be positive");
        if (spec.sir_warmup_s < 0.0)
            fail("experiment.sir_warmup_s", "must be non-negative");
        config.experiment = spec;
    }

    if (const json* input = find(root, "input")) {
        expect_object(*input, "input");
        reject_unknown(*input, "input", {"wav", "detections_csv"});
        InputSpec spec;
        spec.wav = require_string(*input, "input", "wav");
        spec.detections_csv = require_string(*input, "input", "detections_csv");
        // paths travel with the config file, not the working directory
        const auto base = origin.parent_path();
        if (spec.wav.is_relative())
            spec.wav = base / spec.wav;
        if (spec.detections_csv.is_relative())
            spec.detections_csv = base / spec.detections_csv;
        config.input = spec;
    }

    if (const json* seeds = find(root, "seeds")) {
        expect_object(*seeds, "seeds");
        reject_unknown(*seeds, "seeds", {"detection", "diffuse_noise"});
        config.seed_detection = get_seed(*seeds, "seeds", "detection", config.seed_detection);
        config.seed_diffuse_noise =
            get_seed(*seeds, "seeds", "diffuse_noise", config.seed_diffuse_noise);
    }

    if (overrides.seed) {
        config.seed_detection = mix_seed(*overrides.seed, 1);
        config.seed_diffuse_noise = mix_seed(*overrides.seed, 2);
        std::uint64_t purpose = 3;
        for (auto& source : config.sources)
            source.waveform.rng_seed = mix_seed(*overrides.seed, purpose++);
    }
    if (overrides.out_dir)
        config.output_dir = *overrides.out_dir;

    // cross-field checks that span sections
    const double nyquist = config.propagation.sample_rate / 2.0;
    for (std::size_t i = 0; i < config.sources.size(); ++i) {
        const auto& source = config.sources[i];
        if (source.waveform.type == Waveform::Type::tone && source.waveform.freq_hz >= nyquist)
            fail("sources[" + std::to_string(i) + "].waveform.freq_hz",
                 "tone at " + fmt_fixed(source.waveform.freq_hz, 1) +
                     " Hz breaks the Nyquist limit f < f_s/2 = " + fmt_fixed(nyquist, 1) + " Hz");
        for (std::size_t w = 1; w < source.trajectory.size(); ++w)
            if (source.trajectory[w].t_s <= source.trajectory[w - 1].t_s)
                fail("sources[" + std::to_string(i) + "].trajectory[" + std::to_string(w) + "].t_s",
                     "waypoint times must be strictly increasing");
    }
    if (!config.target_label.empty() && !config.sources.empty()) {
        bool found = false;
        for (const auto& source : config.sources)
            if (source.label == config.target_label)
                found = true;
        if (!found)
            fail("detection.target_label",
                 "\"" + config.target_label + "\" does not match any source label");
    }
    std::set<std::string> labels;
    for (std::size_t i = 0; i < config.sources.size(); ++i)
        if (!labels.insert(config.sources[i].label).second)
            fail("sources[" + std::to_string(i) + "].label",
                 "duplicate label \"" + config.sources[i].label + "\"");
    if (config.experiment) {
        if (config.experiment->f_target_hz >= nyquist || config.experiment->f_int_hz >= nyquist)
            fail("experiment", "analysis tones break the Nyquist limit f < f_s/2");
        if (config.experiment->metric == SirVariant::tone_tone &&
            config.experiment->f_target_hz == config.experiment->f_int_hz)
            fail("experiment", "f_target_hz and f_int_hz must be distinct");
    }
    if (!(config.detection_fps > 0.0))
        fail("detection.fps", "must be positive");
    if (config.pixel_noise_px < 0.0)
        fail("detection.pixel_noise_px", "must be non-negative");
    if (config.depth_noise_rel < 0.0)
        fail("detection.depth_noise_rel", "must be non-negative");
    if (config.dropout < 0.0 || config.dropout > 1.0)
        fail("detection.dropout", "must lie in [0, 1]");
    if (config.latency_offset_s < 0.0)
        fail("detection.latency_offset_s", "must be non-negative");

    // constructing the array and camera runs their own validation; surface
    // those failures with the config section named
    try {
        build_array(config);
    } catch (const std::invalid_argument& e) {
        fail("array", e.what());
    }
    try {
        build_camera(config);
    } catch (const std::invalid_argument& e) {
        fail("camera", e.what());
    }

    return config;
}

ScenarioConfig load_scenario(const std::filesystem::path& path, const CliOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), overrides, path);
}

MicArray<double> build_array(const ScenarioConfig& config) {
    return build_concentric_array<double>(config.ring_radii, config.mics_per_ring);
}

CameraModel<double> build_camera(const ScenarioConfig& config) {
    return make_camera_model<double>(config.intrinsics, config.rotation, config.translation,
                                     config.focal_length, config.baseline);
}

TrajectoryScript build_detection_script(const ScenarioConfig& config) {
    TrajectoryScript script;
    script.fps = config.detection_fps;
    script.pixel_noise_px = config.pixel_noise_px;
    script.depth_noise_rel = config.depth_noise_rel;
    script.dropout = config.dropout;
    script.latency_offset_s = config.latency_offset_s;
    for (const auto& source : config.sources)
        script.targets.push_back({source.label, source.trajectory});
    return script;
}

} // namespace beamlab
