#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beamlab/csv.hpp"
#include "beamlab/errors.hpp"
#include "beamlab/experiments.hpp"
#include "beamlab/wav_io.hpp"

namespace {

using namespace beamlab;

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> frame_length;
    std::optional<int> hop;
    std::optional<std::string> out_dir;
    std::optional<std::string> mode; // subcommands pick their own default
};

CliOverrides to_overrides(const GlobalArgs& args) {
    CliOverrides overrides;
    overrides.seed = args.seed;
    overrides.frame_length = args.frame_length;
    overrides.hop = args.hop;
    if (args.out_dir)
        overrides.out_dir = std::filesystem::path(*args.out_dir);
    return overrides;
}

ScenarioConfig load_config(const GlobalArgs& args) {
    if (args.config_path.empty())
        return parse_scenario("{}", to_overrides(args));
    return load_scenario(args.config_path, to_overrides(args));
}

PipelineMode parse_mode(const std::string& mode) {
    if (mode == "realtime")
        return PipelineMode::realtime_paced;
    if (mode == "afap")
        return PipelineMode::as_fast_as_possible;
    throw ConfigError("unknown mode \"" + mode + "\" (expected realtime or afap)");
}

std::vector<SteeringEntry> read_schedule(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    if (rows.empty())
        throw IoError("steering schedule is empty: " + path.string());
    std::vector<SteeringEntry> schedule;
    for (std::size_t i = rows[0].size() == 3 && rows[0][0] == "t_s" ? 1 : 0; i < rows.size();
         ++i) {
        if (rows[i].size() != 3)
            throw IoError(path.string() + ": line " + std::to_string(i + 1) +
                          ": expected t_s,theta_rad,phi_rad");
        try {
            schedule.push_back(
                {std::stod(rows[i][0]), {std::stod(rows[i][1]), std::stod(rows[i][2])}});
        } catch (const std::exception&) {
            throw IoError(path.string() + ": line " + std::to_string(i + 1) +
                          ": malformed number");
        }
    }
    return schedule;
}

int cmd_synthesize(const GlobalArgs& args, const std::string& out,
                   const std::string& detections_out) {
    const ScenarioConfig config = load_config(args);
    const PreparedRun run = prepare_run(config);
    const auto out_path =
        out.empty() ? config.output_dir / "scene.wav" : std::filesystem::path(out);
    write_wav(run.scene, out_path);
    std::cout << out_path.string() << ": " << run.scene.channels() << " channels, "
              << fmt_fixed(static_cast<double>(run.scene.length()) /
                               config.propagation.sample_rate,
                           3)
              << " s at " << fmt_fixed(config.propagation.sample_rate, 0) << " Hz"
              << (run.scene.clipped ? " (clipped)" : "") << "\n";
    if (!detections_out.empty()) {
        write_detections_csv(detections_out, run.detections);
        std::cout << detections_out << ": " << run.detections.size() << " detections\n";
    }
    return 0;
}

int cmd_beamform(const GlobalArgs& args, const std::string& in, const std::string& out,
                 std::optional<double> theta, std::optional<double> phi,
                 const std::string& schedule_path) {
    const ScenarioConfig config = load_config(args);
    const MicArray<double> array = build_array(config);
    const MultichannelSignal input = read_wav(in);
    if (input.channels() != array.count())
        throw ConfigError("input WAV has " + std::to_string(input.channels()) +
                          " channels but the array has " + std::to_string(array.count()));
    std::vector<SteeringEntry> schedule;
    if (!schedule_path.empty()) {
        if (theta || phi)
            throw ConfigError("give either --theta/--phi or --schedule, not both");
        schedule = read_schedule(schedule_path);
    } else if (theta && phi) {
        schedule.push_back({0.0, {*theta, *phi}});
    } else if (theta || phi) {
        throw ConfigError("--theta and --phi must be given together");
    } else {
        schedule.push_back({0.0, {0.0, M_PI}}); // broadside
    }
    PropagationConfig<double> prop = config.propagation;
    prop.sample_rate = input.sample_rate;
    const Eigen::VectorXd y = process_offline(input, schedule, array, prop, config.frame);
    MultichannelSignal mono;
    mono.sample_rate = input.sample_rate;
    mono.samples = y.transpose();
    const auto out_path =
        out.empty() ? config.output_dir / "beamformed.wav" : std::filesystem::path(out);
    write_wav(mono, out_path);
    std::cout << out_path.string() << ": " << fmt_fixed(y.size() / input.sample_rate, 3)
              << " s mono\n";
    return 0;
}

int cmd_beampattern(const GlobalArgs& args, double look_theta, double look_phi,
                    std::vector<double> freqs, std::optional<double> theta,
                    std::optional<double> phi_start, double phi_span, int phi_count,
                    const std::string& out) {
    const ScenarioConfig config = load_config(args);
    const MicArray<double> array = build_array(config);
    if (freqs.empty())
        freqs.push_back(3000.0);
    if (phi_count < 1)
        throw ConfigError("--phi-count must be at least 1");
    if (!(phi_span > 0.0))
        throw ConfigError("--phi-span must be positive");
    const double row_theta = theta ? *theta : look_theta;
    const double start = phi_start ? *phi_start : look_phi - phi_span / 2.0;
    const DoaAngles<double> look{look_theta, look_phi};
    const auto out_path =
        out.empty() ? config.output_dir / "beampattern.csv" : std::filesystem::path(out);
    AtomicFile file(out_path);
    file.write_line("phi_rad,theta_rad,freq_hz,magnitude,magnitude_db");
    for (double freq : freqs) {
        for (int i = 0; i < phi_count; ++i) {
            const double phi =
                phi_count == 1 ? start : start + phi_span * i / (phi_count - 1);
            const double mag =
                std::abs(beampattern(array, look, {row_theta, phi}, freq, config.propagation));
            const double db = mag > 0.0 ? 20.0 * std::log10(mag) : -400.0;
            file.write_line(fmt_fixed(phi, 9) + "," + fmt_fixed(row_theta, 9) + "," +
                            fmt_fixed(freq, 3) + "," + fmt_fixed(mag, 9) + "," +
                            fmt_fixed(db, 6));
        }
    }
    file.commit();
    std::cout << out_path.string() << ": " << freqs.size() * static_cast<std::size_t>(phi_count)
              << " rows\n";
    return 0;
}

int cmd_pipeline(const GlobalArgs& args) {
    const ScenarioConfig config = load_config(args);
    const PreparedRun run = prepare_run(config);
    PipelineSettings settings = config.pipeline;
    settings.mode = parse_mode(args.mode.value_or("realtime"));
    const PipelineResult result =
        run_pipeline(run.scene, run.detections, config.target_label, run.array,
                     config.propagation, config.frame, run.camera, run.offset, settings);
    std::filesystem::create_directories(config.output_dir);
    MultichannelSignal mono;
    mono.sample_rate = config.propagation.sample_rate;
    mono.samples = result.output.transpose();
    write_wav(mono, config.output_dir / "beamformed.wav");
    write_steering_log(config.output_dir / "steering_log.csv", result.steering_log);
    write_latency_csv(config.output_dir / "latency.csv", result.latency);
    const std::string report = make_run_report(result, settings);
    AtomicFile file(config.output_dir / "run_report.txt");
    file.stream() << report;
    file.commit();
    std::cout << report;
    return 0;
}

int cmd_experiment(const GlobalArgs& args, const std::string& name) {
    const ScenarioConfig config = load_config(args);
    if (!config.experiment)
        throw ConfigError("config has no experiment section");
    if (!name.empty() && name != config.experiment->name)
        throw ConfigError("config describes experiment \"" + config.experiment->name +
                          "\", not \"" + name + "\"");
    const ExperimentResult result = run_experiment(config, parse_mode(args.mode.value_or("afap")));
    std::cout << result.summary_text;
    std::cout << "artifacts: " << result.out_dir.string() << "\n";
    return 0;
}

int cmd_bench(const GlobalArgs& args, double duration_s) {
    if (!(duration_s > 0.0))
        throw ConfigError("--duration must be positive");
    const ScenarioConfig config = load_config(args);
    const PreparedRun run = prepare_run(config);
    PipelineSettings settings = config.pipeline;
    settings.mode = parse_mode(args.mode.value_or("realtime"));
    settings.duration_override_s = duration_s;
    settings.loop_scene = true;
    const PipelineResult result =
        run_pipeline(run.scene, run.detections, config.target_label, run.array,
                     config.propagation, config.frame, run.camera, run.offset, settings);
    std::filesystem::create_directories(config.output_dir);
    write_latency_csv(config.output_dir / "latency.csv", result.latency);

    std::string table = "stage,mean_ms,std_ms,p95_ms,count\n";
    for (const char* stage : {"audio", "vision", "beamforming"}) {
        try {
            const auto stats = latency_stats(result.latency, stage, settings.warmup_s);
            table += std::string(stage) + "," + fmt_fixed(stats.mean_ms, 3) + "," +
                     fmt_fixed(stats.std_ms, 3) + "," + fmt_fixed(stats.p95_ms, 3) + "," +
                     std::to_string(stats.count) + "\n";
        } catch (const std::invalid_argument&) {
            table += std::string(stage) + ",,,,0\n";
        }
    }
    AtomicFile file(config.output_dir / "bench_table.csv");
    file.stream() << table;
    file.commit();
    std::cout << table;
    std::cout << make_run_report(result, settings);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale lab for vision-guided acoustic beamforming"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "scenario config file (JSON)");
    app.add_option("--seed", args.seed, "reseed every random stream from this value");
    app.add_option("--frame-length", args.frame_length, "override frame length (samples)");
    app.add_option("--hop", args.hop, "override hop (samples, must be frame_length/2)");
    app.add_option("--out-dir", args.out_dir, "override the config's output directory");
    app.add_option("--mode", args.mode, "pipeline pacing: realtime or afap")
        ->check(CLI::IsMember({"realtime", "afap"}));

    auto* synthesize = app.add_subcommand("synthesize", "render the configured scene to WAV");
    std::string synth_out, synth_detections;
    synthesize->add_option("--out", synth_out, "output WAV path (default <out-dir>/scene.wav)");
    synthesize->add_option("--detections", synth_detections,
                           "also write simulated detections to this CSV");

    auto* beamform =
        app.add_subcommand("beamform", "offline beamforming of a multichannel WAV");
    std::string bf_in, bf_out, bf_schedule;
    std::optional<double> bf_theta, bf_phi;
    beamform->add_option("--in", bf_in, "input multichannel WAV")->required();
    beamform->add_option("--out", bf_out, "output mono WAV (default <out-dir>/beamformed.wav)");
    beamform->add_option("--theta", bf_theta, "static elevation (rad)");
    beamform->add_option("--phi", bf_phi, "static azimuth (rad)");
    beamform->add_option("--schedule", bf_schedule, "steering schedule CSV (t_s,theta_rad,phi_rad)");

    auto* beampattern =
        app.add_subcommand("beampattern", "array response sweep around a look direction");
    double look_theta = 0.0, look_phi = M_PI, phi_span = 0.9 * M_PI;
    int phi_count = 361;
    std::optional<double> bp_theta, bp_phi_start;
    std::vector<double> bp_freqs;
    std::string bp_out;
    beampattern->add_option("--look-theta", look_theta, "look elevation (rad)");
    beampattern->add_option("--look-phi", look_phi, "look azimuth (rad)");
    beampattern->add_option("--freq", bp_freqs, "frequency in Hz (repeatable; default 3000)");
    beampattern->add_option("--theta", bp_theta, "source elevation of the sweep row");
    beampattern->add_option("--phi-start", bp_phi_start, "sweep start azimuth (rad)");
    beampattern->add_option("--phi-span", phi_span, "sweep azimuth span (rad)");
    beampattern->add_option("--phi-count", phi_count, "number of azimuth samples");
    beampattern->add_option("--out", bp_out, "output CSV (default <out-dir>/beampattern.csv)");

    app.add_subcommand("pipeline", "run the concurrent capture/vision/beamforming pipeline");

    auto* experiment = app.add_subcommand("experiment", "scripted scenario with SIR evaluation");
    std::string exp_name;
    experiment->add_option("name", exp_name,
                           "anechoic_static | anechoic_dynamic | room_dynamic");

    auto* bench = app.add_subcommand("bench", "realtime latency benchmark");
    double bench_duration = 600.0;
    bench->add_option("--duration", bench_duration, "benchmark length in seconds");

    for (auto* sub : app.get_subcommands({}))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (synthesize->parsed())
            return cmd_synthesize(args, synth_out, synth_detections);
        if (beamform->parsed())
            return cmd_beamform(args, bf_in, bf_out, bf_theta, bf_phi, bf_schedule);
        if (beampattern->parsed())
            return cmd_beampattern(args, look_theta, look_phi, bp_freqs, bp_theta, bp_phi_start,
                                   phi_span, phi_count, bp_out);
        if (app.get_subcommand("pipeline")->parsed())
            return cmd_pipeline(args);
        if (experiment->parsed())
            return cmd_experiment(args, exp_name);
        if (bench->parsed())
            return cmd_bench(args, bench_duration);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
