#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "beamlab/scenario.hpp"

namespace beamlab {

// Scene + detections ready for a pipeline run, either synthesized from the
// config's sources or loaded from its prerecorded input section.
struct PreparedRun {
    MultichannelSignal scene;
    std::vector<DetectionEvent> detections;
    MicArray<double> array;
    CameraModel<double> camera;
    MountingOffset<double> offset;
};

PreparedRun prepare_run(const ScenarioConfig& config);

struct ExperimentResult {
    std::filesystem::path out_dir;
    SirSeries sir_bf;
    SirSeries sir_nbf;
    SirSeries sir_delta;
    std::vector<double> separation_deg; // per delta window; empty without an interferer
    SeriesSummary delta_summary;
    std::string summary_text;
    PipelineResult pipeline;
};

// Full scripted reproduction: synthesize, detect, run the pipeline, measure
// SIR against the center-microphone reference, and drop the artifact bundle
// (WAVs, steering/latency/detection/SIR/DoA-trace CSVs, report, summary)
// into the config's output directory.
ExperimentResult run_experiment(const ScenarioConfig& config,
                                PipelineMode mode = PipelineMode::as_fast_as_possible);

} // namespace beamlab
