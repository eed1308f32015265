#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beamlab/scene.hpp"
#include "beamlab/vision_geometry.hpp"

namespace beamlab {

struct DetectionEvent {
    double timestamp = 0.0; // availability on the shared clock (frame time + latency offset)
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    double width_px = 0.0;
    double height_px = 0.0;
    double depth_m = 0.0;
    std::string target_label;
};

struct TargetScript {
    std::string label;
    std::vector<Waypoint> waypoints;
};

struct TrajectoryScript {
    std::vector<TargetScript> targets;
    double fps = 30.0;
    double pixel_noise_px = 2.0;
    double depth_noise_rel = 0.02;
    double dropout = 0.0;
    double latency_offset_s = 0.064;
};

// Scripted stand-in for the camera + detector: projects each target at every
// frame time, adds seeded gaussian pixel/depth noise, applies dropout, and
// stamps events with frame time + latency offset. Deterministic per seed.
std::vector<DetectionEvent> generate_detections(const TrajectoryScript& script,
                                                const CameraModel<double>& camera,
                                                double duration_s,
                                                std::uint64_t seed);

void write_detections_csv(const std::filesystem::path& path,
                          const std::vector<DetectionEvent>& events);

std::vector<DetectionEvent> read_detections_csv(const std::filesystem::path& path);

} // namespace beamlab
