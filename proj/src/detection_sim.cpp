#include "beamlab/detection_sim.hpp"

#include <cmath>

#include "beamlab/csv.hpp"
#include "beamlab/errors.hpp"
#include "beamlab/rng.hpp"

namespace beamlab {

std::vector<DetectionEvent> generate_detections(const TrajectoryScript& script,
                                                const CameraModel<double>& camera,
                                                double duration_s,
                                                std::uint64_t seed) {
    if (!(script.fps > 0.0))
        throw ConfigError("detection FPS must be positive");
    if (script.pixel_noise_px < 0.0 || script.depth_noise_rel < 0.0)
        throw ConfigError("detection noise sigmas must be non-negative");
    if (script.dropout < 0.0 || script.dropout > 1.0)
        throw ConfigError("detection dropout must be in [0, 1]");
    for (const auto& target : script.targets) {
        if (target.waypoints.empty())
            throw ConfigError("detection target '" + target.label + "' has no waypoints");
        for (std::size_t i = 0; i < target.waypoints.size(); ++i) {
            if (i > 0 && !(target.waypoints[i].t_s > target.waypoints[i - 1].t_s))
                throw ConfigError("detection target '" + target.label +
                                  "' waypoint times must be strictly increasing");
            try {
                project_to_pixel(camera, target.waypoints[i].position);
            } catch (const std::invalid_argument&) {
                throw ConfigError("detection target '" + target.label +
                                  "' has a waypoint behind the camera");
            }
        }
    }

    GaussianRng rng(seed);
    std::vector<DetectionEvent> events;
    const auto frames = static_cast<std::int64_t>(std::floor(duration_s * script.fps));
    for (std::int64_t k = 0; k < frames; ++k) {
        const double t_frame = static_cast<double>(k) / script.fps;
        for (const auto& target : script.targets) {
            // draw the full noise budget every frame so dropout decisions do
            // not shift the stream for other targets
            const double drop_u = rng.uniform();
            const double gx = rng.gaussian();
            const double gy = rng.gaussian();
            const double gd = rng.gaussian();
            if (drop_u < script.dropout)
                continue;
            const Eigen::Vector3d p = position_at(target.waypoints, t_frame);
            auto [pixel, depth] = project_to_pixel(camera, p);
            DetectionEvent ev;
            ev.timestamp = t_frame + script.latency_offset_s;
            ev.centroid = pixel + script.pixel_noise_px * Eigen::Vector2d(gx, gy);
            ev.depth_m = depth * (1.0 + script.depth_noise_rel * gd);
            // nominal 0.3 x 0.5 m body box, carried but unused by geometry
            ev.width_px = camera.focal_length * 0.3 / depth;
            ev.height_px = camera.focal_length * 0.5 / depth;
            ev.target_label = target.label;
            events.push_back(std::move(ev));
        }
    }
    return events;
}

void write_detections_csv(const std::filesystem::path& path,
                          const std::vector<DetectionEvent>& events) {
    AtomicFile file(path);
    file.write_line("t_s,x_px,y_px,w_px,h_px,depth_m,target_label");
    for (const auto& ev : events) {
        file.write_line(fmt_fixed(ev.timestamp, 9) + "," + fmt_fixed(ev.centroid.x(), 9) + "," +
                        fmt_fixed(ev.centroid.y(), 9) + "," + fmt_fixed(ev.width_px, 9) + "," +
                        fmt_fixed(ev.height_px, 9) + "," + fmt_fixed(ev.depth_m, 9) + "," +
                        ev.target_label);
    }
    file.commit();
}

std::vector<DetectionEvent> read_detections_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows[0].size() != 7 || rows[0][0] != "t_s")
        throw IoError("not a detections CSV (expected header t_s,...): " + path.string());
    std::vector<DetectionEvent> events;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 7)
            throw IoError("malformed detections CSV row in " + path.string());
        DetectionEvent ev;
        try {
            ev.timestamp = std::stod(r[0]);
            ev.centroid = Eigen::Vector2d(std::stod(r[1]), std::stod(r[2]));
            ev.width_px = std::stod(r[3]);
            ev.height_px = std::stod(r[4]);
            ev.depth_m = std::stod(r[5]);
        } catch (const std::exception&) {
            throw IoError("non-numeric field in detections CSV: " + path.string());
        }
        ev.target_label = r[6];
        events.push_back(std::move(ev));
    }
    return events;
}

} // namespace beamlab
