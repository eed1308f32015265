#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beamlab/array_geometry.hpp"
#include "beamlab/signal.hpp"
#include "beamlab/vision_geometry.hpp"

namespace beamlab {

struct Waveform {
    enum class Type { tone, white_noise, sample_file };
    Type type = Type::tone;
    double freq_hz = 0.0;    // tone
    double amplitude = 0.0;  // tone peak / noise standard deviation
    std::uint64_t rng_seed = 0;
    std::string path;        // sample_file
    double gain = 1.0;       // sample_file
};

struct Waypoint {
    double t_s = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero(); // world frame, z > 0
};

struct SourceSpec {
    std::string label;
    Waveform waveform;
    std::vector<Waypoint> trajectory; // times strictly increasing
};

// Linear interpolation, clamped to the first/last waypoint outside the span.
Eigen::Vector3d position_at(const std::vector<Waypoint>& trajectory, double t);

bool is_static_trajectory(const std::vector<Waypoint>& trajectory);

// Direction of a world point as seen from the array origin (which sits at
// (0, -h, 0) in world coordinates, matching the elevation convention
// arctan((y + h)/z)).
Eigen::Vector3d array_direction(const Eigen::Vector3d& p_world, double h);

// Circular whole-signal shift: returns y with y(t) = x(t + advance_s),
// implemented as a phase ramp on the full spectrum. The Nyquist bin is
// zeroed (its fractional shift is ill-defined), which makes the operation
// exactly invertible by the opposite advance.
Eigen::VectorXd spectral_advance(const Eigen::VectorXd& x, double advance_s, double sample_rate);

// Plane-wave synthesis: each mic hears each source advanced by r_m.u/c.
// Static sources use the whole-signal spectral shift; moving sources are
// built block-wise (hop H = block/2) with the direction held at each block
// midpoint and periodic-Hann crossfades between blocks.
MultichannelSignal synthesize_scene(const MicArray<double>& array,
                                    const std::vector<SourceSpec>& sources,
                                    const PropagationConfig<double>& prop,
                                    double duration_s,
                                    const MountingOffset<double>& offset,
                                    int block_length = 256);

// Adds spatially uncorrelated gaussian noise per mic, scaled so that channel
// 0 of the clean scene sits snr_db above the noise floor.
void add_diffuse_noise(MultichannelSignal& signal, double snr_db, std::uint64_t seed);

} // namespace beamlab
