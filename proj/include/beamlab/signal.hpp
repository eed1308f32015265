#pragma once

#include <Eigen/Dense>

namespace beamlab {

// Rows are channels (array order), columns are samples.
struct MultichannelSignal {
    double sample_rate = 8000.0;
    double start_time = 0.0;
    Eigen::MatrixXd samples;
    bool clipped = false; // any |sample| > 1 seen during synthesis

    Eigen::Index channels() const { return samples.rows(); }
    Eigen::Index length() const { return samples.cols(); }
};

} // namespace beamlab
