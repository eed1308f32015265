#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace beamlab {

template <typename Scalar>
struct DoaAngles {
    Scalar theta = 0; // elevation, radians
    Scalar phi = 0;   // azimuth, radians
};

template <typename Scalar>
struct PropagationConfig {
    Scalar speed_of_sound = Scalar(343);
    Scalar sample_rate = Scalar(8000);
};

// Planar microphone array in the array-local frame: array plane is z = 0,
// +z points toward the scene. Columns of `positions` are per-mic 3-vectors.
template <typename Scalar>
struct MicArray {
    Eigen::Matrix<Scalar, 3, Eigen::Dynamic> positions;

    int count() const { return static_cast<int>(positions.cols()); }
};

template <typename Scalar>
MicArray<Scalar> make_mic_array(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& positions) {
    if (positions.cols() < 1)
        throw std::invalid_argument("mic array needs at least one microphone");
    if (!positions.allFinite())
        throw std::invalid_argument("mic positions must be finite");
    for (Eigen::Index m = 0; m < positions.cols(); ++m) {
        if (positions(2, m) != Scalar(0))
            throw std::invalid_argument("mic array must be planar (z = 0 for every mic)");
        for (Eigen::Index k = 0; k < m; ++k)
            if (positions.col(m) == positions.col(k))
                throw std::invalid_argument("mic positions must be pairwise distinct");
    }
    return MicArray<Scalar>{positions};
}

// Concentric circular rings; each ring's mics start on the +x axis and go
// counterclockwise, ordered ring-major then angle-minor.
template <typename Scalar>
MicArray<Scalar> build_concentric_array(const std::vector<Scalar>& ring_radii,
                                        const std::vector<int>& mics_per_ring) {
    if (ring_radii.size() != mics_per_ring.size())
        throw std::invalid_argument("ring_radii and mics_per_ring must have the same length");
    if (ring_radii.empty())
        throw std::invalid_argument("array needs at least one ring");
    int total = 0;
    for (std::size_t r = 0; r < ring_radii.size(); ++r) {
        if (!(ring_radii[r] >= Scalar(0)))
            throw std::invalid_argument("ring radii must be non-negative");
        if (r > 0 && !(ring_radii[r] > ring_radii[r - 1]))
            throw std::invalid_argument("ring radii must be strictly increasing");
        if (mics_per_ring[r] < 1)
            throw std::invalid_argument("each ring needs at least one mic");
        if (ring_radii[r] == Scalar(0) && mics_per_ring[r] != 1)
            throw std::invalid_argument("a ring of radius 0 can hold exactly one mic");
        total += mics_per_ring[r];
    }
    Eigen::Matrix<Scalar, 3, Eigen::Dynamic> pos(3, total);
    int m = 0;
    for (std::size_t r = 0; r < ring_radii.size(); ++r) {
        const int n = mics_per_ring[r];
        for (int k = 0; k < n; ++k, ++m) {
            const Scalar a = Scalar(2) * Scalar(M_PI) * Scalar(k) / Scalar(n);
            pos(0, m) = ring_radii[r] * std::cos(a);
            pos(1, m) = ring_radii[r] * std::sin(a);
            pos(2, m) = Scalar(0);
        }
    }
    return MicArray<Scalar>{pos};
}

// Direction u(theta, phi) = normalize((-tan phi, tan theta, 1)). Valid only
// for directions strictly in front of the array (z component > 0), which the
// tan singularities at phi, theta = pi/2 + k*pi delimit.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> unit_vector(const DoaAngles<Scalar>& doa) {
    if (!std::isfinite(doa.theta) || !std::isfinite(doa.phi))
        throw std::invalid_argument("DoA angles must be finite");
    const Scalar eps = Scalar(1e-12);
    if (std::abs(std::cos(doa.phi)) <= eps || std::abs(std::cos(doa.theta)) <= eps)
        throw std::invalid_argument("DoA at a tan singularity: direction is not in front of the array");
    Eigen::Matrix<Scalar, 3, 1> v(-std::tan(doa.phi), std::tan(doa.theta), Scalar(1));
    return v.normalized();
}

// tau_m = -(r_m . u) / c for a given unit direction.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1>
steering_delays_u(const MicArray<Scalar>& array,
                  const Eigen::Matrix<Scalar, 3, 1>& u,
                  Scalar speed_of_sound) {
    return -(array.positions.transpose() * u) / speed_of_sound;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1>
steering_delays(const MicArray<Scalar>& array, const DoaAngles<Scalar>& doa,
                const PropagationConfig<Scalar>& prop) {
    return steering_delays_u(array, unit_vector(doa), prop.speed_of_sound);
}

// Analytic array factor B = (1/M) sum_m exp(j 2 pi f (tau_m(look) - tau_m(source))).
template <typename Scalar>
std::complex<Scalar> beampattern_u(const MicArray<Scalar>& array,
                                   const Eigen::Matrix<Scalar, 3, 1>& u_look,
                                   const Eigen::Matrix<Scalar, 3, 1>& u_source,
                                   Scalar freq, Scalar speed_of_sound) {
    const auto tau_look = steering_delays_u(array, u_look, speed_of_sound);
    const auto tau_src = steering_delays_u(array, u_source, speed_of_sound);
    std::complex<Scalar> acc(0, 0);
    for (int m = 0; m < array.count(); ++m) {
        const Scalar phase = Scalar(2) * Scalar(M_PI) * freq * (tau_look(m) - tau_src(m));
        acc += std::complex<Scalar>(std::cos(phase), std::sin(phase));
    }
    return acc / Scalar(array.count());
}

template <typename Scalar>
std::complex<Scalar> beampattern(const MicArray<Scalar>& array,
                                 const DoaAngles<Scalar>& look,
                                 const DoaAngles<Scalar>& source,
                                 Scalar freq, const PropagationConfig<Scalar>& prop) {
    return beampattern_u(array, unit_vector(look), unit_vector(source), freq,
                         prop.speed_of_sound);
}

} // namespace beamlab
