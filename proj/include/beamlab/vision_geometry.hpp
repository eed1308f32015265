#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "beamlab/array_geometry.hpp"

namespace beamlab {

template <typename Scalar>
struct MountingOffset {
    Scalar h = 0; // vertical offset between camera and array origins, meters
};

// Pinhole camera: K maps camera-frame rays to pixels, (R, t) maps camera
// frame to world frame. Construct through make_camera_model so the matrix
// invariants hold from the start.
template <typename Scalar>
struct CameraModel {
    Eigen::Matrix<Scalar, 3, 3> K;
    Eigen::Matrix<Scalar, 3, 3> K_inv;
    Eigen::Matrix<Scalar, 3, 3> R;
    Eigen::Matrix<Scalar, 3, 1> t;
    Scalar focal_length = 0;
    Scalar baseline = 0;
};

template <typename Scalar>
CameraModel<Scalar> make_camera_model(const Eigen::Matrix<Scalar, 3, 3>& K,
                                      const Eigen::Matrix<Scalar, 3, 3>& R,
                                      const Eigen::Matrix<Scalar, 3, 1>& t,
                                      Scalar focal_length, Scalar baseline) {
    if (K(2, 2) != Scalar(1))
        throw std::invalid_argument("camera K must have K[2][2] = 1");
    if (std::abs(K.determinant()) < Scalar(1e-12))
        throw std::invalid_argument("camera K must be invertible");
    if (((R.transpose() * R) - Eigen::Matrix<Scalar, 3, 3>::Identity()).cwiseAbs().maxCoeff() > Scalar(1e-10))
        throw std::invalid_argument("camera R must be orthonormal");
    if (R.determinant() < Scalar(0))
        throw std::invalid_argument("camera R must be a proper rotation (det +1)");
    if (!(focal_length > Scalar(0)))
        throw std::invalid_argument("camera focal length must be positive");
    return CameraModel<Scalar>{K, K.inverse(), R, t, focal_length, baseline};
}

// depth = f * B / d
template <typename Scalar>
Scalar triangulate_depth(Scalar focal_px, Scalar baseline_m, Scalar disparity_px) {
    if (!(focal_px > Scalar(0)) || !(baseline_m > Scalar(0)))
        throw std::invalid_argument("triangulation needs positive focal length and baseline");
    if (!(disparity_px > Scalar(0)))
        throw std::invalid_argument("non-positive disparity: correspondence is ambiguous or behind the camera");
    return focal_px * baseline_m / disparity_px;
}

// p_cam = depth * K^-1 [x, y, 1]^T
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> back_project(const CameraModel<Scalar>& cam,
                                         const Eigen::Matrix<Scalar, 2, 1>& pixel,
                                         Scalar depth) {
    if (!(depth > Scalar(0)))
        throw std::invalid_argument("back-projection needs positive depth");
    Eigen::Matrix<Scalar, 3, 1> h(pixel.x(), pixel.y(), Scalar(1));
    return depth * (cam.K_inv * h);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> to_world(const CameraModel<Scalar>& cam,
                                     const Eigen::Matrix<Scalar, 3, 1>& p_cam) {
    return cam.R * p_cam + cam.t;
}

// Exact inverse of back_project + to_world: world point -> (pixel, depth).
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, 2, 1>, Scalar>
project_to_pixel(const CameraModel<Scalar>& cam, const Eigen::Matrix<Scalar, 3, 1>& p_world) {
    const Eigen::Matrix<Scalar, 3, 1> p_cam = cam.R.transpose() * (p_world - cam.t);
    if (!(p_cam.z() > Scalar(0)))
        throw std::invalid_argument("point is behind the camera");
    const Eigen::Matrix<Scalar, 3, 1> h = cam.K * p_cam;
    return {Eigen::Matrix<Scalar, 2, 1>(h.x() / h.z(), h.y() / h.z()), p_cam.z()};
}

// phi = pi - arctan(x/z), theta = arctan((y + h)/z); requires the target in
// front of the array plane (z > 0).
template <typename Scalar>
DoaAngles<Scalar> doa_from_position(const Eigen::Matrix<Scalar, 3, 1>& p_world,
                                    const MountingOffset<Scalar>& offset) {
    if (!(p_world.z() > Scalar(0)))
        throw std::invalid_argument("DoA undefined for a point behind the array plane (z <= 0)");
    DoaAngles<Scalar> doa;
    doa.phi = Scalar(M_PI) - std::atan(p_world.x() / p_world.z());
    doa.theta = std::atan((p_world.y() + offset.h) / p_world.z());
    return doa;
}

} // namespace beamlab
