#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "beamlab/scene.hpp"

using namespace beamlab;

namespace {

const PropagationConfig<double> kProp{343.0, 8000.0};
const MountingOffset<double> kOffset{0.12};

MicArray<double> reference_array() {
    return build_concentric_array<double>({0.0, 0.025, 0.045}, {1, 4, 8});
}

SourceSpec tone_source(const std::string& label, double freq, double amp,
                       const Eigen::Vector3d& pos) {
    SourceSpec src;
    src.label = label;
    src.waveform.type = Waveform::Type::tone;
    src.waveform.freq_hz = freq;
    src.waveform.amplitude = amp;
    src.trajectory = {{0.0, pos}};
    return src;
}

SourceSpec noise_source(const std::string& label, double amp, std::uint64_t seed,
                        const Eigen::Vector3d& pos) {
    SourceSpec src;
    src.label = label;
    src.waveform.type = Waveform::Type::white_noise;
    src.waveform.amplitude = amp;
    src.waveform.rng_seed = seed;
    src.trajectory = {{0.0, pos}};
    return src;
}

// complex amplitude of x at an exact-bin frequency (integer cycles in x)
std::complex<double> tone_coefficient(const Eigen::VectorXd& x, double freq, double fs) {
    std::complex<double> acc(0.0, 0.0);
    const double w = 2.0 * M_PI * freq / fs;
    for (Eigen::Index n = 0; n < x.size(); ++n)
        acc += x(n) * std::complex<double>(std::cos(w * n), -std::sin(w * n));
    return acc;
}

} // namespace

TEST_CASE("trajectory interpolation clamps and lerps") {
    const std::vector<Waypoint> traj = {{0.0, {0.0, 0.0, 1.0}}, {1.0, {1.0, 0.0, 2.0}}};
    CHECK(position_at(traj, -1.0) == Eigen::Vector3d(0.0, 0.0, 1.0));
    CHECK(position_at(traj, 2.0) == Eigen::Vector3d(1.0, 0.0, 2.0));
    CHECK((position_at(traj, 0.25) - Eigen::Vector3d(0.25, 0.0, 1.25)).norm() < 1e-15);
    CHECK_THROWS_AS(position_at({}, 0.0), std::invalid_argument);

    CHECK(is_static_trajectory({{0.0, {1.0, 2.0, 3.0}}}));
    CHECK(is_static_trajectory({{0.0, {1.0, 2.0, 3.0}}, {5.0, {1.0, 2.0, 3.0}}}));
    CHECK_FALSE(is_static_trajectory(traj));
}

TEST_CASE("array_direction folds in the mounting offset") {
    const Eigen::Vector3d u = array_direction({0.0, -0.12, 2.0}, 0.12);
    CHECK((u - Eigen::Vector3d(0.0, 0.0, 1.0)).norm() < 1e-15);
    CHECK_THROWS_AS(array_direction({0.0, 0.0, -1.0}, 0.12), std::invalid_argument);
}

TEST_CASE("spectral advance is exactly invertible") {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> gauss(0.0, 0.3);
    Eigen::VectorXd x(4096);
    for (Eigen::Index n = 0; n < x.size(); ++n)
        x(n) = gauss(rng);

    const Eigen::VectorXd once = spectral_advance(x, 3.7e-4, 8000.0);
    const Eigen::VectorXd back = spectral_advance(once, -3.7e-4, 8000.0);
    const Eigen::VectorXd settled = spectral_advance(x, 0.0, 8000.0); // only the Nyquist bin differs
    CHECK((back - settled).norm() / settled.norm() < 1e-12);
}

TEST_CASE("broadside source reaches every mic in phase") {
    const auto array = reference_array();
    // y = -h puts the source at zero elevation, x = 0 at zero azimuth offset
    const auto scene = synthesize_scene(array, {tone_source("t", 2000.0, 0.4, {0.0, -0.12, 2.0})},
                                        kProp, 1.0, kOffset);

    REQUIRE(scene.channels() == 13);
    REQUIRE(scene.length() == 8000);
    CHECK_FALSE(scene.clipped);
    for (int m = 1; m < 13; ++m)
        CHECK(scene.samples.row(m) == scene.samples.row(0));

    // channel 0 is the tone itself up to FFT round-trip noise
    Eigen::VectorXd expected(8000);
    for (int n = 0; n < 8000; ++n)
        expected(n) = 0.4 * std::sin(2.0 * M_PI * 2000.0 * n / 8000.0);
    CHECK((scene.samples.row(0).transpose() - expected).norm() / expected.norm() < 1e-10);
}

TEST_CASE("no sources means silence") {
    const auto scene = synthesize_scene(reference_array(), {}, kProp, 0.5, kOffset);
    CHECK(scene.length() == 4000);
    CHECK(scene.samples.cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(scene.clipped);
}

TEST_CASE("inter-channel delay matches the plane-wave model") {
    const auto array = reference_array();
    // 45 degrees to the right at zero elevation
    const Eigen::Vector3d pos(2.0, -0.12, 2.0);
    const auto scene = synthesize_scene(array, {tone_source("t", 2000.0, 0.4, pos)},
                                        kProp, 1.0, kOffset);

    const Eigen::Vector3d u = array_direction(pos, kOffset.h);
    const auto tau = steering_delays_u(array, u, kProp.speed_of_sound);

    // phase of the exact-bin tone gives the advance of each channel directly
    const auto c0 = tone_coefficient(scene.samples.row(0).transpose(), 2000.0, 8000.0);
    for (int m : {1, 3, 5, 9}) {
        const auto cm = tone_coefficient(scene.samples.row(m).transpose(), 2000.0, 8000.0);
        const double advance = std::arg(cm * std::conj(c0)) / (2.0 * M_PI * 2000.0);
        CHECK(advance == doctest::Approx(-tau(m)).epsilon(1e-9));
    }
}

TEST_CASE("sources superpose linearly") {
    const auto array = reference_array();
    const auto a = tone_source("a", 2000.0, 0.3, {0.7, -0.12, 2.0});
    const auto b = noise_source("b", 0.1, 5, {-0.9, -0.12, 2.0});

    const auto only_a = synthesize_scene(array, {a}, kProp, 0.5, kOffset);
    const auto only_b = synthesize_scene(array, {b}, kProp, 0.5, kOffset);
    const auto both = synthesize_scene(array, {a, b}, kProp, 0.5, kOffset);

    CHECK((both.samples - (only_a.samples + only_b.samples)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("channels align after undoing the per-mic advance") {
    const auto array = reference_array();
    const Eigen::Vector3d pos(1.3, 0.4, 1.8);
    const auto scene = synthesize_scene(array, {noise_source("n", 0.3, 7, pos)},
                                        kProp, 1.0, kOffset);

    const Eigen::Vector3d u = array_direction(pos, kOffset.h);
    const auto tau = steering_delays_u(array, u, kProp.speed_of_sound);

    // advance was +r.u/c = -tau, so shifting by tau brings each channel home
    const Eigen::VectorXd ref = spectral_advance(scene.samples.row(0).transpose(),
                                                 tau(0), kProp.sample_rate);
    for (int m = 1; m < 13; ++m) {
        const Eigen::VectorXd aligned = spectral_advance(scene.samples.row(m).transpose(),
                                                         tau(m), kProp.sample_rate);
        CHECK((aligned - ref).norm() / ref.norm() < 1e-10);
    }
}

TEST_CASE("moving sources stay continuous across blocks") {
    SourceSpec src = tone_source("m", 2000.0, 0.4, {-1.0, -0.12, 2.0});
    src.trajectory = {{0.0, {-1.0, -0.12, 2.0}}, {2.0, {1.0, -0.12, 2.0}}};

    const auto scene = synthesize_scene(reference_array(), {src}, kProp, 2.0, kOffset);
    CHECK(scene.samples.allFinite());

    // per-sample slew of a continuous 2 kHz tone, with room for doppler and
    // the block crossfades; a seam would jump by up to twice the amplitude
    const double bound = 1.15 * 2.0 * 0.4 * std::sin(M_PI * 2000.0 / 8000.0);
    for (int m = 0; m < 13; ++m) {
        const auto row = scene.samples.row(m);
        double max_step = 0.0;
        for (Eigen::Index n = 1; n < row.size(); ++n)
            max_step = std::max(max_step, std::abs(row(n) - row(n - 1)));
        CHECK(max_step < bound);
    }
}

TEST_CASE("clipping is flagged, not applied") {
    const auto loud = synthesize_scene(reference_array(),
                                       {tone_source("t", 2000.0, 1.3, {0.0, -0.12, 2.0})},
                                       kProp, 0.25, kOffset);
    CHECK(loud.clipped);
    CHECK(loud.samples.cwiseAbs().maxCoeff() > 1.0); // samples stay unclamped

    const auto quiet = synthesize_scene(reference_array(),
                                        {tone_source("t", 2000.0, 0.4, {0.0, -0.12, 2.0})},
                                        kProp, 0.25, kOffset);
    CHECK_FALSE(quiet.clipped);
}

TEST_CASE("synthesis is deterministic") {
    const auto spec = noise_source("n", 0.3, 42, {0.5, -0.12, 2.0});
    const auto one = synthesize_scene(reference_array(), {spec}, kProp, 0.5, kOffset);
    const auto two = synthesize_scene(reference_array(), {spec}, kProp, 0.5, kOffset);
    CHECK(one.samples == two.samples);

    auto other = spec;
    other.waveform.rng_seed = 43;
    const auto three = synthesize_scene(reference_array(), {other}, kProp, 0.5, kOffset);
    CHECK(one.samples != three.samples);
}

TEST_CASE("synthesis rejects invalid sources") {
    const auto array = reference_array();

    auto aliased = tone_source("t", 4000.0, 0.4, {0.0, -0.12, 2.0});
    CHECK_THROWS_WITH_AS(synthesize_scene(array, {aliased}, kProp, 0.5, kOffset),
                         doctest::Contains("Nyquist"), std::invalid_argument);

    auto pathless = tone_source("t", 2000.0, 0.4, {0.0, -0.12, 2.0});
    pathless.trajectory.clear();
    CHECK_THROWS_AS(synthesize_scene(array, {pathless}, kProp, 0.5, kOffset),
                    std::invalid_argument);

    auto unordered = tone_source("t", 2000.0, 0.4, {0.0, -0.12, 2.0});
    unordered.trajectory = {{1.0, {0.0, -0.12, 2.0}}, {0.5, {0.1, -0.12, 2.0}}};
    CHECK_THROWS_AS(synthesize_scene(array, {unordered}, kProp, 0.5, kOffset),
                    std::invalid_argument);

    auto behind = tone_source("t", 2000.0, 0.4, {0.0, -0.12, -2.0});
    CHECK_THROWS_AS(synthesize_scene(array, {behind}, kProp, 0.5, kOffset),
                    std::invalid_argument);

    CHECK_THROWS_AS(synthesize_scene(array, {}, kProp, -1.0, kOffset), std::invalid_argument);
}

TEST_CASE("diffuse noise lands at the requested SNR") {
    const auto clean = synthesize_scene(reference_array(),
                                        {tone_source("t", 2000.0, 0.4, {0.0, -0.12, 2.0})},
                                        kProp, 10.0, kOffset);
    auto noisy = clean;
    add_diffuse_noise(noisy, 20.0, 99);

    const Eigen::MatrixXd noise = noisy.samples - clean.samples;
    const double p_signal = clean.samples.row(0).squaredNorm() / clean.length();
    const double p_noise = noise.row(0).squaredNorm() / clean.length();
    CHECK(10.0 * std::log10(p_signal / p_noise) == doctest::Approx(20.0).epsilon(0.02));

    // per-mic streams are uncorrelated, not copies
    CHECK(noise.row(0) != noise.row(1));
    const double cross = (noise.row(0).dot(noise.row(1))) /
                         std::sqrt(noise.row(0).squaredNorm() * noise.row(1).squaredNorm());
    CHECK(std::abs(cross) < 0.05);

    auto again = clean;
    add_diffuse_noise(again, 20.0, 99);
    CHECK(again.samples == noisy.samples);
}
