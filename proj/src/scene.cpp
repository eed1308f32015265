#include "beamlab/scene.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

#include "beamlab/rng.hpp"
#include "beamlab/wav_io.hpp"

namespace beamlab {

namespace {

Eigen::VectorXd periodic_hann_vec(int n) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i)
        w(i) = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
    return w;
}

void validate_source(const SourceSpec& src, double sample_rate) {
    if (src.trajectory.empty())
        throw std::invalid_argument("source '" + src.label + "' has an empty trajectory");
    for (std::size_t i = 0; i < src.trajectory.size(); ++i) {
        if (!(src.trajectory[i].position.z() > 0.0))
            throw std::invalid_argument("source '" + src.label +
                                        "' has a trajectory point with z <= 0");
        if (i > 0 && !(src.trajectory[i].t_s > src.trajectory[i - 1].t_s))
            throw std::invalid_argument("source '" + src.label +
                                        "' trajectory times must be strictly increasing");
    }
    if (src.waveform.type == Waveform::Type::tone &&
        !(src.waveform.freq_hz < sample_rate / 2.0))
        throw std::invalid_argument("source '" + src.label +
                                    "' tone frequency violates the Nyquist limit f < f_s/2");
}

// Base (undelayed) signal for waveforms that exist as sample sequences.
Eigen::VectorXd sampled_base(const Waveform& wf, Eigen::Index length, double sample_rate) {
    Eigen::VectorXd base(length);
    switch (wf.type) {
    case Waveform::Type::tone:
        for (Eigen::Index n = 0; n < length; ++n)
            base(n) = wf.amplitude * std::sin(2.0 * M_PI * wf.freq_hz * n / sample_rate);
        break;
    case Waveform::Type::white_noise: {
        GaussianRng rng(wf.rng_seed);
        for (Eigen::Index n = 0; n < length; ++n)
            base(n) = wf.amplitude * rng.gaussian();
        break;
    }
    case Waveform::Type::sample_file: {
        MultichannelSignal file = read_wav(wf.path);
        if (file.channels() < 1 || file.length() < 1)
            throw std::invalid_argument("sample file is empty: " + wf.path);
        base.setZero();
        const Eigen::Index n = std::min(length, file.length());
        base.head(n) = wf.gain * file.samples.row(0).head(n).transpose();
        break;
    }
    }
    return base;
}

// 16-tap Hann-windowed sinc read of base at fractional position pos
// (zero outside the signal).
double sinc_read(const Eigen::VectorXd& base, double pos) {
    constexpr int half = 8;
    const double fl = std::floor(pos);
    const auto i0 = static_cast<Eigen::Index>(fl);
    const double fr = pos - fl;
    double acc = 0.0;
    for (int k = -half + 1; k <= half; ++k) {
        const Eigen::Index idx = i0 + k;
        if (idx < 0 || idx >= base.size())
            continue;
        const double t = k - fr;
        double kernel;
        if (t == 0.0) {
            kernel = 1.0;
        } else if (std::abs(t) >= half) {
            continue;
        } else {
            kernel = std::sin(M_PI * t) / (M_PI * t) * 0.5 * (1.0 + std::cos(M_PI * t / half));
        }
        acc += kernel * base(idx);
    }
    return acc;
}

} // namespace

Eigen::Vector3d position_at(const std::vector<Waypoint>& trajectory, double t) {
    if (trajectory.empty())
        throw std::invalid_argument("empty trajectory");
    if (t <= trajectory.front().t_s)
        return trajectory.front().position;
    if (t >= trajectory.back().t_s)
        return trajectory.back().position;
    for (std::size_t i = 1; i < trajectory.size(); ++i) {
        if (t <= trajectory[i].t_s) {
            const auto& a = trajectory[i - 1];
            const auto& b = trajectory[i];
            const double u = (t - a.t_s) / (b.t_s - a.t_s);
            return a.position + u * (b.position - a.position);
        }
    }
    return trajectory.back().position;
}

bool is_static_trajectory(const std::vector<Waypoint>& trajectory) {
    for (std::size_t i = 1; i < trajectory.size(); ++i)
        if (trajectory[i].position != trajectory[0].position)
            return false;
    return true;
}

Eigen::Vector3d array_direction(const Eigen::Vector3d& p_world, double h) {
    Eigen::Vector3d rel(p_world.x(), p_world.y() + h, p_world.z());
    if (!(rel.z() > 0.0))
        throw std::invalid_argument("source direction undefined for z <= 0");
    return rel.normalized();
}

Eigen::VectorXd spectral_advance(const Eigen::VectorXd& x, double advance_s, double sample_rate) {
    const auto n = x.size();
    if (n < 2)
        return x;
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> in(x.data(), x.data() + n);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, in);
    const auto bins = static_cast<Eigen::Index>(spec.size());
    for (Eigen::Index k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
        const double phase = 2.0 * M_PI * f * advance_s;
        spec[k] *= std::complex<double>(std::cos(phase), std::sin(phase));
    }
    if (n % 2 == 0)
        spec[bins - 1] = 0.0;
    std::vector<double> out;
    fft.inv(out, spec, static_cast<int>(n));
    return Eigen::Map<Eigen::VectorXd>(out.data(), n);
}

MultichannelSignal synthesize_scene(const MicArray<double>& array,
                                    const std::vector<SourceSpec>& sources,
                                    const PropagationConfig<double>& prop,
                                    double duration_s,
                                    const MountingOffset<double>& offset,
                                    int block_length) {
    if (!(duration_s > 0.0))
        throw std::invalid_argument("scene duration must be positive");
    if (block_length < 4 || block_length % 2 != 0)
        throw std::invalid_argument("scene block length must be even and >= 4");

    const double fs = prop.sample_rate;
    const auto length = static_cast<Eigen::Index>(std::llround(duration_s * fs));
    const int M = array.count();

    MultichannelSignal out;
    out.sample_rate = fs;
    out.samples = Eigen::MatrixXd::Zero(M, length);

    const int N = block_length;
    const int H = N / 2;
    const Eigen::VectorXd window = periodic_hann_vec(N);

    for (const auto& src : sources) {
        validate_source(src, fs);
        if (is_static_trajectory(src.trajectory)) {
            const Eigen::Vector3d u = array_direction(src.trajectory.front().position, offset.h);
            const Eigen::VectorXd base = sampled_base(src.waveform, length, fs);
            for (int m = 0; m < M; ++m) {
                const double advance = array.positions.col(m).dot(u) / prop.speed_of_sound;
                out.samples.row(m) += spectral_advance(base, advance, fs).transpose();
            }
        } else {
            const bool analytic_tone = src.waveform.type == Waveform::Type::tone;
            Eigen::VectorXd base;
            if (!analytic_tone)
                base = sampled_base(src.waveform, length, fs);
            const double t_last = static_cast<double>(length - 1) / fs;
            const auto num_blocks = static_cast<Eigen::Index>(length / H);
            for (Eigen::Index b = -1; b < num_blocks; ++b) {
                const Eigen::Index n0 = b * H;
                const double t_mid = std::clamp((n0 + N / 2.0) / fs, 0.0, t_last);
                const Eigen::Vector3d u =
                    array_direction(position_at(src.trajectory, t_mid), offset.h);
                const Eigen::Index lo = std::max<Eigen::Index>(n0, 0);
                const Eigen::Index hi = std::min<Eigen::Index>(n0 + N, length);
                for (int m = 0; m < M; ++m) {
                    const double advance = array.positions.col(m).dot(u) / prop.speed_of_sound;
                    if (analytic_tone) {
                        const double w0 = 2.0 * M_PI * src.waveform.freq_hz;
                        for (Eigen::Index i = lo; i < hi; ++i)
                            out.samples(m, i) += window(i - n0) * src.waveform.amplitude *
                                                 std::sin(w0 * (i / fs + advance));
                    } else {
                        const double shift = advance * fs;
                        for (Eigen::Index i = lo; i < hi; ++i)
                            out.samples(m, i) += window(i - n0) * sinc_read(base, i + shift);
                    }
                }
            }
        }
    }

    out.clipped = out.samples.cwiseAbs().maxCoeff() > 1.0;
    return out;
}

void add_diffuse_noise(MultichannelSignal& signal, double snr_db, std::uint64_t seed) {
    const Eigen::Index length = signal.length();
    if (length == 0 || signal.channels() == 0)
        return;
    const double p_ref = signal.samples.row(0).squaredNorm() / static_cast<double>(length);
    const double sigma = std::sqrt(p_ref / std::pow(10.0, snr_db / 10.0));
    for (Eigen::Index m = 0; m < signal.channels(); ++m) {
        GaussianRng rng(mix_seed(seed, static_cast<std::uint64_t>(m)));
        for (Eigen::Index n = 0; n < length; ++n)
            signal.samples(m, n) += sigma * rng.gaussian();
    }
    signal.clipped = signal.samples.cwiseAbs().maxCoeff() > 1.0;
}

} // namespace beamlab
