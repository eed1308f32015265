#include "beamlab/beamformer.hpp"

#include <cmath>
#include <stdexcept>

namespace beamlab {

void validate_frame_spec(const FrameSpec& spec) {
    if (spec.frame_length < 4 || spec.frame_length % 2 != 0)
        throw std::invalid_argument("frame_length must be even and >= 4");
    if (spec.hop * 2 != spec.frame_length)
        throw std::invalid_argument("hop must be frame_length/2 (the only overlap with exact reconstruction)");
}

Eigen::VectorXd periodic_hann(int length) {
    Eigen::VectorXd w(length);
    for (int i = 0; i < length; ++i)
        w(i) = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / length));
    return w;
}

OlaBeamformer::OlaBeamformer(const FrameSpec& spec, int channels,
                             const PropagationConfig<double>& prop)
    : spec_(spec), channels_(channels), sample_rate_(prop.sample_rate),
      speed_of_sound_(prop.speed_of_sound) {
    validate_frame_spec(spec_);
    if (channels_ < 1)
        throw std::invalid_argument("beamformer needs at least one channel");
    delays_ = Eigen::VectorXd::Zero(channels_); // broadside until steered
    tail_ = Eigen::VectorXd::Zero(spec_.frame_length - spec_.hop);
    window_ = periodic_hann(spec_.frame_length);
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    frame_buf_.resize(spec_.frame_length);
    out_buf_.resize(spec_.frame_length);
}

void OlaBeamformer::steer(const DoaAngles<double>& doa, const MicArray<double>& array) {
    if (array.count() != channels_)
        throw std::invalid_argument("steer: array channel count does not match the beamformer");
    // unit_vector throws on invalid directions before delays_ is touched
    PropagationConfig<double> prop{speed_of_sound_, sample_rate_};
    delays_ = steering_delays(array, doa, prop);
}

void OlaBeamformer::set_delays(const Eigen::VectorXd& delays_s) {
    if (delays_s.size() != channels_)
        throw std::invalid_argument("set_delays: wrong delay vector length");
    if (!delays_s.allFinite())
        throw std::invalid_argument("set_delays: delays must be finite");
    delays_ = delays_s;
}

Eigen::VectorXd OlaBeamformer::process_chunk(const AudioChunk& chunk) {
    const int N = spec_.frame_length;
    const int H = spec_.hop;
    if (chunk.samples.rows() != channels_ || chunk.samples.cols() != N)
        throw std::invalid_argument("process_chunk: chunk shape does not match channels x frame_length");
    if (!chunk.samples.allFinite())
        throw std::invalid_argument("process_chunk: non-finite samples");
    if (frames_processed_ > 0 && chunk.timestamp <= last_timestamp_)
        throw std::invalid_argument("process_chunk: chunk timestamps must be strictly increasing");
    last_timestamp_ = chunk.timestamp;

    const int bins = N / 2 + 1;
    acc_buf_.assign(bins, std::complex<double>(0.0, 0.0));

    for (int m = 0; m < channels_; ++m) {
        for (int n = 0; n < N; ++n)
            frame_buf_[n] = chunk.samples(m, n);
        fft_.fwd(spec_buf_, frame_buf_);
        const double w_tau = 2.0 * M_PI * sample_rate_ / N * delays_(m);
        for (int k = 0; k < bins; ++k) {
            const double phase = w_tau * k;
            acc_buf_[k] += spec_buf_[k] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
    }
    const double inv_m = 1.0 / channels_;
    for (int k = 0; k < bins; ++k)
        acc_buf_[k] *= inv_m;
    // keep DC and Nyquist real so the inverse transform is real-valued
    acc_buf_[0] = acc_buf_[0].real();
    acc_buf_[bins - 1] = acc_buf_[bins - 1].real();

    fft_.inv(out_buf_, acc_buf_, N);

    Eigen::VectorXd emitted(H);
    for (int n = 0; n < N; ++n)
        out_buf_[n] *= window_(n);
    for (int n = 0; n < H; ++n)
        emitted(n) = out_buf_[n] + tail_(n);
    // with hop = N/2 the old tail never reaches past the emitted half
    for (int n = 0; n < N - H; ++n)
        tail_(n) = out_buf_[H + n];

    ++frames_processed_;
    return emitted;
}

void OlaBeamformer::reset() {
    tail_.setZero();
    frames_processed_ = 0;
    last_timestamp_ = 0.0;
    delays_.setZero();
}

Eigen::VectorXd process_offline(const MultichannelSignal& signal,
                                const std::vector<SteeringEntry>& schedule,
                                const MicArray<double>& array,
                                const PropagationConfig<double>& prop,
                                const FrameSpec& spec) {
    validate_frame_spec(spec);
    const Eigen::Index length = signal.length();
    if (length == 0 || signal.channels() == 0)
        throw std::invalid_argument("process_offline: empty signal");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i].t_s < schedule[i - 1].t_s)
            throw std::invalid_argument("process_offline: schedule times must be non-decreasing");

    const int N = spec.frame_length;
    const int H = spec.hop;
    const double fs = prop.sample_rate;
    OlaBeamformer bf(spec, static_cast<int>(signal.channels()), prop);

    Eigen::VectorXd out = Eigen::VectorXd::Zero(length);
    const auto num_frames = length >= N ? (length - N) / H + 1 : 0;
    std::size_t sched_pos = 0;
    for (Eigen::Index r = 0; r < num_frames; ++r) {
        AudioChunk chunk;
        chunk.samples = signal.samples.middleCols(r * H, N);
        chunk.timestamp = signal.start_time + static_cast<double>(r * H) / fs;
        chunk.chunk_index = r;
        const double t_mid = chunk.timestamp + N / (2.0 * fs);
        while (sched_pos < schedule.size() && schedule[sched_pos].t_s <= t_mid) {
            bf.steer(schedule[sched_pos].doa, array);
            ++sched_pos;
        }
        const Eigen::VectorXd emitted = bf.process_chunk(chunk);
        const Eigen::Index at = H + r * H; // leading H zeros: output is the input delayed by H
        const Eigen::Index n = std::min<Eigen::Index>(H, length - at);
        if (n > 0)
            out.segment(at, n) = emitted.head(n);
    }
    return out;
}

} // namespace beamlab
