#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "beamlab/array_geometry.hpp"
#include "beamlab/signal.hpp"

namespace beamlab {

// Frame geometry for the overlap-add beamformer. Only hop = N/2 is
// supported: reconstruction exactness relies on the shifted periodic-Hann
// pair summing to 1.
struct FrameSpec {
    int frame_length = 256;
    int hop = 128;
};

void validate_frame_spec(const FrameSpec& spec);

Eigen::VectorXd periodic_hann(int length);

struct AudioChunk {
    Eigen::MatrixXd samples; // channels x frame_length
    double timestamp = 0.0;  // capture time of the first sample
    std::int64_t chunk_index = 0;
};

// Frequency-domain delay-and-sum with overlap-add reconstruction. Single
// owner: one thread at a time calls steer/process_chunk (the pipeline
// serializes them). Streaming contract: chunks are 50%-overlapped, so each
// call emits hop new output samples; steady-state output is the input
// delayed by hop samples.
class OlaBeamformer {
  public:
    OlaBeamformer(const FrameSpec& spec, int channels, const PropagationConfig<double>& prop);

    // Replaces the steering delays starting with the next chunk. On a
    // direction-domain error the previous delays are kept.
    void steer(const DoaAngles<double>& doa, const MicArray<double>& array);
    void set_delays(const Eigen::VectorXd& delays_s);

    Eigen::VectorXd process_chunk(const AudioChunk& chunk);
    void reset();

    const Eigen::VectorXd& delays() const { return delays_; }
    std::int64_t frames_processed() const { return frames_processed_; }
    const FrameSpec& frame_spec() const { return spec_; }
    int channels() const { return channels_; }

  private:
    FrameSpec spec_;
    int channels_;
    double sample_rate_;
    double speed_of_sound_;
    Eigen::VectorXd delays_;
    Eigen::VectorXd tail_;   // pending N - H output samples
    Eigen::VectorXd window_; // synthesis window (periodic Hann)
    std::int64_t frames_processed_ = 0;
    double last_timestamp_ = 0.0;

    Eigen::FFT<double> fft_;
    std::vector<double> frame_buf_;
    std::vector<std::complex<double>> spec_buf_;
    std::vector<std::complex<double>> acc_buf_;
    std::vector<double> out_buf_;
};

// Steering schedule entry: the DoA applied to every chunk whose midpoint is
// at or after t_s (until a later entry takes over).
struct SteeringEntry {
    double t_s = 0.0;
    DoaAngles<double> doa;
};

// Batch driver: frames the signal at 50% overlap, applies the latest
// schedule entry at or before each frame midpoint (broadside before the
// first entry), concatenates the per-chunk outputs behind hop leading
// zeros. Output length equals input length; the first 2*hop samples are the
// warm-up ramp and steady state equals the input delayed by hop samples.
Eigen::VectorXd process_offline(const MultichannelSignal& signal,
                                const std::vector<SteeringEntry>& schedule,
                                const MicArray<double>& array,
                                const PropagationConfig<double>& prop,
                                const FrameSpec& spec);

} // namespace beamlab
