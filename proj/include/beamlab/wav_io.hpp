#pragma once

#include <filesystem>

#include "beamlab/signal.hpp"

namespace beamlab {

enum class WavFormat { float32, int16 };

// RIFF/WAVE, interleaved, channels in array order. Written atomically
// (temp file + rename). Non-finite samples are rejected.
void write_wav(const MultichannelSignal& signal, const std::filesystem::path& path,
               WavFormat format = WavFormat::float32);

// Accepts PCM int16 and IEEE float32 files; anything else is an error.
MultichannelSignal read_wav(const std::filesystem::path& path);

} // namespace beamlab
