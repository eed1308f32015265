#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "beamlab/errors.hpp"
#include "beamlab/wav_io.hpp"

using namespace beamlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_wav(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "beamlab_wav_tests";
    fs::create_directories(dir);
    return dir / name;
}

MultichannelSignal random_signal(int channels, int length, double sample_rate,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.2, 1.2);
    MultichannelSignal sig;
    sig.sample_rate = sample_rate;
    sig.samples.resize(channels, length);
    for (int c = 0; c < channels; ++c)
        for (int n = 0; n < length; ++n)
            sig.samples(c, n) = unif(rng);
    return sig;
}

} // namespace

TEST_CASE("float32 storage is bitwise exact") {
    auto sig = random_signal(3, 1000, 8000.0, 1);
    // quantize to float up front: the file stores exactly these values
    for (int c = 0; c < 3; ++c)
        for (int n = 0; n < 1000; ++n)
            sig.samples(c, n) = static_cast<double>(static_cast<float>(sig.samples(c, n)));

    const auto path = temp_wav("roundtrip_f32.wav");
    write_wav(sig, path, WavFormat::float32);
    const auto back = read_wav(path);

    CHECK(back.sample_rate == 8000.0);
    REQUIRE(back.channels() == 3);
    REQUIRE(back.length() == 1000);
    CHECK(back.samples == sig.samples);
    fs::remove(path);
}

TEST_CASE("int16 storage round-trips within one quantization step") {
    auto sig = random_signal(2, 500, 44100.0, 2);
    sig.samples = sig.samples.cwiseMin(1.0).cwiseMax(-1.0);

    const auto path = temp_wav("roundtrip_i16.wav");
    write_wav(sig, path, WavFormat::int16);
    const auto back = read_wav(path);

    CHECK(back.sample_rate == 44100.0);
    REQUIRE(back.channels() == 2);
    REQUIRE(back.length() == 500);
    CHECK((back.samples - sig.samples).cwiseAbs().maxCoeff() <= 1.0 / 32767.0);
    fs::remove(path);
}

TEST_CASE("channel order survives interleaving") {
    MultichannelSignal sig;
    sig.sample_rate = 8000.0;
    sig.samples.resize(2, 64);
    sig.samples.row(0).setConstant(0.25);
    sig.samples.row(1).setConstant(-0.5);

    const auto path = temp_wav("channels.wav");
    write_wav(sig, path, WavFormat::float32);
    const auto back = read_wav(path);

    CHECK(back.samples.row(0).minCoeff() == 0.25);
    CHECK(back.samples.row(0).maxCoeff() == 0.25);
    CHECK(back.samples.row(1).minCoeff() == -0.5);
    CHECK(back.samples.row(1).maxCoeff() == -0.5);
    fs::remove(path);
}

TEST_CASE("writer rejects unusable signals") {
    MultichannelSignal sig;
    sig.samples.resize(1, 8);
    sig.samples.setZero();
    sig.samples(0, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(write_wav(sig, temp_wav("nan.wav")), std::invalid_argument);

    sig.samples(0, 3) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(write_wav(sig, temp_wav("inf.wav")), std::invalid_argument);

    MultichannelSignal empty;
    empty.samples.resize(0, 8);
    CHECK_THROWS_AS(write_wav(empty, temp_wav("empty.wav")), std::invalid_argument);
}

TEST_CASE("reader rejects missing and malformed files") {
    CHECK_THROWS_AS(read_wav(temp_wav("does_not_exist.wav")), IoError);

    const auto garbage = temp_wav("garbage.wav");
    {
        std::ofstream out(garbage, std::ios::binary);
        out << "this is not audio";
    }
    CHECK_THROWS_AS(read_wav(garbage), IoError);
    fs::remove(garbage);

    // valid header cut off mid-data
    auto sig = random_signal(1, 256, 8000.0, 3);
    const auto truncated = temp_wav("truncated.wav");
    write_wav(sig, truncated, WavFormat::float32);
    const auto size = fs::file_size(truncated);
    fs::resize_file(truncated, size / 2);
    CHECK_THROWS_AS(read_wav(truncated), IoError);
    fs::remove(truncated);
}

TEST_CASE("reader rejects encodings it does not understand") {
    // minimal RIFF/WAVE with 8-bit PCM, which the reader does not support
    const auto path = temp_wav("pcm8.wav");
    {
        std::ofstream out(path, std::ios::binary);
        const auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
        const auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
        out.write("RIFF", 4);
        u32(36 + 4);
        out.write("WAVE", 4);
        out.write("fmt ", 4);
        u32(16);
        u16(1);      // PCM
        u16(1);      // mono
        u32(8000);   // sample rate
        u32(8000);   // byte rate
        u16(1);      // block align
        u16(8);      // bits per sample
        out.write("data", 4);
        u32(4);
        u32(0x80808080u);
    }
    CHECK_THROWS_WITH_AS(read_wav(path), doctest::Contains("unsupported WAV encoding"), IoError);
    fs::remove(path);
}
