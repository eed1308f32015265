#include "beamlab/wav_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "beamlab/csv.hpp"
#include "beamlab/errors.hpp"

namespace beamlab {

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    s.append(b, 4);
}

void put_u16(std::string& s, std::uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    s.append(b, 2);
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

std::uint16_t get_u16(const unsigned char* p) {
    return std::uint16_t(p[0] | p[1] << 8);
}

} // namespace

void write_wav(const MultichannelSignal& signal, const std::filesystem::path& path,
               WavFormat format) {
    const Eigen::Index channels = signal.channels();
    const Eigen::Index frames = signal.length();
    if (channels < 1)
        throw std::invalid_argument("cannot write a WAV with zero channels");
    if (!signal.samples.allFinite())
        throw std::invalid_argument("cannot write non-finite samples to WAV");

    const bool is_float = format == WavFormat::float32;
    const std::uint16_t bytes_per_sample = is_float ? 4 : 2;
    const std::uint32_t block_align = std::uint32_t(channels) * bytes_per_sample;
    const std::uint32_t data_bytes = std::uint32_t(frames) * block_align;
    const std::uint32_t rate = std::uint32_t(std::lround(signal.sample_rate));

    std::string out;
    out.reserve(64 + data_bytes);
    out += "RIFF";
    // riff size = everything after this field; fact chunk only for float
    const std::uint32_t fact_bytes = is_float ? 12 : 0;
    put_u32(out, 4 + 24 + fact_bytes + 8 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, is_float ? 3 : 1); // IEEE float / PCM
    put_u16(out, std::uint16_t(channels));
    put_u32(out, rate);
    put_u32(out, rate * block_align);
    put_u16(out, std::uint16_t(block_align));
    put_u16(out, std::uint16_t(bytes_per_sample * 8));
    if (is_float) {
        out += "fact";
        put_u32(out, 4);
        put_u32(out, std::uint32_t(frames));
    }
    out += "data";
    put_u32(out, data_bytes);

    if (is_float) {
        for (Eigen::Index n = 0; n < frames; ++n) {
            for (Eigen::Index c = 0; c < channels; ++c) {
                const float v = static_cast<float>(signal.samples(c, n));
                char b[4];
                std::memcpy(b, &v, 4);
                out.append(b, 4);
            }
        }
    } else {
        for (Eigen::Index n = 0; n < frames; ++n) {
            for (Eigen::Index c = 0; c < channels; ++c) {
                double v = signal.samples(c, n);
                if (v > 1.0) v = 1.0;
                if (v < -1.0) v = -1.0;
                const auto q = static_cast<std::int16_t>(std::lrint(v * 32767.0));
                put_u16(out, static_cast<std::uint16_t>(q));
            }
        }
    }

    AtomicFile file(path);
    file.stream().write(out.data(), static_cast<std::streamsize>(out.size()));
    file.commit();
}

MultichannelSignal read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open WAV: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw IoError("not a RIFF/WAVE file: " + path.string());

    std::uint16_t format_tag = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::size_t data_off = 0, data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = get_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size())
            throw IoError("truncated WAV chunk in " + path.string());
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16)
                throw IoError("malformed fmt chunk in " + path.string());
            format_tag = get_u16(bytes.data() + body);
            channels = get_u16(bytes.data() + body + 2);
            rate = get_u32(bytes.data() + body + 4);
            bits = get_u16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_off = body;
            data_len = len;
        }
        pos = body + len + (len & 1); // chunks are word-aligned
    }
    if (!have_fmt || data_off == 0)
        throw IoError("WAV missing fmt or data chunk: " + path.string());
    if (channels == 0)
        throw IoError("WAV has zero channels: " + path.string());

    const bool is_float = format_tag == 3 && bits == 32;
    const bool is_pcm16 = format_tag == 1 && bits == 16;
    if (!is_float && !is_pcm16)
        throw IoError("unsupported WAV encoding (only PCM16 and float32): " + path.string());

    const std::size_t bytes_per_sample = is_float ? 4 : 2;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t frames = data_len / frame_bytes;

    MultichannelSignal sig;
    sig.sample_rate = rate;
    sig.samples.resize(channels, static_cast<Eigen::Index>(frames));
    const unsigned char* p = bytes.data() + data_off;
    for (std::size_t n = 0; n < frames; ++n) {
        for (std::uint16_t c = 0; c < channels; ++c) {
            if (is_float) {
                float v;
                std::memcpy(&v, p, 4);
                sig.samples(c, static_cast<Eigen::Index>(n)) = v;
                p += 4;
            } else {
                const auto q = static_cast<std::int16_t>(get_u16(p));
                sig.samples(c, static_cast<Eigen::Index>(n)) = q / 32767.0;
                p += 2;
            }
        }
    }
    return sig;
}

} // namespace beamlab
