#include "beamlab/csv.hpp"

#include <cstdio>

#include "beamlab/errors.hpp"

namespace beamlab {

std::string fmt_fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::string fmt_sci(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*e", precision, v);
    return buf;
}

AtomicFile::AtomicFile(const std::filesystem::path& path)
    : final_path_(path), tmp_path_(path.string() + ".tmp") {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_)
        throw IoError("cannot open for writing: " + tmp_path_.string());
}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_path_, ec);
    }
}

void AtomicFile::write_line(const std::string& line) {
    out_ << line << '\n';
}

void AtomicFile::commit() {
    out_.flush();
    if (!out_)
        throw IoError("write failed: " + tmp_path_.string());
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_path_, final_path_, ec);
    if (ec)
        throw IoError("cannot rename " + tmp_path_.string() + " to " + final_path_.string() +
                      ": " + ec.message());
    committed_ = true;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t pos = line.find(',', start);
            if (pos == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace beamlab
