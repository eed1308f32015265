#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace beamlab {

// Fixed-width formatting keeps text outputs byte-stable across identical runs.
std::string fmt_fixed(double v, int precision);
std::string fmt_sci(double v, int precision);

// Writes to <path>.tmp and renames on commit, so partial results never land
// at the final path. Destruction without commit() discards the temp file.
class AtomicFile {
  public:
    explicit AtomicFile(const std::filesystem::path& path);
    ~AtomicFile();
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;

    std::ofstream& stream() { return out_; }
    void write_line(const std::string& line);
    void commit();

  private:
    std::filesystem::path final_path_;
    std::filesystem::path tmp_path_;
    std::ofstream out_;
    bool committed_ = false;
};

// Minimal CSV reading for the formats this tool itself emits: comma split,
// no quoting or escapes.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

} // namespace beamlab
