#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fbp {

/// FNV-1a 64-bit accumulator; stable across platforms, used for config and
/// artifact checksums and for operator cache keys.
class Fnv64 {
public:
    void add_bytes(const void* data, std::size_t n);
    void add(double v);
    void add(std::uint64_t v);
    void add(const std::string& s);
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t checksum_file(const std::filesystem::path& path);
std::uint64_t checksum_string(const std::string& s);
std::string hex64(std::uint64_t v);

/// Minimal CSV writer: fixed column set, one row per call, 17 significant
/// digits so that artifacts round-trip doubles exactly.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);
    ~CsvWriter();
    void row(const std::vector<double>& values);
    void raw_row(const std::string& line);
    void close();

private:
    std::string path_;
    std::string buffer_;
    std::size_t columns_ = 0;
    bool closed_ = false;
};

std::string format_full(double v);

}  // namespace fbp
