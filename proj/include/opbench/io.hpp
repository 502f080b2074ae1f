#pragma once

// Binary containers.
//
// OPBL v1 (datasets, little-endian):
//   "OPBL" | u32 version | u32 N
//   | u32 dims | u32 points[dims] | u32 channels      (input grid)
//   | u32 dims | u32 points[dims] | u32 channels      (output grid)
//   | N input arrays (f64) | N output arrays (f64)
//   | u32 byte length | UTF-8 metadata, one key=value per line
//
// Grid extents and boundary kinds travel in the metadata keys input_grid and
// output_grid. Files produced elsewhere without those keys are read on
// non-periodic unit-extent grids.
//
// OPBA v1 (named float64 arrays, used for checkpoints and PCA bases):
//   "OPBA" | u32 version | u32 count
//   | count x (u32 name length | name | u64 length | f64 data[length])
//   | u32 byte length | metadata

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opbench/field.hpp"

namespace opbench {

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kArchiveVersion = 1;

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

std::string encode_metadata(const Metadata& meta);
Metadata decode_metadata(const std::string& text);

/// A single field stored as a one-sample OPBL dataset whose input and output
/// are both the field; the role key names what it holds.
void write_field(const Field& f, const std::string& role, const std::filesystem::path& path);
Field read_field(const std::filesystem::path& path);

struct NamedArray {
    std::string name;
    std::vector<double> data;
};

struct Archive {
    std::vector<NamedArray> arrays;
    Metadata meta;

    void add(std::string name, std::vector<double> data);
    /// Throws FormatError(Malformed) if absent.
    const std::vector<double>& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    const std::string& meta_at(const std::string& key) const;
};

void write_archive(const Archive& a, const std::filesystem::path& path);
Archive read_archive(const std::filesystem::path& path);

}  // namespace opbench
