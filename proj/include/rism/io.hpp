#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rism/simulator.hpp"
#include "rism/types.hpp"

namespace rism::io {

// Writes to a temporary sibling and renames into place.
void atomic_write(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);  // throws DataError

// A dataset directory: manifest.json plus one RSMP sample file and one
// world sidecar per sample.
struct DatasetInfo {
  sim::SimConfig config;
  std::uint64_t master_seed = 0;
  int count = 0;
  std::vector<std::uint8_t> is_test;
  std::string dir;

  int num_train() const;
  int num_test() const;
  std::vector<int> indices(bool test) const;
};

std::string manifest_to_json(const DatasetInfo& info);
DatasetInfo manifest_from_json(const std::string& text);

void write_manifest(const DatasetInfo& info);
DatasetInfo read_manifest(const std::string& dir);  // throws DataError

std::string sample_path(const std::string& dir, int index);
std::string world_path(const std::string& dir, int index);

// Sample file: magic "RSMP", u32 version, scan dims, grid dims, then
// little-endian f32 polar power, u8 occupancy, u8 observability.
void write_sample(const std::string& dir, int index, const sim::Sample& sample);
sim::Sample read_sample(const DatasetInfo& info, int index);  // world sidecar included

std::vector<sim::Sample> load_split(const DatasetInfo& info, bool test);

// 8-bit binary PGM (P5). Values are clamped to [lo, hi] then scaled.
void write_pgm(const std::string& path, const float* values, int height, int width, float lo, float hi);

// Tri-state PGM: 0 -> black (free), 1 -> white (occupied), 2 -> grey.
void write_pgm_tristate(const std::string& path, const std::uint8_t* states, int height, int width);

// Raw row-major little-endian f32 raster, dimensions in the file name.
void write_raw_f32(const std::string& path, const float* values, std::size_t count);

}  // namespace rism::io
