#include "rism/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace rism::io {

namespace fs = std::filesystem;

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("rename failed for " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int DatasetInfo::num_test() const {
  return static_cast<int>(std::count(is_test.begin(), is_test.end(), std::uint8_t{1}));
}
int DatasetInfo::num_train() const { return count - num_test(); }

std::vector<int> DatasetInfo::indices(bool test) const {
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    if ((is_test[static_cast<std::size_t>(i)] != 0) == test) out.push_back(i);
  }
  return out;
}

std::string manifest_to_json(const DatasetInfo& info) {
  nlohmann::json j;
  j["format"] = "rism-dataset";
  j["version"] = 1;
  j["count"] = info.count;
  j["master_seed"] = info.master_seed;
  const sim::SimConfig& c = info.config;
  j["num_azimuths"] = c.num_azimuths;
  j["num_range_bins"] = c.num_range_bins;
  j["range_resolution"] = c.range_resolution;
  j["height"] = c.height;
  j["width"] = c.width;
  j["cell_size"] = c.cell_size;
  j["complexity"] = c.complexity;
  j["center_mask_metres"] = c.center_mask_metres;
  j["radar"] = {{"speckle_mean_power", c.radar.speckle_mean_power},
                {"return_gain", c.radar.return_gain},
                {"attenuation_per_hit", c.radar.attenuation_per_hit},
                {"saturation_prob", c.radar.saturation_prob},
                {"ghost_prob", c.radar.ghost_prob},
                {"noise_floor", c.radar.noise_floor},
                {"phase_jitter_prob", c.radar.phase_jitter_prob}};
  j["lidar"] = {{"max_range", c.lidar.max_range},
                {"num_beams", c.lidar.num_beams},
                {"dropout_prob", c.lidar.dropout_prob}};
  std::string split;
  split.reserve(static_cast<std::size_t>(info.count));
  for (std::uint8_t t : info.is_test) split.push_back(t ? 't' : 'r');
  j["split"] = split;  // 'r' train, 't' test, one char per sample
  return j.dump(2) + "\n";
}

DatasetInfo manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest parse error: ") + e.what());
  }
  if (j.value("format", "") != "rism-dataset") throw DataError("not a rism dataset manifest");
  DatasetInfo info;
  info.count = j.at("count").get<int>();
  info.master_seed = j.at("master_seed").get<std::uint64_t>();
  sim::SimConfig& c = info.config;
  c.num_azimuths = j.at("num_azimuths").get<int>();
  c.num_range_bins = j.at("num_range_bins").get<int>();
  c.range_resolution = j.at("range_resolution").get<float>();
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.cell_size = j.at("cell_size").get<float>();
  c.complexity = j.at("complexity").get<int>();
  c.center_mask_metres = j.at("center_mask_metres").get<float>();
  const auto& r = j.at("radar");
  c.radar.speckle_mean_power = r.at("speckle_mean_power").get<float>();
  c.radar.return_gain = r.at("return_gain").get<float>();
  c.radar.attenuation_per_hit = r.at("attenuation_per_hit").get<float>();
  c.radar.saturation_prob = r.at("saturation_prob").get<float>();
  c.radar.ghost_prob = r.at("ghost_prob").get<float>();
  c.radar.noise_floor = r.at("noise_floor").get<float>();
  c.radar.phase_jitter_prob = r.at("phase_jitter_prob").get<float>();
  const auto& l = j.at("lidar");
  c.lidar.max_range = l.at("max_range").get<float>();
  c.lidar.num_beams = l.at("num_beams").get<int>();
  c.lidar.dropout_prob = l.at("dropout_prob").get<float>();
  const std::string split = j.at("split").get<std::string>();
  if (static_cast<int>(split.size()) != info.count) throw DataError("manifest split length mismatch");
  info.is_test.resize(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) info.is_test[i] = split[i] == 't' ? 1 : 0;
  return info;
}

void write_manifest(const DatasetInfo& info) {
  atomic_write((fs::path(info.dir) / "manifest.json").string(), manifest_to_json(info));
}

DatasetInfo read_manifest(const std::string& dir) {
  DatasetInfo info = manifest_from_json(read_file((fs::path(dir) / "manifest.json").string()));
  info.dir = dir;
  return info;
}

namespace {

void append_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void append_f32(std::string& out, float v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void append_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

struct Reader {
  std::string buf;
  std::size_t pos = 0;
  std::string name;

  void read(void* p, std::size_t n) {
    if (pos + n > buf.size()) throw DataError("truncated file: " + name);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, 4);
    return v;
  }
  float f32() {
    float v;
    read(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, 8);
    return v;
  }
};

}  // namespace

std::string sample_path(const std::string& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "sample_%05d.rsmp", index);
  return (fs::path(dir) / name).string();
}

std::string world_path(const std::string& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "world_%05d.bin", index);
  return (fs::path(dir) / name).string();
}

void write_sample(const std::string& dir, int index, const sim::Sample& sample) {
  std::string blob;
  blob.append("RSMP", 4);
  append_u32(blob, 1);
  append_u32(blob, static_cast<std::uint32_t>(sample.scan.num_azimuths));
  append_u32(blob, static_cast<std::uint32_t>(sample.scan.num_range_bins));
  append_f32(blob, sample.scan.range_resolution);
  append_u32(blob, static_cast<std::uint32_t>(sample.labels.height));
  append_u32(blob, static_cast<std::uint32_t>(sample.labels.width));
  append_f32(blob, sample.world.cell_size);
  blob.append(reinterpret_cast<const char*>(sample.scan.power.data()), sample.scan.power.size() * sizeof(float));
  blob.append(reinterpret_cast<const char*>(sample.labels.occupancy.data()), sample.labels.occupancy.size());
  blob.append(reinterpret_cast<const char*>(sample.labels.observability.data()), sample.labels.observability.size());
  atomic_write(sample_path(dir, index), blob);

  std::string wblob;
  wblob.append("RWLD", 4);
  append_u32(wblob, 1);
  append_u32(wblob, static_cast<std::uint32_t>(sample.world.height));
  append_u32(wblob, static_cast<std::uint32_t>(sample.world.width));
  append_f32(wblob, sample.world.cell_size);
  append_u64(wblob, sample.world.rng_seed);
  wblob.append(reinterpret_cast<const char*>(sample.world.occupancy_truth.data()),
               sample.world.occupancy_truth.size());
  wblob.append(reinterpret_cast<const char*>(sample.world.reflectivity.data()),
               sample.world.reflectivity.size() * sizeof(float));
  atomic_write(world_path(dir, index), wblob);
}

sim::Sample read_sample(const DatasetInfo& info, int index) {
  if (index < 0 || index >= info.count)
    throw DataError("sample index " + std::to_string(index) + " out of range (dataset has " +
                    std::to_string(info.count) + ")");
  sim::Sample sample;
  {
    Reader r{read_file(sample_path(info.dir, index)), 0, sample_path(info.dir, index)};
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, "RSMP", 4) != 0) throw DataError("bad magic in " + r.name);
    if (r.u32() != 1) throw DataError("unsupported sample version in " + r.name);
    sample.scan.num_azimuths = static_cast<int>(r.u32());
    sample.scan.num_range_bins = static_cast<int>(r.u32());
    sample.scan.range_resolution = r.f32();
    sample.labels.height = static_cast<int>(r.u32());
    sample.labels.width = static_cast<int>(r.u32());
    const float cell_size = r.f32();
    (void)cell_size;
    sample.scan.power.resize(static_cast<std::size_t>(sample.scan.num_azimuths) * sample.scan.num_range_bins);
    r.read(sample.scan.power.data(), sample.scan.power.size() * sizeof(float));
    const std::size_t cells = static_cast<std::size_t>(sample.labels.height) * sample.labels.width;
    sample.labels.occupancy.resize(cells);
    sample.labels.observability.resize(cells);
    r.read(sample.labels.occupancy.data(), cells);
    r.read(sample.labels.observability.data(), cells);
  }
  {
    Reader r{read_file(world_path(info.dir, index)), 0, world_path(info.dir, index)};
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, "RWLD", 4) != 0) throw DataError("bad magic in " + r.name);
    if (r.u32() != 1) throw DataError("unsupported world version in " + r.name);
    sample.world.height = static_cast<int>(r.u32());
    sample.world.width = static_cast<int>(r.u32());
    sample.world.cell_size = r.f32();
    sample.world.rng_seed = r.u64();
    const std::size_t cells = static_cast<std::size_t>(sample.world.height) * sample.world.width;
    sample.world.occupancy_truth.resize(cells);
    sample.world.reflectivity.resize(cells);
    r.read(sample.world.occupancy_truth.data(), cells);
    r.read(sample.world.reflectivity.data(), cells * sizeof(float));
  }
  return sample;
}

std::vector<sim::Sample> load_split(const DatasetInfo& info, bool test) {
  std::vector<sim::Sample> out;
  for (int i : info.indices(test)) out.push_back(read_sample(info, i));
  return out;
}

void write_pgm(const std::string& path, const float* values, int height, int width, float lo, float hi) {
  std::string blob = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  const float span = hi > lo ? hi - lo : 1.0f;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(height) * width; ++i) {
    const float v = std::min(std::max(values[i], lo), hi);
    blob.push_back(static_cast<char>(static_cast<unsigned char>(255.0f * (v - lo) / span + 0.5f)));
  }
  atomic_write(path, blob);
}

void write_pgm_tristate(const std::string& path, const std::uint8_t* states, int height, int width) {
  std::string blob = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(height) * width; ++i) {
    const unsigned char shade = states[i] == 1 ? 255 : (states[i] == 2 ? 128 : 0);
    blob.push_back(static_cast<char>(shade));
  }
  atomic_write(path, blob);
}

void write_raw_f32(const std::string& path, const float* values, std::size_t count) {
  std::string blob(reinterpret_cast<const char*>(values), count * sizeof(float));
  atomic_write(path, blob);
}

}  // namespace rism::io
