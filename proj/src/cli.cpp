#include "rism/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <span>

#include "CLI11.hpp"
#include "json.hpp"
#include "rism/cfar.hpp"
#include "rism/eval.hpp"
#include "rism/grids.hpp"
#include "rism/inference.hpp"
#include "rism/io.hpp"
#include "rism/nn.hpp"
#include "rism/parallel.hpp"
#include "rism/simulator.hpp"
#include "rism/train.hpp"
#include "rism/types.hpp"
#include "rism/vloss.hpp"

namespace rism::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, const char* spec = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

grids::PolarCartMap map_for(const sim::SimConfig& c) {
  return grids::build_polar_cart_map(c.num_azimuths, c.num_range_bins, c.range_resolution, c.height, c.width,
                                     c.cell_size);
}

nn::NetworkConfig network_config_for(const sim::SimConfig& c, int stages, int kernel) {
  nn::NetworkConfig cfg;
  cfg.num_stages = stages;
  cfg.kernel_size = kernel;
  cfg.encoder_channels.assign(static_cast<std::size_t>(stages), 0);
  cfg.decoder_channels.assign(static_cast<std::size_t>(stages), 0);
  for (int s = 0; s < stages; ++s) {
    cfg.encoder_channels[static_cast<std::size_t>(s)] = 16 << std::min(s, 2);
  }
  for (int s = 0; s < stages; ++s) {
    const int mirrored = cfg.encoder_channels[static_cast<std::size_t>(std::max(stages - 2 - s, 0))];
    cfg.decoder_channels[static_cast<std::size_t>(s)] = mirrored;
  }
  cfg.num_azimuths = c.num_azimuths;
  cfg.num_range_bins = c.num_range_bins;
  cfg.range_resolution = c.range_resolution;
  cfg.height = c.height;
  cfg.width = c.width;
  cfg.cell_size = c.cell_size;
  return cfg;
}

// ---- tuned baseline configs on disk -------------------------------------

std::string tuned_to_json(const std::vector<cfar::TuneResult>& tuned) {
  nlohmann::json j;
  for (const auto& t : tuned) {
    nlohmann::json e;
    e["mean_iou"] = t.mean_iou;
    if (t.method == cfar::Method::kStaticThreshold) {
      e["tau"] = t.tau;
    } else {
      e["train"] = t.config.num_train_cells;
      e["guard"] = t.config.num_guard_cells;
      e["pfa"] = t.config.prob_false_alarm;
    }
    j[cfar::method_name(t.method)] = e;
  }
  return j.dump(2) + "\n";
}

std::vector<cfar::TuneResult> tuned_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tuned config parse error: ") + e.what());
  }
  std::vector<cfar::TuneResult> out;
  for (const cfar::Method m :
       {cfar::Method::kCfar1dPolar, cfar::Method::kCfar2dCartesian, cfar::Method::kStaticThreshold}) {
    const char* name = cfar::method_name(m);
    if (!j.contains(name)) continue;
    const auto& e = j.at(name);
    cfar::TuneResult t;
    t.method = m;
    t.mean_iou = e.at("mean_iou").get<double>();
    if (m == cfar::Method::kStaticThreshold) {
      t.tau = e.at("tau").get<float>();
    } else {
      t.config.num_train_cells = e.at("train").get<int>();
      t.config.num_guard_cells = e.at("guard").get<int>();
      t.config.prob_false_alarm = e.at("pfa").get<float>();
    }
    out.push_back(t);
  }
  return out;
}

void write_label_pgm(const std::string& path, const LabelSet& labels) {
  std::string blob = "P5\n" + std::to_string(labels.width) + " " + std::to_string(labels.height) + "\n255\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    unsigned char shade = 85;  // unobserved
    if (labels.observability[i] == kObserved) shade = labels.occupancy[i] ? 255 : 0;
    if (labels.observability[i] == kPartiallyObserved) shade = 170;
    blob.push_back(static_cast<char>(shade));
  }
  io::atomic_write(path, blob);
}

// ---- commands -------------------------------------------------------------

struct SimulateArgs {
  int n = 10;
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
  sim::SimConfig config;
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.n < 1) throw std::invalid_argument("--n must be >= 1");
  sim::SimConfig config = a.config;
  config.normalize();
  config.validate();
  if (fs::exists(a.out) && !fs::is_empty(a.out) && !a.force) {
    throw DataError("output directory exists and is not empty (use --force): " + a.out);
  }
  fs::create_directories(a.out);

  io::DatasetInfo info;
  info.config = config;
  info.master_seed = a.seed;
  info.count = a.n;
  info.is_test.assign(static_cast<std::size_t>(a.n), 0);
  info.dir = a.out;

  double occupied_fraction = 0.0;
  sim::make_dataset(config, a.n, a.seed, [&](int index, const sim::Sample& sample, bool is_test) {
    io::write_sample(a.out, index, sample);
    info.is_test[static_cast<std::size_t>(index)] = is_test ? 1 : 0;
    std::int64_t occ = 0;
    for (std::uint8_t o : sample.world.occupancy_truth) occ += o;
    occupied_fraction += static_cast<double>(occ) / static_cast<double>(sample.world.occupancy_truth.size());
  });
  io::write_manifest(info);

  std::cout << "wrote " << a.n << " samples (" << info.num_train() << " train, " << info.num_test() << " test) to "
            << a.out << "\n";
  std::cout << "mean occupied fraction " << fmt(occupied_fraction / a.n, "%.4f") << "\n";
  return 0;
}

struct TuneArgs {
  std::string data;
  std::string out = "tuned.json";
  std::string methods = "cfar1d,cfar2d,static";
};

int cmd_tune_cfar(const TuneArgs& a) {
  const io::DatasetInfo info = io::read_manifest(a.data);
  const std::vector<sim::Sample> train_samples = io::load_split(info, false);
  if (train_samples.empty()) throw DataError("dataset has no training samples");
  const grids::PolarCartMap map = map_for(info.config);

  std::vector<cfar::TuneResult> tuned;
  const auto grid = cfar::default_cfar_grid();
  const auto taus = cfar::default_tau_grid(train_samples, map);
  for (const auto& name : {"cfar1d", "cfar2d", "static"}) {
    if (a.methods.find(name) == std::string::npos) continue;
    cfar::Method m = cfar::Method::kCfar1dPolar;
    if (std::string(name) == "cfar2d") m = cfar::Method::kCfar2dCartesian;
    if (std::string(name) == "static") m = cfar::Method::kStaticThreshold;
    cfar::TuneResult t = cfar::tune(m, train_samples, map, grid, taus);
    std::cout << name << ": " << t.digest() << "  train mean IoU " << fmt(t.mean_iou, "%.4f") << "\n";
    tuned.push_back(t);
  }
  io::atomic_write(a.out, tuned_to_json(tuned));
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out = "run";
  std::string resume;
  int epochs = 30;
  int batch = 8;
  float lr = 1e-3f;
  float omega = 1.0f;
  float alpha = 0.5f;
  float prior_gamma = 1.0f;
  int samples_l = 25;
  std::uint64_t seed = 1;
  bool no_augment = false;
  int stages = 3;
  int kernel = 4;
};

int cmd_train(const TrainArgs& a) {
  const io::DatasetInfo info = io::read_manifest(a.data);
  const std::vector<sim::Sample> train_samples = io::load_split(info, false);
  if (train_samples.empty()) throw DataError("dataset has no training samples");
  fs::create_directories(a.out);

  std::optional<nn::Network<float>> net;
  if (!a.resume.empty()) {
    net.emplace(nn::load_weights(a.resume));
  } else {
    net.emplace(network_config_for(info.config, a.stages, a.kernel), a.seed);
  }

  train::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.loss.omega = a.omega;
  cfg.loss.alpha = a.alpha;
  cfg.loss.prior_gamma = a.prior_gamma;
  cfg.loss.num_samples = a.samples_l;
  cfg.seed = a.seed;
  cfg.augment_rotations = !a.no_augment;

  {
    nlohmann::json j;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["omega"] = cfg.loss.omega;
    j["alpha"] = cfg.loss.alpha;
    j["prior_gamma"] = cfg.loss.prior_gamma;
    j["samples_l"] = cfg.loss.num_samples;
    j["seed"] = cfg.seed;
    j["augment"] = cfg.augment_rotations;
    j["resume"] = a.resume;
    j["network"] = nlohmann::json::parse(net->config().to_json());
    io::atomic_write((fs::path(a.out) / "train_config.json").string(), j.dump(2) + "\n");
  }

  std::string csv = "epoch,total,likelihood,kl\n";
  train::TrainResult result;
  try {
    result = train::train(*net, train_samples, cfg, [&](const train::EpochLog& log) {
      csv += std::to_string(log.epoch) + "," + fmt(log.total) + "," + fmt(log.likelihood) + "," + fmt(log.kl) + "\n";
      std::cout << "epoch " << log.epoch << "  loss " << fmt(log.total, "%.6f") << "  (like " << fmt(log.likelihood, "%.6f")
                << ", kl " << fmt(log.kl, "%.6f") << ")\n";
    });
  } catch (const NumericError&) {
    io::atomic_write((fs::path(a.out) / "train_log.csv").string(), csv);  // diagnostics so far
    throw;
  }
  io::atomic_write((fs::path(a.out) / "train_log.csv").string(), csv);

  nn::save_weights(*net, (fs::path(a.out) / "weights_final.rism").string());
  net->set_parameter_values(result.best_parameters);
  nn::save_weights(*net, (fs::path(a.out) / "weights_best.rism").string());
  std::cout << "best epoch " << result.best_epoch << " loss " << fmt(result.best_loss, "%.6f") << "; weights in "
            << a.out << "\n";
  if (result.nonfinite_skips > 0) {
    std::cout << "warning: " << result.nonfinite_skips << " parameter updates skipped (non-finite gradients)\n";
  }
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string weights;
  std::string tuned;
  std::string out = "results.csv";
  std::string methods = "deep,cfar1d,cfar2d,static";
};

int cmd_eval(const EvalArgs& a) {
  const io::DatasetInfo info = io::read_manifest(a.data);
  const std::vector<sim::Sample> test_samples = io::load_split(info, true);
  if (test_samples.empty()) throw DataError("dataset has no test samples");
  const grids::PolarCartMap map = map_for(info.config);
  const auto lookup = cfar::build_nearest_polar_lookup(info.config.num_azimuths, info.config.num_range_bins,
                                                       info.config.range_resolution, info.config.height,
                                                       info.config.width, info.config.cell_size);

  std::vector<cfar::TuneResult> tuned;
  if (!a.tuned.empty()) tuned = tuned_from_json(io::read_file(a.tuned));
  std::optional<nn::Network<float>> net;
  if (!a.weights.empty()) net.emplace(nn::load_weights(a.weights));

  std::vector<eval::MethodEval> methods;
  const auto want = [&](const char* name) { return a.methods.find(name) != std::string::npos; };
  if (want("deep")) {
    if (!net) throw DataError("method 'deep' requested but no --weights given");
    methods.push_back({"deep_ism", "tau_p=0.5", [&](const sim::Sample& s) {
                         const auto out = net->predict(s.scan);
                         return infer::binarize(infer::analytic_marginal(out), 0.5f);
                       }});
  }
  for (const cfar::Method m :
       {cfar::Method::kCfar1dPolar, cfar::Method::kCfar2dCartesian, cfar::Method::kStaticThreshold}) {
    const char* name = cfar::method_name(m);
    if (!want(name)) continue;
    const auto it = std::find_if(tuned.begin(), tuned.end(), [&](const auto& t) { return t.method == m; });
    if (it == tuned.end())
      throw DataError(std::string("method '") + name + "' requested but not present in --tuned config");
    const cfar::TuneResult t = *it;
    methods.push_back(
        {name, t.digest(), [&map, &lookup, t](const sim::Sample& s) { return cfar::detect(t, s, map, lookup); }});
  }
  if (methods.empty()) throw std::invalid_argument("no methods selected");

  const std::vector<eval::IouReport> table = eval::compare_methods(test_samples, methods);

  std::string csv = "method,iou_occupied,iou_free,mean_iou\n";
  std::printf("%-12s %12s %12s %12s\n", "method", "iou_occ", "iou_free", "mean_iou");
  for (const auto& row : table) {
    csv += row.method + "," + fmt(row.iou_occupied, "%.6f") + "," + fmt(row.iou_free, "%.6f") + "," +
           fmt(row.mean_iou, "%.6f") + "\n";
    std::printf("%-12s %12.4f %12.4f %12.4f\n", row.method.c_str(), row.iou_occupied, row.iou_free, row.mean_iou);
  }
  io::atomic_write(a.out, csv);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct InferArgs {
  std::string data;
  std::string weights;
  std::string out = "inferred";
  int index = 0;
  std::vector<float> gamma_max;
  std::int64_t mc_samples = 0;
  float tau_p = 0.5f;
  std::uint64_t seed = 7;
};

int cmd_infer(const InferArgs& a) {
  const io::DatasetInfo info = io::read_manifest(a.data);
  if (a.index < 0 || a.index >= info.count)
    throw DataError("sample index " + std::to_string(a.index) + " out of range");
  nn::Network<float> net = nn::load_weights(a.weights);
  const sim::Sample sample = io::read_sample(info, a.index);
  fs::create_directories(a.out);

  const IsmOutput<float> out = net.predict(sample.scan);
  const infer::ProbabilityGrid probs = infer::analytic_marginal(out);
  const int h = out.height, w = out.width;

  char tag[32];
  std::snprintf(tag, sizeof(tag), "%05d", a.index);
  const std::string dims = std::to_string(w) + "x" + std::to_string(h);
  const auto path = [&](const std::string& stem, const std::string& ext) {
    return (fs::path(a.out) / (stem + "_" + tag + ext)).string();
  };

  io::write_pgm(path("p", ".pgm"), probs.p.data(), h, w, 0.0f, 1.0f);
  io::write_raw_f32(path("p", "_" + dims + ".f32"), probs.p.data(), probs.p.size());
  io::write_pgm(path("mu", ".pgm"), out.mu.data(), h, w, -6.0f, 6.0f);
  io::write_raw_f32(path("mu", "_" + dims + ".f32"), out.mu.data(), out.mu.size());
  io::write_pgm(path("gamma", ".pgm"), out.gamma.data(), h, w, 0.0f, 2.0f);
  io::write_raw_f32(path("gamma", "_" + dims + ".f32"), out.gamma.data(), out.gamma.size());

  for (float gmax : a.gamma_max) {
    const infer::UncertaintySegmentation seg = infer::uncertainty_segment(out, gmax, a.tau_p);
    char gtag[32];
    std::snprintf(gtag, sizeof(gtag), "seg_%05d_gmax%g", a.index, static_cast<double>(gmax));
    io::write_pgm_tristate((fs::path(a.out) / (std::string(gtag) + ".pgm")).string(),
                           reinterpret_cast<const std::uint8_t*>(seg.state.data()), h, w);
  }
  if (a.mc_samples > 0) {
    const infer::ProbabilityGrid mc = infer::mc_marginal(out, a.mc_samples, a.seed);
    io::write_pgm(path("p_mc", ".pgm"), mc.p.data(), h, w, 0.0f, 1.0f);
    io::write_raw_f32(path("p_mc", "_" + dims + ".f32"), mc.p.data(), mc.p.size());
  }
  std::cout << "wrote rasters for sample " << a.index << " to " << a.out << "\n";
  return 0;
}

struct RenderArgs {
  std::string data;
  std::string out = "rendered";
  int index = 0;
};

int cmd_render(const RenderArgs& a) {
  const io::DatasetInfo info = io::read_manifest(a.data);
  if (a.index < 0 || a.index >= info.count)
    throw DataError("sample index " + std::to_string(a.index) + " out of range");
  const sim::Sample sample = io::read_sample(info, a.index);
  fs::create_directories(a.out);

  char tag[32];
  std::snprintf(tag, sizeof(tag), "%05d", a.index);
  const auto path = [&](const std::string& stem) { return (fs::path(a.out) / (stem + "_" + tag + ".pgm")).string(); };

  io::write_pgm(path("scan_polar"), sample.scan.power.data(), sample.scan.num_azimuths, sample.scan.num_range_bins,
                0.0f, 2.0f * info.config.radar.return_gain);
  const grids::PolarCartMap map = map_for(info.config);
  const std::vector<float> cart = grids::resample_polar_to_cart(map, sample.scan.power);
  io::write_pgm(path("scan_cart"), cart.data(), map.height, map.width, 0.0f, 2.0f * info.config.radar.return_gain);
  write_label_pgm(path("labels"), sample.labels);
  std::vector<float> truth(sample.world.occupancy_truth.begin(), sample.world.occupancy_truth.end());
  io::write_pgm(path("world"), truth.data(), sample.world.height, sample.world.width, 0.0f, 1.0f);
  std::cout << "wrote rasters for sample " << a.index << " to " << a.out << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  par::set_threads_from_env();

  CLI::App app{"rism: radar inverse sensor model toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "synthesise a scan/label dataset");
  sim_cmd->add_option("--n", sim_args.n, "number of samples");
  sim_cmd->add_option("--seed", sim_args.seed, "master seed");
  sim_cmd->add_option("--out", sim_args.out, "output directory")->required();
  sim_cmd->add_flag("--force", sim_args.force, "overwrite non-empty output directory");
  sim_cmd->add_option("--theta", sim_args.config.num_azimuths, "radar azimuth count");
  sim_cmd->add_option("--range-bins", sim_args.config.num_range_bins, "radar range bins");
  sim_cmd->add_option("--range-resolution", sim_args.config.range_resolution, "metres per range bin");
  sim_cmd->add_option("--height", sim_args.config.height, "grid height");
  sim_cmd->add_option("--width", sim_args.config.width, "grid width");
  sim_cmd->add_option("--cell-size", sim_args.config.cell_size, "metres per cell");
  sim_cmd->add_option("--complexity", sim_args.config.complexity, "scene complexity knob");
  sim_cmd->add_option("--speckle-mean", sim_args.config.radar.speckle_mean_power, "speckle mean power");
  sim_cmd->add_option("--return-gain", sim_args.config.radar.return_gain, "surface return gain");
  sim_cmd->add_option("--attenuation", sim_args.config.radar.attenuation_per_hit, "per-hit attenuation");
  sim_cmd->add_option("--saturation-prob", sim_args.config.radar.saturation_prob, "per-azimuth saturation prob");
  sim_cmd->add_option("--ghost-prob", sim_args.config.radar.ghost_prob, "per-azimuth ghost prob");
  sim_cmd->add_option("--lidar-range", sim_args.config.lidar.max_range, "lidar max range");
  sim_cmd->add_option("--lidar-dropout", sim_args.config.lidar.dropout_prob, "lidar beam dropout prob");

  TuneArgs tune_args;
  CLI::App* tune_cmd = app.add_subcommand("tune-cfar", "grid-search baseline detectors on the train split");
  tune_cmd->add_option("--data", tune_args.data, "dataset directory")->required();
  tune_cmd->add_option("--out", tune_args.out, "tuned config output path");
  tune_cmd->add_option("--methods", tune_args.methods, "comma list: cfar1d,cfar2d,static");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train the deep inverse sensor model");
  train_cmd->add_option("--data", train_args.data, "dataset directory")->required();
  train_cmd->add_option("--out", train_args.out, "run output directory");
  train_cmd->add_option("--resume", train_args.resume, "resume from a weight file");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--batch", train_args.batch, "batch size");
  train_cmd->add_option("--lr", train_args.lr, "learning rate");
  train_cmd->add_option("--omega", train_args.omega, "likelihood importance");
  train_cmd->add_option("--alpha", train_args.alpha, "occupied-class weight");
  train_cmd->add_option("--prior-gamma", train_args.prior_gamma, "prior standard deviation");
  train_cmd->add_option("--samples-l", train_args.samples_l, "reparameterisation samples");
  train_cmd->add_option("--seed", train_args.seed, "training seed");
  train_cmd->add_flag("--no-augment", train_args.no_augment, "disable rotation augmentation");
  train_cmd->add_option("--stages", train_args.stages, "encoder/decoder stages");
  train_cmd->add_option("--kernel", train_args.kernel, "convolution kernel size");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "IoU comparison on the test split");
  eval_cmd->add_option("--data", eval_args.data, "dataset directory")->required();
  eval_cmd->add_option("--weights", eval_args.weights, "deep model weight file");
  eval_cmd->add_option("--tuned", eval_args.tuned, "tuned baseline config (tune-cfar output)");
  eval_cmd->add_option("--out", eval_args.out, "CSV output path");
  eval_cmd->add_option("--methods", eval_args.methods, "comma list: deep,cfar1d,cfar2d,static");

  InferArgs infer_args;
  CLI::App* infer_cmd = app.add_subcommand("infer", "write probability/uncertainty rasters for a sample");
  infer_cmd->add_option("--data", infer_args.data, "dataset directory")->required();
  infer_cmd->add_option("--weights", infer_args.weights, "weight file")->required();
  infer_cmd->add_option("--out", infer_args.out, "output directory");
  infer_cmd->add_option("--index", infer_args.index, "sample index");
  infer_cmd->add_option("--gamma-max", infer_args.gamma_max, "uncertainty segmentation thresholds")->delimiter(',');
  infer_cmd->add_option("--mc-samples", infer_args.mc_samples, "add a Monte-Carlo probability raster");
  infer_cmd->add_option("--tau", infer_args.tau_p, "occupancy probability threshold");
  infer_cmd->add_option("--seed", infer_args.seed, "Monte-Carlo seed");

  RenderArgs render_args;
  CLI::App* render_cmd = app.add_subcommand("render", "write scan/label/world rasters for a sample");
  render_cmd->add_option("--data", render_args.data, "dataset directory")->required();
  render_cmd->add_option("--out", render_args.out, "output directory");
  render_cmd->add_option("--index", render_args.index, "sample index");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim_args);
    if (tune_cmd->parsed()) return cmd_tune_cfar(tune_args);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (infer_cmd->parsed()) return cmd_infer(infer_args);
    if (render_cmd->parsed()) return cmd_render(render_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace rism::cli
