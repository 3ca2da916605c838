#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rism/grids.hpp"
#include "rism/types.hpp"

namespace rism::nn {

// Dense 4D tensor (batch, channels, rows, cols) with a gradient slot of the
// same shape. Gradients are allocated lazily on first use.
template <typename T>
struct Tensor {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<T> val;
  std::vector<T> grad;

  Tensor() = default;
  Tensor(int b, int c, int h, int w)
      : shape{b, c, h, w}, val(static_cast<std::size_t>(b) * c * h * w, T(0)) {}

  std::int64_t size() const {
    return static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2] * shape[3];
  }
  int batch() const { return shape[0]; }
  int channels() const { return shape[1]; }
  int rows() const { return shape[2]; }
  int cols() const { return shape[3]; }

  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), T(0));
  }
  void zero_grad() { grad.assign(val.size(), T(0)); }
};

struct NetworkConfig {
  int num_stages = 3;
  std::vector<int> encoder_channels{16, 32, 64};
  std::vector<int> decoder_channels{32, 16, 16};
  int kernel_size = 4;
  int num_azimuths = 64;
  int num_range_bins = 128;
  float range_resolution = 0.25f;
  int height = 128;
  int width = 128;
  float cell_size = 0.3f;
  float gamma_floor = 1e-3f;   // epsilon added after the softplus head
  float leaky_slope = 0.1f;

  void validate() const;  // throws std::invalid_argument
  std::string to_json() const;
  static NetworkConfig from_json(const std::string& text);
  bool operator==(const NetworkConfig&) const = default;
};

// Single-use computation tape. Ops append nodes during the forward pass;
// backward() propagates seeded output gradients in reverse order, then the
// graph is consumed and must be rebuilt by a fresh forward pass.
template <typename T>
class Graph {
 public:
  int input(Tensor<T> x);
  int param(Tensor<T>* p);
  int conv2d(int x, int w, int b);  // stride 1, same padding (left/top-biased)
  int leaky_relu(int x, T slope);
  int maxpool2(int x);
  int upsample2(int x);
  int concat(int a, int b);
  int polar_to_cart(int x, const grids::PolarCartMap* map);
  int softplus_shift(int x, T shift);
  int slice_channel(int x, int channel);

  const Tensor<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].out; }
  bool empty() const { return nodes_.empty(); }

  // Seeds the listed nodes' output gradients and accumulates gradients into
  // every reachable parameter tensor. Throws ContractViolation when no
  // forward pass is recorded (including a second backward call).
  void backward(const std::vector<std::pair<int, const std::vector<T>*>>& seeds);

 private:
  struct Node {
    Tensor<T> out;
    Tensor<T>* external = nullptr;
    bool needs_grad = false;
    std::vector<std::uint8_t> aux;  // op-specific (e.g. pooling argmax)
    std::function<void(Graph&, Node&)> back;
  };

  int push(Node node);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  void check_finite(int id) const;

  std::vector<Node> nodes_;
  std::vector<T> scratch_a_, scratch_b_;
  bool consumed_ = false;
};

// The inverse-sensor-model network: a polar encoder of repeated
// conv-conv-maxpool stages, a fixed bilinear polar-to-Cartesian resampler
// on the bottleneck and on every skip connection, and a Cartesian decoder
// of upsample-concat-conv-conv stages. The 1x1 head emits the per-cell
// logit mean (channel 0) and, through a softplus with a small floor, the
// standard deviation (channel 1).
template <typename T>
class Network {
 public:
  explicit Network(NetworkConfig cfg, std::uint64_t init_seed = 1);

  struct Head {
    int mu = -1;
    int gamma = -1;
  };

  // Builds the forward graph for a (B, 1, azimuths, bins) input batch.
  // Dimension mismatches throw std::invalid_argument before any node is
  // recorded.
  Head forward(Graph<T>& g, Tensor<T> input);

  // Convenience single-scan forward without retaining the graph.
  IsmOutput<T> predict(const PolarScan& scan);

  std::vector<Tensor<T>*> parameters();
  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters();
  const NetworkConfig& config() const { return cfg_; }

  std::vector<std::vector<T>> parameter_values() const;
  void set_parameter_values(const std::vector<std::vector<T>>& values);

 private:
  struct Conv {
    Tensor<T> w, b;
  };

  NetworkConfig cfg_;
  std::vector<Conv> encoder_;       // two per stage
  std::vector<Conv> decoder_;       // two per stage
  Conv head_;
  std::vector<grids::PolarCartMap> skip_maps_;  // one per stage
  grids::PolarCartMap bottleneck_map_;
};

// Bias-corrected ADAM. Parameter tensors whose gradient contains a
// non-finite value are skipped for the step and counted.
template <typename T>
class Adam {
 public:
  Adam(T lr = T(0.001), T beta1 = T(0.9), T beta2 = T(0.999), T epsilon = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  // Applies one update from the accumulated gradients and clears them.
  // Returns the number of tensors skipped because of non-finite gradients.
  int step(const std::vector<Tensor<T>*>& params);

  int steps_taken() const { return t_; }
  int total_skipped() const { return total_skipped_; }

 private:
  T lr_, beta1_, beta2_, epsilon_;
  int t_ = 0;
  int total_skipped_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

// Weight file: magic "RISM", u32 version, length-prefixed config text, then
// per tensor: name length + name + 4 dims + little-endian f32 payload.
// Round-trips bit-exactly. Loading validates the format version and every
// tensor shape; mismatches throw DataError naming the offending tensor.
void save_weights(Network<float>& net, const std::string& path);
Network<float> load_weights(const std::string& path);

extern template struct Tensor<float>;
extern template struct Tensor<double>;
extern template class Graph<float>;
extern template class Graph<double>;
extern template class Network<float>;
extern template class Network<double>;
extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace rism::nn
