#include "rism/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rism/io.hpp"
#include "rism/kernels.hpp"
#include "rism/rng.hpp"

namespace rism::nn {

namespace {

template <typename T>
T softplus(T x) {
  if (x > T(20)) return x;
  if (x < T(-20)) return std::exp(x);
  return std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

void NetworkConfig::validate() const {
  if (num_stages < 1) throw std::invalid_argument("NetworkConfig: num_stages must be >= 1");
  if (encoder_channels.size() != static_cast<std::size_t>(num_stages) ||
      decoder_channels.size() != static_cast<std::size_t>(num_stages))
    throw std::invalid_argument("NetworkConfig: channel lists must have one entry per stage");
  if (kernel_size < 1) throw std::invalid_argument("NetworkConfig: kernel_size must be >= 1");
  const int div = 1 << num_stages;
  if (num_azimuths % div || num_range_bins % div || height % div || width % div)
    throw std::invalid_argument("NetworkConfig: spatial dims must be divisible by 2^num_stages");
  if (num_azimuths / div < 1 || num_range_bins / div < 1 || height / div < 1 || width / div < 1)
    throw std::invalid_argument("NetworkConfig: too many stages for the given dims");
  for (int c : encoder_channels) {
    if (c < 1) throw std::invalid_argument("NetworkConfig: channel widths must be positive");
  }
  for (int c : decoder_channels) {
    if (c < 1) throw std::invalid_argument("NetworkConfig: channel widths must be positive");
  }
  if (gamma_floor <= 0.0f) throw std::invalid_argument("NetworkConfig: gamma_floor must be positive");
}

std::string NetworkConfig::to_json() const {
  nlohmann::json j;
  j["num_stages"] = num_stages;
  j["encoder_channels"] = encoder_channels;
  j["decoder_channels"] = decoder_channels;
  j["kernel_size"] = kernel_size;
  j["num_azimuths"] = num_azimuths;
  j["num_range_bins"] = num_range_bins;
  j["range_resolution"] = range_resolution;
  j["height"] = height;
  j["width"] = width;
  j["cell_size"] = cell_size;
  j["gamma_floor"] = gamma_floor;
  j["leaky_slope"] = leaky_slope;
  return j.dump();
}

NetworkConfig NetworkConfig::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  NetworkConfig cfg;
  cfg.num_stages = j.at("num_stages").get<int>();
  cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  cfg.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
  cfg.kernel_size = j.at("kernel_size").get<int>();
  cfg.num_azimuths = j.at("num_azimuths").get<int>();
  cfg.num_range_bins = j.at("num_range_bins").get<int>();
  cfg.range_resolution = j.at("range_resolution").get<float>();
  cfg.height = j.at("height").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.cell_size = j.at("cell_size").get<float>();
  cfg.gamma_floor = j.at("gamma_floor").get<float>();
  cfg.leaky_slope = j.at("leaky_slope").get<float>();
  return cfg;
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
int Graph<T>::push(Node n) {
  consumed_ = false;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  check_finite(id);
  return id;
}

template <typename T>
void Graph<T>::check_finite(int id) const {
#ifndef NDEBUG
  for (const T& x : nodes_[static_cast<std::size_t>(id)].out.val) {
    if (!std::isfinite(static_cast<double>(x))) throw NumericError("Graph: non-finite value produced by node");
  }
#else
  (void)id;
#endif
}

template <typename T>
int Graph<T>::input(Tensor<T> x) {
  Node n;
  n.out = std::move(x);
  n.needs_grad = false;
  return push(std::move(n));
}

template <typename T>
int Graph<T>::param(Tensor<T>* p) {
  Node n;
  n.out.shape = p->shape;
  n.out.val = p->val;
  n.external = p;
  n.needs_grad = true;
  n.back = [](Graph&, Node& self) {
    self.external->ensure_grad();
    const std::size_t sz = self.out.grad.size();
    for (std::size_t i = 0; i < sz; ++i) self.external->grad[i] += self.out.grad[i];
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::conv2d(int x, int w, int b) {
  const Tensor<T>& xt = value(x);
  const Tensor<T>& wt = value(w);
  const Tensor<T>& bt = value(b);
  const int batch = xt.batch(), cin = xt.channels(), h = xt.rows(), wd = xt.cols();
  const int cout = wt.shape[0], kh = wt.shape[2], kw = wt.shape[3];
  if (wt.shape[1] != cin) throw std::invalid_argument("conv2d: channel mismatch");
  if (bt.size() != cout) throw std::invalid_argument("conv2d: bias size mismatch");
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const std::int64_t plane = static_cast<std::int64_t>(h) * wd;
  const std::int64_t kdim = static_cast<std::int64_t>(cin) * kh * kw;

  Node n;
  n.out = Tensor<T>(batch, cout, h, wd);
  n.needs_grad = true;
  scratch_a_.resize(static_cast<std::size_t>(kdim * plane));
  for (int bi = 0; bi < batch; ++bi) {
    const T* xb = xt.val.data() + static_cast<std::size_t>(bi) * cin * plane;
    T* yb = n.out.val.data() + static_cast<std::size_t>(bi) * cout * plane;
    kernels::im2col(xb, cin, h, wd, kh, kw, ph, pw, scratch_a_.data());
    kernels::gemm(wt.val.data(), scratch_a_.data(), yb, cout, static_cast<int>(kdim), static_cast<int>(plane));
    for (int co = 0; co < cout; ++co) {
      const T bias = bt.val[static_cast<std::size_t>(co)];
      T* row = yb + static_cast<std::size_t>(co) * plane;
#pragma omp simd
      for (std::int64_t i = 0; i < plane; ++i) row[i] += bias;
    }
  }

  n.back = [x, w, b, cin, h, wd, cout, kh, kw, ph, pw, plane, kdim](Graph& g, Node& self) {
    Node& xn = g.node(x);
    Node& wn = g.node(w);
    Node& bn = g.node(b);
    const int batch_n = self.out.batch();
    const T* dy = self.out.grad.data();

    if (wn.needs_grad || xn.needs_grad) {
      g.scratch_a_.resize(static_cast<std::size_t>(kdim * plane));
    }
    if (wn.needs_grad) wn.out.ensure_grad();
    if (bn.needs_grad) bn.out.ensure_grad();
    if (xn.needs_grad) xn.out.ensure_grad();

    std::vector<T> wt_t;
    if (xn.needs_grad) {  // W^T (kdim x cout)
      wt_t.resize(static_cast<std::size_t>(kdim) * cout);
      for (int co = 0; co < cout; ++co) {
        for (std::int64_t kk = 0; kk < kdim; ++kk) {
          wt_t[static_cast<std::size_t>(kk) * cout + co] = wn.out.val[static_cast<std::size_t>(co) * kdim + kk];
        }
      }
      g.scratch_b_.resize(static_cast<std::size_t>(kdim * plane));
    }

    for (int bi = 0; bi < batch_n; ++bi) {
      const T* dyb = dy + static_cast<std::size_t>(bi) * cout * plane;
      if (wn.needs_grad || xn.needs_grad) {
        const T* xb = xn.out.val.data() + static_cast<std::size_t>(bi) * cin * plane;
        kernels::im2col(xb, cin, h, wd, kh, kw, ph, pw, g.scratch_a_.data());
      }
      if (wn.needs_grad) {
        kernels::gemm_nt_acc(dyb, g.scratch_a_.data(), wn.out.grad.data(), cout, static_cast<int>(plane),
                             static_cast<int>(kdim));
      }
      if (bn.needs_grad) {
        for (int co = 0; co < cout; ++co) {
          const T* row = dyb + static_cast<std::size_t>(co) * plane;
          T s = T(0);
#pragma omp simd reduction(+ : s)
          for (std::int64_t i = 0; i < plane; ++i) s += row[i];
          bn.out.grad[static_cast<std::size_t>(co)] += s;
        }
      }
      if (xn.needs_grad) {
        kernels::gemm(wt_t.data(), dyb, g.scratch_b_.data(), static_cast<int>(kdim), cout, static_cast<int>(plane));
        T* dxb = xn.out.grad.data() + static_cast<std::size_t>(bi) * cin * plane;
        kernels::col2im_acc(g.scratch_b_.data(), cin, h, wd, kh, kw, ph, pw, dxb);
      }
    }
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::leaky_relu(int x, T slope) {
  const Tensor<T>& xt = value(x);
  Node n;
  n.out.shape = xt.shape;
  n.out.val.resize(xt.val.size());
  const std::int64_t sz = xt.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < sz; ++i) {
    const T v = xt.val[static_cast<std::size_t>(i)];
    n.out.val[static_cast<std::size_t>(i)] = v > T(0) ? v : slope * v;
  }
  n.needs_grad = true;
  n.back = [x, slope](Graph& g, Node& self) {
    Node& xn = g.node(x);
    if (!xn.needs_grad) return;
    xn.out.ensure_grad();
    const std::int64_t sz_b = self.out.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < sz_b; ++i) {
      const T v = xn.out.val[static_cast<std::size_t>(i)];
      xn.out.grad[static_cast<std::size_t>(i)] += self.out.grad[static_cast<std::size_t>(i)] * (v > T(0) ? T(1) : slope);
    }
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::maxpool2(int x) {
  const Tensor<T>& xt = value(x);
  const int batch = xt.batch(), ch = xt.channels(), h = xt.rows(), w = xt.cols();
  if (h % 2 || w % 2) throw std::invalid_argument("maxpool2: odd spatial dims");
  Node n;
  n.out = Tensor<T>(batch, ch, h / 2, w / 2);
  n.aux.resize(static_cast<std::size_t>(n.out.size()));
  const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t out_plane = in_plane / 4;
  for (int p = 0; p < batch * ch; ++p) {
    kernels::maxpool2(xt.val.data() + static_cast<std::size_t>(p) * in_plane, h, w,
                      n.out.val.data() + static_cast<std::size_t>(p) * out_plane,
                      n.aux.data() + static_cast<std::size_t>(p) * out_plane);
  }
  n.needs_grad = true;
  n.back = [x, h, w, in_plane, out_plane](Graph& g, Node& self) {
    Node& xn = g.node(x);
    if (!xn.needs_grad) return;
    xn.out.ensure_grad();
    const int planes = self.out.batch() * self.out.channels();
    for (int p = 0; p < planes; ++p) {
      kernels::maxpool2_backward_acc(self.out.grad.data() + static_cast<std::size_t>(p) * out_plane,
                                     self.aux.data() + static_cast<std::size_t>(p) * out_plane, h, w,
                                     xn.out.grad.data() + static_cast<std::size_t>(p) * in_plane);
    }
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::upsample2(int x) {
  const Tensor<T>& xt = value(x);
  const int batch = xt.batch(), ch = xt.channels(), h = xt.rows(), w = xt.cols();
  Node n;
  n.out = Tensor<T>(batch, ch, h * 2, w * 2);
  const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
  for (int p = 0; p < batch * ch; ++p) {
    kernels::upsample2_nearest(xt.val.data() + static_cast<std::size_t>(p) * in_plane, h, w,
                               n.out.val.data() + static_cast<std::size_t>(p) * in_plane * 4);
  }
  n.needs_grad = true;
  n.back = [x, h, w, in_plane](Graph& g, Node& self) {
    Node& xn = g.node(x);
    if (!xn.needs_grad) return;
    xn.out.ensure_grad();
    const int planes = self.out.batch() * self.out.channels();
    for (int p = 0; p < planes; ++p) {
      kernels::upsample2_backward_acc(self.out.grad.data() + static_cast<std::size_t>(p) * in_plane * 4, h, w,
                                      xn.out.grad.data() + static_cast<std::size_t>(p) * in_plane);
    }
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::concat(int a, int b) {
  const Tensor<T>& at = value(a);
  const Tensor<T>& bt = value(b);
  if (at.batch() != bt.batch() || at.rows() != bt.rows() || at.cols() != bt.cols())
    throw std::invalid_argument("concat: spatial/batch mismatch");
  const int batch = at.batch(), ca = at.channels(), cb = bt.channels();
  const std::int64_t plane = static_cast<std::int64_t>(at.rows()) * at.cols();
  Node n;
  n.out = Tensor<T>(batch, ca + cb, at.rows(), at.cols());
  for (int bi = 0; bi < batch; ++bi) {
    std::copy_n(at.val.data() + static_cast<std::size_t>(bi) * ca * plane, ca * plane,
                n.out.val.data() + static_cast<std::size_t>(bi) * (ca + cb) * plane);
    std::copy_n(bt.val.data() + static_cast<std::size_t>(bi) * cb * plane, cb * plane,
                n.out.val.data() + static_cast<std::size_t>(bi) * (ca + cb) * plane + ca * plane);
  }
  n.needs_grad = true;
  n.back = [a, b, ca, cb, plane](Graph& g, Node& self) {
    Node& an = g.node(a);
    Node& bn = g.node(b);
    const int batch_n = self.out.batch();
    for (int bi = 0; bi < batch_n; ++bi) {
      const T* src = self.out.grad.data() + static_cast<std::size_t>(bi) * (ca + cb) * plane;
      if (an.needs_grad) {
        an.out.ensure_grad();
        T* dst = an.out.grad.data() + static_cast<std::size_t>(bi) * ca * plane;
        for (std::int64_t i = 0; i < ca * plane; ++i) dst[i] += src[i];
      }
      if (bn.needs_grad) {
        bn.out.ensure_grad();
        T* dst = bn.out.grad.data() + static_cast<std::size_t>(bi) * cb * plane;
        for (std::int64_t i = 0; i < cb * plane; ++i) dst[i] += src[ca * plane + i];
      }
    }
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::polar_to_cart(int x, const grids::PolarCartMap* map) {
  const Tensor<T>& xt = value(x);
  if (xt.rows() != map->num_azimuths || xt.cols() != map->num_range_bins)
    throw std::invalid_argument("polar_to_cart: input does not match map");
  const int batch = xt.batch(), ch = xt.channels();
  const std::int64_t in_plane = static_cast<std::int64_t>(map->num_azimuths) * map->num_range_bins;
  const std::int64_t out_plane = map->num_cells();
  Node n;
  n.out = Tensor<T>(batch, ch, map->height, map->width);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < batch * ch; ++p) {
    // serial within a plane; planes are independent
    const T* src = xt.val.data() + static_cast<std::size_t>(p) * in_plane;
    T* dst = n.out.val.data() + static_cast<std::size_t>(p) * out_plane;
    for (std::int64_t c = 0; c < out_plane; ++c) {
      if (!map->in_range[static_cast<std::size_t>(c)]) {
        dst[c] = T(0);
        continue;
      }
      const std::uint32_t* s = &map->src[static_cast<std::size_t>(c) * 4];
      const float* w = &map->weight[static_cast<std::size_t>(c) * 4];
      dst[c] = static_cast<T>(w[0]) * src[s[0]] + static_cast<T>(w[1]) * src[s[1]] + static_cast<T>(w[2]) * src[s[2]] +
               static_cast<T>(w[3]) * src[s[3]];
    }
  }
  n.needs_grad = true;
  n.back = [x, map, in_plane, out_plane](Graph& g, Node& self) {
    Node& xn = g.node(x);
    if (!xn.needs_grad) return;
    xn.out.ensure_grad();
    const int planes = self.out.batch() * self.out.channels();
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
      grids::resample_backward_acc(*map, self.out.grad.data() + static_cast<std::size_t>(p) * out_plane,
                                   xn.out.grad.data() + static_cast<std::size_t>(p) * in_plane);
    }
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::softplus_shift(int x, T shift) {
  const Tensor<T>& xt = value(x);
  Node n;
  n.out.shape = xt.shape;
  n.out.val.resize(xt.val.size());
  const std::int64_t sz = xt.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < sz; ++i) {
    n.out.val[static_cast<std::size_t>(i)] = softplus(xt.val[static_cast<std::size_t>(i)]) + shift;
  }
  n.needs_grad = true;
  n.back = [x](Graph& g, Node& self) {
    Node& xn = g.node(x);
    if (!xn.needs_grad) return;
    xn.out.ensure_grad();
    const std::int64_t sz_b = self.out.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < sz_b; ++i) {
      xn.out.grad[static_cast<std::size_t>(i)] +=
          self.out.grad[static_cast<std::size_t>(i)] * sigmoid(xn.out.val[static_cast<std::size_t>(i)]);
    }
  };
  return push(std::move(n));
}

template <typename T>
int Graph<T>::slice_channel(int x, int channel) {
  const Tensor<T>& xt = value(x);
  if (channel < 0 || channel >= xt.channels()) throw std::invalid_argument("slice_channel: channel out of range");
  const int batch = xt.batch(), ch = xt.channels();
  const std::int64_t plane = static_cast<std::int64_t>(xt.rows()) * xt.cols();
  Node n;
  n.out = Tensor<T>(batch, 1, xt.rows(), xt.cols());
  for (int bi = 0; bi < batch; ++bi) {
    std::copy_n(xt.val.data() + (static_cast<std::size_t>(bi) * ch + channel) * plane, plane,
                n.out.val.data() + static_cast<std::size_t>(bi) * plane);
  }
  n.needs_grad = true;
  n.back = [x, channel, ch, plane](Graph& g, Node& self) {
    Node& xn = g.node(x);
    if (!xn.needs_grad) return;
    xn.out.ensure_grad();
    const int batch_n = self.out.batch();
    for (int bi = 0; bi < batch_n; ++bi) {
      const T* src = self.out.grad.data() + static_cast<std::size_t>(bi) * plane;
      T* dst = xn.out.grad.data() + (static_cast<std::size_t>(bi) * ch + channel) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  };
  return push(std::move(n));
}

template <typename T>
void Graph<T>::backward(const std::vector<std::pair<int, const std::vector<T>*>>& seeds) {
  if (nodes_.empty() || consumed_)
    throw ContractViolation("Graph::backward requires a recorded forward pass");
  for (auto& n : nodes_) n.out.ensure_grad();
  for (const auto& [id, grad] : seeds) {
    Node& n = node(id);
    if (static_cast<std::int64_t>(grad->size()) != n.out.size())
      throw std::invalid_argument("Graph::backward: seed gradient shape mismatch");
    for (std::size_t i = 0; i < grad->size(); ++i) n.out.grad[i] += (*grad)[i];
  }
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back) n.back(*this, n);
    // free as we go; earlier nodes never read later activations
    n.out.grad.clear();
    n.out.grad.shrink_to_fit();
  }
  consumed_ = true;
  nodes_.clear();
  scratch_a_.clear();
  scratch_b_.clear();
}

// ---------------------------------------------------------------------------
// Network

template <typename T>
Network<T>::Network(NetworkConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int stages = cfg_.num_stages;
  const int k = cfg_.kernel_size;

  CounterRng rng = CounterRng::stream(init_seed, 0x6e657477);
  const auto he_init = [&](Tensor<T>& w, int fan_in) {
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (T& x : w.val) x = static_cast<T>(rng.normal() * std_dev);
  };
  const auto make_conv = [&](int cin, int cout, int kernel, bool zero) {
    Conv conv;
    conv.w = Tensor<T>(cout, cin, kernel, kernel);
    conv.b = Tensor<T>(1, cout, 1, 1);
    if (!zero) he_init(conv.w, cin * kernel * kernel);
    return conv;
  };

  int cin = 1;
  for (int s = 0; s < stages; ++s) {
    const int cout = cfg_.encoder_channels[static_cast<std::size_t>(s)];
    encoder_.push_back(make_conv(cin, cout, k, false));
    encoder_.push_back(make_conv(cout, cout, k, false));
    cin = cout;
  }
  int dec_in = cfg_.encoder_channels.back();
  for (int s = 0; s < stages; ++s) {
    const int skip_ch = cfg_.encoder_channels[static_cast<std::size_t>(stages - 1 - s)];
    const int cout = cfg_.decoder_channels[static_cast<std::size_t>(s)];
    decoder_.push_back(make_conv(dec_in + skip_ch, cout, k, false));
    decoder_.push_back(make_conv(cout, cout, k, false));
    dec_in = cout;
  }
  // zero head: training starts at mu = 0, i.e. maximum-entropy output
  head_ = make_conv(dec_in, 2, 1, true);

  // one fixed resampling map per skip, plus one for the bottleneck; stage s
  // features live at 1/2^s of both the polar and the Cartesian resolution
  for (int s = 0; s < stages; ++s) {
    const int down = 1 << s;
    skip_maps_.push_back(grids::build_polar_cart_map(cfg_.num_azimuths / down, cfg_.num_range_bins / down,
                                                     cfg_.range_resolution * down, cfg_.height / down,
                                                     cfg_.width / down, cfg_.cell_size * down));
  }
  const int down = 1 << stages;
  bottleneck_map_ = grids::build_polar_cart_map(cfg_.num_azimuths / down, cfg_.num_range_bins / down,
                                                cfg_.range_resolution * down, cfg_.height / down, cfg_.width / down,
                                                cfg_.cell_size * down);
}

template <typename T>
typename Network<T>::Head Network<T>::forward(Graph<T>& g, Tensor<T> input) {
  if (input.channels() != 1 || input.rows() != cfg_.num_azimuths || input.cols() != cfg_.num_range_bins)
    throw std::invalid_argument("Network::forward: input shape does not match config");
  const int stages = cfg_.num_stages;
  const T slope = static_cast<T>(cfg_.leaky_slope);

  int x = g.input(std::move(input));
  std::vector<int> skips;
  for (int s = 0; s < stages; ++s) {
    Conv& c1 = encoder_[static_cast<std::size_t>(2 * s)];
    Conv& c2 = encoder_[static_cast<std::size_t>(2 * s + 1)];
    x = g.leaky_relu(g.conv2d(x, g.param(&c1.w), g.param(&c1.b)), slope);
    x = g.leaky_relu(g.conv2d(x, g.param(&c2.w), g.param(&c2.b)), slope);
    skips.push_back(x);
    x = g.maxpool2(x);
  }
  x = g.polar_to_cart(x, &bottleneck_map_);
  for (int s = 0; s < stages; ++s) {
    const int stage = stages - 1 - s;
    x = g.upsample2(x);
    const int skip = g.polar_to_cart(skips[static_cast<std::size_t>(stage)], &skip_maps_[static_cast<std::size_t>(stage)]);
    x = g.concat(x, skip);
    Conv& c1 = decoder_[static_cast<std::size_t>(2 * s)];
    Conv& c2 = decoder_[static_cast<std::size_t>(2 * s + 1)];
    x = g.leaky_relu(g.conv2d(x, g.param(&c1.w), g.param(&c1.b)), slope);
    x = g.leaky_relu(g.conv2d(x, g.param(&c2.w), g.param(&c2.b)), slope);
  }
  const int head = g.conv2d(x, g.param(&head_.w), g.param(&head_.b));
  Head out;
  out.mu = g.slice_channel(head, 0);
  out.gamma = g.softplus_shift(g.slice_channel(head, 1), static_cast<T>(cfg_.gamma_floor));
  return out;
}

template <typename T>
IsmOutput<T> Network<T>::predict(const PolarScan& scan) {
  if (scan.num_azimuths != cfg_.num_azimuths || scan.num_range_bins != cfg_.num_range_bins)
    throw std::invalid_argument("Network::predict: scan shape does not match config");
  Tensor<T> input(1, 1, scan.num_azimuths, scan.num_range_bins);
  for (std::size_t i = 0; i < scan.power.size(); ++i) input.val[i] = static_cast<T>(scan.power[i]);
  Graph<T> g;
  const Head head = forward(g, std::move(input));
  IsmOutput<T> out;
  out.height = cfg_.height;
  out.width = cfg_.width;
  out.mu = g.value(head.mu).val;
  out.gamma = g.value(head.gamma).val;
  return out;
}

template <typename T>
std::vector<Tensor<T>*> Network<T>::parameters() {
  std::vector<Tensor<T>*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Network<T>::named_parameters() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string base = "enc" + std::to_string(i / 2) + ".conv" + std::to_string(i % 2 + 1);
    out.emplace_back(base + ".w", &encoder_[i].w);
    out.emplace_back(base + ".b", &encoder_[i].b);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string base = "dec" + std::to_string(i / 2) + ".conv" + std::to_string(i % 2 + 1);
    out.emplace_back(base + ".w", &decoder_[i].w);
    out.emplace_back(base + ".b", &decoder_[i].b);
  }
  out.emplace_back("head.w", &head_.w);
  out.emplace_back("head.b", &head_.b);
  return out;
}

template <typename T>
std::vector<std::vector<T>> Network<T>::parameter_values() const {
  std::vector<std::vector<T>> out;
  // order matches named_parameters()
  for (const auto& c : encoder_) {
    out.push_back(c.w.val);
    out.push_back(c.b.val);
  }
  for (const auto& c : decoder_) {
    out.push_back(c.w.val);
    out.push_back(c.b.val);
  }
  out.push_back(head_.w.val);
  out.push_back(head_.b.val);
  return out;
}

template <typename T>
void Network<T>::set_parameter_values(const std::vector<std::vector<T>>& values) {
  const std::vector<Tensor<T>*> params = parameters();
  if (values.size() != params.size()) throw std::invalid_argument("set_parameter_values: count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].size() != params[i]->val.size())
      throw std::invalid_argument("set_parameter_values: size mismatch at tensor " + std::to_string(i));
    params[i]->val = values[i];
  }
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
int Adam<T>::step(const std::vector<Tensor<T>*>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->val.size(), T(0));
      v_[i].assign(params[i]->val.size(), T(0));
    }
  }
  ++t_;
  const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
  const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
  int skipped = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    p.ensure_grad();
    bool finite = true;
    for (const T& gr : p.grad) {
      if (!std::isfinite(static_cast<double>(gr))) {
        finite = false;
        break;
      }
    }
    if (!finite) {
      ++skipped;
      p.zero_grad();
      continue;
    }
    const std::int64_t sz = p.size();
    T* m = m_[i].data();
    T* v = v_[i].data();
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < sz; ++j) {
      const T gr = p.grad[static_cast<std::size_t>(j)];
      m[j] = beta1_ * m[j] + (T(1) - beta1_) * gr;
      v[j] = beta2_ * v[j] + (T(1) - beta2_) * gr * gr;
      const T m_hat = m[j] / bc1;
      const T v_hat = v[j] / bc2;
      p.val[static_cast<std::size_t>(j)] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
    p.zero_grad();
  }
  total_skipped_ += skipped;
  return skipped;
}

// ---------------------------------------------------------------------------
// Weight serialization

namespace {

constexpr char kWeightMagic[4] = {'R', 'I', 'S', 'M'};
constexpr std::uint32_t kWeightVersion = 1;

void append_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

void append_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void read(void* p, std::size_t n, const char* what) {
    if (pos + n > buf.size()) throw DataError(std::string("weight file truncated while reading ") + what);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    read(&v, 4, what);
    return v;
  }
};

}  // namespace

void save_weights(Network<float>& net, const std::string& path) {
  std::string blob;
  append_bytes(blob, kWeightMagic, 4);
  append_u32(blob, kWeightVersion);
  const std::string config = net.config().to_json();
  append_u32(blob, static_cast<std::uint32_t>(config.size()));
  blob += config;
  const auto named = net.named_parameters();
  append_u32(blob, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    append_u32(blob, static_cast<std::uint32_t>(name.size()));
    blob += name;
    for (int d : tensor->shape) append_u32(blob, static_cast<std::uint32_t>(d));
    append_bytes(blob, tensor->val.data(), tensor->val.size() * sizeof(float));
  }
  io::atomic_write(path, blob);
}

Network<float> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weight file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf};

  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kWeightMagic, 4) != 0) throw DataError("not a RISM weight file: " + path);
  const std::uint32_t version = r.u32("version");
  if (version != kWeightVersion)
    throw DataError("unsupported weight file version " + std::to_string(version));
  const std::uint32_t cfg_len = r.u32("config length");
  std::string cfg_text(cfg_len, '\0');
  r.read(cfg_text.data(), cfg_len, "config");

  Network<float> net(NetworkConfig::from_json(cfg_text), 0);
  auto named = net.named_parameters();
  const std::uint32_t count = r.u32("tensor count");
  if (count != named.size())
    throw DataError("weight file holds " + std::to_string(count) + " tensors, expected " +
                    std::to_string(named.size()));
  for (auto& [name, tensor] : named) {
    const std::uint32_t name_len = r.u32("tensor name length");
    std::string stored(name_len, '\0');
    r.read(stored.data(), name_len, "tensor name");
    if (stored != name) throw DataError("unexpected tensor '" + stored + "', wanted '" + name + "'");
    std::array<int, 4> shape{};
    for (int& d : shape) d = static_cast<int>(r.u32("tensor shape"));
    if (shape != tensor->shape)
      throw DataError("shape mismatch for tensor '" + name + "'");
    r.read(tensor->val.data(), tensor->val.size() * sizeof(float), name.c_str());
  }
  if (r.pos != buf.size()) throw DataError("trailing bytes in weight file: " + path);
  return net;
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Graph<float>;
template class Graph<double>;
template class Network<float>;
template class Network<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace rism::nn
