#include "fabsim/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <optional>

#include "fabsim/digest.hpp"
#include "fabsim/errors.hpp"

namespace fabsim {

namespace {

using Json = nlohmann::ordered_json;

Json config_json(const NetConfig& c) {
  Json j;
  j["input_size"] = c.input_size;
  j["conv_channels"] = c.conv_channels;
  j["kernel"] = c.kernel;
  j["pool"] = c.pool;
  j["fc_widths"] = c.fc_widths;
  j["margin"] = c.margin;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lr_step"] = c.lr_step;
  j["lr_decay"] = c.lr_decay;
  j["epochs"] = c.epochs;
  j["triplets_per_epoch"] = c.triplets_per_epoch;
  j["depth_near"] = c.depth_near;
  j["depth_far"] = c.depth_far;
  j["seed"] = c.seed;
  return j;
}

// Spatial size after the conv/pool stack (same-padded convs keep size).
int pooled_size(const NetConfig& c) {
  int s = c.input_size;
  for (size_t i = 0; i < c.conv_channels.size(); ++i) s /= c.pool;
  return s;
}

int flat_size(const NetConfig& c) {
  const int ch = c.conv_channels.empty() ? 1 : c.conv_channels.back();
  const int s = pooled_size(c);
  return ch * s * s;
}

Eigen::MatrixXd im2col(const FeatureMap& x, int k) {
  const int pad = k / 2;
  Eigen::MatrixXd col = Eigen::MatrixXd::Zero(x.channels * k * k,
                                              static_cast<long>(x.h) * x.w);
  for (int ch = 0; ch < x.channels; ++ch)
    for (int dy = 0; dy < k; ++dy)
      for (int dx = 0; dx < k; ++dx) {
        const int row = (ch * k + dy) * k + dx;
        const int shift = dx - pad;
        const int out_x0 = std::max(0, -shift);
        const int out_x1 = std::min(x.w, x.w - shift);  // exclusive
        const int len = out_x1 - out_x0;
        if (len <= 0) continue;
        for (int y = 0; y < x.h; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= x.h) continue;
          col.block(row, y * x.w + out_x0, 1, len) =
              x.data.block(ch, sy * x.w + out_x0 + shift, 1, len);
        }
      }
  return col;
}

// Scatter-add transpose of im2col.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& dcol, int channels, int h,
                       int w, int k) {
  const int pad = k / 2;
  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(channels, static_cast<long>(h) * w);
  for (int ch = 0; ch < channels; ++ch)
    for (int dy = 0; dy < k; ++dy)
      for (int dxk = 0; dxk < k; ++dxk) {
        const int row = (ch * k + dy) * k + dxk;
        const int shift = dxk - pad;
        const int out_x0 = std::max(0, -shift);
        const int out_x1 = std::min(w, w - shift);
        const int len = out_x1 - out_x0;
        if (len <= 0) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= h) continue;
          dx.block(ch, sy * w + out_x0 + shift, 1, len) +=
              dcol.block(row, y * w + out_x0, 1, len);
        }
      }
  return dx;
}

struct ForwardCache {
  std::vector<FeatureMap> conv_x;         // input of each conv layer
  std::vector<Eigen::MatrixXd> conv_pre;  // pre-activation
  std::vector<FeatureMap> act;            // post-PReLU (pool input)
  std::vector<Eigen::MatrixXi> argmax;
  FeatureMap pooled_last;
  std::vector<Eigen::VectorXd> fc_x;
  std::vector<Eigen::VectorXd> fc_pre;
};

Eigen::VectorXd forward_cached(const NetParams& params,
                               const Eigen::MatrixXd& image,
                               ForwardCache& cache) {
  const NetConfig& c = params.config;
  if (image.rows() != c.input_size || image.cols() != c.input_size)
    throw InvalidInputError("forward: image must be " +
                            std::to_string(c.input_size) + "x" +
                            std::to_string(c.input_size));

  FeatureMap x;
  x.channels = 1;
  x.h = c.input_size;
  x.w = c.input_size;
  x.data.resize(1, static_cast<long>(x.h) * x.w);
  for (int y = 0; y < x.h; ++y)
    for (int col = 0; col < x.w; ++col) x.data(0, y * x.w + col) = image(y, col);

  for (size_t i = 0; i < params.conv.size(); ++i) {
    const ConvLayer& layer = params.conv[i];
    cache.conv_x.push_back(x);
    FeatureMap pre = conv_same(x, layer.w, layer.b, c.kernel);
    cache.conv_pre.push_back(pre.data);
    FeatureMap act = pre;
    act.data = prelu(pre.data, layer.slope);
    cache.act.push_back(act);
    Eigen::MatrixXi arg;
    x = maxpool(act, c.pool, arg);
    cache.argmax.push_back(std::move(arg));
  }
  cache.pooled_last = x;

  Eigen::VectorXd v(static_cast<long>(x.channels) * x.h * x.w);
  for (int ch = 0; ch < x.channels; ++ch)
    for (int i = 0; i < x.h * x.w; ++i)
      v[static_cast<long>(ch) * x.h * x.w + i] = x.data(ch, i);

  for (const FcLayer& layer : params.fc) {
    cache.fc_x.push_back(v);
    Eigen::VectorXd pre = linear(layer.w, layer.b, v);
    cache.fc_pre.push_back(pre);
    v = layer.has_act ? Eigen::VectorXd(prelu(pre, layer.slope)) : pre;
  }
  return v;
}

// Backpropagates d(loss)/d(output) through the cached activations,
// adding parameter gradients into `grads`.
void backward(const NetParams& params, const ForwardCache& cache,
              Eigen::VectorXd g, NetParams& grads) {
  const NetConfig& c = params.config;
  for (int j = static_cast<int>(params.fc.size()) - 1; j >= 0; --j) {
    const FcLayer& layer = params.fc[j];
    if (layer.has_act)
      g = prelu_backward(cache.fc_pre[j], layer.slope, g, grads.fc[j].slope);
    g = linear_backward(layer.w, cache.fc_x[j], g, grads.fc[j].w,
                        grads.fc[j].b);
  }

  FeatureMap gmap = cache.pooled_last;
  gmap.data.setZero();
  for (int ch = 0; ch < gmap.channels; ++ch)
    for (int i = 0; i < gmap.h * gmap.w; ++i)
      gmap.data(ch, i) = g[static_cast<long>(ch) * gmap.h * gmap.w + i];

  for (int i = static_cast<int>(params.conv.size()) - 1; i >= 0; --i) {
    const ConvLayer& layer = params.conv[i];
    FeatureMap g_act = maxpool_backward(cache.act[i], c.pool, cache.argmax[i],
                                        gmap);
    g_act.data = prelu_backward(cache.conv_pre[i], layer.slope, g_act.data,
                                grads.conv[i].slope);
    gmap = conv_same_backward(cache.conv_x[i], layer.w, c.kernel, g_act,
                              grads.conv[i].w, grads.conv[i].b);
  }
}

// All independently trained scalars of the model, in declaration order.
// Final-layer PReLU slopes do not exist (bare linear output), so they are
// not part of the span list (nor of the serialized format).
std::vector<std::pair<double*, long>> tensor_spans(NetParams& p) {
  std::vector<std::pair<double*, long>> spans;
  for (ConvLayer& l : p.conv) {
    spans.emplace_back(l.w.data(), l.w.size());
    spans.emplace_back(l.b.data(), l.b.size());
    spans.emplace_back(&l.slope, 1);
  }
  for (FcLayer& l : p.fc) {
    spans.emplace_back(l.w.data(), l.w.size());
    spans.emplace_back(l.b.data(), l.b.size());
    if (l.has_act) spans.emplace_back(&l.slope, 1);
  }
  return spans;
}

void put_f32_le(std::ofstream& os, float f) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  const char bytes[4] = {static_cast<char>(bits & 0xff),
                         static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
  os.write(bytes, 4);
}

}  // namespace

void validate(const NetConfig& c) {
  if (c.input_size < 1) throw ConfigError("net: input_size must be positive");
  if (c.kernel < 1 || c.kernel % 2 == 0)
    throw ConfigError("net: kernel must be odd and positive");
  if (c.pool < 1) throw ConfigError("net: pool must be positive");
  for (int ch : c.conv_channels)
    if (ch < 1) throw ConfigError("net: conv channels must be positive");
  if (c.fc_widths.empty() || c.fc_widths.back() != 2)
    throw ConfigError("net: fc widths must end in the 2D output");
  for (int wdt : c.fc_widths)
    if (wdt < 1) throw ConfigError("net: fc widths must be positive");
  if (!(c.margin > 0.0)) throw ConfigError("net: margin must be positive");
  if (c.batch_size < 1) throw ConfigError("net: batch size must be positive");
  if (!(c.lr > 0.0)) throw ConfigError("net: learning rate must be positive");
  if (c.lr_step < 1) throw ConfigError("net: lr step must be positive");
  if (!(c.lr_decay > 0.0)) throw ConfigError("net: lr decay must be positive");
  if (c.epochs < 1) throw ConfigError("net: epochs must be positive");
  if (!(c.depth_far > c.depth_near))
    throw ConfigError("net: depth_far must exceed depth_near");
  if (pooled_size(c) < 1)
    throw ConfigError("net: conv/pool stack exhausts the input resolution");
}

std::uint64_t net_config_digest(const NetConfig& config) {
  return fnv1a(config_json(config).dump());
}

NetParams init_params(const NetConfig& config) {
  validate(config);
  NetParams p;
  p.config = config;
  Rng rng(config.seed);
  int in_c = 1;
  for (int out_c : config.conv_channels) {
    ConvLayer l;
    const int fan_in = in_c * config.kernel * config.kernel;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    l.w.resize(out_c, fan_in);
    for (long r = 0; r < l.w.rows(); ++r)
      for (long cidx = 0; cidx < l.w.cols(); ++cidx)
        l.w(r, cidx) = rng.uniform(-bound, bound);
    l.b.resize(out_c);
    for (long r = 0; r < l.b.size(); ++r) l.b[r] = rng.uniform(-bound, bound);
    l.slope = 0.25;
    p.conv.push_back(std::move(l));
    in_c = out_c;
  }
  int in = flat_size(config);
  for (size_t j = 0; j < config.fc_widths.size(); ++j) {
    FcLayer l;
    const int out = config.fc_widths[j];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    l.w.resize(out, in);
    for (long r = 0; r < l.w.rows(); ++r)
      for (long cidx = 0; cidx < l.w.cols(); ++cidx)
        l.w(r, cidx) = rng.uniform(-bound, bound);
    l.b.resize(out);
    for (long r = 0; r < l.b.size(); ++r) l.b[r] = rng.uniform(-bound, bound);
    l.slope = 0.25;
    l.has_act = j + 1 < config.fc_widths.size();
    p.fc.push_back(std::move(l));
    in = out;
  }
  return p;
}

NetParams zeros_like(const NetParams& params) {
  NetParams z = params;
  for (ConvLayer& l : z.conv) {
    l.w.setZero();
    l.b.setZero();
    l.slope = 0.0;
  }
  for (FcLayer& l : z.fc) {
    l.w.setZero();
    l.b.setZero();
    l.slope = 0.0;
  }
  return z;
}

double psd(const PSMPoint& p, const PSMPoint& q) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return dx * dx + dy * dy;
}

double triplet_loss(const PSMPoint& anchor, const PSMPoint& positive,
                    const PSMPoint& negative, double margin) {
  const double pp = psd(positive, anchor);
  const double np = psd(negative, anchor);
  return std::max(0.0, pp - np + margin);
}

FeatureMap conv_same(const FeatureMap& x, const Eigen::MatrixXd& weights,
                     const Eigen::VectorXd& bias, int k) {
  FeatureMap out;
  out.channels = static_cast<int>(weights.rows());
  out.h = x.h;
  out.w = x.w;
  out.data = weights * im2col(x, k);
  out.data.colwise() += bias;
  return out;
}

FeatureMap conv_same_backward(const FeatureMap& x,
                              const Eigen::MatrixXd& weights, int k,
                              const FeatureMap& gout, Eigen::MatrixXd& dw,
                              Eigen::VectorXd& db) {
  const Eigen::MatrixXd col = im2col(x, k);
  dw += gout.data * col.transpose();
  db += gout.data.rowwise().sum();
  const Eigen::MatrixXd dcol = weights.transpose() * gout.data;
  FeatureMap dx;
  dx.channels = x.channels;
  dx.h = x.h;
  dx.w = x.w;
  dx.data = col2im(dcol, x.channels, x.h, x.w, k);
  return dx;
}

Eigen::MatrixXd prelu(const Eigen::MatrixXd& pre, double slope) {
  return pre.unaryExpr(
      [slope](double v) { return v > 0.0 ? v : slope * v; });
}

Eigen::MatrixXd prelu_backward(const Eigen::MatrixXd& pre, double slope,
                               const Eigen::MatrixXd& gout, double& dslope) {
  Eigen::MatrixXd dx(pre.rows(), pre.cols());
  double ds = 0.0;
  for (long j = 0; j < pre.cols(); ++j)
    for (long i = 0; i < pre.rows(); ++i) {
      const double v = pre(i, j);
      const double g = gout(i, j);
      if (v > 0.0) {
        dx(i, j) = g;
      } else {
        dx(i, j) = slope * g;
        ds += g * v;
      }
    }
  dslope += ds;
  return dx;
}

FeatureMap maxpool(const FeatureMap& x, int pool, Eigen::MatrixXi& argmax) {
  FeatureMap out;
  out.channels = x.channels;
  out.h = x.h / pool;
  out.w = x.w / pool;
  out.data.resize(out.channels, static_cast<long>(out.h) * out.w);
  argmax.resize(out.channels, static_cast<long>(out.h) * out.w);
  for (int ch = 0; ch < x.channels; ++ch)
    for (int yo = 0; yo < out.h; ++yo)
      for (int xo = 0; xo < out.w; ++xo) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = -1;
        for (int dy = 0; dy < pool; ++dy)
          for (int dx = 0; dx < pool; ++dx) {
            const int idx = (yo * pool + dy) * x.w + (xo * pool + dx);
            const double v = x.data(ch, idx);
            if (v > best) {
              best = v;
              best_idx = idx;
            }
          }
        out.data(ch, yo * out.w + xo) = best;
        argmax(ch, yo * out.w + xo) = best_idx;
      }
  return out;
}

FeatureMap maxpool_backward(const FeatureMap& x, int pool,
                            const Eigen::MatrixXi& argmax,
                            const FeatureMap& gout) {
  (void)pool;
  FeatureMap dx;
  dx.channels = x.channels;
  dx.h = x.h;
  dx.w = x.w;
  dx.data = Eigen::MatrixXd::Zero(x.channels, static_cast<long>(x.h) * x.w);
  for (int ch = 0; ch < gout.channels; ++ch)
    for (long i = 0; i < gout.data.cols(); ++i)
      dx.data(ch, argmax(ch, i)) += gout.data(ch, i);
  return dx;
}

Eigen::VectorXd linear(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& x) {
  return w * x + b;
}

Eigen::VectorXd linear_backward(const Eigen::MatrixXd& w,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& gout,
                                Eigen::MatrixXd& dw, Eigen::VectorXd& db) {
  dw += gout * x.transpose();
  db += gout;
  return w.transpose() * gout;
}

PSMPoint forward(const NetParams& params, const Eigen::MatrixXd& image) {
  ForwardCache cache;
  const Eigen::VectorXd out = forward_cached(params, image, cache);
  return PSMPoint{out[0], out[1]};
}

NetParams gradients(const NetParams& params,
                    const std::vector<ImageTriplet>& batch,
                    double* mean_loss) {
  if (batch.empty()) throw InvalidInputError("gradients: empty batch");
  NetParams grads = zeros_like(params);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  for (const ImageTriplet& t : batch) {
    ForwardCache ca, cp, cn;
    const Eigen::VectorXd a = forward_cached(params, t.anchor, ca);
    const Eigen::VectorXd p = forward_cached(params, t.positive, cp);
    const Eigen::VectorXd n = forward_cached(params, t.negative, cn);
    const double pp = (p - a).squaredNorm();
    const double np = (n - a).squaredNorm();
    const double loss = std::max(0.0, pp - np + params.config.margin);
    total += loss;
    if (loss <= 0.0) continue;
    backward(params, ca, inv_n * 2.0 * (n - p), grads);
    backward(params, cp, inv_n * 2.0 * (p - a), grads);
    backward(params, cn, inv_n * -2.0 * (n - a), grads);
  }

  for (size_t i = 0; i < grads.conv.size(); ++i)
    if (!grads.conv[i].w.allFinite() || !grads.conv[i].b.allFinite() ||
        !std::isfinite(grads.conv[i].slope))
      throw NumericError("non-finite gradient in conv" + std::to_string(i + 1));
  for (size_t j = 0; j < grads.fc.size(); ++j)
    if (!grads.fc[j].w.allFinite() || !grads.fc[j].b.allFinite() ||
        !std::isfinite(grads.fc[j].slope))
      throw NumericError("non-finite gradient in fc" + std::to_string(j + 1));

  if (mean_loss) *mean_loss = total * inv_n;
  return grads;
}

double lr_at_epoch(const NetConfig& config, int epoch) {
  return config.lr * std::pow(config.lr_decay, epoch / config.lr_step);
}

Eigen::MatrixXd load_normalized_image(const Manifest& manifest,
                                      const SampleRef& sample,
                                      const NetConfig& config) {
  const DepthFrame raw =
      read_d256(manifest.dir / sample.path, manifest.image_size,
                manifest.image_size);
  const DepthFrame norm =
      normalize_depth(raw, config.depth_near, config.depth_far);
  Eigen::MatrixXd img(norm.height, norm.width);
  for (int y = 0; y < norm.height; ++y)
    for (int x = 0; x < norm.width; ++x)
      img(y, x) = static_cast<double>(norm.depth[y * norm.width + x]);
  return img;
}

TrainResult train(const NetConfig& config, const Manifest& manifest) {
  validate(config);
  if (manifest.image_size != config.input_size)
    throw InvalidInputError("train: manifest images are " +
                            std::to_string(manifest.image_size) +
                            "px but the net expects " +
                            std::to_string(config.input_size));
  const int holdout = manifest.cameras >= 2 ? manifest.cameras - 1 : -1;
  const TripletSampler sampler(manifest, holdout);
  if (sampler.pool().empty())
    throw SamplingError("train: no samples left after the camera hold-out");

  TrainResult result;
  result.params = init_params(config);
  NetParams m = zeros_like(result.params);
  NetParams v = zeros_like(result.params);
  auto p_spans = tensor_spans(result.params);
  auto g_spans_of = [](NetParams& g) { return tensor_spans(g); };
  auto m_spans = tensor_spans(m);
  auto v_spans = tensor_spans(v);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  long t = 0;

  // Image cache: float keeps the full-scale footprint manageable.
  std::vector<std::optional<Eigen::MatrixXf>> cache(manifest.samples.size());
  auto image_of = [&](int idx) -> Eigen::MatrixXd {
    if (!cache[idx])
      cache[idx] = load_normalized_image(manifest, manifest.samples[idx],
                                         config)
                       .cast<float>();
    return cache[idx]->cast<double>();
  };

  const int n_per_epoch = config.triplets_per_epoch > 0
                              ? config.triplets_per_epoch
                              : static_cast<int>(sampler.pool().size());
  Rng rng = Rng(config.seed).derive(0x7261);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    double epoch_loss = 0.0;
    int done = 0;
    while (done < n_per_epoch) {
      const int bs = std::min(config.batch_size, n_per_epoch - done);
      std::vector<ImageTriplet> batch;
      batch.reserve(bs);
      for (int i = 0; i < bs; ++i) {
        const Triplet trip = sampler.sample(rng);
        batch.push_back(ImageTriplet{image_of(trip.anchor),
                                     image_of(trip.positive),
                                     image_of(trip.negative)});
      }
      double batch_loss = 0.0;
      NetParams grads;
      try {
        grads = gradients(result.params, batch, &batch_loss);
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at epoch " +
                            std::to_string(epoch) + ": " + e.what());
      }
      auto g_spans = g_spans_of(grads);

      ++t;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
      for (size_t s = 0; s < p_spans.size(); ++s) {
        double* p = p_spans[s].first;
        double* g = g_spans[s].first;
        double* mm = m_spans[s].first;
        double* vv = v_spans[s].first;
        const long len = p_spans[s].second;
        for (long i = 0; i < len; ++i) {
          mm[i] = kBeta1 * mm[i] + (1.0 - kBeta1) * g[i];
          vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * g[i] * g[i];
          p[i] -= lr * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + kEps);
        }
      }
      epoch_loss += batch_loss * bs;
      done += bs;
    }
    epoch_loss /= n_per_epoch;
    if (!std::isfinite(epoch_loss))
      throw TrainingError("training diverged at epoch " +
                          std::to_string(epoch));
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

PSMPoint embed_sequence(const NetParams& params,
                        const std::vector<DepthFrame>& frames) {
  if (frames.empty())
    throw InvalidInputError("embed_sequence: empty sequence");
  PSMPoint c{0.0, 0.0};
  for (const DepthFrame& f : frames) {
    const DepthFrame norm = normalize_depth(f, params.config.depth_near,
                                            params.config.depth_far);
    Eigen::MatrixXd img(norm.height, norm.width);
    for (int y = 0; y < norm.height; ++y)
      for (int x = 0; x < norm.width; ++x)
        img(y, x) = static_cast<double>(norm.depth[y * norm.width + x]);
    const PSMPoint p = forward(params, img);
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(frames.size());
  c.y /= static_cast<double>(frames.size());
  return c;
}

void save_net(const std::filesystem::path& path, const NetParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write("FSNP", 4);
  const std::uint32_t version = 1;
  const char vb[4] = {static_cast<char>(version & 0xff),
                      static_cast<char>((version >> 8) & 0xff),
                      static_cast<char>((version >> 16) & 0xff),
                      static_cast<char>((version >> 24) & 0xff)};
  os.write(vb, 4);
  std::uint64_t digest = net_config_digest(params.config);
  char db[8];
  for (int i = 0; i < 8; ++i) db[i] = static_cast<char>((digest >> (8 * i)) & 0xff);
  os.write(db, 8);

  NetParams copy = params;  // spans need mutable access
  for (const auto& [ptr, len] : tensor_spans(copy))
    for (long i = 0; i < len; ++i)
      put_f32_le(os, static_cast<float>(ptr[i]));
  if (!os) throw IoError("short write: " + path.string());
}

NetParams load_net(const std::filesystem::path& path,
                   const NetConfig& config) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open: " + path.string());
  const auto file_size = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FSNP", 4) != 0)
    throw IoError("not a net parameter file: " + path.string());
  unsigned char vb[4];
  is.read(reinterpret_cast<char*>(vb), 4);
  const std::uint32_t version = static_cast<std::uint32_t>(vb[0]) |
                                (static_cast<std::uint32_t>(vb[1]) << 8) |
                                (static_cast<std::uint32_t>(vb[2]) << 16) |
                                (static_cast<std::uint32_t>(vb[3]) << 24);
  if (version != 1)
    throw IoError("unsupported net file version " + std::to_string(version));
  unsigned char db[8];
  is.read(reinterpret_cast<char*>(db), 8);
  std::uint64_t digest = 0;
  for (int i = 7; i >= 0; --i) digest = (digest << 8) | db[i];
  if (digest != net_config_digest(config))
    throw IoError("net file " + path.string() +
                  " was written with a different configuration");

  NetParams params = init_params(config);
  auto spans = tensor_spans(params);
  std::uint64_t total = 0;
  for (const auto& [ptr, len] : spans) total += static_cast<std::uint64_t>(len);
  if (file_size != 16 + total * 4)
    throw IoError("net file size mismatch: " + path.string());

  std::vector<unsigned char> raw(total * 4);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<long>(raw.size()));
  if (!is) throw IoError("short read: " + path.string());
  size_t off = 0;
  for (const auto& [ptr, len] : spans)
    for (long i = 0; i < len; ++i, off += 4) {
      const std::uint32_t bits =
          static_cast<std::uint32_t>(raw[off]) |
          (static_cast<std::uint32_t>(raw[off + 1]) << 8) |
          (static_cast<std::uint32_t>(raw[off + 2]) << 16) |
          (static_cast<std::uint32_t>(raw[off + 3]) << 24);
      ptr[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  return params;
}

}  // namespace fabsim
