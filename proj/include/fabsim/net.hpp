#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fabsim/dataset.hpp"
#include "fabsim/depth.hpp"

namespace fabsim {

/// Architecture and schedule of the embedding network:
/// [conv(k, same-pad) -> PReLU -> maxpool(pool)] per conv channel entry,
/// flatten, then linear -> PReLU for all fc widths but the last, and a
/// bare linear onto the final width (the 2D similarity map).
struct NetConfig {
  int input_size = 256;  // square single-channel input
  std::vector<int> conv_channels{8, 16, 32, 64};
  int kernel = 3;
  int pool = 2;
  std::vector<int> fc_widths{256, 64, 2};
  double margin = 1.0;
  int batch_size = 32;
  double lr = 1e-2;
  int lr_step = 8;
  double lr_decay = 0.1;
  int epochs = 30;
  int triplets_per_epoch = 0;  // 0 -> size of the training pool
  double depth_near = 0.2;     // input normalization bounds, meters
  double depth_far = 8.0;
  std::uint64_t seed = 0;
};

/// Throws ConfigError unless the output dim is 2, margin > 0 and every
/// layer size is positive (and the pooled resolution never hits zero).
void validate(const NetConfig& config);

/// 64-bit digest of the canonical config serialization; stored in saved
/// parameter files so shape mismatches are caught at load time.
std::uint64_t net_config_digest(const NetConfig& config);

struct ConvLayer {
  Eigen::MatrixXd w;  // out_c x (in_c * k * k)
  Eigen::VectorXd b;  // out_c
  double slope = 0.25;
};

struct FcLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
  double slope = 0.25;
  bool has_act = true;  // final layer is a bare linear map
};

struct NetParams {
  NetConfig config;
  std::vector<ConvLayer> conv;
  std::vector<FcLayer> fc;
};

/// Uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases drawn
/// from Rng(config.seed); PReLU slopes start at 0.25.
NetParams init_params(const NetConfig& config);

/// Same shapes, all zeros (gradient / moment containers).
NetParams zeros_like(const NetParams& params);

/// A point on the 2D physics similarity map.
struct PSMPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Squared Euclidean distance between two map points.
double psd(const PSMPoint& p, const PSMPoint& q);

/// max(0, |p-a|^2 - |n-a|^2 + margin).
double triplet_loss(const PSMPoint& anchor, const PSMPoint& positive,
                    const PSMPoint& negative, double margin);

// ---- Layer primitives (also exercised directly by the test suite) ----

/// Channel-major feature map: data(c, y*w + x).
struct FeatureMap {
  Eigen::MatrixXd data;
  int channels = 0;
  int h = 0;
  int w = 0;
};

/// Zero-padded stride-1 convolution ("same" output size).
FeatureMap conv_same(const FeatureMap& x, const Eigen::MatrixXd& weights,
                     const Eigen::VectorXd& bias, int k);
/// Accumulates dw/db and returns dx for the layer above.
FeatureMap conv_same_backward(const FeatureMap& x,
                              const Eigen::MatrixXd& weights, int k,
                              const FeatureMap& gout, Eigen::MatrixXd& dw,
                              Eigen::VectorXd& db);

Eigen::MatrixXd prelu(const Eigen::MatrixXd& pre, double slope);
/// Returns dx and adds d(loss)/d(slope) into dslope.
Eigen::MatrixXd prelu_backward(const Eigen::MatrixXd& pre, double slope,
                               const Eigen::MatrixXd& gout, double& dslope);

/// Non-overlapping maxpool, floor(h/pool) x floor(w/pool); argmax holds
/// the flat input index that won each cell.
FeatureMap maxpool(const FeatureMap& x, int pool, Eigen::MatrixXi& argmax);
FeatureMap maxpool_backward(const FeatureMap& x, int pool,
                            const Eigen::MatrixXi& argmax,
                            const FeatureMap& gout);

Eigen::VectorXd linear(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& x);
Eigen::VectorXd linear_backward(const Eigen::MatrixXd& w,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& gout,
                                Eigen::MatrixXd& dw, Eigen::VectorXd& db);

// ---- Network-level operations ----

/// Maps one normalized depth image (input_size x input_size, values in
/// [0,1]) to its similarity-map point. Throws InvalidInputError on shape
/// mismatch.
PSMPoint forward(const NetParams& params, const Eigen::MatrixXd& image);

struct ImageTriplet {
  Eigen::MatrixXd anchor, positive, negative;
};

/// Gradient of the mean triplet loss over the batch with respect to every
/// parameter (same shapes as `params`). Throws InvalidInputError on an
/// empty batch and NumericError (naming the layer) on non-finite
/// gradients. Returns the mean loss through `mean_loss` when non-null.
NetParams gradients(const NetParams& params,
                    const std::vector<ImageTriplet>& batch,
                    double* mean_loss = nullptr);

/// Step-decay schedule: lr * decay^floor(epoch / step).
double lr_at_epoch(const NetConfig& config, int epoch);

struct TrainResult {
  NetParams params;
  std::vector<double> loss_history;  // mean loss per epoch
};

/// Adam training on uniformly sampled triplets from the manifest (camera
/// index cameras-1 held out when the manifest has >= 2 cameras).
/// Deterministic per config.seed. Throws TrainingError (with the epoch
/// index) if the loss goes non-finite.
TrainResult train(const NetConfig& config, const Manifest& manifest);

/// Normalized image loaded from a manifest sample (file I/O + depth
/// normalization with the config bounds).
Eigen::MatrixXd load_normalized_image(const Manifest& manifest,
                                      const SampleRef& sample,
                                      const NetConfig& config);

/// Centroid of the per-frame map points of a raw depth sequence
/// (normalization applied internally). Throws InvalidInputError when
/// empty.
PSMPoint embed_sequence(const NetParams& params,
                        const std::vector<DepthFrame>& frames);

/// Binary parameter file: magic, format version, config digest, then all
/// tensors as little-endian float32 in declaration order.
void save_net(const std::filesystem::path& path, const NetParams& params);
/// Throws IoError on bad files or a digest that does not match `config`.
NetParams load_net(const std::filesystem::path& path, const NetConfig& config);

}  // namespace fabsim
