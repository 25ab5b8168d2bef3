#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eoescope/taxonomy.hpp"

namespace eoescope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ClassifierConfig {
  int image_size = 224;
  int patch_size = 16;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 4;
  int num_classes = static_cast<int>(kNumClasses);
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 100;
  double threshold = 0.5;
  bool distillation_token = true;
  std::uint64_t seed = 0;
  bool positive_weighting = true;
  double max_positive_weight = 20.0;
  // Channel statistics applied after scaling pixels to [0, 1].
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};

  /// Small configuration for desk-scale runs (embed 64, depth 4, heads 4).
  static ClassifierConfig toy();
  /// DeiT-Small dimensions (embed 384, depth 12, heads 6).
  static ClassifierConfig deit_small();

  /// Throws Error{"classifier","bad-config"} on inconsistent settings.
  void validate() const;

  int grid() const { return image_size / patch_size; }
  int num_patches() const { return grid() * grid(); }
  int prefix_tokens() const { return distillation_token ? 2 : 1; }
  int num_tokens() const { return num_patches() + prefix_tokens(); }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int head_dim() const { return embed_dim / heads; }

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

/// Normalized model input: image_size x image_size x 3, row-major HWC.
struct ImageTensor {
  int size = 0;
  std::vector<double> data;

  double at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * size + x) * 3 + c]; }
};

struct Parameter {
  std::string name;
  Matrix value;
};

/// Cached activations of one forward pass, consumed by `backward`.
struct ForwardCache {
  struct LayerNorm {
    Matrix xhat;
    Vector rstd;
  };
  struct Block {
    Matrix input;
    LayerNorm norm1;
    Matrix normed1;
    Matrix qkv;
    std::vector<Matrix> attention;  // per head, post-softmax (T x T)
    Matrix attended;                // concatenated head outputs
    Matrix mid;
    LayerNorm norm2;
    Matrix normed2;
    Matrix hidden_pre;
    Matrix hidden;
  };
  Matrix patches;
  std::vector<Block> blocks;
  Matrix output;  // tokens after the last block
  LayerNorm readout_norm;
  Matrix readout;  // normalized class (and distillation) rows
  Vector pooled;
  Vector logits;
};

/// Gradients aligned with `VisionTransformer::parameters()`.
using Gradients = std::vector<Matrix>;

/// Gradient of the backpropagated quantity w.r.t. each block's post-softmax
/// attention, indexed [block][head].
using AttentionGradients = std::vector<std::vector<Matrix>>;

/// DeiT-style encoder: patch embedding, class and distillation tokens,
/// learned position embeddings, pre-norm transformer blocks, and a linear
/// head over the final-normed class token (averaged with the distillation
/// token when enabled).
class VisionTransformer {
 public:
  explicit VisionTransformer(const ClassifierConfig& config);

  const ClassifierConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;

  Gradients zero_gradients() const;

  Vector forward(const ImageTensor& input) const;
  Vector forward(const ImageTensor& input, ForwardCache& cache) const;

  /// Accumulates d(objective)/d(parameters) into `grads` (if non-null) given
  /// d(objective)/d(logits); optionally records attention gradients.
  void backward(const ForwardCache& cache, const Vector& dlogits, Gradients* grads,
                AttentionGradients* attention_grads = nullptr) const;

 private:
  struct BlockIndex {
    std::size_t norm1_g, norm1_b, qkv_w, qkv_b, proj_w, proj_b, norm2_g, norm2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  std::size_t add(std::string name, Matrix value);
  Matrix extract_patches(const ImageTensor& input) const;

  ClassifierConfig config_;
  std::vector<Parameter> params_;
  std::size_t patch_w_ = 0, patch_b_ = 0, cls_ = 0, dist_ = 0, pos_ = 0, norm_g_ = 0, norm_b_ = 0, head_w_ = 0,
              head_b_ = 0;
  std::vector<BlockIndex> blocks_;
};

/// Deterministic truncated-normal initialization from `seed`.
void initialize(VisionTransformer& model, std::uint64_t seed);

/// Mean per-class sigmoid binary cross-entropy with optional positive
/// weights; writes d(loss)/d(logits) when `dlogits` is non-null.
double bce_with_logits(const Vector& logits, const LabelVector& target, const Vector& positive_weight,
                       Vector* dlogits);

double sigmoid(double x);

/// Adaptive moment estimation without weight decay.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::vector<Parameter>& params, const Gradients& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace eoescope
