#include "eoescope/vit.hpp"

#include <cmath>
#include <numbers>

#include "eoescope/error.hpp"
#include "eoescope/rng.hpp"

namespace eoescope {

namespace {

constexpr double kLayerNormEps = 1e-6;

[[noreturn]] void fail(const std::string& code, const std::string& message) {
  throw Error("classifier", code, message);
}

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, ForwardCache::LayerNorm& cache) {
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const Vector var = centered.array().square().rowwise().mean();
  cache.rstd = (var.array() + kLayerNormEps).rsqrt();
  cache.xhat = centered.array().colwise() * cache.rstd.array();
  Matrix y = cache.xhat.array().rowwise() * gamma.row(0).array();
  y.rowwise() += beta.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const ForwardCache::LayerNorm& cache, const Matrix& gamma,
                           Matrix& dgamma, Matrix& dbeta) {
  dgamma.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
  const Vector mean_dxhat = dxhat.rowwise().mean();
  const Vector mean_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().mean();
  Matrix dx = (dxhat.colwise() - mean_dxhat).array() - cache.xhat.array().colwise() * mean_dxhat_xhat.array();
  return dx.array().colwise() * cache.rstd.array();
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void softmax_rows(Matrix& s) {
  const Vector max = s.rowwise().maxCoeff();
  s = (s.colwise() - max).array().exp();
  const Vector sum = s.rowwise().sum();
  s = s.array().colwise() / sum.array();
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ClassifierConfig ClassifierConfig::toy() { return ClassifierConfig{}; }

ClassifierConfig ClassifierConfig::deit_small() {
  ClassifierConfig c;
  c.embed_dim = 384;
  c.depth = 12;
  c.heads = 6;
  return c;
}

void ClassifierConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0) fail("bad-config", "image and patch size must be positive");
  if (image_size % patch_size != 0) {
    fail("bad-config", "image size " + std::to_string(image_size) + " is not divisible by patch size " +
                           std::to_string(patch_size));
  }
  if (embed_dim <= 0 || depth <= 0 || heads <= 0 || mlp_ratio <= 0) fail("bad-config", "dimensions must be positive");
  if (embed_dim % heads != 0) fail("bad-config", "embed dim must be divisible by the head count");
  if (num_classes != static_cast<int>(kNumClasses)) {
    fail("bad-config", "class count " + std::to_string(num_classes) + " differs from the taxonomy size " +
                           std::to_string(kNumClasses));
  }
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) fail("bad-config", "learning rate must be non-negative");
  if (batch_size <= 0 || epochs < 0) fail("bad-config", "batch size must be positive and epochs non-negative");
  if (!std::isfinite(threshold)) fail("bad-config", "threshold must be finite");
  if (!(max_positive_weight >= 1.0)) fail("bad-config", "max positive weight must be at least 1");
  for (double s : std) {
    if (!(s > 0.0)) fail("bad-config", "normalization std must be positive");
  }
}

VisionTransformer::VisionTransformer(const ClassifierConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.embed_dim;
  const int hidden = d * config_.mlp_ratio;
  patch_w_ = add("patch_embed.weight", Matrix::Zero(config_.patch_dim(), d));
  patch_b_ = add("patch_embed.bias", Matrix::Zero(1, d));
  cls_ = add("cls_token", Matrix::Zero(1, d));
  if (config_.distillation_token) dist_ = add("dist_token", Matrix::Zero(1, d));
  pos_ = add("pos_embed", Matrix::Zero(config_.num_tokens(), d));
  for (int b = 0; b < config_.depth; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    BlockIndex bi{};
    bi.norm1_g = add(p + "norm1.weight", Matrix::Ones(1, d));
    bi.norm1_b = add(p + "norm1.bias", Matrix::Zero(1, d));
    bi.qkv_w = add(p + "attn.qkv.weight", Matrix::Zero(d, 3 * d));
    bi.qkv_b = add(p + "attn.qkv.bias", Matrix::Zero(1, 3 * d));
    bi.proj_w = add(p + "attn.proj.weight", Matrix::Zero(d, d));
    bi.proj_b = add(p + "attn.proj.bias", Matrix::Zero(1, d));
    bi.norm2_g = add(p + "norm2.weight", Matrix::Ones(1, d));
    bi.norm2_b = add(p + "norm2.bias", Matrix::Zero(1, d));
    bi.fc1_w = add(p + "mlp.fc1.weight", Matrix::Zero(d, hidden));
    bi.fc1_b = add(p + "mlp.fc1.bias", Matrix::Zero(1, hidden));
    bi.fc2_w = add(p + "mlp.fc2.weight", Matrix::Zero(hidden, d));
    bi.fc2_b = add(p + "mlp.fc2.bias", Matrix::Zero(1, d));
    blocks_.push_back(bi);
  }
  norm_g_ = add("norm.weight", Matrix::Ones(1, d));
  norm_b_ = add("norm.bias", Matrix::Zero(1, d));
  head_w_ = add("head.weight", Matrix::Zero(d, config_.num_classes));
  head_b_ = add("head.bias", Matrix::Zero(1, config_.num_classes));
  initialize(*this, config_.seed);
}

std::size_t VisionTransformer::add(std::string name, Matrix value) {
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t VisionTransformer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

Parameter& VisionTransformer::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  fail("unknown-parameter", "no parameter named '" + name + "'");
}

const Parameter& VisionTransformer::parameter(const std::string& name) const {
  return const_cast<VisionTransformer*>(this)->parameter(name);
}

Gradients VisionTransformer::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

void initialize(VisionTransformer& model, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "vit-init"));
  for (auto& p : model.parameters()) {
    const bool is_norm = p.name.find("norm") != std::string::npos;
    const bool is_bias = p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0;
    if (is_norm) {
      p.value.setConstant(is_bias ? 0.0 : 1.0);
    } else if (is_bias) {
      p.value.setZero();
    } else {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.truncated_normal(0.02);
    }
  }
}

Matrix VisionTransformer::extract_patches(const ImageTensor& input) const {
  if (input.size != config_.image_size ||
      input.data.size() != static_cast<std::size_t>(input.size) * input.size * 3) {
    fail("bad-input", "input tensor must be " + std::to_string(config_.image_size) + "x" +
                          std::to_string(config_.image_size) + "x3");
  }
  const int ps = config_.patch_size;
  const int grid = config_.grid();
  Matrix patches(config_.num_patches(), config_.patch_dim());
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      const int row = gy * grid + gx;
      for (int dy = 0; dy < ps; ++dy) {
        for (int dx = 0; dx < ps; ++dx) {
          for (int c = 0; c < 3; ++c) patches(row, (dy * ps + dx) * 3 + c) = input.at(gy * ps + dy, gx * ps + dx, c);
        }
      }
    }
  }
  return patches;
}

Vector VisionTransformer::forward(const ImageTensor& input) const {
  ForwardCache cache;
  return forward(input, cache);
}

Vector VisionTransformer::forward(const ImageTensor& input, ForwardCache& c) const {
  const int t = config_.num_tokens();
  const int d = config_.embed_dim;
  const int np = config_.num_patches();
  const int prefix = config_.prefix_tokens();
  const int heads = config_.heads;
  const int dh = config_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  c.patches = extract_patches(input);
  Matrix x(t, d);
  x.row(0) = params_[cls_].value.row(0);
  if (config_.distillation_token) x.row(1) = params_[dist_].value.row(0);
  x.bottomRows(np).noalias() = c.patches * params_[patch_w_].value;
  x.bottomRows(np).rowwise() += params_[patch_b_].value.row(0);
  x += params_[pos_].value;

  c.blocks.resize(static_cast<std::size_t>(config_.depth));
  for (int b = 0; b < config_.depth; ++b) {
    auto& bc = c.blocks[static_cast<std::size_t>(b)];
    const auto& bi = blocks_[static_cast<std::size_t>(b)];
    bc.input = x;
    bc.normed1 = layer_norm(x, params_[bi.norm1_g].value, params_[bi.norm1_b].value, bc.norm1);
    bc.qkv.noalias() = bc.normed1 * params_[bi.qkv_w].value;
    bc.qkv.rowwise() += params_[bi.qkv_b].value.row(0);

    bc.attention.resize(static_cast<std::size_t>(heads));
    bc.attended.resize(t, d);
    for (int h = 0; h < heads; ++h) {
      const auto q = bc.qkv.middleCols(h * dh, dh);
      const auto k = bc.qkv.middleCols(d + h * dh, dh);
      const auto v = bc.qkv.middleCols(2 * d + h * dh, dh);
      Matrix s = (q * k.transpose()) * scale;
      softmax_rows(s);
      bc.attended.middleCols(h * dh, dh).noalias() = s * v;
      bc.attention[static_cast<std::size_t>(h)] = std::move(s);
    }
    bc.mid = x;
    bc.mid.noalias() += bc.attended * params_[bi.proj_w].value;
    bc.mid.rowwise() += params_[bi.proj_b].value.row(0);

    bc.normed2 = layer_norm(bc.mid, params_[bi.norm2_g].value, params_[bi.norm2_b].value, bc.norm2);
    bc.hidden_pre.noalias() = bc.normed2 * params_[bi.fc1_w].value;
    bc.hidden_pre.rowwise() += params_[bi.fc1_b].value.row(0);
    bc.hidden = bc.hidden_pre.unaryExpr([](double v) { return gelu(v); });
    x = bc.mid;
    x.noalias() += bc.hidden * params_[bi.fc2_w].value;
    x.rowwise() += params_[bi.fc2_b].value.row(0);
  }
  c.output = x;
  c.readout = layer_norm(x.topRows(prefix), params_[norm_g_].value, params_[norm_b_].value, c.readout_norm);
  c.pooled = c.readout.colwise().mean().transpose();
  c.logits = params_[head_w_].value.transpose() * c.pooled + params_[head_b_].value.row(0).transpose();
  return c.logits;
}

void VisionTransformer::backward(const ForwardCache& c, const Vector& dlogits, Gradients* grads,
                                 AttentionGradients* attention_grads) const {
  Gradients scratch;
  if (!grads) {
    scratch = zero_gradients();
    grads = &scratch;
  }
  Gradients& g = *grads;
  const int t = config_.num_tokens();
  const int d = config_.embed_dim;
  const int np = config_.num_patches();
  const int prefix = config_.prefix_tokens();
  const int heads = config_.heads;
  const int dh = config_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  g[head_w_].noalias() += c.pooled * dlogits.transpose();
  g[head_b_].row(0) += dlogits.transpose();
  const Vector dpooled = params_[head_w_].value * dlogits;
  Matrix dreadout(prefix, d);
  for (int r = 0; r < prefix; ++r) dreadout.row(r) = dpooled.transpose() / prefix;

  Matrix dx = Matrix::Zero(t, d);
  dx.topRows(prefix) = layer_norm_backward(dreadout, c.readout_norm, params_[norm_g_].value, g[norm_g_], g[norm_b_]);

  if (attention_grads) attention_grads->assign(static_cast<std::size_t>(config_.depth), {});
  for (int b = config_.depth - 1; b >= 0; --b) {
    const auto& bc = c.blocks[static_cast<std::size_t>(b)];
    const auto& bi = blocks_[static_cast<std::size_t>(b)];

    g[bi.fc2_w].noalias() += bc.hidden.transpose() * dx;
    g[bi.fc2_b].row(0) += dx.colwise().sum();
    Matrix dhidden = dx * params_[bi.fc2_w].value.transpose();
    dhidden.array() *= bc.hidden_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    g[bi.fc1_w].noalias() += bc.normed2.transpose() * dhidden;
    g[bi.fc1_b].row(0) += dhidden.colwise().sum();
    const Matrix dnormed2 = dhidden * params_[bi.fc1_w].value.transpose();
    Matrix dmid = dx + layer_norm_backward(dnormed2, bc.norm2, params_[bi.norm2_g].value, g[bi.norm2_g], g[bi.norm2_b]);

    g[bi.proj_w].noalias() += bc.attended.transpose() * dmid;
    g[bi.proj_b].row(0) += dmid.colwise().sum();
    const Matrix dattended = dmid * params_[bi.proj_w].value.transpose();

    Matrix dqkv(t, 3 * d);
    for (int h = 0; h < heads; ++h) {
      const Matrix& a = bc.attention[static_cast<std::size_t>(h)];
      const auto q = bc.qkv.middleCols(h * dh, dh);
      const auto k = bc.qkv.middleCols(d + h * dh, dh);
      const auto v = bc.qkv.middleCols(2 * d + h * dh, dh);
      const auto dout = dattended.middleCols(h * dh, dh);
      Matrix da = dout * v.transpose();
      dqkv.middleCols(2 * d + h * dh, dh).noalias() = a.transpose() * dout;
      const Vector rowdot = (da.array() * a.array()).rowwise().sum();
      const Matrix ds = (a.array() * (da.colwise() - rowdot).array()) * scale;
      dqkv.middleCols(h * dh, dh).noalias() = ds * k;
      dqkv.middleCols(d + h * dh, dh).noalias() = ds.transpose() * q;
      if (attention_grads) (*attention_grads)[static_cast<std::size_t>(b)].push_back(std::move(da));
    }
    g[bi.qkv_w].noalias() += bc.normed1.transpose() * dqkv;
    g[bi.qkv_b].row(0) += dqkv.colwise().sum();
    const Matrix dnormed1 = dqkv * params_[bi.qkv_w].value.transpose();
    dx = dmid + layer_norm_backward(dnormed1, bc.norm1, params_[bi.norm1_g].value, g[bi.norm1_g], g[bi.norm1_b]);
  }

  g[pos_] += dx;
  g[cls_].row(0) += dx.row(0);
  if (config_.distillation_token) g[dist_].row(0) += dx.row(1);
  g[patch_w_].noalias() += c.patches.transpose() * dx.bottomRows(np);
  g[patch_b_].row(0) += dx.bottomRows(np).colwise().sum();
}

double bce_with_logits(const Vector& logits, const LabelVector& target, const Vector& positive_weight,
                       Vector* dlogits) {
  const auto n = logits.size();
  if (dlogits) dlogits->resize(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = logits[i];
    const double w = positive_weight.size() == n ? positive_weight[i] : 1.0;
    if (target.test(static_cast<std::size_t>(i))) {
      loss += w * softplus(-z);
      if (dlogits) (*dlogits)[i] = -w * sigmoid(-z) / static_cast<double>(n);
    } else {
      loss += softplus(z);
      if (dlogits) (*dlogits)[i] = sigmoid(z) / static_cast<double>(n);
    }
  }
  return loss / static_cast<double>(n);
}

void AdamOptimizer::step(std::vector<Parameter>& params, const Gradients& grads) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseAbs2();
    params[i].value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace eoescope
