#include "eoescope/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <opencv2/imgproc.hpp>

#include <json.hpp>

#include "cv_bridge.hpp"
#include "eoescope/error.hpp"
#include "eoescope/hashing.hpp"

namespace eoescope {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& message) {
  throw Error("classifier", code, message);
}

}  // namespace

// -- preprocessing ---------------------------------------------------------

Image fit_to_model(const Image& image, const ClassifierConfig& config) {
  if (image.width == config.image_size && image.height == config.image_size) return image;
  return resize_bilinear(image, config.image_size, config.image_size);
}

ImageTensor preprocess(const Image& image, const ClassifierConfig& config) {
  if (image.width < kMinInputSide || image.height < kMinInputSide) {
    fail("degenerate-image", "image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                 ", minimum is " + std::to_string(kMinInputSide) + "x" + std::to_string(kMinInputSide));
  }
  const Image resized = fit_to_model(image, config);
  ImageTensor t;
  t.size = config.image_size;
  t.data.resize(resized.data.size());
  for (std::size_t i = 0; i < resized.data.size(); ++i) {
    const std::size_t c = i % 3;
    t.data[i] = (static_cast<double>(resized.data[i]) - config.mean[c]) / config.std[c];
  }
  return t;
}

ImageTensor preprocess(std::span<const std::uint8_t> bytes, const ClassifierConfig& config) {
  return preprocess(decode_image(bytes), config);
}

// -- augmentation ----------------------------------------------------------

void AugmentationPolicy::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(flip_probability) || !prob(blur_probability)) fail("bad-policy", "probabilities must lie in [0, 1]");
  if (!(max_rotation_degrees >= 0.0 && max_rotation_degrees <= 90.0)) {
    fail("bad-policy", "rotation must lie in [0, 90] degrees");
  }
  if (blur_kernel < 1 || blur_kernel % 2 == 0) fail("bad-policy", "blur kernel must be a positive odd size");
  if (!(blur_sigma_min > 0.0 && blur_sigma_max >= blur_sigma_min)) fail("bad-policy", "invalid blur sigma range");
  if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0 || hue > 0.5) {
    fail("bad-policy", "jitter deltas must be non-negative (hue at most 0.5)");
  }
}

AugmentationPolicy AugmentationPolicy::minimal() {
  AugmentationPolicy p;
  p.flip_probability = 0.0;
  p.max_rotation_degrees = 0.0;
  p.brightness = p.contrast = p.saturation = p.hue = 0.0;
  return p;
}

Image flip_horizontal(const Image& image) {
  Image out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
    }
  }
  return out;
}

Image gaussian_blur(const Image& image, int kernel, double sigma) {
  cv::Mat src = detail::to_mat(image);
  cv::Mat dst;
  cv::GaussianBlur(src, dst, cv::Size(kernel, kernel), sigma, sigma, cv::BORDER_REFLECT_101);
  return detail::from_mat(dst);
}

namespace {

Image rotate(const Image& image, double degrees) {
  cv::Mat src = detail::to_mat(image);
  const cv::Point2f center(static_cast<float>(image.width - 1) / 2.0f, static_cast<float>(image.height - 1) / 2.0f);
  const cv::Mat m = cv::getRotationMatrix2D(center, degrees, 1.0);
  cv::Mat dst;
  cv::warpAffine(src, dst, m, src.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar::all(0));
  return detail::from_mat(dst);
}

float luma(const Image& img, std::size_t px) {
  return 0.299f * img.data[px * 3] + 0.587f * img.data[px * 3 + 1] + 0.114f * img.data[px * 3 + 2];
}

void blend_with(Image& img, double factor, const std::vector<float>& other_per_pixel, bool per_pixel, float constant) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t px = 0; px < n; ++px) {
    const float o = per_pixel ? other_per_pixel[px] : constant;
    for (int c = 0; c < 3; ++c) {
      float& v = img.data[px * 3 + c];
      v = std::clamp(static_cast<float>(factor * v + (1.0 - factor) * o), 0.0f, 1.0f);
    }
  }
}

void jitter(Image& img, double brightness, double contrast, double saturation, double hue) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (brightness != 1.0) {
    for (auto& v : img.data) v = std::clamp(static_cast<float>(v * brightness), 0.0f, 1.0f);
  }
  if (contrast != 1.0) {
    double mean = 0.0;
    for (std::size_t px = 0; px < n; ++px) mean += luma(img, px);
    blend_with(img, contrast, {}, false, static_cast<float>(mean / static_cast<double>(n)));
  }
  if (saturation != 1.0) {
    std::vector<float> gray(n);
    for (std::size_t px = 0; px < n; ++px) gray[px] = luma(img, px);
    blend_with(img, saturation, gray, true, 0.0f);
  }
  if (hue != 0.0) {
    cv::Mat hsv;
    cv::cvtColor(detail::to_mat(img), hsv, cv::COLOR_RGB2HSV);
    for (int y = 0; y < hsv.rows; ++y) {
      auto* row = hsv.ptr<cv::Vec3f>(y);
      for (int x = 0; x < hsv.cols; ++x) {
        float h = row[x][0] + static_cast<float>(hue * 360.0);
        h = std::fmod(h, 360.0f);
        if (h < 0) h += 360.0f;
        row[x][0] = h;
      }
    }
    cv::Mat rgb;
    cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
    img = detail::from_mat(rgb);
    for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  }
}

}  // namespace

Image augment(const Image& image, const AugmentationPolicy& policy, Rng& rng, const AugmentHooks* hooks) {
  policy.validate();
  Image out = image;

  const bool flip = rng.bernoulli(policy.flip_probability);
  if (flip) out = flip_horizontal(out);
  if (hooks && hooks->on_flip) hooks->on_flip(flip);

  const double angle = rng.uniform(-policy.max_rotation_degrees, policy.max_rotation_degrees);
  if (angle != 0.0) out = rotate(out, angle);
  if (hooks && hooks->on_rotate) hooks->on_rotate(angle);

  const bool blur = rng.bernoulli(policy.blur_probability);
  const double sigma = rng.uniform(policy.blur_sigma_min, policy.blur_sigma_max);
  if (blur) out = gaussian_blur(out, policy.blur_kernel, sigma);
  if (hooks && hooks->on_blur) hooks->on_blur(blur, sigma);

  const double b = rng.uniform(std::max(0.0, 1.0 - policy.brightness), 1.0 + policy.brightness);
  const double c = rng.uniform(std::max(0.0, 1.0 - policy.contrast), 1.0 + policy.contrast);
  const double s = rng.uniform(std::max(0.0, 1.0 - policy.saturation), 1.0 + policy.saturation);
  const double h = rng.uniform(-policy.hue, policy.hue);
  jitter(out, b, c, s, h);
  if (hooks && hooks->on_jitter) hooks->on_jitter(b, c, s, h);
  return out;
}

// -- training --------------------------------------------------------------

std::vector<std::uint8_t> load_record_bytes(const ImageRecord& record) { return read_file(record.uri); }

Vector positive_weights(std::span<const LabelVector> labels, double max_weight) {
  Vector w = Vector::Ones(static_cast<Eigen::Index>(kNumClasses));
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::size_t pos = 0;
    for (const auto& l : labels) pos += l.test(k) ? 1 : 0;
    if (pos == 0) continue;
    const double ratio = static_cast<double>(labels.size() - pos) / static_cast<double>(pos);
    w[static_cast<Eigen::Index>(k)] = std::clamp(ratio, 1.0, max_weight);
  }
  return w;
}

namespace {

struct MicroTally {
  long tp = 0, fp = 0, fn = 0;
  void add(const LabelVector& truth, const LabelVector& pred) {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      tp += truth.test(k) && pred.test(k);
      fp += !truth.test(k) && pred.test(k);
      fn += truth.test(k) && !pred.test(k);
    }
  }
  double f1() const { return 2 * tp + fp + fn == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn); }
};

ImageTensor normalize(const Image& image, const ClassifierConfig& config) { return preprocess(image, config); }

}  // namespace

ModelCheckpoint train(VisionTransformer model, const DatasetManifest& manifest, const AugmentationPolicy& policy,
                      const TrainOptions& options) {
  policy.validate();
  const ClassifierConfig cfg = model.config();
  std::vector<Image> train_images, val_images;
  std::vector<LabelVector> train_labels, val_labels;
  std::set<SourceType> sources;
  for (const auto& r : manifest.records()) {
    if (r.split != Split::Train && r.split != Split::Val) continue;
    if (!r.labels) fail("unlabeled", "record '" + r.id + "' in a training split has no labels");
    Image img = fit_to_model(decode_image(options.loader(r)), cfg);
    if (r.split == Split::Train) {
      train_images.push_back(std::move(img));
      train_labels.push_back(*r.labels);
      sources.insert(r.source);
    } else {
      val_images.push_back(std::move(img));
      val_labels.push_back(*r.labels);
    }
  }
  if (train_images.empty()) fail("empty-train-split", "the manifest has no train records");

  const Vector pos_weight = cfg.positive_weighting ? positive_weights(train_labels, cfg.max_positive_weight)
                                                   : Vector::Ones(static_cast<Eigen::Index>(kNumClasses));
  AdamOptimizer optimizer(cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, "train"));
  std::vector<std::size_t> order(train_images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ModelCheckpoint ckpt{model, {}, std::string(kTaxonomyVersion), {sources.begin(), sources.end()}, -1};
  std::vector<Parameter> best = model.parameters();
  double best_score = -1.0;
  ForwardCache cache;
  Vector dlogits;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    MicroTally tally;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Gradients grads = model.zero_gradients();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const Image sample = options.augment ? augment(train_images[idx], policy, rng) : train_images[idx];
        const Vector logits = model.forward(normalize(sample, cfg), cache);
        const double loss = bce_with_logits(logits, train_labels[idx], pos_weight, &dlogits);
        if (!std::isfinite(loss)) fail("non-finite-loss", "loss became non-finite in epoch " + std::to_string(epoch));
        loss_sum += loss;
        dlogits /= static_cast<double>(end - start);
        model.backward(cache, dlogits, &grads);
        tally.add(train_labels[idx], predict_from_logits(logits, cfg.threshold).labels);
      }
      optimizer.step(model.parameters(), grads);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(order.size());
    stats.train_f1 = tally.f1();
    if (!val_images.empty()) {
      MicroTally val;
      for (std::size_t i = 0; i < val_images.size(); ++i) {
        val.add(val_labels[i], predict(model, normalize(val_images[i], cfg), cfg.threshold).labels);
      }
      stats.val_f1 = val.f1();
    }
    const double score = stats.val_f1.value_or(stats.train_f1);
    if (score > best_score) {
      best_score = score;
      best = model.parameters();
      ckpt.best_epoch = epoch;
    }
    ckpt.history.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);
    if (options.stop_at_train_f1 && stats.train_f1 >= *options.stop_at_train_f1) break;
  }
  if (ckpt.best_epoch >= 0) model.parameters() = best;
  ckpt.model = std::move(model);
  return ckpt;
}

// -- prediction ------------------------------------------------------------

Prediction predict_from_logits(const Vector& logits, double threshold, std::string version) {
  if (logits.size() != static_cast<Eigen::Index>(kNumClasses)) fail("bad-logits", "expected 11 logits");
  Prediction p;
  p.model_version = std::move(version);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    p.probabilities[k] = sigmoid(logits[static_cast<Eigen::Index>(k)]);
    p.labels.set(k, p.probabilities[k] >= threshold);
  }
  return p;
}

Prediction predict(const VisionTransformer& model, const ImageTensor& input, double threshold) {
  return predict_from_logits(model.forward(input), threshold);
}

Prediction predict(const VisionTransformer& model, const Image& image, double threshold) {
  return predict(model, preprocess(image, model.config()), threshold);
}

Prediction predict(const VisionTransformer& model, std::span<const std::uint8_t> bytes, double threshold) {
  return predict(model, preprocess(bytes, model.config()), threshold);
}

std::string model_version(const VisionTransformer& model) {
  std::vector<std::uint8_t> bytes;
  for (const auto& p : model.parameters()) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(p.value.data());
    bytes.insert(bytes.end(), raw, raw + p.value.size() * static_cast<Eigen::Index>(sizeof(double)));
  }
  return sha256_hex(bytes).substr(0, 12);
}

double ClassifierRelevanceScorer::score(const CandidateImage& candidate) {
  const auto p = predict(model_, std::span<const std::uint8_t>(candidate.bytes), model_.config().threshold);
  return *std::max_element(p.probabilities.begin(), p.probabilities.end());
}

// -- checkpoints -----------------------------------------------------------

std::string config_to_json(const ClassifierConfig& c) {
  json j = {{"image_size", c.image_size},
            {"patch_size", c.patch_size},
            {"embed_dim", c.embed_dim},
            {"depth", c.depth},
            {"heads", c.heads},
            {"mlp_ratio", c.mlp_ratio},
            {"num_classes", c.num_classes},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"threshold", c.threshold},
            {"distillation_token", c.distillation_token},
            {"seed", c.seed},
            {"positive_weighting", c.positive_weighting},
            {"max_positive_weight", c.max_positive_weight},
            {"normalization", {{"mean", c.mean}, {"std", c.std}}}};
  return j.dump();
}

ClassifierConfig config_from_json(const std::string& text) {
  ClassifierConfig c;
  try {
    const json j = json::parse(text);
    c.image_size = j.at("image_size");
    c.patch_size = j.at("patch_size");
    c.embed_dim = j.at("embed_dim");
    c.depth = j.at("depth");
    c.heads = j.at("heads");
    c.mlp_ratio = j.at("mlp_ratio");
    c.num_classes = j.at("num_classes");
    c.learning_rate = j.at("learning_rate");
    c.batch_size = j.at("batch_size");
    c.epochs = j.at("epochs");
    c.threshold = j.at("threshold");
    c.distillation_token = j.at("distillation_token");
    c.seed = j.at("seed");
    c.positive_weighting = j.at("positive_weighting");
    c.max_positive_weight = j.at("max_positive_weight");
    c.mean = j.at("normalization").at("mean");
    c.std = j.at("normalization").at("std");
  } catch (const json::exception& e) {
    fail("bad-config", std::string("cannot parse classifier config: ") + e.what());
  }
  return c;
}

namespace detail {

NamedArray from_matrix(const std::string& name, const Matrix& m) {
  NamedArray a{name, {m.rows(), m.cols()}, {}};
  a.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  }
  return a;
}

Matrix to_matrix(const NamedArray& a) {
  if (a.shape.size() != 2) fail("bad-shape", "array '" + a.name + "' is not two-dimensional");
  Matrix m(a.shape[0], a.shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.data[static_cast<std::size_t>(r * m.cols() + c)];
  }
  return m;
}

namespace {
constexpr char kMagic[8] = {'E', 'O', 'E', 'S', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPreambleBytes = 8 + 4 + 8;
}  // namespace

void write_container(const std::filesystem::path& path, const std::string& header_json,
                     const std::vector<NamedArray>& arrays) {
  json header = json::parse(header_json);
  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    table.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.data.size()}});
    offset += a.data.size() * sizeof(double);
  }
  header["arrays"] = table;
  const std::string text = header.dump();
  const std::uint32_t version = kCheckpointFormatVersion;
  const std::uint64_t length = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("io", "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) {
    out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) fail("io", "write failed for " + path.string());
}

std::pair<std::string, std::vector<NamedArray>> read_container(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  auto need = [&](std::uint64_t offset, std::uint64_t count, const std::string& what) {
    if (offset + count > bytes.size()) {
      fail("truncated", path.string() + ": truncated at offset " + std::to_string(bytes.size()) + " while reading " +
                            what + " (needs bytes up to offset " + std::to_string(offset + count) + ")");
    }
  };
  need(0, kPreambleBytes, "preamble");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) fail("bad-magic", path.string() + " is not a checkpoint");
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  std::memcpy(&version, bytes.data() + 8, sizeof version);
  std::memcpy(&length, bytes.data() + 12, sizeof length);
  if (version != kCheckpointFormatVersion) {
    fail("version-mismatch", "checkpoint format version " + std::to_string(version) + " is not supported");
  }
  need(kPreambleBytes, length, "header");
  std::string text(reinterpret_cast<const char*>(bytes.data() + kPreambleBytes), length);
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    fail("parse-error", path.string() + ": malformed header at offset " + std::to_string(kPreambleBytes));
  }
  const std::uint64_t data_start = kPreambleBytes + length;
  std::vector<NamedArray> arrays;
  for (const auto& entry : header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    need(data_start + offset, count * sizeof(double), "array '" + a.name + "'");
    a.data.resize(count);
    std::memcpy(a.data.data(), bytes.data() + data_start + offset, count * sizeof(double));
    arrays.push_back(std::move(a));
  }
  return {std::move(text), std::move(arrays)};
}

}  // namespace detail

namespace {

std::filesystem::path history_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".history.json";
  return p;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  json header;
  header["format"] = "eoescope-checkpoint";
  header["kind"] = "checkpoint";
  header["config"] = json::parse(config_to_json(checkpoint.config()));
  header["taxonomy"] = {{"version", checkpoint.taxonomy_version}, {"classes", class_names()}};
  json sources = json::array();
  for (auto s : checkpoint.training_sources) sources.push_back(to_string(s));
  header["training_sources"] = sources;
  header["best_epoch"] = checkpoint.best_epoch;

  std::vector<detail::NamedArray> arrays;
  for (const auto& p : checkpoint.model.parameters()) arrays.push_back(detail::from_matrix(p.name, p.value));
  detail::write_container(path, header.dump(), arrays);

  json history = json::array();
  for (const auto& e : checkpoint.history) {
    json row = {{"epoch", e.epoch}, {"loss", e.loss}, {"train_f1", e.train_f1}};
    row["val_f1"] = e.val_f1 ? json(*e.val_f1) : json(nullptr);
    history.push_back(row);
  }
  std::ofstream out(history_path(path), std::ios::trunc);
  out << json{{"best_epoch", checkpoint.best_epoch}, {"epochs", history}}.dump(2) << "\n";
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto [text, arrays] = detail::read_container(path);
  const json header = json::parse(text);
  if (header.value("kind", "") != "checkpoint") fail("bad-kind", path.string() + " holds weights, not a checkpoint");
  const auto& tax = header.at("taxonomy");
  const auto classes = tax.at("classes").get<std::vector<std::string>>();
  const std::vector<std::string> ours(class_names().begin(), class_names().end());
  if (classes != ours || tax.at("version").get<std::string>() != kTaxonomyVersion) {
    fail("taxonomy-mismatch", path.string() + ": checkpoint taxonomy has " + std::to_string(classes.size()) +
                                  " classes (" + tax.at("version").get<std::string>() + "), model expects " +
                                  std::to_string(kNumClasses) + " (" + std::string(kTaxonomyVersion) + ")");
  }
  ClassifierConfig cfg = config_from_json(header.at("config").dump());
  VisionTransformer model(cfg);
  for (auto& p : model.parameters()) {
    auto it = std::find_if(arrays.begin(), arrays.end(), [&](const auto& a) { return a.name == p.name; });
    if (it == arrays.end()) fail("missing-array", path.string() + ": no array named '" + p.name + "'");
    Matrix m = detail::to_matrix(*it);
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      fail("shape-mismatch", path.string() + ": array '" + p.name + "' has the wrong shape");
    }
    p.value = std::move(m);
  }
  ModelCheckpoint ckpt{std::move(model), {}, tax.at("version").get<std::string>(), {}, header.value("best_epoch", -1)};
  for (const auto& s : header.value("training_sources", json::array())) ckpt.training_sources.push_back(parse_source(s.get<std::string>()));

  if (std::ifstream in(history_path(path)); in) {
    try {
      const json h = json::parse(in);
      for (const auto& row : h.at("epochs")) {
        EpochStats e;
        e.epoch = row.at("epoch");
        e.loss = row.at("loss");
        e.train_f1 = row.at("train_f1");
        if (!row.at("val_f1").is_null()) e.val_f1 = row.at("val_f1").get<double>();
        ckpt.history.push_back(e);
      }
    } catch (const json::exception& e) {
      fail("parse-error", "malformed history sidecar for " + path.string());
    }
  }
  return ckpt;
}

std::vector<std::string> import_pretrained(VisionTransformer& model, const std::filesystem::path& path) {
  auto [text, arrays] = detail::read_container(path);
  const json header = json::parse(text);
  if (header.value("kind", "") != "weights") fail("bad-kind", path.string() + " is not a named-array weight file");
  const auto& cfg = model.config();
  const int d = cfg.embed_dim;
  std::vector<std::string> imported;

  for (const auto& a : arrays) {
    std::string target = a.name;
    if (a.name == "patch_embed.proj.weight" || a.name == "patch_embed.proj.bias") {
      target = a.name == "patch_embed.proj.weight" ? "patch_embed.weight" : "patch_embed.bias";
    }
    auto& params = model.parameters();
    auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.name == target; });
    if (it == params.end()) continue;  // head_dist and other unused tensors
    Matrix& dst = it->value;
    const auto count = static_cast<Eigen::Index>(a.data.size());

    if (target == "patch_embed.weight") {
      const int ps = cfg.patch_size;
      if (a.shape != std::vector<std::int64_t>{d, 3, ps, ps}) fail("shape-mismatch", "patch embedding shape mismatch");
      for (int o = 0; o < d; ++o) {
        for (int c = 0; c < 3; ++c) {
          for (int y = 0; y < ps; ++y) {
            for (int x = 0; x < ps; ++x) {
              dst((y * ps + x) * 3 + c, o) = a.data[static_cast<std::size_t>(((o * 3 + c) * ps + y) * ps + x)];
            }
          }
        }
      }
    } else if (a.shape.size() == 2 && dst.rows() == a.shape[1] && dst.cols() == a.shape[0] &&
               target.find("weight") != std::string::npos && dst.rows() > 1) {
      for (Eigen::Index r = 0; r < dst.rows(); ++r) {
        for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(r, c) = a.data[static_cast<std::size_t>(c * dst.rows() + r)];
      }
    } else if (count == dst.size()) {
      // Vectors and token/position tensors share the row-major layout.
      for (Eigen::Index r = 0; r < dst.rows(); ++r) {
        for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(r, c) = a.data[static_cast<std::size_t>(r * dst.cols() + c)];
      }
    } else {
      if (target.rfind("head.", 0) == 0) continue;  // different class count
      fail("shape-mismatch", "pretrained array '" + a.name + "' does not fit the model");
    }
    imported.push_back(target);
  }
  return imported;
}

}  // namespace eoescope
