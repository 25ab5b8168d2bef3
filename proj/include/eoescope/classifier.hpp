#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eoescope/image.hpp"
#include "eoescope/ingestion.hpp"
#include "eoescope/manifest.hpp"
#include "eoescope/rng.hpp"
#include "eoescope/vit.hpp"

namespace eoescope {

// -- preprocessing ---------------------------------------------------------

inline constexpr int kMinInputSide = 32;

/// Bilinear resize to the model resolution followed by per-channel
/// normalization with the configured mean/std.
ImageTensor preprocess(const Image& image, const ClassifierConfig& config);
/// Decodes, rejects rasters smaller than 32x32, then preprocesses.
ImageTensor preprocess(std::span<const std::uint8_t> bytes, const ClassifierConfig& config);

/// Resized, un-normalized image used for augmentation and overlays.
Image fit_to_model(const Image& image, const ClassifierConfig& config);

// -- augmentation ----------------------------------------------------------

struct AugmentationPolicy {
  double flip_probability = 0.5;
  double max_rotation_degrees = 90.0;
  double blur_probability = 1.0;
  int blur_kernel = 5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  double brightness = 0.1;
  double contrast = 0.1;
  double saturation = 0.1;
  double hue = 0.02;

  void validate() const;
  /// Everything off except the mandatory blur.
  static AugmentationPolicy minimal();

  friend bool operator==(const AugmentationPolicy&, const AugmentationPolicy&) = default;
};

/// Instrumentation points, called once per augment() for each stage.
struct AugmentHooks {
  std::function<void(bool flipped)> on_flip;
  std::function<void(double degrees)> on_rotate;
  std::function<void(bool applied, double sigma)> on_blur;
  std::function<void(double brightness, double contrast, double saturation, double hue)> on_jitter;
};

/// Horizontal flip, rotation uniform in [-max, max], Gaussian blur, then
/// brightness/contrast/saturation/hue jitter. Shape is preserved.
Image augment(const Image& image, const AugmentationPolicy& policy, Rng& rng, const AugmentHooks* hooks = nullptr);

Image gaussian_blur(const Image& image, int kernel, double sigma);
Image flip_horizontal(const Image& image);

// -- training --------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_f1 = 0.0;
  std::optional<double> val_f1;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct ModelCheckpoint {
  VisionTransformer model;
  std::vector<EpochStats> history;
  std::string taxonomy_version = std::string(kTaxonomyVersion);
  std::vector<SourceType> training_sources;
  int best_epoch = -1;

  const ClassifierConfig& config() const { return model.config(); }
};

/// Loads the bytes of a record; the default reads `record.uri` from disk.
using RecordLoader = std::function<std::vector<std::uint8_t>(const ImageRecord&)>;
std::vector<std::uint8_t> load_record_bytes(const ImageRecord& record);

struct TrainOptions {
  bool augment = true;
  RecordLoader loader = load_record_bytes;
  std::function<void(const EpochStats&)> on_epoch;
  /// Stop once the epoch's training micro-F1 reaches this value.
  std::optional<double> stop_at_train_f1;
};

/// Positive-class weights: negatives/positives clamped to [1, max]; classes
/// without positives get 1.
Vector positive_weights(std::span<const LabelVector> labels, double max_weight);

/// Adam on mean per-class BCE over the manifest's train split. Keeps the
/// weights of the epoch with the best validation micro-F1 (training micro-F1
/// when there is no validation split). Throws on an empty train split and on
/// a non-finite loss, naming the epoch.
ModelCheckpoint train(VisionTransformer model, const DatasetManifest& manifest, const AugmentationPolicy& policy,
                      const TrainOptions& options = {});

// -- prediction ------------------------------------------------------------

struct Prediction {
  std::array<double, kNumClasses> probabilities{};
  LabelVector labels;  // may be all-zero
  std::string model_version;
};

Prediction predict_from_logits(const Vector& logits, double threshold, std::string model_version = {});
Prediction predict(const VisionTransformer& model, const ImageTensor& input, double threshold);
Prediction predict(const VisionTransformer& model, const Image& image, double threshold);
Prediction predict(const VisionTransformer& model, std::span<const std::uint8_t> bytes, double threshold);

/// Fingerprint of the weights, used as model version string.
std::string model_version(const VisionTransformer& model);

/// Relevance = highest class probability of a classifier; an endoscopic image
/// shows at least one upper-GI finding with confidence.
class ClassifierRelevanceScorer final : public RelevanceScorer {
 public:
  explicit ClassifierRelevanceScorer(const VisionTransformer& model) : model_(model), version_(model_version(model)) {}
  double score(const CandidateImage& candidate) override;
  std::string version() const override { return "classifier-max-prob/" + version_; }

 private:
  const VisionTransformer& model_;
  std::string version_;
};

// -- checkpoints -----------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;

/// Binary container: 8-byte magic, u32 format version, u64 header length,
/// JSON header (config, taxonomy, array table), then little-endian float64
/// arrays. Training history goes to `<path>.history.json`.
void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

namespace detail {
/// N-dimensional float64 array, row-major.
struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> data;
};
NamedArray from_matrix(const std::string& name, const Matrix& m);
Matrix to_matrix(const NamedArray& array);
void write_container(const std::filesystem::path& path, const std::string& header_json,
                     const std::vector<NamedArray>& arrays);
/// Returns the header JSON text and the arrays; throws naming the offset on truncation.
std::pair<std::string, std::vector<NamedArray>> read_container(const std::filesystem::path& path);
}  // namespace detail

/// Copies weights from a named-array file (same container, "kind": "weights")
/// using timm/DeiT parameter names and PyTorch layouts; see README for the
/// mapping. Returns the names that were imported.
std::vector<std::string> import_pretrained(VisionTransformer& model, const std::filesystem::path& path);

std::string config_to_json(const ClassifierConfig& config);
ClassifierConfig config_from_json(const std::string& text);

}  // namespace eoescope
