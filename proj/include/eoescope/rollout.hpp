#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "eoescope/image.hpp"
#include "eoescope/vit.hpp"

namespace eoescope {

/// Which token indices are prefix (class, distillation) and which form the patch grid.
struct TokenLayout {
  int prefix_tokens = 1;  // class token at 0, distillation token at 1 when present
  int grid_rows = 0;
  int grid_cols = 0;

  int num_tokens() const { return prefix_tokens + grid_rows * grid_cols; }
  bool has_distillation() const { return prefix_tokens >= 2; }
};

/// Per-layer, per-head post-softmax attention and d(target logit)/d(attention).
struct AttentionTrace {
  std::vector<std::vector<Matrix>> attention;  // [layer][head], T x T
  std::vector<std::vector<Matrix>> gradients;  // same shape
  TokenLayout layout;
  int target = 0;

  std::size_t layers() const { return attention.size(); }
  /// Throws Error{"rollout","invalid-trace"} on shape mismatches or attention
  /// rows not summing to 1 within 1e-5.
  void validate() const;
};

/// Runs a forward and a backward pass of the target logit.
AttentionTrace capture(const VisionTransformer& model, const ImageTensor& input, int target);

enum class RolloutMode { Eq1, Multiplicative };
enum class Readout { Class, Distillation };

std::string_view to_string(RolloutMode mode);
RolloutMode parse_rollout_mode(std::string_view text);

struct RolloutMap {
  RolloutMode mode = RolloutMode::Eq1;
  Readout readout = Readout::Class;
  std::vector<double> alphas;  // per layer
  Matrix aggregated;           // T x T, before readout
  Matrix raw;                  // patch grid before normalization
  Matrix grid;                 // patch grid, max-normalized
  bool warning = false;        // all-zero map
};

/// Eq1: A = sum_l alpha_l * mean_h(max(G,0) .* A_l), alpha_l = mean of max(G,0)
/// over heads and entries. Multiplicative: prod_l rownorm(Atilde_l + I), later
/// layers on the left. The readout row is restricted to patch tokens, reshaped
/// to the grid and divided by its maximum.
RolloutMap rollout(const AttentionTrace& trace, RolloutMode mode = RolloutMode::Eq1, Readout readout = Readout::Class);

inline constexpr std::string_view kOverlayColormap = "viridis";
inline constexpr std::string_view kOverlayUpsampling = "bilinear";

/// Colormap lookup for t in [0, 1].
std::array<float, 3> viridis(double t);

/// Bilinear upsample of a grid to width x height (half-pixel centers).
Matrix upsample_bilinear(const Matrix& grid, int width, int height);

/// Colorized map alpha-blended over the image: (1 - alpha) * image + alpha * color.
Image render_overlay(const Image& image, const RolloutMap& map, double alpha = 0.5);

/// Structured text: grid matrix, alphas, mode, readout, colormap, upsampling.
std::string map_to_json(const RolloutMap& map);

}  // namespace eoescope
