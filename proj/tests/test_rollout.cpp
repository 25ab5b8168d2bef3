#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "eoescope/classifier.hpp"
#include "eoescope/error.hpp"
#include "eoescope/rollout.hpp"
#include "fixtures.hpp"

using namespace eoescope;

namespace {

Matrix rows3(std::initializer_list<double> v) {
  Matrix m(3, 3);
  auto it = v.begin();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = *it++;
  return m;
}

/// Hand-specified two-layer, one-head trace over [cls, p0, p1].
AttentionTrace two_layer_trace() {
  AttentionTrace t;
  t.layout = {1, 1, 2};
  t.attention = {{rows3({0.5, 0.25, 0.25, 0.2, 0.5, 0.3, 0.1, 0.1, 0.8})},
                 {rows3({0.6, 0.3, 0.1, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.25, 0.25, 0.5})}};
  t.gradients = {{rows3({1, 0.5, -1, 0.5, 0.5, 0.5, 1, 0, 0.5})}, {rows3({0.5, 1.5, 0, -2, 0.5, 0.5, 0.5, 0.5, 0.5})}};
  return t;
}

AttentionTrace uniform_trace(int layers, int heads, int rows, int cols, double grad) {
  AttentionTrace t;
  t.layout = {1, rows, cols};
  const int n = t.layout.num_tokens();
  for (int l = 0; l < layers; ++l) {
    t.attention.emplace_back(heads, Matrix::Constant(n, n, 1.0 / n));
    t.gradients.emplace_back(heads, Matrix::Constant(n, n, grad));
  }
  return t;
}

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

ImageTensor tensor_for(const Image& img, const ClassifierConfig& cfg) { return preprocess(img, cfg); }

}  // namespace

TEST_CASE("two-layer trace matches the brute-force oracle") {
  // Frozen from tests/oracles/eq1_two_layer.py (exact rationals).
  const auto map = rollout(two_layer_trace());
  REQUIRE(map.alphas.size() == 2);
  CHECK(map.alphas[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(map.alphas[1] == doctest::Approx(0.5).epsilon(1e-12));
  const double expected[3][3] = {{2.0 / 5, 23.0 / 80, 0.0}, {1.0 / 20, 5.0 / 24, 19.0 / 120}, {9.0 / 80, 1.0 / 16, 13.0 / 40}};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) CHECK(std::abs(map.aggregated(r, c) - expected[r][c]) <= 1e-6);
  REQUIRE(map.grid.rows() == 1);
  REQUIRE(map.grid.cols() == 2);
  CHECK(map.grid(0, 0) == doctest::Approx(1.0));
  CHECK(map.grid(0, 1) == 0.0);
  CHECK_FALSE(map.warning);
}

TEST_CASE("uniform attention and gradients give a uniform map") {
  const auto map = rollout(uniform_trace(1, 2, 3, 3, 0.7));
  for (Eigen::Index i = 0; i < map.grid.size(); ++i) CHECK(map.grid.data()[i] == doctest::Approx(1.0));
}

TEST_CASE("non-positive gradients give an all-zero map with a warning") {
  const auto map = rollout(uniform_trace(2, 2, 2, 2, -0.3));
  CHECK(map.warning);
  CHECK(map.grid.isZero(0.0));
  CHECK(map.alphas == std::vector<double>{0.0, 0.0});
}

TEST_CASE("scaling gradients leaves the normalized map unchanged") {
  auto t = two_layer_trace();
  t.gradients[0][0](0, 2) = 0.75;
  const auto base = rollout(t);
  for (auto& layer : t.gradients)
    for (auto& g : layer) g *= 3.5;
  const auto scaled = rollout(t);
  CHECK((scaled.grid - base.grid).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(scaled.alphas[0] == doctest::Approx(3.5 * base.alphas[0]));
  // Both the weight and the clamped gradient carry the factor.
  CHECK(scaled.raw(0, 0) == doctest::Approx(3.5 * 3.5 * base.raw(0, 0)));
}

TEST_CASE("multiplicative rollout of identity attention is zero over patches") {
  AttentionTrace t;
  t.layout = {1, 2, 2};
  for (int l = 0; l < 3; ++l) {
    t.attention.push_back({Matrix::Identity(5, 5)});
    t.gradients.push_back({Matrix::Constant(5, 5, 1.0)});
  }
  const auto map = rollout(t, RolloutMode::Multiplicative);
  CHECK(map.aggregated.isApprox(Matrix::Identity(5, 5)));
  CHECK(map.warning);
  CHECK(map.grid.isZero(0.0));
}

TEST_CASE("trace validation and readout errors") {
  auto t = two_layer_trace();
  t.attention[0][0](0, 0) += 1e-3;
  CHECK(error_code([&] { rollout(t); }) == "invalid-trace");
  t = two_layer_trace();
  t.gradients[1][0] = Matrix::Zero(2, 2);
  CHECK(error_code([&] { rollout(t); }) == "invalid-trace");
  CHECK(error_code([&] { rollout(two_layer_trace(), RolloutMode::Eq1, Readout::Distillation); }) ==
        "no-distillation-token");
  CHECK(parse_rollout_mode("multiplicative") == RolloutMode::Multiplicative);
  CHECK(error_code([] { parse_rollout_mode("grad-cam"); }) == "unknown-mode");
}

TEST_CASE("capture shapes, softmax rows and dead heads") {
  const auto cfg = fixtures::tiny_config();
  VisionTransformer model(cfg);
  initialize(model, 21);
  // Zero the projection rows fed by head 1 of block 0: that head cannot affect the logits.
  auto& proj = model.parameter("blocks.0.attn.proj.weight").value;
  proj.middleRows(cfg.head_dim(), cfg.head_dim()).setZero();

  const auto x = tensor_for(fixtures::pattern_image(32, 32, 8), cfg);
  const auto trace = capture(model, x, 3);
  REQUIRE(trace.layers() == 2);
  CHECK(trace.layout.prefix_tokens == 2);
  CHECK(trace.layout.grid_rows == 4);
  for (const auto& layer : trace.attention) {
    REQUIRE(layer.size() == 2);
    for (const auto& a : layer) {
      CHECK(a.rows() == 18);
      for (int r = 0; r < a.rows(); ++r) CHECK(std::abs(a.row(r).sum() - 1.0) <= 1e-5);
    }
  }
  CHECK(trace.gradients[0][1].isZero(0.0));
  CHECK_FALSE(trace.gradients[0][0].isZero(0.0));
  CHECK(error_code([&] { capture(model, x, 11); }) == "invalid-target");

  const auto map = rollout(trace);
  CHECK(map.grid.rows() == 4);
  CHECK(map.grid.cols() == 4);
  CHECK(map.grid.maxCoeff() == doctest::Approx(1.0));
  CHECK(map.grid.minCoeff() >= 0.0);
  const auto dist = rollout(trace, RolloutMode::Eq1, Readout::Distillation);
  CHECK(dist.grid.maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("captured gradients are those of the target logit") {
  const auto cfg = fixtures::tiny_config();
  VisionTransformer model(cfg);
  initialize(model, 5);
  const auto x = tensor_for(fixtures::pattern_image(32, 32, 2), cfg);
  ForwardCache cache;
  model.forward(x, cache);
  Vector e = Vector::Zero(11);
  e[4] = 2.0;
  AttentionGradients doubled;
  model.backward(cache, e, nullptr, &doubled);
  const auto trace = capture(model, x, 4);
  for (std::size_t l = 0; l < trace.layers(); ++l)
    for (std::size_t h = 0; h < 2; ++h) CHECK(doubled[l][h].isApprox(2.0 * trace.gradients[l][h]));
}

TEST_CASE("viridis samples match the reference ramp") {
  // Frozen from tests/oracles/overlay.py (linear interpolation of the 256-entry table).
  const std::pair<double, std::array<float, 3>> refs[] = {
      {0.0, {0.267004f, 0.004874f, 0.329415f}}, {0.1, {0.282456f, 0.143419f, 0.459514f}},
      {0.25, {0.230223f, 0.321297f, 0.545488f}}, {0.5, {0.128148f, 0.565107f, 0.550893f}},
      {0.75, {0.362859f, 0.786695f, 0.386589f}}, {0.9, {0.736139f, 0.872683f, 0.152795f}},
      {1.0, {0.993248f, 0.906157f, 0.143936f}}};
  for (const auto& [t, rgb] : refs) {
    const auto got = viridis(t);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(got[c] - rgb[c]) <= 1e-5);
  }
}

TEST_CASE("bilinear upsampling and blending") {
  Matrix grid(2, 2);
  grid << 0.0, 0.25, 0.5, 1.0;
  const Matrix up = upsample_bilinear(grid, 8, 8);
  CHECK(up(0, 0) == doctest::Approx(0.0));
  CHECK(up(3, 4) == doctest::Approx(0.40234375));
  CHECK(up(4, 4) == doctest::Approx(0.56640625));
  CHECK(up(2, 5) == doctest::Approx(0.30859375));
  CHECK(up(7, 7) == doctest::Approx(1.0));
  CHECK(error_code([] { upsample_bilinear(Matrix(), 4, 4); }) == "empty-map");

  RolloutMap map;
  map.grid = grid;
  const Image img(8, 8, 0.4f);
  const Image out = render_overlay(img, map, 0.5);
  CHECK(out.width == 8);
  CHECK(out.height == 8);
  const std::array<float, 3> at77{0.696624f, 0.653079f, 0.271968f};
  const std::array<float, 3> at34{0.281369f, 0.436674f, 0.479072f};
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(out.at(7, 7, c) - at77[c]) <= 1e-5);
    CHECK(std::abs(out.at(3, 4, c) - at34[c]) <= 1e-5);
  }
}

TEST_CASE("zero map blends with the ramp's zero color") {
  RolloutMap map;
  map.grid = Matrix::Zero(4, 4);
  const Image img = fixtures::pattern_image(32, 32, 3);
  const Image out = render_overlay(img, map, 0.5);
  const auto zero = viridis(0.0);
  for (int y = 0; y < 32; y += 5)
    for (int x = 0; x < 32; x += 3)
      for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == doctest::Approx(0.5 * img.at(y, x, c) + 0.5 * zero[c]));
}

TEST_CASE("single-hot map peaks inside its patch") {
  for (int cell = 0; cell < 16; ++cell) {
    RolloutMap map;
    map.grid = Matrix::Zero(4, 4);
    map.grid(cell / 4, cell % 4) = 1.0;
    const Image out = render_overlay(Image(32, 32, 0.0f), map, 1.0);
    // Viridis luminance grows with t; use the green channel as the peak detector.
    int by = 0, bx = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (out.at(y, x, 1) > out.at(by, bx, 1)) by = y, bx = x;
    CHECK(by / 8 == cell / 4);
    CHECK(bx / 8 == cell % 4);
  }
}

TEST_CASE("map json records metadata") {
  const auto j = nlohmann::json::parse(map_to_json(rollout(two_layer_trace())));
  CHECK(j["mode"] == "eq1");
  CHECK(j["colormap"] == "viridis");
  CHECK(j["upsampling"] == "bilinear");
  CHECK(j["grid"][0][0] == 1.0);
  CHECK(j["alphas"].size() == 2);
}

TEST_CASE("overlay golden file is byte identical") {
  const auto cfg = fixtures::tiny_config();
  VisionTransformer model(cfg);
  initialize(model, 2024);
  const Image img = fit_to_model(fixtures::pattern_image(48, 40, 17), cfg);
  const auto map = rollout(capture(model, preprocess(img, cfg), 3));
  const auto png = encode_png(render_overlay(img, map, 0.5));
  const std::filesystem::path golden = std::filesystem::path(EOESCOPE_TEST_DATA) / "overlay_golden.png";
  if (std::getenv("EOESCOPE_WRITE_GOLDEN")) write_file(golden, png);
  REQUIRE(std::filesystem::exists(golden));
  CHECK(read_file(golden) == png);
  CHECK(encode_png(render_overlay(img, rollout(capture(model, preprocess(img, cfg), 3)), 0.5)) == png);
}
