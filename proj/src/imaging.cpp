#include "spadnn/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spadnn/errors.hpp"

namespace spadnn {
namespace {

struct Taps {
  std::array<std::size_t, 4> index;
  std::array<double, 4> weight;
};

// Source taps for every destination coordinate along one axis.
std::vector<Taps> axis_taps(std::size_t in, std::size_t out, double a) {
  std::vector<Taps> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const auto last = static_cast<std::ptrdiff_t>(in) - 1;
  for (std::size_t d = 0; d < out; ++d) {
    const double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const auto idx = static_cast<std::ptrdiff_t>(base) + k - 1;
      taps[d].index[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, last));
      taps[d].weight[k] = cubic_kernel(t - static_cast<double>(k - 1), a);
    }
  }
  return taps;
}

}  // namespace

Image normalize(const Frame& frame) {
  Image img(kFrameSide, kFrameSide);
  const auto peak = *std::max_element(frame.counts.begin(), frame.counts.end());
  if (peak == 0) return img;
  for (std::size_t i = 0; i < kFramePixels; ++i)
    img.pixels[i] = static_cast<double>(frame.counts[i]) / static_cast<double>(peak);
  return img;
}

double cubic_kernel(double d, double a) {
  const double x = std::fabs(d);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

Image bicubic_resize(const Image& img, std::size_t out_rows,
                     std::size_t out_cols, double a) {
  if (out_rows < 1 || out_cols < 1)
    throw DimensionError("bicubic_resize: output extent must be >= 1, got " +
                         std::to_string(out_rows) + "x" + std::to_string(out_cols));
  if (img.rows < 2 || img.cols < 2)
    throw DimensionError("bicubic_resize: input must be at least 2x2, got " +
                         std::to_string(img.rows) + "x" + std::to_string(img.cols));
  const auto row_taps = axis_taps(img.rows, out_rows, a);
  const auto col_taps = axis_taps(img.cols, out_cols, a);

  // Horizontal pass into an in_rows x out_cols buffer, then vertical. The
  // weights sum to one, so each pass interpolates offsets from the floor tap;
  // constant images then come back bit-exact.
  Image tmp(img.rows, out_cols);
  for (std::size_t r = 0; r < img.rows; ++r)
    for (std::size_t c = 0; c < out_cols; ++c) {
      const auto& t = col_taps[c];
      const double ref = img.at(r, t.index[1]);
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += t.weight[k] * (img.at(r, t.index[k]) - ref);
      tmp.at(r, c) = ref + acc;
    }
  Image out(out_rows, out_cols);
  for (std::size_t r = 0; r < out_rows; ++r)
    for (std::size_t c = 0; c < out_cols; ++c) {
      const auto& t = row_taps[r];
      const double ref = tmp.at(t.index[1], c);
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += t.weight[k] * (tmp.at(t.index[k], c) - ref);
      out.at(r, c) = ref + acc;
    }
  return out;
}

Frame inject_ambient(const Frame& frame, double lambda_bg, Rng& rng) {
  if (!std::isfinite(lambda_bg) || lambda_bg < 0.0)
    throw DomainError("inject_ambient: lambda_bg must be finite and >= 0, got " +
                      std::to_string(lambda_bg));
  Frame out = frame;
  if (lambda_bg == 0.0) return out;
  std::poisson_distribution<std::uint64_t> background(lambda_bg);
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint32_t>::max();
  for (auto& c : out.counts)
    c = static_cast<std::uint32_t>(std::min<std::uint64_t>(kMax, c + background(rng)));
  return out;
}

}  // namespace spadnn
