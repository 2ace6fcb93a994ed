#pragma once

#include <cstddef>
#include <vector>

#include "spadnn/frame.hpp"
#include "spadnn/util.hpp"

namespace spadnn {

// Row-major single-channel real image.
struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), pixels(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
};

// Keys cubic-convolution parameter.
inline constexpr double kKeysA = -0.5;

// Divides every count by the frame maximum; an all-zero frame stays zero.
Image normalize(const Frame& frame);

// Keys cubic convolution kernel W(d).
double cubic_kernel(double d, double a = kKeysA);

// Separable bicubic resampling with half-pixel centre alignment
// (src = (dst + 0.5) * in/out - 0.5) and clamp-to-edge sampling.
Image bicubic_resize(const Image& img, std::size_t out_rows,
                     std::size_t out_cols, double a = kKeysA);

// Adds an independent Poisson(lambda_bg) background count to every pixel.
Frame inject_ambient(const Frame& frame, double lambda_bg, Rng& rng);

}  // namespace spadnn
