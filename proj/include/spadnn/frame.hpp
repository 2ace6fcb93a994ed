#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace spadnn {

inline constexpr std::size_t kFrameSide = 8;
inline constexpr std::size_t kFramePixels = kFrameSide * kFrameSide;
inline constexpr int kUnlabeled = -1;

// One 8x8 photon-count image from the sensor, row-major.
struct Frame {
  std::array<std::uint32_t, kFramePixels> counts{};
  int label = kUnlabeled;

  bool labeled() const { return label >= 0; }
  std::uint32_t at(std::size_t row, std::size_t col) const {
    return counts[row * kFrameSide + col];
  }
  friend bool operator==(const Frame&, const Frame&) = default;
};

}  // namespace spadnn
