#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spadnn/frame.hpp"

namespace spadnn {

inline constexpr int kManifestVersion = 1;

struct DatasetManifest {
  int version = kManifestVersion;
  std::vector<std::string> class_names;
  std::vector<std::size_t> frames_per_class;
  std::optional<std::uint64_t> seed;
  std::string source = "synthetic";  // "released" | "synthetic"

  std::size_t num_classes() const { return class_names.size(); }
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
  std::vector<Frame> frames;
  DatasetManifest manifest;
};

// Native layout: <dir>/manifest (JSON) and <dir>/frames.csv with header
// "label,c00,...,c77", one frame per row, counts as decimal integers.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

std::string frames_to_csv(const std::vector<Frame>& frames);
std::vector<Frame> frames_from_csv(const std::string& text);
std::string manifest_to_text(const DatasetManifest& m);
DatasetManifest manifest_from_text(const std::string& text);

// Per-class counts recomputed from the labels.
std::vector<std::size_t> class_histogram(const std::vector<Frame>& frames,
                                         std::size_t num_classes);

// Converts a copy of the publicly released gesture recordings into the native
// format. Accepted layout: one sub-directory per class, each holding text
// files (.csv/.txt) of photon counts, 64 values per frame, either one frame
// per row or 8 rows of 8. Class ids follow the lexicographic order of the
// sub-directory names, except that a directory named like "no_gesture" /
// "none" / "background" is placed last.
Dataset import_released(const std::filesystem::path& dir);

struct SyntheticGestureConfig {
  double rotation_deg = 30.0;     // uniform in [-rotation_deg, rotation_deg]
  double photon_budget = 400.0;   // expected signal counts of a fully covered pixel
  double background = 3.0;        // mean dark counts per pixel
  std::size_t render_side = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::size_t kSyntheticClasses = 11;
std::vector<std::string> synthetic_class_names();

// Renders a palm ellipse plus finger bars (one finger set per class; the last
// class is background only), applies a seeded rotation and small placement
// jitter, box-downsamples the occupancy to 8x8, scales by the photon budget
// and draws per-pixel Poisson counts.
Dataset synth_generate(const SyntheticGestureConfig& cfg, std::size_t per_class);

// Stratified shuffle split; part A receives round(ratio * n_c) frames of
// every class c (clamped to [1, n_c - 1]). Both parts keep input order.
std::pair<std::vector<Frame>, std::vector<Frame>> split(
    const std::vector<Frame>& frames, double ratio, std::uint64_t seed);

}  // namespace spadnn
