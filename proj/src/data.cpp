#include "spadnn/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <sstream>

#include "spadnn/errors.hpp"
#include "spadnn/util.hpp"

namespace spadnn {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string csv_header() {
  std::string h = "label";
  for (std::size_t r = 0; r < kFrameSide; ++r)
    for (std::size_t c = 0; c < kFrameSide; ++c)
      h += ",c" + std::to_string(r) + std::to_string(c);
  return h;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// Fisher-Yates with a portable index draw.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace

std::string frames_to_csv(const std::vector<Frame>& frames) {
  std::string out = csv_header() + "\n";
  for (const auto& f : frames) {
    if (f.labeled()) out += std::to_string(f.label);
    for (auto c : f.counts) {
      out += ',';
      out += std::to_string(c);
    }
    out += '\n';
  }
  return out;
}

std::vector<Frame> frames_from_csv(const std::string& text) {
  std::vector<Frame> frames;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != csv_header())
        throw ParseError("frames.csv line 1: expected header 'label,c00..c77'");
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != kFramePixels + 1)
      throw ParseError("frames.csv line " + std::to_string(lineno) + ": expected " +
                       std::to_string(kFramePixels) + " counts, got " +
                       std::to_string(fields.size() - 1));
    Frame f;
    if (!fields[0].empty() && (!parse_int(fields[0], f.label) || f.label < 0))
      throw ParseError("frames.csv line " + std::to_string(lineno) + ": bad label '" +
                       std::string(fields[0]) + "'");
    for (std::size_t i = 0; i < kFramePixels; ++i)
      if (!parse_int(fields[i + 1], f.counts[i]))
        throw ParseError("frames.csv line " + std::to_string(lineno) + ": bad count '" +
                         std::string(fields[i + 1]) + "' in column " +
                         std::to_string(i + 2));
    frames.push_back(f);
  }
  if (lineno == 0) throw ParseError("frames.csv line 1: missing header");
  return frames;
}

std::string manifest_to_text(const DatasetManifest& m) {
  json j;
  j["version"] = m.version;
  j["source"] = m.source;
  if (m.seed) j["seed"] = *m.seed;
  j["class_names"] = m.class_names;
  j["frames_per_class"] = m.frames_per_class;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_text(const std::string& text) {
  DatasetManifest m;
  try {
    const auto j = json::parse(text);
    m.version = j.at("version").get<int>();
    m.source = j.at("source").get<std::string>();
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.frames_per_class = j.at("frames_per_class").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest malformed: ") + e.what());
  }
  if (m.version != kManifestVersion)
    throw FormatError("unsupported manifest version " + std::to_string(m.version));
  if (m.class_names.size() < 2)
    throw ValidationError("manifest must declare at least 2 classes");
  if (m.frames_per_class.size() != m.class_names.size())
    throw ValidationError("manifest frames_per_class has " +
                          std::to_string(m.frames_per_class.size()) + " entries for " +
                          std::to_string(m.class_names.size()) + " classes");
  if (m.source != "released" && m.source != "synthetic")
    throw ValidationError("manifest source must be 'released' or 'synthetic'");
  return m;
}

std::vector<std::size_t> class_histogram(const std::vector<Frame>& frames,
                                         std::size_t num_classes) {
  std::vector<std::size_t> h(num_classes, 0);
  for (const auto& f : frames)
    if (f.labeled() && static_cast<std::size_t>(f.label) < num_classes) ++h[f.label];
  return h;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  if (!fs::exists(dir / "manifest"))
    throw FormatError("dataset " + dir.string() + " has no manifest");
  if (!fs::exists(dir / "frames.csv"))
    throw FormatError("dataset " + dir.string() + " has no frames.csv");
  Dataset ds;
  ds.manifest = manifest_from_text(read_file(dir / "manifest"));
  ds.frames = frames_from_csv(read_file(dir / "frames.csv"));
  const auto k = ds.manifest.num_classes();
  for (std::size_t i = 0; i < ds.frames.size(); ++i)
    if (ds.frames[i].labeled() && static_cast<std::size_t>(ds.frames[i].label) >= k)
      throw ValidationError("frames.csv line " + std::to_string(i + 2) + ": label " +
                            std::to_string(ds.frames[i].label) + " >= class count " +
                            std::to_string(k));
  if (class_histogram(ds.frames, k) != ds.manifest.frames_per_class)
    throw ValidationError("frames.csv class counts disagree with the manifest");
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("cannot create dataset directory " + dir.string());
  write_file_atomic(dir / "frames.csv", frames_to_csv(ds.frames));
  write_file_atomic(dir / "manifest", manifest_to_text(ds.manifest));
}

// ---------------------------------------------------------------------------
// Released-dataset import

namespace {

const char* kReleasedLayout =
    "expected <dir>/<class_name>/*.csv|*.txt, one sub-directory per class, "
    "each file holding frames of 64 photon counts (one frame per row, or 8 rows "
    "of 8 values)";

bool is_background_name(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return name == "no_gesture" || name == "nogesture" || name == "no-gesture" ||
         name == "none" || name == "background" || name == "empty";
}

std::vector<double> parse_numbers(const std::string& line, bool& numeric) {
  std::vector<double> out;
  numeric = true;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) numeric = false;
    else out.push_back(v);
    tok.clear();
  };
  for (char c : line) {
    if (c == ',' || c == ';' || c == ' ' || c == '\t' || c == '\r') flush();
    else tok.push_back(c);
  }
  flush();
  return out;
}

std::vector<Frame> frames_from_text_file(const fs::path& path, int label) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<double> pending;
  std::vector<Frame> frames;
  std::size_t lineno = 0;
  auto emit = [&](std::span<const double> values) {
    Frame f;
    f.label = label;
    for (std::size_t i = 0; i < kFramePixels; ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0)
        throw ImportError(path.string() + " line " + std::to_string(lineno) +
                          ": photon counts must be finite and non-negative");
      f.counts[i] = static_cast<std::uint32_t>(std::llround(values[i]));
    }
    frames.push_back(f);
  };
  while (std::getline(in, line)) {
    ++lineno;
    bool numeric = true;
    auto values = parse_numbers(line, numeric);
    if (!numeric) {
      if (frames.empty() && pending.empty()) continue;  // header row
      throw ImportError(path.string() + " line " + std::to_string(lineno) +
                        ": non-numeric value");
    }
    if (values.empty()) continue;
    if (values.size() == kFramePixels && pending.empty()) {
      emit(values);
    } else if (values.size() == kFrameSide) {
      pending.insert(pending.end(), values.begin(), values.end());
      if (pending.size() == kFramePixels) {
        emit(pending);
        pending.clear();
      }
    } else {
      throw ImportError(path.string() + " line " + std::to_string(lineno) + ": " +
                        std::to_string(values.size()) + " values; " + kReleasedLayout);
    }
  }
  if (!pending.empty())
    throw ImportError(path.string() + ": trailing partial frame; " + kReleasedLayout);
  return frames;
}

}  // namespace

Dataset import_released(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw ImportError("released dataset not found at " + dir.string() + "; " +
                      kReleasedLayout);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::stable_partition(names.begin(), names.end(),
                        [](const std::string& n) { return !is_background_name(n); });
  if (names.size() < 2)
    throw ImportError("unrecognised layout in " + dir.string() + "; " + kReleasedLayout);

  Dataset ds;
  ds.manifest.source = "released";
  ds.manifest.class_names = names;
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / names[c])) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".csv" || ext == ".txt")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw ImportError("class directory " + (dir / names[c]).string() +
                        " has no .csv/.txt files; " + kReleasedLayout);
    for (const auto& f : files) {
      auto frames = frames_from_text_file(f, static_cast<int>(c));
      ds.frames.insert(ds.frames.end(), frames.begin(), frames.end());
    }
  }
  ds.manifest.frames_per_class = class_histogram(ds.frames, names.size());
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic gestures

void SyntheticGestureConfig::validate() const {
  if (!(photon_budget > 0.0) || !std::isfinite(photon_budget))
    throw ValidationError("photon budget must be positive");
  if (!(background >= 0.0) || !std::isfinite(background))
    throw ValidationError("background level must be >= 0");
  if (!(rotation_deg >= 0.0 && rotation_deg <= 180.0))
    throw ValidationError("rotation range must lie within [-180, 180] degrees");
  if (render_side < kFrameSide || render_side % kFrameSide != 0)
    throw ValidationError("render side must be a positive multiple of 8");
}

std::vector<std::string> synthetic_class_names() {
  return {"fist",  "one",  "two",  "three", "four",      "five",
          "thumb", "call", "rock", "ell",   "no_gesture"};
}

namespace {

// Finger order: thumb, index, middle, ring, pinky.
constexpr std::array<std::array<bool, 5>, kSyntheticClasses - 1> kFingerSets{{
    {false, false, false, false, false},
    {false, true, false, false, false},
    {false, true, true, false, false},
    {false, true, true, true, false},
    {false, true, true, true, true},
    {true, true, true, true, true},
    {true, false, false, false, false},
    {true, false, false, false, true},
    {false, true, false, false, true},
    {true, true, false, false, false},
}};

struct Finger {
  double angle_deg;  // from vertical, positive towards the pinky side
  double base_x;     // attachment point relative to palm centre (units of palm rx)
  double length;     // in units of render_side
};

constexpr std::array<Finger, 5> kFingers{{
    {-65.0, -0.95, 0.20},
    {-12.0, -0.55, 0.28},
    {0.0, -0.10, 0.31},
    {12.0, 0.35, 0.28},
    {25.0, 0.80, 0.22},
}};

std::array<double, kFramePixels> render_occupancy(std::size_t cls, double theta,
                                                  double dx, double dy, double scale,
                                                  std::size_t side) {
  std::array<double, kFramePixels> occ{};
  if (cls >= kFingerSets.size()) return occ;
  const double s = static_cast<double>(side);
  const double cx = 0.5 * s + dx, cy = 0.55 * s + dy;
  const double rx = 0.17 * s * scale, ry = 0.19 * s * scale;
  const double width = 0.085 * s * scale;
  const double ct = std::cos(theta), st = std::sin(theta);
  const std::size_t block = side / kFrameSide;
  const double inv_block_area = 1.0 / static_cast<double>(block * block);

  for (std::size_t py = 0; py < side; ++py) {
    for (std::size_t px = 0; px < side; ++px) {
      // Rotate the sample point into the hand frame.
      const double ux = static_cast<double>(px) + 0.5 - cx;
      const double uy = static_cast<double>(py) + 0.5 - cy;
      const double hx = ct * ux + st * uy;
      const double hy = -st * ux + ct * uy;
      bool inside = (hx * hx) / (rx * rx) + (hy * hy) / (ry * ry) <= 1.0;
      for (std::size_t f = 0; f < 5 && !inside; ++f) {
        if (!kFingerSets[cls][f]) continue;
        const auto& fg = kFingers[f];
        const double a = fg.angle_deg * std::numbers::pi / 180.0;
        const double dirx = std::sin(a), diry = -std::cos(a);
        const double bx = fg.base_x * rx, by = -0.55 * ry;
        const double len = fg.length * s * scale + 0.55 * ry;
        const double vx = hx - bx, vy = hy - by;
        const double along = vx * dirx + vy * diry;
        const double across = std::fabs(-vx * diry + vy * dirx);
        inside = along >= 0.0 && along <= len && across <= 0.5 * width;
      }
      if (inside)
        occ[(py / block) * kFrameSide + px / block] += inv_block_area;
    }
  }
  return occ;
}

}  // namespace

Dataset synth_generate(const SyntheticGestureConfig& cfg, std::size_t per_class) {
  cfg.validate();
  if (per_class < 1) throw ValidationError("frames per class must be >= 1");
  std::vector<std::vector<Frame>> by_class(kSyntheticClasses);
  for (std::size_t c = 0; c < kSyntheticClasses; ++c) {
    Rng rng(derive_seed(cfg.seed, {0x5ea1, c}));
    for (std::size_t i = 0; i < per_class; ++i) {
      const double theta =
          (2.0 * uniform01(rng) - 1.0) * cfg.rotation_deg * std::numbers::pi / 180.0;
      const double side = static_cast<double>(cfg.render_side);
      const double dx = (2.0 * uniform01(rng) - 1.0) * 0.05 * side;
      const double dy = (2.0 * uniform01(rng) - 1.0) * 0.05 * side;
      const double scale = 0.9 + 0.2 * uniform01(rng);
      const double gain = 0.7 + 0.6 * uniform01(rng);
      const auto occ = render_occupancy(c, theta, dx, dy, scale, cfg.render_side);
      Frame f;
      f.label = static_cast<int>(c);
      for (std::size_t p = 0; p < kFramePixels; ++p) {
        const double mean = cfg.background + cfg.photon_budget * gain * occ[p];
        if (mean > 0.0) {
          std::poisson_distribution<std::uint32_t> draw(mean);
          f.counts[p] = draw(rng);
        }
      }
      by_class[c].push_back(f);
    }
  }
  Dataset ds;
  ds.frames.reserve(per_class * kSyntheticClasses);
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < kSyntheticClasses; ++c) ds.frames.push_back(by_class[c][i]);
  ds.manifest.source = "synthetic";
  ds.manifest.seed = cfg.seed;
  ds.manifest.class_names = synthetic_class_names();
  ds.manifest.frames_per_class.assign(kSyntheticClasses, per_class);
  return ds;
}

// ---------------------------------------------------------------------------

std::pair<std::vector<Frame>, std::vector<Frame>> split(const std::vector<Frame>& frames,
                                                        double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw DataError("split ratio must lie in (0,1), got " + std::to_string(ratio));
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].labeled()) throw DataError("cannot stratify unlabeled frames");
    by_class[frames[i].label].push_back(i);
  }
  std::vector<bool> in_a(frames.size(), false);
  for (auto& [label, idx] : by_class) {
    if (idx.size() < 2)
      throw DataError("class " + std::to_string(label) + " has " +
                      std::to_string(idx.size()) + " frame(s); both split parts need one");
    Rng rng(derive_seed(seed, {0x5917, static_cast<std::uint64_t>(label)}));
    shuffle_in_place(idx, rng);
    auto n_a = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    n_a = std::clamp<std::size_t>(n_a, 1, idx.size() - 1);
    for (std::size_t k = 0; k < n_a; ++k) in_a[idx[k]] = true;
  }
  std::pair<std::vector<Frame>, std::vector<Frame>> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    (in_a[i] ? out.first : out.second).push_back(frames[i]);
  return out;
}

}  // namespace spadnn
