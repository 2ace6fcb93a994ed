#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "spadnn/data.hpp"
#include "spadnn/errors.hpp"
#include "spadnn/imaging.hpp"
#include "spadnn/util.hpp"

using namespace spadnn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("spadnn_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

std::string header() {
  std::string h = "label";
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) h += ",c" + std::to_string(r) + std::to_string(c);
  return h + "\n";
}

std::string row(int label, std::size_t n, std::uint32_t v = 1) {
  std::string s = std::to_string(label);
  for (std::size_t i = 0; i < n; ++i) s += "," + std::to_string(v + i);
  return s + "\n";
}

std::string manifest_for(std::vector<std::size_t> counts) {
  DatasetManifest m;
  for (std::size_t i = 0; i < counts.size(); ++i) m.class_names.push_back("c" + std::to_string(i));
  m.frames_per_class = counts;
  return manifest_to_text(m);
}

std::map<int, std::size_t> per_label(const std::vector<Frame>& fs) {
  std::map<int, std::size_t> m;
  for (const auto& f : fs) ++m[f.label];
  return m;
}

Dataset synth(std::size_t per_class, std::uint64_t seed) {
  SyntheticGestureConfig cfg;
  cfg.seed = seed;
  return synth_generate(cfg, per_class);
}

}  // namespace

TEST(LoadDataset, TwoRows) {
  auto dir = temp_dir("two");
  write_text(dir / "frames.csv", header() + row(0, 64) + row(1, 64, 7));
  write_text(dir / "manifest", manifest_for({1, 1}));
  auto ds = load_dataset(dir);
  ASSERT_EQ(ds.frames.size(), 2u);
  EXPECT_EQ(ds.frames[1].label, 1);
  EXPECT_EQ(ds.frames[1].counts[63], 70u);
}

TEST(LoadDataset, ShortRowNamesTheLine) {
  auto dir = temp_dir("short");
  write_text(dir / "frames.csv", header() + row(0, 64) + row(1, 63));
  write_text(dir / "manifest", manifest_for({1, 1}));
  try {
    load_dataset(dir);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, Errors) {
  EXPECT_THROW(load_dataset(fs::temp_directory_path() / "spadnn_no_such_dataset"), IoError);
  auto dir = temp_dir("errs");
  write_text(dir / "frames.csv", header() + row(0, 64));
  EXPECT_THROW(load_dataset(dir), FormatError);
  write_text(dir / "manifest", manifest_for({2, 0}));
  EXPECT_THROW(load_dataset(dir), ValidationError);
  write_text(dir / "frames.csv", header() + row(5, 64));
  write_text(dir / "manifest", manifest_for({1, 0}));
  EXPECT_THROW(load_dataset(dir), ValidationError);
  std::string negative = "0,-1";
  for (int i = 0; i < 63; ++i) negative += ",1";
  write_text(dir / "frames.csv", header() + negative + "\n");
  EXPECT_THROW(load_dataset(dir), ParseError);
}

TEST(LoadDataset, RoundTripIsLossless) {
  auto ds = synth(5, 3);
  ds.frames[0].counts[0] = 4000000000u;
  ds.manifest.frames_per_class = class_histogram(ds.frames, 11);
  auto dir = temp_dir("roundtrip");
  save_dataset(ds, dir);
  auto back = load_dataset(dir);
  EXPECT_EQ(back.frames, ds.frames);
  EXPECT_EQ(back.manifest, ds.manifest);
}

TEST(Manifest, Validation) {
  DatasetManifest m;
  m.class_names = {"only"};
  m.frames_per_class = {1};
  EXPECT_THROW(manifest_from_text(manifest_to_text(m)), ValidationError);
  EXPECT_THROW(manifest_from_text("[1,2"), FormatError);
}

TEST(Import, BothFrameLayoutsAndClassOrder) {
  auto dir = temp_dir("import_src");
  std::string flat = "id,values\n";
  for (int f = 0; f < 3; ++f) {
    for (int i = 0; i < 64; ++i) flat += (i ? "," : "") + std::to_string(f * 100 + i);
    flat += "\n";
  }
  write_text(dir / "wave" / "a.csv", flat);
  std::string grid;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) grid += (c ? " " : "") + std::to_string(r * 8 + c);
    grid += "\n";
  }
  write_text(dir / "No_Gesture" / "bg.txt", grid + "\n" + grid);
  write_text(dir / "fist" / "x.csv", flat);
  write_text(dir / "fist" / "notes.md", "ignored");

  auto ds = import_released(dir);
  EXPECT_EQ(ds.manifest.class_names, (std::vector<std::string>{"fist", "wave", "No_Gesture"}));
  EXPECT_EQ(ds.manifest.frames_per_class, (std::vector<std::size_t>{3, 3, 2}));
  EXPECT_EQ(ds.manifest.source, "released");
  EXPECT_EQ(ds.frames.back().label, 2);
  EXPECT_EQ(ds.frames.back().at(7, 7), 63u);
  EXPECT_EQ(ds.frames[1].at(0, 1), 101u);

  auto out1 = temp_dir("import_out1"), out2 = temp_dir("import_out2");
  save_dataset(ds, out1);
  save_dataset(import_released(dir), out2);
  EXPECT_EQ(read_file(out1 / "frames.csv"), read_file(out2 / "frames.csv"));
  EXPECT_EQ(read_file(out1 / "manifest"), read_file(out2 / "manifest"));
}

TEST(Import, LayoutErrorsExplainTheExpectedLayout) {
  auto dir = temp_dir("import_bad");
  EXPECT_THROW(import_released(dir / "missing"), ImportError);
  write_text(dir / "a" / "x.csv", "1,2,3\n");
  write_text(dir / "b" / "x.csv", "1,2,3\n");
  try {
    import_released(dir);
    FAIL() << "expected ImportError";
  } catch (const ImportError& e) {
    EXPECT_NE(std::string(e.what()).find("one sub-directory per class"), std::string::npos);
  }
}

TEST(Synth, DeterministicAndBalanced) {
  auto a = synth(10, 7), b = synth(10, 7), c = synth(10, 8);
  EXPECT_EQ(a.frames.size(), 110u);
  EXPECT_EQ(frames_to_csv(a.frames), frames_to_csv(b.frames));
  EXPECT_NE(frames_to_csv(a.frames), frames_to_csv(c.frames));
  EXPECT_EQ(a.manifest.frames_per_class, std::vector<std::size_t>(11, 10));
  EXPECT_EQ(a.manifest.class_names, synthetic_class_names());
  EXPECT_EQ(a.manifest.seed, std::optional<std::uint64_t>(7));
}

TEST(Synth, Validation) {
  SyntheticGestureConfig cfg;
  cfg.photon_budget = 0.0;
  EXPECT_THROW(synth_generate(cfg, 1), ValidationError);
  cfg = {};
  cfg.rotation_deg = 200.0;
  EXPECT_THROW(synth_generate(cfg, 1), ValidationError);
  EXPECT_THROW(synth_generate(SyntheticGestureConfig{}, 0), ValidationError);
}

TEST(Synth, BackgroundIsFarDimmerThanThePalm) {
  const auto ds = synth(91, 11);  // 1,001 frames
  double bg = 0.0, palm = 0.0;
  std::size_t nbg = 0, npalm = 0;
  for (const auto& f : ds.frames) {
    if (f.label == 10) {
      for (auto c : f.counts) bg += c;
      nbg += kFramePixels;
    } else {
      palm += *std::max_element(f.counts.begin(), f.counts.end());
      ++npalm;
    }
  }
  EXPECT_GT(palm / npalm, 20.0 * (bg / nbg));
}

TEST(Synth, NearestCentroidBeatsChanceThreefold) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto tr = synth(30, seed), te = synth(20, seed + 100);
    std::vector<std::vector<double>> centroid(11, std::vector<double>(64, 0.0));
    for (const auto& f : tr.frames) {
      const auto img = normalize(f);
      for (std::size_t i = 0; i < 64; ++i) centroid[f.label][i] += img.pixels[i] / 30.0;
    }
    std::size_t correct = 0;
    for (const auto& f : te.frames) {
      const auto img = normalize(f);
      int best = 0;
      double best_d = INFINITY;
      for (int c = 0; c < 11; ++c) {
        double d = 0.0;
        for (std::size_t i = 0; i < 64; ++i) d += std::pow(img.pixels[i] - centroid[c][i], 2);
        if (d < best_d) best_d = d, best = c;
      }
      correct += best == f.label;
    }
    EXPECT_GE(static_cast<double>(correct) / te.frames.size(), 3.0 / 11.0) << "seed " << seed;
  }
}

TEST(Split, RatioPerClass) {
  const auto ds = synth(110, 1);
  auto [a, b] = split(ds.frames, 0.9, 5);
  for (auto [label, n] : per_label(a)) EXPECT_EQ(n, 99u) << label;
  for (auto [label, n] : per_label(b)) EXPECT_EQ(n, 11u) << label;
}

TEST(Split, PartitionDeterminismAndStratification) {
  const auto ds = synth(13, 2);
  auto [a, b] = split(ds.frames, 0.7, 9);
  auto [a2, b2] = split(ds.frames, 0.7, 9);
  EXPECT_EQ(a, a2);
  EXPECT_EQ(b, b2);
  auto joined = a;
  joined.insert(joined.end(), b.begin(), b.end());
  auto key = [](const Frame& x, const Frame& y) {
    return std::tie(x.label, x.counts) < std::tie(y.label, y.counts);
  };
  auto original = ds.frames;
  std::sort(joined.begin(), joined.end(), key);
  std::sort(original.begin(), original.end(), key);
  EXPECT_EQ(joined, original);
  for (auto [label, n] : per_label(a)) EXPECT_LE(std::fabs(static_cast<double>(n) - 0.7 * 13), 1.0);
  auto [c, d] = split(ds.frames, 0.7, 10);
  EXPECT_NE(a, c);
}

TEST(Split, Errors) {
  auto frames = synth(2, 3).frames;
  EXPECT_THROW(split(frames, 1.0, 0), DataError);
  EXPECT_THROW(split(frames, 0.0, 0), DataError);
  frames.pop_back();
  EXPECT_THROW(split(frames, 0.5, 0), DataError);
}
