#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scatgen/image.hpp"

namespace scatgen {

/// Bumped whenever the sampling law or the PRNG stream-split rule changes;
/// generated bytes are a pure function of (n, side, seed, version).
constexpr int kDatasetFormatVersion = 1;

/// Additive constant separating the test stream from the train stream.
constexpr std::uint64_t kTestSeedOffset = 0x8000000000000000ull;

struct PolygonOptions {
  bool antialias = true;  // 4x4 supersampled coverage; off = hard edges
};

/// Synthesizes n images of one random convex polygon (3..5 vertices, sampled
/// in the central 80% box) over a uniform background, foreground color at
/// max-channel distance >= 0.1 from the background. Candidates are redrawn
/// until the covered area lands in [1%, 90%] of the frame; after 100 failed
/// attempts a fixed triangle is used, keeping generation total.
std::vector<Image> generate_polygon5(int n, int side, std::uint64_t seed,
                                     const PolygonOptions& opt = {});

/// Single image of the stream, generate_polygon5(n, ...)[index] for any n > index.
Image polygon5_image(int side, std::uint64_t seed, std::uint64_t index,
                     const PolygonOptions& opt = {});

struct DatasetManifest {
  std::string root;
  int n_train = 0;
  int n_test = 0;
  int side = 0;
  std::uint64_t seed = 0;
  int version = kDatasetFormatVersion;
  bool antialias = true;
  std::vector<std::string> train_files;  // relative to root
  std::vector<std::string> test_files;
};

/// Generates train/ and test/ PNG trees from disjoint seed streams
/// (seed and seed + kTestSeedOffset) and writes root/manifest.txt.
DatasetManifest split_manifest(const std::string& root, int n_train, int n_test,
                               int side, std::uint64_t seed,
                               const PolygonOptions& opt = {});

DatasetManifest load_manifest(const std::string& root);

/// Reads every PNG of one split back; split is "train" or "test".
std::vector<Image> load_split(const DatasetManifest& m, const std::string& split);

}  // namespace scatgen
