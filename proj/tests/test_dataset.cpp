#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scatgen/dataset.hpp"
#include "scatgen/errors.hpp"
#include "scatgen/png_io.hpp"
#include "scatgen/rng.hpp"
#include "scatgen/serialize.hpp"

using namespace scatgen;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::uint64_t file_hash(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace

TEST_CASE("generate_polygon5 basics") {
  CHECK(generate_polygon5(0, 32, 1).empty());
  CHECK_THROWS_AS(generate_polygon5(1, 4, 1), invalid_parameter_error);

  const auto a = generate_polygon5(1, 32, 7);
  const auto b = generate_polygon5(1, 32, 7);
  REQUIRE(a.size() == 1);
  CHECK(a[0].data == b[0].data);  // bit-identical

  const auto c = generate_polygon5(3, 32, 7);
  CHECK(c[0].data == a[0].data);  // per-index streams, n does not matter
  CHECK(c[1].data != c[0].data);
}

TEST_CASE("polygon images stay in range with bounded foreground coverage") {
  const int side = 32;
  const auto images = generate_polygon5(1000, side, 1);
  for (const auto& img : images) {
    int n_fg = 0;
    double bg_r = img.at(0, 0, 0), bg_g = img.at(0, 0, 1), bg_b = img.at(0, 0, 2);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          const double v = img.at(y, x, ch);
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
        }
        // Foreground-classified: majority-covered pixels differ from the
        // background corner (border pixels are pure background: polygons
        // live in the central 80% box).
        const double d = std::max({std::abs(img.at(y, x, 0) - bg_r),
                                   std::abs(img.at(y, x, 1) - bg_g),
                                   std::abs(img.at(y, x, 2) - bg_b)});
        if (d > 0.05) ++n_fg;
      }
    const double frac = static_cast<double>(n_fg) / (side * side);
    CHECK(frac >= 0.01);
    CHECK(frac <= 0.90);
  }
}

TEST_CASE("hard-edge mode produces two-valued images") {
  PolygonOptions opt;
  opt.antialias = false;
  const auto img = polygon5_image(32, 3, 0, opt);
  // Every pixel is either pure background or pure foreground.
  std::vector<double> uniq;
  for (const double v : img.data) {
    bool found = false;
    for (const double u : uniq)
      if (u == v) found = true;
    if (!found) uniq.push_back(v);
  }
  CHECK(uniq.size() <= 6);  // 3 background + 3 foreground channel values
}

TEST_CASE("png round trips") {
  const auto dir = temp_dir("scatgen_png_test");

  SUBCASE("zeros decode to zeros") {
    const Image zero(8, 8, 3);
    write_png(zero, (dir / "zero.png").string());
    const Image back = read_png((dir / "zero.png").string());
    for (const double v : back.data) CHECK(v == 0.0);
  }

  SUBCASE("0.5 quantizes to byte 128 (round half up)") {
    Image half(4, 4, 3);
    for (auto& v : half.data) v = 0.5;
    write_png(half, (dir / "half.png").string());
    const Image back = read_png((dir / "half.png").string());
    for (const double v : back.data) CHECK(v == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
  }

  SUBCASE("random image round trip stays within the quantization bound") {
    Image img(16, 16, 3);
    SplitMix64 rng(3);
    for (auto& v : img.data) v = rng.next_double();
    write_png(img, (dir / "rand.png").string());
    const Image back = read_png((dir / "rand.png").string());
    for (std::size_t i = 0; i < img.data.size(); ++i)
      CHECK(std::abs(back.data[i] - img.data[i]) <= 1.0 / 510.0 + 1e-12);
  }

  SUBCASE("write-read-write is byte stable") {
    Image img(16, 16, 3);
    SplitMix64 rng(5);
    for (auto& v : img.data) v = rng.next_double();
    write_png(img, (dir / "a.png").string());
    const Image back = read_png((dir / "a.png").string());
    write_png(back, (dir / "b.png").string());
    CHECK(file_hash(dir / "a.png") == file_hash(dir / "b.png"));
  }

  SUBCASE("reading garbage fails cleanly") {
    std::ofstream f(dir / "junk.png", std::ios::binary);
    f << "not a png at all";
    f.close();
    CHECK_THROWS_AS(read_png((dir / "junk.png").string()), unsupported_format_error);
    CHECK_THROWS_AS(read_png((dir / "missing.png").string()), io_error);
  }

  fs::remove_all(dir);
}

TEST_CASE("split_manifest writes disjoint train/test trees") {
  const auto dir = temp_dir("scatgen_manifest_test");
  const auto m = split_manifest(dir.string(), 4, 2, 32, 11);
  CHECK(m.train_files.size() == 4);
  CHECK(m.test_files.size() == 2);
  for (const auto& rel : m.train_files) CHECK(fs::exists(dir / rel));
  for (const auto& rel : m.test_files) CHECK(fs::exists(dir / rel));

  const auto loaded = load_manifest(dir.string());
  CHECK(loaded.n_train == 4);
  CHECK(loaded.n_test == 2);
  CHECK(loaded.side == 32);
  CHECK(loaded.seed == 11);

  const auto train = load_split(loaded, "train");
  const auto test = load_split(loaded, "test");
  CHECK(train.size() == 4);
  CHECK(test.size() == 2);
  CHECK_THROWS_AS(load_split(loaded, "validation"), invalid_parameter_error);

  SUBCASE("regeneration is manifest-hash identical") {
    const auto hash1 = file_hash(dir / "manifest.txt");
    const auto dir2 = temp_dir("scatgen_manifest_test2");
    split_manifest(dir2.string(), 4, 2, 32, 11);
    CHECK(file_hash(dir2 / "manifest.txt") == hash1);
    for (const auto& rel : m.train_files)
      CHECK(file_hash(dir / rel) == file_hash(dir2 / rel));
    fs::remove_all(dir2);
  }

  SUBCASE("train and test streams do not collide") {
    const auto many_train = generate_polygon5(2048, 32, 11);
    const auto many_test = generate_polygon5(2048, 32, 11 + kTestSeedOffset);
    std::vector<std::uint64_t> train_hashes;
    for (const auto& img : many_train)
      train_hashes.push_back(fnv1a64(img.data.data(), img.data.size() * sizeof(double)));
    std::sort(train_hashes.begin(), train_hashes.end());
    for (const auto& img : many_test) {
      const auto h = fnv1a64(img.data.data(), img.data.size() * sizeof(double));
      CHECK(!std::binary_search(train_hashes.begin(), train_hashes.end(), h));
    }
  }

  fs::remove_all(dir);
}

TEST_CASE("manifest rejects corruption") {
  const auto dir = temp_dir("scatgen_manifest_bad");
  split_manifest(dir.string(), 2, 1, 16, 3);

  SUBCASE("missing file") {
    fs::remove(dir / "train" / "00001.png");
    CHECK_THROWS_AS(load_manifest(dir.string()), io_error);
  }

  SUBCASE("version bump refused") {
    auto text = std::string();
    {
      std::ifstream f(dir / "manifest.txt");
      text.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
    const auto pos = text.find("version=1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 9, "version=9");
    std::ofstream f(dir / "manifest.txt");
    f << text;
    f.close();
    CHECK_THROWS_AS(load_manifest(dir.string()), version_mismatch_error);
  }

  fs::remove_all(dir);
}
