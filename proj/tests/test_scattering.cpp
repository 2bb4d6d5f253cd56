#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "scatgen/errors.hpp"
#include "scatgen/rng.hpp"
#include "scatgen/scattering.hpp"

using namespace scatgen;

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Independent oracle machinery: naive O(n^4) DFTs and literal circular
/// convolutions, no shared code with the FFT fast path.
using Field = std::vector<std::complex<double>>;

Field naive_idft2(const std::vector<double>& freq, int n) {
  Field out(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      std::complex<double> acc(0.0, 0.0);
      for (int k1 = 0; k1 < n; ++k1)
        for (int k2 = 0; k2 < n; ++k2) {
          const double ang = 2.0 * kPi * (static_cast<double>(y * k1 + x * k2)) / n;
          acc += freq[static_cast<std::size_t>(k1) * n + k2] *
                 std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[static_cast<std::size_t>(y) * n + x] = acc / static_cast<double>(n * n);
    }
  return out;
}

Field circular_conv(const Field& x, const Field& h, int n) {
  Field out(static_cast<std::size_t>(n) * n, {0.0, 0.0});
  for (int y = 0; y < n; ++y)
    for (int x2 = 0; x2 < n; ++x2) {
      std::complex<double> acc(0.0, 0.0);
      for (int m1 = 0; m1 < n; ++m1)
        for (int m2 = 0; m2 < n; ++m2) {
          const int d1 = ((y - m1) % n + n) % n;
          const int d2 = ((x2 - m2) % n + n) % n;
          acc += x[static_cast<std::size_t>(m1) * n + m2] *
                 h[static_cast<std::size_t>(d1) * n + d2];
        }
      out[static_cast<std::size_t>(y) * n + x2] = acc;
    }
  return out;
}

Field to_field(const Image& img, int channel) {
  Field f(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      f[static_cast<std::size_t>(y) * img.width + x] = {img.at(y, x, channel), 0.0};
  return f;
}

Field modulus(const Field& f) {
  Field out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = {std::abs(f[i]), 0.0};
  return out;
}

std::vector<double> subsample_real(const Field& f, int n, int stride) {
  std::vector<double> out;
  for (int y = 0; y < n; y += stride)
    for (int x = 0; x < n; x += stride)
      out.push_back(f[static_cast<std::size_t>(y) * n + x].real());
  return out;
}

/// Literal order-2 scattering for J=1, Q=1, one channel: direct definition,
/// no FFT, no shared convolution code. Returned path-major: out[p] holds the
/// subsampled grid of path p.
std::vector<std::vector<double>> brute_scatter_j1q1(const Image& img,
                                                    const FilterBank& bank) {
  const int n = bank.grid_size;
  const Field psi = naive_idft2(bank.wavelet(1, 0), n);
  const Field phi = naive_idft2(bank.lowpass, n);
  const Field x = to_field(img, 0);

  const int stride = 2;  // 2^J
  std::vector<std::vector<double>> out;
  out.push_back(subsample_real(circular_conv(x, phi, n), n, stride));
  const Field u1 = modulus(circular_conv(x, psi, n));
  out.push_back(subsample_real(circular_conv(u1, phi, n), n, stride));
  return out;
}

/// Max abs deviation between the fast path and the oracle output.
double oracle_deviation(const ScatteringCoeffs& fast,
                        const std::vector<std::vector<double>>& ref) {
  double worst = 0.0;
  for (int p = 0; p < fast.channels_per_color; ++p)
    for (int y = 0; y < fast.spatial; ++y)
      for (int x = 0; x < fast.spatial; ++x) {
        const double r = ref[static_cast<std::size_t>(p)]
                            [static_cast<std::size_t>(y) * fast.spatial + x];
        worst = std::max(worst, std::abs(fast.at(y, x, 0, p) - r));
      }
  return worst;
}

Image random_image(int side, int channels, std::uint64_t seed) {
  Image img(side, side, channels);
  SplitMix64 rng(seed);
  for (auto& v : img.data) v = rng.next_double();
  return img;
}

}  // namespace

TEST_CASE("scattering_dims reproduces the dimension ratios") {
  const auto d4 = scattering_dims(4, 8, 128);
  CHECK(d4.k_j == 417);
  CHECK(d4.spatial == 8);
  CHECK(d4.alpha_j == doctest::Approx(1.63).epsilon(0.005 / 1.63));

  const auto d5 = scattering_dims(5, 8, 128);
  CHECK(d5.alpha_j == doctest::Approx(0.67).epsilon(0.005 / 0.67));

  const auto d1 = scattering_dims(1, 1, 8);
  CHECK(d1.k_j == 2);  // order 0 plus one order-1 path, no order-2

  CHECK_THROWS_AS(scattering_dims(4, 8, 8), invalid_parameter_error);
}

TEST_CASE("canonical path order is order 0, then order 1, then order 2") {
  const auto paths = canonical_paths(2, 2);
  CHECK(paths.size() == 1 + 4 + 4);  // K = 1 + QJ + Q^2 J(J-1)/2 = 9
  CHECK(paths[0].order == 0);
  CHECK(paths[1] == ScatteringPath{1, 1, 0, -1, -1});
  CHECK(paths[4] == ScatteringPath{1, 2, 1, -1, -1});
  CHECK(paths[5] == ScatteringPath{2, 1, 0, 2, 0});
  CHECK(paths[8] == ScatteringPath{2, 1, 1, 2, 1});
  for (const auto& p : paths)
    if (p.order == 2) CHECK(p.l1 < p.l2);
}

TEST_CASE("zero image scatters to exact zeros") {
  const auto bank = build_filter_bank(2, 2, 16);
  const Image zero(16, 16, 3);
  const auto s = scatter(zero, bank);
  for (const double v : s.data) CHECK(v == 0.0);
}

TEST_CASE("constant image: order 0 carries the constant, higher orders vanish") {
  const auto bank = build_filter_bank(2, 3, 16);
  Image img(16, 16, 1);
  for (auto& v : img.data) v = 0.37;
  const auto s = scatter(img, bank);
  for (int y = 0; y < s.spatial; ++y)
    for (int x = 0; x < s.spatial; ++x) {
      CHECK(s.at(y, x, 0, 0) == doctest::Approx(0.37).epsilon(1e-12));
      for (int p = 1; p < s.channels_per_color; ++p)
        CHECK(std::abs(s.at(y, x, 0, p)) <= 1e-9);
    }
}

TEST_CASE("128x128 RGB at J=4, Q=8 yields an 8x8 grid with 1251 channels") {
  const auto bank = build_filter_bank(4, 8, 128);
  const Image img = random_image(128, 3, 31);
  const auto s = scatter(img, bank);
  CHECK(s.spatial == 8);
  CHECK(s.channels_per_color * s.colors == 1251);
  CHECK(s.data.size() == 8u * 8u * 1251u);
  for (const double v : s.data) CHECK(std::isfinite(v));
}

TEST_CASE("dimension mismatch is rejected") {
  const auto bank = build_filter_bank(2, 2, 16);
  CHECK_THROWS_AS(scatter(Image(8, 8, 1), bank), dimension_mismatch_error);
}

TEST_CASE("fast path matches the brute-force oracle on 4x4 images") {
  const auto bank = build_filter_bank(1, 1, 4);

  SUBCASE("random-valued images") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const Image img = random_image(4, 1, 1000 + seed);
      CHECK(oracle_deviation(scatter(img, bank), brute_scatter_j1q1(img, bank)) <= 1e-10);
    }
  }

  SUBCASE("a sample of binary images") {
    // The full 65536-case enumeration runs in the acceptance suite.
    SplitMix64 rng(99);
    for (int rep = 0; rep < 256; ++rep) {
      const std::uint32_t bits = static_cast<std::uint32_t>(rng.next() & 0xFFFF);
      Image img(4, 4, 1);
      for (int i = 0; i < 16; ++i) img.data[static_cast<std::size_t>(i)] = (bits >> i) & 1;
      CHECK(oracle_deviation(scatter(img, bank), brute_scatter_j1q1(img, bank)) <= 1e-10);
    }
  }
}

TEST_CASE("order-1 and order-2 coefficients are nonnegative") {
  const auto bank = build_filter_bank(3, 2, 32);
  const Image img = random_image(32, 1, 5);
  const auto s = scatter(img, bank);
  for (int y = 0; y < s.spatial; ++y)
    for (int x = 0; x < s.spatial; ++x)
      for (int p = 1; p < s.channels_per_color; ++p)
        CHECK(s.at(y, x, 0, p) >= -1e-12);
}

TEST_CASE("scatter contraction and energy bounds over random pairs") {
  const auto bank = build_filter_bank(2, 2, 16);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Image a = random_image(16, 1, 2 * seed);
    const Image b = random_image(16, 1, 2 * seed + 1);
    const auto sa = scatter(a, bank);
    const auto sb = scatter(b, bank);
    CHECK(coeffs_l2_distance(sa, sb) <= image_l2_distance(a, b) + 1e-9);
    CHECK(coeffs_l2_norm(sa) <= image_l2_norm(a) + 1e-9);
  }
}

TEST_CASE("translation stability improves with scale") {
  // Smoothed random field as a fixed natural-texture stand-in; circular
  // shift by one pixel, relative scattering distance must fall with J.
  const int n = 64;
  Image img(n, n, 1);
  {
    SplitMix64 rng(424242);
    for (auto& v : img.data) v = rng.next_double();
    // crude 5x5 box smoothing, twice
    for (int pass = 0; pass < 2; ++pass) {
      Image tmp = img;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          double acc = 0.0;
          for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx)
              acc += tmp.at(((y + dy) % n + n) % n, ((x + dx) % n + n) % n, 0);
          img.at(y, x, 0) = acc / 25.0;
        }
    }
  }
  const Image shifted = translate_circular(img, 0, 1);
  const double xnorm = image_l2_norm(img);

  double prev = 1e300;
  for (int J = 1; J <= 4; ++J) {
    const auto bank = build_filter_bank(J, 4, n);
    const double r =
        coeffs_l2_distance(scatter(img, bank), scatter(shifted, bank)) / xnorm;
    CHECK(r <= prev * 1.05);
    prev = r;
  }
}

TEST_CASE("scatter_batch equals the sequential loop bit-exactly") {
  const auto bank = build_filter_bank(2, 2, 32);
  std::vector<Image> batch;
  for (std::uint64_t i = 0; i < 8; ++i) batch.push_back(random_image(32, 3, 100 + i));

  const auto par = scatter_batch(batch, bank);
  REQUIRE(par.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto seq = scatter(batch[i], bank);
    REQUIRE(par[i].data.size() == seq.data.size());
    for (std::size_t k = 0; k < seq.data.size(); ++k)
      CHECK(par[i].data[k] == seq.data[k]);
  }

  CHECK(scatter_batch({}, bank).empty());
  const auto single = scatter_batch({batch[0]}, bank);
  CHECK(single.size() == 1);

  std::vector<Image> bad = {batch[0], Image(8, 8, 1)};
  CHECK_THROWS_WITH_AS(scatter_batch(bad, bank),
                       doctest::Contains("image 1"), dimension_mismatch_error);
}

TEST_CASE("coefficients serialize bit-exactly with their path index") {
  const auto bank = build_filter_bank(2, 2, 16);
  Image img = random_image(16, 3, 77);
  auto s = scatter(img, bank);
  // serialization stores 32-bit reals; quantize first so the round trip is exact
  for (auto& v : s.data) v = static_cast<float>(v);

  const auto path = std::filesystem::temp_directory_path() / "scatgen_coeffs_test.bin";
  save_coeffs(s, path.string());
  const auto loaded = load_coeffs(path.string());
  CHECK(loaded.same_layout(s));
  REQUIRE(loaded.path_index.size() == s.path_index.size());
  for (std::size_t i = 0; i < s.path_index.size(); ++i)
    CHECK(loaded.path_index[i] == s.path_index[i]);
  REQUIRE(loaded.data.size() == s.data.size());
  for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(loaded.data[i] == s.data[i]);
  std::filesystem::remove(path);
}
