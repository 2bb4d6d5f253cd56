#include <doctest.h>

#include <cmath>
#include <tuple>
#include <vector>

#include "scatgen/adam.hpp"
#include "scatgen/errors.hpp"
#include "scatgen/generator.hpp"
#include "scatgen/layers.hpp"
#include "scatgen/rng.hpp"

using namespace scatgen;

namespace {

template <typename T>
void fill_random(Tensor<T>& t, SplitMix64& rng, double scale = 1.0) {
  for (auto& v : t.data) v = static_cast<T>((rng.next_double() - 0.5) * 2.0 * scale);
}

template <typename T>
double dot_all(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    s += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
  return s;
}

/// Independent 4-loop convolution reference with inline reflection.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& k,
                          const Tensor<double>& bias) {
  const int h = x.shape[1], w = x.shape[2], cin = x.shape[3], cout = k.shape[3];
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -1 - i;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  Tensor<double> out = Tensor<double>::zeros4(1, h, w, cout);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int o = 0; o < cout; ++o) {
        double acc = bias.data[static_cast<std::size_t>(o)];
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < 7; ++ky)
            for (int kx = 0; kx < 7; ++kx) {
              const int sy = reflect(y + ky - 3, h);
              const int sx = reflect(xx + kx - 3, w);
              acc += x.at4(0, sy, sx, ci) *
                     k.data[((static_cast<std::size_t>(ky) * 7 + kx) * cin + ci) * cout + o];
            }
        out.at4(0, y, xx, o) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("bilinear upsampling against the hand-computed table") {
  Tensor<double> t = Tensor<double>::zeros4(1, 2, 2, 1);
  t.at4(0, 0, 0, 0) = 0.0;
  t.at4(0, 0, 1, 0) = 1.0;
  t.at4(0, 1, 0, 0) = 2.0;
  t.at4(0, 1, 1, 0) = 3.0;
  const auto up = bilinear_upsample2x(t);
  // Hand evaluation of out(i,j) = in((i+0.5)/2 - 0.5, (j+0.5)/2 - 0.5):
  const double want[4][4] = {{0.0, 0.25, 0.75, 1.0},
                             {0.5, 0.75, 1.25, 1.5},
                             {1.5, 1.75, 2.25, 2.5},
                             {2.0, 2.25, 2.75, 3.0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(up.at4(0, i, j, 0) == doctest::Approx(want[i][j]).epsilon(1e-15));
}

TEST_CASE("upsampling preserves constants and clamps 1x1 inputs") {
  Tensor<double> c = Tensor<double>::zeros4(2, 3, 5, 4);
  c.fill(0.37);
  const auto up = bilinear_upsample2x(c);
  CHECK(up.shape[1] == 6);
  CHECK(up.shape[2] == 10);
  for (const double v : up.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

  Tensor<double> one = Tensor<double>::zeros4(1, 1, 1, 1);
  one.at4(0, 0, 0, 0) = 42.0;
  const auto up1 = bilinear_upsample2x(one);
  for (const double v : up1.data) CHECK(v == 42.0);
}

TEST_CASE("upsample backward is the exact adjoint") {
  SplitMix64 rng(5);
  Tensor<double> x = Tensor<double>::zeros4(2, 3, 4, 3);
  fill_random(x, rng);
  Tensor<double> g = Tensor<double>::zeros4(2, 6, 8, 3);
  fill_random(g, rng);
  const auto up = bilinear_upsample2x(x);
  const auto gx = bilinear_upsample2x_backward(g, 3, 4);
  CHECK(dot_all(up, g) == doctest::Approx(dot_all(x, gx)).epsilon(1e-12));
}

TEST_CASE("conv identity kernel reproduces the input bit-exactly") {
  SplitMix64 rng(9);
  Tensor<double> x = Tensor<double>::zeros4(1, 8, 8, 3);
  fill_random(x, rng);
  Tensor<double> k = Tensor<double>::zeros4(7, 7, 3, 3);
  for (int c = 0; c < 3; ++c)
    k.data[((3u * 7 + 3) * 3 + static_cast<std::size_t>(c)) * 3 + static_cast<std::size_t>(c)] = 1.0;
  Tensor<double> b = Tensor<double>::zeros1(3);
  const auto y = conv2d_symmetric(x, k, b);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("all-ones kernel on a constant image sums 49 taps") {
  Tensor<double> x = Tensor<double>::zeros4(1, 5, 5, 1);
  x.fill(0.2);
  Tensor<double> k = Tensor<double>::zeros4(7, 7, 1, 1);
  k.fill(1.0);
  Tensor<double> b = Tensor<double>::zeros1(1);
  const auto y = conv2d_symmetric(x, k, b);
  for (const double v : y.data) CHECK(v == doctest::Approx(49.0 * 0.2).epsilon(1e-14));
}

TEST_CASE("conv matches the naive 4-loop reference on random input") {
  SplitMix64 rng(13);
  Tensor<double> x = Tensor<double>::zeros4(1, 9, 9, 1);
  fill_random(x, rng);
  Tensor<double> k = Tensor<double>::zeros4(7, 7, 1, 1);
  fill_random(k, rng);
  Tensor<double> b = Tensor<double>::zeros1(1);
  fill_random(b, rng);
  const auto fast = conv2d_symmetric(x, k, b);
  const auto ref = naive_conv(x, k, b);
  for (std::size_t i = 0; i < ref.data.size(); ++i)
    CHECK(std::abs(fast.data[i] - ref.data[i]) <= 1e-12);

  // Multichannel as well.
  Tensor<double> x2 = Tensor<double>::zeros4(1, 6, 5, 3);
  fill_random(x2, rng);
  Tensor<double> k2 = Tensor<double>::zeros4(7, 7, 3, 2);
  fill_random(k2, rng);
  Tensor<double> b2 = Tensor<double>::zeros1(2);
  fill_random(b2, rng);
  const auto fast2 = conv2d_symmetric(x2, k2, b2);
  const auto ref2 = naive_conv(x2, k2, b2);
  for (std::size_t i = 0; i < ref2.data.size(); ++i)
    CHECK(std::abs(fast2.data[i] - ref2.data[i]) <= 1e-12);
}

TEST_CASE("conv backward: adjoint identity and finite-difference kernel grads") {
  SplitMix64 rng(17);
  Tensor<double> x = Tensor<double>::zeros4(1, 6, 6, 2);
  fill_random(x, rng);
  Tensor<double> k = Tensor<double>::zeros4(7, 7, 2, 3);
  fill_random(k, rng, 0.3);
  Tensor<double> b = Tensor<double>::zeros1(3);
  Tensor<double> g = Tensor<double>::zeros4(1, 6, 6, 3);
  fill_random(g, rng);

  Tensor<double> gk, gb, gx;
  conv2d_symmetric_backward(x, k, g, gk, gb, &gx);

  // <conv(x), g> as a function of x: gradient is gx.
  const auto y = conv2d_symmetric(x, k, b);
  CHECK(dot_all(y, g) - dot_all(b, gb) == doctest::Approx(dot_all(x, gx)).epsilon(1e-10));

  // Central differences on every kernel entry and bias.
  const double h = 1e-6;
  for (std::size_t i = 0; i < k.data.size(); ++i) {
    Tensor<double> kp = k, km = k;
    kp.data[i] += h;
    km.data[i] -= h;
    const double lp = dot_all(conv2d_symmetric(x, kp, b), g);
    const double lm = dot_all(conv2d_symmetric(x, km, b), g);
    const double fd = (lp - lm) / (2.0 * h);
    CHECK(gk.data[i] == doctest::Approx(fd).scale(1.0).epsilon(1e-5));
  }
  for (std::size_t i = 0; i < b.data.size(); ++i) {
    Tensor<double> bp = b, bm = b;
    bp.data[i] += h;
    bm.data[i] -= h;
    const double fd = (dot_all(conv2d_symmetric(x, k, bp), g) -
                       dot_all(conv2d_symmetric(x, k, bm), g)) / (2.0 * h);
    CHECK(gb.data[i] == doctest::Approx(fd).scale(1.0).epsilon(1e-5));
  }
}

TEST_CASE("generator parameter structure") {
  const auto ladder = GeneratorParams<float>::channel_ladder(128, 3);
  CHECK(ladder == std::vector<int>{128, 64, 32, 16});
  const auto floored = GeneratorParams<float>::channel_ladder(16, 3);
  CHECK(floored == std::vector<int>{16, 8, 8, 8});

  const auto p = init_generator<float>(8, 16, 2, 1);
  CHECK(p.side() == 16);
  CHECK(p.stages.size() == 2);
  CHECK(p.stages[0].kernel.shape[0] == 7);
  CHECK(p.stages[0].kernel.shape[1] == 7);
  CHECK(p.output.kernel.shape[3] == 3);
  CHECK(p.block_names().size() == p.blocks().size());

  CHECK_THROWS_AS(init_generator<float>(8, 4, 2, 1), invalid_parameter_error);
}

TEST_CASE("all-zero parameters map any latent to zero") {
  auto p = init_generator<double>(6, 8, 1, 3);
  for (auto* blk : p.blocks()) blk->fill(0.0);
  Tensor<double> z = Tensor<double>::zeros2(2, 6);
  SplitMix64 rng(3);
  fill_random(z, rng);
  const auto out = generator_forward(p, z);
  for (const double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("zero latent yields the pure-bias network output") {
  auto p = init_generator<double>(6, 8, 1, 5);
  SplitMix64 rng(55);
  for (auto& st : p.stages) fill_random(st.bias, rng, 0.2);
  fill_random(p.b0, rng, 0.2);
  fill_random(p.output.bias, rng, 0.2);

  Tensor<double> z0 = Tensor<double>::zeros2(1, 6);
  const auto out_zero = generator_forward(p, z0);

  // Killing w0 changes nothing when z = 0.
  auto p2 = p;
  p2.w0.fill(0.0);
  const auto out_bias = generator_forward(p2, z0);
  REQUIRE(out_zero.data.size() == out_bias.data.size());
  for (std::size_t i = 0; i < out_zero.data.size(); ++i)
    CHECK(out_zero.data[i] == out_bias.data[i]);
}

TEST_CASE("frozen tiny net matches a straight-line oracle") {
  // d_in=4, c0=8, U=2, side=16, frozen seed; the oracle below evaluates the
  // same arithmetic with independent plain loops.
  const int d_in = 4, c0 = 8, U = 2;
  const auto p = init_generator<double>(d_in, c0, U, 77);
  Tensor<double> z = Tensor<double>::zeros2(1, d_in);
  SplitMix64 rng(123);
  fill_random(z, rng);

  const auto fast = generator_forward(p, z);

  // dense + relu
  std::vector<double> h(static_cast<std::size_t>(16 * c0), 0.0);
  for (int o = 0; o < 16 * c0; ++o) {
    double acc = p.b0.data[static_cast<std::size_t>(o)];
    for (int i = 0; i < d_in; ++i)
      acc += z.data[static_cast<std::size_t>(i)] * p.w0.at2(i, o);
    h[static_cast<std::size_t>(o)] = acc > 0.0 ? acc : 0.0;
  }
  // [4,4,c0] field
  int side = 4;
  int ch = c0;
  std::vector<double> a = h;

  const auto upsample = [](const std::vector<double>& in, int n, int c) {
    std::vector<double> out(static_cast<std::size_t>(2 * n) * 2 * n * c, 0.0);
    auto tap = [&](int i) {
      const double s = (i + 0.5) / 2.0 - 0.5;
      const int lo = static_cast<int>(std::floor(s));
      const double f = s - std::floor(s);
      const int l = std::max(0, std::min(n - 1, lo));
      const int hgh = std::max(0, std::min(n - 1, lo + 1));
      return std::tuple<int, int, double>(l, hgh, f);
    };
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j) {
        const auto [ylo, yhi, fy] = tap(i);
        const auto [xlo, xhi, fx] = tap(j);
        for (int cc = 0; cc < c; ++cc) {
          const double v =
              (1 - fy) * (1 - fx) * in[(static_cast<std::size_t>(ylo) * n + xlo) * c + cc] +
              (1 - fy) * fx * in[(static_cast<std::size_t>(ylo) * n + xhi) * c + cc] +
              fy * (1 - fx) * in[(static_cast<std::size_t>(yhi) * n + xlo) * c + cc] +
              fy * fx * in[(static_cast<std::size_t>(yhi) * n + xhi) * c + cc];
          out[(static_cast<std::size_t>(i) * 2 * n + j) * c + cc] = v;
        }
      }
    return out;
  };
  const auto conv_relu = [](const std::vector<double>& in, int n, int cin,
                            const Tensor<double>& k, const Tensor<double>& bias,
                            bool relu) {
    const int cout = k.shape[3];
    auto reflect = [](int i, int nn) {
      while (i < 0 || i >= nn) {
        if (i < 0) i = -1 - i;
        if (i >= nn) i = 2 * nn - 1 - i;
      }
      return i;
    };
    std::vector<double> out(static_cast<std::size_t>(n) * n * cout, 0.0);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        for (int o = 0; o < cout; ++o) {
          double acc = bias.data[static_cast<std::size_t>(o)];
          for (int ky = 0; ky < 7; ++ky)
            for (int kx = 0; kx < 7; ++kx)
              for (int ci = 0; ci < cin; ++ci)
                acc += in[(static_cast<std::size_t>(reflect(y + ky - 3, n)) * n +
                           reflect(x + kx - 3, n)) * cin + ci] *
                       k.data[((static_cast<std::size_t>(ky) * 7 + kx) * cin + ci) * cout + o];
          out[(static_cast<std::size_t>(y) * n + x) * cout + o] =
              relu ? (acc > 0.0 ? acc : 0.0) : acc;
        }
    return out;
  };

  for (int j = 0; j < U; ++j) {
    a = upsample(a, side, ch);
    side *= 2;
    const auto& st = p.stages[static_cast<std::size_t>(j)];
    a = conv_relu(a, side, ch, st.kernel, st.bias, true);
    ch = st.kernel.shape[3];
  }
  a = conv_relu(a, side, ch, p.output.kernel, p.output.bias, true);

  REQUIRE(fast.data.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(fast.data[i] == doctest::Approx(a[i]).scale(1.0).epsilon(1e-12));
}

TEST_CASE("generator gradients match central finite differences") {
  // Tiny net with no upsampling keeps every parameter checkable: 1563 total.
  const auto p0 = init_generator<double>(2, 8, 0, 31);
  CHECK(p0.n_params() <= 2000);

  Tensor<double> z = Tensor<double>::zeros2(1, 2);
  SplitMix64 rng(71);
  fill_random(z, rng);
  Tensor<double> w_r = Tensor<double>::zeros4(1, 4, 4, 3);
  fill_random(w_r, rng);  // random linear functional as the loss

  auto grads = p0.zeros_like();
  Tensor<double> z_grad;
  generator_backward(p0, z, w_r, grads, &z_grad);

  const auto loss = [&](const GeneratorParams<double>& p) {
    return dot_all(generator_forward(p, z), w_r);
  };

  const double h = 1e-5;
  auto blocks = grads.blocks();
  auto p = p0;
  auto pblocks = p.blocks();
  double worst = 0.0;
  for (std::size_t b = 0; b < pblocks.size(); ++b) {
    for (std::size_t i = 0; i < pblocks[b]->size(); ++i) {
      const double orig = pblocks[b]->data[i];
      pblocks[b]->data[i] = orig + h;
      const double lp = loss(p);
      pblocks[b]->data[i] = orig - h;
      const double lm = loss(p);
      pblocks[b]->data[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = blocks[b]->data[i];
      const double rel = std::abs(an - fd) / std::max(1e-8, std::max(std::abs(an), std::abs(fd)));
      if (std::abs(an) > 1e-12 || std::abs(fd) > 1e-12) worst = std::max(worst, rel);
    }
  }
  CHECK(worst <= 1e-4);

  // Latent gradient by the same oracle.
  for (int i = 0; i < 2; ++i) {
    const double orig = z.data[static_cast<std::size_t>(i)];
    z.data[static_cast<std::size_t>(i)] = orig + h;
    const double lp = loss(p0);
    z.data[static_cast<std::size_t>(i)] = orig - h;
    const double lm = loss(p0);
    z.data[static_cast<std::size_t>(i)] = orig;
    CHECK(z_grad.data[static_cast<std::size_t>(i)] ==
          doctest::Approx((lp - lm) / (2.0 * h)).scale(1.0).epsilon(1e-6));
  }
}

TEST_CASE("zero upstream gradient produces zero gradients") {
  const auto p = init_generator<double>(3, 8, 1, 41);
  Tensor<double> z = Tensor<double>::zeros2(1, 3);
  SplitMix64 rng(4);
  fill_random(z, rng);
  Tensor<double> up = Tensor<double>::zeros4(1, 8, 8, 3);
  auto grads = p.zeros_like();
  generator_backward(p, z, up, grads);
  for (const auto* blk : grads.blocks())
    for (const double v : blk->data) CHECK(v == 0.0);
}

TEST_CASE("dead relu units receive exactly zero weight gradients") {
  auto p = init_generator<double>(2, 8, 0, 51);
  // Force one output unit of the dense layer permanently dead.
  const int dead = 5;
  p.b0.data[dead] = -100.0;

  Tensor<double> z = Tensor<double>::zeros2(1, 2);
  z.data[0] = 0.3;
  z.data[1] = -0.7;
  Tensor<double> up = Tensor<double>::zeros4(1, 4, 4, 3);
  up.fill(1.0);
  auto grads = p.zeros_like();
  generator_backward(p, z, up, grads);
  for (int i = 0; i < 2; ++i) CHECK(grads.w0.at2(i, dead) == 0.0);
  CHECK(grads.b0.data[dead] == 0.0);
}

TEST_CASE("forward is deterministic and reports activation sparsity") {
  const auto p = init_generator<float>(4, 8, 1, 61);
  Tensor<float> z = Tensor<float>::zeros2(2, 4);
  SplitMix64 rng(8);
  fill_random(z, rng);

  SparsityStats s1, s2;
  const auto a = generator_forward(p, z, nullptr, &s1);
  const auto b = generator_forward(p, z, nullptr, &s2);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
  CHECK(s1.zeros == s2.zeros);
  CHECK(s1.total == s2.total);
  CHECK(s1.total > 0);
  CHECK(s1.fraction() > 0.0);  // random init leaves some units inactive
  CHECK(s1.fraction() < 1.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged but advances t") {
  auto p = init_generator<float>(2, 8, 0, 71);
  const auto snapshot = p;
  auto grads = p.zeros_like();
  auto state = AdamState<float>::like(p);
  adam_step(p, grads, state, AdamConfig{});
  CHECK(state.t == 1);
  auto pb = p.blocks();
  auto sb = snapshot.blocks();
  for (std::size_t b = 0; b < pb.size(); ++b)
    for (std::size_t i = 0; i < pb[b]->size(); ++i)
      CHECK(pb[b]->data[i] == sb[b]->data[i]);
}

TEST_CASE("adam first step from zero state has the closed form -lr*g/(|g|+eps)") {
  auto p = init_generator<double>(2, 8, 0, 81);
  const double before = p.w0.data[3];
  auto grads = p.zeros_like();
  const double g = 0.73;
  grads.w0.data[3] = g;
  auto state = AdamState<double>::like(p);
  AdamConfig cfg;
  adam_step(p, grads, state, cfg);
  const double expected = -cfg.learning_rate * g / (std::abs(g) + cfg.eps);
  CHECK(p.w0.data[3] - before == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam rejects nonfinite gradients naming the block") {
  auto p = init_generator<float>(2, 8, 0, 91);
  auto grads = p.zeros_like();
  grads.output.kernel.data[0] = std::numeric_limits<float>::quiet_NaN();
  auto state = AdamState<float>::like(p);
  CHECK_THROWS_WITH_AS(adam_step(p, grads, state, AdamConfig{}),
                       doctest::Contains("output.kernel"), nonfinite_error);
  CHECK(state.t == 0);  // step aborted before any mutation
}
