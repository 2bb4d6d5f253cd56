#include "scatgen/scattering.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "scatgen/errors.hpp"
#include "scatgen/fft.hpp"
#include "scatgen/serialize.hpp"

namespace scatgen {

namespace {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

void validate_params(int J, int Q, int grid_size) {
  if (J < 1) throw invalid_parameter_error("J must be >= 1");
  if (Q < 1) throw invalid_parameter_error("Q must be >= 1");
  if (!is_pow2(grid_size))
    throw invalid_parameter_error("grid_size must be a power of two");
  if (grid_size < (1 << J))
    throw invalid_parameter_error("grid_size must be >= 2^J");
}

/// Multiply a spectrum by a real filter, inverse transform, and write the
/// real part subsampled by 2^J into the (color, path) slot.
void lowpass_store(const cplx* spec, const std::vector<double>& phi,
                   const Fft& plan, int stride, ScatteringCoeffs& out,
                   int color, int path, std::vector<cplx>& tmp) {
  const int n = plan.size();
  for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = spec[i] * phi[i];
  plan.inverse2d(tmp.data());
  for (int y = 0; y < out.spatial; ++y)
    for (int x = 0; x < out.spatial; ++x)
      out.at(y, x, color, path) =
          tmp[static_cast<std::size_t>(y) * stride * n + static_cast<std::size_t>(x) * stride]
              .real();
}

/// spec * psi -> inverse FFT -> pointwise modulus, returned as a real field
/// stored in `mod` and its forward spectrum in `mod_spec`.
void wavelet_modulus(const cplx* spec, const std::vector<double>& psi,
                     const Fft& plan, std::vector<cplx>& work,
                     std::vector<cplx>& mod_spec) {
  for (std::size_t i = 0; i < work.size(); ++i) work[i] = spec[i] * psi[i];
  plan.inverse2d(work.data());
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double re = work[i].real();
    const double im = work[i].imag();
    mod_spec[i] = cplx(std::sqrt(re * re + im * im), 0.0);
  }
  plan.forward2d(mod_spec.data());
}

}  // namespace

ScatteringDims scattering_dims(int J, int Q, int grid_size) {
  validate_params(J, Q, grid_size);
  ScatteringDims d;
  const long long j = J, q = Q;
  d.k_j = 1 + q * j + q * q * j * (j - 1) / 2;
  d.spatial = grid_size >> J;
  d.alpha_j = static_cast<double>(d.k_j) / static_cast<double>(1LL << (2 * J));
  return d;
}

std::vector<ScatteringPath> canonical_paths(int J, int Q) {
  std::vector<ScatteringPath> paths;
  paths.push_back(ScatteringPath{0, -1, -1, -1, -1});
  for (int l1 = 1; l1 <= J; ++l1)
    for (int q1 = 0; q1 < Q; ++q1)
      paths.push_back(ScatteringPath{1, l1, q1, -1, -1});
  for (int l1 = 1; l1 <= J; ++l1)
    for (int q1 = 0; q1 < Q; ++q1)
      for (int l2 = l1 + 1; l2 <= J; ++l2)
        for (int q2 = 0; q2 < Q; ++q2)
          paths.push_back(ScatteringPath{2, l1, q1, l2, q2});
  return paths;
}

ScatteringCoeffs scatter(const Image& x, const FilterBank& bank) {
  if (x.height != bank.grid_size || x.width != bank.grid_size)
    throw dimension_mismatch_error(
        "image is " + std::to_string(x.height) + "x" + std::to_string(x.width) +
        " but bank grid is " + std::to_string(bank.grid_size));

  const int n = bank.grid_size;
  const ScatteringDims dims = scattering_dims(bank.J, bank.Q, n);

  ScatteringCoeffs out;
  out.J = bank.J;
  out.Q = bank.Q;
  out.grid_size = n;
  out.spatial = dims.spatial;
  out.channels_per_color = static_cast<int>(dims.k_j);
  out.colors = x.channels;
  out.path_index = canonical_paths(bank.J, bank.Q);
  out.data.assign(static_cast<std::size_t>(out.spatial) * out.spatial *
                      dims.k_j * x.channels,
                  0.0);

  const Fft plan(n);
  const int stride = 1 << bank.J;
  const std::size_t bins = static_cast<std::size_t>(n) * n;

  std::vector<cplx> spec(bins), u1_spec(bins), u2(bins), work(bins), tmp(bins);

  const int order2_base = 1 + bank.J * bank.Q;
  for (int c = 0; c < x.channels; ++c) {
    for (int y = 0; y < n; ++y)
      for (int xx = 0; xx < n; ++xx)
        spec[static_cast<std::size_t>(y) * n + xx] = cplx(x.at(y, xx, c), 0.0);
    plan.forward2d(spec.data());

    lowpass_store(spec.data(), bank.lowpass, plan, stride, out, c, 0, tmp);

    int order2_idx = order2_base;
    for (int l1 = 1; l1 <= bank.J; ++l1) {
      for (int q1 = 0; q1 < bank.Q; ++q1) {
        wavelet_modulus(spec.data(), bank.wavelet(l1, q1), plan, work, u1_spec);
        const int p1 = 1 + (l1 - 1) * bank.Q + q1;
        lowpass_store(u1_spec.data(), bank.lowpass, plan, stride, out, c, p1, tmp);

        // Interaction paths visit (l2, q2) in ascending order, which matches
        // the canonical enumeration exactly.
        for (int l2 = l1 + 1; l2 <= bank.J; ++l2) {
          for (int q2 = 0; q2 < bank.Q; ++q2) {
            wavelet_modulus(u1_spec.data(), bank.wavelet(l2, q2), plan, work, u2);
            lowpass_store(u2.data(), bank.lowpass, plan, stride, out, c,
                          order2_idx, tmp);
            ++order2_idx;
          }
        }
      }
    }
  }
  return out;
}

std::vector<ScatteringCoeffs> scatter_batch(const std::vector<Image>& xs,
                                            const FilterBank& bank) {
  std::vector<ScatteringCoeffs> out(xs.size());
  std::string first_error;
  std::size_t first_error_idx = xs.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xs.size()); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = scatter(xs[static_cast<std::size_t>(i)], bank);
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
      {
        if (static_cast<std::size_t>(i) < first_error_idx) {
          first_error_idx = static_cast<std::size_t>(i);
          first_error = e.what();
        }
      }
    }
  }
  if (first_error_idx < xs.size())
    throw dimension_mismatch_error("scatter_batch: image " +
                                   std::to_string(first_error_idx) + ": " +
                                   first_error);
  return out;
}

void save_coeffs(const ScatteringCoeffs& c, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path + " for writing");
  BinaryWriter w(f);
  w.text("SCGC");
  w.u32(1);
  w.text(render_text_header({{"J", std::to_string(c.J)},
                             {"Q", std::to_string(c.Q)},
                             {"grid_size", std::to_string(c.grid_size)},
                             {"spatial", std::to_string(c.spatial)},
                             {"colors", std::to_string(c.colors)},
                             {"channels_per_color", std::to_string(c.channels_per_color)},
                             {"path_order", "1"}}));
  w.f32_array(c.data.data(), c.data.size());
  if (!f) throw io_error("write failed: " + path);
}

ScatteringCoeffs load_coeffs(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "SCGC")
    throw unsupported_format_error("not a scattering coefficients file: " + path);
  BinaryReader r(f);
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw version_mismatch_error("unsupported coefficients version " +
                                 std::to_string(version));
  const auto kv = parse_text_header(f);
  if (header_int(kv, "path_order") != 1)
    throw version_mismatch_error("unsupported path order version");

  ScatteringCoeffs c;
  c.J = static_cast<int>(header_int(kv, "J"));
  c.Q = static_cast<int>(header_int(kv, "Q"));
  c.grid_size = static_cast<int>(header_int(kv, "grid_size"));
  c.spatial = static_cast<int>(header_int(kv, "spatial"));
  c.colors = static_cast<int>(header_int(kv, "colors"));
  c.channels_per_color = static_cast<int>(header_int(kv, "channels_per_color"));
  c.path_index = canonical_paths(c.J, c.Q);
  if (static_cast<int>(c.path_index.size()) != c.channels_per_color)
    throw io_error("inconsistent channel count in " + path);
  c.data.resize(static_cast<std::size_t>(c.spatial) * c.spatial *
                c.channels_per_color * c.colors);
  BinaryReader rd(f);
  rd.f32_array(c.data.data(), c.data.size());
  return c;
}

double coeffs_l2_norm(const ScatteringCoeffs& a) {
  double s = 0.0;
  for (const double v : a.data) s += v * v;
  return std::sqrt(s);
}

double coeffs_l2_distance(const ScatteringCoeffs& a, const ScatteringCoeffs& b) {
  if (!a.same_layout(b)) throw layout_mismatch_error("coefficient layouts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace scatgen
