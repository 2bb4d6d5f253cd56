#include "scatgen/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "scatgen/errors.hpp"
#include "scatgen/rng.hpp"
#include "scatgen/serialize.hpp"

namespace scatgen {

namespace {

/// Flattened centered sample matrix (row-major n x dim) plus the mean.
struct CenteredData {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> mean;
  std::vector<double> rows;  // n * dim
};

CenteredData center(const std::vector<ScatteringCoeffs>& coeffs) {
  CenteredData cd;
  cd.n = coeffs.size();
  cd.dim = coeffs.front().flat_dim();
  cd.mean.assign(cd.dim, 0.0);
  for (const auto& c : coeffs) {
    if (!c.same_layout(coeffs.front()))
      throw layout_mismatch_error("scattering layouts differ across samples");
    for (std::size_t i = 0; i < cd.dim; ++i) cd.mean[i] += c.data[i];
  }
  const double inv_n = 1.0 / static_cast<double>(cd.n);
  for (double& m : cd.mean) m *= inv_n;

  cd.rows.resize(cd.n * cd.dim);
  for (std::size_t r = 0; r < cd.n; ++r)
    for (std::size_t i = 0; i < cd.dim; ++i)
      cd.rows[r * cd.dim + i] = coeffs[r].data[i] - cd.mean[i];
  return cd;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// Deterministic completion for rank-deficient directions: the first
/// canonical basis vector orthogonalized against the columns already taken.
std::vector<double> orthonormal_completion(const std::vector<double>& eigvecs,
                                           std::size_t dim, int taken) {
  std::vector<double> v(dim, 0.0);
  for (std::size_t seed_axis = 0; seed_axis < dim; ++seed_axis) {
    std::fill(v.begin(), v.end(), 0.0);
    v[seed_axis] = 1.0;
    for (int j = 0; j < taken; ++j) {
      const double* col = eigvecs.data() + static_cast<std::size_t>(j) * dim;
      const double proj = dot(v.data(), col, dim);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * col[i];
    }
    const double nrm = std::sqrt(dot(v.data(), v.data(), dim));
    if (nrm > 1e-6) {
      for (double& x : v) x /= nrm;
      return v;
    }
  }
  throw error("could not complete an orthonormal basis");
}

}  // namespace

void jacobi_eigh(std::vector<double>& a, int n, std::vector<double>& eigvals,
                 std::vector<double>& eigvecs) {
  const std::size_t nn = static_cast<std::size_t>(n);
  eigvecs.assign(nn * nn, 0.0);
  for (std::size_t i = 0; i < nn; ++i) eigvecs[i * nn + i] = 1.0;

  double frob = 0.0;
  for (const double v : a) frob += v * v;
  frob = std::sqrt(frob);
  if (frob == 0.0) {
    eigvals.assign(nn, 0.0);
    return;
  }

  constexpr int kMaxSweeps = 50;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double v = a[static_cast<std::size_t>(p) * nn + q];
        off += 2.0 * v * v;
      }
    if (std::sqrt(off) <= 1e-14 * frob) break;

    // Skip rotations on entries already negligible this sweep.
    const double thresh = (sweep < 3) ? 0.2 * off / (static_cast<double>(n) * n)
                                      : 0.0;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<std::size_t>(p) * nn + q];
        if (apq * apq <= thresh) continue;
        const double app = a[static_cast<std::size_t>(p) * nn + p];
        const double aqq = a[static_cast<std::size_t>(q) * nn + q];
        if (std::abs(apq) <= 1e-300 ||
            std::abs(apq) < 1e-17 * (std::abs(app) + std::abs(aqq)))
          continue;

        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0)
                             ? 1.0 / (theta + std::sqrt(theta * theta + 1.0))
                             : 1.0 / (theta - std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        double* rowp = a.data() + static_cast<std::size_t>(p) * nn;
        double* rowq = a.data() + static_cast<std::size_t>(q) * nn;
        for (int i = 0; i < n; ++i) {
          const double aip = rowp[i];
          const double aiq = rowq[i];
          rowp[i] = c * aip - s * aiq;
          rowq[i] = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a[static_cast<std::size_t>(i) * nn + p];
          const double aqi = a[static_cast<std::size_t>(i) * nn + q];
          a[static_cast<std::size_t>(i) * nn + p] = c * api - s * aqi;
          a[static_cast<std::size_t>(i) * nn + q] = s * api + c * aqi;
        }
        a[static_cast<std::size_t>(p) * nn + q] = 0.0;
        a[static_cast<std::size_t>(q) * nn + p] = 0.0;

        // Columns p and q of the accumulated rotation matrix (column-major).
        double* colp = eigvecs.data() + static_cast<std::size_t>(p) * nn;
        double* colq = eigvecs.data() + static_cast<std::size_t>(q) * nn;
        for (int i = 0; i < n; ++i) {
          const double vip = colp[i];
          const double viq = colq[i];
          colp[i] = c * vip - s * viq;
          colq[i] = s * vip + c * viq;
        }
      }
    }
  }

  eigvals.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) eigvals[i] = a[i * nn + i];

  // Sort descending, permuting eigenvector columns alongside.
  std::vector<int> order(nn);
  for (std::size_t i = 0; i < nn; ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return eigvals[static_cast<std::size_t>(x)] > eigvals[static_cast<std::size_t>(y)];
  });
  std::vector<double> vals_sorted(nn);
  std::vector<double> vecs_sorted(nn * nn);
  for (std::size_t j = 0; j < nn; ++j) {
    vals_sorted[j] = eigvals[static_cast<std::size_t>(order[j])];
    const double* src = eigvecs.data() + static_cast<std::size_t>(order[j]) * nn;
    std::copy(src, src + nn, vecs_sorted.begin() + static_cast<std::ptrdiff_t>(j * nn));
  }
  eigvals = std::move(vals_sorted);
  eigvecs = std::move(vecs_sorted);
}

WhiteningParams fit_whitening(const std::vector<ScatteringCoeffs>& coeffs,
                              int d, double eps) {
  if (coeffs.size() < 2)
    throw insufficient_samples_error("need at least 2 samples to fit whitening");
  const CenteredData cd = center(coeffs);
  const std::size_t n = cd.n;
  const std::size_t dim = cd.dim;
  if (d < 1 || static_cast<std::size_t>(d) > std::min(n, dim))
    throw invalid_parameter_error(
        "d too large: d=" + std::to_string(d) + ", min(n,dim)=" +
        std::to_string(std::min(n, dim)));

  WhiteningParams w;
  w.d = d;
  w.dim = dim;
  w.eps = eps;
  w.J = coeffs.front().J;
  w.Q = coeffs.front().Q;
  w.grid_size = coeffs.front().grid_size;
  w.colors = coeffs.front().colors;
  w.mean = cd.mean;
  w.eigvals.resize(static_cast<std::size_t>(d));
  w.eigvecs.assign(static_cast<std::size_t>(d) * dim, 0.0);

  const double inv_nm1 = 1.0 / static_cast<double>(n - 1);
  std::vector<double> vals, vecs;

  if (n < dim) {
    // Gram route: eigenvectors of B B^T / (n-1) lift to covariance
    // eigenvectors as B^T u / |B^T u|.
    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double g =
            dot(cd.rows.data() + i * dim, cd.rows.data() + j * dim, dim) * inv_nm1;
        gram[i * n + j] = g;
        gram[j * n + i] = g;
      }
    }
    jacobi_eigh(gram, static_cast<int>(n), vals, vecs);

    for (int k = 0; k < d; ++k) {
      double* out = w.eigvecs.data() + static_cast<std::size_t>(k) * dim;
      const double* u = vecs.data() + static_cast<std::size_t>(k) * n;
      for (std::size_t i = 0; i < n; ++i) {
        const double ui = u[i];
        const double* row = cd.rows.data() + i * dim;
        for (std::size_t jj = 0; jj < dim; ++jj) out[jj] += ui * row[jj];
      }
      // Below the data's effective rank the Gram eigenpairs are numerical
      // noise, and lifted vectors stop being orthogonal: re-orthonormalize
      // against the columns already taken. Two Gram-Schmidt passes keep the
      // orthogonality loss at machine precision even when the residual is
      // tiny; a residual collapsing by 1e8 marks a rank-deficient direction.
      const double nrm_before = std::sqrt(dot(out, out, dim));
      for (int pass = 0; pass < 2; ++pass) {
        for (int prev = 0; prev < k; ++prev) {
          const double* q = w.eigvecs.data() + static_cast<std::size_t>(prev) * dim;
          const double proj = dot(out, q, dim);
          for (std::size_t jj = 0; jj < dim; ++jj) out[jj] -= proj * q[jj];
        }
      }
      const double nrm = std::sqrt(dot(out, out, dim));
      if (nrm > 1e-8 * nrm_before && nrm > 1e-150) {
        for (std::size_t jj = 0; jj < dim; ++jj) out[jj] /= nrm;
      } else {
        // Rank-deficient direction (centering alone costs one): fill with a
        // deterministic orthonormal completion.
        auto fill = orthonormal_completion(w.eigvecs, dim, k);
        // The completion basis vector also gets the double Gram-Schmidt
        // treatment against all previous columns.
        for (int pass = 0; pass < 2; ++pass) {
          for (int prev = 0; prev < k; ++prev) {
            const double* q = w.eigvecs.data() + static_cast<std::size_t>(prev) * dim;
            const double proj = dot(fill.data(), q, dim);
            for (std::size_t jj = 0; jj < dim; ++jj) fill[jj] -= proj * q[jj];
          }
        }
        const double fn = std::sqrt(dot(fill.data(), fill.data(), dim));
        for (std::size_t jj = 0; jj < dim; ++jj) fill[jj] /= fn;
        std::copy(fill.begin(), fill.end(), out);
      }
      // Rayleigh re-estimate |B v|^2 / (n-1): equals the Gram eigenvalue for
      // true eigenpairs and reports the actual variance of noise directions,
      // so whitening never amplifies a direction beyond unit variance.
      double rayleigh = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = dot(cd.rows.data() + i * dim, out, dim);
        rayleigh += p * p;
      }
      w.eigvals[static_cast<std::size_t>(k)] = rayleigh * inv_nm1;
    }

    // Re-sorting keeps the descending-eigenvalue contract; for spectra above
    // the noise floor this is a no-op.
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return w.eigvals[static_cast<std::size_t>(a)] > w.eigvals[static_cast<std::size_t>(b)];
    });
    std::vector<double> vals_sorted(static_cast<std::size_t>(d));
    std::vector<double> vecs_sorted(static_cast<std::size_t>(d) * dim);
    for (int k = 0; k < d; ++k) {
      vals_sorted[static_cast<std::size_t>(k)] = w.eigvals[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      std::copy_n(w.eigvecs.data() + static_cast<std::size_t>(order[static_cast<std::size_t>(k)]) * dim, dim,
                  vecs_sorted.data() + static_cast<std::size_t>(k) * dim);
    }
    w.eigvals = std::move(vals_sorted);
    w.eigvecs = std::move(vecs_sorted);
  } else {
    std::vector<double> cov(dim * dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = cd.rows.data() + r * dim;
      for (std::size_t i = 0; i < dim; ++i) {
        const double ri = row[i];
        double* crow = cov.data() + i * dim;
        for (std::size_t j = i; j < dim; ++j) crow[j] += ri * row[j];
      }
    }
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i; j < dim; ++j) {
        cov[i * dim + j] *= inv_nm1;
        cov[j * dim + i] = cov[i * dim + j];
      }
    jacobi_eigh(cov, static_cast<int>(dim), vals, vecs);
    for (int k = 0; k < d; ++k) {
      w.eigvals[static_cast<std::size_t>(k)] = vals[static_cast<std::size_t>(k)];
      std::copy(vecs.begin() + static_cast<std::ptrdiff_t>(k * dim),
                vecs.begin() + static_cast<std::ptrdiff_t>((k + 1) * dim),
                w.eigvecs.begin() + static_cast<std::ptrdiff_t>(k) * static_cast<std::ptrdiff_t>(dim));
    }
  }

  const double top = w.eigvals[0];
  if (!(top > 0.0))
    throw invalid_parameter_error("degenerate data: covariance has no positive eigenvalue");
  const double floor_val = std::max(eps * top, 1e-300);
  for (double& v : w.eigvals) v = std::max(v, floor_val);
  return w;
}

std::vector<double> embed_coeffs(const ScatteringCoeffs& s,
                                 const WhiteningParams& w) {
  if (!w.layout_matches(s))
    throw layout_mismatch_error("coefficients do not match whitening layout");
  std::vector<double> centered(w.dim);
  for (std::size_t i = 0; i < w.dim; ++i) centered[i] = s.data[i] - w.mean[i];
  std::vector<double> out(static_cast<std::size_t>(w.d));
  for (int k = 0; k < w.d; ++k) {
    const double* col = w.eigvecs.data() + static_cast<std::size_t>(k) * w.dim;
    out[static_cast<std::size_t>(k)] =
        dot(centered.data(), col, w.dim) /
        std::sqrt(w.eigvals[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<double> project_coeffs(const ScatteringCoeffs& s,
                                   const WhiteningParams& w) {
  if (!w.layout_matches(s))
    throw layout_mismatch_error("coefficients do not match whitening layout");
  std::vector<double> centered(w.dim);
  for (std::size_t i = 0; i < w.dim; ++i) centered[i] = s.data[i] - w.mean[i];
  std::vector<double> out(static_cast<std::size_t>(w.d));
  for (int k = 0; k < w.d; ++k) {
    const double* col = w.eigvecs.data() + static_cast<std::size_t>(k) * w.dim;
    out[static_cast<std::size_t>(k)] = dot(centered.data(), col, w.dim);
  }
  return out;
}

std::vector<double> embed(const Image& x, const FilterBank& bank,
                          const WhiteningParams& w) {
  return embed_coeffs(scatter(x, bank), w);
}

LipschitzReport bilipschitz_report(const std::vector<Image>& images,
                                   const FilterBank& bank,
                                   const WhiteningParams& w, int n_pairs,
                                   std::uint64_t seed) {
  if (images.size() < 2)
    throw insufficient_samples_error("need at least 2 images");
  const std::size_t n = images.size();

  const auto coeffs = scatter_batch(images, bank);
  std::vector<std::vector<double>> proj(n);
  for (std::size_t i = 0; i < n; ++i) proj[i] = project_coeffs(coeffs[i], w);

  LipschitzReport rep;
  rep.n_pairs = n_pairs;
  rep.upper_ok = true;

  SplitMix64 rng(SplitMix64::stream_seed(seed, 0));
  std::vector<double> ratios;
  ratios.reserve(static_cast<std::size_t>(n_pairs));
  double alpha_max = 0.0;
  bool saw_inf = false;

  for (int p = 0; p < n_pairs; ++p) {
    const std::size_t i = static_cast<std::size_t>(rng.next_below(n));
    std::size_t j = static_cast<std::size_t>(rng.next_below(n - 1));
    if (j >= i) ++j;

    const double dx = image_l2_distance(images[i], images[j]);
    double dp = 0.0;
    for (int k = 0; k < w.d; ++k) {
      const double diff = proj[i][static_cast<std::size_t>(k)] -
                          proj[j][static_cast<std::size_t>(k)];
      dp += diff * diff;
    }
    dp = std::sqrt(dp);

    if (dp > dx + 1e-9) rep.upper_ok = false;
    if (dp < 1e-12) {
      ++rep.n_degenerate;
      saw_inf = true;
      continue;
    }
    const double r = dx / dp;
    ratios.push_back(r);
    alpha_max = std::max(alpha_max, r);
  }

  rep.alpha_max = saw_inf ? std::numeric_limits<double>::infinity() : alpha_max;

  std::sort(ratios.begin(), ratios.end());
  const auto percentile = [&](double pct) {
    if (ratios.empty()) return std::numeric_limits<double>::infinity();
    const double rank = pct / 100.0 * static_cast<double>(ratios.size());
    std::size_t idx = static_cast<std::size_t>(std::ceil(rank));
    if (idx > 0) --idx;
    if (idx >= ratios.size()) idx = ratios.size() - 1;
    return ratios[idx];
  };
  for (const double pct : {50.0, 90.0, 99.5})
    rep.quantile_alpha[pct] = percentile(pct);
  return rep;
}

GaussianizationReport gaussianization_report(
    const std::vector<ScatteringCoeffs>& coeffs, const WhiteningParams& w) {
  if (coeffs.size() < 8)
    throw insufficient_samples_error("need at least 8 samples");
  const std::size_t n = coeffs.size();
  const std::size_t d = static_cast<std::size_t>(w.d);

  std::vector<std::vector<double>> emb(n);
  for (std::size_t i = 0; i < n; ++i) emb[i] = embed_coeffs(coeffs[i], w);

  GaussianizationReport rep;
  rep.skewness.assign(d, 0.0);
  rep.excess_kurtosis.assign(d, 0.0);

  for (std::size_t k = 0; k < d; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += emb[i][k];
    m /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = emb[i][k] - m;
      m2 += dv * dv;
      m3 += dv * dv * dv;
      m4 += dv * dv * dv * dv;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 <= 1e-24) {
      rep.degenerate = true;
      continue;
    }
    rep.skewness[k] = m3 / std::pow(m2, 1.5);
    rep.excess_kurtosis[k] = m4 / (m2 * m2) - 3.0;
  }

  const auto median_abs = [](std::vector<double> v) {
    for (double& x : v) x = std::abs(x);
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  };
  rep.median_abs_skewness = median_abs(rep.skewness);
  rep.median_abs_excess_kurtosis = median_abs(rep.excess_kurtosis);
  return rep;
}

std::uint64_t WhiteningParams::content_hash() const {
  std::uint64_t h = fnv1a64(&d, sizeof(d));
  h = fnv1a64(&dim, sizeof(dim), h);
  const int layout[4] = {J, Q, grid_size, colors};
  h = fnv1a64(layout, sizeof(layout), h);
  h = fnv1a64(mean.data(), mean.size() * sizeof(double), h);
  h = fnv1a64(eigvals.data(), eigvals.size() * sizeof(double), h);
  h = fnv1a64(eigvecs.data(), eigvecs.size() * sizeof(double), h);
  return h;
}

void save_whitening(const WhiteningParams& w, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path + " for writing");
  BinaryWriter bw(f);
  bw.text("SCGW");
  bw.u32(1);
  bw.text(render_text_header({{"d", std::to_string(w.d)},
                              {"dim", std::to_string(w.dim)},
                              {"J", std::to_string(w.J)},
                              {"Q", std::to_string(w.Q)},
                              {"grid_size", std::to_string(w.grid_size)},
                              {"colors", std::to_string(w.colors)},
                              {"eps", std::to_string(w.eps)}}));
  bw.f32_array(w.mean.data(), w.mean.size());
  bw.f32_array(w.eigvals.data(), w.eigvals.size());
  bw.f32_array(w.eigvecs.data(), w.eigvecs.size());
  if (!f) throw io_error("write failed: " + path);
}

WhiteningParams load_whitening(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "SCGW")
    throw unsupported_format_error("not a whitening file: " + path);
  BinaryReader br(f);
  const std::uint32_t version = br.u32();
  if (version != 1)
    throw version_mismatch_error("unsupported whitening version " +
                                 std::to_string(version));
  const auto kv = parse_text_header(f);

  WhiteningParams w;
  w.d = static_cast<int>(header_int(kv, "d"));
  w.dim = static_cast<std::size_t>(header_int(kv, "dim"));
  w.J = static_cast<int>(header_int(kv, "J"));
  w.Q = static_cast<int>(header_int(kv, "Q"));
  w.grid_size = static_cast<int>(header_int(kv, "grid_size"));
  w.colors = static_cast<int>(header_int(kv, "colors"));
  w.eps = header_double(kv, "eps");
  w.mean.resize(w.dim);
  w.eigvals.resize(static_cast<std::size_t>(w.d));
  w.eigvecs.resize(static_cast<std::size_t>(w.d) * w.dim);
  BinaryReader rd(f);
  rd.f32_array(w.mean.data(), w.mean.size());
  rd.f32_array(w.eigvals.data(), w.eigvals.size());
  rd.f32_array(w.eigvecs.data(), w.eigvecs.size());
  return w;
}

}  // namespace scatgen
