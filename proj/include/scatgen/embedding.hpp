#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scatgen/scattering.hpp"

namespace scatgen {

/// Affine whitening fitted on scattering coefficients: top-d eigenpairs of
/// the empirical covariance plus the empirical mean. Immutable once fitted.
struct WhiteningParams {
  int d = 0;
  std::size_t dim = 0;  // flattened scattering dimension
  // Layout guard copied from the fitting coefficients.
  int J = 0, Q = 0, grid_size = 0, colors = 0;
  double eps = 1e-8;  // relative eigenvalue floor used at fit time

  std::vector<double> mean;     // dim
  std::vector<double> eigvals;  // d, descending, floored
  std::vector<double> eigvecs;  // column-major dim x d; column j contiguous

  bool layout_matches(const ScatteringCoeffs& c) const {
    return J == c.J && Q == c.Q && grid_size == c.grid_size &&
           colors == c.colors && dim == c.flat_dim();
  }

  /// Hash of all numeric content; keys embedding caches and the
  /// fixed-embedding assertion during training.
  std::uint64_t content_hash() const;
};

/// Fits mean + top-d covariance eigenpairs, with a (n-1) covariance
/// convention. When n < dim the n x n Gram matrix of centered samples is
/// decomposed and eigenvectors are lifted; otherwise the dim x dim
/// covariance is decomposed directly. Eigenvalues are floored at
/// eps * max_eigenvalue before any inverse square root downstream.
WhiteningParams fit_whitening(const std::vector<ScatteringCoeffs>& coeffs,
                              int d, double eps = 1e-8);

/// Phi(x) = D_d^{-1/2} Q_d^T (flatten(S_J(x)) - mean); length d.
std::vector<double> embed(const Image& x, const FilterBank& bank,
                          const WhiteningParams& w);
std::vector<double> embed_coeffs(const ScatteringCoeffs& s,
                                 const WhiteningParams& w);

/// Unwhitened projection coordinates Q_d^T (flatten(s) - mean); the norm of
/// a difference of two of these equals || P_{V_d} (S(x) - S(x')) ||.
std::vector<double> project_coeffs(const ScatteringCoeffs& s,
                                   const WhiteningParams& w);

struct LipschitzReport {
  double alpha_max = 0.0;  // worst ratio ||x - x'|| / ||P(S(x) - S(x'))||
  std::map<double, double> quantile_alpha;  // percentile -> alpha
  int n_pairs = 0;
  bool upper_ok = false;  // ||P dS|| <= ||dx|| held for every pair
  int n_degenerate = 0;   // pairs with embedded distance below 1e-12
};

/// Samples n_pairs seeded random index pairs (i != i') and measures the
/// distance distortion of the unwhitened projection. Degenerate pairs are
/// flagged and excluded from the quantiles.
LipschitzReport bilipschitz_report(const std::vector<Image>& images,
                                   const FilterBank& bank,
                                   const WhiteningParams& w, int n_pairs,
                                   std::uint64_t seed);

struct GaussianizationReport {
  std::vector<double> skewness;         // per embedded dimension
  std::vector<double> excess_kurtosis;  // per embedded dimension
  double median_abs_skewness = 0.0;
  double median_abs_excess_kurtosis = 0.0;
  bool degenerate = false;  // some dimension had (near-)zero variance
};

/// Per-dimension moments of the embedded sample; purely informational.
/// Requires >= 8 samples.
GaussianizationReport gaussianization_report(
    const std::vector<ScatteringCoeffs>& coeffs, const WhiteningParams& w);

/// File format: magic "SCGW", u32 version 1, text header
/// (d, dim, J, Q, grid_size, colors, eps), then mean, eigvals, eigvecs as
/// little-endian 32-bit reals in that order (eigvecs column-major).
void save_whitening(const WhiteningParams& w, const std::string& path);
WhiteningParams load_whitening(const std::string& path);

/// Symmetric eigendecomposition by cyclic Jacobi rotations. A is row-major
/// n x n and is destroyed. Outputs are sorted by descending eigenvalue;
/// eigvecs is column-major n x n (eigenvector j contiguous at j*n).
void jacobi_eigh(std::vector<double>& a, int n, std::vector<double>& eigvals,
                 std::vector<double>& eigvecs);

}  // namespace scatgen
