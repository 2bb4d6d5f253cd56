#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scatgen/image.hpp"
#include "scatgen/wavelet_bank.hpp"

namespace scatgen {

/// One scattering path. order 0: the plain low-pass; order 1: (l1, q1);
/// order 2: (l1, q1) then (l2, q2) with l1 < l2. Unused indices are -1.
struct ScatteringPath {
  int order = 0;
  int l1 = -1, q1 = -1;
  int l2 = -1, q2 = -1;

  bool operator==(const ScatteringPath&) const = default;
};

/// Order-2 scattering coefficients of one image.
///
/// data is row-major (y, x, cc) with spatial = grid_size / 2^J rows/cols and
/// cc = color * K_J + path: one block of K_J path channels per color, colors
/// concatenated. path_index lists the K_J paths in canonical order: order 0,
/// then order 1 sorted by (l1, q1), then order 2 sorted by (l1, q1, l2, q2).
/// This layout is the bit-exact serialization contract.
struct ScatteringCoeffs {
  int J = 0;
  int Q = 0;
  int grid_size = 0;
  int spatial = 0;
  int channels_per_color = 0;  // K_J
  int colors = 1;
  std::vector<ScatteringPath> path_index;
  std::vector<double> data;

  double& at(int y, int x, int color, int path) {
    return data[(static_cast<std::size_t>(y) * spatial + x) *
                    (static_cast<std::size_t>(channels_per_color) * colors) +
                static_cast<std::size_t>(color) * channels_per_color + path];
  }
  double at(int y, int x, int color, int path) const {
    return data[(static_cast<std::size_t>(y) * spatial + x) *
                    (static_cast<std::size_t>(channels_per_color) * colors) +
                static_cast<std::size_t>(color) * channels_per_color + path];
  }

  std::size_t flat_dim() const { return data.size(); }

  bool same_layout(const ScatteringCoeffs& o) const {
    return J == o.J && Q == o.Q && grid_size == o.grid_size &&
           colors == o.colors && spatial == o.spatial &&
           channels_per_color == o.channels_per_color;
  }
};

struct ScatteringDims {
  long long k_j = 0;     // channels per color
  int spatial = 0;       // grid_size / 2^J
  double alpha_j = 0.0;  // 2^(-2J) * K_J, the dimension ratio
};

/// K_J = 1 + Q*J + Q^2*J*(J-1)/2 and friends. Validates parameters the same
/// way build_filter_bank does.
ScatteringDims scattering_dims(int J, int Q, int grid_size);

/// Canonical path enumeration for (J, Q); length K_J.
std::vector<ScatteringPath> canonical_paths(int J, int Q);

/// Order-2 scattering transform of one image, computed independently per
/// color channel. All convolutions are circular; each output channel is
/// low-passed by phi_J and subsampled by 2^J. Pure function of its inputs.
///
/// Throws dimension_mismatch_error if the image is not square of the bank's
/// grid size.
ScatteringCoeffs scatter(const Image& x, const FilterBank& bank);

/// Elementwise scatter over a batch; may run per-image work in parallel,
/// results identical to the sequential loop. Errors are rethrown with the
/// offending index prepended.
std::vector<ScatteringCoeffs> scatter_batch(const std::vector<Image>& xs,
                                            const FilterBank& bank);

/// File format: text header (version, J, Q, grid_size, spatial, colors,
/// channels_per_color, path_order) followed by the coefficient array as
/// little-endian 32-bit reals in data order.
void save_coeffs(const ScatteringCoeffs& c, const std::string& path);
ScatteringCoeffs load_coeffs(const std::string& path);

/// Flat L2 norm / distance over all coefficients.
double coeffs_l2_norm(const ScatteringCoeffs& a);
double coeffs_l2_distance(const ScatteringCoeffs& a, const ScatteringCoeffs& b);

}  // namespace scatgen
