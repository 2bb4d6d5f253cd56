#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scatgen/adam.hpp"
#include "scatgen/embedding.hpp"
#include "scatgen/generator.hpp"
#include "scatgen/image.hpp"

namespace scatgen {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double learning_rate = 1e-3;  // optimizer defaults
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool deterministic = true;

  // Architecture.
  int d = 64;
  int J = 3;
  int Q = 4;
  int side = 32;
  int n_upsample = 3;
  int c0 = 128;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double mean_l1 = 0.0;
  double train_psnr = 0.0;
  double seconds = 0.0;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  TrainConfig config;
  GeneratorParams<float> params;
  AdamState<float> adam;
  int epoch = 0;
  std::uint64_t rng_state = 0;
  std::vector<EpochMetrics> metrics;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;

/// Minimizes the mean L1 reconstruction loss of the generator over the
/// whitened scattering embeddings with seeded-shuffled minibatch Adam.
/// Embeddings are computed once up front (optionally through a disk cache)
/// and are read-only during training, as are the whitening parameters —
/// asserted by hashing them before and after.
///
/// Gradients are accumulated over batch items in index order regardless of
/// worker count, so runs are bit-reproducible for a fixed seed.
Checkpoint train(const std::vector<Image>& images, const FilterBank& bank,
                 const WhiteningParams& whitening, const TrainConfig& cfg,
                 const MetricsSink& sink = {}, const Checkpoint* resume = nullptr,
                 const std::string& embed_cache_path = "");

/// Embeds every image, going through the cache file when a path is given.
/// The cache key is (J, Q, d, grid, whitening hash, image-set hash); a stale
/// or foreign cache is silently recomputed and rewritten.
std::vector<float> embed_dataset(const std::vector<Image>& images,
                                 const FilterBank& bank,
                                 const WhiteningParams& whitening,
                                 const std::string& cache_path = "");

/// Checkpoint file: magic "SCGN", u32 version, text header (architecture +
/// config + counters), parameter and moment blobs as little-endian 32-bit
/// reals in block order, metrics rows, trailing FNV-1a 64-bit checksum.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Mean PSNR of generator reconstructions against the given images.
double mean_reconstruction_psnr(const GeneratorParams<float>& params,
                                const std::vector<float>& embeddings,
                                const std::vector<Image>& images,
                                std::size_t limit = 0);

/// Converts a [1, side, side, 3] generator output row into an Image.
Image tensor_to_image(const Tensor<float>& t, int batch_index);

}  // namespace scatgen
