#include "scatgen/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scatgen/errors.hpp"
#include "scatgen/metrics.hpp"
#include "scatgen/rng.hpp"
#include "scatgen/serialize.hpp"

namespace scatgen {

void TrainConfig::validate() const {
  if (epochs < 0) throw invalid_parameter_error("epochs must be >= 0");
  if (batch_size < 1) throw invalid_parameter_error("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw invalid_parameter_error("learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw invalid_parameter_error("beta1 must be in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw invalid_parameter_error("beta2 must be in (0,1)");
  if (!(adam_eps > 0.0)) throw invalid_parameter_error("adam_eps must be > 0");
  if (d < 1 || J < 1 || Q < 1 || c0 < 8 || n_upsample < 0)
    throw invalid_parameter_error("bad architecture parameters");
  if (side != (GeneratorParams<float>::kBase << n_upsample))
    throw invalid_parameter_error("side must equal 4 * 2^n_upsample");
}

Image tensor_to_image(const Tensor<float>& t, int batch_index) {
  Image img(t.shape[1], t.shape[2], t.shape[3]);
  for (int y = 0; y < t.shape[1]; ++y)
    for (int x = 0; x < t.shape[2]; ++x)
      for (int c = 0; c < t.shape[3]; ++c)
        img.at(y, x, c) = static_cast<double>(t.at4(batch_index, y, x, c));
  return img;
}

namespace {

std::uint64_t image_set_hash(const std::vector<Image>& images) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const auto& img : images) {
    const int meta[3] = {img.height, img.width, img.channels};
    h = fnv1a64(meta, sizeof(meta), h);
    h = fnv1a64(img.data.data(), img.data.size() * sizeof(double), h);
  }
  return h;
}

constexpr char kCacheMagic[4] = {'S', 'C', 'G', 'E'};

bool try_load_cache(const std::string& path, std::size_t n, int d,
                    const WhiteningParams& w, std::uint64_t dataset_hash,
                    std::vector<float>& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  try {
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != std::string(kCacheMagic, 4)) return false;
    BinaryReader r(f);
    if (r.u32() != 1) return false;
    const auto kv = parse_text_header(f);
    if (static_cast<std::size_t>(header_int(kv, "n")) != n) return false;
    if (header_int(kv, "d") != d) return false;
    if (header_int(kv, "J") != w.J || header_int(kv, "Q") != w.Q ||
        header_int(kv, "grid_size") != w.grid_size)
      return false;
    if (header_str(kv, "whitening_hash") != std::to_string(w.content_hash()))
      return false;
    if (header_str(kv, "dataset_hash") != std::to_string(dataset_hash))
      return false;
    out.resize(n * static_cast<std::size_t>(d));
    BinaryReader rd(f);
    rd.f32_array(out.data(), out.size());
    return static_cast<bool>(f);
  } catch (const error&) {
    return false;
  }
}

void write_cache(const std::string& path, std::size_t n, int d,
                 const WhiteningParams& w, std::uint64_t dataset_hash,
                 const std::vector<float>& emb) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return;  // cache is best-effort
  BinaryWriter bw(f);
  bw.bytes(kCacheMagic, 4);
  bw.u32(1);
  bw.text(render_text_header({{"n", std::to_string(n)},
                              {"d", std::to_string(d)},
                              {"J", std::to_string(w.J)},
                              {"Q", std::to_string(w.Q)},
                              {"grid_size", std::to_string(w.grid_size)},
                              {"whitening_hash", std::to_string(w.content_hash())},
                              {"dataset_hash", std::to_string(dataset_hash)}}));
  bw.f32_array(emb.data(), emb.size());
}

}  // namespace

std::vector<float> embed_dataset(const std::vector<Image>& images,
                                 const FilterBank& bank,
                                 const WhiteningParams& whitening,
                                 const std::string& cache_path) {
  const std::size_t n = images.size();
  const int d = whitening.d;
  std::vector<float> emb;
  const std::uint64_t dataset_hash = image_set_hash(images);
  if (!cache_path.empty() &&
      try_load_cache(cache_path, n, d, whitening, dataset_hash, emb))
    return emb;

  emb.assign(n * static_cast<std::size_t>(d), 0.0f);
  const auto coeffs = scatter_batch(images, bank);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = embed_coeffs(coeffs[i], whitening);
    for (int k = 0; k < d; ++k)
      emb[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] =
          static_cast<float>(z[static_cast<std::size_t>(k)]);
  }
  if (!cache_path.empty())
    write_cache(cache_path, n, d, whitening, dataset_hash, emb);
  return emb;
}

double mean_reconstruction_psnr(const GeneratorParams<float>& params,
                                const std::vector<float>& embeddings,
                                const std::vector<Image>& images,
                                std::size_t limit) {
  const std::size_t n =
      (limit == 0) ? images.size() : std::min(limit, images.size());
  if (n == 0) throw empty_split_error("no images to evaluate");
  const int d = params.d_in;
  std::vector<double> vals(n, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    Tensor<float> z = Tensor<float>::zeros2(1, d);
    for (int k = 0; k < d; ++k)
      z.data[static_cast<std::size_t>(k)] =
          embeddings[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(k)];
    const Tensor<float> out = generator_forward(params, z);
    vals[static_cast<std::size_t>(i)] =
        psnr(images[static_cast<std::size_t>(i)], tensor_to_image(out, 0));
  }
  double s = 0.0;
  for (const double v : vals) s += v;
  return s / static_cast<double>(n);
}

Checkpoint train(const std::vector<Image>& images, const FilterBank& bank,
                 const WhiteningParams& whitening, const TrainConfig& cfg,
                 const MetricsSink& sink, const Checkpoint* resume,
                 const std::string& embed_cache_path) {
  cfg.validate();
  if (images.empty()) throw empty_split_error("training dataset is empty");
  if (whitening.d != cfg.d)
    throw incompatibility_error("whitening d=" + std::to_string(whitening.d) +
                                " but config d=" + std::to_string(cfg.d));
  if (bank.grid_size != cfg.side || whitening.grid_size != cfg.side)
    throw incompatibility_error("bank/whitening grid does not match side");

  const std::size_t n = images.size();
  const int d = cfg.d;
  const int side = cfg.side;
  const std::size_t img_entries = static_cast<std::size_t>(side) * side * 3;

  // Phi is fixed: embeddings are computed once and stay read-only.
  const std::vector<float> embeddings =
      embed_dataset(images, bank, whitening, embed_cache_path);
  const std::uint64_t frozen_hash =
      fnv1a64(embeddings.data(), embeddings.size() * sizeof(float),
              whitening.content_hash());

  std::vector<float> targets(n * img_entries);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = 0; e < img_entries; ++e)
      targets[i * img_entries + e] = static_cast<float>(images[i].data[e]);

  Checkpoint ckpt;
  ckpt.config = cfg;
  if (resume) {
    const TrainConfig& rc = resume->config;
    if (rc.d != cfg.d || rc.J != cfg.J || rc.Q != cfg.Q || rc.side != cfg.side ||
        rc.n_upsample != cfg.n_upsample || rc.c0 != cfg.c0 ||
        rc.seed != cfg.seed)
      throw incompatibility_error("resume checkpoint does not match config");
    ckpt.params = resume->params;
    ckpt.adam = resume->adam;
    ckpt.epoch = resume->epoch;
    ckpt.metrics = resume->metrics;
    ckpt.rng_state = resume->rng_state;
  } else {
    ckpt.params = init_generator<float>(d, cfg.c0, cfg.n_upsample, cfg.seed);
    ckpt.adam = AdamState<float>::like(ckpt.params);
    ckpt.epoch = 0;
    ckpt.rng_state = cfg.seed;
  }

  const AdamConfig adam_cfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps};
  const int batch = cfg.batch_size;
  const std::size_t psnr_subset = std::min<std::size_t>(64, n);

  std::vector<GeneratorParams<float>> item_grads(
      static_cast<std::size_t>(batch), ckpt.params.zeros_like());
  std::vector<double> item_abs(static_cast<std::size_t>(batch), 0.0);
  GeneratorParams<float> batch_grads = ckpt.params.zeros_like();

  for (int epoch = ckpt.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = shuffled_indices(n, cfg.seed, static_cast<std::uint64_t>(epoch));

    double epoch_abs = 0.0;
    std::size_t epoch_entries = 0;

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch)) {
      const int bsz = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch), n - start));
      const std::size_t batch_entries = static_cast<std::size_t>(bsz) * img_entries;
      const float inv_entries = static_cast<float>(1.0 / static_cast<double>(batch_entries));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
      for (int bi = 0; bi < bsz; ++bi) {
        const std::size_t idx = order[start + static_cast<std::size_t>(bi)];
        Tensor<float> z = Tensor<float>::zeros2(1, d);
        for (int k = 0; k < d; ++k)
          z.data[static_cast<std::size_t>(k)] =
              embeddings[idx * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];

        GeneratorTrace<float> trace;
        const Tensor<float> out = generator_forward(ckpt.params, z, &trace);

        // Mean-L1 subgradient over the whole batch: sign / (batch entries).
        Tensor<float> grad = out;
        const float* tgt = targets.data() + idx * img_entries;
        double abs_sum = 0.0;
        for (std::size_t e = 0; e < img_entries; ++e) {
          const float diff = out.data[e] - tgt[e];
          abs_sum += std::abs(static_cast<double>(diff));
          grad.data[e] = diff > 0.0f ? inv_entries : (diff < 0.0f ? -inv_entries : 0.0f);
        }
        item_abs[static_cast<std::size_t>(bi)] = abs_sum;
        generator_backward(ckpt.params, z, trace, grad,
                           item_grads[static_cast<std::size_t>(bi)]);
      }

      // Deterministic reduction: batch items in index order.
      auto acc_blocks = batch_grads.blocks();
      for (auto* blk : acc_blocks) blk->fill(0.0f);
      for (int bi = 0; bi < bsz; ++bi) {
        const auto src_blocks = item_grads[static_cast<std::size_t>(bi)].blocks();
        for (std::size_t b = 0; b < acc_blocks.size(); ++b)
          for (std::size_t k = 0; k < acc_blocks[b]->size(); ++k)
            acc_blocks[b]->data[k] += src_blocks[b]->data[k];
        epoch_abs += item_abs[static_cast<std::size_t>(bi)];
      }
      epoch_entries += batch_entries;

      try {
        adam_step(ckpt.params, batch_grads, ckpt.adam, adam_cfg);
      } catch (const nonfinite_error& e) {
        throw nonfinite_error("epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(start / static_cast<std::size_t>(batch)) +
                              ": " + e.what());
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_l1 = epoch_abs / static_cast<double>(epoch_entries);
    if (!std::isfinite(m.mean_l1))
      throw nonfinite_error("nonfinite epoch loss at epoch " + std::to_string(epoch));
    m.train_psnr = mean_reconstruction_psnr(ckpt.params, embeddings, images, psnr_subset);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ckpt.metrics.push_back(m);
    if (sink) sink(m);
    ckpt.epoch = epoch + 1;
  }

  const std::uint64_t after_hash =
      fnv1a64(embeddings.data(), embeddings.size() * sizeof(float),
              whitening.content_hash());
  if (after_hash != frozen_hash)
    throw error("fixed-embedding invariant violated during training");

  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path + " for writing");
  BinaryWriter w(f);
  w.text("SCGN");
  w.u32(Checkpoint::kVersion);

  const TrainConfig& c = ckpt.config;
  std::ostringstream lr, b1, b2, eps;
  lr.precision(17);
  b1.precision(17);
  b2.precision(17);
  eps.precision(17);
  lr << c.learning_rate;
  b1 << c.beta1;
  b2 << c.beta2;
  eps << c.adam_eps;
  w.text(render_text_header({
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"learning_rate", lr.str()},
      {"beta1", b1.str()},
      {"beta2", b2.str()},
      {"adam_eps", eps.str()},
      {"seed", std::to_string(c.seed)},
      {"deterministic", c.deterministic ? "1" : "0"},
      {"d", std::to_string(c.d)},
      {"J", std::to_string(c.J)},
      {"Q", std::to_string(c.Q)},
      {"side", std::to_string(c.side)},
      {"n_upsample", std::to_string(c.n_upsample)},
      {"c0", std::to_string(c.c0)},
      {"epoch", std::to_string(ckpt.epoch)},
      {"adam_t", std::to_string(ckpt.adam.t)},
      {"n_metrics", std::to_string(ckpt.metrics.size())},
  }));

  for (const auto* blk : ckpt.params.blocks()) w.f32_array(blk->data.data(), blk->size());
  for (const auto* blk : ckpt.adam.m.blocks()) w.f32_array(blk->data.data(), blk->size());
  for (const auto* blk : ckpt.adam.v.blocks()) w.f32_array(blk->data.data(), blk->size());
  w.u64(ckpt.rng_state);
  for (const auto& m : ckpt.metrics) {
    w.u32(static_cast<std::uint32_t>(m.epoch));
    w.f64(m.mean_l1);
    w.f64(m.train_psnr);
    w.f64(m.seconds);
  }
  w.u64(w.checksum());
  if (!f) throw io_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 16) throw checksum_mismatch_error("file too short: " + path);

  if (bytes.compare(0, 4, "SCGN") != 0)
    throw unsupported_format_error("not a checkpoint file: " + path);

  std::istringstream in(bytes);
  in.seekg(4);
  BinaryReader r(in);
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion)
    throw version_mismatch_error("checkpoint version " + std::to_string(version) +
                                 " unsupported");

  // Whole-body checksum; a truncated or corrupted file fails here.
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(bytes[bytes.size() - 8 + static_cast<std::size_t>(i)]))
              << (8 * i);
  if (fnv1a64(bytes.data(), bytes.size() - 8) != stored)
    throw checksum_mismatch_error("checkpoint checksum mismatch: " + path);

  const auto kv = parse_text_header(in);
  Checkpoint ckpt;
  TrainConfig& c = ckpt.config;
  c.epochs = static_cast<int>(header_int(kv, "epochs"));
  c.batch_size = static_cast<int>(header_int(kv, "batch_size"));
  c.learning_rate = header_double(kv, "learning_rate");
  c.beta1 = header_double(kv, "beta1");
  c.beta2 = header_double(kv, "beta2");
  c.adam_eps = header_double(kv, "adam_eps");
  c.seed = static_cast<std::uint64_t>(header_int(kv, "seed"));
  c.deterministic = header_int(kv, "deterministic") != 0;
  c.d = static_cast<int>(header_int(kv, "d"));
  c.J = static_cast<int>(header_int(kv, "J"));
  c.Q = static_cast<int>(header_int(kv, "Q"));
  c.side = static_cast<int>(header_int(kv, "side"));
  c.n_upsample = static_cast<int>(header_int(kv, "n_upsample"));
  c.c0 = static_cast<int>(header_int(kv, "c0"));
  ckpt.epoch = static_cast<int>(header_int(kv, "epoch"));

  ckpt.params = init_generator<float>(c.d, c.c0, c.n_upsample, 0);
  ckpt.adam = AdamState<float>::like(ckpt.params);
  ckpt.adam.t = header_int(kv, "adam_t");
  const auto n_metrics = static_cast<std::size_t>(header_int(kv, "n_metrics"));

  BinaryReader rd(in);
  for (auto* blk : ckpt.params.blocks()) rd.f32_array(blk->data.data(), blk->size());
  for (auto* blk : ckpt.adam.m.blocks()) rd.f32_array(blk->data.data(), blk->size());
  for (auto* blk : ckpt.adam.v.blocks()) rd.f32_array(blk->data.data(), blk->size());
  ckpt.rng_state = rd.u64();
  ckpt.metrics.resize(n_metrics);
  for (auto& m : ckpt.metrics) {
    m.epoch = static_cast<int>(rd.u32());
    std::uint64_t u = rd.u64();
    std::memcpy(&m.mean_l1, &u, 8);
    u = rd.u64();
    std::memcpy(&m.train_psnr, &u, 8);
    u = rd.u64();
    std::memcpy(&m.seconds, &u, 8);
  }
  return ckpt;
}

}  // namespace scatgen
