#include "scatgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scatgen/errors.hpp"
#include "scatgen/metrics.hpp"
#include "scatgen/png_io.hpp"
#include "scatgen/rng.hpp"
#include "scatgen/serialize.hpp"

namespace scatgen {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory " + dir);
}

FilterBank bank_for(const WhiteningParams& w) {
  return build_filter_bank(w.J, w.Q, w.grid_size);
}

void check_compat(const Checkpoint& ckpt, const WhiteningParams& w) {
  if (ckpt.config.d != w.d)
    throw incompatibility_error("latent dimension differs: checkpoint d=" +
                                std::to_string(ckpt.config.d) + ", whitening d=" +
                                std::to_string(w.d));
  if (ckpt.config.side != w.grid_size)
    throw incompatibility_error("image side differs: checkpoint side=" +
                                std::to_string(ckpt.config.side) +
                                ", whitening grid=" + std::to_string(w.grid_size));
}

Tensor<float> latent_tensor(const std::vector<double>& z) {
  Tensor<float> t = Tensor<float>::zeros2(1, static_cast<int>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i)
    t.data[i] = static_cast<float>(z[i]);
  return t;
}

Image decode_latent(const GeneratorParams<float>& params, const Tensor<float>& z) {
  const Tensor<float> out = generator_forward(params, z);
  return tensor_to_image(out, 0);
}

std::string cache_path_for(const std::string& dataset_root, const std::string& split,
                           const WhiteningParams& w) {
  std::ostringstream os;
  os << "embed_cache_" << split << "_J" << w.J << "_Q" << w.Q << "_d" << w.d
     << "_g" << w.grid_size << ".bin";
  return (fs::path(dataset_root) / os.str()).string();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void write_effective_config(const std::string& dir,
                            const std::map<std::string, std::string>& kv) {
  ensure_dir(dir);
  std::ofstream f((fs::path(dir) / "effective_config.txt").string());
  if (!f) throw io_error("cannot write effective config in " + dir);
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

DatasetManifest cmd_make_dataset(const MakeDatasetOptions& opt) {
  if (opt.root.empty()) throw invalid_parameter_error("dataset root required");
  PolygonOptions popt;
  popt.antialias = opt.antialias;
  auto m = split_manifest(opt.root, opt.n_train, opt.n_test, opt.side, opt.seed, popt);
  write_effective_config(opt.root, {{"command", "make-dataset"},
                                    {"n_train", std::to_string(opt.n_train)},
                                    {"n_test", std::to_string(opt.n_test)},
                                    {"side", std::to_string(opt.side)},
                                    {"seed", std::to_string(opt.seed)},
                                    {"antialias", opt.antialias ? "1" : "0"}});
  return m;
}

WhiteningParams cmd_fit_embedding(const FitEmbeddingOptions& opt) {
  const auto manifest = load_manifest(opt.dataset_root);
  auto images = load_split(manifest, opt.split);
  if (opt.limit > 0 && static_cast<std::size_t>(opt.limit) < images.size())
    images.resize(static_cast<std::size_t>(opt.limit));
  if (images.empty()) throw empty_split_error("split " + opt.split + " is empty");

  const FilterBank bank = build_filter_bank(opt.J, opt.Q, manifest.side);
  const auto coeffs = scatter_batch(images, bank);
  if (!opt.coeffs_dir.empty()) {
    ensure_dir(opt.coeffs_dir);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "coeffs_%05zu.bin", i);
      save_coeffs(coeffs[i], (fs::path(opt.coeffs_dir) / name).string());
    }
  }
  WhiteningParams w = fit_whitening(coeffs, opt.d, opt.eps);
  save_whitening(w, opt.out_path);

  const std::string dir = fs::path(opt.out_path).parent_path().string();
  write_effective_config(dir.empty() ? "." : dir,
                         {{"command", "fit-embedding"},
                          {"dataset", opt.dataset_root},
                          {"split", opt.split},
                          {"limit", std::to_string(opt.limit)},
                          {"J", std::to_string(opt.J)},
                          {"Q", std::to_string(opt.Q)},
                          {"d", std::to_string(opt.d)},
                          {"eps", std::to_string(opt.eps)},
                          {"out", opt.out_path}});
  return w;
}

Checkpoint cmd_train(const TrainOptions& opt) {
  const auto manifest = load_manifest(opt.dataset_root);
  const auto images = load_split(manifest, "train");
  const WhiteningParams w = load_whitening(opt.whitening_path);
  const FilterBank bank = bank_for(w);

  Checkpoint resume;
  const Checkpoint* resume_ptr = nullptr;
  if (!opt.resume_path.empty()) {
    resume = load_checkpoint(opt.resume_path);
    resume_ptr = &resume;
  }

  std::ofstream metrics;
  if (!opt.metrics_out.empty()) {
    metrics.open(opt.metrics_out);
    if (!metrics) throw io_error("cannot open " + opt.metrics_out);
    metrics << "epoch,mean_l1,train_psnr,seconds\n";
    // Rows already collected by a resumed run are replayed for continuity.
    if (resume_ptr)
      for (const auto& m : resume.metrics)
        metrics << m.epoch << "," << m.mean_l1 << "," << format_psnr(m.train_psnr)
                << "," << m.seconds << "\n";
  }

  const MetricsSink sink = [&](const EpochMetrics& m) {
    if (metrics.is_open()) {
      metrics << m.epoch << "," << m.mean_l1 << "," << format_psnr(m.train_psnr)
              << "," << m.seconds << "\n";
      metrics.flush();
    }
    if (opt.echo_progress)
      std::cout << "epoch " << m.epoch << "  mean_l1 " << m.mean_l1
                << "  train_psnr " << format_psnr(m.train_psnr) << "  ("
                << m.seconds << " s)\n";
  };

  const std::string cache =
      opt.use_cache ? cache_path_for(opt.dataset_root, "train", w) : "";
  Checkpoint ckpt = train(images, bank, w, opt.cfg, sink, resume_ptr, cache);
  save_checkpoint(ckpt, opt.ckpt_out);

  const std::string dir = fs::path(opt.ckpt_out).parent_path().string();
  write_effective_config(
      dir.empty() ? "." : dir,
      {{"command", "train"},
       {"dataset", opt.dataset_root},
       {"whitening", opt.whitening_path},
       {"ckpt_out", opt.ckpt_out},
       {"resume", opt.resume_path},
       {"epochs", std::to_string(opt.cfg.epochs)},
       {"batch_size", std::to_string(opt.cfg.batch_size)},
       {"learning_rate", std::to_string(opt.cfg.learning_rate)},
       {"seed", std::to_string(opt.cfg.seed)},
       {"deterministic", opt.cfg.deterministic ? "1" : "0"},
       {"d", std::to_string(opt.cfg.d)},
       {"c0", std::to_string(opt.cfg.c0)},
       {"n_upsample", std::to_string(opt.cfg.n_upsample)}});
  return ckpt;
}

ReconstructResult cmd_reconstruct(const ReconstructOptions& opt) {
  const Checkpoint ckpt = load_checkpoint(opt.ckpt_path);
  const WhiteningParams w = load_whitening(opt.whitening_path);
  check_compat(ckpt, w);
  const FilterBank bank = bank_for(w);
  ensure_dir(opt.out_dir);

  ReconstructResult res;
  std::ofstream csv((fs::path(opt.out_dir) / "psnr.csv").string());
  csv << "image,psnr_db\n";
  double sum = 0.0;
  for (const auto& path : opt.images) {
    const Image x = read_png(path);
    if (x.height != ckpt.config.side || x.width != ckpt.config.side)
      throw incompatibility_error("image " + path + " is " +
                                  std::to_string(x.height) + "x" +
                                  std::to_string(x.width) + ", model side is " +
                                  std::to_string(ckpt.config.side));
    const auto z = embed(x, bank, w);
    const Image recon = decode_latent(ckpt.params, latent_tensor(z));
    const std::string out =
        (fs::path(opt.out_dir) / ("recon_" + fs::path(path).filename().string()))
            .string();
    write_png(recon, out);
    const double p = psnr(x, recon);
    res.out_files.push_back(out);
    res.psnr_db.push_back(p);
    sum += p;
    csv << fs::path(path).filename().string() << "," << format_psnr(p) << "\n";
  }
  res.mean_psnr = opt.images.empty() ? 0.0 : sum / static_cast<double>(opt.images.size());
  csv << "mean," << format_psnr(res.mean_psnr) << "\n";

  write_effective_config(opt.out_dir, {{"command", "reconstruct"},
                                       {"ckpt", opt.ckpt_path},
                                       {"whitening", opt.whitening_path},
                                       {"n_images", std::to_string(opt.images.size())}});
  return res;
}

SampleResult cmd_sample(const SampleOptions& opt) {
  if (opt.n <= 0)
    throw invalid_parameter_error("sample: n must be >= 1, refusing an empty grid");
  const Checkpoint ckpt = load_checkpoint(opt.ckpt_path);
  ensure_dir(opt.out_dir);
  const int d = ckpt.config.d;
  const int side = ckpt.config.side;

  SampleResult res;
  std::vector<Image> samples;
  samples.reserve(static_cast<std::size_t>(opt.n));
  for (int i = 0; i < opt.n; ++i) {
    SplitMix64 rng(SplitMix64::stream_seed(opt.seed, static_cast<std::uint64_t>(i)));
    std::vector<double> z(static_cast<std::size_t>(d));
    for (auto& v : z) v = rng.next_gaussian();
    Image img = decode_latent(ckpt.params, latent_tensor(z));
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04d.png", i);
    const std::string out = (fs::path(opt.out_dir) / name).string();
    write_png(img, out);
    res.out_files.push_back(out);
    samples.push_back(std::move(img));
  }

  // ceil(sqrt(n)) columns; unused cells stay black.
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(opt.n))));
  const int rows = (opt.n + cols - 1) / cols;
  Image grid(rows * side, cols * side, 3);
  for (int i = 0; i < opt.n; ++i) {
    const int r = i / cols, c = i % cols;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int ch = 0; ch < 3; ++ch)
          grid.at(r * side + y, c * side + x, ch) =
              samples[static_cast<std::size_t>(i)].at(y, x, ch);
  }
  res.grid_file = (fs::path(opt.out_dir) / "grid.png").string();
  write_png(grid, res.grid_file);

  write_effective_config(opt.out_dir, {{"command", "sample"},
                                       {"ckpt", opt.ckpt_path},
                                       {"n", std::to_string(opt.n)},
                                       {"seed", std::to_string(opt.seed)}});
  return res;
}

std::vector<std::string> cmd_interpolate(const InterpolateOptions& opt) {
  if (opt.steps < 2) throw invalid_parameter_error("interpolate: steps must be >= 2");
  const Checkpoint ckpt = load_checkpoint(opt.ckpt_path);
  const WhiteningParams w = load_whitening(opt.whitening_path);
  check_compat(ckpt, w);
  const FilterBank bank = bank_for(w);
  ensure_dir(opt.out_dir);

  const Image a = read_png(opt.image_a);
  const Image b = read_png(opt.image_b);
  if (a.height != ckpt.config.side || b.height != ckpt.config.side ||
      a.width != ckpt.config.side || b.width != ckpt.config.side)
    throw incompatibility_error("interpolation endpoints do not match model side");

  const auto za = embed(a, bank, w);
  const auto zb = embed(b, bank, w);

  std::vector<std::string> files;
  for (int k = 0; k < opt.steps; ++k) {
    std::vector<double> z(za.size());
    if (k == 0) {
      z = za;  // endpoints take the exact latent, no arithmetic
    } else if (k == opt.steps - 1) {
      z = zb;
    } else {
      const double alpha = static_cast<double>(k) / static_cast<double>(opt.steps - 1);
      for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = (1.0 - alpha) * za[i] + alpha * zb[i];
    }
    const Image frame = decode_latent(ckpt.params, latent_tensor(z));
    char name[32];
    std::snprintf(name, sizeof(name), "step_%03d.png", k);
    const std::string out = (fs::path(opt.out_dir) / name).string();
    write_png(frame, out);
    files.push_back(out);
  }

  write_effective_config(opt.out_dir, {{"command", "interpolate"},
                                       {"ckpt", opt.ckpt_path},
                                       {"whitening", opt.whitening_path},
                                       {"image_a", opt.image_a},
                                       {"image_b", opt.image_b},
                                       {"steps", std::to_string(opt.steps)}});
  return files;
}

EvalResult cmd_eval(const EvalOptions& opt) {
  const Checkpoint ckpt = load_checkpoint(opt.ckpt_path);
  const WhiteningParams w = load_whitening(opt.whitening_path);
  check_compat(ckpt, w);
  const FilterBank bank = bank_for(w);

  const auto manifest = load_manifest(opt.dataset_root);
  auto images = load_split(manifest, opt.split);
  if (opt.limit > 0 && static_cast<std::size_t>(opt.limit) < images.size())
    images.resize(static_cast<std::size_t>(opt.limit));
  if (images.empty()) throw empty_split_error("split " + opt.split + " is empty");

  const auto emb = embed_dataset(images, bank, w);
  std::vector<double> psnrs(images.size());
  SparsityStats sparsity;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Tensor<float> z = Tensor<float>::zeros2(1, w.d);
    for (int k = 0; k < w.d; ++k)
      z.data[static_cast<std::size_t>(k)] =
          emb[i * static_cast<std::size_t>(w.d) + static_cast<std::size_t>(k)];
    const Tensor<float> out = generator_forward(ckpt.params, z, nullptr, &sparsity);
    psnrs[i] = psnr(images[i], tensor_to_image(out, 0));
  }

  EvalResult res;
  res.split = opt.split;
  res.n = images.size();
  double sum = 0.0;
  for (const double p : psnrs) sum += p;
  res.mean_psnr = sum / static_cast<double>(psnrs.size());
  res.median_psnr = median(psnrs);
  res.sparsity_pct = 100.0 * sparsity.fraction();

  if (!opt.out_csv.empty()) {
    std::ofstream csv(opt.out_csv);
    if (!csv) throw io_error("cannot open " + opt.out_csv);
    csv << "split,n,mean_psnr,median_psnr,sparsity_pct\n";
    csv << res.split << "," << res.n << "," << format_psnr(res.mean_psnr) << ","
        << format_psnr(res.median_psnr) << ",";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", res.sparsity_pct);
    csv << buf << "\n";
  }
  return res;
}

DiagnoseResult cmd_diagnose(const DiagnoseOptions& opt) {
  const WhiteningParams w = load_whitening(opt.whitening_path);
  const FilterBank bank = bank_for(w);
  ensure_dir(opt.out_dir);

  const auto manifest = load_manifest(opt.dataset_root);
  auto images = load_split(manifest, opt.split);
  if (opt.limit > 0 && static_cast<std::size_t>(opt.limit) < images.size())
    images.resize(static_cast<std::size_t>(opt.limit));
  if (images.size() < 2) throw insufficient_samples_error("diagnose needs >= 2 images");

  DiagnoseResult res;
  res.lp_bound = littlewood_paley_bound(bank);
  res.lp_lower = littlewood_paley_lower(bank);
  res.lp_ok = res.lp_bound <= 1.0 + 1e-9;

  // Scattering contraction over seeded pairs.
  const auto coeffs = scatter_batch(images, bank);
  SplitMix64 rng(SplitMix64::stream_seed(opt.seed, 1));
  res.contraction_ok = true;
  const int n_contraction = std::min(opt.n_pairs, 200);
  for (int p = 0; p < n_contraction; ++p) {
    const std::size_t i = static_cast<std::size_t>(rng.next_below(images.size()));
    std::size_t j = static_cast<std::size_t>(rng.next_below(images.size() - 1));
    if (j >= i) ++j;
    const double ds = coeffs_l2_distance(coeffs[i], coeffs[j]);
    const double dx = image_l2_distance(images[i], images[j]);
    if (ds > dx + 1e-9) res.contraction_ok = false;
  }

  res.lipschitz = bilipschitz_report(images, bank, w, opt.n_pairs, opt.seed);
  res.gaussianization = gaussianization_report(coeffs, w);

  {
    std::ofstream csv((fs::path(opt.out_dir) / "lipschitz.csv").string());
    csv << "percentile,alpha\n";
    for (const auto& [pct, alpha] : res.lipschitz.quantile_alpha)
      csv << pct << "," << alpha << "\n";
    csv << "max," << res.lipschitz.alpha_max << "\n";
  }
  {
    std::ofstream csv((fs::path(opt.out_dir) / "gaussianization.csv").string());
    csv << "dimension,skewness,excess_kurtosis\n";
    for (std::size_t k = 0; k < res.gaussianization.skewness.size(); ++k)
      csv << k << "," << res.gaussianization.skewness[k] << ","
          << res.gaussianization.excess_kurtosis[k] << "\n";
    csv << "median_abs," << res.gaussianization.median_abs_skewness << ","
        << res.gaussianization.median_abs_excess_kurtosis << "\n";
  }

  res.all_pass = res.lp_ok && res.contraction_ok && res.lipschitz.upper_ok;
  {
    std::ofstream summary((fs::path(opt.out_dir) / "summary.txt").string());
    summary << (res.lp_ok ? "PASS" : "FAIL") << " littlewood_paley_bound "
            << res.lp_bound << " (lower " << res.lp_lower << ")\n";
    summary << (res.contraction_ok ? "PASS" : "FAIL") << " scattering_contraction\n";
    summary << (res.lipschitz.upper_ok ? "PASS" : "FAIL") << " upper_lipschitz\n";
    summary << "alpha_max " << res.lipschitz.alpha_max << "\n";
    for (const auto& [pct, alpha] : res.lipschitz.quantile_alpha)
      summary << "alpha_p" << pct << " " << alpha << "\n";
    summary << "degenerate_pairs " << res.lipschitz.n_degenerate << "\n";
    summary << "median_abs_skewness " << res.gaussianization.median_abs_skewness << "\n";
    summary << "median_abs_excess_kurtosis "
            << res.gaussianization.median_abs_excess_kurtosis << "\n";
  }

  if (opt.dump_filters) {
    const std::string fdir = (fs::path(opt.out_dir) / "filters").string();
    ensure_dir(fdir);
    const int n = bank.grid_size;
    const auto dump = [&](const std::vector<double>& filt, const std::string& name) {
      double mx = 0.0;
      for (const double v : filt) mx = std::max(mx, std::abs(v));
      Image img(n, n, 3);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          // fftshift for display
          const int sy = (y + n / 2) % n, sx = (x + n / 2) % n;
          const double v = mx > 0.0 ? std::abs(filt[static_cast<std::size_t>(sy) * n + sx]) / mx : 0.0;
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
        }
      write_png(img, (fs::path(fdir) / name).string());
    };
    for (int l = 1; l <= bank.J; ++l)
      for (int q = 0; q < bank.Q; ++q) {
        char name[48];
        std::snprintf(name, sizeof(name), "psi_l%d_q%d.png", l, q);
        dump(bank.wavelet(l, q), name);
      }
    dump(bank.lowpass, "phi.png");
  }

  write_effective_config(opt.out_dir, {{"command", "diagnose"},
                                       {"dataset", opt.dataset_root},
                                       {"whitening", opt.whitening_path},
                                       {"split", opt.split},
                                       {"limit", std::to_string(opt.limit)},
                                       {"n_pairs", std::to_string(opt.n_pairs)},
                                       {"seed", std::to_string(opt.seed)}});
  return res;
}

}  // namespace scatgen
