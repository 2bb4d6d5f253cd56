#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "scatgen/errors.hpp"
#include "scatgen/pipeline.hpp"

using namespace scatgen;

int main(int argc, char** argv) {
  CLI::App app{"scatgen: scattering-embedding generative networks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file");
  app.allow_config_extras(false);

  std::uint64_t seed = 0;
  bool deterministic = false;
  int threads = 0;
  app.add_option("--seed", seed, "Master seed")->capture_default_str();
  app.add_flag("--deterministic", deterministic,
               "Force the fixed reduction order (results are bit-reproducible)");
  app.add_option("--threads", threads, "Worker thread count (0 = library default)");

  // make-dataset
  MakeDatasetOptions mk;
  auto* c_mk = app.add_subcommand("make-dataset", "Generate a Polygon5 dataset");
  c_mk->add_option("--root", mk.root, "Dataset directory")->required();
  c_mk->add_option("--n-train", mk.n_train)->capture_default_str();
  c_mk->add_option("--n-test", mk.n_test)->capture_default_str();
  c_mk->add_option("--side", mk.side)->capture_default_str();
  c_mk->add_flag("!--hard-edges", mk.antialias, "Disable coverage antialiasing");

  // fit-embedding
  FitEmbeddingOptions fe;
  auto* c_fe = app.add_subcommand("fit-embedding", "Fit the whitening on scattering coefficients");
  c_fe->add_option("--dataset", fe.dataset_root)->required();
  c_fe->add_option("--out", fe.out_path, "Whitening file")->required();
  c_fe->add_option("--split", fe.split)->capture_default_str();
  c_fe->add_option("--limit", fe.limit, "Use only the first N images");
  c_fe->add_option("--scales", fe.J, "Wavelet scale count J")->capture_default_str();
  c_fe->add_option("--orientations", fe.Q, "Orientation count Q")->capture_default_str();
  c_fe->add_option("--latent-dim", fe.d, "Embedding dimension d")->capture_default_str();
  c_fe->add_option("--eig-eps", fe.eps, "Relative eigenvalue floor")->capture_default_str();
  c_fe->add_option("--save-coeffs", fe.coeffs_dir,
                   "Also dump per-image scattering coefficients here");

  // train
  TrainOptions tr;
  auto* c_tr = app.add_subcommand("train", "Train the generator on whitened embeddings");
  c_tr->add_option("--dataset", tr.dataset_root)->required();
  c_tr->add_option("--whitening", tr.whitening_path)->required();
  c_tr->add_option("--ckpt-out", tr.ckpt_out)->required();
  c_tr->add_option("--metrics-out", tr.metrics_out, "CSV of per-epoch metrics");
  c_tr->add_option("--resume", tr.resume_path, "Checkpoint to continue from");
  c_tr->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c_tr->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  c_tr->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  c_tr->add_option("--beta1", tr.cfg.beta1)->capture_default_str();
  c_tr->add_option("--beta2", tr.cfg.beta2)->capture_default_str();
  c_tr->add_option("--adam-eps", tr.cfg.adam_eps)->capture_default_str();
  c_tr->add_option("--latent-dim", tr.cfg.d)->capture_default_str();
  c_tr->add_option("--base-channels", tr.cfg.c0, "First-stage channel count")->capture_default_str();
  c_tr->add_option("--upsample-stages", tr.cfg.n_upsample)->capture_default_str();
  c_tr->add_option("--side", tr.cfg.side)->capture_default_str();
  c_tr->add_option("--scales", tr.cfg.J)->capture_default_str();
  c_tr->add_option("--orientations", tr.cfg.Q)->capture_default_str();
  bool no_cache = false;
  c_tr->add_flag("--no-cache", no_cache, "Skip the on-disk embedding cache");

  // reconstruct
  ReconstructOptions rc;
  auto* c_rc = app.add_subcommand("reconstruct", "Reconstruct images from their embeddings");
  c_rc->add_option("--ckpt", rc.ckpt_path)->required();
  c_rc->add_option("--whitening", rc.whitening_path)->required();
  c_rc->add_option("--out-dir", rc.out_dir)->required();
  c_rc->add_option("images", rc.images, "Input PNG files")->required();

  // sample
  SampleOptions sm;
  auto* c_sm = app.add_subcommand("sample", "Decode white-noise latents");
  c_sm->add_option("--ckpt", sm.ckpt_path)->required();
  c_sm->add_option("--out-dir", sm.out_dir)->required();
  c_sm->add_option("--n", sm.n)->capture_default_str();

  // interpolate
  InterpolateOptions ip;
  auto* c_ip = app.add_subcommand("interpolate", "Morph between two images in latent space");
  c_ip->add_option("--ckpt", ip.ckpt_path)->required();
  c_ip->add_option("--whitening", ip.whitening_path)->required();
  c_ip->add_option("--a", ip.image_a)->required();
  c_ip->add_option("--b", ip.image_b)->required();
  c_ip->add_option("--steps", ip.steps)->capture_default_str();
  c_ip->add_option("--out-dir", ip.out_dir)->required();

  // eval
  EvalOptions ev;
  auto* c_ev = app.add_subcommand("eval", "PSNR + sparsity summary over a split");
  c_ev->add_option("--ckpt", ev.ckpt_path)->required();
  c_ev->add_option("--whitening", ev.whitening_path)->required();
  c_ev->add_option("--dataset", ev.dataset_root)->required();
  c_ev->add_option("--split", ev.split)->capture_default_str();
  c_ev->add_option("--out", ev.out_csv, "Summary CSV path");
  c_ev->add_option("--limit", ev.limit);

  // diagnose
  DiagnoseOptions dg;
  auto* c_dg = app.add_subcommand("diagnose", "Embedding invariants and distortion reports");
  c_dg->add_option("--dataset", dg.dataset_root)->required();
  c_dg->add_option("--whitening", dg.whitening_path)->required();
  c_dg->add_option("--out-dir", dg.out_dir)->required();
  c_dg->add_option("--split", dg.split)->capture_default_str();
  c_dg->add_option("--limit", dg.limit)->capture_default_str();
  c_dg->add_option("--pairs", dg.n_pairs)->capture_default_str();
  c_dg->add_flag("--dump-filters", dg.dump_filters, "Write filter magnitude PNGs");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (*c_mk) {
      mk.seed = seed;
      const auto m = cmd_make_dataset(mk);
      std::cout << "wrote " << m.n_train << " train + " << m.n_test
                << " test images under " << m.root << "\n";
    } else if (*c_fe) {
      const auto w = cmd_fit_embedding(fe);
      std::cout << "fitted whitening: dim " << w.dim << " -> d " << w.d
                << ", top eigenvalue " << w.eigvals.front() << "\n";
    } else if (*c_tr) {
      tr.cfg.seed = seed;
      tr.cfg.deterministic = deterministic || tr.cfg.deterministic;
      tr.use_cache = !no_cache;
      const auto ckpt = cmd_train(tr);
      std::cout << "trained to epoch " << ckpt.epoch << "; checkpoint at "
                << tr.ckpt_out << "\n";
    } else if (*c_rc) {
      const auto res = cmd_reconstruct(rc);
      std::cout << "mean PSNR " << res.mean_psnr << " dB over "
                << res.psnr_db.size() << " images\n";
    } else if (*c_sm) {
      sm.seed = seed;
      const auto res = cmd_sample(sm);
      std::cout << "wrote " << res.out_files.size() << " samples and "
                << res.grid_file << "\n";
    } else if (*c_ip) {
      const auto files = cmd_interpolate(ip);
      std::cout << "wrote " << files.size() << " frames under " << ip.out_dir << "\n";
    } else if (*c_ev) {
      const auto res = cmd_eval(ev);
      std::cout << "split " << res.split << ": n " << res.n << ", mean "
                << res.mean_psnr << " dB, median " << res.median_psnr
                << " dB, sparsity " << res.sparsity_pct << "%\n";
    } else if (*c_dg) {
      dg.seed = seed;
      const auto res = cmd_diagnose(dg);
      std::cout << (res.all_pass ? "all diagnostics passed" : "DIAGNOSTICS FAILED")
                << "; reports under " << dg.out_dir << "\n";
      return res.all_pass ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
