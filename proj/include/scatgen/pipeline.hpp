#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scatgen/dataset.hpp"
#include "scatgen/embedding.hpp"
#include "scatgen/training.hpp"

namespace scatgen {

/// Every subcommand echoes its effective option set into its output
/// directory so runs are self-describing.
void write_effective_config(const std::string& dir,
                            const std::map<std::string, std::string>& kv);

// ---- make-dataset -----------------------------------------------------------

struct MakeDatasetOptions {
  std::string root;
  int n_train = 1024;
  int n_test = 256;
  int side = 32;
  std::uint64_t seed = 0;
  bool antialias = true;
};

DatasetManifest cmd_make_dataset(const MakeDatasetOptions& opt);

// ---- fit-embedding ----------------------------------------------------------

struct FitEmbeddingOptions {
  std::string dataset_root;
  std::string out_path;
  std::string split = "train";
  std::string coeffs_dir;  // optional: dump per-image coefficient files
  int limit = 0;           // 0 = all images of the split
  int J = 3;
  int Q = 4;
  int d = 64;
  double eps = 1e-8;
};

WhiteningParams cmd_fit_embedding(const FitEmbeddingOptions& opt);

// ---- train ------------------------------------------------------------------

struct TrainOptions {
  std::string dataset_root;
  std::string whitening_path;
  std::string ckpt_out;
  std::string metrics_out;   // CSV: epoch,mean_l1,train_psnr,seconds
  std::string resume_path;   // optional checkpoint to continue from
  bool use_cache = true;     // embedding cache next to the dataset
  bool echo_progress = true; // mirror metrics rows to stdout
  TrainConfig cfg;
};

Checkpoint cmd_train(const TrainOptions& opt);

// ---- reconstruct ------------------------------------------------------------

struct ReconstructOptions {
  std::string ckpt_path;
  std::string whitening_path;
  std::vector<std::string> images;  // input PNG paths
  std::string out_dir;
};

struct ReconstructResult {
  std::vector<std::string> out_files;
  std::vector<double> psnr_db;  // per image
  double mean_psnr = 0.0;
};

ReconstructResult cmd_reconstruct(const ReconstructOptions& opt);

// ---- sample -----------------------------------------------------------------

struct SampleOptions {
  std::string ckpt_path;
  std::string out_dir;
  int n = 16;
  std::uint64_t seed = 0;
};

struct SampleResult {
  std::vector<std::string> out_files;
  std::string grid_file;
};

SampleResult cmd_sample(const SampleOptions& opt);

// ---- interpolate ------------------------------------------------------------

struct InterpolateOptions {
  std::string ckpt_path;
  std::string whitening_path;
  std::string image_a;
  std::string image_b;
  int steps = 8;
  std::string out_dir;
};

/// Decodes (1-alpha)*z_a + alpha*z_b for alpha = k/(steps-1); the endpoint
/// frames are byte-identical to cmd_reconstruct outputs of the same inputs.
std::vector<std::string> cmd_interpolate(const InterpolateOptions& opt);

// ---- eval -------------------------------------------------------------------

struct EvalOptions {
  std::string ckpt_path;
  std::string whitening_path;
  std::string dataset_root;
  std::string split = "test";
  std::string out_csv;
  int limit = 0;
};

struct EvalResult {
  std::string split;
  std::size_t n = 0;
  double mean_psnr = 0.0;
  double median_psnr = 0.0;
  double sparsity_pct = 0.0;
};

/// CSV columns: split,n,mean_psnr,median_psnr,sparsity_pct.
EvalResult cmd_eval(const EvalOptions& opt);

// ---- diagnose ---------------------------------------------------------------

struct DiagnoseOptions {
  std::string dataset_root;
  std::string whitening_path;
  std::string out_dir;
  std::string split = "train";
  int limit = 128;   // images used for pair diagnostics
  int n_pairs = 500;
  std::uint64_t seed = 0;
  bool dump_filters = false;
};

struct DiagnoseResult {
  double lp_bound = 0.0;
  double lp_lower = 0.0;
  bool lp_ok = false;
  bool contraction_ok = false;
  LipschitzReport lipschitz;
  GaussianizationReport gaussianization;
  bool all_pass = false;
};

DiagnoseResult cmd_diagnose(const DiagnoseOptions& opt);

}  // namespace scatgen
