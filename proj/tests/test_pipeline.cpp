#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "scatgen/errors.hpp"
#include "scatgen/pipeline.hpp"
#include "scatgen/png_io.hpp"
#include "scatgen/serialize.hpp"

using namespace scatgen;

namespace fs = std::filesystem;

namespace {

std::uint64_t file_hash(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

/// Builds a small trained pipeline fixture once and shares it across cases.
struct Fixture {
  fs::path dir;
  std::string dataset;
  std::string whitening;
  std::string ckpt;

  Fixture() {
    dir = fs::temp_directory_path() / "scatgen_pipeline_fixture";
    fs::remove_all(dir);
    fs::create_directories(dir);
    dataset = (dir / "data").string();
    whitening = (dir / "whitening.bin").string();
    ckpt = (dir / "model.ckpt").string();

    cmd_make_dataset({dataset, 12, 4, 16, 3, true});

    FitEmbeddingOptions fe;
    fe.dataset_root = dataset;
    fe.out_path = whitening;
    fe.J = 2;
    fe.Q = 2;
    fe.d = 8;
    cmd_fit_embedding(fe);

    TrainOptions tr;
    tr.dataset_root = dataset;
    tr.whitening_path = whitening;
    tr.ckpt_out = ckpt;
    tr.metrics_out = (dir / "metrics.csv").string();
    tr.echo_progress = false;
    tr.cfg.epochs = 3;
    tr.cfg.batch_size = 4;
    tr.cfg.seed = 3;
    tr.cfg.d = 8;
    tr.cfg.J = 2;
    tr.cfg.Q = 2;
    tr.cfg.side = 16;
    tr.cfg.n_upsample = 2;
    tr.cfg.c0 = 8;
    cmd_train(tr);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("train emits the metrics CSV contract") {
  const auto& f = fixture();
  const auto text = read_file(fs::path(f.dir) / "metrics.csv");
  CHECK(text.rfind("epoch,mean_l1,train_psnr,seconds\n", 0) == 0);
  int lines = 0;
  for (const char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == 4);  // header + 3 epochs
  CHECK(fs::exists(fs::path(f.dir) / "effective_config.txt"));
}

TEST_CASE("reconstruct writes images and a psnr table") {
  const auto& f = fixture();
  const auto out = fs::path(f.dir) / "recon";

  ReconstructOptions rc;
  rc.ckpt_path = f.ckpt;
  rc.whitening_path = f.whitening;
  rc.out_dir = out.string();
  rc.images = {f.dataset + "/train/00000.png", f.dataset + "/train/00001.png"};
  const auto res = cmd_reconstruct(rc);

  REQUIRE(res.out_files.size() == 2);
  for (const auto& p : res.out_files) CHECK(fs::exists(p));
  CHECK(res.psnr_db.size() == 2);
  CHECK(res.mean_psnr == doctest::Approx((res.psnr_db[0] + res.psnr_db[1]) / 2));

  const auto csv = read_file(out / "psnr.csv");
  CHECK(csv.rfind("image,psnr_db\n", 0) == 0);
  CHECK(csv.find("mean,") != std::string::npos);
  CHECK(fs::exists(out / "effective_config.txt"));

  // Outputs decode as valid 16x16 RGB in [0,1].
  const Image recon = read_png(res.out_files[0]);
  CHECK(recon.height == 16);
  CHECK(recon.channels == 3);

  SUBCASE("incompatible image side is rejected with the dimension named") {
    ReconstructOptions bad = rc;
    bad.images = {f.dataset + "/train/00002.png"};
    Image big(32, 32, 3);
    const auto big_path = (fs::path(f.dir) / "big.png").string();
    write_png(big, big_path);
    bad.images = {big_path};
    CHECK_THROWS_WITH_AS(cmd_reconstruct(bad), doctest::Contains("side"),
                         incompatibility_error);
  }
}

TEST_CASE("sampling is deterministic per seed and refuses n = 0") {
  const auto& f = fixture();

  SampleOptions sm;
  sm.ckpt_path = f.ckpt;
  sm.out_dir = (fs::path(f.dir) / "samples_a").string();
  sm.n = 5;
  sm.seed = 17;
  const auto a = cmd_sample(sm);
  REQUIRE(a.out_files.size() == 5);
  CHECK(fs::exists(a.grid_file));

  sm.out_dir = (fs::path(f.dir) / "samples_b").string();
  const auto b = cmd_sample(sm);
  for (std::size_t i = 0; i < a.out_files.size(); ++i)
    CHECK(file_hash(a.out_files[i]) == file_hash(b.out_files[i]));
  CHECK(file_hash(a.grid_file) == file_hash(b.grid_file));

  // Grid is ceil(sqrt(5)) = 3 columns, 2 rows.
  const Image grid = read_png(a.grid_file);
  CHECK(grid.width == 3 * 16);
  CHECK(grid.height == 2 * 16);

  sm.n = 0;
  CHECK_THROWS_AS(cmd_sample(sm), invalid_parameter_error);

  sm.n = 3;
  sm.seed = 18;
  sm.out_dir = (fs::path(f.dir) / "samples_c").string();
  const auto c = cmd_sample(sm);
  CHECK(file_hash(c.out_files[0]) != file_hash(a.out_files[0]));
}

TEST_CASE("interpolation endpoints equal reconstructions byte for byte") {
  const auto& f = fixture();
  const std::string img_a = f.dataset + "/train/00000.png";
  const std::string img_b = f.dataset + "/train/00003.png";

  ReconstructOptions rc;
  rc.ckpt_path = f.ckpt;
  rc.whitening_path = f.whitening;
  rc.out_dir = (fs::path(f.dir) / "recon_ends").string();
  rc.images = {img_a, img_b};
  const auto recon = cmd_reconstruct(rc);

  InterpolateOptions ip;
  ip.ckpt_path = f.ckpt;
  ip.whitening_path = f.whitening;
  ip.image_a = img_a;
  ip.image_b = img_b;
  ip.steps = 6;
  ip.out_dir = (fs::path(f.dir) / "morph").string();
  const auto frames = cmd_interpolate(ip);
  REQUIRE(frames.size() == 6);

  CHECK(file_hash(frames.front()) == file_hash(recon.out_files[0]));
  CHECK(file_hash(frames.back()) == file_hash(recon.out_files[1]));

  SUBCASE("steps = 2 gives exactly the two reconstructions") {
    ip.steps = 2;
    ip.out_dir = (fs::path(f.dir) / "morph2").string();
    const auto two = cmd_interpolate(ip);
    REQUIRE(two.size() == 2);
    CHECK(file_hash(two[0]) == file_hash(recon.out_files[0]));
    CHECK(file_hash(two[1]) == file_hash(recon.out_files[1]));
  }

  SUBCASE("identical endpoints give identical frames") {
    ip.image_b = img_a;
    ip.steps = 5;
    ip.out_dir = (fs::path(f.dir) / "morph_same").string();
    const auto frames_same = cmd_interpolate(ip);
    const auto h0 = file_hash(frames_same[0]);
    for (const auto& p : frames_same) CHECK(file_hash(p) == h0);
  }

  SUBCASE("adjacent frames stay closer than the endpoints") {
    const Image first = read_png(frames.front());
    const Image last = read_png(frames.back());
    const double end_dist = image_l2_distance(first, last);
    for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
      const Image fa = read_png(frames[k]);
      const Image fb = read_png(frames[k + 1]);
      CHECK(image_l2_distance(fa, fb) <= end_dist + 1e-9);
    }
  }

  SUBCASE("steps below 2 are rejected") {
    ip.steps = 1;
    CHECK_THROWS_AS(cmd_interpolate(ip), invalid_parameter_error);
  }
}

TEST_CASE("eval emits the exact CSV columns") {
  const auto& f = fixture();
  EvalOptions ev;
  ev.ckpt_path = f.ckpt;
  ev.whitening_path = f.whitening;
  ev.dataset_root = f.dataset;
  ev.split = "test";
  ev.out_csv = (fs::path(f.dir) / "eval.csv").string();
  const auto res = cmd_eval(ev);
  CHECK(res.n == 4);
  CHECK(res.sparsity_pct >= 0.0);
  CHECK(res.sparsity_pct <= 100.0);

  const auto csv = read_file(ev.out_csv);
  CHECK(csv.rfind("split,n,mean_psnr,median_psnr,sparsity_pct\n", 0) == 0);
  CHECK(csv.find("test,4,") != std::string::npos);

  SUBCASE("a single-image split has mean equal to median") {
    ev.limit = 1;
    ev.out_csv.clear();
    const auto one = cmd_eval(ev);
    CHECK(one.mean_psnr == doctest::Approx(one.median_psnr));
  }

  SUBCASE("empty split is refused") {
    const auto empty_root = (fs::path(f.dir) / "empty_data").string();
    cmd_make_dataset({empty_root, 2, 0, 16, 5, true});
    ev.dataset_root = empty_root;
    ev.split = "test";
    ev.limit = 0;
    CHECK_THROWS_AS(cmd_eval(ev), empty_split_error);
  }
}

TEST_CASE("diagnose passes its invariants on a fresh fit") {
  const auto& f = fixture();
  DiagnoseOptions dg;
  dg.dataset_root = f.dataset;
  dg.whitening_path = f.whitening;
  dg.out_dir = (fs::path(f.dir) / "diag").string();
  dg.limit = 12;
  dg.n_pairs = 60;
  dg.seed = 1;
  dg.dump_filters = true;
  const auto res = cmd_diagnose(dg);

  CHECK(res.lp_ok);
  CHECK(res.lp_bound <= 1.0 + 1e-9);
  CHECK(res.contraction_ok);
  CHECK(res.lipschitz.upper_ok);
  CHECK(res.all_pass);

  const auto csv = read_file(fs::path(dg.out_dir) / "lipschitz.csv");
  CHECK(csv.rfind("percentile,alpha\n", 0) == 0);
  CHECK(csv.find("50,") != std::string::npos);
  CHECK(csv.find("90,") != std::string::npos);
  CHECK(csv.find("99.5,") != std::string::npos);
  CHECK(fs::exists(fs::path(dg.out_dir) / "gaussianization.csv"));
  CHECK(fs::exists(fs::path(dg.out_dir) / "summary.txt"));
  CHECK(fs::exists(fs::path(dg.out_dir) / "filters" / "psi_l1_q0.png"));
  CHECK(fs::exists(fs::path(dg.out_dir) / "filters" / "phi.png"));
  const auto summary = read_file(fs::path(dg.out_dir) / "summary.txt");
  CHECK(summary.find("PASS littlewood_paley_bound") != std::string::npos);
  CHECK(summary.find("PASS scattering_contraction") != std::string::npos);
}
