#include "scatgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "scatgen/errors.hpp"
#include "scatgen/png_io.hpp"
#include "scatgen/rng.hpp"
#include "scatgen/serialize.hpp"

namespace scatgen {

namespace {

struct Point {
  double x, y;
};

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Andrew monotone chain, strict turns only (collinear points dropped).
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  const std::size_t n = pts.size();
  std::vector<Point> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 0 ? k - 1 : 0);
  return hull;
}

/// Counterclockwise hull: inside (edges inclusive) iff every cross >= 0.
bool inside_hull(const std::vector<Point>& hull, double x, double y) {
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % n];
    if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) < 0.0) return false;
  }
  return true;
}

struct Rgb {
  double r, g, b;
};

double linf(const Rgb& a, const Rgb& b) {
  return std::max({std::abs(a.r - b.r), std::abs(a.g - b.g), std::abs(a.b - b.b)});
}

Rgb sample_color(SplitMix64& rng) {
  return Rgb{rng.next_double(), rng.next_double(), rng.next_double()};
}

/// Rasterizes the hull over the background and reports the count of
/// foreground-classified pixels (coverage > 0.5).
int rasterize(Image& img, const std::vector<Point>& hull, const Rgb& bg,
              const Rgb& fg, bool antialias) {
  const int side = img.height;
  const int ss = antialias ? 4 : 1;
  const double inv_ss = 1.0 / static_cast<double>(ss);
  const double inv_samples = 1.0 / static_cast<double>(ss * ss);
  int n_fg = 0;
  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      int inside = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx)
          if (inside_hull(hull, px + (sx + 0.5) * inv_ss, py + (sy + 0.5) * inv_ss))
            ++inside;
      const double cov = inside * inv_samples;
      img.at(py, px, 0) = bg.r + cov * (fg.r - bg.r);
      img.at(py, px, 1) = bg.g + cov * (fg.g - bg.g);
      img.at(py, px, 2) = bg.b + cov * (fg.b - bg.b);
      if (cov > 0.5) ++n_fg;
    }
  }
  return n_fg;
}

}  // namespace

Image polygon5_image(int side, std::uint64_t seed, std::uint64_t index,
                     const PolygonOptions& opt) {
  if (side < 8) throw invalid_parameter_error("side must be >= 8");
  SplitMix64 rng(SplitMix64::stream_seed(seed, index));

  Image img(side, side, 3);
  const Rgb bg = sample_color(rng);

  const double lo = 0.1 * side, hi = 0.9 * side;
  const double total = static_cast<double>(side) * side;

  for (int attempt = 0; attempt < 100; ++attempt) {
    const int k = 3 + static_cast<int>(rng.next_below(3));
    std::vector<Point> pts(static_cast<std::size_t>(k));
    for (auto& p : pts) {
      p.x = lo + rng.next_double() * (hi - lo);
      p.y = lo + rng.next_double() * (hi - lo);
    }
    const auto hull = convex_hull(pts);
    if (hull.size() < 3) continue;

    Rgb fg = bg;
    bool color_ok = false;
    for (int c = 0; c < 100; ++c) {
      fg = sample_color(rng);
      if (linf(fg, bg) >= 0.1) {
        color_ok = true;
        break;
      }
    }
    if (!color_ok)
      fg = Rgb{std::fmod(bg.r + 0.5, 1.0), std::fmod(bg.g + 0.5, 1.0),
               std::fmod(bg.b + 0.5, 1.0)};

    const int n_fg = rasterize(img, hull, bg, fg, opt.antialias);
    const double frac = n_fg / total;
    if (frac >= 0.01 && frac <= 0.90) return img;
  }

  // Deterministic fallback: a fixed, comfortably sized triangle.
  const std::vector<Point> tri{{0.2 * side, 0.2 * side},
                               {0.8 * side, 0.3 * side},
                               {0.5 * side, 0.8 * side}};
  const Rgb fg{std::fmod(bg.r + 0.5, 1.0), std::fmod(bg.g + 0.5, 1.0),
               std::fmod(bg.b + 0.5, 1.0)};
  rasterize(img, tri, bg, fg, opt.antialias);
  return img;
}

std::vector<Image> generate_polygon5(int n, int side, std::uint64_t seed,
                                     const PolygonOptions& opt) {
  if (n < 0) throw invalid_parameter_error("n must be >= 0");
  if (side < 8) throw invalid_parameter_error("side must be >= 8");
  std::vector<Image> out(static_cast<std::size_t>(n));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out[static_cast<std::size_t>(i)] =
        polygon5_image(side, seed, static_cast<std::uint64_t>(i), opt);
  return out;
}

namespace {

std::string file_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", index);
  return buf;
}

}  // namespace

DatasetManifest split_manifest(const std::string& root, int n_train, int n_test,
                               int side, std::uint64_t seed,
                               const PolygonOptions& opt) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(root) / "train", ec);
  fs::create_directories(fs::path(root) / "test", ec);
  if (ec) throw io_error("cannot create dataset directories under " + root);

  DatasetManifest m;
  m.root = root;
  m.n_train = n_train;
  m.n_test = n_test;
  m.side = side;
  m.seed = seed;
  m.antialias = opt.antialias;

  const auto train = generate_polygon5(n_train, side, seed, opt);
  const auto test = generate_polygon5(n_test, side, seed + kTestSeedOffset, opt);

  for (int i = 0; i < n_train; ++i) {
    const std::string rel = "train/" + file_name(i);
    write_png(train[static_cast<std::size_t>(i)], (fs::path(root) / rel).string());
    m.train_files.push_back(rel);
  }
  for (int i = 0; i < n_test; ++i) {
    const std::string rel = "test/" + file_name(i);
    write_png(test[static_cast<std::size_t>(i)], (fs::path(root) / rel).string());
    m.test_files.push_back(rel);
  }

  std::ofstream f((fs::path(root) / "manifest.txt").string());
  if (!f) throw io_error("cannot write manifest under " + root);
  f << render_text_header({{"format", "polygon5"},
                           {"version", std::to_string(m.version)},
                           {"side", std::to_string(side)},
                           {"seed", std::to_string(seed)},
                           {"n_train", std::to_string(n_train)},
                           {"n_test", std::to_string(n_test)},
                           {"antialias", m.antialias ? "1" : "0"}});
  for (const auto& p : m.train_files) f << p << "\n";
  for (const auto& p : m.test_files) f << p << "\n";
  if (!f) throw io_error("manifest write failed");
  return m;
}

DatasetManifest load_manifest(const std::string& root) {
  namespace fs = std::filesystem;
  const std::string path = (fs::path(root) / "manifest.txt").string();
  std::ifstream f(path);
  if (!f) throw io_error("cannot open " + path);
  const auto kv = parse_text_header(f);
  DatasetManifest m;
  m.root = root;
  if (header_str(kv, "format") != "polygon5")
    throw unsupported_format_error("unknown dataset format in " + path);
  m.version = static_cast<int>(header_int(kv, "version"));
  if (m.version != kDatasetFormatVersion)
    throw version_mismatch_error("dataset format version " +
                                 std::to_string(m.version) + " unsupported");
  m.side = static_cast<int>(header_int(kv, "side"));
  m.seed = static_cast<std::uint64_t>(header_int(kv, "seed"));
  m.n_train = static_cast<int>(header_int(kv, "n_train"));
  m.n_test = static_cast<int>(header_int(kv, "n_test"));
  m.antialias = header_int(kv, "antialias") != 0;

  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("train/", 0) == 0)
      m.train_files.push_back(line);
    else if (line.rfind("test/", 0) == 0)
      m.test_files.push_back(line);
    else
      throw io_error("unexpected manifest entry: " + line);
  }
  if (static_cast<int>(m.train_files.size()) != m.n_train ||
      static_cast<int>(m.test_files.size()) != m.n_test)
    throw io_error("manifest counts do not match listed files");
  for (const auto& rel : m.train_files)
    if (!fs::exists(fs::path(root) / rel)) throw io_error("missing file " + rel);
  for (const auto& rel : m.test_files)
    if (!fs::exists(fs::path(root) / rel)) throw io_error("missing file " + rel);
  return m;
}

std::vector<Image> load_split(const DatasetManifest& m, const std::string& split) {
  namespace fs = std::filesystem;
  const std::vector<std::string>* files = nullptr;
  if (split == "train")
    files = &m.train_files;
  else if (split == "test")
    files = &m.test_files;
  else
    throw invalid_parameter_error("split must be train or test, got " + split);

  std::vector<Image> out;
  out.reserve(files->size());
  for (const auto& rel : *files)
    out.push_back(read_png((fs::path(m.root) / rel).string()));
  return out;
}

}  // namespace scatgen
