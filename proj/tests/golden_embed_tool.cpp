// Regenerates the frozen embedding vector used by the golden test:
//   ./golden_embed_tool tests/golden/embed_v1.bin
// The fixture is fully seeded; see test_embedding.cpp for the matching test.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "scatgen/dataset.hpp"
#include "scatgen/embedding.hpp"
#include "scatgen/serialize.hpp"

using namespace scatgen;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <output.bin>\n", argv[0]);
    return 2;
  }
  const auto bank = build_filter_bank(3, 4, 32);
  const auto fit_images = generate_polygon5(128, 32, 2024);
  const auto w = fit_whitening(scatter_batch(fit_images, bank), 64);

  const auto tmp = std::filesystem::temp_directory_path() / "golden_whitening.bin";
  save_whitening(w, tmp.string());
  const auto w_file = load_whitening(tmp.string());
  std::filesystem::remove(tmp);

  const Image probe = polygon5_image(32, 2024, 777);
  const auto z = embed(probe, bank, w_file);

  std::ofstream f(argv[1], std::ios::binary);
  BinaryWriter bw(f);
  bw.u32(static_cast<std::uint32_t>(z.size()));
  bw.f32_array(z.data(), z.size());
  std::printf("wrote %zu coefficients, first = %.9g, checksum %016llx\n", z.size(),
              z[0], static_cast<unsigned long long>(bw.checksum()));
  return 0;
}
