#pragma once

#include <string>

#include "scatgen/image.hpp"

namespace scatgen {

/// Writes an 8-bit RGB PNG (no alpha). Values are quantized by
/// round(255 * clamp(v, 0, 1)) with round-half-up. Encoder settings are
/// pinned (filter NONE, zlib level 6, no ancillary chunks) so identical
/// pixels always produce identical bytes.
void write_png(const Image& img, const std::string& path);

/// Reads an 8-bit RGB PNG back as values v/255. Grayscale, palette, 16-bit
/// or alpha-carrying files are rejected with unsupported_format_error.
Image read_png(const std::string& path);

}  // namespace scatgen
