#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchsel/image.hpp"

namespace patchsel::corpus {

// Binary pixmap (P6), linear encoding, big-endian samples when maxval > 255.
// Values are clamped to [0,1] and rounded to the nearest code.
void write_image(const Image& image, const std::string& path, int bit_depth = 16);
std::vector<std::uint8_t> encode_image(const Image& image, int bit_depth = 16);

// Reads P6 (maxval up to 65535). Throws ParseError with the byte offset of the
// problem on malformed headers or truncated payloads.
Image read_image(const std::string& path);
Image decode_image(const std::vector<std::uint8_t>& bytes);

// 8-bit binary graymap (P5).
struct GrayMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

void write_graymap(const GrayMap& map, const std::string& path);
GrayMap read_graymap(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace patchsel::corpus
