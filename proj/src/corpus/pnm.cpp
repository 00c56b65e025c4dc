#include "patchsel/corpus/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "patchsel/error.hpp"

namespace patchsel::corpus {

namespace {

struct Header {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t payload_offset = 0;
};

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) throw ParseError(std::string("pnm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("pnm: expected ") + what, start);
    return static_cast<int>(v);
  }

  Header parse(const char* expected_magic) {
    Header h;
    if (bytes_.size() < 2) throw ParseError("pnm: file too short for magic", 0);
    h.magic = std::string(bytes_.begin(), bytes_.begin() + 2);
    if (h.magic != expected_magic) {
      throw ParseError("pnm: bad magic '" + h.magic + "', expected " + expected_magic, 0);
    }
    pos_ = 2;
    h.width = read_int("width");
    h.height = read_int("height");
    const std::size_t maxval_pos = pos_;
    h.maxval = read_int("maxval");
    if (h.width <= 0 || h.height <= 0) throw ParseError("pnm: zero image dimension", maxval_pos);
    if (h.maxval <= 0 || h.maxval > 65535) throw ParseError("pnm: maxval out of range", maxval_pos);
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError("pnm: missing whitespace after maxval", pos_);
    }
    h.payload_offset = pos_ + 1;
    return h;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<std::uint8_t> encode_image(const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("pnm: bit depth must be 8 or 16");
  const int maxval = bit_depth == 16 ? 65535 : 255;
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(image.width * image.height * 3 * (bit_depth / 8)));
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        const auto code = static_cast<unsigned>(std::lround(v * maxval));
        if (bit_depth == 16) out.push_back(static_cast<std::uint8_t>(code >> 8));
        out.push_back(static_cast<std::uint8_t>(code & 0xFF));
      }
    }
  }
  return out;
}

void write_image(const Image& image, const std::string& path, int bit_depth) {
  write_file_bytes(path, encode_image(image, bit_depth));
}

Image decode_image(const std::vector<std::uint8_t>& bytes) {
  HeaderReader reader(bytes);
  const Header h = reader.parse("P6");
  const std::size_t bps = h.maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height) * 3 * bps;
  if (bytes.size() - h.payload_offset < need) {
    throw ParseError("pnm: truncated payload, expected " + std::to_string(need) + " bytes", bytes.size());
  }
  Image img = Image::zeros(h.height, h.width);
  std::size_t p = h.payload_offset;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        unsigned code = bytes[p++];
        if (bps == 2) code = (code << 8) | bytes[p++];
        img.at(c, y, x) = static_cast<double>(code) / h.maxval;
      }
    }
  }
  return img;
}

Image read_image(const std::string& path) { return decode_image(read_file_bytes(path)); }

void write_graymap(const GrayMap& map, const std::string& path) {
  const std::string header = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), map.pixels.begin(), map.pixels.end());
  write_file_bytes(path, out);
}

GrayMap read_graymap(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  HeaderReader reader(bytes);
  const Header h = reader.parse("P5");
  if (h.maxval > 255) throw ParseError("pnm: only 8-bit graymaps are supported", 0);
  const std::size_t need = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  if (bytes.size() - h.payload_offset < need) throw ParseError("pnm: truncated graymap payload", bytes.size());
  GrayMap m{h.height, h.width, {}};
  m.pixels.assign(bytes.begin() + static_cast<long>(h.payload_offset),
                  bytes.begin() + static_cast<long>(h.payload_offset + need));
  return m;
}

}  // namespace patchsel::corpus
