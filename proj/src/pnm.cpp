// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"

namespace dsbias {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

struct PnmHeader {
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

// Netpbm header: magic, then three whitespace-separated integers with '#'
// comments allowed, then exactly one whitespace byte before the raster.
PnmHeader parse_header(const std::string& bytes) {
  PnmHeader h;
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::size_t {
    skip();
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
    if (pos == start) throw DataError("malformed anymap header");
    return v;
  };
  if (bytes.size() < 2) throw DataError("truncated anymap");
  h.magic = bytes.substr(0, 2);
  pos = 2;
  h.width = number();
  h.height = number();
  h.maxval = number();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw DataError("malformed anymap header");
  h.data_offset = pos + 1;
  if (h.maxval == 0 || h.maxval > 255) throw DataError("only 8-bit anymaps are supported");
  return h;
}

}  // namespace

GrayImage decode_pgm(const std::string& bytes) {
  const PnmHeader h = parse_header(bytes);
  if (h.magic != "P5") throw DataError("not a binary graymap (P5)");
  const std::size_t n = h.width * h.height;
  if (bytes.size() < h.data_offset + n) throw DataError("truncated graymap raster");
  std::vector<float> px(n);
  for (std::size_t i = 0; i < n; ++i)
    px[i] = static_cast<float>(static_cast<unsigned char>(bytes[h.data_offset + i]));
  return GrayImage(h.width, h.height, PixelDomain::U8, std::move(px));
}

std::string encode_pgm(const GrayImage& img) {
  const GrayImage u8 = img.domain() == PixelDomain::U8 ? img : img.to_u8();
  std::string out = "P5\n" + std::to_string(u8.width()) + " " + std::to_string(u8.height()) + "\n255\n";
  out.reserve(out.size() + u8.size());
  for (float v : u8.pixels()) out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return out;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  try {
    return decode_pgm(slurp(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  spit(path, encode_pgm(img));
}

void write_ppm(const ColorImage& img, const std::filesystem::path& path) {
  if (img.rgb.size() != 3 * img.width * img.height) throw InvalidInput("write_ppm: bad raster size");
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  spit(path, out);
}

ColorImage read_ppm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const PnmHeader h = parse_header(bytes);
  if (h.magic != "P6") throw DataError(path.string() + ": not a binary pixmap (P6)");
  ColorImage img{h.width, h.height, {}};
  const std::size_t n = 3 * h.width * h.height;
  if (bytes.size() < h.data_offset + n) throw DataError(path.string() + ": truncated pixmap");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
                 bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset + n));
  return img;
}

}  // namespace dsbias
