#include "fusionbiopsy/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

namespace fusionbiopsy {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

[[noreturn]] void parse_fail(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::ParseError, path.string() + ": " + why);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnresolvablePath, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class PgmParser {
 public:
  PgmParser(const std::vector<unsigned char>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  Raster parse() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || (bytes_[1] != '2' && bytes_[1] != '5')) {
      parse_fail(path_, "not a P2/P5 PGM");
    }
    const bool binary = bytes_[1] == '5';
    pos_ = 2;
    const std::size_t width = next_number();
    const std::size_t height = next_number();
    const std::size_t maxval = next_number();
    if (width == 0 || height == 0) parse_fail(path_, "zero image extent");
    if (maxval == 0 || maxval > 65535) parse_fail(path_, "maxval out of range");

    std::vector<double> pixels(width * height);
    if (binary) {
      ++pos_;  // single whitespace after maxval
      const std::size_t bps = maxval < 256 ? 1 : 2;
      if (bytes_.size() < pos_ + pixels.size() * bps) parse_fail(path_, "truncated pixel data");
      for (std::size_t i = 0; i < pixels.size(); ++i) {
        const std::size_t o = pos_ + i * bps;
        pixels[i] = bps == 1 ? bytes_[o] : (bytes_[o] << 8) | bytes_[o + 1];
      }
    } else {
      for (double& v : pixels) v = static_cast<double>(next_number());
    }
    for (double v : pixels) {
      if (v > static_cast<double>(maxval)) parse_fail(path_, "sample exceeds maxval");
    }
    return {GrayImage(width, height, std::move(pixels)), static_cast<std::uint32_t>(maxval)};
  }

 private:
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

  std::size_t next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) parse_fail(path_, "malformed header");
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1u << 30)) parse_fail(path_, "number too large");
    }
    return v;
  }

  const std::vector<unsigned char>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

Raster read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::UnresolvablePath, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Internal, "libpng allocation failed");
  }
  std::vector<double> pixels;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::string failure;
  std::vector<png_byte> buf;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    parse_fail(path, "PNG decode failed");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if ((color_type & PNG_COLOR_MASK_COLOR) != 0 || (color_type & PNG_COLOR_MASK_PALETTE) != 0) {
    failure = "PNG is not grayscale";
  } else {
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if ((color_type & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = buf.data() + r * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    pixels.resize(static_cast<std::size_t>(width) * height);
    for (png_uint_32 r = 0; r < height; ++r) {
      for (png_uint_32 c = 0; c < width; ++c) {
        const png_bytep p = rows[r];
        pixels[static_cast<std::size_t>(r) * width + c] =
            bit_depth == 16 ? (p[2 * c] << 8) | p[2 * c + 1] : p[c];
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!failure.empty()) parse_fail(path, failure);
  // Sub-byte depths were expanded (and rescaled) to 8 bits above.
  const std::uint32_t maxval = bit_depth == 16 ? 65535u : 255u;
  return {GrayImage(width, height, std::move(pixels)), maxval};
}

}  // namespace

Raster read_raster(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes = slurp(path);
  static constexpr unsigned char kPngMagic[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return read_png(path);
  }
  return PgmParser(bytes, path).parse();
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img, std::uint32_t maxval) {
  if (maxval == 0 || maxval > 65535) throw Error(ErrorCode::InvalidImage, "maxval out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnresolvablePath, "cannot write " + path.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n" << maxval << "\n";
  const bool wide = maxval > 255;
  std::vector<char> data;
  data.reserve(img.pixels().size() * (wide ? 2 : 1));
  for (double v : img.pixels()) {
    const auto q = static_cast<std::uint32_t>(std::clamp(std::round(v), 0.0, static_cast<double>(maxval)));
    if (wide) data.push_back(static_cast<char>(q >> 8));
    data.push_back(static_cast<char>(q & 0xff));
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

void write_unit_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<double> scaled(img.pixels().begin(), img.pixels().end());
  for (double& v : scaled) v *= 255.0;
  write_pgm(path, GrayImage(img.width(), img.height(), std::move(scaled)), 255);
}

void write_png(const std::filesystem::path& path, const GrayImage& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw Error(ErrorCode::InvalidImage, "PNG bit depth must be 8 or 16");
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::UnresolvablePath, "cannot write " + path.string());

  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bps = bit_depth / 8;
  std::vector<png_byte> buf(img.pixels().size() * bps);
  for (std::size_t i = 0; i < img.pixels().size(); ++i) {
    const auto q = static_cast<std::uint32_t>(std::clamp(std::round(img.pixels()[i]), 0.0, maxval));
    if (bps == 2) {
      buf[2 * i] = static_cast<png_byte>(q >> 8);
      buf[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    } else {
      buf[i] = static_cast<png_byte>(q);
    }
  }
  std::vector<png_bytep> rows(img.height());
  for (std::size_t r = 0; r < img.height(); ++r) rows[r] = buf.data() + r * img.width() * bps;

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Internal, "libpng allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Internal, "PNG encode failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()),
               bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace fusionbiopsy

