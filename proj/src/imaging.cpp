#include "genverify/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "genverify/error.hpp"

namespace genverify {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
}

std::size_t area(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.assign(area(width, height), fill);
}

Image::Image(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != area(width, height)) {
    throw InvalidArgument("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
}

std::vector<std::uint8_t> Image::bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(pixels_.size() * 3);
  for (const Rgb& p : pixels_) {
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

GrayImage::GrayImage(int width, int height, double fill) : width_(width), height_(height) {
  check_dims(width, height);
  if (!(fill >= 0.0 && fill <= 255.0)) throw InvalidArgument("gray sample outside [0, 255]");
  samples_.assign(area(width, height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  check_dims(width, height);
  if (samples_.size() != area(width, height)) {
    throw InvalidArgument("sample count does not match dimensions");
  }
  for (double s : samples_) {
    if (!(s >= 0.0 && s <= 255.0)) throw InvalidArgument("gray sample outside [0, 255]");
  }
}

DctBlock::DctBlock(int n, std::vector<double> coeffs) : n_(n), coeffs_(std::move(coeffs)) {
  if (n < 1 || coeffs_.size() != area(n, n)) throw InvalidArgument("DCT block must hold n*n coefficients");
  for (double c : coeffs_) {
    if (!std::isfinite(c)) throw InvalidArgument("non-finite DCT coefficient");
  }
}

// ---------------------------------------------------------------------------
// PPM

namespace {

class PpmReader {
 public:
  explicit PpmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw ParseError(std::string("PPM ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PPM: expected ") + field, start);
    return value;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance(std::size_t n) noexcept { pos_ += n; }
  std::size_t size() const noexcept { return bytes_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bytes_[i]; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw ParseError("PPM: missing magic number", 0);
  if (bytes[1] != '6') {
    if (bytes[1] >= '1' && bytes[1] <= '7') {
      throw UnsupportedFormat(std::string("PPM: only binary P6 is supported, got P") + static_cast<char>(bytes[1]));
    }
    throw ParseError("PPM: bad magic number", 0);
  }
  PpmReader in(bytes);
  in.advance(2);
  const long width = in.read_uint("width");
  const long height = in.read_uint("height");
  const std::size_t maxval_at = in.pos();
  const long maxval = in.read_uint("maxval");
  if (width < 1 || height < 1) throw ParseError("PPM: zero image dimension", maxval_at);
  if (maxval != 255) throw UnsupportedFormat("PPM: unsupported maxval " + std::to_string(maxval));
  if (in.pos() >= in.size() || !std::isspace(in[in.pos()])) {
    throw ParseError("PPM: expected single whitespace before raster", in.pos());
  }
  in.advance(1);
  const std::size_t body = in.pos();
  const std::size_t needed = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - body < needed) {
    throw ParseError("PPM: truncated raster, need " + std::to_string(needed) + " bytes, have " +
                         std::to_string(bytes.size() - body),
                     bytes.size());
  }
  std::vector<Rgb> pixels(needed / 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = {bytes[body + 3 * i], bytes[body + 3 * i + 1], bytes[body + 3 * i + 2]};
  }
  return Image(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

// ---------------------------------------------------------------------------
// PNG (libpng). Errors longjmp back into decode_png_raw; every buffer it
// touches after setjmp is owned by the caller.

struct PngSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  char message[256] = {};
};

void png_read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->bytes.size() - src->pos < length) {
    std::snprintf(src->message, sizeof(src->message), "PNG: unexpected end of data at offset %zu",
                  src->bytes.size());
    png_longjmp(png, 1);
  }
  std::memcpy(out, src->bytes.data() + src->pos, length);
  src->pos += length;
}

void png_error_callback(png_structp png, png_const_charp msg) {
  auto* src = static_cast<PngSource*>(png_get_error_ptr(png));
  if (src->message[0] == '\0') {
    std::snprintf(src->message, sizeof(src->message), "PNG: %s (near offset %zu)", msg, src->pos);
  }
  png_longjmp(png, 1);
}

void png_warning_callback(png_structp, png_const_charp) {}

enum class PngStatus { Ok, Malformed, Unsupported };

struct PngRaw {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
};

PngStatus decode_png_raw(PngSource& src, std::vector<std::uint8_t>& data, std::vector<png_bytep>& rows, PngRaw& raw) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &src, png_error_callback, png_warning_callback);
  if (png == nullptr) {
    std::snprintf(src.message, sizeof(src.message), "PNG: cannot allocate decoder");
    return PngStatus::Malformed;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::snprintf(src.message, sizeof(src.message), "PNG: cannot allocate decoder");
    return PngStatus::Malformed;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return PngStatus::Malformed;
  }
  png_set_read_fn(png, &src, png_read_callback);
  png_read_info(png, info);
  raw.width = png_get_image_width(png, info);
  raw.height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 8 || (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_RGB_ALPHA)) {
    std::snprintf(src.message, sizeof(src.message),
                  "PNG: unsupported format (bit depth %d, color type %d); need 8-bit RGB or RGBA", depth, color);
    png_destroy_read_struct(&png, &info, nullptr);
    return PngStatus::Unsupported;
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);
  raw.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  data.assign(stride * raw.height, 0);
  rows.resize(raw.height);
  for (png_uint_32 y = 0; y < raw.height; ++y) rows[y] = data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return PngStatus::Ok;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  PngSource src{bytes};
  std::vector<std::uint8_t> data;
  std::vector<png_bytep> rows;
  PngRaw raw;
  switch (decode_png_raw(src, data, rows, raw)) {
    case PngStatus::Malformed:
      throw ParseError(src.message);
    case PngStatus::Unsupported:
      throw UnsupportedFormat(src.message);
    case PngStatus::Ok:
      break;
  }
  const auto width = static_cast<int>(raw.width);
  const auto height = static_cast<int>(raw.height);
  std::vector<Rgb> pixels(area(width, height));
  const std::size_t stride = static_cast<std::size_t>(raw.channels) * raw.width;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = data.data() + static_cast<std::size_t>(y) * stride;
    for (int x = 0; x < width; ++x) {
      const std::uint8_t* px = row + static_cast<std::size_t>(x) * raw.channels;
      pixels[static_cast<std::size_t>(y) * width + x] = {px[0], px[1], px[2]};
    }
  }
  return Image(width, height, std::move(pixels));
}

constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace

Image load_image(std::span<const std::uint8_t> bytes, ImageFormat format) {
  switch (format) {
    case ImageFormat::PpmP6:
      return decode_ppm(bytes);
    case ImageFormat::Png:
      if (bytes.size() < 8 || !std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
        throw ParseError("PNG: bad signature", 0);
      }
      return decode_png(bytes);
  }
  throw InvalidArgument("unknown image format");
}

Image load_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_ppm(bytes);
  throw UnsupportedFormat("unrecognized image format (expected PPM P6 or PNG)");
}

Image load_image_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("cannot read image file '" + path.string() + "'");
  try {
    return load_image(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const UnsupportedFormat& e) {
    throw UnsupportedFormat(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto body = img.bytes();
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

// ---------------------------------------------------------------------------
// Pixel transforms

GrayImage to_gray(const Image& img) {
  std::vector<double> samples;
  samples.reserve(img.pixels().size());
  for (const Rgb& p : img.pixels()) samples.push_back(0.299 * p.r + 0.587 * p.g + 0.114 * p.b);
  return GrayImage(img.width(), img.height(), std::move(samples));
}

GrayImage channel_plane(const Image& img, Channel channel) {
  std::vector<double> samples;
  samples.reserve(img.pixels().size());
  for (const Rgb& p : img.pixels()) {
    switch (channel) {
      case Channel::Red: samples.push_back(p.r); break;
      case Channel::Green: samples.push_back(p.g); break;
      case Channel::Blue: samples.push_back(p.b); break;
    }
  }
  return GrayImage(img.width(), img.height(), std::move(samples));
}

namespace {

// Sparse 1-D area-weight matrix. Lengths are measured in units of 1/out_len
// input pixels so every overlap is an exact integer: output cell j spans
// [j*in_len, (j+1)*in_len) and input pixel x spans [x*out_len, (x+1)*out_len).
// The overlaps of one cell sum to in_len.
struct AreaWeights {
  std::vector<int> first;                // first contributing input index per output
  std::vector<std::vector<double>> overlap;
};

AreaWeights area_weights(int in_len, int out_len) {
  AreaWeights w;
  w.first.resize(out_len);
  w.overlap.resize(out_len);
  for (int j = 0; j < out_len; ++j) {
    const long lo = static_cast<long>(j) * in_len;
    const long hi = lo + in_len;
    const int x0 = static_cast<int>(lo / out_len);
    const int x1 = static_cast<int>((hi - 1) / out_len);
    w.first[j] = x0;
    for (int x = x0; x <= x1; ++x) {
      const long ov = std::min(hi, static_cast<long>(x + 1) * out_len) - std::max(lo, static_cast<long>(x) * out_len);
      w.overlap[j].push_back(static_cast<double>(ov));
    }
  }
  return w;
}

}  // namespace

GrayImage resize_box(const GrayImage& img, int out_width, int out_height) {
  if (out_width > img.width() || out_height > img.height()) {
    throw InvalidArgument("resize_box only downsamples: " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()) + " -> " + std::to_string(out_width) + "x" +
                          std::to_string(out_height));
  }
  return resample_area(img, out_width, out_height);
}

GrayImage resample_area(const GrayImage& img, int out_width, int out_height) {
  if (out_width < 1 || out_height < 1) throw InvalidArgument("resize target must be positive");
  const AreaWeights wx = area_weights(img.width(), out_width);
  const AreaWeights wy = area_weights(img.height(), out_height);

  // Overlap-weighted sum of offsets from the cell's first sample, so uniform
  // regions come back exactly.
  const double cell = static_cast<double>(img.width()) * static_cast<double>(img.height());
  std::vector<double> out(static_cast<std::size_t>(out_height) * out_width);
  for (int i = 0; i < out_height; ++i) {
    const auto& oy = wy.overlap[i];
    for (int j = 0; j < out_width; ++j) {
      const auto& ox = wx.overlap[j];
      const double ref = img.at(wx.first[j], wy.first[i]);
      double acc = 0.0;
      for (std::size_t ky = 0; ky < oy.size(); ++ky) {
        const int y = wy.first[i] + static_cast<int>(ky);
        double row = 0.0;
        for (std::size_t kx = 0; kx < ox.size(); ++kx) row += ox[kx] * (img.at(wx.first[j] + static_cast<int>(kx), y) - ref);
        acc += oy[ky] * row;
      }
      out[static_cast<std::size_t>(i) * out_width + j] = std::clamp(ref + acc / cell, 0.0, 255.0);
    }
  }
  return GrayImage(out_width, out_height, std::move(out));
}

namespace {

// basis[k * n + x] = alpha(k) * cos(pi * (2x + 1) * k / 2n)
std::vector<double> dct_basis(int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  const double a0 = std::sqrt(1.0 / n);
  const double a1 = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int x = 0; x < n; ++x) {
      basis[static_cast<std::size_t>(k) * n + x] =
          (k == 0 ? a0 : a1) * std::cos(std::numbers::pi * (2.0 * x + 1.0) * k / (2.0 * n));
    }
  }
  return basis;
}

}  // namespace

DctBlock dct2(const GrayImage& block) {
  if (block.width() != block.height()) {
    throw InvalidArgument("dct2 needs a square block, got " + std::to_string(block.width()) + "x" +
                          std::to_string(block.height()));
  }
  const int n = block.width();
  if (n < 2) throw InvalidArgument("dct2 needs n >= 2");
  const auto basis = dct_basis(n);
  const auto s = block.samples();
  const auto un = static_cast<std::size_t>(n);

  // AC basis rows sum to zero, so they are applied to offsets from the first
  // element; a uniform row or column then has exactly zero AC energy.
  // Rows: tmp[y][u] = sum_x basis[u][x] * s[y][x]
  std::vector<double> tmp(un * un);
  for (std::size_t y = 0; y < un; ++y) {
    const double ref = s[y * un];
    for (std::size_t u = 0; u < un; ++u) {
      const double off = u == 0 ? 0.0 : ref;
      double acc = 0.0;
      for (std::size_t x = 0; x < un; ++x) acc += basis[u * un + x] * (s[y * un + x] - off);
      tmp[y * un + u] = acc;
    }
  }
  // Columns: out[v][u] = sum_y basis[v][y] * tmp[y][u]
  std::vector<double> out(un * un);
  for (std::size_t v = 0; v < un; ++v) {
    for (std::size_t u = 0; u < un; ++u) {
      const double off = v == 0 ? 0.0 : tmp[u];
      double acc = 0.0;
      for (std::size_t y = 0; y < un; ++y) acc += basis[v * un + y] * (tmp[y * un + u] - off);
      out[v * un + u] = acc;
    }
  }
  return DctBlock(n, std::move(out));
}

std::vector<double> idct2(const DctBlock& block) {
  const int n = block.size();
  const auto basis = dct_basis(n);
  const auto c = block.coeffs();
  const auto un = static_cast<std::size_t>(n);

  // tmp[y][u] = sum_v basis[v][y] * c[v][u]
  std::vector<double> tmp(un * un);
  for (std::size_t y = 0; y < un; ++y) {
    for (std::size_t u = 0; u < un; ++u) {
      double acc = 0.0;
      for (std::size_t v = 0; v < un; ++v) acc += basis[v * un + y] * c[v * un + u];
      tmp[y * un + u] = acc;
    }
  }
  std::vector<double> out(un * un);
  for (std::size_t y = 0; y < un; ++y) {
    for (std::size_t x = 0; x < un; ++x) {
      double acc = 0.0;
      for (std::size_t u = 0; u < un; ++u) acc += basis[u * un + x] * tmp[y * un + u];
      out[y * un + x] = acc;
    }
  }
  return out;
}

}  // namespace genverify
