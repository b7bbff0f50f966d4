#include "stereo/imageio.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace stereo {

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Whitespace-delimited token scan used by the PFM/PNM headers.
std::string next_token(std::span<const std::uint8_t> b, std::size_t& pos,
                       bool allow_comments = false) {
  while (pos < b.size()) {
    if (allow_comments && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    if (!is_space(b[pos])) break;
    ++pos;
  }
  if (pos >= b.size()) throw ParseError("unexpected end of header", pos);
  std::string tok;
  while (pos < b.size() && !is_space(b[pos])) tok.push_back(static_cast<char>(b[pos++]));
  return tok;
}

int parse_dim(const std::string& tok, std::size_t at, const char* what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v < 1) throw std::invalid_argument("");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ParseError(std::string("invalid ") + what, at);
  }
}

float swap_float_bytes(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  bits = ((bits & 0xff000000u) >> 24) | ((bits & 0x00ff0000u) >> 8) |
         ((bits & 0x0000ff00u) << 8) | ((bits & 0x000000ffu) << 24);
  std::memcpy(&v, &bits, 4);
  return v;
}

bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

std::uint8_t to_byte(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));  // round half up
}

}  // namespace

PfmHeader parse_pfm_header(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic != "Pf" && magic != "PF") throw ParseError("pfm: bad magic", 0);

  PfmHeader h;
  h.color = (magic == "PF");
  std::size_t at = pos;
  h.width = parse_dim(next_token(bytes, pos), at, "pfm width");
  at = pos;
  h.height = parse_dim(next_token(bytes, pos), at, "pfm height");

  at = pos;
  const std::string scale_tok = next_token(bytes, pos);
  try {
    std::size_t used = 0;
    h.scale = std::stod(scale_tok, &used);
    if (used != scale_tok.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw ParseError("pfm: invalid scale", at);
  }
  if (h.scale == 0.0) throw ParseError("pfm: zero scale", at);

  // Exactly one whitespace byte separates the header from the payload.
  if (pos >= bytes.size() || !is_space(bytes[pos]))
    throw ParseError("pfm: missing header terminator", pos);
  h.data_offset = pos + 1;
  return h;
}

DisparityMap read_pfm(std::span<const std::uint8_t> bytes) {
  const PfmHeader h = parse_pfm_header(bytes);
  if (h.color) throw FormatError("pfm: 3-band file is not a disparity map");

  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + 4 * n)
    throw ParseError("pfm: truncated payload", bytes.size());

  const bool file_little = h.scale < 0.0;
  const bool need_swap = file_little != host_is_little_endian();
  const double mult = std::abs(h.scale);

  DisparityMap d;
  d.width = h.width;
  d.height = h.height;
  d.values.assign(n, 0.0);
  d.valid.assign(n, 0);

  for (int y = 0; y < h.height; ++y) {
    const int file_row = h.height - 1 - y;  // bottom-to-top storage
    const std::size_t row_off = h.data_offset + 4 * static_cast<std::size_t>(file_row) * h.width;
    for (int x = 0; x < h.width; ++x) {
      float f;
      std::memcpy(&f, bytes.data() + row_off + 4 * static_cast<std::size_t>(x), 4);
      if (need_swap) f = swap_float_bytes(f);
      double v = static_cast<double>(f);
      if (mult != 1.0) v *= mult;
      const std::size_t i = static_cast<std::size_t>(y) * h.width + x;
      d.values[i] = v;
      d.valid[i] = (std::isfinite(v) && v >= 0.0) ? 1 : 0;
    }
  }
  return d;
}

std::vector<std::uint8_t> write_pfm(const DisparityMap& d) {
  if (d.width < 1 || d.height < 1 || d.values.size() != d.size() ||
      d.valid.size() != d.size())
    throw ContractError("write_pfm: malformed disparity map");

  char header[64];
  const int header_len = std::snprintf(header, sizeof header, "Pf\n%d %d\n-1\n", d.width,
                                       d.height);
  std::vector<std::uint8_t> out(header, header + header_len);
  out.reserve(out.size() + 4 * d.size());

  const bool need_swap = !host_is_little_endian();
  for (int y = d.height - 1; y >= 0; --y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
      float f = d.valid[i] ? static_cast<float>(d.values[i])
                           : std::numeric_limits<float>::infinity();
      if (need_swap) f = swap_float_bytes(f);
      std::uint8_t b[4];
      std::memcpy(b, &f, 4);
      out.insert(out.end(), b, b + 4);
    }
  }
  return out;
}

namespace {

FeatureMap read_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos, true);
  const int channels = magic == "P5" ? 1 : 3;
  std::size_t at = pos;
  const int width = parse_dim(next_token(bytes, pos, true), at, "pnm width");
  at = pos;
  const int height = parse_dim(next_token(bytes, pos, true), at, "pnm height");
  at = pos;
  const int maxval = parse_dim(next_token(bytes, pos, true), at, "pnm maxval");
  if (maxval != 255) throw FormatError("pnm: only 8-bit (maxval 255) supported");
  if (pos >= bytes.size() || !is_space(bytes[pos]))
    throw ParseError("pnm: missing header terminator", pos);
  ++pos;

  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < pos + n) throw ParseError("pnm: truncated payload", bytes.size());

  FeatureMap img = FeatureMap::zeros(channels, width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::uint8_t b =
            bytes[pos + (static_cast<std::size_t>(y) * width + x) * channels + c];
        img.at(c, x, y) = b / 255.0;
      }
  return img;
}

struct PngMemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t count) {
  auto* r = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
  if (r->pos + count > r->bytes.size())
    png_error(png, "png: truncated stream");
  std::memcpy(out, r->bytes.data() + r->pos, count);
  r->pos += count;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

void png_flush_callback(png_structp) {}

FeatureMap read_png(std::span<const std::uint8_t> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw FormatError("png: failed to initialize reader");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("png: failed to initialize reader");
  }

  PngMemoryReader reader{bytes, 0};
  std::vector<std::uint8_t> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: decode failed");
  }
  png_set_read_fn(png, &reader, png_read_callback);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: 16-bit images not supported");
  }

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: unsupported channel layout");
  }

  const std::size_t stride = png_get_rowbytes(png, info);
  data.assign(stride * height, 0);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  FeatureMap img = FeatureMap::zeros(channels, static_cast<int>(width),
                                     static_cast<int>(height));
  for (png_uint_32 y = 0; y < height; ++y)
    for (png_uint_32 x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(c, static_cast<int>(x), static_cast<int>(y)) =
            data[y * stride + x * channels + c] / 255.0;
  return img;
}

std::vector<std::uint8_t> write_png_bytes(const std::vector<std::uint8_t>& pixels, int width,
                                          int height, int channels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw FormatError("png: failed to initialize writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("png: failed to initialize writer");
  }

  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("png: encode failed");
  }
  png_set_write_fn(png, &out, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(pixels.data() + y * stride);
  png_write_image(png, rows.data());
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> interleave_bytes(const FeatureMap& image) {
  if (image.channels != 1 && image.channels != 3)
    throw ContractError("write_image: expected 1 or 3 channels");
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(image.width) * image.height *
                                   image.channels);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c)
        pixels[(static_cast<std::size_t>(y) * image.width + x) * image.channels + c] =
            to_byte(image.at(c, x, y));
  return pixels;
}

std::vector<std::uint8_t> mask_bytes(const OcclusionMap& o) {
  std::vector<std::uint8_t> pixels(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) pixels[i] = to_byte(o.values[i]);
  return pixels;
}

std::vector<std::uint8_t> pnm_with_header(const char* magic, int width, int height,
                                          const std::vector<std::uint8_t>& pixels) {
  char header[64];
  const int len = std::snprintf(header, sizeof header, "%s\n%d %d\n255\n", magic, width,
                                height);
  std::vector<std::uint8_t> out(header, header + len);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace

FeatureMap read_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' &&
      bytes[3] == 'G')
    return read_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
    return read_pnm(bytes);
  throw FormatError("read_image: unrecognized format (expected PNG, PGM, or PPM)");
}

std::vector<std::uint8_t> write_mask_pgm(const OcclusionMap& o) {
  return pnm_with_header("P5", o.width, o.height, mask_bytes(o));
}

std::vector<std::uint8_t> write_mask_png(const OcclusionMap& o) {
  return write_png_bytes(mask_bytes(o), o.width, o.height, 1);
}

std::vector<std::uint8_t> write_image_ppm(const FeatureMap& image) {
  return pnm_with_header(image.channels == 1 ? "P5" : "P6", image.width, image.height,
                         interleave_bytes(image));
}

std::vector<std::uint8_t> write_image_png(const FeatureMap& image) {
  return write_png_bytes(interleave_bytes(image), image.width, image.height,
                         image.channels);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace stereo
