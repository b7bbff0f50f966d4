// Readers and writers: Middlebury PFM disparity maps (bit-exact), 8-bit
// PNG / PGM / PPM images, and grayscale mask export.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stereo/field.hpp"

namespace stereo {

struct PfmHeader {
  bool color = false;  // "PF" (3-band) vs "Pf" (1-band)
  int width = 0;
  int height = 0;
  double scale = -1.0;       // sign encodes endianness: negative = little
  std::size_t data_offset = 0;
};

PfmHeader parse_pfm_header(std::span<const std::uint8_t> bytes);

// Reads a 1-band PFM into a top-to-bottom DisparityMap. Rows are stored
// bottom-to-top in the file; +inf (the Middlebury unknown marker), NaN, and
// negative entries become invalid pixels; |scale| is applied as a multiplier
// when it is not 1. Malformed input throws ParseError with a byte offset.
DisparityMap read_pfm(std::span<const std::uint8_t> bytes);

// Canonical form: "Pf", scale -1 (little-endian), invalid pixels written as
// +inf. read_pfm followed by write_pfm reproduces canonical bytes exactly.
std::vector<std::uint8_t> write_pfm(const DisparityMap& d);

// 8-bit PNG, PGM (P5), or PPM (P6), dispatched on the magic bytes. Values
// are normalized to [0, 1]; RGBA alpha is dropped. Other bit depths throw
// FormatError.
FeatureMap read_image(std::span<const std::uint8_t> bytes);

// Masks as 8-bit grayscale: 0 = visible, 255 = occluded, linear in between,
// rounding half up.
std::vector<std::uint8_t> write_mask_pgm(const OcclusionMap& o);
std::vector<std::uint8_t> write_mask_png(const OcclusionMap& o);

// 1- or 3-channel [0, 1] image to 8-bit bytes, same rounding.
std::vector<std::uint8_t> write_image_ppm(const FeatureMap& image);
std::vector<std::uint8_t> write_image_png(const FeatureMap& image);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace stereo
