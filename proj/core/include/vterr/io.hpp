#pragma once
// PNG codecs and the on-disk layouts for sequences and territory masks.
//
// Sequence directory:  frame_0000.png ... frame_NNNN.png (16-bit gray) and a
// meta.json sidecar with view, stage, occlusion, patient_id and optional
// phase_labels.  Mask files are 8-bit gray PNGs holding raw labels {0,1,2}.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vterr/types.hpp"

namespace vterr::io {

class IoError : public Error {
public:
  using Error::Error;
};

using Rgb = std::array<std::uint8_t, 3>;

std::vector<std::uint8_t> encode_png16(const Image16 &img);
std::vector<std::uint8_t> encode_png8(const Grid<std::uint8_t> &img);
std::vector<std::uint8_t> encode_png_rgb(const Grid<Rgb> &img);

/// Decodes a single-channel PNG. 8-bit files are returned widened, values
/// untouched.
Image16 decode_png_gray16(std::span<const std::uint8_t> bytes);
/// Decodes a single-channel 8-bit PNG; anything else is rejected.
Grid<std::uint8_t> decode_png_gray8(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path,
                std::span<const std::uint8_t> bytes);

Image16 read_png16(const std::filesystem::path &path);
void write_png16(const std::filesystem::path &path, const Image16 &img);
Grid<std::uint8_t> read_png8(const std::filesystem::path &path);
void write_png8(const std::filesystem::path &path,
                const Grid<std::uint8_t> &img);

DsaSequence load_sequence(const std::filesystem::path &dir);
void save_sequence(const DsaSequence &seq, const std::filesystem::path &dir);

TerritoryMask load_mask(const std::filesystem::path &path);
void save_mask(const TerritoryMask &mask, const std::filesystem::path &path);

/// Binary masks travel as 8-bit PNGs with values {0,1}; any nonzero value
/// reads back as set.
BinaryMask load_binary_mask(const std::filesystem::path &path);
void save_binary_mask(const BinaryMask &mask,
                      const std::filesystem::path &path);

} // namespace vterr::io
