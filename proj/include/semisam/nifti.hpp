#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semisam/volume.hpp"

namespace semisam {

/// Decoded single-volume NIfTI-1 payload, scaled to float.
struct NiftiData {
  Dims shape;
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<float> values;
  std::int16_t datatype = 0;
};

using Bytes = std::vector<std::uint8_t>;

/// float32 image.
Bytes encode_nifti(const Volume& volume);
/// uint8 label image.
Bytes encode_nifti(const BinaryMask& mask, const Spacing& spacing);
NiftiData decode_nifti(std::span<const std::uint8_t> bytes);

bool is_gzip(std::span<const std::uint8_t> bytes) noexcept;
Bytes gzip_compress(std::span<const std::uint8_t> bytes);
Bytes gzip_decompress(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Files ending in ".gz" are compressed transparently.
void write_nifti(const std::filesystem::path& path, const Volume& volume);
void write_nifti(const std::filesystem::path& path, const BinaryMask& mask, const Spacing& spacing);
NiftiData read_nifti(const std::filesystem::path& path);

Volume to_volume(NiftiData data);
BinaryMask to_mask(const NiftiData& data, float threshold = 0.5f);

}  // namespace semisam
