#include "semisam/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace semisam {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

enum NiftiType : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUInt16 = 512,
  kUInt32 = 768,
};

template <typename T>
void put(Bytes& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> buf, std::size_t offset, bool swap) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  if (swap) {
    auto* p = reinterpret_cast<std::uint8_t*>(&value);
    std::reverse(p, p + sizeof(T));
  }
  return value;
}

Bytes make_header(const Dims& shape, const Spacing& spacing, std::int16_t datatype, std::int16_t bitpix) {
  static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
  Bytes buf(kDataOffset, 0);
  put<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
  const std::int16_t dim[8] = {3, static_cast<std::int16_t>(shape.w), static_cast<std::int16_t>(shape.h),
                               static_cast<std::int16_t>(shape.d), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, dim[i]);
  put<std::int16_t>(buf, 70, datatype);
  put<std::int16_t>(buf, 72, bitpix);
  const float pixdim[8] = {1.0f, static_cast<float>(spacing[2]), static_cast<float>(spacing[1]),
                           static_cast<float>(spacing[0]), 0.0f, 0.0f, 0.0f, 0.0f};
  for (int i = 0; i < 8; ++i) put<float>(buf, 76 + 4 * i, pixdim[i]);
  put<float>(buf, 108, static_cast<float>(kDataOffset));
  put<float>(buf, 112, 1.0f);
  put<float>(buf, 116, 0.0f);
  buf[123] = 2;  // millimetres
  put<std::int16_t>(buf, 254, 1);  // sform: scanner-anatomical, diagonal
  put<float>(buf, 280, static_cast<float>(spacing[2]));
  put<float>(buf, 296 + 4, static_cast<float>(spacing[1]));
  put<float>(buf, 312 + 8, static_cast<float>(spacing[0]));
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  return buf;
}

void check_dims(const Dims& shape) {
  if (shape.d <= 0 || shape.h <= 0 || shape.w <= 0 || shape.d > 32767 || shape.h > 32767 || shape.w > 32767) {
    throw IoError("unsupported NIfTI dimensions " + to_string(shape));
  }
}

}  // namespace

Bytes encode_nifti(const Volume& volume) {
  check_dims(volume.shape);
  Bytes buf = make_header(volume.shape, volume.spacing, kFloat32, 32);
  const std::size_t n = volume.data.size() * sizeof(float);
  buf.resize(kDataOffset + n);
  std::memcpy(buf.data() + kDataOffset, volume.data.data(), n);
  return buf;
}

Bytes encode_nifti(const BinaryMask& mask, const Spacing& spacing) {
  check_dims(mask.shape);
  Bytes buf = make_header(mask.shape, spacing, kUInt8, 8);
  buf.insert(buf.end(), mask.data.begin(), mask.data.end());
  return buf;
}

NiftiData decode_nifti(std::span<const std::uint8_t> raw) {
  Bytes inflated;
  if (is_gzip(raw)) {
    inflated = gzip_decompress(raw);
    raw = inflated;
  }
  if (raw.size() < kHeaderSize) throw IoError("truncated NIfTI header");
  bool swap = false;
  if (get<std::int32_t>(raw, 0, false) != static_cast<std::int32_t>(kHeaderSize)) {
    if (get<std::int32_t>(raw, 0, true) != static_cast<std::int32_t>(kHeaderSize)) {
      throw IoError("not a NIfTI-1 file (bad sizeof_hdr)");
    }
    swap = true;
  }
  if (std::memcmp(raw.data() + 344, "n+1", 3) != 0 && std::memcmp(raw.data() + 344, "ni1", 3) != 0) {
    throw IoError("missing NIfTI-1 magic");
  }
  if (std::memcmp(raw.data() + 344, "ni1", 3) == 0) {
    throw IoError("two-file NIfTI (.hdr/.img) is not supported");
  }
  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = get<std::int16_t>(raw, 40 + 2 * i, swap);
  if (dim[0] < 3 || dim[0] > 7) throw IoError("NIfTI image must be 3D");
  for (int i = 4; i <= dim[0]; ++i) {
    if (dim[i] > 1) throw IoError("multi-volume NIfTI images are not supported");
  }
  NiftiData out;
  out.shape = Dims{dim[3], dim[2], dim[1]};
  check_dims(out.shape);
  out.spacing = Spacing{get<float>(raw, 76 + 12, swap), get<float>(raw, 76 + 8, swap), get<float>(raw, 76 + 4, swap)};
  out.datatype = get<std::int16_t>(raw, 70, swap);
  const auto vox_offset = static_cast<std::size_t>(get<float>(raw, 108, swap));
  float slope = get<float>(raw, 112, swap);
  const float inter = get<float>(raw, 116, swap);
  if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;

  std::size_t width = 0;
  switch (out.datatype) {
    case kUInt8: case kInt8: width = 1; break;
    case kInt16: case kUInt16: width = 2; break;
    case kInt32: case kUInt32: case kFloat32: width = 4; break;
    case kFloat64: width = 8; break;
    default: throw IoError("unsupported NIfTI datatype " + std::to_string(out.datatype));
  }
  const std::size_t n = out.shape.voxels();
  if (vox_offset < kHeaderSize || raw.size() < vox_offset + n * width) throw IoError("truncated NIfTI data");
  out.values.resize(n);
  const std::size_t base = vox_offset;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = base + i * width;
    double v = 0.0;
    switch (out.datatype) {
      case kUInt8: v = raw[at]; break;
      case kInt8: v = static_cast<std::int8_t>(raw[at]); break;
      case kInt16: v = get<std::int16_t>(raw, at, swap); break;
      case kUInt16: v = get<std::uint16_t>(raw, at, swap); break;
      case kInt32: v = get<std::int32_t>(raw, at, swap); break;
      case kUInt32: v = get<std::uint32_t>(raw, at, swap); break;
      case kFloat32: v = get<float>(raw, at, swap); break;
      case kFloat64: v = get<double>(raw, at, swap); break;
    }
    out.values[i] = (slope == 1.0f && inter == 0.0f) ? static_cast<float>(v) : static_cast<float>(v * slope + inter);
  }
  return out;
}

bool is_gzip(std::span<const std::uint8_t> bytes) noexcept {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

Bytes gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw IoError("deflateInit2 failed");
  }
  Bytes out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

Bytes gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("inflateInit2 failed");
  Bytes out;
  std::uint8_t chunk[1 << 16];
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("corrupt gzip stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw IoError("truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

namespace {
bool wants_gzip(const std::filesystem::path& path) { return path.extension() == ".gz"; }
}  // namespace

void write_nifti(const std::filesystem::path& path, const Volume& volume) {
  Bytes raw = encode_nifti(volume);
  write_file(path, wants_gzip(path) ? gzip_compress(raw) : raw);
}

void write_nifti(const std::filesystem::path& path, const BinaryMask& mask, const Spacing& spacing) {
  Bytes raw = encode_nifti(mask, spacing);
  write_file(path, wants_gzip(path) ? gzip_compress(raw) : raw);
}

NiftiData read_nifti(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing file " + path.string());
  return decode_nifti(read_file(path));
}

Volume to_volume(NiftiData data) {
  Volume v;
  v.shape = data.shape;
  v.spacing = data.spacing;
  v.data = std::move(data.values);
  return v;
}

BinaryMask to_mask(const NiftiData& data, float threshold) {
  BinaryMask m(data.shape);
  for (std::size_t i = 0; i < data.values.size(); ++i) m.data[i] = data.values[i] > threshold ? 1 : 0;
  return m;
}

}  // namespace semisam
