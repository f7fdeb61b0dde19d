#include "semisam/oracle_adapter.hpp"

#include <array>
#include <fstream>
#include <thread>

namespace semisam {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr const char* kInline = "nifti-gz-base64";
constexpr const char* kFile = "nifti-gz-file";

json prompts_json(const PromptSet& prompts) {
  json arr = json::array();
  for (const auto& p : prompts.points) arr.push_back({p.at.z, p.at.y, p.at.x, static_cast<int>(p.polarity)});
  return arr;
}

PromptSet prompts_from(const json& arr) {
  PromptSet out;
  for (const auto& p : arr) {
    const auto v = p.get<std::array<int, 4>>();
    if (v[3] != 0 && v[3] != 1) throw IoError("prompt polarity must be 0 or 1");
    out.points.push_back({Index3{v[0], v[1], v[2]}, static_cast<Polarity>(v[3])});
  }
  return out;
}

json payload(const Bytes& nifti, const std::optional<std::string>& file) {
  if (file) return json{{"encoding", kFile}, {"file", *file}};
  return json{{"encoding", kInline}, {"data", base64_encode(gzip_compress(nifti))}};
}

NiftiData read_payload(const json& p, const fs::path& base_dir) {
  const auto encoding = p.at("encoding").get<std::string>();
  if (encoding == kInline) return decode_nifti(base64_decode(p.at("data").get<std::string>()));
  if (encoding == kFile) return read_nifti(base_dir / p.at("file").get<std::string>());
  throw IoError("unknown payload encoding '" + encoding + "'");
}

void check_version(const json& j) {
  const int v = j.at("version").get<int>();
  if (v != kWireVersion) throw IoError("unsupported oracle wire version " + std::to_string(v));
}

void publish(const fs::path& target, const std::string& text) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, target);
}

void publish(const fs::path& target, const Bytes& bytes) {
  fs::path tmp = target;
  tmp += ".tmp";
  write_file(tmp, bytes);
  fs::rename(tmp, target);
}

std::string make_request_id(std::uint64_t counter, const QueryContext& ctx, const PromptSet& prompts) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(query_key(ctx, prompts))));
  return std::to_string(counter) + "-" + buf;
}

BinaryMask checked_mask(const OracleResponse& r, const std::string& expected_id) {
  if (r.request_id != expected_id) throw IoError("oracle answered request '" + r.request_id + "'");
  return r.mask;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t n = bytes[i] << 16;
    if (i + 1 < bytes.size()) n |= bytes[i + 1] << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

Bytes base64_decode(const std::string& text) {
  std::array<int, 256> rev;
  rev.fill(-1);
  for (int k = 0; k < 64; ++k) rev[static_cast<unsigned char>(kAlphabet[k])] = k;
  Bytes out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    if (c == '\n' || c == '\r') continue;
    const int v = rev[static_cast<unsigned char>(c)];
    if (v < 0) throw IoError("invalid base64 payload");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

json encode_request(const OracleRequest& r, const std::optional<std::string>& patch_file) {
  return json{{"version", kWireVersion},
              {"request_id", r.request_id},
              {"shape", {r.patch.shape.d, r.patch.shape.h, r.patch.shape.w}},
              {"spacing", r.patch.spacing},
              {"prompts", prompts_json(r.prompts)},
              {"patch", payload(encode_nifti(r.patch), patch_file)}};
}

OracleRequest decode_request(const json& j, const fs::path& base_dir) {
  check_version(j);
  OracleRequest r;
  r.request_id = j.at("request_id").get<std::string>();
  r.patch = to_volume(read_payload(j.at("patch"), base_dir));
  r.patch.spacing = j.at("spacing").get<Spacing>();
  const auto shape = j.at("shape").get<std::array<int, 3>>();
  require_same_shape(r.patch.shape, Dims{shape[0], shape[1], shape[2]}, "oracle request payload");
  r.prompts = prompts_from(j.at("prompts"));
  return r;
}

json encode_response(const OracleResponse& r, const std::optional<std::string>& mask_file) {
  return json{{"version", kWireVersion},
              {"request_id", r.request_id},
              {"model_name", r.model_name},
              {"elapsed_ms", r.elapsed_ms},
              {"mask", payload(encode_nifti(r.mask, r.spacing), mask_file)}};
}

OracleResponse decode_response(const json& j, const fs::path& base_dir) {
  check_version(j);
  OracleResponse r;
  r.request_id = j.at("request_id").get<std::string>();
  r.model_name = j.value("model_name", std::string{});
  r.elapsed_ms = j.value("elapsed_ms", 0.0);
  const NiftiData data = read_payload(j.at("mask"), base_dir);
  r.spacing = data.spacing;
  r.mask = to_mask(data);
  return r;
}

BinaryMask SpoolAdapter::segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                                 std::string& model_name) {
  const fs::path requests = dir_ / "requests";
  const fs::path responses = dir_ / "responses";
  if (!fs::is_directory(requests) || !fs::is_directory(responses)) {
    throw IoError("oracle spool " + dir_.string() + " is not reachable");
  }
  const std::string id = make_request_id(counter_++, ctx, prompts);
  const std::string image_name = id + ".image.nii.gz";
  publish(requests / image_name, gzip_compress(encode_nifti(patch)));
  publish(requests / (id + ".json"), encode_request(OracleRequest{id, patch, prompts}, image_name).dump());

  const fs::path reply = responses / (id + ".json");
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (!fs::exists(reply)) {
    if (std::chrono::steady_clock::now() >= deadline) {
      std::error_code ec;
      fs::remove(requests / (id + ".json"), ec);
      fs::remove(requests / image_name, ec);
      throw IoError("oracle spool timed out after " + std::to_string(timeout_.count()) + " ms");
    }
    std::this_thread::sleep_for(poll_);
  }
  std::ifstream in(reply);
  const json j = json::parse(in);
  const OracleResponse r = decode_response(j, responses);
  std::error_code ec;
  if (j.at("mask").contains("file")) fs::remove(responses / j.at("mask").at("file").get<std::string>(), ec);
  fs::remove(reply, ec);
  model_name = r.model_name;
  return checked_mask(r, id);
}

bool serve_spool_once(const fs::path& spool_dir,
                      const std::function<BinaryMask(const OracleRequest&, std::string&)>& handler) {
  const fs::path requests = spool_dir / "requests";
  const fs::path responses = spool_dir / "responses";
  if (!fs::is_directory(requests)) return false;
  for (const auto& entry : fs::directory_iterator(requests)) {
    const auto path = entry.path();
    if (path.extension() != ".json") continue;
    const auto start = std::chrono::steady_clock::now();
    json j;
    {
      std::ifstream in(path);
      j = json::parse(in);
    }
    const OracleRequest request = decode_request(j, requests);
    OracleResponse response;
    response.request_id = request.request_id;
    response.spacing = request.patch.spacing;
    response.mask = handler(request, response.model_name);
    response.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    const std::string mask_name = request.request_id + ".mask.nii.gz";
    publish(responses / mask_name, gzip_compress(encode_nifti(response.mask, response.spacing)));
    publish(responses / (request.request_id + ".json"), encode_response(response, mask_name).dump());
    std::error_code ec;
    fs::remove(requests / j.at("patch").at("file").get<std::string>(), ec);
    fs::remove(path, ec);
    return true;
  }
  return false;
}

}  // namespace semisam
