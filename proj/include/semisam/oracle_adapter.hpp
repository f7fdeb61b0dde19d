#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "semisam/nifti.hpp"
#include "semisam/oracle.hpp"

namespace semisam {

// Wire contract shared by every out-of-process oracle transport.
//
//   request  {version, request_id, shape[d,h,w], spacing[d,h,w],
//             prompts[[z,y,x,polarity]...], patch: <payload>}
//   response {version, request_id, model_name, elapsed_ms, mask: <payload>}
//
// A payload is either {"encoding": "nifti-gz-base64", "data": "..."} (inline)
// or {"encoding": "nifti-gz-file", "file": "name.nii.gz"} (spool directory,
// relative to the JSON file). Images travel as float32 NIfTI-1, masks as uint8.

inline constexpr int kWireVersion = 1;

struct OracleRequest {
  std::string request_id;
  Volume patch;
  PromptSet prompts;
};

struct OracleResponse {
  std::string request_id;
  BinaryMask mask;
  Spacing spacing{1.0, 1.0, 1.0};
  std::string model_name;
  double elapsed_ms = 0.0;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(const std::string& text);

/// `patch_file` set: payload is written by the caller under that name.
nlohmann::json encode_request(const OracleRequest& request, const std::optional<std::string>& patch_file = {});
OracleRequest decode_request(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json encode_response(const OracleResponse& response, const std::optional<std::string>& mask_file = {});
OracleResponse decode_response(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Exchanges paired files through `<spool>/requests` and `<spool>/responses`.
/// Files are published by rename, so readers never observe partial writes.
/// A missing spool directory fails immediately; a silent responder fails at
/// the timeout.
class SpoolAdapter final : public OracleBackend {
 public:
  SpoolAdapter(std::filesystem::path spool_dir, std::chrono::milliseconds timeout,
               std::chrono::milliseconds poll = std::chrono::milliseconds(5))
      : dir_(std::move(spool_dir)), timeout_(timeout), poll_(poll) {}
  std::string kind() const override { return "external_adapter:spool"; }
  BinaryMask segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                     std::string& model_name) override;

 private:
  std::filesystem::path dir_;
  std::chrono::milliseconds timeout_;
  std::chrono::milliseconds poll_;
  std::uint64_t counter_ = 0;
};

/// Serves one spooled request if any is pending; returns false when idle.
/// `handler` maps a request to (mask, model_name). Used by oracle servers
/// and tests.
bool serve_spool_once(const std::filesystem::path& spool_dir,
                      const std::function<BinaryMask(const OracleRequest&, std::string& model_name)>& handler);

/// POSTs the inline-encoded request to `<endpoint>/v1/segment`
/// (endpoint like "http://127.0.0.1:8765").
class HttpAdapter final : public OracleBackend {
 public:
  HttpAdapter(std::string endpoint, std::chrono::milliseconds timeout)
      : endpoint_(std::move(endpoint)), timeout_(timeout) {}
  std::string kind() const override { return "external_adapter:http"; }
  BinaryMask segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                     std::string& model_name) override;

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
  std::uint64_t counter_ = 0;
};

inline constexpr const char* kHttpSegmentPath = "/v1/segment";

}  // namespace semisam
