#include <httplib.h>

#include "semisam/oracle_adapter.hpp"

namespace semisam {

BinaryMask HttpAdapter::segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                                std::string& model_name) {
  httplib::Client client(endpoint_);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const std::string id = std::to_string(counter_++) + "-" + std::to_string(fnv1a(query_key(ctx, prompts)));
  const auto body = encode_request(OracleRequest{id, patch, prompts}).dump();
  auto res = client.Post(kHttpSegmentPath, body, "application/json");
  if (!res) throw IoError("oracle endpoint " + endpoint_ + " unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw IoError("oracle endpoint returned HTTP " + std::to_string(res->status));
  const OracleResponse r = decode_response(nlohmann::json::parse(res->body));
  if (r.request_id != id) throw IoError("oracle answered request '" + r.request_id + "'");
  model_name = r.model_name;
  return r.mask;
}

}  // namespace semisam
