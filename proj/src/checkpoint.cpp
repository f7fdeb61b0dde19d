#include "semisam/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "semisam/nifti.hpp"

namespace semisam {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'S', 'A', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void put(Bytes& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const Bytes& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header{{"format_version", kCheckpointVersion},
                        {"backbone", nn::to_json(ckpt.backbone)},
                        {"t", ckpt.t},
                        {"config", ckpt.config},
                        {"code_version", ckpt.code_version},
                        {"rng", ckpt.rng}};
  const std::vector<std::pair<const char*, const std::vector<float>*>> tensors{
      {"student", &ckpt.student}, {"teacher", &ckpt.teacher}, {"momentum", &ckpt.momentum}};
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, v] : tensors) header["tensors"].push_back({{"name", name}, {"count", v->size()}});

  const std::string text = header.dump();
  Bytes out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, v] : tensors) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v->data());
    out.insert(out.end(), p, p + v->size() * sizeof(float));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, out);
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Bytes in = read_file(path);
  if (in.size() < 20 || std::memcmp(in.data(), kMagic, 8) != 0) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  std::size_t pos = 8;
  const auto version = get<std::uint32_t>(in, pos);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(in, pos);
  if (pos + len > in.size()) throw IoError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                   in.begin() + static_cast<std::ptrdiff_t>(pos + len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header: ") + e.what());
  }
  pos += len;

  Checkpoint c;
  c.backbone = nn::backbone_from_json(header.at("backbone"));
  c.t = header.at("t").get<std::int64_t>();
  c.config = header.value("config", nlohmann::json());
  c.code_version = header.value("code_version", "");
  c.rng = header.value("rng", std::map<std::string, std::string>{});
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto count = entry.at("count").get<std::size_t>();
    if (pos + count * sizeof(float) > in.size()) throw IoError("checkpoint truncated");
    std::vector<float> v(count);
    std::memcpy(v.data(), in.data() + pos, count * sizeof(float));
    pos += count * sizeof(float);
    if (name == "student") c.student = std::move(v);
    else if (name == "teacher") c.teacher = std::move(v);
    else if (name == "momentum") c.momentum = std::move(v);
  }
  const std::size_t n = nn::Backbone<float>(c.backbone).parameter_count();
  if (c.student.size() != n || c.teacher.size() != n || (!c.momentum.empty() && c.momentum.size() != n)) {
    throw IoError("checkpoint parameter count does not match its backbone");
  }
  return c;
}

}  // namespace semisam
