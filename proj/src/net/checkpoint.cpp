#include "stroke/net/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "stroke/io/atomic_file.hpp"

namespace stroke::net {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json header;
  header["version"] = 1;
  header["seed"] = ckpt.seed;
  header["config"] = ckpt.config.to_json();
  header["extra"] = ckpt.extra;
  header["tensors"] = json::array();

  std::uint64_t offset = 0;
  for (const auto& [name, a] : ckpt.params) {
    const std::uint64_t nbytes = a.numel() * sizeof(float);
    header["tensors"].push_back({{"path", name},
                                 {"dtype", "float32"},
                                 {"shape", a.shape},
                                 {"offset", offset},
                                 {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string header_str = header.dump();

  io::atomic_write(path, [&](const std::filesystem::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::Runtime, "cannot open for writing: " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = header_str.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, a] : ckpt.params)
      out.write(reinterpret_cast<const char*>(a.v.data()),
                static_cast<std::streamsize>(a.numel() * sizeof(float)));
    if (!out) fail(ErrorKind::Runtime, "short write: " + tmp.string());
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open checkpoint " + path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorKind::Format, "not a checkpoint file: " + path.string());

  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorKind::Format, "truncated checkpoint header: " + path.string());

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "bad checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.seed = header.value("seed", std::uint64_t{0});
  ckpt.config = NetworkConfig::from_json(header.at("config"));
  ckpt.extra = header.value("extra", json::object());

  const std::streampos data_start = in.tellg();
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("path").get<std::string>();
    if (t.at("dtype").get<std::string>() != "float32")
      fail(ErrorKind::Unsupported, "checkpoint tensor '" + name + "' is not float32");
    Array<float> a = Array<float>::make(t.at("shape").get<std::vector<int>>());
    if (a.numel() * sizeof(float) != t.at("nbytes").get<std::uint64_t>())
      fail(ErrorKind::Format, "checkpoint tensor '" + name + "' has inconsistent size");
    in.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(a.v.data()),
            static_cast<std::streamsize>(a.numel() * sizeof(float)));
    if (!in) fail(ErrorKind::Format, "truncated checkpoint data: " + path.string());
    ckpt.params[name] = std::move(a);
  }
  return ckpt;
}

}  // namespace stroke::net
