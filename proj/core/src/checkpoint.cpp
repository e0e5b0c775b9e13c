#include "sclft/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sclft {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'L', 'F', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::string& s, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

std::uint64_t fnv1a64_bytes(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::json config_to_json(const Checkpoint& c) {
  return nlohmann::json{
      {"encoder",
       {{"vocab_hash_dim", c.config.vocab_hash_dim},
        {"hidden_dims", c.config.hidden_dims},
        {"embed_dim", c.config.embed_dim},
        {"max_len", c.config.max_len},
        {"seed", c.config.seed}}},
      {"num_classes", c.num_classes},
      {"meta", {{"task", c.meta.task}, {"step", c.meta.step}, {"metrics", c.meta.metrics}}}};
}

void config_from_json(const nlohmann::json& j, Checkpoint& c) {
  const auto& e = j.at("encoder");
  c.config.vocab_hash_dim = e.at("vocab_hash_dim").get<std::size_t>();
  c.config.hidden_dims = e.at("hidden_dims").get<std::vector<std::size_t>>();
  c.config.embed_dim = e.at("embed_dim").get<std::size_t>();
  c.config.max_len = e.at("max_len").get<std::size_t>();
  c.config.seed = e.at("seed").get<std::uint64_t>();
  c.num_classes = j.at("num_classes").get<int>();
  c.meta.task = j.at("meta").at("task").get<std::string>();
  c.meta.step = j.at("meta").at("step").get<std::int64_t>();
  c.meta.metrics = j.at("meta").at("metrics").get<std::map<std::string, double>>();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u32(buf, kVersion);

  const std::string cfg = config_to_json(ckpt).dump();
  put_u64(buf, cfg.size());
  buf.append(cfg);

  std::string blob;
  for (const auto span : param_tensors(ckpt.params)) {
    for (double d : span) put_u64(blob, std::bit_cast<std::uint64_t>(d));
  }
  put_u64(buf, blob.size());
  buf.append(blob);

  put_u64(buf, fnv1a64_bytes(buf));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), Errc::io_error, "save_checkpoint: cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), Errc::io_error, "save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "load_checkpoint: cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::size_t min_size = sizeof(kMagic) + 4 + 8 + 8 + 8;
  require(buf.size() >= min_size, Errc::corrupted_checkpoint,
          "load_checkpoint: file too short: " + path.string());
  require(std::memcmp(buf.data(), kMagic, sizeof(kMagic)) == 0, Errc::corrupted_checkpoint,
          "load_checkpoint: bad magic bytes");
  const std::uint32_t version = get_u32(buf, sizeof(kMagic));
  require(version == kVersion, Errc::version_mismatch,
          "load_checkpoint: unsupported version " + std::to_string(version));

  const std::string body = buf.substr(0, buf.size() - 8);
  const std::uint64_t stored = get_u64(buf, buf.size() - 8);
  require(fnv1a64_bytes(body) == stored, Errc::corrupted_checkpoint,
          "load_checkpoint: checksum mismatch");

  std::size_t off = sizeof(kMagic) + 4;
  auto take_section = [&](const char* what) {
    require(off + 8 <= body.size(), Errc::corrupted_checkpoint,
            std::string("load_checkpoint: truncated ") + what);
    const std::uint64_t len = get_u64(body, off);
    off += 8;
    require(off + len <= body.size(), Errc::corrupted_checkpoint,
            std::string("load_checkpoint: truncated ") + what);
    std::string s = body.substr(off, len);
    off += len;
    return s;
  };

  const std::string cfg_text = take_section("config section");
  const std::string blob = take_section("parameter blob");
  require(off == body.size(), Errc::corrupted_checkpoint, "load_checkpoint: trailing bytes");

  Checkpoint c;
  try {
    config_from_json(nlohmann::json::parse(cfg_text), c);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::corrupted_checkpoint, std::string("load_checkpoint: bad config section: ") + e.what());
  }

  c.params = zero_params(c.config, c.num_classes);
  std::size_t pos = 0;
  for (auto span : param_tensors(c.params)) {
    for (double& d : span) {
      require(pos + 8 <= blob.size(), Errc::corrupted_checkpoint,
              "load_checkpoint: parameter blob too short");
      d = std::bit_cast<double>(get_u64(blob, pos));
      pos += 8;
    }
  }
  require(pos == blob.size(), Errc::corrupted_checkpoint,
          "load_checkpoint: parameter blob size mismatch");
  return c;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  return Model{ckpt.config, ckpt.num_classes, ckpt.params};
}

Checkpoint checkpoint_from_model(const Model& model, CheckpointMeta meta) {
  return Checkpoint{model.config, model.num_classes, model.params, std::move(meta)};
}

}  // namespace sclft
