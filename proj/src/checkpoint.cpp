#include "nico/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "nico/error.hpp"
#include "nico/io.hpp"

namespace nico {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'N', 'I', 'C', 'O', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t k = 0; k < sizeof(T) / 2; ++k) std::swap(bytes[k], bytes[sizeof(T) - 1 - k]);
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t k = 0; k < sizeof(T) / 2; ++k) std::swap(raw[k], raw[sizeof(T) - 1 - k]);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string take(std::size_t count) {
    need(count);
    std::string s = bytes_.substr(pos_, count);
    pos_ += count;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t count) const {
    if (pos_ + count > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedBlock* Checkpoint::find(const std::string& name) const {
  for (const auto& block : blocks)
    if (block.name == name) return &block;
  return nullptr;
}

json to_json(const PolicyConfig& c) {
  return json{{"layers", c.layers},
              {"dim", c.dim},
              {"hidden", c.hidden},
              {"heads", c.heads},
              {"logit_clip", c.logit_clip},
              {"history_capacity", c.history_capacity},
              {"recency_mask", c.recency_mask},
              {"key_dim", c.effective_key_dim()},
              {"use_history_feature", c.use_history_feature},
              {"use_recency_mask", c.use_recency_mask},
              {"pooling", to_string(c.pooling)},
              {"norm", to_string(c.norm)}};
}

PolicyConfig policy_config_from_json(const json& j) {
  PolicyConfig c;
  try {
    c.layers = j.at("layers").get<std::size_t>();
    c.dim = j.at("dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.logit_clip = j.at("logit_clip").get<double>();
    c.history_capacity = j.at("history_capacity").get<std::size_t>();
    c.recency_mask = j.at("recency_mask").get<std::size_t>();
    c.key_dim = j.at("key_dim").get<std::size_t>();
    if (c.key_dim == c.dim) c.key_dim = 0;
    c.use_history_feature = j.at("use_history_feature").get<bool>();
    c.use_recency_mask = j.at("use_recency_mask").get<bool>();
    c.pooling = parse_pooling(j.at("pooling").get<std::string>());
    c.norm = parse_norm(j.at("norm").get<std::string>());
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad model_config: ") + e.what());
  }
  return c;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, checkpoint.format_version);
  const json header{{"format_version", checkpoint.format_version},
                    {"model_config", to_json(checkpoint.model)},
                    {"stage", checkpoint.stage},
                    {"epoch", checkpoint.epoch},
                    {"extra", checkpoint.extra}};
  const std::string text = header.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.blocks.size()));
  for (const auto& block : checkpoint.blocks) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(block.name.size()));
    out += block.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(block.values.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(block.values.cols));
    for (double v : block.values.data) put<double>(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  Reader reader(bytes);
  reader.take(sizeof kMagic);
  Checkpoint checkpoint;
  checkpoint.format_version = reader.get<std::uint32_t>();
  if (checkpoint.format_version != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint format_version " +
                          std::to_string(checkpoint.format_version));
  }
  const auto header_len = reader.get<std::uint32_t>();
  json header;
  try {
    header = json::parse(reader.take(header_len));
    checkpoint.stage = header.at("stage").get<std::string>();
    checkpoint.epoch = header.at("epoch").get<std::uint64_t>();
    if (header.contains("extra")) checkpoint.extra = header["extra"];
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  checkpoint.model = policy_config_from_json(header.at("model_config"));
  const auto count = reader.get<std::uint32_t>();
  for (std::uint32_t b = 0; b < count; ++b) {
    NamedBlock block;
    block.name = reader.take(reader.get<std::uint32_t>());
    const auto rows = reader.get<std::uint32_t>();
    const auto cols = reader.get<std::uint32_t>();
    block.values = nn::Matrix(rows, cols);
    for (double& v : block.values.data) v = reader.get<double>();
    checkpoint.blocks.push_back(std::move(block));
  }
  if (!reader.done()) throw CheckpointError("trailing bytes after checkpoint blocks");
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const InvalidInput& e) {
    throw CheckpointError(e.what());
  }
  return deserialize_checkpoint(bytes);
}

void append_policy_blocks(Checkpoint& checkpoint, const Policy& policy, const std::string& prefix,
                          bool with_moments) {
  for (const nn::Parameter* p : policy.parameters()) {
    checkpoint.blocks.push_back({prefix + p->name, p->value});
    if (with_moments) {
      checkpoint.blocks.push_back({"adam.m/" + prefix + p->name, p->first_moment});
      checkpoint.blocks.push_back({"adam.v/" + prefix + p->name, p->second_moment});
    }
  }
}

void restore_policy(const Checkpoint& checkpoint, Policy& policy, const std::string& prefix,
                    bool with_moments) {
  if (!(checkpoint.model == policy.config())) {
    throw CheckpointError("checkpoint model_config does not match the policy configuration");
  }
  const auto copy = [&](const std::string& name, nn::Matrix& target) {
    const NamedBlock* block = checkpoint.find(name);
    if (!block) throw CheckpointError("checkpoint is missing block '" + name + "'");
    if (block->values.rows != target.rows || block->values.cols != target.cols) {
      throw CheckpointError("block '" + name + "' has shape " + block->values.shape() +
                            ", expected " + target.shape());
    }
    target = block->values;
  };
  for (nn::Parameter* p : policy.parameters()) {
    copy(prefix + p->name, p->value);
    if (with_moments) {
      copy("adam.m/" + prefix + p->name, p->first_moment);
      copy("adam.v/" + prefix + p->name, p->second_moment);
    }
  }
}

Policy policy_from_checkpoint(const Checkpoint& checkpoint) {
  Policy policy(checkpoint.model, 0);
  restore_policy(checkpoint, policy);
  return policy;
}

}  // namespace nico
