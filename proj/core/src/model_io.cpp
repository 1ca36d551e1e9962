#include "sktag/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sktag/error.hpp"

namespace sktag {

namespace {

using Json = nlohmann::json;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

Json config_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"max_len", c.max_len},   {"d_model", c.d_model},
          {"n_heads", c.n_heads},       {"n_layers", c.n_layers}, {"d_ff", c.d_ff},
          {"n_tags", c.n_tags},         {"dropout_rate", c.dropout_rate}, {"seed", c.seed}};
}

ModelConfig config_from_json(const Json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.n_tags = j.at("n_tags").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

struct Header {
  Json metadata;
  std::size_t payload_offset = 0;
};

Header read_header(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw ModelError("not an SKTG model file (bad magic)");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kModelFormatVersion) {
    throw ModelError("unsupported model format version " + std::to_string(version) +
                     " (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto meta_len = get_le(bytes, 8, 8);
  if (meta_len > bytes.size() - 16) throw ModelError("model file truncated in metadata");
  Header h;
  try {
    h.metadata = Json::parse(bytes.substr(16, meta_len));
  } catch (const Json::exception& e) {
    throw ModelError(std::string("model metadata: ") + e.what());
  }
  h.payload_offset = 16 + meta_len;
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::string serialize_model(const ModelBundle& bundle) {
  const auto& params = bundle.params;
  if (bundle.tagset.size() != params.config.n_tags) {
    throw ModelError("tag set size does not match the model's n_tags");
  }
  if (bundle.tokenizer.vocab_size() != params.config.vocab_size) {
    throw ModelError("tokenizer vocabulary does not match the model's vocab_size");
  }
  const auto tokenizer_json = bundle.tokenizer.to_json();

  Json manifest = Json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.named_tensors()) {
    const std::uint64_t bytes = t->size() * sizeof(float);
    manifest.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  Json meta;
  meta["config"] = config_json(params.config);
  meta["tagset"] = bundle.tagset.tags();
  meta["tokenizer_hash"] = fnv1a_hex(tokenizer_json);
  meta["tokenizer"] = Json::parse(tokenizer_json);
  meta["tensors"] = std::move(manifest);
  meta["payload_bytes"] = offset;
  const auto meta_text = meta.dump();

  std::string out(kModelMagic, 4);
  put_u32(out, kModelFormatVersion);
  put_u64(out, meta_text.size());
  out += meta_text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : params.named_tensors()) {
    for (const float v : t->values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ModelBundle deserialize_model(std::string_view bytes) {
  const auto header = read_header(bytes);
  const auto& meta = header.metadata;
  ModelBundle bundle;
  try {
    bundle.params.config = config_from_json(meta.at("config"));
    bundle.tagset = TagSet(meta.at("tagset").get<std::vector<Tag>>());
    const auto tokenizer_json = meta.at("tokenizer").dump(1) + "\n";
    bundle.tokenizer = Tokenizer::from_json(tokenizer_json);
    if (bundle.tokenizer.fingerprint() != meta.at("tokenizer_hash").get<std::string>()) {
      throw ModelError("embedded tokenizer does not match its recorded hash");
    }
    const auto payload_bytes = meta.at("payload_bytes").get<std::uint64_t>();
    if (bytes.size() - header.payload_offset != payload_bytes) {
      throw ModelError("model payload is " + std::to_string(bytes.size() - header.payload_offset) +
                       " bytes, metadata declares " + std::to_string(payload_bytes));
    }

    auto& p = bundle.params;
    p.config.validate();
    p.layers.resize(p.config.n_layers);
    const auto& manifest = meta.at("tensors");
    bool has_mlm = false;
    for (const auto& entry : manifest) has_mlm = has_mlm || entry.at("name") == "mlm.weight";
    if (has_mlm) p.mlm_weight.values.resize(1);
    auto named = p.named_tensors();
    if (named.size() != manifest.size()) {
      throw ModelError("tensor manifest lists " + std::to_string(manifest.size()) +
                       " tensors, expected " + std::to_string(named.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      const auto& entry = manifest[i];
      auto& [name, tensor] = named[i];
      if (entry.at("name").get<std::string>() != name) {
        throw ModelError("tensor " + std::to_string(i) + " is '" + entry.at("name").get<std::string>() +
                         "', expected '" + name + "'");
      }
      tensor->shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto count = Tensor<float>::element_count(tensor->shape);
      const auto offset = entry.at("offset").get<std::uint64_t>();
      if (entry.at("bytes").get<std::uint64_t>() != count * sizeof(float) ||
          offset + count * sizeof(float) > payload_bytes) {
        throw ModelError("tensor '" + name + "' has an inconsistent manifest entry");
      }
      tensor->values.resize(count);
      const auto base = header.payload_offset + offset;
      for (std::size_t k = 0; k < count; ++k) {
        tensor->values[k] =
            std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, base + 4 * k, 4)));
      }
    }
  } catch (const Json::exception& e) {
    throw ModelError(std::string("model metadata: ") + e.what());
  } catch (const DataError& e) {
    throw ModelError(std::string("model metadata: ") + e.what());
  }

  // Shapes must match what the config implies.
  const auto expected = [&] {
    auto fresh = init_model(bundle.params.config, bundle.params.has_mlm_head());
    std::vector<std::vector<std::size_t>> shapes;
    for (const auto& [n, t] : fresh.named_tensors()) shapes.push_back(t->shape);
    return shapes;
  }();
  const auto named = bundle.params.named_tensors();
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].second->shape != expected[i]) {
      throw ModelError("tensor '" + named[i].first + "' has shape " +
                       shape_string(named[i].second->shape) + ", config implies " +
                       shape_string(expected[i]));
    }
  }
  if (bundle.tagset.size() != bundle.params.config.n_tags ||
      bundle.tokenizer.vocab_size() != bundle.params.config.vocab_size) {
    throw ModelError("model metadata is inconsistent with its config");
  }
  return bundle;
}

void save_model(const ModelBundle& bundle, const std::string& path) {
  const auto bytes = serialize_model(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelBundle load_model(const std::string& path) { return deserialize_model(read_file(path)); }

std::string inspect_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::string head(16, '\0');
  in.read(head.data(), 16);
  if (in.gcount() != 16) throw ModelError("not an SKTG model file (too short)");
  const auto meta_len = get_le(head, 8, 8);
  std::string bytes = head;
  bytes.resize(16 + meta_len);
  in.read(bytes.data() + 16, static_cast<std::streamsize>(meta_len));
  if (static_cast<std::uint64_t>(in.gcount()) != meta_len) {
    throw ModelError("model file truncated in metadata");
  }
  auto meta = read_header(bytes).metadata;
  if (meta.contains("tokenizer")) {
    const auto& tok = meta["tokenizer"];
    meta["tokenizer"] = {{"vocab_size", tok.value("vocab", Json::object()).size()},
                         {"merges", tok.value("merges", Json::array()).size()},
                         {"alphabet", tok.value("alphabet", Json::array()).size()}};
  }
  meta["format_version"] = kModelFormatVersion;
  return meta.dump(2) + "\n";
}

}  // namespace sktag
