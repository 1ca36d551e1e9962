#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "sktag/corpus.hpp"
#include "sktag/model.hpp"
#include "sktag/tokenizer.hpp"

namespace sktag {

// Container layout:
//   "SKTG" | u32 version | u64 metadata length | metadata JSON | f32 payload
// All integers and floats little-endian. Tensor payloads follow the manifest
// order, offsets relative to the start of the payload.
inline constexpr char kModelMagic[4] = {'S', 'K', 'T', 'G'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelBundle {
  ModelParams params;
  TagSet tagset;
  Tokenizer tokenizer;
};

std::string serialize_model(const ModelBundle& bundle);
ModelBundle deserialize_model(std::string_view bytes);

void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

/// Metadata block as pretty JSON, with the embedded tokenizer replaced by a
/// size summary. Does not read tensor payloads.
std::string inspect_model(const std::string& path);

}  // namespace sktag
