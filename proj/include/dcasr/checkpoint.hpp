#ifndef DCASR_CHECKPOINT_HPP
#define DCASR_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcasr/diffkernel.hpp"
#include "dcasr/errors.hpp"

namespace dcasr {

inline constexpr const char* kCheckpointFormat = "dcasr-checkpoint-v1";

/// Writes `dir/manifest.json` plus `dir/params.bin`, a single little-endian
/// float32 blob holding every parameter in registration order. `meta` is an
/// arbitrary JSON object stored verbatim in the manifest (model config,
/// catalog fingerprint, ...). Values are cast to float32 on save, so a
/// float32 store round-trips byte for byte.
template <typename S>
void save_checkpoint(const std::filesystem::path& dir, const ParameterStore<S>& ps,
                     const nlohmann::json& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("checkpoint: cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["dtype"] = "float32";
  manifest["meta"] = meta;
  nlohmann::json params = nlohmann::json::array();

  std::vector<char> blob;
  for (std::size_t e = 0; e < ps.size(); ++e) {
    const auto& entry = ps.entry(e);
    nlohmann::json p;
    p["name"] = entry.name;
    p["shape"] = entry.value.shape;
    p["offset"] = blob.size();
    p["count"] = entry.value.size();
    p["trainable"] = entry.trainable;
    params.push_back(std::move(p));
    for (const S v : entry.value.data) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      blob.push_back(static_cast<char>(bits & 0xFF));
      blob.push_back(static_cast<char>((bits >> 8) & 0xFF));
      blob.push_back(static_cast<char>((bits >> 16) & 0xFF));
      blob.push_back(static_cast<char>((bits >> 24) & 0xFF));
    }
  }
  manifest["params"] = std::move(params);

  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open " + (dir / "params.bin").string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("checkpoint: write failed for params.bin");
  }
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open " + (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("checkpoint: write failed for manifest.json");
  }
}

inline nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError("checkpoint: invalid manifest.json: " + std::string(ex.what()));
  }
  if (!manifest.is_object() || manifest.value("format", "") != kCheckpointFormat)
    throw SchemaError("checkpoint: unrecognized manifest format");
  return manifest;
}

/// Loads a checkpoint into an already-registered store. Every manifest entry
/// must match a registered parameter by name and shape. Returns the `meta`
/// object stored at save time.
template <typename S>
nlohmann::json load_checkpoint(const std::filesystem::path& dir, ParameterStore<S>& ps) {
  const nlohmann::json manifest = read_checkpoint_manifest(dir);
  if (manifest.value("dtype", "") != "float32")
    throw SchemaError("checkpoint: unsupported dtype");

  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + (dir / "params.bin").string());
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto& params = manifest.at("params");
  if (!params.is_array() || params.size() != ps.size())
    throw SchemaError("checkpoint: parameter count mismatch");
  for (const auto& p : params) {
    const std::string name = p.at("name").get<std::string>();
    if (!ps.has(name)) throw SchemaError("checkpoint: unknown parameter " + name);
    auto& value = ps.value(name);
    const auto shape = p.at("shape").get<std::vector<std::size_t>>();
    if (shape != value.shape)
      throw SchemaError("checkpoint: shape mismatch for " + name);
    const auto offset = p.at("offset").get<std::size_t>();
    const auto count = p.at("count").get<std::size_t>();
    if (count != value.size() || offset + count * 4 > blob.size())
      throw SchemaError("checkpoint: blob bounds exceeded for " + name);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t o = offset + i * 4;
      const std::uint32_t bits = static_cast<std::uint8_t>(blob[o]) |
                                 (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[o + 1])) << 8) |
                                 (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[o + 2])) << 16) |
                                 (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[o + 3])) << 24);
      value.data[i] = static_cast<S>(std::bit_cast<float>(bits));
    }
    if (p.contains("trainable")) ps.set_trainable(name, p.at("trainable").get<bool>());
  }
  return manifest.value("meta", nlohmann::json::object());
}

}  // namespace dcasr

#endif  // DCASR_CHECKPOINT_HPP
