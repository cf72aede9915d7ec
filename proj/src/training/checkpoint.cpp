#include "training/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>

#include "common/error.hpp"
#include "data/csv.hpp"

namespace clinbench::training {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

std::uint32_t swap_bytes(std::uint32_t x) {
  return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) | (x << 24);
}

void put_f32(std::string& out, double value) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  out.append(bytes, 4);
}

double get_f32(const std::string& blob, std::size_t offset) {
  std::uint32_t bits;
  std::memcpy(&bits, blob.data() + offset, 4);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  return static_cast<double>(std::bit_cast<float>(bits));
}

json base_manifest(const std::string& kind, const data::CohortSchema& schema, const CheckpointInfo& info) {
  return {{"format_version", kFormatVersion}, {"kind", kind},         {"schema_hash", schema.hash()},
          {"epoch", info.epoch},              {"metrics", info.metrics}, {"extra", info.extra}};
}

void write_all(const std::string& dir, const json& manifest, const std::string& blob, const data::CohortSchema& schema) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create checkpoint directory " + dir + ": " + ec.message());
  data::write_text_file_atomic((fs::path(dir) / kTensorsFile).string(), blob);
  data::write_text_file_atomic((fs::path(dir) / kSchemaFile).string(), schema.to_json().dump(2) + "\n");
  // Manifest last: a directory with a manifest is complete.
  data::write_text_file_atomic((fs::path(dir) / kManifestFile).string(), manifest.dump(2) + "\n");
}

}  // namespace

void save_checkpoint(const std::string& dir, const model::Model& model, const data::CohortSchema& schema,
                     const TrainConfig& train, const CheckpointInfo& info) {
  json manifest = base_manifest("neural", schema, info);
  manifest["model"] = model.config().to_json();
  manifest["training"] = train.to_json();
  json tensors = json::array();
  std::string blob;
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", blob.size()}});
    for (double v : p.value.data()) put_f32(blob, v);
  }
  manifest["tensors"] = tensors;
  write_all(dir, manifest, blob, schema);
}

void save_checkpoint(const std::string& dir, const baselines::LogResModel& model, const data::CohortSchema& schema,
                     const CheckpointInfo& info) {
  json manifest = base_manifest("logres", schema, info);
  manifest["logres"] = model.to_json();
  manifest["tensors"] = json::array();
  write_all(dir, manifest, "", schema);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / kManifestFile).string();
  require(fs::exists(manifest_path), ErrorKind::Io, "no checkpoint manifest at " + manifest_path);
  LoadedCheckpoint out;
  try {
    out.manifest = json::parse(data::read_text_file(manifest_path));
    out.schema = data::CohortSchema::from_json(json::parse(data::read_text_file((fs::path(dir) / kSchemaFile).string())));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "checkpoint " + dir + ": " + e.what());
  }
  const json& m = out.manifest;
  try {
    require(m.value("format_version", 0) == kFormatVersion, ErrorKind::Integrity,
            "checkpoint " + dir + ": unsupported format version");
    out.kind = m.at("kind").get<std::string>();
    require(m.at("schema_hash").get<std::string>() == out.schema.hash(), ErrorKind::Integrity,
            "checkpoint " + dir + ": fitted schema does not match the manifest hash");
    out.info.epoch = m.at("epoch").get<std::size_t>();
    out.info.metrics = m.at("metrics");
    out.info.extra = m.value("extra", json::object());
  } catch (const json::exception& e) {
    fail(ErrorKind::Integrity, "checkpoint " + dir + ": malformed manifest: " + e.what());
  }

  if (out.kind == "logres") {
    out.logres = baselines::LogResModel::from_json(m.at("logres"));
    return out;
  }
  require(out.kind == "neural", ErrorKind::Integrity, "checkpoint " + dir + ": unknown kind '" + out.kind + "'");

  out.train = TrainConfig::from_json(m.at("training"));
  model::Model net = model::Model::build(model::ModelConfig::from_json(m.at("model")), out.schema);
  const std::string blob = data::read_text_file((fs::path(dir) / kTensorsFile).string());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) index[net.parameters()[i].name] = i;
  std::vector<bool> seen(index.size(), false);
  try {
    for (const auto& entry : m.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<numerics::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto it = index.find(name);
      require(it != index.end(), ErrorKind::Integrity, "checkpoint " + dir + ": unexpected tensor " + name);
      auto& target = net.parameters()[it->second].value;
      require(shape == target.shape(), ErrorKind::Integrity,
              "checkpoint " + dir + ": tensor " + name + " has shape " + numerics::to_string(shape) + ", model expects " +
                  numerics::to_string(target.shape()));
      const std::size_t count = numerics::shape_size(shape);
      require(offset % 4 == 0 && offset <= blob.size() && (blob.size() - offset) / 4 >= count, ErrorKind::Integrity,
              "checkpoint " + dir + ": tensor " + name + " extends past the end of " + kTensorsFile);
      auto data = target.data();
      for (std::size_t k = 0; k < count; ++k) data[k] = get_f32(blob, offset + 4 * k);
      seen[it->second] = true;
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Integrity, "checkpoint " + dir + ": malformed tensor directory: " + e.what());
  }
  for (const auto& [name, i] : index)
    require(seen[i], ErrorKind::Integrity, "checkpoint " + dir + ": missing tensor " + name);
  out.model = std::move(net);
  return out;
}

}  // namespace clinbench::training
