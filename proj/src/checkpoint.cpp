#include "spadnn/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>

#include "spadnn/errors.hpp"
#include "spadnn/util.hpp"

namespace spadnn {
namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kMagic = "spadnn-checkpoint";

void append_f32(std::string& out, double v) {
  static_assert(std::endian::native == std::endian::little ||
                std::endian::native == std::endian::big);
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

json block_entry(const NamedArray& a, const char* kind) {
  json e;
  e["name"] = a.name;
  e["kind"] = kind;
  e["shape"] = a.shape;
  return e;
}

std::uint64_t checksum(const std::string& header_dump, std::string_view payload) {
  return fnv1a64(payload, fnv1a64(header_dump));
}

}  // namespace

std::string encode_checkpoint(const ModelCheckpoint& ckpt) {
  std::string payload;
  json blocks = json::array();
  for (const auto& a : ckpt.weights) {
    if (shape_numel(a.shape) != a.values.size())
      throw ValidationError("block '" + a.name + "' length does not match its shape");
    blocks.push_back(block_entry(a, "weight"));
    for (double v : a.values) append_f32(payload, v);
  }
  for (const auto& a : ckpt.buffers) {
    if (shape_numel(a.shape) != a.values.size())
      throw ValidationError("block '" + a.name + "' length does not match its shape");
    blocks.push_back(block_entry(a, "buffer"));
    for (double v : a.values) append_f32(payload, v);
  }

  json header;
  header["version"] = kCheckpointVersion;
  header["spec"] = json::parse(spec_to_text(ckpt.spec));
  header["blocks"] = std::move(blocks);
  json meta;
  meta["epoch"] = ckpt.meta.epoch;
  meta["seed"] = ckpt.meta.seed;
  meta["metrics"] = ckpt.meta.metrics;
  header["metadata"] = std::move(meta);
  header["payload_bytes"] = payload.size();
  const auto sum = checksum(header.dump(), payload);
  header["checksum"] = "fnv1a64:" + hex64(sum);

  std::string out;
  out += kMagic;
  out += ' ';
  out += std::to_string(kCheckpointVersion);
  out += '\n';
  out += header.dump();
  out += '\n';
  out += payload;
  return out;
}

ModelCheckpoint decode_checkpoint(std::string_view bytes) {
  const auto line1 = bytes.find('\n');
  if (line1 == std::string_view::npos || bytes.substr(0, kMagic.size()) != kMagic)
    throw IntegrityError("not a checkpoint file (bad magic)");
  const auto version_text = bytes.substr(kMagic.size() + 1, line1 - kMagic.size() - 1);
  if (version_text != std::to_string(kCheckpointVersion))
    throw IntegrityError("unsupported checkpoint version '" + std::string(version_text) + "'");
  const auto line2 = bytes.find('\n', line1 + 1);
  if (line2 == std::string_view::npos)
    throw IntegrityError("checkpoint truncated inside header");

  json header;
  try {
    header = json::parse(bytes.substr(line1 + 1, line2 - line1 - 1));
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint header corrupt: ") + e.what());
  }
  const auto payload = bytes.substr(line2 + 1);
  std::string stored_sum;
  std::size_t payload_bytes = 0;
  try {
    stored_sum = header.at("checksum").get<std::string>();
    payload_bytes = header.at("payload_bytes").get<std::size_t>();
  } catch (const json::exception&) {
    throw IntegrityError("checkpoint header lacks checksum or payload size");
  }
  if (payload.size() != payload_bytes)
    throw IntegrityError("checkpoint payload is " + std::to_string(payload.size()) +
                         " bytes, header declares " + std::to_string(payload_bytes));
  header.erase("checksum");
  if ("fnv1a64:" + hex64(checksum(header.dump(), payload)) != stored_sum)
    throw IntegrityError("checkpoint checksum mismatch");

  ModelCheckpoint ck;
  try {
    ck.spec = spec_from_text(header.at("spec").dump());
    const auto& meta = header.at("metadata");
    ck.meta.epoch = meta.at("epoch").get<std::size_t>();
    ck.meta.seed = meta.at("seed").get<std::uint64_t>();
    ck.meta.metrics = meta.at("metrics").get<std::map<std::string, double>>();
    std::size_t offset = 0;
    for (const auto& b : header.at("blocks")) {
      NamedArray a;
      a.name = b.at("name").get<std::string>();
      a.shape = b.at("shape").get<Shape>();
      const auto n = shape_numel(a.shape);
      if (offset + 4 * n > payload.size())
        throw IntegrityError("block '" + a.name + "' runs past the payload");
      a.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) a.values[i] = read_f32(payload.data() + offset + 4 * i);
      offset += 4 * n;
      const auto kind = b.at("kind").get<std::string>();
      if (kind == "weight") ck.weights.push_back(std::move(a));
      else if (kind == "buffer") ck.buffers.push_back(std::move(a));
      else throw IntegrityError("unknown block kind '" + kind + "'");
    }
    if (offset != payload.size())
      throw IntegrityError("checkpoint payload has trailing bytes");
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint header malformed: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw IoError("checkpoint not found: " + path.string());
  return decode_checkpoint(read_file(path));
}

void save_checkpoint(const Network& network, const std::filesystem::path& path,
                     const TrainingMetadata& meta) {
  auto ck = network.to_checkpoint();
  ck.meta = meta;
  save_checkpoint(ck, path);
}

Network load_network(const std::filesystem::path& path) {
  return Network::from_checkpoint(load_checkpoint(path));
}

}  // namespace spadnn
