#include "modviz/models/checkpoint.hpp"

#include "modviz/common/binary_io.hpp"

namespace modviz::models {

namespace {
constexpr char kMagic[4] = {'M', 'W', 'T', 'S'};
constexpr std::string_view kInfoPrefix = "info.";
}  // namespace

KeyValues checkpoint_manifest(const ModelSnapshot& snap) {
  KeyValues kv = snap.spec.to_kv();
  kv.set_uint("seed", snap.seed);
  for (const auto& [name, t] : snap.tensors) kv.set("shape." + name, grad::shape_string(t.shape()));
  for (const auto& [k, v] : snap.info.items()) kv.set(std::string(kInfoPrefix) + k, v);
  return kv;
}

std::vector<char> encode_checkpoint(const ModelSnapshot& snap) {
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string manifest = checkpoint_manifest(snap).to_string();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest.size()));
  w.put_bytes(manifest);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(snap.tensors.size()));
  for (const auto& [name, t] : snap.tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_array(t.ptr(), t.size());
  }
  return w.bytes();
}

ModelSnapshot decode_checkpoint(std::vector<char> bytes) {
  using K = FormatError::Kind;
  if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != std::string_view(kMagic, 4))
    throw FormatError(K::BadMagic, "bad magic: not an MWTS checkpoint");
  ByteReader r(std::move(bytes));
  r.get_bytes(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError(K::VersionMismatch, "checkpoint version mismatch: found " + std::to_string(version));
  const auto manifest_len = r.get<std::uint32_t>();
  const auto manifest = KeyValues::parse(r.get_bytes(manifest_len));

  ModelSnapshot snap;
  snap.spec = ModelSpec::from_kv(manifest);
  snap.seed = manifest.get_uint("seed", 0);
  for (const auto& [k, v] : manifest.items())
    if (k.starts_with(kInfoPrefix)) snap.info.set(k.substr(kInfoPrefix.size()), v);

  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_bytes(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw FormatError(K::Malformed, "tensor " + name + " has rank " + std::to_string(rank));
    grad::Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    if (grad::shape_size(shape) * sizeof(float) > r.remaining())
      throw FormatError(K::TruncatedPayload, "truncated payload in tensor " + name);
    grad::Tensor<float> t(shape);
    r.get_array(t.ptr(), t.size());
    snap.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) throw FormatError(K::Malformed, "trailing bytes after the last tensor");
  return snap;
}

void write_checkpoint(const ModelSnapshot& snap, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(snap));
}

ModelSnapshot read_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace modviz::models
