#include "modviz/signal/dataset_io.hpp"

#include <filesystem>
#include <limits>

#include "modviz/common/binary_io.hpp"

namespace modviz::signal {

namespace {
constexpr char kMagic[4] = {'R', 'M', 'L', 'B'};
constexpr std::size_t kRecordHeader = 8;
}  // namespace

std::string dataset_sidecar_path(const std::string& path) { return path + ".manifest"; }

std::vector<char> encode_dataset(const Dataset& ds) {
  const std::size_t n_x = ds.n_x();
  if (ds.samples.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("too many samples");
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.samples.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(n_x));
  w.put<std::uint32_t>(2);
  for (const auto& s : ds.samples) {
    if (s.iq.size() != n_x) throw InvalidArgument("dataset has samples of differing length");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(s.label));
    w.put<std::int16_t>(static_cast<std::int16_t>(s.snr_db));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.split));
    w.put<std::uint8_t>(0);
    w.put<std::uint8_t>(0);
    w.put<std::uint8_t>(0);
    static_assert(sizeof(std::complex<float>) == 2 * sizeof(float));
    w.put_array(reinterpret_cast<const float*>(s.iq.data()), 2 * n_x);
  }
  return w.bytes();
}

Dataset decode_dataset(std::vector<char> bytes) {
  using K = FormatError::Kind;
  if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != std::string_view(kMagic, 4))
    throw FormatError(K::BadMagic, "bad magic: not an RMLB dataset");
  ByteReader r(std::move(bytes));
  r.get_bytes(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion)
    throw FormatError(K::VersionMismatch, "version mismatch: expected 1, found " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  const auto n_x = r.get<std::uint32_t>();
  const auto channels = r.get<std::uint32_t>();
  if (channels != 2) throw FormatError(K::Malformed, "expected 2 channels, found " + std::to_string(channels));
  const std::size_t record = kRecordHeader + 8ull * n_x;
  if (r.remaining() != record * count)
    throw FormatError(K::TruncatedPayload, "truncated payload: header declares " + std::to_string(count) +
                                               " samples but payload holds " + std::to_string(r.remaining()) +
                                               " bytes");
  Dataset ds;
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    s.label = r.get<std::uint16_t>();
    s.snr_db = r.get<std::int16_t>();
    const auto split = r.get<std::uint8_t>();
    if (split > 2) throw FormatError(K::Malformed, "invalid split tag " + std::to_string(split));
    s.split = static_cast<Split>(split);
    r.get_bytes(3);
    s.iq.resize(n_x);
    r.get_array(reinterpret_cast<float*>(s.iq.data()), 2ull * n_x);
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  write_file_bytes(path, encode_dataset(ds));

  KeyValues side;
  side.set("format", "RMLB");
  side.set("version", static_cast<std::int64_t>(kDatasetVersion));
  side.set("sample_count", ds.samples.size());
  side.set("n_x", ds.n_x());
  side.set("samples_per_symbol", ds.samples_per_symbol);
  std::string names;
  for (const auto& n : ds.label_names) names += (names.empty() ? "" : ",") + n;
  side.set("label_names", names);
  side.merge(ds.meta);
  side.write_file(dataset_sidecar_path(path));
}

Dataset read_dataset(const std::string& path) {
  Dataset ds = decode_dataset(read_file_bytes(path));

  const auto side_path = dataset_sidecar_path(path);
  if (std::filesystem::exists(side_path)) {
    auto side = KeyValues::read_file(side_path);
    if (auto names = side.get("label_names")) ds.label_names = split_list(*names);
    ds.samples_per_symbol = static_cast<std::size_t>(side.get_int("samples_per_symbol", 8));
    for (const auto& [k, v] : side.items())
      if (k != "format" && k != "version" && k != "sample_count" && k != "n_x" && k != "samples_per_symbol" &&
          k != "label_names")
        ds.meta.set(k, v);
  }
  for (const auto& s : ds.samples)
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= ds.label_names.size())
      throw FormatError(FormatError::Kind::Malformed, "label " + std::to_string(s.label) + " outside vocabulary");
  return ds;
}

}  // namespace modviz::signal
