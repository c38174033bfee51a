#include "modviz/explain/record.hpp"

#include <fstream>
#include <sstream>

#include "modviz/common/errors.hpp"

namespace modviz::explain {

namespace {
constexpr std::string_view kFormat = "modviz-explanation";
constexpr std::string_view kExtra = "extra.";

template <typename Seq>
std::string join(const Seq& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += format_double(static_cast<double>(values[i]));
  }
  return s;
}

std::vector<double> doubles(const KeyValues& kv, std::string_view key) {
  std::vector<double> out;
  for (const auto& item : split_list(kv.require(key))) out.push_back(parse_double(item));
  return out;
}
}  // namespace

std::string ExplanationRecord::to_string() const {
  KeyValues kv;
  kv.set("format", std::string(kFormat));
  kv.set("version", 1);
  kv.set("sample_id", sample_id);
  kv.set("label", label);
  kv.set("snr_db", snr_db);
  kv.set("method", cav.method);
  kv.set("j_star", cav.target_class);
  kv.set("n_x", cav.w.size());
  kv.set("pre_resize_length", cav.pre_resize_length);
  for (const auto& [k, v] : extra.items()) kv.set(std::string(kExtra) + k, v);
  kv.set("w", join(cav.w));
  std::vector<float> i(iq.size()), q(iq.size());
  for (std::size_t k = 0; k < iq.size(); ++k) {
    i[k] = iq[k].real();
    q[k] = iq[k].imag();
  }
  kv.set("i", join(i));
  kv.set("q", join(q));
  return kv.to_string();
}

ExplanationRecord ExplanationRecord::parse(std::string_view text) {
  const auto kv = KeyValues::parse(text);
  if (kv.get_or("format", "") != kFormat)
    throw FormatError(FormatError::Kind::BadMagic, "not an explanation record");
  ExplanationRecord r;
  r.sample_id = kv.get_int("sample_id", 0);
  r.label = static_cast<int>(kv.get_int("label", 0));
  r.snr_db = static_cast<int>(kv.get_int("snr_db", 0));
  r.cav.method = kv.require("method");
  r.cav.target_class = static_cast<int>(kv.get_int("j_star", 0));
  r.cav.pre_resize_length = static_cast<std::size_t>(kv.get_int("pre_resize_length", 0));
  r.cav.w = doubles(kv, "w");
  const auto i = doubles(kv, "i"), q = doubles(kv, "q");
  const auto n = static_cast<std::size_t>(kv.get_int("n_x", -1));
  if (n != r.cav.w.size() || i.size() != n || q.size() != n)
    throw FormatError(FormatError::Kind::Malformed, "explanation record lengths disagree with n_x");
  for (std::size_t k = 0; k < n; ++k) r.iq.emplace_back(static_cast<float>(i[k]), static_cast<float>(q[k]));
  for (const auto& [k, v] : kv.items())
    if (k.starts_with(kExtra)) r.extra.set(k.substr(kExtra.size()), v);
  return r;
}

void ExplanationRecord::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << to_string();
  if (!out) throw IoError("write failed: " + path);
}

ExplanationRecord ExplanationRecord::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace modviz::explain
