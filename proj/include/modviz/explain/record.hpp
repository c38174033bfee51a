#pragma once

#include <complex>
#include <string>
#include <vector>

#include "modviz/common/kv_text.hpp"
#include "modviz/explain/cav.hpp"

namespace modviz::explain {

/// Text container that carries one explanation plus the sample it explains,
/// so rendering needs nothing else.
struct ExplanationRecord {
  std::int64_t sample_id = 0;
  int label = 0;
  int snr_db = 0;
  ClassActivationVector cav;
  std::vector<std::complex<float>> iq;
  KeyValues extra;  // provenance and configuration echo

  std::size_t n_x() const { return cav.w.size(); }

  std::string to_string() const;
  static ExplanationRecord parse(std::string_view text);
  void write_file(const std::string& path) const;
  static ExplanationRecord read_file(const std::string& path);
};

}  // namespace modviz::explain
