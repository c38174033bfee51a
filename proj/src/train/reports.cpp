#include "modviz/train/reports.hpp"

#include <sstream>

#include "modviz/common/errors.hpp"
#include "modviz/common/kv_text.hpp"

namespace modviz::train {

std::string history_report(const models::ModelSpec& spec, const TrainConfig& cfg, const TrainHistory& h) {
  KeyValues kv = spec.to_kv();
  kv.merge(cfg.to_kv());
  kv.set("init_loss", h.init_loss);
  kv.set("init_val_accuracy", h.init_val_accuracy);
  kv.set("epochs_run", h.epochs.size());
  kv.set("best_epoch", h.best_epoch);
  kv.set("best_val_accuracy", h.best_val_accuracy);
  kv.set("stopped_early", h.stopped_early ? "true" : "false");
  std::string out = kv.to_string();
  out += "epoch,train_loss,val_accuracy\n";
  for (const auto& e : h.epochs)
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," + format_double(e.val_accuracy) + "\n";
  return out;
}

namespace {
void check_labels(std::size_t n, const std::vector<std::string>& labels) {
  if (labels.size() != n)
    throw InvalidArgument("matrix has " + std::to_string(n) + " classes but " + std::to_string(labels.size()) +
                          " labels were given");
}

std::string header(const std::vector<std::string>& labels) {
  std::string s = "true\\pred";
  for (const auto& l : labels) s += "," + l;
  return s + "\n";
}
}  // namespace

std::string confusion_csv(const ConfusionMatrix& m, const std::vector<std::string>& labels) {
  check_labels(m.size(), labels);
  std::string out = header(labels);
  for (std::size_t r = 0; r < m.size(); ++r) {
    out += labels[r];
    for (std::size_t c = 0; c < m.size(); ++c) out += "," + std::to_string(m.count(r, c));
    out += "\n";
  }
  return out;
}

std::string matrix_csv(const RealMatrix& m, const std::vector<std::string>& labels) {
  check_labels(m.n, labels);
  std::string out = header(labels);
  for (std::size_t r = 0; r < m.n; ++r) {
    out += labels[r];
    for (std::size_t c = 0; c < m.n; ++c) out += "," + format_double(m.at(r, c));
    out += "\n";
  }
  return out;
}

LabeledMatrix parse_matrix_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  LabeledMatrix out;
  if (!std::getline(in, line)) throw FormatError(FormatError::Kind::Malformed, "empty matrix csv");
  auto head = split_list(line);
  if (head.empty()) throw FormatError(FormatError::Kind::Malformed, "matrix csv has no header");
  out.labels.assign(head.begin() + 1, head.end());
  const std::size_t n = out.labels.size();
  out.values = RealMatrix(n);
  std::size_t r = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_list(line);
    if (r >= n || cells.size() != n + 1)
      throw FormatError(FormatError::Kind::Malformed, "matrix csv row " + std::to_string(r + 1) + " is malformed");
    for (std::size_t c = 0; c < n; ++c) out.values.at(r, c) = parse_double(cells[c + 1]);
    ++r;
  }
  if (r != n) throw FormatError(FormatError::Kind::Malformed, "matrix csv is not square");
  return out;
}

std::string confusion_text(const ConfusionMatrix& m, const std::vector<std::string>& labels) {
  check_labels(m.size(), labels);
  const auto norm = m.row_normalized();
  const auto empty = m.empty_rows();
  KeyValues kv;
  kv.set("classes", m.size());
  std::string names;
  for (const auto& l : labels) names += (names.empty() ? "" : ",") + l;
  kv.set("labels", names);
  kv.set("total", m.total());
  kv.set("accuracy", m.accuracy());
  for (std::size_t r = 0; r < m.size(); ++r) {
    std::string counts, fractions;
    for (std::size_t c = 0; c < m.size(); ++c) {
      counts += (c ? "," : "") + std::to_string(m.count(r, c));
      fractions += (c ? "," : "") + format_double(norm.at(r, c));
    }
    kv.set("counts." + labels[r], counts);
    kv.set("normalized." + labels[r], fractions);
    if (empty[r]) kv.set("empty." + labels[r], "true");
  }
  return kv.to_string();
}

std::string per_snr_csv(const EvalResult& r) {
  std::string out = "snr_db,correct,total,accuracy\n";
  for (const auto& [snr, cell] : r.per_snr)
    out += std::to_string(snr) + "," + std::to_string(cell.correct) + "," + std::to_string(cell.total) + "," +
           format_double(cell.accuracy()) + "\n";
  return out;
}

}  // namespace modviz::train
