#pragma once

#include <string>
#include <vector>

#include "modviz/models/models.hpp"
#include "modviz/train/metrics.hpp"
#include "modviz/train/trainer.hpp"

namespace modviz::train {

/// key: value header followed by "epoch,train_loss,val_accuracy" lines.
std::string history_report(const models::ModelSpec& spec, const TrainConfig& cfg, const TrainHistory& h);

/// CSV with a header row of label names; rows are true labels.
std::string confusion_csv(const ConfusionMatrix& m, const std::vector<std::string>& labels);
std::string matrix_csv(const RealMatrix& m, const std::vector<std::string>& labels);

/// Parsed form of matrix_csv output.
struct LabeledMatrix {
  std::vector<std::string> labels;
  RealMatrix values;
};
LabeledMatrix parse_matrix_csv(const std::string& text);

/// Structured text: labels, counts and row-normalized rows, empty rows flagged.
std::string confusion_text(const ConfusionMatrix& m, const std::vector<std::string>& labels);

/// "snr_db,correct,total,accuracy" lines.
std::string per_snr_csv(const EvalResult& r);

}  // namespace modviz::train
