#include "modviz/cli/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "modviz/common/parallel.hpp"
#include "modviz/explain/gradcam.hpp"
#include "modviz/explain/mask.hpp"
#include "modviz/explain/record.hpp"
#include "modviz/models/checkpoint.hpp"
#include "modviz/signal/dataset_io.hpp"
#include "modviz/train/reports.hpp"
#include "modviz/viz/render.hpp"

namespace modviz::cli {

namespace {

using signal::Dataset;

std::string need(const KeyValues& cfg, const std::string& key, const std::string& flag) {
  auto v = cfg.get(key);
  if (!v || v->empty()) throw UsageError("missing required setting '" + key + "' (" + flag + ")");
  return *v;
}

void write_manifest(const std::string& command, const KeyValues& cfg, const std::string& primary) {
  KeyValues m;
  m.set("command", command);
  for (const auto& [k, v] : cfg.items())
    if (k != "command") m.set(k, v);
  m.write_file(run_manifest_path(primary));
}

void summary(std::ostream& out, const KeyValues& kv) { out << kv.to_string(); }

std::uint64_t run_seed(const KeyValues& cfg) { return cfg.get_uint("seed", 0); }

// ---------------------------------------------------------------- generate

void cmd_generate(const KeyValues& cfg, std::ostream& out, std::ostream&) {
  const auto path = need(cfg, "out", "--out");
  const auto gen = signal::GenerationConfig::from_kv(cfg);
  const auto ds = signal::generate_dataset(gen, run_seed(cfg));
  signal::write_dataset(ds, path);
  write_manifest("generate", cfg, path);
  KeyValues s;
  s.set("path", path);
  s.set("samples", ds.samples.size());
  s.set("n_x", ds.n_x());
  s.set("train", ds.count(signal::Split::Train));
  s.set("val", ds.count(signal::Split::Val));
  s.set("test", ds.count(signal::Split::Test));
  summary(out, s);
}

// ------------------------------------------------------------------- train

models::ModelSpec spec_from(const KeyValues& cfg, const Dataset& ds) {
  const auto arch = models::parse_arch(need(cfg, "model.arch", "--model"));
  KeyValues kv = cfg;
  kv.set("arch", models::arch_id(arch));
  kv.set("n_x", ds.n_x());
  kv.set("n_y", ds.label_names.size());
  kv.set("input_format", cfg.get_or("model.format", arch == models::Arch::Lstm ? "ap" : "iq"));
  return models::ModelSpec::from_kv(kv);
}

void cmd_train(const KeyValues& cfg, std::ostream& out, std::ostream& err) {
  const auto data = need(cfg, "data", "--data");
  const auto path = need(cfg, "out", "--out");
  const auto ds = signal::read_dataset(data);
  const auto spec = spec_from(cfg, ds);
  train::TrainConfig defaults;
  defaults.seed = run_seed(cfg);
  const auto tc = train::TrainConfig::from_kv(cfg, defaults);

  auto result = train::train(spec, ds, tc, [&err](const train::EpochRecord& e) {
    err << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " val_acc "
        << format_double(e.val_accuracy) << "\n";
  });
  auto& snap = result.snapshot;
  const auto& h = result.history;
  snap.info = tc.to_kv();
  snap.info.set("best_epoch", h.best_epoch);
  snap.info.set("best_val_accuracy", h.best_val_accuracy);
  models::write_checkpoint(snap, path);
  viz::write_text(path + ".history.txt", train::history_report(snap.spec, tc, h));
  write_manifest("train", cfg, path);

  KeyValues s;
  s.set("path", path);
  s.set("arch", models::arch_id(spec.arch));
  s.set("input_format", models::format_id(spec.input_format));
  s.set("epochs_run", h.epochs.size());
  s.set("best_epoch", h.best_epoch);
  s.set("best_val_accuracy", h.best_val_accuracy);
  if (ds.count(signal::Split::Test)) {
    auto model = models::instantiate<float>(snap);
    s.set("test_accuracy", train::evaluate(ds, signal::Split::Test, train::model_predictor(*model),
                                           spec.n_y).accuracy);
  }
  summary(out, s);
}

// -------------------------------------------------------------------- eval

void cmd_eval(const KeyValues& cfg, std::ostream& out, std::ostream&) {
  const auto snap = models::read_checkpoint(need(cfg, "model_file", "--model-file"));
  const auto ds = signal::read_dataset(need(cfg, "data", "--data"));
  const auto split = signal::parse_split(cfg.get_or("split", "test"));
  auto model = models::instantiate<float>(snap);
  const auto r = train::evaluate(ds, split, train::model_predictor(*model), snap.spec.n_y);

  train::ConfusionMatrix cm = r.confusion;
  std::vector<std::string> labels = ds.label_names;
  const auto which = cfg.get_or("eval.labels", "present");
  if (which == "present") {
    const auto active = cm.active_labels();
    cm = cm.restrict(active);
    labels.clear();
    for (auto i : active) labels.push_back(ds.label_names[i]);
  } else if (which != "all") {
    throw UsageError("eval.labels must be 'present' or 'all'");
  }

  KeyValues s;
  s.set("split", signal::split_name(split));
  s.set("samples", r.count);
  s.set("accuracy", r.accuracy);
  for (const auto& [snr, cell] : r.per_snr) s.set("accuracy.snr" + std::to_string(snr), cell.accuracy());
  if (auto report = cfg.get("report")) {
    viz::write_text(*report, s.to_string());
    viz::write_text(*report + ".confusion.csv", train::confusion_csv(cm, labels));
    viz::write_text(*report + ".confusion_normalized.csv", train::matrix_csv(cm.row_normalized(), labels));
    viz::write_text(*report + ".confusion.txt", train::confusion_text(cm, labels));
    viz::write_text(*report + ".per_snr.csv", train::per_snr_csv(r));
    write_manifest("eval", cfg, *report);
  }
  summary(out, s);
}

// ----------------------------------------------------------------- explain

struct Loaded {
  models::ModelSnapshot snap;
  Dataset ds;
  std::size_t index = 0;
};

Loaded load_for_explain(const KeyValues& cfg) {
  Loaded l;
  l.snap = models::read_checkpoint(need(cfg, "model_file", "--model-file"));
  l.ds = signal::read_dataset(need(cfg, "data", "--data"));
  const auto idx = cfg.get_int("index", -1);
  if (!cfg.contains("index")) throw UsageError("missing required setting 'index' (--index)");
  if (idx < 0 || static_cast<std::size_t>(idx) >= l.ds.samples.size())
    throw UsageError("--index " + std::to_string(idx) + " is outside 0.." + std::to_string(l.ds.samples.size() - 1));
  l.index = static_cast<std::size_t>(idx);
  if (l.ds.n_x() != l.snap.spec.n_x)
    throw UsageError("dataset has " + std::to_string(l.ds.n_x()) + "-point samples, model expects " +
                     std::to_string(l.snap.spec.n_x));
  return l;
}

std::string default_method(const models::ModelSpec& spec) {
  return spec.arch == models::Arch::Lstm ? "mask" : "gradcam";
}

void check_method(const std::string& method, const models::ModelSpec& spec, bool experimental) {
  if (method == "gradcam") {
    if (!spec.has_tap()) throw MismatchError("gradcam needs a CNN checkpoint; lstm-v1 has no tap point");
  } else if (method == "mask") {
    if (spec.arch != models::Arch::Lstm && !experimental)
      throw MismatchError("mask optimization is only supported for lstm-v1 checkpoints (use --allow-experimental)");
  } else {
    throw UsageError("unknown method '" + method + "' (gradcam|mask)");
  }
}

// Mask settings with "mean" deletion value resolved from the training split.
explain::MaskConfig mask_config(KeyValues cfg, const Loaded& l) {
  if (cfg.get_or("mask.xi", "") == "mean")
    cfg.set("mask.xi", explain::input_channel_mean(l.ds, signal::Split::Train, l.snap.spec.input_format));
  return explain::MaskConfig::from_kv(cfg, explain::MaskConfig{});
}

explain::ExplanationRecord make_record(const Loaded& l, const explain::ClassActivationVector& cav) {
  const auto& sample = l.ds.samples[l.index];
  explain::ExplanationRecord rec;
  rec.sample_id = static_cast<std::int64_t>(l.index);
  rec.label = sample.label;
  rec.snr_db = sample.snr_db;
  rec.iq = sample.iq;
  rec.cav = cav;
  rec.extra.set("arch", models::arch_id(l.snap.spec.arch));
  rec.extra.set("input_format", models::format_id(l.snap.spec.input_format));
  return rec;
}

struct Explained {
  explain::ExplanationRecord record;
  explain::MaskTrace trace;
  bool has_trace = false;
};

Explained explain_one(const std::string& method, const Loaded& l, const explain::MaskConfig* mask) {
  Explained e;
  const auto& sample = l.ds.samples[l.index];
  if (method == "gradcam") {
    auto model = models::instantiate<double>(l.snap);
    e.record = make_record(l, explain::explain_gradcam(*model, sample).cav);
  } else {
    auto model = models::instantiate<float>(l.snap);
    auto r = explain::optimize_mask(*model, models::make_input<float>(sample, l.snap.spec.input_format), *mask)
                 .front();
    e.record = make_record(l, r.cav);
    e.record.extra.merge(mask->to_kv());
    const auto& best = r.trace.entries[r.trace.best];
    e.record.extra.set("mask.best_iteration", r.trace.best);
    e.record.extra.set("mask.unmasked_prob", r.unmasked_prob);
    e.record.extra.set("mask.masked_prob", best.terms.prob);
    e.trace = std::move(r.trace);
    e.has_trace = true;
  }
  return e;
}

void cmd_explain(const KeyValues& cfg, std::ostream& out, std::ostream&) {
  const auto path = need(cfg, "out", "--out");
  const auto l = load_for_explain(cfg);
  const auto method = cfg.get_or("method", default_method(l.snap.spec));
  check_method(method, l.snap.spec, cfg.get_bool("allow_experimental", false));
  explain::MaskConfig mask;
  if (method == "mask") mask = mask_config(cfg, l);
  const auto e = explain_one(method, l, &mask);
  e.record.write_file(path);
  if (e.has_trace) viz::write_text(path + ".trace.csv", e.trace.to_csv());
  write_manifest("explain", cfg, path);

  KeyValues s;
  s.set("path", path);
  s.set("method", method);
  s.set("sample_id", e.record.sample_id);
  s.set("label", e.record.label);
  s.set("j_star", e.record.cav.target_class);
  s.set("n_x", e.record.n_x());
  s.set("pre_resize_length", e.record.cav.pre_resize_length);
  summary(out, s);
}

// ------------------------------------------------------------------ render

viz::RenderSpec render_spec(const KeyValues& cfg) {
  viz::RenderSpec spec;
  spec.eta_w = cfg.get_double("threshold", spec.eta_w);
  const auto axis = cfg.get_or("render.axis", "iq");
  if (axis == "ap")
    spec.axis = viz::AxisMode::Polar;
  else if (axis != "iq")
    throw UsageError("render.axis must be 'iq' or 'ap'");
  spec.width = static_cast<int>(cfg.get_int("render.width", spec.width));
  spec.height = static_cast<int>(cfg.get_int("render.height", spec.height));
  spec.point_radius = cfg.get_double("render.radius", spec.point_radius);
  spec.title = cfg.get_or("render.title", "");
  spec.validate();
  return spec;
}

train::LabeledMatrix read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto m = train::parse_matrix_csv(ss.str());
  // Count matrices are normalized here; normalized ones pass unchanged.
  for (std::size_t r = 0; r < m.values.n; ++r) {
    const double s = m.values.row_sum(r);
    if (s > 1.0 + 1e-9)
      for (std::size_t c = 0; c < m.values.n; ++c) m.values.at(r, c) /= s;
  }
  return m;
}

void cmd_render(const KeyValues& cfg, std::ostream& out, std::ostream&) {
  const auto path = need(cfg, "out", "--out");
  KeyValues s;
  s.set("path", path);
  if (auto rec_path = cfg.get("record")) {
    const auto rec = explain::ExplanationRecord::read_file(*rec_path);
    const auto spec = render_spec(cfg);
    const auto kind = cfg.get_or("render.kind", "constellation");
    if (kind == "constellation")
      viz::write_text(path, viz::constellation_svg(rec, spec));
    else if (kind == "trace")
      viz::write_text(path, viz::trace_svg(rec, spec));
    else
      throw UsageError("render.kind must be 'constellation' or 'trace'");
    s.set("points", rec.iq.size());
    s.set("segments", viz::connect_segments(rec.cav.w, spec.eta_w).size());
  } else if (auto cm_path = cfg.get("confusion")) {
    auto a = read_matrix(*cm_path);
    bool diverging = false;
    if (auto other = cfg.get("relative_to")) {
      const auto b = read_matrix(*other);
      if (a.labels != b.labels) throw UsageError("relative confusion needs matching label sets");
      a.values = train::relative_confusion(a.values, b.values);
      diverging = true;
    }
    viz::render_confusion(a.values, a.labels, diverging, path, cfg.get_or("render.title", ""));
    s.set("classes", a.labels.size());
  } else {
    throw UsageError("render needs --record or --confusion");
  }
  write_manifest("render", cfg, path);
  summary(out, s);
}

// ------------------------------------------------------------------- sweep

void cmd_sweep(const KeyValues& cfg, std::ostream& out, std::ostream&) {
  const auto path = need(cfg, "out", "--out");
  const auto param = need(cfg, "param", "--param");
  const auto values = split_list(need(cfg, "values", "--values"));
  if (values.empty()) throw UsageError("--values is empty");
  static const std::map<std::string, std::string> keys = {
      {"eta", "threshold"}, {"lambda1", "mask.lambda1"}, {"lambda2", "mask.lambda2"}, {"p", "mask.p"},
      {"xi", "mask.xi"}};
  const auto key = keys.find(param);
  if (key == keys.end()) throw UsageError("unknown sweep parameter '" + param + "' (eta|lambda1|lambda2|p|xi)");
  for (const auto& v : values) {
    if (param == "xi" && v == "mean") continue;
    try {
      if (!std::isfinite(parse_double(v))) throw InvalidArgument("non-finite");
    } catch (const Error&) {
      throw UsageError("bad value '" + v + "' in --values");
    }
  }

  const auto l = load_for_explain(cfg);
  const auto method = cfg.get_or("method", param == "eta" ? default_method(l.snap.spec) : std::string("mask"));
  if (param != "eta" && method != "mask") throw MismatchError("sweeping " + param + " needs the mask method");
  check_method(method, l.snap.spec, cfg.get_bool("allow_experimental", false));

  std::vector<viz::SweepPanel> panels;
  std::optional<Explained> shared;
  for (const auto& v : values) {
    KeyValues c = cfg;
    c.set(key->second, v);
    viz::SweepPanel panel;
    panel.value_label = v;
    panel.spec = render_spec(c);
    if (param == "eta") {
      if (!shared) {
        explain::MaskConfig mask;
        if (method == "mask") mask = mask_config(cfg, l);
        shared = explain_one(method, l, &mask);
      }
      panel.record = shared->record;
    } else {
      const auto mask = mask_config(c, l);
      if (param == "xi" && v == "mean") panel.value_label = "mean (" + format_double(mask.xi) + ")";
      panel.record = explain_one(method, l, &mask).record;
    }
    panels.push_back(std::move(panel));
  }
  viz::render_sweep_panel(panels, param, path);
  write_manifest("sweep", cfg, path);

  KeyValues s;
  s.set("path", path);
  s.set("param", param);
  s.set("panels", panels.size());
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& w = panels[k].record.cav.w;
    double mean = 0.0;
    for (double x : w) mean += x;
    s.set("panel" + std::to_string(k) + ".mean_w", w.empty() ? 0.0 : mean / static_cast<double>(w.size()));
    s.set("panel" + std::to_string(k) + ".segments", viz::connect_segments(w, panels[k].spec.eta_w).size());
  }
  summary(out, s);
}

// ----------------------------------------------------------------- split64

void cmd_split64(const KeyValues& cfg, std::ostream& out, std::ostream&) {
  const auto path = need(cfg, "out", "--out");
  const auto ds = signal::read_dataset(need(cfg, "data", "--data"));
  const auto factor = cfg.get_int("factor", 2);
  if (factor <= 0) throw UsageError("factor must be positive");
  const auto split = signal::split_samples(ds, static_cast<std::size_t>(factor));
  signal::write_dataset(split, path);
  write_manifest("split64", cfg, path);
  KeyValues s;
  s.set("path", path);
  s.set("samples", split.samples.size());
  s.set("n_x", split.n_x());
  summary(out, s);
}

using Handler = std::function<void(const KeyValues&, std::ostream&, std::ostream&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"generate", cmd_generate}, {"train", cmd_train}, {"eval", cmd_eval},       {"explain", cmd_explain},
      {"render", cmd_render},     {"sweep", cmd_sweep}, {"split64", cmd_split64},
  };
  return h;
}

// ----------------------------------------------------------- command line

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

const std::map<std::string, std::vector<Flag>>& command_flags() {
  static const std::map<std::string, std::vector<Flag>> f = {
      {"generate",
       {{"--out", "out", "output dataset path"},
        {"--schemes", "generate.schemes", "comma-separated scheme names or 'all'"},
        {"--count", "generate.count", "samples per (scheme, snr) cell"},
        {"--snr-min", "generate.snr_min", "lowest SNR in dB"},
        {"--snr-max", "generate.snr_max", "highest SNR in dB"},
        {"--snr-step", "generate.snr_step", "SNR grid step in dB"},
        {"--n-x", "generate.n_x", "points per sample"}}},
      {"train",
       {{"--model", "model.arch", "lenet | resnet | lstm"},
        {"--format", "model.format", "iq | ap"},
        {"--data", "data", "dataset path"},
        {"--out", "out", "checkpoint path"},
        {"--epochs", "train.epochs", "epoch budget"},
        {"--batch", "train.batch_size", "batch size"},
        {"--lr", "train.lr", "Adam learning rate"},
        {"--patience", "train.patience", "early-stop patience (0 = off)"},
        {"--clip-norm", "train.clip_norm", "global gradient-norm cap (0 = off)"}}},
      {"eval",
       {{"--model-file", "model_file", "checkpoint path"},
        {"--data", "data", "dataset path"},
        {"--split", "split", "train | val | test"},
        {"--report", "report", "report path (confusion CSVs are written next to it)"}}},
      {"explain",
       {{"--method", "method", "gradcam | mask"},
        {"--model-file", "model_file", "checkpoint path"},
        {"--data", "data", "dataset path"},
        {"--index", "index", "sample index in the dataset"},
        {"--out", "out", "explanation record path"},
        {"--xi", "mask.xi", "deletion value or 'mean'"},
        {"--lambda1", "mask.lambda1", "L1 weight"},
        {"--lambda2", "mask.lambda2", "TV weight"},
        {"--p", "mask.p", "TV norm order"},
        {"--iterations", "mask.iterations", "optimizer iterations"}}},
      {"render",
       {{"--record", "record", "explanation record to draw"},
        {"--confusion", "confusion", "confusion CSV to draw"},
        {"--relative-to", "relative_to", "second confusion CSV; draws the difference"},
        {"--threshold", "threshold", "activation threshold eta_w"},
        {"--axis", "render.axis", "iq | ap"},
        {"--kind", "render.kind", "constellation | trace"},
        {"--out", "out", "SVG path"}}},
      {"sweep",
       {{"--param", "param", "eta | lambda1 | lambda2 | p | xi"},
        {"--values", "values", "comma-separated values ('mean' allowed for xi)"},
        {"--method", "method", "gradcam | mask"},
        {"--model-file", "model_file", "checkpoint path"},
        {"--data", "data", "dataset path"},
        {"--index", "index", "sample index in the dataset"},
        {"--threshold", "threshold", "activation threshold for every panel"},
        {"--out", "out", "SVG path"}}},
      {"split64",
       {{"--data", "data", "dataset path"},
        {"--out", "out", "output dataset path"},
        {"--factor", "factor", "pieces per sample"}}},
  };
  return f;
}

const std::map<std::string, std::string>& command_help() {
  static const std::map<std::string, std::string> h = {
      {"generate", "synthesize a labelled dataset"},
      {"train", "train a classifier and write a checkpoint"},
      {"eval", "accuracy, confusion matrix and per-SNR table"},
      {"explain", "class activation vector for one sample"},
      {"render", "SVG of an explanation record or a confusion matrix"},
      {"sweep", "one explanation panel per parameter value"},
      {"split64", "cut every sample into halves"},
      {"replay", "re-run a command from its run manifest"},
  };
  return h;
}

KeyValues parse_overrides(const std::vector<std::string>& sets) {
  KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return kv;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"generate", "train", "eval", "explain", "render", "sweep", "split64"};
  return names;
}

std::string run_manifest_path(const std::string& primary_output) { return primary_output + ".run.txt"; }

void run_command(const std::string& command, const KeyValues& cfg, std::ostream& out, std::ostream& err) {
  const auto it = handlers().find(command);
  if (it == handlers().end()) throw UsageError("unknown command '" + command + "'");
  const bool strict = cfg.get_bool("strict_deterministic", false);
  const bool previous = strict_deterministic();
  set_strict_deterministic(strict || previous);
  try {
    it->second(cfg, out, err);
  } catch (...) {
    set_strict_deterministic(previous);
    throw;
  }
  set_strict_deterministic(previous);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MismatchError*>(&e) || dynamic_cast<const NoTapPoint*>(&e)) return kExitMismatch;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kExitIo;
  return kExitUsage;
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"modviz: radio modulation classifiers and their class activation vectors"};
  app.require_subcommand(1);
  app.fallthrough();

  std::map<std::string, std::string> flags;
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key: value config file (a run manifest works)");
  app.add_option("--set", sets, "override a config key: key=value (repeatable)");
  app.add_option_function<std::string>(
      "--seed", [&](const std::string& v) { flags["seed"] = v; }, "run seed");
  app.add_flag_function(
      "--strict-deterministic", [&](std::int64_t) { flags["strict_deterministic"] = "true"; },
      "single-threaded execution");

  std::map<std::string, CLI::App*> subs;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name, command_help().at(name));
    for (const auto& f : command_flags().at(name)) {
      const std::string key = f.key;
      sub->add_option_function<std::string>(
          f.name, [&flags, key](const std::string& v) { flags[key] = v; }, f.help);
    }
    if (name == "explain" || name == "sweep")
      sub->add_flag_function(
          "--allow-experimental", [&flags](std::int64_t) { flags["allow_experimental"] = "true"; },
          "permit mask optimization on CNN checkpoints");
    subs[name] = sub;
  }
  std::string replay_path;
  auto* replay = app.add_subcommand("replay", command_help().at("replay"));
  replay->add_option("manifest", replay_path, "run manifest (<output>.run.txt)")->required();
  subs["replay"] = replay;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) {
      err << sub->help();
      return kExitUsage;
    }
    err << app.help();
    return kExitUsage;
  }

  auto* chosen = app.get_subcommands().front();
  std::string command = chosen->get_name();
  try {
    KeyValues cfg;
    if (command == "replay") {
      cfg = KeyValues::read_file(replay_path);
      command = need(cfg, "command", "manifest");
    } else if (!config_path.empty()) {
      cfg = KeyValues::read_file(config_path);
    }
    for (const auto& [k, v] : flags) cfg.set(k, v);
    cfg.merge(parse_overrides(sets));
    cfg.set("command", command);
    run_command(command, cfg, out, err);
    return kExitOk;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "error: " << e.what() << "\n";
    if (code == kExitUsage && dynamic_cast<const UsageError*>(&e)) err << chosen->help();
    return code;
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"modviz"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace modviz::cli
