#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modviz/explain/record.hpp"
#include "modviz/train/metrics.hpp"

namespace modviz::viz {

enum class AxisMode { Cartesian, Polar };  // (I, Q) plane or (phase, amplitude) plane

struct RenderSpec {
  double eta_w = 0.4;
  double point_radius = 3.0;
  int width = 420;
  int height = 420;
  AxisMode axis = AxisMode::Cartesian;
  std::string title;

  void validate() const;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
  std::string hex() const;
};

/// Yellow (w = 0) to red (w = 1), linear in RGB, green channel rounded half up.
Rgb ramp_color(double w);

struct ColoredPoint {
  double x = 0.0, y = 0.0;  // plot coordinates in the chosen axis mode
  Rgb color;
};

std::vector<ColoredPoint> color_points(std::span<const std::complex<float>> iq, std::span<const double> w,
                                       AxisMode axis = AxisMode::Cartesian);

/// (i, i+1) for every i with w_i > eta and w_{i+1} > eta.
std::vector<std::pair<std::size_t, std::size_t>> connect_segments(std::span<const double> w, double eta);

/// Constellation with ramp-coloured points and green segments.
std::string constellation_svg(std::span<const std::complex<float>> iq, std::span<const double> w,
                              const RenderSpec& spec);
std::string constellation_svg(const explain::ExplanationRecord& rec, const RenderSpec& spec);
void render_constellation(const explain::ExplanationRecord& rec, const RenderSpec& spec, const std::string& path);

/// I and Q against sample index, points coloured by w.
std::string trace_svg(const explain::ExplanationRecord& rec, const RenderSpec& spec);

/// Heat-shaded grid with 2-decimal cell labels. `diverging` shades by sign
/// around 0 (relative matrices); otherwise 0..1 single-hue shading.
std::string confusion_svg(const train::RealMatrix& m, const std::vector<std::string>& labels, bool diverging,
                          const std::string& title = "");
void render_confusion(const train::RealMatrix& m, const std::vector<std::string>& labels, bool diverging,
                      const std::string& path, const std::string& title = "");

struct SweepPanel {
  std::string value_label;  // e.g. "0.4"
  explain::ExplanationRecord record;
  RenderSpec spec;
};

/// One constellation per parameter value, side by side and labelled. All
/// panels must explain the same sample.
std::string sweep_svg(const std::vector<SweepPanel>& panels, const std::string& parameter);
void render_sweep_panel(const std::vector<SweepPanel>& panels, const std::string& parameter, const std::string& path);

void write_text(const std::string& path, const std::string& text);

}  // namespace modviz::viz
