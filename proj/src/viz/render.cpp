#include "modviz/viz/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "modviz/common/errors.hpp"
#include "modviz/signal/modulation.hpp"

namespace modviz::viz {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

std::string num(double v) { return fmt("%.3f", v == 0.0 ? 0.0 : v); }

std::string label2(double v) {
  std::string s = fmt("%.2f", v);
  return s == "-0.00" ? "0.00" : s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string svg_open(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\">\n";
}

const Rgb kGreen{0, 160, 0};

// Plot area mapping from data coordinates to canvas pixels.
struct Frame {
  double ox, oy, pw, ph;   // canvas origin and size of the plot area
  double x0, x1, y0, y1;   // data extents
  double cx(double x) const { return ox + (x - x0) / (x1 - x0) * pw; }
  double cy(double y) const { return oy + ph - (y - y0) / (y1 - y0) * ph; }
};

// Body of a constellation plot placed at (ox, oy) inside a larger canvas.
std::string constellation_body(std::span<const std::complex<float>> iq, std::span<const double> w,
                               const RenderSpec& spec, double ox, double oy, const std::string& caption) {
  const auto pts = color_points(iq, w, spec.axis);
  const auto segs = connect_segments(w, spec.eta_w);
  const double margin = 24.0;
  Frame f{ox + margin, oy + margin, spec.width - 2 * margin, spec.height - 2 * margin, 0, 0, 0, 0};

  double extent = 0.0;
  std::string scale_note;
  if (spec.axis == AxisMode::Cartesian) {
    for (const auto& s : iq) extent = std::max({extent, std::abs(double(s.real())), std::abs(double(s.imag()))});
    if (extent == 0.0) extent = 1.0;
    extent *= 1.1;
    f.x0 = f.y0 = -extent;
    f.x1 = f.y1 = extent;
    scale_note = "axis=iq extent=" + fmt("%.6g", extent);
  } else {
    for (const auto& p : pts) extent = std::max(extent, p.y);
    if (extent == 0.0) extent = 1.0;
    extent *= 1.1;
    f.x0 = -std::numbers::pi * 1.1;
    f.x1 = std::numbers::pi * 1.1;
    f.y0 = 0.0;
    f.y1 = extent;
    scale_note = "axis=ap phase_extent=" + fmt("%.6g", f.x1) + " amplitude_extent=" + fmt("%.6g", extent);
  }

  std::string s = "<!-- scale: " + scale_note + " eta_w=" + fmt("%.6g", spec.eta_w) + " points=" +
                  std::to_string(pts.size()) + " segments=" + std::to_string(segs.size()) + " -->\n";
  s += "<rect x=\"" + num(f.ox) + "\" y=\"" + num(f.oy) + "\" width=\"" + num(f.pw) + "\" height=\"" + num(f.ph) +
       "\" fill=\"white\" stroke=\"#888888\"/>\n";
  if (spec.axis == AxisMode::Cartesian) {
    // Axes are paths so that <line> elements are exactly the segments.
    s += "<path d=\"M" + num(f.cx(f.x0)) + " " + num(f.cy(0)) + " H" + num(f.cx(f.x1)) + " M" + num(f.cx(0)) + " " +
         num(f.cy(f.y0)) + " V" + num(f.cy(f.y1)) + "\" stroke=\"#cccccc\" fill=\"none\"/>\n";
  }
  s += "<g class=\"segments\" stroke=\"" + kGreen.hex() + "\" stroke-width=\"1.5\">\n";
  for (const auto& [a, b] : segs)
    s += "<line x1=\"" + num(f.cx(pts[a].x)) + "\" y1=\"" + num(f.cy(pts[a].y)) + "\" x2=\"" + num(f.cx(pts[b].x)) +
         "\" y2=\"" + num(f.cy(pts[b].y)) + "\"/>\n";
  s += "</g>\n<g class=\"points\">\n";
  for (const auto& p : pts)
    s += "<circle cx=\"" + num(f.cx(p.x)) + "\" cy=\"" + num(f.cy(p.y)) + "\" r=\"" + num(spec.point_radius) +
         "\" fill=\"" + p.color.hex() + "\"/>\n";
  s += "</g>\n";
  if (!caption.empty())
    s += "<text x=\"" + num(ox + spec.width / 2.0) + "\" y=\"" + num(oy + 16) +
         "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" + escape(caption) + "</text>\n";
  return s;
}

}  // namespace

void RenderSpec::validate() const {
  if (!(eta_w >= 0.0 && eta_w <= 1.0)) throw InvalidArgument("render: eta_w must lie in [0,1]");
  if (width < 64 || height < 64) throw InvalidArgument("render: canvas too small");
  if (!(point_radius > 0.0)) throw InvalidArgument("render: point radius must be positive");
}

std::string Rgb::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

Rgb ramp_color(double w) {
  const double c = std::clamp(w, 0.0, 1.0);
  return {255, static_cast<std::uint8_t>(std::floor(255.0 * (1.0 - c) + 0.5)), 0};
}

std::vector<ColoredPoint> color_points(std::span<const std::complex<float>> iq, std::span<const double> w,
                                       AxisMode axis) {
  if (iq.size() != w.size())
    throw ShapeError("color_points: " + std::to_string(iq.size()) + " points but " + std::to_string(w.size()) +
                     " weights");
  std::vector<ColoredPoint> out(iq.size());
  for (std::size_t i = 0; i < iq.size(); ++i) {
    if (axis == AxisMode::Cartesian) {
      out[i].x = iq[i].real();
      out[i].y = iq[i].imag();
    } else {
      const auto ap = signal::to_amplitude_phase(signal::Complex(iq[i].real(), iq[i].imag()));
      out[i].x = ap.phase;
      out[i].y = ap.amplitude;
    }
    out[i].color = ramp_color(w[i]);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> connect_segments(std::span<const double> w, double eta) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i + 1 < w.size(); ++i)
    if (w[i] > eta && w[i + 1] > eta) out.emplace_back(i, i + 1);
  return out;
}

std::string constellation_svg(std::span<const std::complex<float>> iq, std::span<const double> w,
                              const RenderSpec& spec) {
  spec.validate();
  std::string s = svg_open(spec.width, spec.height);
  s += constellation_body(iq, w, spec, 0, 0, spec.title);
  return s + "</svg>\n";
}

std::string constellation_svg(const explain::ExplanationRecord& rec, const RenderSpec& spec) {
  return constellation_svg(rec.iq, rec.cav.w, spec);
}

void render_constellation(const explain::ExplanationRecord& rec, const RenderSpec& spec, const std::string& path) {
  write_text(path, constellation_svg(rec, spec));
}

std::string trace_svg(const explain::ExplanationRecord& rec, const RenderSpec& spec) {
  spec.validate();
  const std::size_t n = rec.iq.size();
  if (n != rec.cav.w.size()) throw ShapeError("trace: record lengths disagree");
  const int width = std::max(spec.width, static_cast<int>(4 * n) + 48);
  double extent = 0.0;
  for (const auto& s : rec.iq) extent = std::max({extent, std::abs(double(s.real())), std::abs(double(s.imag()))});
  extent = (extent == 0.0 ? 1.0 : extent) * 1.1;
  std::string s = svg_open(width, spec.height);
  const double margin = 24.0, ph = (spec.height - 3 * margin) / 2.0, pw = width - 2 * margin;
  for (int ch = 0; ch < 2; ++ch) {
    Frame f{margin, margin + ch * (ph + margin), pw, ph, 0.0, std::max<double>(1.0, double(n - 1)), -extent, extent};
    s += "<rect x=\"" + num(f.ox) + "\" y=\"" + num(f.oy) + "\" width=\"" + num(f.pw) + "\" height=\"" + num(f.ph) +
         "\" fill=\"white\" stroke=\"#888888\"/>\n";
    s += std::string("<text x=\"4\" y=\"") + num(f.oy + 12) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
         (ch == 0 ? "I" : "Q") + "</text>\n<polyline fill=\"none\" stroke=\"#999999\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const double v = ch == 0 ? rec.iq[i].real() : rec.iq[i].imag();
      s += (i ? " " : "") + num(f.cx(double(i))) + "," + num(f.cy(v));
    }
    s += "\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
      const double v = ch == 0 ? rec.iq[i].real() : rec.iq[i].imag();
      s += "<circle cx=\"" + num(f.cx(double(i))) + "\" cy=\"" + num(f.cy(v)) + "\" r=\"" +
           num(spec.point_radius * 0.7) + "\" fill=\"" + ramp_color(rec.cav.w[i]).hex() + "\"/>\n";
    }
  }
  return s + "</svg>\n";
}

std::string confusion_svg(const train::RealMatrix& m, const std::vector<std::string>& labels, bool diverging,
                          const std::string& title) {
  if (labels.size() != m.n)
    throw InvalidArgument("confusion: " + std::to_string(m.n) + " classes but " + std::to_string(labels.size()) +
                          " labels");
  const double cell = 48.0, left = 80.0, top = title.empty() ? 24.0 : 44.0;
  const int width = static_cast<int>(left + cell * double(m.n) + 16), height = static_cast<int>(top + cell * double(m.n) + 72);
  double span = 1.0;
  if (diverging) {
    span = 0.0;
    for (double v : m.v) span = std::max(span, std::abs(v));
    if (span == 0.0) span = 1.0;
  }
  std::string s = svg_open(width, height);
  s += "<!-- shading: " + std::string(diverging ? "diverging" : "sequential") + " span=" + fmt("%.6g", span) + " -->\n";
  if (!title.empty())
    s += "<text x=\"" + num(width / 2.0) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" "
         "text-anchor=\"middle\">" + escape(title) + "</text>\n";
  for (std::size_t r = 0; r < m.n; ++r) {
    s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + cell * (double(r) + 0.5) + 4) +
         "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + escape(labels[r]) + "</text>\n";
    for (std::size_t c = 0; c < m.n; ++c) {
      const double v = m.at(r, c);
      Rgb fill;
      if (diverging) {
        const double t = std::clamp(std::abs(v) / span, 0.0, 1.0);
        const auto fade = static_cast<std::uint8_t>(std::floor(255.0 * (1.0 - t) + 0.5));
        fill = v >= 0 ? Rgb{255, fade, fade} : Rgb{fade, fade, 255};
      } else {
        const double t = std::clamp(v, 0.0, 1.0);
        fill = {static_cast<std::uint8_t>(std::floor(255.0 - 225.0 * t + 0.5)),
                static_cast<std::uint8_t>(std::floor(255.0 - 155.0 * t + 0.5)), 255};
      }
      const double x = left + cell * double(c), y = top + cell * double(r);
      const bool dark = !diverging && v > 0.6;
      s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
           "\" fill=\"" + fill.hex() + "\" stroke=\"#ffffff\"/>\n";
      s += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2 + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" fill=\"" +
           (dark ? "#ffffff" : "#000000") + "\">" + label2(v) + "</text>\n";
    }
  }
  for (std::size_t c = 0; c < m.n; ++c) {
    const double x = left + cell * (double(c) + 0.5), y = top + cell * double(m.n) + 10;
    s += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"11\" "
         "text-anchor=\"end\" transform=\"rotate(-45 " + num(x) + " " + num(y) + ")\">" + escape(labels[c]) +
         "</text>\n";
  }
  return s + "</svg>\n";
}

void render_confusion(const train::RealMatrix& m, const std::vector<std::string>& labels, bool diverging,
                      const std::string& path, const std::string& title) {
  write_text(path, confusion_svg(m, labels, diverging, title));
}

std::string sweep_svg(const std::vector<SweepPanel>& panels, const std::string& parameter) {
  if (panels.empty()) throw InvalidArgument("sweep: no panels");
  int width = 0, height = 0;
  for (const auto& p : panels) {
    if (p.record.sample_id != panels.front().record.sample_id)
      throw InvalidArgument("sweep: panels explain different samples");
    p.spec.validate();
    width += p.spec.width;
    height = std::max(height, p.spec.height);
  }
  std::string s = svg_open(width, height + 24);
  s += "<!-- sweep: parameter=" + escape(parameter) + " panels=" + std::to_string(panels.size()) +
       " sample_id=" + std::to_string(panels.front().record.sample_id) + " -->\n";
  double x = 0;
  for (const auto& p : panels) {
    s += "<g class=\"panel\">\n";
    s += constellation_body(p.record.iq, p.record.cav.w, p.spec, x, 24, "");
    s += "<text x=\"" + num(x + p.spec.width / 2.0) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" "
         "text-anchor=\"middle\">" + escape(parameter + " = " + p.value_label) + "</text>\n</g>\n";
    x += p.spec.width;
  }
  return s + "</svg>\n";
}

void render_sweep_panel(const std::vector<SweepPanel>& panels, const std::string& parameter, const std::string& path) {
  write_text(path, sweep_svg(panels, parameter));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace modviz::viz
