#include "cclab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "binio.hpp"
#include "cclab/error.hpp"

namespace cclab {

std::string_view to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::scatter_true_vs_pred: return "scatter_true_vs_pred";
    case PlotKind::loss_curves: return "loss_curves";
    case PlotKind::error_vs_count: return "error_vs_count";
  }
  return "?";
}

PlotKind parse_plot_kind(std::string_view text) {
  if (text == "scatter_true_vs_pred" || text == "scatter") return PlotKind::scatter_true_vs_pred;
  if (text == "loss_curves" || text == "loss") return PlotKind::loss_curves;
  if (text == "error_vs_count" || text == "error") return PlotKind::error_vs_count;
  throw ConfigError("unknown plot kind '" + std::string(text) + "'");
}

namespace {

using nlohmann::json;

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 72, kRight = 20, kTop = 36, kBottom = 56;
const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(std::string_view s) {
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

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;

  double t(double v) const {
    if (log) v = std::log10(std::max(v, 1e-300));
    return (v - lo) / (hi - lo);
  }
};

// Pads a data interval and guards against empty or degenerate ranges.
Axis make_axis(double lo, double hi, bool log = false) {
  if (!(lo <= hi)) lo = 0, hi = 1;
  if (log) {
    lo = std::floor(std::log10(std::max(lo, 1e-12)));
    hi = std::ceil(std::log10(std::max(hi, 1e-12)));
    if (hi <= lo) hi = lo + 1;
    return {lo, hi, true};
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.04 * (hi - lo);
  return {lo - pad, hi + pad, false};
}

std::vector<double> ticks(const Axis& a) {
  std::vector<double> out;
  if (a.log) {
    for (double e = std::ceil(a.lo); e <= a.hi + 1e-9; e += 1) out.push_back(std::pow(10.0, e));
    return out;
  }
  const double raw = (a.hi - a.lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-9 * step; v += step)
    out.push_back(v);
  return out;
}

class Canvas {
 public:
  Canvas(Axis x, Axis y, std::string title, std::string xlabel, std::string ylabel)
      : x_(x), y_(y) {
    s_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kWidth) +
          "\" height=\"" + num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " +
          num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s_ += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
          "\" fill=\"white\"/>\n";
    s_ += "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
          escape(title) + "</text>\n";
    axes(xlabel, ylabel);
  }

  double px(double v) const { return kLeft + x_.t(v) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - y_.t(v) * (kHeight - kTop - kBottom); }
  bool inside(double xv, double yv) const {
    const double a = x_.t(xv), b = y_.t(yv);
    return a >= -1e-9 && a <= 1 + 1e-9 && b >= -1e-9 && b <= 1 + 1e-9;
  }

  void rect(double x0, double y0, double x1, double y1, const std::string& style) {
    const double a = px(x0), b = px(x1), c = py(y1), d = py(y0);
    s_ += "<rect x=\"" + num(std::min(a, b)) + "\" y=\"" + num(std::min(c, d)) + "\" width=\"" +
          num(std::abs(b - a)) + "\" height=\"" + num(std::abs(d - c)) + "\" " + style + "/>\n";
  }

  void line(double x0, double y0, double x1, double y1, const std::string& style) {
    s_ += "<line x1=\"" + num(px(x0)) + "\" y1=\"" + num(py(y0)) + "\" x2=\"" + num(px(x1)) +
          "\" y2=\"" + num(py(y1)) + "\" " + style + "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& style) {
    if (pts.empty()) return;
    s_ += "<polyline fill=\"none\" " + style + " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) s_ += ' ';
      s_ += num(px(pts[i].first)) + "," + num(py(pts[i].second));
    }
    s_ += "\"/>\n";
  }

  void dot(double x, double y, double r, const std::string& color) {
    if (!inside(x, y)) return;
    s_ += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"" + num(r) +
          "\" fill=\"" + color + "\" fill-opacity=\"0.6\"/>\n";
  }

  void legend(std::size_t row, const std::string& color, const std::string& label,
              bool dashed = false) {
    const double y = kTop + 14 + 16 * static_cast<double>(row);
    const double x = kLeft + 12;
    s_ += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4) + "\" x2=\"" + num(x + 18) +
          "\" y2=\"" + num(y - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" +
          (dashed ? " stroke-dasharray=\"4 3\"" : "") + "/>\n";
    s_ += "<text x=\"" + num(x + 24) + "\" y=\"" + num(y) + "\">" + escape(label) + "</text>\n";
  }

  void raw(const std::string& s) { s_ += s; }

  std::string finish() {
    s_ += "</svg>\n";
    return std::move(s_);
  }

 private:
  void axes(const std::string& xlabel, const std::string& ylabel) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    for (double v : ticks(x_)) {
      const double p = px(v);
      s_ += "<line x1=\"" + num(p) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(p) + "\" y2=\"" +
            num(y0 + 5) + "\" stroke=\"black\"/>\n";
      s_ += "<text x=\"" + num(p) + "\" y=\"" + num(y0 + 18) + "\" text-anchor=\"middle\">" +
            tick_label(v) + "</text>\n";
    }
    for (double v : ticks(y_)) {
      const double p = py(v);
      s_ += "<line x1=\"" + num(x0 - 5) + "\" y1=\"" + num(p) + "\" x2=\"" + num(x0) +
            "\" y2=\"" + num(p) + "\" stroke=\"black\"/>\n";
      s_ += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(p + 4) + "\" text-anchor=\"end\">" +
            tick_label(v) + "</text>\n";
    }
    s_ += "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) +
          "\" height=\"" + num(y0 - y1) + "\" fill=\"none\" stroke=\"black\"/>\n";
    s_ += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 14) +
          "\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
    s_ += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" " +
          "transform=\"rotate(-90 16 " + num((y0 + y1) / 2) + ")\">" + escape(ylabel) +
          "</text>\n";
  }

  Axis x_, y_;
  std::string s_;
};

const json& need(const json& report, const char* key) {
  if (!report.is_object() || !report.contains(key))
    throw FormatError(std::string("report has no '") + key + "' field");
  return report.at(key);
}

std::string title_of(const json& report, std::string_view what) {
  std::string t = report.value("experiment", std::string("report"));
  return t + ": " + std::string(what);
}

std::string scatter(const json& report) {
  const auto& sets = need(report, "sets");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : sets)
    for (const auto& p : need(s, "samples")) {
      for (int k = 0; k < 2; ++k) {
        const double v = p.at(k).get<double>();
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
      }
    }
  if (report.contains("training_range")) {
    lo = std::min(lo, report["training_range"].at(0).get<double>());
    hi = std::max(hi, report["training_range"].at(1).get<double>());
  }
  if (!(lo <= hi)) lo = 0, hi = 1;
  const Axis a = make_axis(std::min(lo, 0.0), hi);
  Canvas c(a, a, title_of(report, "true vs predicted"), "true count", "predicted count");

  if (report.contains("training_range")) {
    const double r0 = report["training_range"].at(0).get<double>();
    const double r1 = report["training_range"].at(1).get<double>();
    c.rect(r0, r0, r1, r1, "fill=\"#ffe680\" fill-opacity=\"0.5\" stroke=\"#d4a017\"");
  }
  c.line(a.lo, a.lo, a.hi, a.hi, "stroke=\"#444\" stroke-dasharray=\"5 4\"");

  std::size_t i = 0;
  for (const auto& s : sets) {
    const std::string color = kPalette[i % std::size(kPalette)];
    for (const auto& p : s.at("samples")) c.dot(p.at(0).get<double>(), p.at(1).get<double>(), 2.2, color);
    c.legend(i, color, s.value("name", std::string("set")));
    ++i;
  }
  return c.finish();
}

std::string loss_curves(const json& report) {
  const auto& traces = need(report, "traces");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t epochs = 1;
  for (const auto& t : traces) {
    for (const char* key : {"train_loss", "val_loss"})
      for (const auto& v : t.value(key, json::array())) {
        const double d = v.get<double>();
        if (std::isfinite(d) && d > 0) lo = std::min(lo, d), hi = std::max(hi, d);
      }
    epochs = std::max(epochs, t.value("train_loss", json::array()).size());
    if (t.contains("loss_threshold") && t["loss_threshold"].is_number()) {
      const double th = t["loss_threshold"].get<double>();
      lo = std::min(lo, th), hi = std::max(hi, th);
    }
  }
  const Axis x{0.0, static_cast<double>(epochs), false};
  const Axis y = make_axis(lo, hi, true);
  Canvas c(x, y, title_of(report, "training loss"), "epoch", "loss (log scale)");

  std::size_t i = 0, row = 0;
  for (const auto& t : traces) {
    const std::string color = kPalette[i % std::size(kPalette)];
    const std::string name = t.value("name", std::string("trace"));
    for (const char* key : {"train_loss", "val_loss"}) {
      std::vector<std::pair<double, double>> pts;
      std::size_t e = 0;
      for (const auto& v : t.value(key, json::array())) {
        ++e;
        const double d = v.get<double>();
        if (std::isfinite(d) && d > 0) pts.emplace_back(static_cast<double>(e), d);
      }
      if (pts.empty()) continue;
      const bool dashed = std::string(key) == "val_loss";
      c.polyline(pts, "stroke=\"" + color + "\" stroke-width=\"1.5\"" +
                          (dashed ? " stroke-dasharray=\"4 3\"" : ""));
      c.legend(row++, color, name + (dashed ? " (val)" : " (train)"), dashed);
    }
    if (t.contains("loss_threshold") && t["loss_threshold"].is_number()) {
      const double th = t["loss_threshold"].get<double>();
      c.line(x.lo, th, x.hi, th, "stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"2 3\"");
      if (t.contains("epochs_to_threshold") && t["epochs_to_threshold"].is_number()) {
        const double e = t["epochs_to_threshold"].get<double>();
        const double p = c.px(e), q = c.py(th);
        c.raw("<path d=\"M " + num(p) + " " + num(q - 4) + " L " + num(p - 5) + " " +
              num(q - 16) + " L " + num(p + 5) + " " + num(q - 16) +
              " Z\" fill=\"#d62728\"/>\n");
      }
    }
    ++i;
  }
  return c.finish();
}

std::string error_vs_count(const json& report) {
  const auto& sets = need(report, "sets");
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, yhi = 0;
  for (const auto& s : sets)
    for (const auto& b : need(s, "bins")) {
      if (b.at("n").get<std::size_t>() == 0) continue;
      xlo = std::min(xlo, b.at("lo").get<double>());
      xhi = std::max(xhi, b.at("hi").get<double>());
      yhi = std::max(yhi, 100.0 * b.at("mean_error").get<double>());
    }
  if (report.contains("reference_error"))
    yhi = std::max(yhi, 100.0 * report["reference_error"].get<double>());
  const Axis x = make_axis(xlo, xhi);
  const Axis y = make_axis(0.0, yhi > 0 ? yhi : 1.0);
  Canvas c(x, y, title_of(report, "error by true count"), "true count", "mean error rate (%)");

  if (report.contains("training_range")) {
    const double r0 = report["training_range"].at(0).get<double>();
    const double r1 = report["training_range"].at(1).get<double>();
    c.rect(std::max(r0, x.lo), y.lo, std::min(r1, x.hi), y.hi,
           "fill=\"#ffe680\" fill-opacity=\"0.5\" stroke=\"#d4a017\"");
  }
  if (report.contains("reference_error")) {
    const double r = 100.0 * report["reference_error"].get<double>();
    c.line(x.lo, r, x.hi, r, "stroke=\"#d62728\" stroke-width=\"1.5\"");
  }
  std::size_t i = 0;
  for (const auto& s : sets) {
    const std::string color = kPalette[i % std::size(kPalette)];
    std::vector<std::pair<double, double>> pts;
    for (const auto& b : s.at("bins")) {
      if (b.at("n").get<std::size_t>() == 0) continue;
      const double mid = 0.5 * (b.at("lo").get<double>() + b.at("hi").get<double>());
      pts.emplace_back(mid, 100.0 * b.at("mean_error").get<double>());
    }
    c.polyline(pts, "stroke=\"" + color + "\" stroke-width=\"1.5\"");
    for (const auto& [px, py] : pts) c.dot(px, py, 2.5, color);
    c.legend(i, color, s.value("name", std::string("set")));
    ++i;
  }
  return c.finish();
}

}  // namespace

std::string render_plot(const nlohmann::json& report, PlotKind kind) {
  switch (kind) {
    case PlotKind::scatter_true_vs_pred: return scatter(report);
    case PlotKind::loss_curves: return loss_curves(report);
    case PlotKind::error_vs_count: return error_vs_count(report);
  }
  throw ConfigError("unknown plot kind");
}

void emit_plot(const nlohmann::json& report, PlotKind kind, const std::filesystem::path& path) {
  detail::write_text(path.string(), render_plot(report, kind));
}

}  // namespace cclab
