#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ggtde::cli {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kMarginLeft = 72.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 44.0;
constexpr double kMarginBottom = 48.0;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string line_chart_svg(const std::string& title,
                           const std::vector<double>& steps,
                           const std::vector<double>& median,
                           const std::vector<double>& sd) {
  if (steps.size() != median.size() || steps.size() != sd.size()) {
    throw std::invalid_argument("line_chart_svg: series length mismatch");
  }

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"440\" "
         "viewBox=\"0 0 720 440\">\n";
  out += "  <rect x=\"0\" y=\"0\" width=\"720\" height=\"440\" fill=\"#ffffff\"/>\n";
  out += "  <text x=\"" + fmt(kMarginLeft) + "\" y=\"26\" font-family=\"monospace\" "
         "font-size=\"16\" fill=\"#222222\">" + title + "</text>\n";

  // Collect the finite points that define the data ranges.
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool have_x = false, have_y = false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!std::isfinite(steps[i]) || !std::isfinite(median[i])) continue;
    x_lo = have_x ? std::min(x_lo, steps[i]) : steps[i];
    x_hi = have_x ? std::max(x_hi, steps[i]) : steps[i];
    have_x = true;
    double lo = median[i], hi = median[i];
    if (std::isfinite(sd[i])) {
      lo -= sd[i];
      hi += sd[i];
    }
    y_lo = have_y ? std::min(y_lo, lo) : lo;
    y_hi = have_y ? std::max(y_hi, hi) : hi;
    have_y = true;
  }
  if (!have_y) {
    out += "  <text x=\"" + fmt(kWidth / 2 - 60.0) + "\" y=\"" + fmt(kHeight / 2) +
           "\" font-family=\"monospace\" font-size=\"14\" fill=\"#888888\">"
           "no finite data</text>\n</svg>\n";
    return out;
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) {
    const double pad = std::max(0.5, std::fabs(y_lo) * 0.1);
    y_lo -= pad;
    y_hi += pad;
  } else {
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
  }

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto px = [&](double x) {
    return kMarginLeft + (x - x_lo) / (x_hi - x_lo) * plot_w;
  };
  const auto py = [&](double y) {
    return kMarginTop + (y_hi - y) / (y_hi - y_lo) * plot_h;
  };

  // Grid and tick labels.
  constexpr int kTicks = 5;
  for (int t = 0; t < kTicks; ++t) {
    const double fy = y_lo + (y_hi - y_lo) * t / (kTicks - 1);
    const double yy = py(fy);
    out += "  <line x1=\"" + fmt(kMarginLeft) + "\" y1=\"" + fmt(yy) + "\" x2=\"" +
           fmt(kWidth - kMarginRight) + "\" y2=\"" + fmt(yy) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "  <text x=\"" + fmt(kMarginLeft - 8.0) + "\" y=\"" + fmt(yy + 4.0) +
           "\" font-family=\"monospace\" font-size=\"11\" fill=\"#555555\" "
           "text-anchor=\"end\">" + fmt_tick(fy) + "</text>\n";
    const double fx = x_lo + (x_hi - x_lo) * t / (kTicks - 1);
    const double xx = px(fx);
    out += "  <line x1=\"" + fmt(xx) + "\" y1=\"" + fmt(kMarginTop) + "\" x2=\"" +
           fmt(xx) + "\" y2=\"" + fmt(kHeight - kMarginBottom) +
           "\" stroke=\"#eeeeee\" stroke-width=\"1\"/>\n";
    out += "  <text x=\"" + fmt(xx) + "\" y=\"" + fmt(kHeight - kMarginBottom + 18.0) +
           "\" font-family=\"monospace\" font-size=\"11\" fill=\"#555555\" "
           "text-anchor=\"middle\">" + fmt_tick(fx) + "</text>\n";
  }
  out += "  <rect x=\"" + fmt(kMarginLeft) + "\" y=\"" + fmt(kMarginTop) +
         "\" width=\"" + fmt(plot_w) + "\" height=\"" + fmt(plot_h) +
         "\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n";

  // Shaded median +/- sd band over contiguous runs where both are finite.
  std::size_t i = 0;
  while (i < steps.size()) {
    while (i < steps.size() &&
           !(std::isfinite(median[i]) && std::isfinite(sd[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < steps.size() && std::isfinite(median[j]) && std::isfinite(sd[j])) {
      ++j;
    }
    if (j - i >= 2) {
      std::string pts;
      for (std::size_t k = i; k < j; ++k) {
        pts += fmt(px(steps[k])) + "," + fmt(py(median[k] + sd[k])) + " ";
      }
      for (std::size_t k = j; k-- > i;) {
        pts += fmt(px(steps[k])) + "," + fmt(py(median[k] - sd[k])) + " ";
      }
      out += "  <polygon points=\"" + pts +
             "\" fill=\"#1f6f8b\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    i = j;
  }

  // Median polyline, split at non-finite gaps.
  i = 0;
  while (i < steps.size()) {
    while (i < steps.size() && !std::isfinite(median[i])) ++i;
    std::size_t j = i;
    while (j < steps.size() && std::isfinite(median[j])) ++j;
    if (j > i) {
      std::string pts;
      for (std::size_t k = i; k < j; ++k) {
        pts += fmt(px(steps[k])) + "," + fmt(py(median[k])) + " ";
      }
      if (j - i == 1) {
        out += "  <circle cx=\"" + fmt(px(steps[i])) + "\" cy=\"" +
               fmt(py(median[i])) + "\" r=\"2.5\" fill=\"#1f6f8b\"/>\n";
      } else {
        out += "  <polyline points=\"" + pts +
               "\" fill=\"none\" stroke=\"#1f6f8b\" stroke-width=\"2\"/>\n";
      }
    }
    i = j;
  }

  out += "</svg>\n";
  return out;
}

}  // namespace ggtde::cli
