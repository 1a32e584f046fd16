#pragma once

/**
 * @file plots.hpp
 * @brief Static SVG renderings of analysis results: per-year boxplots of a
 *        feature's cross-member annual means, and a year-vs-deviation
 *        scatter for resolution bias. Text-only output, no dependencies.
 */

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "srdm/analytics.hpp"

namespace srdm {

namespace plot_detail {

inline constexpr double kWidth = 640.0, kHeight = 400.0, kMargin = 56.0;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Frame {
  double lo, hi;
  std::size_t slots;
  double x(double slot) const { return kMargin + (slot + 0.5) * (kWidth - 2 * kMargin) / static_cast<double>(slots); }
  double y(double v) const {
    const double span = hi > lo ? hi - lo : 1.0;
    return kHeight - kMargin - (v - lo) / span * (kHeight - 2 * kMargin);
  }
};

inline std::string open(const std::string& title, const Frame& f) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                  "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  s += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kHeight - kMargin) + "\" x2=\"" + num(kWidth - kMargin) +
       "\" y2=\"" + num(kHeight - kMargin) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kMargin) + "\" x2=\"" + num(kMargin) + "\" y2=\"" +
       num(kHeight - kMargin) + "\" stroke=\"black\"/>\n";
  for (double v : {f.lo, 0.5 * (f.lo + f.hi), f.hi}) {
    s += "<text x=\"" + num(kMargin - 4) + "\" y=\"" + num(f.y(v) + 4) + "\" text-anchor=\"end\">" + num(v) + "</text>\n";
  }
  return s;
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1 - w) + v[i + 1] * w : v[i];
}

}  // namespace plot_detail

/// Boxplot per year of the member annual means (whiskers at min/max).
inline std::string boxplot_svg(const FeatureTrend& ft) {
  using namespace plot_detail;
  double lo = 1e300, hi = -1e300;
  for (const auto& d : ft.distribution)
    for (double v : d) lo = std::min(lo, v), hi = std::max(hi, v);
  const Frame f{lo, hi, ft.years.size()};
  std::string s = open("Annual mean of " + ft.feature + " (" + trend_name(ft.trend.classification) + ", slope " +
                           num(ft.trend.slope) + "/yr)",
                       f);
  const double half = 0.3 * (kWidth - 2 * kMargin) / static_cast<double>(f.slots);
  for (std::size_t i = 0; i < ft.years.size(); ++i) {
    const auto& d = ft.distribution[i];
    const double x = f.x(static_cast<double>(i));
    const double q1 = quantile(d, 0.25), q2 = quantile(d, 0.5), q3 = quantile(d, 0.75);
    const double mn = *std::min_element(d.begin(), d.end()), mx = *std::max_element(d.begin(), d.end());
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(f.y(mn)) + "\" x2=\"" + num(x) + "\" y2=\"" + num(f.y(mx)) +
         "\" stroke=\"black\"/>\n";
    s += "<rect x=\"" + num(x - half) + "\" y=\"" + num(f.y(q3)) + "\" width=\"" + num(2 * half) + "\" height=\"" +
         num(std::max(0.5, f.y(q1) - f.y(q3))) + "\" fill=\"#9cc3e6\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(x - half) + "\" y1=\"" + num(f.y(q2)) + "\" x2=\"" + num(x + half) + "\" y2=\"" +
         num(f.y(q2)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(kHeight - kMargin + 16) + "\" text-anchor=\"middle\">" +
         std::to_string(ft.years[i]) + "</text>\n";
  }
  return s + "</svg>\n";
}

/// Deviation percent per year, one marker per technology.
inline std::string bias_svg(const std::vector<BiasReport>& reports) {
  using namespace plot_detail;
  double lo = 0.0, hi = 0.0;
  std::vector<int> years;
  for (const auto& r : reports) {
    for (const auto& y : r.years) {
      lo = std::min(lo, y.deviation_pct);
      hi = std::max(hi, y.deviation_pct);
      if (std::find(years.begin(), years.end(), y.year) == years.end()) years.push_back(y.year);
    }
  }
  std::sort(years.begin(), years.end());
  const Frame f{lo, hi, std::max<std::size_t>(1, years.size())};
  std::string s = open("Low- vs high-resolution AUH deviation (%)", f);
  s += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(f.y(0)) + "\" x2=\"" + num(kWidth - kMargin) + "\" y2=\"" +
       num(f.y(0)) + "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  for (const auto& r : reports) {
    const std::string color = r.technology == Technology::kWind ? "#1f77b4" : "#ff7f0e";
    for (const auto& y : r.years) {
      const auto slot = static_cast<double>(std::find(years.begin(), years.end(), y.year) - years.begin());
      s += "<circle cx=\"" + num(f.x(slot)) + "\" cy=\"" + num(f.y(y.deviation_pct)) + "\" r=\"4\" fill=\"" + color +
           "\"><title>" + technology_name(r.technology) + " " + std::to_string(y.year) + "</title></circle>\n";
    }
  }
  for (std::size_t i = 0; i < years.size(); ++i) {
    s += "<text x=\"" + num(f.x(static_cast<double>(i))) + "\" y=\"" + num(kHeight - kMargin + 16) +
         "\" text-anchor=\"middle\">" + std::to_string(years[i]) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace srdm
