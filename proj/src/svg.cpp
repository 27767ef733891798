#include "skewlap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "skewlap/errors.hpp"

namespace skewlap {

namespace {

struct LogAxis {
  double lo, hi;
  double map(double v, double px0, double px1) const {
    const double t = (std::log10(v) - lo) / (hi - lo);
    return px0 + t * (px1 - px0);
  }
};

LogAxis fit_axis(const std::vector<const std::vector<double>*>& data) {
  double lo = 1e300, hi = -1e300;
  for (const auto* v : data)
    for (double x : *v)
      if (x > 0.0) {
        lo = std::min(lo, std::log10(x));
        hi = std::max(hi, std::log10(x));
      }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  const double pad = 0.05 * std::max(1e-3, hi - lo);
  return LogAxis{lo - pad, hi + pad};
}

}  // namespace

void write_loglog_svg(const std::string& path, const std::vector<SvgSeries>& series,
                      const std::string& title, const std::string& xlabel,
                      const std::string& ylabel) {
  const double W = 640, H = 480;
  const double mL = 70, mR = 20, mT = 40, mB = 55;

  std::vector<const std::vector<double>*> xs, ys;
  for (const auto& s : series) {
    xs.push_back(&s.x);
    ys.push_back(&s.y);
    if (!s.band_lo.empty()) {
      ys.push_back(&s.band_lo);
      ys.push_back(&s.band_hi);
    }
  }
  const LogAxis ax = fit_axis(xs), ay = fit_axis(ys);

  auto px = [&](double v) { return ax.map(v, mL, W - mR); };
  auto py = [&](double v) { return ay.map(v, H - mB, mT); };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";

  // decade grid lines and tick labels
  for (int e = static_cast<int>(std::floor(ax.lo)); e <= static_cast<int>(std::ceil(ax.hi)); ++e) {
    const double v = std::pow(10.0, e);
    if (std::log10(v) < ax.lo || std::log10(v) > ax.hi) continue;
    svg << "<line x1='" << px(v) << "' y1='" << mT << "' x2='" << px(v) << "' y2='" << H - mB
        << "' stroke='#dddddd'/>\n";
    svg << "<text x='" << px(v) << "' y='" << H - mB + 18
        << "' text-anchor='middle' font-size='11'>1e" << e << "</text>\n";
  }
  for (int e = static_cast<int>(std::floor(ay.lo)); e <= static_cast<int>(std::ceil(ay.hi)); ++e) {
    const double v = std::pow(10.0, e);
    if (std::log10(v) < ay.lo || std::log10(v) > ay.hi) continue;
    svg << "<line x1='" << mL << "' y1='" << py(v) << "' x2='" << W - mR << "' y2='" << py(v)
        << "' stroke='#dddddd'/>\n";
    svg << "<text x='" << mL - 6 << "' y='" << py(v) + 4
        << "' text-anchor='end' font-size='11'>1e" << e << "</text>\n";
  }
  svg << "<rect x='" << mL << "' y='" << mT << "' width='" << W - mL - mR << "' height='"
      << H - mT - mB << "' fill='none' stroke='black'/>\n";
  svg << "<text x='" << W / 2 << "' y='" << H - 14 << "' text-anchor='middle' font-size='13'>"
      << xlabel << "</text>\n";
  svg << "<text x='16' y='" << H / 2 << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
      << H / 2 << ")'>" << ylabel << "</text>\n";

  double legend_y = mT + 14;
  for (const auto& s : series) {
    if (!s.band_lo.empty()) {
      std::ostringstream pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (s.x[i] > 0 && s.band_hi[i] > 0) pts << px(s.x[i]) << "," << py(s.band_hi[i]) << " ";
      for (std::size_t i = s.x.size(); i-- > 0;)
        if (s.x[i] > 0 && s.band_lo[i] > 0) pts << px(s.x[i]) << "," << py(s.band_lo[i]) << " ";
      svg << "<polygon points='" << pts.str() << "' fill='" << s.color
          << "' fill-opacity='0.15' stroke='none'/>\n";
    }
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.x[i] > 0 && s.y[i] > 0) pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
    svg << "<polyline points='" << pts.str() << "' fill='none' stroke='" << s.color
        << "' stroke-width='1.8'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.x[i] > 0 && s.y[i] > 0)
        svg << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='2.6' fill='"
            << s.color << "'/>\n";
    if (!s.label.empty()) {
      svg << "<line x1='" << W - mR - 150 << "' y1='" << legend_y << "' x2='" << W - mR - 126
          << "' y2='" << legend_y << "' stroke='" << s.color << "' stroke-width='2'/>\n";
      svg << "<text x='" << W - mR - 120 << "' y='" << legend_y + 4 << "' font-size='12'>"
          << s.label << "</text>\n";
      legend_y += 16;
    }
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open for writing: " + path);
  out << svg.str();
}

}  // namespace skewlap
