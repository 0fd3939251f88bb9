#include "dsr/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dsr {

namespace {

constexpr double kWidth = 800;
constexpr double kHeight = 480;
constexpr double kLeft = 70;
constexpr double kRight = 190;  // legend space
constexpr double kTop = 40;
constexpr double kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string Escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string Px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string Join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    out += FormatDouble(xs[i]);
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double X(double x) const {
    const double span = x1 > x0 ? x1 - x0 : 1.0;
    return kLeft + (x - x0) / span * (kWidth - kLeft - kRight);
  }
  double Y(double y) const {
    const double span = y1 > y0 ? y1 - y0 : 1.0;
    return kHeight - kBottom - (y - y0) / span * (kHeight - kTop - kBottom);
  }
};

void Header(std::ostringstream& out, const std::string& title, const std::string& kind) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" data-kind=\"" << kind << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << Px(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"16\">" << Escape(title) << "</text>\n";
}

void Axes(std::ostringstream& out, const Frame& f, const std::string& xlabel, const std::string& ylabel,
          bool integer_y) {
  const double xa = kLeft, xb = kWidth - kRight, ya = kHeight - kBottom, yb = kTop;
  out << "<g stroke=\"black\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << Px(xa) << "\" y1=\"" << Px(ya) << "\" x2=\"" << Px(xb) << "\" y2=\"" << Px(ya) << "\"/>\n";
  out << "<line x1=\"" << Px(xa) << "\" y1=\"" << Px(ya) << "\" x2=\"" << Px(xa) << "\" y2=\"" << Px(yb) << "\"/>\n";
  out << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = f.x0 + (f.x1 - f.x0) * i / 5.0;
    out << "<text x=\"" << Px(f.X(v)) << "\" y=\"" << Px(ya + 16) << "\" text-anchor=\"middle\">" << Tick(v)
        << "</text>\n";
  }
  std::vector<double> yticks;
  if (integer_y) {
    const int lo = static_cast<int>(std::floor(f.y0)), hi = static_cast<int>(std::ceil(f.y1));
    const int step = std::max(1, (hi - lo) / 8);
    for (int v = lo; v <= hi; v += step) yticks.push_back(v);
  } else {
    for (int i = 0; i <= 5; ++i) yticks.push_back(f.y0 + (f.y1 - f.y0) * i / 5.0);
  }
  for (double v : yticks) {
    out << "<text x=\"" << Px(xa - 6) << "\" y=\"" << Px(f.Y(v) + 4) << "\" text-anchor=\"end\">" << Tick(v)
        << "</text>\n";
  }
  out << "<text x=\"" << Px((xa + xb) / 2) << "\" y=\"" << Px(kHeight - 12) << "\" text-anchor=\"middle\">"
      << Escape(xlabel) << "</text>\n";
  out << "<text x=\"16\" y=\"" << Px((ya + yb) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << Px((ya + yb) / 2) << ")\">" << Escape(ylabel) << "</text>\n";
  out << "</g>\n";
}

void LegendEntry(std::ostringstream& out, std::size_t i, const std::string& color, const std::string& label) {
  const double x = kWidth - kRight + 15, y = kTop + 10 + 18.0 * static_cast<double>(i);
  out << "<line x1=\"" << Px(x) << "\" y1=\"" << Px(y) << "\" x2=\"" << Px(x + 20) << "\" y2=\"" << Px(y)
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
  out << "<text x=\"" << Px(x + 26) << "\" y=\"" << Px(y + 4) << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << Escape(label) << "</text>\n";
}

double Interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const auto it = std::lower_bound(xs.begin(), xs.end(), x);
  if (it == xs.end()) return ys.back();
  const auto j = static_cast<std::size_t>(it - xs.begin());
  if (*it == x || j == 0) return ys[j];
  const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

}  // namespace

std::vector<ReturnCurve> AggregateReturns(const std::vector<PlotRun>& runs) {
  // Groups in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const PlotRun*>> groups;
  for (const auto& r : runs) {
    if (!groups.count(r.group)) order.push_back(r.group);
    groups[r.group].push_back(&r);
  }
  std::vector<ReturnCurve> curves;
  for (const auto& g : order) {
    std::vector<std::vector<double>> xs, ys;
    for (const PlotRun* r : groups[g]) {
      std::vector<double> x, y;
      for (const auto& row : r->metrics.rows) {
        if (!row.eval_return) continue;
        x.push_back(static_cast<double>(row.env_steps));
        y.push_back(*row.eval_return);
      }
      if (x.empty()) throw std::runtime_error(r->name + ": no evaluation rows");
      xs.push_back(std::move(x));
      ys.push_back(std::move(y));
    }
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    std::size_t coarsest = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      lo = std::max(lo, xs[k].front());
      hi = std::min(hi, xs[k].back());
      if (xs[k].size() < xs[coarsest].size()) coarsest = k;
    }
    ReturnCurve c;
    c.group = g;
    c.n_runs = xs.size();
    for (double x : xs[coarsest]) {
      if (x < lo || x > hi) continue;
      double sum = 0.0;
      std::vector<double> vals;
      for (std::size_t k = 0; k < xs.size(); ++k) vals.push_back(Interpolate(xs[k], ys[k], x));
      for (double v : vals) sum += v;
      const double mean = sum / static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      c.x.push_back(x);
      c.mean.push_back(mean);
      c.std.push_back(std::sqrt(var / static_cast<double>(vals.size())));
    }
    if (c.x.empty()) throw std::runtime_error("group " + g + ": runs share no common evaluation range");
    curves.push_back(std::move(c));
  }
  return curves;
}

std::string RenderReturnSvg(const std::vector<PlotRun>& runs, const std::string& title) {
  const auto curves = AggregateReturns(runs);
  Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0, 1.0};
  for (const auto& c : curves) {
    f.x0 = std::min(f.x0, c.x.front());
    f.x1 = std::max(f.x1, c.x.back());
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      f.y0 = std::min(f.y0, c.mean[i] - c.std[i]);
      f.y1 = std::max(f.y1, c.mean[i] + c.std[i]);
    }
  }
  std::ostringstream out;
  Header(out, title, "return");
  Axes(out, f, "environment steps", "mean evaluation return", false);
  for (std::size_t g = 0; g < curves.size(); ++g) {
    const auto& c = curves[g];
    const std::string color = kPalette[g % std::size(kPalette)];
    out << "<g data-group=\"" << Escape(c.group) << "\" data-runs=\"" << c.n_runs << "\">\n";
    out << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) out << Px(f.X(c.x[i])) << ',' << Px(f.Y(c.mean[i] + c.std[i])) << ' ';
    for (std::size_t i = c.x.size(); i-- > 0;) out << Px(f.X(c.x[i])) << ',' << Px(f.Y(c.mean[i] - c.std[i])) << ' ';
    out << "\"/>\n";
    out << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" data-x=\""
        << Join(c.x) << "\" data-y=\"" << Join(c.mean) << "\" data-std=\"" << Join(c.std) << "\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (i) out << ' ';
      out << Px(f.X(c.x[i])) << ',' << Px(f.Y(c.mean[i]));
    }
    out << "\"/>\n</g>\n";
    LegendEntry(out, g, color, c.group + " (n=" + std::to_string(c.n_runs) + ")");
  }
  out << "</svg>\n";
  return out.str();
}

std::string RenderSelectedDSvg(const std::vector<PlotRun>& runs, const std::string& title) {
  if (runs.empty()) throw std::invalid_argument("no runs to plot");
  Frame f{1.0, 1.0, 0.0, 1.0};
  for (const auto& r : runs) {
    if (r.metrics.rows.empty()) throw std::runtime_error(r.name + ": metrics has no rows");
    f.x1 = std::max(f.x1, static_cast<double>(r.metrics.rows.back().episode));
    for (const auto& row : r.metrics.rows) f.y1 = std::max(f.y1, static_cast<double>(row.selected_d));
  }
  std::ostringstream out;
  Header(out, title, "selected_d");
  Axes(out, f, "episode", "selected sight range", true);
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& r = runs[k];
    const std::string color = kPalette[k % std::size(kPalette)];
    std::vector<double> x, y;
    for (const auto& row : r.metrics.rows) {
      x.push_back(row.episode);
      y.push_back(row.selected_d);
    }
    out << "<polyline class=\"selected-d\" data-run=\"" << Escape(r.name) << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1\" stroke-opacity=\"0.7\" data-x=\"" << Join(x) << "\" data-y=\"" << Join(y)
        << "\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i) out << ' ';
      out << Px(f.X(x[i])) << ',' << Px(f.Y(y[i]));
    }
    out << "\"/>\n";
    LegendEntry(out, k, color, r.name);
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace dsr
