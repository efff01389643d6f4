#include "mmlc/run/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmlc/io/container.hpp"

namespace mmlc::run {

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string polyline_points(const std::vector<PlotPoint>& pts, const PlotGeometry& g) {
  std::string s;
  for (const auto& p : pts) {
    if (!s.empty()) s += ' ';
    s += format_coord(g.px(p.x)) + "," + format_coord(g.py(p.y));
  }
  return s;
}

namespace {

std::string band_polygon(const std::vector<PlotPoint>& pts, const PlotGeometry& g) {
  std::string s;
  for (const auto& p : pts) {
    if (!s.empty()) s += ' ';
    s += format_coord(g.px(p.x)) + "," + format_coord(g.py(p.y + p.band));
  }
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    s += ' ' + format_coord(g.px(it->x)) + "," + format_coord(g.py(it->y - it->band));
  }
  return s;
}

void axis(std::ostringstream& os, const PlotSpec& spec, const PlotGeometry& g) {
  os << "<rect x='" << PlotGeometry::kL << "' y='" << PlotGeometry::kT << "' width='"
     << (PlotGeometry::kW - PlotGeometry::kL - PlotGeometry::kR) << "' height='"
     << (PlotGeometry::kH - PlotGeometry::kT - PlotGeometry::kB)
     << "' fill='none' stroke='#444' stroke-width='1'/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = spec.y_min + (spec.y_max - spec.y_min) * i / 5.0;
    os << "<line x1='" << PlotGeometry::kL - 4 << "' y1='" << format_coord(g.py(y))
       << "' x2='" << PlotGeometry::kL << "' y2='" << format_coord(g.py(y))
       << "' stroke='#444'/>\n";
    os << "<text x='" << PlotGeometry::kL - 8 << "' y='" << format_coord(g.py(y) + 4)
       << "' font-size='11' text-anchor='end'>" << format_coord(y) << "</text>\n";
  }
  const int xticks = 6;
  for (int i = 0; i <= xticks; ++i) {
    const double x = spec.x_min + (spec.x_max - spec.x_min) * i / xticks;
    os << "<line x1='" << format_coord(g.px(x)) << "' y1='"
       << (PlotGeometry::kH - PlotGeometry::kB) << "' x2='" << format_coord(g.px(x))
       << "' y2='" << (PlotGeometry::kH - PlotGeometry::kB + 4) << "' stroke='#444'/>\n";
    char lab[16];
    std::snprintf(lab, sizeof(lab), "%g", x);
    os << "<text x='" << format_coord(g.px(x)) << "' y='"
       << (PlotGeometry::kH - PlotGeometry::kB + 17)
       << "' font-size='11' text-anchor='middle'>" << lab << "</text>\n";
  }
  os << "<text x='" << (PlotGeometry::kL + (PlotGeometry::kW - PlotGeometry::kL - PlotGeometry::kR) / 2)
     << "' y='" << (PlotGeometry::kH - 8) << "' font-size='13' text-anchor='middle'>"
     << spec.xlabel << "</text>\n";
  os << "<text x='16' y='" << (PlotGeometry::kT + (PlotGeometry::kH - PlotGeometry::kT - PlotGeometry::kB) / 2)
     << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 "
     << (PlotGeometry::kT + (PlotGeometry::kH - PlotGeometry::kT - PlotGeometry::kB) / 2)
     << ")'>" << spec.ylabel << "</text>\n";
  os << "<text x='" << (PlotGeometry::kW / 2) << "' y='20' font-size='14' "
     << "text-anchor='middle'>" << spec.title << "</text>\n";
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  PlotGeometry g{spec.x_min, spec.x_max, spec.y_min, spec.y_max};
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << PlotGeometry::kW
     << "' height='" << PlotGeometry::kH << "' viewBox='0 0 " << PlotGeometry::kW
     << " " << PlotGeometry::kH << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  axis(os, spec, g);

  for (double vx : spec.vlines) {
    os << "<line x1='" << format_coord(g.px(vx)) << "' y1='" << PlotGeometry::kT
       << "' x2='" << format_coord(g.px(vx)) << "' y2='"
       << (PlotGeometry::kH - PlotGeometry::kB)
       << "' stroke='#888' stroke-dasharray='2,4'/>\n";
  }

  for (const auto& s : spec.series) {
    if (s.band && s.pts.size() > 1) {
      os << "<polygon points='" << band_polygon(s.pts, g) << "' fill='" << s.color
         << "' fill-opacity='0.15' stroke='none'/>\n";
    }
    if (s.pts.size() == 1) {
      os << "<circle cx='" << format_coord(g.px(s.pts[0].x)) << "' cy='"
         << format_coord(g.py(s.pts[0].y)) << "' r='3' fill='" << s.color << "'/>\n";
    } else {
      os << "<polyline points='" << polyline_points(s.pts, g) << "' fill='none' stroke='"
         << s.color << "' stroke-width='1.6'";
      if (!s.dash.empty()) os << " stroke-dasharray='" << s.dash << "'";
      os << "/>\n";
    }
    for (const auto& p : s.pts) {
      os << "<circle cx='" << format_coord(g.px(p.x)) << "' cy='"
         << format_coord(g.py(p.y)) << "' r='2.2' fill='" << s.color << "'/>\n";
    }
  }

  // Legend.
  double ly = PlotGeometry::kT + 12;
  for (const auto& s : spec.series) {
    os << "<line x1='" << (PlotGeometry::kW - 170) << "' y1='" << ly << "' x2='"
       << (PlotGeometry::kW - 140) << "' y2='" << ly << "' stroke='" << s.color
       << "' stroke-width='2'";
    if (!s.dash.empty()) os << " stroke-dasharray='" << s.dash << "'";
    os << "/>\n<text x='" << (PlotGeometry::kW - 134) << "' y='" << (ly + 4)
       << "' font-size='11'>" << s.label << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

void write_plot(const std::string& path, const PlotSpec& spec) {
  std::ofstream out(path);
  if (!out) throw io::IoError("cannot open for writing: " + path);
  out << render_svg(spec);
  if (!out) throw io::IoError("failed writing " + path);
}

namespace {

PlotSeries series_from_metric(const SweepResult& r, const std::string& metric,
                              const std::string& label, const std::string& color,
                              const std::string& dash, bool analytic_zero) {
  PlotSeries s;
  s.label = label;
  s.color = color;
  s.dash = dash;
  s.band = true;
  if (analytic_zero) s.pts.push_back({0.0, 1.0, 0.0});
  auto zs = r.d_z_values();
  std::sort(zs.begin(), zs.end());
  for (int z : zs) {
    const Aggregate a = r.aggregate(z, metric);
    if (a.count > 0) s.pts.push_back({static_cast<double>(z), a.mean, a.stddev});
  }
  return s;
}

double series_max(const std::vector<PlotSeries>& series) {
  double m = 0.0;
  for (const auto& s : series)
    for (const auto& p : s.pts) m = std::max(m, p.y + p.band);
  return m;
}

double sweep_max(const SweepResult& r) {
  double m = 1.0;
  for (const auto& c : r.cells) m = std::max(m, static_cast<double>(c.d_z));
  return m;
}

}  // namespace

PlotSpec synthetic_plot(const SweepResult& r, int d_min) {
  PlotSpec spec;
  spec.title = r.experiment;
  spec.xlabel = "latent dimension d_z";
  spec.ylabel = "readout error";
  spec.series.push_back(series_from_metric(r, "r_e", "exclusive r_e", "#1f5bd8", "", true));
  spec.series.push_back(series_from_metric(r, "r_m", "shared r_m", "#d82719", "", true));
  spec.vlines.push_back(static_cast<double>(d_min));
  spec.x_max = sweep_max(r);
  spec.y_max = std::max(1.15, 1.05 * series_max(spec.series));
  return spec;
}

PlotSpec robot_readout_plot(const SweepResult& r) {
  PlotSpec spec;
  spec.title = r.experiment + " readout";
  spec.xlabel = "latent dimension d_z";
  spec.ylabel = "readout error";
  const char* blue = "#1f5bd8";
  const char* red = "#d82719";
  // Solid: in both modalities; dashed: one; dotted: none.
  spec.series.push_back(series_from_metric(r, "readout_pos_right", "right pos (both)", blue, "", true));
  spec.series.push_back(series_from_metric(r, "readout_ee_right", "right ee (both)", blue, "7,3", false));
  spec.series.push_back(series_from_metric(r, "readout_vel_right", "right vel (proprio)", blue, "3,3", true));
  spec.series.push_back(series_from_metric(r, "readout_pos_left", "left pos (vision)", red, "7,3", true));
  spec.series.push_back(series_from_metric(r, "readout_ee_left", "left ee (vision)", red, "3,3", false));
  spec.series.push_back(series_from_metric(r, "readout_vel_left", "left vel (none)", red, "1,3", true));
  spec.x_max = sweep_max(r);
  spec.y_max = std::max(1.3, 1.05 * series_max(spec.series));
  return spec;
}

PlotSpec robot_vision_plot(const SweepResult& r) {
  PlotSpec spec;
  spec.title = r.experiment + " vision halves";
  spec.xlabel = "latent dimension d_z";
  spec.ylabel = "frame mse";
  spec.series.push_back(series_from_metric(r, "vision_left", "left half", "#d82719", "", false));
  spec.series.push_back(series_from_metric(r, "vision_right", "right half", "#1f5bd8", "", false));
  spec.series.push_back(series_from_metric(r, "vision_chance_left", "chance (left)", "#888888", "2,4", false));
  spec.x_max = sweep_max(r);
  spec.y_max = std::max(1e-6, 1.3 * series_max(spec.series));
  return spec;
}

}  // namespace mmlc::run
