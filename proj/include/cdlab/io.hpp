#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdlab/cdcheck.hpp"
#include "cdlab/geometry.hpp"
#include "cdlab/interpolation.hpp"
#include "cdlab/measure.hpp"
#include "cdlab/transport.hpp"

namespace cdlab::io {

using nlohmann::json;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Plain-text key = value configuration. '#' starts a comment.

class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "config") {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw InputError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw InputError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t pos = 0;
    try {
      const long long v = std::stoll(it->second, &pos);
      if (pos == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw InputError("config key '" + key + "': not an integer: " + it->second);
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw InputError("config key '" + key + "': not a boolean: " + it->second);
  }
  /// Comma-separated reals; "inf" is accepted.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.empty()) throw InputError("config key '" + key + "': empty list");
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
  static double to_double(const std::string& key, const std::string& v) {
    if (v == "inf") return kInf;
    std::size_t pos = 0;
    try {
      const double d = std::stod(v, &pos);
      if (pos == v.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw InputError("config key '" + key + "': not a decimal number: " + v);
  }

  std::map<std::string, std::string> values_;
};

inline CornerDomain corner_domain_from(const Config& cfg, CornerDomain base = CornerDomain::demo()) {
  base.a = cfg.get_double("a", base.a);
  base.b = cfg.get_double("b", base.b);
  base.c = cfg.get_double("c", base.c);
  base.d = cfg.get_double("d", base.d);
  base.xc = cfg.get_double("xc", base.xc);
  base.yc = cfg.get_double("yc", base.yc);
  return base;
}

// ---------------------------------------------------------------------------
// JSON. Non-finite reals are written as the strings "inf", "-inf", "nan".

inline json real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline json to_json(const ValidationReport& r) {
  json rows = json::array();
  for (const auto& v : r.violations) {
    rows.push_back({{"constraint", v.constraint},
                    {"witness_x", real(v.witness_x)},
                    {"witness_y", real(v.witness_y)},
                    {"margin", real(v.margin)}});
  }
  return {{"valid", r.valid()}, {"sphere_center_margin", real(r.sphere_center_margin)}, {"violations", rows}};
}

inline json to_json(const CDReport& r) {
  return {{"condition", to_string(r.condition)},
          {"K", real(r.K)},
          {"N", real(r.N)},
          {"t", real(r.t)},
          {"lhs", real(r.lhs)},
          {"rhs", real(r.rhs)},
          {"satisfied", r.satisfied},
          {"margin", real(r.margin)},
          {"resolution", real(r.resolution)},
          {"tolerance", real(r.tolerance)},
          {"trial", r.trial},
          {"family", r.family},
          {"notes", r.notes}};
}

inline json to_json(const Box& b) {
  return {{"x0", real(b.x0)}, {"x1", real(b.x1)}, {"y0", real(b.y0)}, {"y1", real(b.y1)}};
}

inline json to_json(const FailureDemo& d) {
  return {{"report", to_json(d.report)},
          {"certified", d.certified},
          {"K", real(d.K)},
          {"l", real(d.l)},
          {"A0_area", real(d.a0_area)},
          {"bound", real(d.bound)},
          {"reach_area", real(d.reach.area)},
          {"reach_error_bound", real(d.reach.error_bound)},
          {"grid_step", real(d.reach.grid_step)},
          {"inside_cells", d.reach.inside_cells},
          {"boundary_cells", d.reach.boundary_cells},
          {"attempts", d.attempts},
          {"geometry",
           {{"h", real(d.h)},
            {"block_side", real(d.block_side)},
            {"neck_length", real(d.neck_length)},
            {"ramp_slope", real(d.ramp_slope)},
            {"A0", to_json(d.a0)},
            {"A1", to_json(d.a1)}}}};
}

inline json witness(const TransportPlan& plan, int e1, int e2) {
  if (e1 < 0) return nullptr;
  auto pt = [](Point p) { return json::array({real(p.x), real(p.y)}); };
  const auto& a = plan.entries[e1];
  const auto& b = plan.entries[e2];
  return json::array({pt(plan.src(a)), pt(plan.dst(a)), pt(plan.src(b)), pt(plan.dst(b))});
}

inline json to_json(const ConditionAudit& a, const TransportPlan& plan) {
  return {{"max_violation", real(a.max_violation)},
          {"checked", a.checked},
          {"witness", witness(plan, a.entry1, a.entry2)}};
}

inline json audit_json(const TransportPlan& plan, double eq_tol = 1e-12) {
  const auto cyc = audit_cyclical(plan, eq_tol);
  const auto order = audit_monotone_order(plan, eq_tol);
  const auto cls = classify_pairs(plan);
  json order_rows = json::array();
  for (const auto& v : order.violations) {
    order_rows.push_back({{"kind", v.kind}, {"quotient", real(v.quotient)}, {"witness", witness(plan, v.entry1, v.entry2)}});
  }
  return {{"stage", to_string(plan.stage)},
          {"entries", plan.entries.size()},
          {"costs",
           {{"primary", real(plan.costs.primary)},
            {"secondary", real(plan.costs.secondary)},
            {"tertiary", real(plan.costs.tertiary)}}},
          {"marginal_error", real(marginal_error(plan))},
          {"tied_arcs", plan.tied_arcs},
          {"class_mass", {{"H", real(cls.mass_h)}, {"V", real(cls.mass_v)}, {"D", real(cls.mass_d)}}},
          {"comcyc", to_json(cyc.comcyc, plan)},
          {"vercyc", to_json(cyc.vercyc, plan)},
          {"horcyc", to_json(cyc.horcyc, plan)},
          {"single_guard_exceptions", cyc.single_guard_exceptions},
          {"split_fraction", real(audit_map_structure(plan))},
          {"order",
           {{"checked_vertical", order.checked_vertical},
            {"checked_horizontal", order.checked_horizontal},
            {"violations", order_rows}}}};
}

// ---------------------------------------------------------------------------
// CSV.

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header x,y,mass,eps; rows sorted by x then y.
inline void write_measure_csv(std::ostream& out, const DiscreteMeasure& mu) {
  std::vector<Atom> atoms(mu.atoms().begin(), mu.atoms().end());
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
    return a.point.x < b.point.x || (a.point.x == b.point.x && a.point.y < b.point.y);
  });
  out << "x,y,mass,eps\n";
  for (const auto& a : atoms) {
    out << fmt(a.point.x) << ',' << fmt(a.point.y) << ',' << fmt(a.mass) << ',' << fmt(mu.cell_size()) << '\n';
  }
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
    out.push_back(item);
  }
  return out;
}
}  // namespace detail

/// Reads x,y,mass,eps rows; every atom gets area eps^2.
inline DiscreteMeasure read_measure_csv(std::istream& in, const std::string& origin = "csv") {
  std::string line;
  if (!std::getline(in, line) || detail::split_csv(line) != std::vector<std::string>{"x", "y", "mass", "eps"}) {
    throw InputError(origin + ": expected header x,y,mass,eps");
  }
  std::vector<Atom> atoms;
  double eps = 0.0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 4) throw InputError(origin + ":" + std::to_string(lineno) + ": expected 4 fields");
    double v[4];
    for (int k = 0; k < 4; ++k) {
      std::size_t pos = 0;
      try {
        v[k] = std::stod(f[k], &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != f[k].size()) {
        throw InputError(origin + ":" + std::to_string(lineno) + ": bad number '" + f[k] + "'");
      }
    }
    if (eps == 0.0) eps = v[3];
    if (v[3] != eps) throw InputError(origin + ":" + std::to_string(lineno) + ": eps differs between rows");
    atoms.push_back({{v[0], v[1]}, v[2], v[3] * v[3]});
  }
  try {
    return DiscreteMeasure(std::move(atoms), eps, origin);
  } catch (const std::invalid_argument& e) {
    throw InputError(origin + ": " + e.what());
  }
}

inline DiscreteMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open measure file: " + path);
  return read_measure_csv(in, path);
}

inline void write_plan_csv(std::ostream& out, const TransportPlan& plan) {
  out << "src_x,src_y,dst_x,dst_y,mass,class\n";
  for (const auto& e : plan.entries) {
    const Point z = plan.src(e);
    const Point w = plan.dst(e);
    out << fmt(z.x) << ',' << fmt(z.y) << ',' << fmt(w.x) << ',' << fmt(w.y) << ',' << fmt(e.mass) << ','
        << to_string(classify(z, w)) << '\n';
  }
}

inline void write_midpoints_csv(std::ostream& out, const MidpointAssignment& a) {
  out << "src_x,src_y,dst_x,dst_y,mid_x,mid_y,mass,branch\n";
  for (const auto& m : a.midpoints) {
    const auto& e = a.plan.entries[m.entry];
    const Point z = a.plan.src(e);
    const Point w = a.plan.dst(e);
    out << fmt(z.x) << ',' << fmt(z.y) << ',' << fmt(w.x) << ',' << fmt(w.y) << ',' << fmt(m.point.x) << ','
        << fmt(m.point.y) << ',' << fmt(e.mass) << ',' << to_string(m.branch) << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG 1.1 with a fixed viewport: the given box plus a 5% margin, y up.

class Svg {
 public:
  explicit Svg(const Box& view, double width_px = 800.0) : view_(view) {
    const double mx = 0.05 * view.width();
    const double my = 0.05 * view.height();
    view_ = {view.x0 - mx, view.x1 + mx, view.y0 - my, view.y1 + my};
    scale_ = width_px / view_.width();
    width_ = width_px;
    height_ = view_.height() * scale_;
  }

  void polygon(const std::vector<Point>& pts, const std::string& stroke, const std::string& fill = "none",
                double stroke_px = 1.0) {
    body_ << "<polygon points=\"";
    for (const auto& p : pts) body_ << num(sx(p.x)) << ',' << num(sy(p.y)) << ' ';
    body_ << "\" stroke=\"" << stroke << "\" fill=\"" << fill << "\" stroke-width=\"" << num(stroke_px) << "\"/>\n";
  }
  void rect(const Box& b, const std::string& fill, double opacity = 1.0, const std::string& stroke = "none") {
    body_ << "<rect x=\"" << num(sx(b.x0)) << "\" y=\"" << num(sy(b.y1)) << "\" width=\""
          << num(b.width() * scale_) << "\" height=\"" << num(b.height() * scale_) << "\" fill=\"" << fill
          << "\" fill-opacity=\"" << num(opacity) << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void circle(Point c, double r_px, const std::string& fill, double opacity = 1.0) {
    body_ << "<circle cx=\"" << num(sx(c.x)) << "\" cy=\"" << num(sy(c.y)) << "\" r=\"" << num(r_px)
          << "\" fill=\"" << fill << "\" fill-opacity=\"" << num(opacity) << "\"/>\n";
  }
  void line(Point a, Point b, const std::string& stroke, double stroke_px = 0.5, double opacity = 1.0) {
    body_ << "<line x1=\"" << num(sx(a.x)) << "\" y1=\"" << num(sy(a.y)) << "\" x2=\"" << num(sx(b.x))
          << "\" y2=\"" << num(sy(b.y)) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(stroke_px)
          << "\" stroke-opacity=\"" << num(opacity) << "\"/>\n";
  }
  void text(Point at, const std::string& s, double size_px = 14.0) {
    body_ << "<text x=\"" << num(sx(at.x)) << "\" y=\"" << num(sy(at.y)) << "\" font-family=\"sans-serif\" font-size=\""
          << num(size_px) << "\">" << s << "</text>\n";
  }
  /// Legend entry in pixel coordinates from the top-left corner.
  void legend(int row, const std::string& color, const std::string& label) {
    const double y = 18.0 + 18.0 * row;
    body_ << "<rect x=\"10\" y=\"" << num(y - 10) << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    body_ << "<text x=\"28\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"12\">" << label
          << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width_) << "\" height=\""
        << num(height_) << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << num(width_) << "\" height=\"" << num(height_)
        << "\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }
  double sx(double x) const { return (x - view_.x0) * scale_; }
  double sy(double y) const { return (view_.y1 - y) * scale_; }

  Box view_;
  double scale_ = 1.0;
  double width_ = 0.0;
  double height_ = 0.0;
  std::ostringstream body_;
};

/// Outline of an x-simple region sampled at n points per side.
template <XSimpleRegion R>
std::vector<Point> outline(const R& region, int n = 200) {
  std::vector<Point> lower;
  std::vector<Point> upper;
  for (int i = 0; i <= n; ++i) {
    const double x = region.x_min() + (region.x_max() - region.x_min()) * i / n;
    const double lo = region.lower(x);
    const double hi = region.upper(x);
    if (!(hi >= lo)) continue;
    lower.push_back({x, lo});
    upper.push_back({x, hi});
  }
  std::vector<Point> out(lower.begin(), lower.end());
  out.insert(out.end(), upper.rbegin(), upper.rend());
  return out;
}

/// Transport lines, supports and midpoint atoms over the corner domain.
inline std::string local_svg(const CornerDomain& e, const MidpointAssignment& a) {
  Svg svg(e.bounding_box());
  svg.polygon(outline(e), "black", "#f4f4f4", 1.5);
  for (std::size_t k = 0; k < a.plan.entries.size(); ++k) {
    const auto& en = a.plan.entries[k];
    const bool h = a.midpoints[k].branch == MidpointBranch::Corrected;
    svg.line(a.plan.src(en), a.plan.dst(en), h ? "#d08000" : "#909090", 0.4, 0.5);
  }
  for (const auto& at : a.plan.source.atoms()) svg.circle(at.point, 2.0, "#1f4fbf", 0.8);
  for (const auto& at : a.plan.target.atoms()) svg.circle(at.point, 2.0, "#bf1f1f", 0.8);
  for (const auto& m : a.midpoints) {
    svg.circle(m.point, 1.6, m.branch == MidpointBranch::Corrected ? "#1f9f3f" : "#7f3fbf", 0.9);
  }
  svg.legend(0, "#1f4fbf", "source atoms");
  svg.legend(1, "#bf1f1f", "target atoms");
  svg.legend(2, "#1f9f3f", "corrected midpoints (H pairs)");
  svg.legend(3, "#7f3fbf", "Euclidean midpoints");
  return svg.str();
}

/// Neck space, the two sets and the reachable-midpoint region.
inline std::string failure_svg(const FailureDemo& d) {
  double slope = d.ramp_slope;
  const auto x = build_neck(d.h, d.l, d.a0_area, slope);
  if (!x) throw std::invalid_argument("failure_svg: demo has no valid geometry");
  Svg svg(x->bounding_box());
  svg.polygon(outline(*x, 800), "black", "#f4f4f4", 1.0);
  svg.rect(d.a0, "#1f4fbf", 0.6);
  svg.rect(d.a1, "#bf1f1f", 0.6);
  const auto& r = d.reach;
  const auto nx = static_cast<std::int64_t>(std::ceil(r.scan_box.width() / r.grid_step));
  const auto ny = static_cast<std::int64_t>(std::ceil(r.scan_box.height() / r.grid_step));
  if (nx > 0 && ny > 0) {
    const double gx = r.scan_box.width() / nx;
    const double gy = r.scan_box.height() / ny;
    for (std::int64_t i = 0; i < nx; ++i) {
      // Merge vertical runs of reachable cells into one rectangle.
      std::int64_t run = -1;
      for (std::int64_t j = 0; j <= ny; ++j) {
        const Point c{r.scan_box.x0 + (i + 0.5) * gx, r.scan_box.y0 + (j + 0.5) * gy};
        const bool in = j < ny && x->contains(c) && midpoint_reachable(c, d.a0, d.a1);
        if (in && run < 0) run = j;
        if (!in && run >= 0) {
          svg.rect({r.scan_box.x0 + i * gx, r.scan_box.x0 + (i + 1) * gx, r.scan_box.y0 + run * gy,
                    r.scan_box.y0 + j * gy},
                   "#1f9f3f", 0.8);
          run = -1;
        }
      }
    }
  }
  svg.legend(0, "#1f4fbf", "A0 (source)");
  svg.legend(1, "#bf1f1f", "A1 (target)");
  svg.legend(2, "#1f9f3f", "reachable midpoints");
  return svg.str();
}

}  // namespace cdlab::io
