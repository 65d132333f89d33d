#include "decegy/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

namespace decegy {
namespace {

constexpr std::array<const char*, kCategoryCount> kCategoryColors{"#4e79a7", "#f28e2b", "#59a14f",
                                                                   "#e15759", "#b07aa1", "#edc948"};
constexpr const char* kMeasuredColor = "#1f3a68";

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// 1, 2 or 5 times a power of ten, giving about five ticks up to `max`.
double tick_step(double max) {
  const double raw = max / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::vector<BreakdownRow> breakdown_report(std::span<const BitstreamRecord> records, const SpecificEnergies& e) {
  std::vector<BreakdownRow> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    BreakdownRow row;
    row.stream_id = r.stream_id;
    row.codec = r.codec();
    row.measured = r.energy_joules;
    row.estimated = predict_feature_model(e, r.features);
    row.categories = category_breakdown(e, r.features);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_breakdown_csv(std::ostream& out, std::span<const BreakdownRow> rows) {
  out << "stream_id,E_dec,E_hat";
  for (Category c : kAllCategories) out << ',' << to_string(c);
  out << '\n';
  for (const auto& r : rows) {
    out << r.stream_id << ',' << (r.measured ? format_number(*r.measured) : std::string()) << ','
        << format_number(r.estimated);
    for (double v : r.categories) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_breakdown_svg(std::ostream& out, std::span<const BreakdownRow> rows) {
  constexpr double left = 160, right = 40, top = 50, bar_h = 22, pair_gap = 18, plot_w = 560;
  const double legend_h = 40;
  double max_e = 0;
  for (const auto& r : rows) {
    max_e = std::max(max_e, r.estimated);
    if (r.measured) max_e = std::max(max_e, *r.measured);
  }
  if (!(max_e > 0)) max_e = 1;
  const double step = tick_step(max_e);
  const double axis_max = std::ceil(max_e / step) * step;
  const double plot_h = static_cast<double>(rows.size()) * (2 * bar_h + pair_gap);
  const double width = left + plot_w + right;
  const double height = top + plot_h + 40 + legend_h;
  auto xpos = [&](double joules) { return left + plot_w * joules / axis_max; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\""
      << fixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "  <text x=\"" << fixed(left + plot_w / 2, 1) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << "Measured and estimated decoding energy</text>\n";

  for (double t = 0; t <= axis_max + step * 1e-9; t += step) {
    const double x = xpos(t);
    out << "  <line x1=\"" << fixed(x, 1) << "\" y1=\"" << fixed(top - 6, 1) << "\" x2=\"" << fixed(x, 1)
        << "\" y2=\"" << fixed(top + plot_h, 1) << "\" stroke=\"#dddddd\"/>\n";
    out << "  <text x=\"" << fixed(x, 1) << "\" y=\"" << fixed(top + plot_h + 16, 1)
        << "\" text-anchor=\"middle\">" << format_number(std::round(t / step) * step) << "</text>\n";
  }
  out << "  <text x=\"" << fixed(left + plot_w / 2, 1) << "\" y=\"" << fixed(top + plot_h + 34, 1)
      << "\" text-anchor=\"middle\">Energy [J]</text>\n";

  double y = top;
  for (const auto& r : rows) {
    const std::string label = xml_escape(r.stream_id + " (" + std::string(to_string(r.codec)) + ")");
    out << "  <g class=\"stream\" data-stream=\"" << xml_escape(r.stream_id) << "\">\n";
    out << "    <text x=\"" << fixed(left - 8, 1) << "\" y=\"" << fixed(y + bar_h * 0.7, 1)
        << "\" text-anchor=\"end\">" << label << " E_dec</text>\n";
    out << "    <rect class=\"measured\" x=\"" << fixed(left, 1) << "\" y=\"" << fixed(y, 1) << "\" width=\""
        << fixed(r.measured ? xpos(*r.measured) - left : 0.0, 3) << "\" height=\"" << fixed(bar_h, 1)
        << "\" fill=\"" << kMeasuredColor << "\"><title>E_dec = "
        << (r.measured ? format_number(*r.measured) : std::string("n/a")) << " J</title></rect>\n";
    y += bar_h;
    out << "    <text x=\"" << fixed(left - 8, 1) << "\" y=\"" << fixed(y + bar_h * 0.7, 1)
        << "\" text-anchor=\"end\">E_hat</text>\n";
    out << "    <g class=\"estimated\">\n";
    double acc = 0;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      const double v = r.categories[c];
      const double x0 = xpos(acc);
      acc += v;
      out << "      <rect class=\"segment\" data-category=\"" << to_string(kAllCategories[c]) << "\" x=\""
          << fixed(x0, 3) << "\" y=\"" << fixed(y, 1) << "\" width=\"" << fixed(std::max(xpos(acc) - x0, 0.0), 3)
          << "\" height=\"" << fixed(bar_h, 1) << "\" fill=\"" << kCategoryColors[c] << "\"><title>"
          << to_string(kAllCategories[c]) << " = " << format_number(v) << " J</title></rect>\n";
    }
    out << "    </g>\n  </g>\n";
    y += bar_h + pair_gap;
  }

  double lx = left;
  const double ly = top + plot_h + 48;
  auto legend = [&](const char* color, std::string_view text) {
    out << "  <rect x=\"" << fixed(lx, 1) << "\" y=\"" << fixed(ly, 1) << "\" width=\"12\" height=\"12\" fill=\""
        << color << "\"/>\n";
    out << "  <text x=\"" << fixed(lx + 16, 1) << "\" y=\"" << fixed(ly + 10, 1) << "\">" << text << "</text>\n";
    lx += 28 + 8.0 * static_cast<double>(text.size());
  };
  legend(kMeasuredColor, "E_dec");
  for (std::size_t c = 0; c < kCategoryCount; ++c) legend(kCategoryColors[c], to_string(kAllCategories[c]));
  out << "</svg>\n";
}

}  // namespace decegy
