#include "hrf/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

#include "hrf/error.hpp"

namespace hrf {

namespace {

constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::pair<double, double> padded_range(std::span<const double> a, std::span<const double> b) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto s : {a, b})
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

SvgFigure::SvgFigure(std::string title, std::string x_label, std::string y_label, double width, double height)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)), width_(width),
      height_(height) {}

void SvgFigure::x_range(double lo, double hi) {
  x_lo_ = lo;
  x_hi_ = hi > lo ? hi : lo + 1.0;
}

void SvgFigure::y_range(double lo, double hi) {
  y_lo_ = lo;
  y_hi_ = hi > lo ? hi : lo + 1.0;
}

double SvgFigure::px(double x) const { return kLeft + (x - x_lo_) / (x_hi_ - x_lo_) * (width_ - kLeft - kRight); }
double SvgFigure::py(double y) const {
  return height_ - kBottom - (y - y_lo_) / (y_hi_ - y_lo_) * (height_ - kTop - kBottom);
}

void SvgFigure::points(std::span<const double> x, std::span<const double> y, const std::string& color, double radius) {
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    body_.push_back("<circle cx=\"" + fixed(px(x[i])) + "\" cy=\"" + fixed(py(y[i])) + "\" r=\"" + fixed(radius) +
                    "\" fill=\"" + color + "\"/>");
}

void SvgFigure::polyline(std::span<const double> x, std::span<const double> y, const std::string& color, double width) {
  std::string pts;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (i) pts += ' ';
    pts += fixed(px(x[i])) + "," + fixed(py(y[i]));
  }
  body_.push_back("<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
                  fixed(width) + "\"/>");
}

void SvgFigure::band(std::span<const double> x, std::span<const double> lower, std::span<const double> upper,
                     const std::string& color, double opacity) {
  const std::size_t n = std::min({x.size(), lower.size(), upper.size()});
  std::string pts;
  for (std::size_t i = 0; i < n; ++i) pts += fixed(px(x[i])) + "," + fixed(py(upper[i])) + " ";
  for (std::size_t i = n; i-- > 0;) pts += fixed(px(x[i])) + "," + fixed(py(lower[i])) + (i ? " " : "");
  body_.push_back("<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"" + fixed(opacity) +
                  "\" stroke=\"none\"/>");
}

void SvgFigure::segment(double x1, double y1, double x2, double y2, const std::string& color, double width) {
  body_.push_back("<line x1=\"" + fixed(px(x1)) + "\" y1=\"" + fixed(py(y1)) + "\" x2=\"" + fixed(px(x2)) + "\" y2=\"" +
                  fixed(py(y2)) + "\" stroke=\"" + color + "\" stroke-width=\"" + fixed(width) + "\"/>");
}

void SvgFigure::text(double x, double y, const std::string& label, double size, bool rotated) {
  const std::string X = fixed(px(x)), Y = fixed(py(y));
  body_.push_back("<text x=\"" + X + "\" y=\"" + Y + "\" font-size=\"" + fixed(size) + "\"" +
                  (rotated ? " transform=\"rotate(-90 " + X + " " + Y + ")\" text-anchor=\"end\"" : "") + ">" +
                  xml_escape(label) + "</text>");
}

void SvgFigure::legend(const std::string& label, const std::string& color) { legend_.emplace_back(label, color); }

std::string SvgFigure::str() const {
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width_) + "\" height=\"" + fixed(height_) +
       "\" viewBox=\"0 0 " + fixed(width_) + " " + fixed(height_) + "\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(width_ / 2) + "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">" + xml_escape(title_) +
       "</text>\n";
  const double x0 = kLeft, x1 = width_ - kRight, y0 = height_ - kBottom, y1 = kTop;
  s += "<rect x=\"" + fixed(x0) + "\" y=\"" + fixed(y1) + "\" width=\"" + fixed(x1 - x0) + "\" height=\"" +
       fixed(y0 - y1) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_lo_ + (x_hi_ - x_lo_) * i / 4.0, fy = y_lo_ + (y_hi_ - y_lo_) * i / 4.0;
    s += "<text x=\"" + fixed(px(fx)) + "\" y=\"" + fixed(y0 + 16) + "\" font-size=\"10\" text-anchor=\"middle\">" +
         tick(fx) + "</text>\n";
    s += "<text x=\"" + fixed(x0 - 6) + "\" y=\"" + fixed(py(fy) + 3) + "\" font-size=\"10\" text-anchor=\"end\">" +
         tick(fy) + "</text>\n";
  }
  s += "<text x=\"" + fixed((x0 + x1) / 2) + "\" y=\"" + fixed(height_ - 15) +
       "\" font-size=\"12\" text-anchor=\"middle\">" + xml_escape(x_label_) + "</text>\n";
  s += "<text x=\"16\" y=\"" + fixed((y0 + y1) / 2) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fixed((y0 + y1) / 2) + ")\">" + xml_escape(y_label_) + "</text>\n";
  for (const auto& e : body_) s += e + "\n";
  for (std::size_t i = 0; i < legend_.size(); ++i) {
    const double ly = y1 + 14 + 16 * static_cast<double>(i);
    s += "<rect x=\"" + fixed(x1 - 150) + "\" y=\"" + fixed(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
         legend_[i].second + "\"/>\n";
    s += "<text x=\"" + fixed(x1 - 135) + "\" y=\"" + fixed(ly) + "\" font-size=\"11\">" + xml_escape(legend_[i].first) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void SvgFigure::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << str();
}

}  // namespace hrf
