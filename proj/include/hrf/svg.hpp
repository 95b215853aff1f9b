#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hrf {

/// Minimal deterministic SVG plot: data-space primitives mapped onto a fixed
/// canvas with margins. Coordinates are printed with fixed precision so the
/// same figure always produces the same bytes.
class SvgFigure {
 public:
  SvgFigure(std::string title, std::string x_label, std::string y_label, double width = 720, double height = 480);

  void x_range(double lo, double hi);
  void y_range(double lo, double hi);

  /// One <circle> per point.
  void points(std::span<const double> x, std::span<const double> y, const std::string& color, double radius = 2.5);
  void polyline(std::span<const double> x, std::span<const double> y, const std::string& color, double width = 1.5);
  /// Shaded region between two curves over x.
  void band(std::span<const double> x, std::span<const double> lower, std::span<const double> upper,
            const std::string& color, double opacity = 0.25);
  void segment(double x1, double y1, double x2, double y2, const std::string& color, double width = 1.0);
  /// Text anchored at a data point; rotated labels read bottom-up.
  void text(double x, double y, const std::string& label, double size = 10, bool rotated = false);
  void legend(const std::string& label, const std::string& color);

  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  double px(double x) const;
  double py(double y) const;

  std::string title_, x_label_, y_label_;
  double width_, height_;
  double x_lo_ = 0, x_hi_ = 1, y_lo_ = 0, y_hi_ = 1;
  std::vector<std::string> body_;
  std::vector<std::pair<std::string, std::string>> legend_;
};

/// Range of the values padded by 5% on each side (unit span if constant).
std::pair<double, double> padded_range(std::span<const double> a, std::span<const double> b = {});

std::string xml_escape(const std::string& text);

}  // namespace hrf
