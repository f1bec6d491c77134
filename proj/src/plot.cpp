#include "tpgan/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>

#include "tpgan/error.hpp"
#include "tpgan/image_io.hpp"

namespace tpgan {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{225, 225, 225};
constexpr std::array<Rgb, 8> kPalette{{{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
                                       {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}}};

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};
constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}}, {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'|', {0x04, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}}, {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
};

const Glyph* glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kFont) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {}

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = c.r, p[1] = c.g, p[2] = c.b;
  }

  void fill(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
  }

  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      fill(x - thickness / 2, y - thickness / 2, x + (thickness - 1) / 2, y + (thickness - 1) / 2, c);
    }
  }

  /// Text with its top-left corner at (x, y); scale multiplies the 5x7 cell.
  void text(int x, int y, const std::string& s, Rgb c, int scale = 1) {
    for (char ch : s) {
      if (const Glyph* g = glyph(ch)) {
        for (int r = 0; r < 7; ++r)
          for (int col = 0; col < 5; ++col)
            if (g->rows[r] & (0x10 >> col)) fill(x + col * scale, y + r * scale, x + col * scale + scale - 1, y + r * scale + scale - 1, c);
      }
      x += 6 * scale;
    }
  }

  /// Text rotated 90 degrees counter-clockwise, reading bottom to top from (x, y).
  void vertical_text(int x, int y, const std::string& s, Rgb c) {
    for (char ch : s) {
      if (const Glyph* g = glyph(ch)) {
        for (int r = 0; r < 7; ++r)
          for (int col = 0; col < 5; ++col)
            if (g->rows[r] & (0x10 >> col)) set(x + r, y - col, c);
      }
      y -= 6;
    }
  }

  void save(const std::filesystem::path& path) const { write_png(path, Image8{w_, h_, 3, px_}); }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

int text_width(const std::string& s, int scale = 1) { return static_cast<int>(s.size()) * 6 * scale; }

std::string tick_label(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) >= 1e4 || std::abs(v) < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.0e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.3g", v);
  }
  return buf;
}

/// Roughly five round ticks spanning [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

struct Frame {
  int left = 70, right = 20, top = 40, bottom = 50;
  int width = 800, height = 500;
  int plot_w() const { return width - left - right; }
  int plot_h() const { return height - top - bottom; }
};

void draw_frame(Canvas& cv, const Frame& f, const std::string& title, const std::string& x_label,
                const std::string& y_label) {
  cv.text((f.width - text_width(title, 2)) / 2, 10, title, kBlack, 2);
  cv.text(f.left + (f.plot_w() - text_width(x_label)) / 2, f.height - 15, x_label, kBlack);
  cv.vertical_text(6, f.top + (f.plot_h() + text_width(y_label)) / 2, y_label, kBlack);
  cv.line(f.left, f.top, f.left, f.top + f.plot_h(), kBlack);
  cv.line(f.left, f.top + f.plot_h(), f.left + f.plot_w(), f.top + f.plot_h(), kBlack);
}

void draw_legend(Canvas& cv, const Frame& f, const std::vector<std::string>& names) {
  int y = f.top + 6;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const int x = f.left + f.plot_w() - text_width(names[i]) - 24;
    cv.fill(x, y + 1, x + 12, y + 6, kPalette[i % kPalette.size()]);
    cv.text(x + 16, y, names[i], kBlack);
    y += 12;
  }
}

}  // namespace

void line_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series, bool log_y) {
  Frame f;
  Canvas cv(f.width, f.height);
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  auto usable = [&](double y) { return std::isfinite(y) && (!log_y || y > 0.0); };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) fail(Errc::InvalidArgument, "series '" + s.label + "' has mismatched x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.y[i]) || !std::isfinite(s.x[i])) continue;
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;

  auto px = [&](double x) { return f.left + (x - x0) / (x1 - x0) * f.plot_w(); };
  auto py = [&](double y) { return f.top + f.plot_h() - (y - y0) / (y1 - y0) * f.plot_h(); };

  for (double t : nice_ticks(y0, y1)) {
    cv.line(f.left + 1, py(t), f.left + f.plot_w(), py(t), kGrid);
    const std::string lab = log_y ? "1E" + tick_label(t) : tick_label(t);
    cv.text(f.left - text_width(lab) - 4, static_cast<int>(py(t)) - 3, lab, kBlack);
  }
  for (double t : nice_ticks(x0, x1)) {
    cv.line(px(t), f.top + f.plot_h(), px(t), f.top + f.plot_h() + 4, kBlack);
    const std::string lab = tick_label(t);
    cv.text(static_cast<int>(px(t)) - text_width(lab) / 2, f.top + f.plot_h() + 8, lab, kBlack);
  }
  draw_frame(cv, f, title, x_label, log_y ? y_label + " (log10)" : y_label);

  std::vector<std::string> names;
  for (std::size_t s = 0; s < series.size(); ++s) {
    names.push_back(series[s].label);
    const Rgb c = kPalette[s % kPalette.size()];
    bool have_prev = false;
    double lx = 0, ly = 0;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!usable(series[s].y[i])) {
        have_prev = false;
        continue;
      }
      const double cx = px(series[s].x[i]), cy = py(ty(series[s].y[i]));
      if (have_prev) cv.line(lx, ly, cx, cy, c, 2);
      cv.fill(static_cast<int>(cx) - 1, static_cast<int>(cy) - 1, static_cast<int>(cx) + 1, static_cast<int>(cy) + 1, c);
      lx = cx, ly = cy, have_prev = true;
    }
  }
  draw_legend(cv, f, names);
  cv.save(path);
}

void bar_plot(const std::filesystem::path& path, const std::string& title, const std::string& y_label,
              const std::vector<std::string>& series_names, const std::vector<BarGroup>& groups) {
  Frame f;
  Canvas cv(f.width, f.height);
  double hi = 0.0;
  for (const auto& g : groups) {
    if (g.values.size() != series_names.size()) fail(Errc::InvalidArgument, "bar group '" + g.label + "' size mismatch");
    for (double v : g.values)
      if (std::isfinite(v)) hi = std::max(hi, v);
  }
  if (hi <= 0.0) hi = 1.0;
  hi *= 1.1;
  auto py = [&](double y) { return f.top + f.plot_h() - y / hi * f.plot_h(); };
  for (double t : nice_ticks(0.0, hi)) {
    cv.line(f.left + 1, py(t), f.left + f.plot_w(), py(t), kGrid);
    const std::string lab = tick_label(t);
    cv.text(f.left - text_width(lab) - 4, static_cast<int>(py(t)) - 3, lab, kBlack);
  }
  draw_frame(cv, f, title, "", y_label);

  const double group_w = static_cast<double>(f.plot_w()) / std::max<std::size_t>(groups.size(), 1);
  const double bar_w = group_w * 0.8 / std::max<std::size_t>(series_names.size(), 1);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double gx = f.left + gi * group_w + group_w * 0.1;
    for (std::size_t s = 0; s < series_names.size(); ++s) {
      const double v = groups[gi].values[s];
      if (!std::isfinite(v)) continue;
      const int xa = static_cast<int>(gx + s * bar_w), xb = static_cast<int>(gx + (s + 1) * bar_w) - 2;
      cv.fill(xa, static_cast<int>(py(v)), xb, f.top + f.plot_h() - 1, kPalette[s % kPalette.size()]);
      const std::string lab = tick_label(v);
      cv.text((xa + xb - text_width(lab)) / 2, static_cast<int>(py(v)) - 10, lab, kBlack);
    }
    const std::string& lab = groups[gi].label;
    cv.text(static_cast<int>(gx + group_w * 0.4) - text_width(lab) / 2, f.top + f.plot_h() + 8, lab, kBlack);
  }
  draw_legend(cv, f, series_names);
  cv.save(path);
}

}  // namespace tpgan
