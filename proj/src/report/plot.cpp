#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "tp/io.hpp"
#include "tp/report.hpp"

namespace fs = std::filesystem;

namespace tp {

namespace {

struct Color {
  float r, g, b;
};

const Color kSeries[] = {
    {0.85f, 0.25f, 0.25f}, {0.25f, 0.55f, 0.85f}, {0.25f, 0.7f, 0.35f},
    {0.8f, 0.6f, 0.2f},    {0.6f, 0.35f, 0.75f},  {0.3f, 0.3f, 0.3f},
    {0.85f, 0.45f, 0.65f},
};

struct Canvas {
  Image img;

  Canvas(int w, int h) : img(w, h, 3) {
    for (auto& v : img.data) v = 1.0f;
  }

  void set(int x, int y, Color c) {
    if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
    img.at(x, y, 0) = c.r;
    img.at(x, y, 1) = c.g;
    img.at(x, y, 2) = c.b;
  }

  void line(double x0, double y0, double x1, double y1, Color c) {
    double dx = x1 - x0, dy = y1 - y0;
    int steps = int(std::max(std::abs(dx), std::abs(dy))) + 1;
    for (int i = 0; i <= steps; ++i) {
      double t = double(i) / steps;
      set(int(std::lround(x0 + t * dx)), int(std::lround(y0 + t * dy)), c);
    }
  }

  void rect(int x0, int y0, int x1, int y1, Color c) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) set(x, y, c);
  }
};

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("report: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

constexpr int kW = 640, kH = 400;
constexpr int kMargin = 40;

// y mapped with a log10 scale when all values are positive and spread wide
void plot_series(Canvas& cv, const std::vector<std::vector<double>>& series) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series)
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      n = std::max(n, s.size());
    }
  if (!(hi > lo)) hi = lo + 1;
  bool logscale = lo > 0 && hi / lo > 50;
  auto ymap = [&](double v) {
    double a = logscale ? std::log10(v) : v;
    double l = logscale ? std::log10(lo) : lo;
    double h = logscale ? std::log10(hi) : hi;
    return kH - kMargin - (a - l) / (h - l) * (kH - 2 * kMargin);
  };
  Color axis = {0.15f, 0.15f, 0.15f};
  cv.line(kMargin, kH - kMargin, kW - kMargin / 2, kH - kMargin, axis);
  cv.line(kMargin, kH - kMargin, kMargin, kMargin / 2, axis);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ys = series[s];
    if (ys.size() < 2) continue;
    Color c = kSeries[s % std::size(kSeries)];
    for (std::size_t i = 1; i < ys.size(); ++i) {
      double x0 = kMargin + double(i - 1) / double(n - 1) * (kW - 1.5 * kMargin);
      double x1 = kMargin + double(i) / double(n - 1) * (kW - 1.5 * kMargin);
      cv.line(x0, ymap(ys[i - 1]), x1, ymap(ys[i]), c);
    }
    // legend swatch
    cv.rect(kW - kMargin * 3, kMargin / 2 + int(s) * 12, kW - kMargin * 3 + 16,
            kMargin / 2 + int(s) * 12 + 8, c);
  }
}

}  // namespace

void plot_metrics(const std::string& metrics_csv, const std::string& out_png) {
  auto rows = read_csv(metrics_csv);
  contract(rows.size() >= 2 && rows[0].size() >= 7, "report: malformed metrics csv");
  // columns rgb, depth, dist, norm, total
  std::vector<std::vector<double>> series(5);
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (int c = 0; c < 5; ++c) series[c].push_back(std::stod(rows[i][2 + c]));
  Canvas cv(kW, kH);
  plot_series(cv, series);
  write_png(out_png, cv.img);
}

void plot_ablation(const std::string& ablation_csv, const std::string& out_png) {
  auto rows = read_csv(ablation_csv);
  contract(rows.size() >= 2, "report: malformed ablation csv");
  // bar chart of mean probe accuracy per variant
  std::vector<std::string> names;
  std::map<std::string, std::pair<double, int>> acc;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 4 || rows[i][1] != "probe_acc" || rows[i][3] == "failed") continue;
    if (!acc.count(rows[i][0])) names.push_back(rows[i][0]);
    auto& [s, n] = acc[rows[i][0]];
    s += std::stod(rows[i][3]);
    ++n;
  }
  Canvas cv(kW, kH);
  Color axis = {0.15f, 0.15f, 0.15f};
  cv.line(kMargin, kH - kMargin, kW - kMargin / 2, kH - kMargin, axis);
  cv.line(kMargin, kH - kMargin, kMargin, kMargin / 2, axis);
  int nb = int(names.size());
  for (int i = 0; i < nb; ++i) {
    auto [s, n] = acc[names[i]];
    double mean = n ? s / n : 0.0;
    int x0 = kMargin + 10 + i * (kW - 2 * kMargin) / std::max(nb, 1);
    int bw = (kW - 2 * kMargin) / std::max(nb, 1) - 20;
    int top = int(kH - kMargin - mean * (kH - 2 * kMargin));
    cv.rect(x0, top, x0 + bw, kH - kMargin - 1, kSeries[i % std::size(kSeries)]);
  }
  write_png(out_png, cv.img);
}

void write_report(const std::string& run_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream md(fs::path(out_dir) / "summary.md");
  md << "# Run summary\n\n";

  std::string metrics = (fs::path(run_dir) / "metrics.csv").string();
  if (fs::exists(metrics)) {
    plot_metrics(metrics, (fs::path(out_dir) / "loss_curves.png").string());
    auto rows = read_csv(metrics);
    md << "## Training\n\n";
    md << "Steps logged: " << rows.size() - 1 << "\n\n";
    if (rows.size() >= 2) {
      const auto& first = rows[1];
      const auto& last = rows.back();
      md << "| metric | first | last |\n|---|---|---|\n";
      const char* cols[] = {"rgb", "depth", "dist", "norm", "total"};
      for (int c = 0; c < 5; ++c)
        md << "| " << cols[c] << " | " << first[2 + c] << " | " << last[2 + c] << " |\n";
      md << "\n";
    }
    md << "![loss curves](loss_curves.png)\n\n";
  }

  std::string ablation = (fs::path(run_dir) / "ablation.csv").string();
  if (fs::exists(ablation)) {
    plot_ablation(ablation, (fs::path(out_dir) / "ablation.png").string());
    md << "## Ablation\n\n";
    auto rows = read_csv(ablation);
    md << "| variant | metric | seed | value |\n|---|---|---|---|\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 4) continue;
      md << "| " << rows[i][0] << " | " << rows[i][1] << " | " << rows[i][2] << " | "
         << rows[i][3] << " |\n";
    }
    md << "\n![ablation](ablation.png)\n";
  }
}

}  // namespace tp
