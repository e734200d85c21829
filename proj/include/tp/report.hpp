#pragma once

#include <string>

// Turns run outputs (metrics.csv, ablation.csv) into simple self-drawn PNG
// charts and a markdown summary.

namespace tp {

void plot_metrics(const std::string& metrics_csv, const std::string& out_png);
void plot_ablation(const std::string& ablation_csv, const std::string& out_png);

// Collects whatever of metrics.csv / ablation.csv exists under run_dir into
// out_dir: loss_curves.png, ablation.png, summary.md.
void write_report(const std::string& run_dir, const std::string& out_dir);

}  // namespace tp
