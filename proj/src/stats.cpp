// SPDX-License-Identifier: Apache-2.0
#include "dsbias/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <optional>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"
#include "dsbias/parallel.hpp"

namespace dsbias {

namespace {

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::array<double, kNumClasses> class_pixel_fraction(const MaskSet& ms) {
  std::array<double, kNumClasses> out{};
  const double total = static_cast<double>(ms.width() * ms.height());
  if (total == 0) return out;
  out[0] = static_cast<double>(ms.background().popcount()) / total;
  for (int id = 1; id <= kNumPlanes; ++id)
    out[static_cast<std::size_t>(id)] = static_cast<double>(ms.plane(id).popcount()) / total;
  return out;
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidInput("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("summarize: empty sample");
  std::sort(values.begin(), values.end());
  Summary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.std += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(values.size()));
  s.q1 = quantile_type7(values, 0.25);
  s.median = quantile_type7(values, 0.5);
  s.q3 = quantile_type7(values, 0.75);
  return s;
}

ClassStatsReport dataset_class_stats(const Manifest& manifest, int jobs) {
  const std::size_t n = manifest.size();
  std::vector<std::optional<std::array<double, kNumClasses>>> fractions(n);
  std::vector<std::string> errors(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto dir = manifest.mask_dir(i);
    if (dir.empty()) {
      errors[i] = manifest.records()[i].image_path + ": no mask directory";
      return;
    }
    try {
      const GrayImage img = read_pgm(manifest.image_path(i));
      fractions[i] = class_pixel_fraction(read_mask_set(dir, manifest.stem(i), img.width(), img.height()));
    } catch (const DataError& e) {
      errors[i] = e.what();
    }
  });

  ClassStatsReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (fractions[i]) {
      ++report.images;
    } else {
      ++report.skipped;
      report.warnings.push_back(errors[i]);
    }
  }
  for (const auto& dataset : manifest.labels()) {
    std::array<std::vector<double>, kNumClasses> samples;
    for (std::size_t i = 0; i < n; ++i)
      if (fractions[i] && manifest.records()[i].dataset == dataset)
        for (std::size_t c = 0; c < kNumClasses; ++c) samples[c].push_back(100.0 * (*fractions[i])[c]);
    if (samples[0].empty()) continue;
    for (int c = 0; c < kNumClasses; ++c)
      report.rows.push_back({dataset, c, summarize(samples[static_cast<std::size_t>(c)])});
  }
  return report;
}

std::string class_stats_csv(const ClassStatsReport& report) {
  std::string out = "dataset,class_id,class_name,mean,std,median,iqr\n";
  for (const auto& r : report.rows)
    out += r.dataset + "," + std::to_string(r.class_id) + "," + std::string(anatomy_name(r.class_id)) + "," +
           fmt2(r.percent.mean) + "," + fmt2(r.percent.std) + "," + fmt2(r.percent.median) + "," +
           fmt2(r.percent.iqr()) + "\n";
  return out;
}

DistributionReport distribution_report(const Manifest& manifest, std::size_t n_bins, int jobs) {
  const std::size_t n = manifest.size();
  std::vector<std::optional<Histogram>> hists(n);
  std::vector<std::string> errors(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      hists[i] = histogram(read_pgm(manifest.image_path(i)), n_bins);
    } catch (const DataError& e) {
      errors[i] = e.what();
    }
  });
  DistributionReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (!hists[i]) {
      ++report.skipped;
      report.warnings.push_back(errors[i]);
      continue;
    }
    const std::string& ds = manifest.records()[i].dataset;
    auto [it, fresh] = report.per_dataset.try_emplace(ds, *hists[i]);
    if (!fresh)
      for (std::size_t b = 0; b < n_bins; ++b) it->second.counts[b] += hists[i]->counts[b];
  }
  return report;
}

std::string distribution_csv(const DistributionReport& report) {
  std::string out = "dataset,bin,lo,hi,count,density\n";
  for (const auto& [ds, h] : report.per_dataset) {
    const double total = static_cast<double>(h.total());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%llu,%.8f", b, h.bin_edges[b], h.bin_edges[b + 1],
                    static_cast<unsigned long long>(h.counts[b]), total > 0 ? h.counts[b] / total : 0.0);
      out += ds + "," + buf + "\n";
    }
  }
  return out;
}

std::string distribution_svg(const DistributionReport& report) {
  constexpr double kW = 640, kH = 400, kPad = 48;
  static constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  double peak = 0.0;
  for (const auto& [ds, h] : report.per_dataset)
    for (auto c : h.counts) peak = std::max(peak, static_cast<double>(c) / std::max<double>(1, h.total()));
  if (peak <= 0) peak = 1;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                kPad, kH - kPad, kW - kPad, kH - kPad, kPad, kPad, kPad, kH - kPad);
  svg += buf;
  svg += "<text x=\"320\" y=\"390\" text-anchor=\"middle\" font-size=\"12\">pixel value</text>\n";
  svg += "<text x=\"14\" y=\"200\" font-size=\"12\" transform=\"rotate(-90 14 200)\" text-anchor=\"middle\">density</text>\n";
  std::size_t k = 0;
  for (const auto& [ds, h] : report.per_dataset) {
    const double total = std::max<double>(1, static_cast<double>(h.total()));
    const double lo = h.bin_edges.front(), hi = h.bin_edges.back();
    std::string pts;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      const double centre = 0.5 * (h.bin_edges[b] + h.bin_edges[b + 1]);
      const double x = kPad + (centre - lo) / (hi - lo) * (kW - 2 * kPad);
      const double y = kH - kPad - (h.counts[b] / total) / peak * (kH - 2 * kPad);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
      pts += buf;
    }
    const char* color = kColors[k % kColors.size()];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"12\" fill=\"%s\">", kW - kPad - 120,
                  kPad + 16.0 * static_cast<double>(k), color);
    svg += buf + ds + "</text>\n";
    ++k;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace dsbias
