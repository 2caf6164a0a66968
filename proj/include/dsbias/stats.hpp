// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dsbias/data.hpp"
#include "dsbias/image.hpp"
#include "dsbias/masks.hpp"

namespace dsbias {

/// Fraction of image pixels covered by each class (index = class id).
/// Planes may overlap, so the entries need not sum to one.
std::array<double, kNumClasses> class_pixel_fraction(const MaskSet& ms);

/// Descriptive statistics of a sample, all in the sample's units.
struct Summary {
  double mean = 0, std = 0, median = 0, q1 = 0, q3 = 0;
  double iqr() const { return q3 - q1; }
};

/// Linear interpolation between closest ranks (h = (n-1)p).
double quantile_type7(std::span<const double> sorted, double p);
/// Mean, population std, and type-7 median / quartiles.
Summary summarize(std::vector<double> values);

struct ClassFractionRow {
  std::string dataset;
  int class_id = 0;
  Summary percent;  // statistics of per-image fractions, in percent
};

struct ClassStatsReport {
  std::vector<ClassFractionRow> rows;  // dataset-major in label order, class ids 0..14
  std::size_t images = 0;
  std::size_t skipped = 0;  // records without readable masks
  std::vector<std::string> warnings;
};

ClassStatsReport dataset_class_stats(const Manifest& manifest, int jobs = 1);

/// `dataset,class_id,class_name,mean,std,median,iqr` with 2-decimal percentages.
std::string class_stats_csv(const ClassStatsReport& report);

struct DistributionReport {
  std::map<std::string, Histogram> per_dataset;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Aggregate intensity histogram of every readable image, per dataset.
DistributionReport distribution_report(const Manifest& manifest, std::size_t n_bins, int jobs = 1);

/// `dataset,bin,lo,hi,count,density`
std::string distribution_csv(const DistributionReport& report);
/// Standalone SVG line plot of per-dataset densities.
std::string distribution_svg(const DistributionReport& report);

}  // namespace dsbias
