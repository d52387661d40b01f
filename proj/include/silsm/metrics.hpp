#pragma once

#include <cstddef>
#include <string>

#include "json.hpp"

#include "silsm/grid.hpp"

namespace silsm {

struct MetricReport {
    double dice = 0.0;
    double jaccard = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t intersection = 0;
    std::size_t seg_area = 0;
    std::size_t gt_area = 0;
};

/// Overlap metrics of seg against gt. Throws ParameterError if gt is empty or shapes differ.
MetricReport evaluate(const SegmentationMask& seg, const SegmentationMask& gt);

nlohmann::json to_json(const MetricReport& m);

std::string metrics_csv_header();
std::string metrics_csv_row(int round, const MetricReport& m);

}  // namespace silsm
