#include "silsm/metrics.hpp"

#include <cstdio>

namespace silsm {

MetricReport evaluate(const SegmentationMask& seg, const SegmentationMask& gt) {
    if (!seg.same_shape(gt)) throw ParameterError("evaluate: segmentation and ground truth dimensions differ");
    MetricReport m;
    for (std::size_t i = 0; i < seg.size(); ++i) {
        const bool s = seg[i] != 0, g = gt[i] != 0;
        m.seg_area += s;
        m.gt_area += g;
        m.intersection += (s && g);
    }
    if (m.gt_area == 0) throw ParameterError("evaluate: ground truth is empty");
    const double inter = static_cast<double>(m.intersection);
    const double uni = static_cast<double>(m.seg_area + m.gt_area - m.intersection);
    m.dice = 2.0 * inter / static_cast<double>(m.seg_area + m.gt_area);
    m.jaccard = inter / uni;
    m.precision = m.seg_area ? inter / static_cast<double>(m.seg_area) : 0.0;
    m.recall = inter / static_cast<double>(m.gt_area);
    return m;
}

nlohmann::json to_json(const MetricReport& m) {
    return {{"dice", m.dice},
            {"jaccard", m.jaccard},
            {"precision", m.precision},
            {"recall", m.recall},
            {"intersection", m.intersection},
            {"seg_area", m.seg_area},
            {"gt_area", m.gt_area}};
}

std::string metrics_csv_header() { return "round,dice,jaccard,precision,recall"; }

std::string metrics_csv_row(int round, const MetricReport& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g", round, m.dice, m.jaccard, m.precision, m.recall);
    return buf;
}

}  // namespace silsm
