#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "unisod/data.hpp"
#include "unisod/metrics.hpp"

// Directory-level evaluation: match prediction/ground-truth stems, score each
// pair, and emit a per-image CSV plus a JSON summary with dataset means.

namespace unisod::metrics {

struct MetricRow {
    std::string id;
    ImageMetrics m;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    ImageMetrics means;
    std::vector<data::Reject> rejects;
    std::vector<std::string> empty_gt_ids;
};

inline MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                                     const std::filesystem::path& gt_dir) {
    auto preds = data::detail::index_dir(pred_dir);
    auto gts = data::detail::index_dir(gt_dir);

    MetricReport report;
    std::map<std::string, int> stems;
    for (const auto& [k, v] : preds) stems[k] |= 1;
    for (const auto& [k, v] : gts) stems[k] |= 2;
    for (const auto& [stem, mask] : stems) {
        if (mask != 3) {
            report.rejects.push_back(
                {stem, mask == 1 ? "missing ground truth" : "missing prediction"});
            continue;
        }
        img::GrayF gt = data::binarize_mask(img::load_gray(gts[stem]));
        img::GrayF pred = img::load_gray(preds[stem]);
        if (pred.height != gt.height || pred.width != gt.width)
            pred = img::resize_bilinear(pred, gt.height, gt.width);
        MetricRow row{stem, evaluate_pair(pred, gt)};
        if (row.m.empty_gt) report.empty_gt_ids.push_back(stem);
        report.rows.push_back(std::move(row));
    }
    if (!report.rows.empty()) {
        double n = static_cast<double>(report.rows.size());
        for (const auto& r : report.rows) {
            report.means.mae += r.m.mae / n;
            report.means.s += r.m.s / n;
            report.means.e_mean += r.m.e_mean / n;
            report.means.e_adaptive += r.m.e_adaptive / n;
            report.means.fw += r.m.fw / n;
        }
    }
    return report;
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::string& dataset,
                              const MetricReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write CSV: " + path.string());
    out << "dataset,image_id,mae,s,e_mean,e_adaptive,fw\n";
    out << std::setprecision(17);
    for (const auto& r : report.rows)
        out << dataset << "," << r.id << "," << r.m.mae << "," << r.m.s << "," << r.m.e_mean
            << "," << r.m.e_adaptive << "," << r.m.fw << "\n";
}

inline void write_metrics_json(const std::filesystem::path& path, const std::string& dataset,
                               const MetricReport& report) {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["images"] = report.rows.size();
    j["means"] = {{"mae", report.means.mae},
                  {"s", report.means.s},
                  {"e_mean", report.means.e_mean},
                  {"e_adaptive", report.means.e_adaptive},
                  {"fw", report.means.fw}};
    j["empty_gt"] = report.empty_gt_ids;
    nlohmann::json rejects = nlohmann::json::array();
    for (const auto& r : report.rejects) rejects.push_back({{"id", r.id}, {"reason", r.reason}});
    j["rejects"] = rejects;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write JSON summary: " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace unisod::metrics
